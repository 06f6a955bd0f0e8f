"""Command-line entry point: ``hrdd fit | simulate | bandwidth | rerun``."""

from __future__ import annotations

import argparse
import hashlib
import logging
import sys
import warnings
from pathlib import Path

from .bandwidth import MODES, fit_adaptive, fit_at_bandwidths, select_bandwidths
from .data import Hyperparams
from .exceptions import HRDDError
from .io import load_csv, read_manifest, write_manifest, write_plan, write_score_trace, write_summaries
from .simulation import METHODS, DGPConfig, RunSettings, default_threads, run_replications, write_metrics_csv

logger = logging.getLogger("hrdd")

FLAG_TABLE = """\
commands:
  fit        fit the hierarchical model to a CSV file (columns group,y,x)
  simulate   Monte Carlo study on the built-in data-generating processes
  bandwidth  run bandwidth selection only and write the plan
  rerun      repeat a run from its manifest.json

common flags:
  --output DIR          output directory (created if needed)           [required]
  --seed INT            master seed                                     [0]
  --n-iter INT          total sweeps of the final chain                 [1500]
  --n-burn INT          discarded sweeps                                [500]
  --L INT               number of candidate bandwidths                  [8]
  --q INT               local polynomial order per side                 [1]
  --kernel NAME         triangular | window                             [triangular]
  --spike-slab          spike-and-slab prior on the group effects
  --no-robust           disable the robust error mixture
  --binary              0/1 outcome (Polya-gamma logistic model)
  --threads INT         worker processes (env HRDD_THREADS)             [1]

fit / bandwidth:
  --input FILE          CSV with header group,y,x                       [required]
  --threshold REAL      cutoff c, treatment is x >= c                   [required]
  --mode MODE           local | global | fixed (fit only)               [global]
  --h REAL              bandwidth for --mode fixed
  --write-draws         also write every retained effect draw (fit)

simulate:
  --scenario CODE       error-effect code such as A-I (repeatable)      [A-I]
  --G INT               number of groups, multiple of 4                 [20]
  --R INT               replications                                    [50]
  --n-g N1,N2,N3,N4     cluster sample sizes                            [100,200,300,400]
  --methods LIST        comma list of hrdd-g,hrdd-l,srdd,rdd             [hrdd-g,hrdd-l,srdd,rdd]

rerun:
  --manifest FILE       manifest.json written by an earlier run         [required]

exit status: 0 success, 1 runtime error, 2 usage error
"""


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _nonneg_int(text):
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected a nonnegative integer, got {text}")
    return value


def _positive_real(text):
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return value


def _add_model_flags(p):
    p.add_argument("--output", required=True)
    p.add_argument("--seed", type=_nonneg_int, default=0)
    p.add_argument("--n-iter", type=_positive_int, default=1500)
    p.add_argument("--n-burn", type=_nonneg_int, default=500)
    p.add_argument("--L", type=_positive_int, default=8)
    p.add_argument("--q", type=_positive_int, default=1)
    p.add_argument("--kernel", choices=("triangular", "window"), default="triangular")
    p.add_argument("--spike-slab", action="store_true")
    p.add_argument("--no-robust", action="store_true")
    p.add_argument("--binary", action="store_true")
    p.add_argument("--threads", type=_positive_int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hrdd", add_help=True, description="Hierarchical RDD",
                     formatter_class=argparse.RawDescriptionHelpFormatter, epilog=FLAG_TABLE)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    fit = sub.add_parser("fit")
    _add_model_flags(fit)
    fit.add_argument("--input", required=True)
    fit.add_argument("--threshold", type=float, required=True)
    fit.add_argument("--mode", choices=MODES + ("fixed",), default="global")
    fit.add_argument("--h", type=_positive_real, default=None)
    fit.add_argument("--write-draws", action="store_true")

    bw = sub.add_parser("bandwidth")
    _add_model_flags(bw)
    bw.add_argument("--input", required=True)
    bw.add_argument("--threshold", type=float, required=True)
    bw.add_argument("--mode", choices=MODES, default="global")

    sim = sub.add_parser("simulate")
    _add_model_flags(sim)
    sim.add_argument("--scenario", action="append", default=None)
    sim.add_argument("--G", type=_positive_int, default=20)
    sim.add_argument("--R", type=_positive_int, default=50)
    sim.add_argument("--n-g", default="100,200,300,400")
    sim.add_argument("--methods", default=",".join(METHODS))

    rerun = sub.add_parser("rerun")
    rerun.add_argument("--manifest", required=True)
    rerun.add_argument("--output", default=None)
    rerun.add_argument("--threads", type=_positive_int, default=None)
    return parser


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def config_from_args(args) -> dict:
    """Resolved, thread-independent configuration of a run."""
    cfg = {
        "command": args.command, "seed": args.seed, "n_iter": args.n_iter,
        "n_burn": args.n_burn, "L": args.L, "q": args.q, "kernel": args.kernel,
        "spike_slab": args.spike_slab, "robust": not args.no_robust, "binary": args.binary,
    }
    if args.n_iter <= args.n_burn:
        raise UsageError("--n-iter must exceed --n-burn")
    if args.command in ("fit", "bandwidth"):
        path = Path(args.input).resolve()
        if not path.is_file():
            raise UsageError(f"input file not found: {args.input}")
        cfg.update(input=str(path), input_sha256=_sha256(path), threshold=args.threshold,
                   mode=args.mode)
        if args.command == "fit":
            if args.mode == "fixed" and args.h is None:
                raise UsageError("--mode fixed needs --h")
            cfg.update(h=args.h, write_draws=args.write_draws)
    elif args.command == "simulate":
        try:
            sizes = [int(v) for v in args.n_g.split(",")]
        except ValueError:
            raise UsageError(f"--n-g must be a comma list of integers, got {args.n_g}") from None
        if len(sizes) != 4 or min(sizes) < 1:
            raise UsageError("--n-g needs four positive sizes")
        methods = [m.strip() for m in args.methods.split(",") if m.strip()]
        for m in methods:
            if m not in METHODS:
                raise UsageError(f"unknown method {m}; choose from {', '.join(METHODS)}")
        scenarios = [s.upper() for s in (args.scenario or ["A-I"])]
        for code in scenarios:
            try:
                DGPConfig.from_code(code, G=4)
            except ValueError as exc:
                raise UsageError(f"bad scenario {code}: {exc}") from None
        if args.G % 4:
            raise UsageError("--G must be a multiple of 4")
        cfg.update(scenarios=scenarios, G=args.G, R=args.R, n_g=sizes, methods=methods)
    return cfg


def _hyper(cfg) -> Hyperparams:
    return Hyperparams(poly_order=cfg["q"], kernel=cfg["kernel"],
                       use_spike_slab=cfg["spike_slab"], use_robust_mixture=cfg["robust"])


def _load(cfg):
    path = cfg["input"]
    if _sha256(path) != cfg["input_sha256"]:
        raise HRDDError(f"input file {path} changed since the manifest was written")
    return load_csv(path, cfg["threshold"], cfg["binary"])


def execute(cfg: dict, outdir, threads=None) -> dict:
    """Run one configuration and write its artifacts into ``outdir``."""
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    cmd = cfg["command"]
    paths = {}
    if cmd == "fit":
        ds = _load(cfg)
        hyper = _hyper(cfg)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", RuntimeWarning)
            if cfg["mode"] == "fixed":
                draws = fit_at_bandwidths(ds, hyper, cfg["h"], cfg["n_iter"], cfg["n_burn"],
                                          cfg["seed"])
                plan = None
            else:
                draws, plan = fit_adaptive(ds, hyper, mode=cfg["mode"], L=cfg["L"],
                                           n_iter=cfg["n_iter"], n_burn=cfg["n_burn"],
                                           seed=cfg["seed"])
        for w in caught:
            logger.warning("%s", w.message)
        paths.update(write_summaries(draws, plan, ds, out, cfg["kernel"], cfg["write_draws"]))
    elif cmd == "bandwidth":
        ds = _load(cfg)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", RuntimeWarning)
            plan = select_bandwidths(ds, _hyper(cfg), cfg["mode"], cfg["L"], seed=cfg["seed"])
        for w in caught:
            logger.warning("%s", w.message)
        paths["plan"] = write_plan(plan, ds, out / "plan.csv")
        paths["score_trace"] = write_score_trace(plan, ds, out / "score_trace.csv")
    elif cmd == "simulate":
        settings = RunSettings(n_iter=cfg["n_iter"], n_burn=cfg["n_burn"], L=cfg["L"],
                               hyper=_hyper(cfg))
        report = None
        for code in cfg["scenarios"]:
            dgp = DGPConfig.from_code(code, G=cfg["G"], cluster_sizes=tuple(cfg["n_g"]),
                                      outcome="binary" if cfg["binary"] else "continuous",
                                      seed=cfg["seed"])
            logger.info("simulating %s (%s), R=%d", code, dgp.outcome, cfg["R"])
            report = run_replications(dgp, cfg["methods"], cfg["R"], settings, threads, report)
        paths["metrics"] = out / "metrics.csv"
        write_metrics_csv(report, paths["metrics"])
    else:
        raise UsageError(f"unknown command {cmd}")
    paths["manifest"] = write_manifest(cfg, out / "manifest.json")
    return paths


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a command is required")
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s: %(message)s")
        threads = args.threads if args.threads is not None else default_threads()
        if args.command == "rerun":
            cfg = read_manifest(args.manifest)
            outdir = args.output or str(Path(args.manifest).resolve().parent)
        else:
            cfg = config_from_args(args)
            outdir = args.output
    except UsageError as exc:
        print(f"hrdd: error: {exc}\n", file=sys.stderr)
        print(FLAG_TABLE, file=sys.stderr)
        return 2
    except (HRDDError, OSError, ValueError) as exc:
        print(f"hrdd: error: {exc}", file=sys.stderr)
        return 1
    try:
        paths = execute(cfg, outdir, threads)
    except UsageError as exc:
        print(f"hrdd: error: {exc}", file=sys.stderr)
        return 2
    except (HRDDError, OSError, ValueError) as exc:
        print(f"hrdd: error: {exc}", file=sys.stderr)
        return 1
    for name, path in paths.items():
        print(f"{name}: {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
