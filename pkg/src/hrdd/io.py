"""CSV ingestion and result serialization."""

from __future__ import annotations

import csv
import json
import math
import os
import platform
from pathlib import Path

import numpy as np

from .data import Dataset, PosteriorDraws, validate
from .design import kernel_weight
from .exceptions import MissingColumn, MixedOutcomeType, ParseError

REQUIRED_COLUMNS = ("group", "y", "x")


def fmt(value) -> str:
    """Serialize a real with 17 significant digits (exact round trip)."""
    return f"{float(value):.17g}"


def _real(text, line, column):
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"column {column!r}: {text!r} is not a number", line) from None
    if not math.isfinite(value):
        raise ParseError(f"column {column!r}: non-finite value {text!r}", line)
    return value


def load_csv(path, threshold: float, binary: bool = False) -> Dataset:
    """Read a ``group,y,x`` CSV file into a validated :class:`Dataset`.

    Parameters
    ----------
    path : str or Path
        UTF-8 CSV with a header row; extra columns are ignored.
    threshold : float
        Cutoff ``c``; the treatment indicator is derived as ``x >= c``.
    binary : bool
        Treat ``y`` as a 0/1 outcome.

    Raises
    ------
    MissingColumn
        A required column is absent from the header.
    ParseError
        A value cannot be read; the message carries the file line number.
    MixedOutcomeType
        ``binary`` is set but ``y`` holds values other than 0 and 1.
    """
    labels, ys, xs = [], [], []
    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file (header required)", 1) from None
        header = [h.strip() for h in header]
        for col in REQUIRED_COLUMNS:
            if col not in header:
                raise MissingColumn(col)
        pos = {col: header.index(col) for col in REQUIRED_COLUMNS}
        for row in reader:
            line = reader.line_num
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise ParseError(f"expected {len(header)} fields, found {len(row)}", line)
            label = row[pos["group"]].strip()
            if not label:
                raise ParseError("empty group label", line)
            y = _real(row[pos["y"]], line, "y")
            if binary and y not in (0.0, 1.0):
                raise MixedOutcomeType(f"outcome {row[pos['y']]!r} is not 0/1 "
                                       f"in a binary file", line)
            labels.append(label)
            ys.append(y)
            xs.append(_real(row[pos["x"]], line, "x"))
    if not labels:
        raise ParseError("no data rows", 2)
    ds = Dataset.from_arrays(ys, xs, np.asarray(labels, dtype=object), threshold,
                             "binary" if binary else "continuous")
    validate(ds)
    return ds


def write_dataset_csv(dataset: Dataset, path) -> None:
    """Write ``dataset`` in the ``group,y,x`` input format."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(REQUIRED_COLUMNS)
        for label, grp in zip(dataset.labels, dataset.groups):
            for y, x in zip(grp.y, grp.x):
                wr.writerow([label, fmt(y), fmt(x)])


def _warn_flags(dataset, draws, plan, kernel):
    flags = [[] for _ in range(dataset.G)]
    c = dataset.threshold
    for g, grp in enumerate(dataset.groups):
        k = kernel_weight(grp.x, c, draws.bandwidths[g], kernel)
        on = k > 0
        if not (np.any(on & (grp.w == 1)) and np.any(on & (grp.w == 0))):
            flags[g].append("prior_only")
    if plan is not None and plan.warnings and plan.selected_index is not None:
        for g in np.flatnonzero(plan.selected_index == plan.L - 1):
            flags[g].append("grid_edge")
    return [";".join(f) for f in flags]


def write_summaries(draws: PosteriorDraws, plan, dataset: Dataset, outdir,
                    kernel: str = "triangular", write_draws: bool = False) -> dict:
    """Write per-group summaries, optional draws and the score trace.

    Returns a mapping from artifact name to the written path.
    """
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {}
    lo, hi = draws.interval(0.95)
    mean, sd = draws.mean, draws.sd
    warn = _warn_flags(dataset, draws, plan, kernel)
    paths["summary"] = out / "summary.csv"
    with open(paths["summary"], "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["group", "n_g", "h_g", "post_mean", "post_sd", "q025", "q975", "warn"])
        for g in range(dataset.G):
            wr.writerow([dataset.labels[g], dataset.groups[g].n, fmt(draws.bandwidths[g]),
                         fmt(mean[g]), fmt(sd[g]), fmt(lo[g]), fmt(hi[g]), warn[g]])
    if write_draws:
        paths["draws"] = out / "draws.csv"
        with open(paths["draws"], "w", newline="", encoding="utf-8") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["draw"] + list(dataset.labels))
            for i, row in enumerate(draws.effect):
                wr.writerow([i] + [fmt(v) for v in row])
    if plan is not None:
        paths["score_trace"] = write_score_trace(plan, dataset, out / "score_trace.csv")
    return paths


def write_score_trace(plan, dataset: Dataset, path) -> Path:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["group", "h", "score", "batch"])
        for g, h, score, batch in plan.score_trace:
            wr.writerow([dataset.labels[g], fmt(h), fmt(score), batch])
    return Path(path)


def write_plan(plan, dataset: Dataset, path) -> Path:
    """Selected bandwidth per group, with the candidate row it came from."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["group", "h_selected", "index", "mode", "candidates"])
        for g in range(dataset.G):
            cand = " ".join(fmt(v) for v in plan.candidates[g])
            wr.writerow([dataset.labels[g], fmt(plan.selected[g]), int(plan.selected_index[g]),
                         plan.mode, cand])
    return Path(path)


def versions() -> dict:
    import scipy
    import sklearn

    from . import __version__

    return {"hrdd": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "scikit-learn": sklearn.__version__, "python": platform.python_version()}


def write_manifest(config: dict, path) -> Path:
    """Run manifest: the resolved configuration plus library versions.

    Feeding it back through ``--manifest`` reruns the same computation.
    """
    doc = {"config": config, "versions": versions()}
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)
    return Path(path)


def read_manifest(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if "config" not in doc:
        raise ParseError("manifest has no 'config' entry")
    return doc["config"]
