import numpy as np
import pytest
from geweke import NAMES, geweke_z


@pytest.fixture(scope="module")
def zstats():
    return geweke_z(20000, seed=2024)


@pytest.mark.parametrize("j", range(len(NAMES)), ids=NAMES)
def test_joint_moments_agree(zstats, j):
    assert abs(zstats[j]) < 4, (NAMES[j], zstats[j])


def test_detects_a_wrong_conditional(monkeypatch):
    """Sanity check of the harness: a biased omega update is caught."""
    import hrdd.gibbs_continuous as gc

    real = gc.sample_precision_omega
    monkeypatch.setattr(gc, "sample_precision_omega", lambda *a, **k: 1.3 * real(*a, **k))
    z = geweke_z(4000, seed=7)
    assert np.max(np.abs(z)) > 4
