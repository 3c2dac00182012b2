import json
import math

import numpy as np
import pytest

import pyrecon


@pytest.fixture(scope="module")
def field():
    return pyrecon.Field(n=64, d=0.25, seed=3)


def test_field_values(field):
    v = field.values
    assert v.shape == (64, 64)
    assert v.min() == 0.0 and v.max() == 1.0
    # Row-major with rows along y: node (i, j) is v[j, i].
    assert field(3 / 63, 5 / 63) == pytest.approx(v[5, 3], abs=1e-12)


def test_critical_points_balance(field):
    kinds = [k for *_, k in field.critical_points]
    # Extrema minus saddles on a disk with a constant boundary.
    assert kinds.count("max") + kinds.count("min") - kinds.count("saddle") == 1
    assert field.cell_count == len(kinds)


def test_run_and_verify(field):
    r = pyrecon.run(field, "topo", T=0.5, budget=25, seed=2)
    assert r["error"] == ""
    h = [x["H_cond"] for x in r["reports"]]
    assert len(h) == 26
    assert all(b <= a + 1e-9 for a, b in zip(h, h[1:]))
    assert pyrecon.verify(field, r["trace"]) == []

    lines = r["trace"].splitlines()
    rec = json.loads(lines[3])
    rec["origin"] = [0.41, 0.37]
    lines[3] = json.dumps(rec)
    assert pyrecon.verify(field, "\n".join(lines) + "\n")


def test_nscan_runs(field):
    r = pyrecon.run(field, "nscan", n=3, budget=12)
    assert len(r["reports"]) == 13
    with pytest.raises(ValueError):
        pyrecon.run(field, "greedy")


def test_beta_and_ks():
    rng = np.random.default_rng(0)
    p = rng.uniform(0.05, 0.95, 400)
    inside = rng.uniform(size=400) < p
    fit = pyrecon.fit_beta(p.tolist(), inside.tolist())
    assert fit["defined"] and abs(fit["beta"] - 1.0) < 0.3

    a = [i * 0.01 for i in range(26)]
    b = [1 + x for x in a]
    d, pv = pyrecon.ks_two_sample(a, b)
    assert d == 1.0
    ne = 13.0
    lam = math.sqrt(ne) + 0.12 + 0.11 / math.sqrt(ne)
    assert pv == pytest.approx(2 * math.exp(-2 * lam * lam), rel=1e-9)
