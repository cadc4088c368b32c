import cmath
import math

import numpy as np
import pytest

import koopal


def test_ids_and_defaults():
    ids = koopal.experiment_ids()
    assert "linear2d_dmd" in ids and len(ids) == 8
    cfg = koopal.default_config("bridge1d")
    assert cfg["schema_version"] == 1
    assert cfg["params"]["overlap_tol"] == 0.05


def test_run_small_experiment():
    s = koopal.run_experiment("polar_transforms")
    assert s["passed"]
    assert {c["acceptance"] for c in s["criteria"]} >= {8}


def test_override_and_errors():
    s = koopal.run_experiment("lin5d_check", identity_tol=0.0)
    assert not s["passed"]
    with pytest.raises(koopal.KoopalError) as e:
        koopal.run_experiment("lin5d_check", not_a_param=1)
    assert e.value.kind == "config"


def test_dmd_recovers_linear_spectrum():
    X, Y = koopal.sample_snapshots("linear2d", n_pairs=200, dt=0.2, seed=3)
    assert X.shape == (2, 200) and Y.shape == (2, 200)
    fit = koopal.fit_edmd(X, Y, dt=0.2)
    got = sorted(np.linalg.eigvals(fit["K"]).real)
    assert got == pytest.approx(sorted([math.exp(-0.9 * 0.2), math.exp(-0.8 * 0.2)]), abs=1e-10)
    pairs = koopal.deflate_spectrum(fit["K"], 2)
    assert sorted(p["eigenvalue"].real for p in pairs) == pytest.approx(got, abs=1e-10)


def test_eigensolvers_agree_with_numpy():
    rng = np.random.default_rng(0)
    P = rng.normal(size=(6, 6)) + 3 * np.eye(6)
    A = P @ np.diag([2.0, 1.6, 1.28, -1.0, 0.5, 0.3]) @ np.linalg.inv(P)
    qr = sorted(koopal.qr_eigenvalues(A), key=lambda z: (z.real, z.imag))
    ref = sorted(np.linalg.eigvals(A), key=lambda z: (z.real, z.imag))
    assert np.allclose(qr, ref, atol=1e-8)


def test_polar_transforms():
    v = 0.3 - 0.7j
    assert abs(koopal.transform_Ti(koopal.transform_Ti_inv(v)) - v) < 1e-12
    r, theta = koopal.transform_To(0.5, 0.0, mu=1.0, alpha=0.0, C=1.0)
    assert r == pytest.approx(2.0, abs=1e-10) and abs(theta) < 1e-10


def test_crossvalidation_small():
    s = koopal.crossvalidation(matrices=5, dim_hi=8)
    assert s["passed"]


def test_threads_setting():
    koopal.set_num_threads(2)
    assert koopal.num_threads() == 2
    koopal.set_num_threads(1)
