import os
import subprocess
import sys

import numpy as np
import pytest

from cyclopass import _kernels as K


@pytest.fixture
def affine_case(rng):
    n, m, steps = 3, 2, 500
    A = rng.standard_normal((n, n))
    A = A - A.T - 0.2 * np.eye(n)
    B = rng.standard_normal((n, m))
    return (A, B, rng.standard_normal(n), rng.standard_normal((steps + 1, m)),
            rng.standard_normal((steps, m)), 1e-3)


def test_rk4_variants_agree(affine_case):
    a = K.rk4_affine_numba(*affine_case)
    b = K.rk4_affine_numpy(*affine_case)
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-13)


def test_rk4_exponential():
    A = np.array([[-1.0]])
    B = np.zeros((1, 1))
    u = np.zeros((101, 1))
    X = K.rk4_affine_numpy(A, B, np.array([1.0]), u, u[:-1], 0.01)
    assert X[-1, 0] == pytest.approx(np.exp(-1.0), rel=1e-9)


def test_cumtrapz_variants(rng):
    t = np.sort(rng.uniform(0, 1, 200))
    s = rng.standard_normal(200)
    a, b = K.cumtrapz_numba(t, s), K.cumtrapz_numpy(t, s)
    np.testing.assert_allclose(a, b, atol=1e-14)
    assert a[0] == 0.0
    assert a[-1] == pytest.approx(np.trapezoid(s, t), abs=1e-13)


def test_min_forward_gain(rng):
    d = rng.standard_normal(300)
    g, i, j = K.min_forward_gain_numba(d)
    brute = min((d[b] - d[a], a, b) for a in range(d.size) for b in range(a, d.size))
    assert g == pytest.approx(brute[0])
    assert i <= j and d[j] - d[i] == pytest.approx(g)
    assert K.min_forward_gain_numpy(d)[0] == pytest.approx(g)


def test_monotone_sequence_has_zero_gain():
    assert K.min_forward_gain_numpy(np.arange(10.0))[0] == 0.0


def test_disable_flag_selects_numpy():
    code = ("from cyclopass import _kernels as K; from cyclopass.models import make_model;"
            "from cyclopass.simulate import integrate;"
            "tr = integrate(make_model('dc_motor'), [1.0, 0.0], None, (0.0, 1.0));"
            "print(K.backend(), tr.meta['backend'], repr(float(tr.states[-1, 0])))")
    out = {}
    for flag in ("0", "1"):
        env = dict(os.environ, CYCLOPASS_DISABLE_NUMBA=flag)
        res = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
        assert res.returncode == 0, res.stderr
        out[flag] = res.stdout.split()
    assert out["1"][:2] == ["numpy", "numpy"]
    assert out["0"][:2] == (["numba", "numba"] if K.HAVE_NUMBA else ["numpy", "numpy"])
    assert float(out["0"][2]) == pytest.approx(float(out["1"][2]), rel=1e-14)
