import os
import subprocess
import sys

import numpy as np
import pytest

from sweepopt import _backend
from sweepopt.objectives import PowerAllocationParams

pytestmark = pytest.mark.skipif(_backend.compiled is None,
                                reason="compiled extension not built")
P, C = _backend.pure, _backend.compiled
REF = PowerAllocationParams.reference()


def test_box_ops_bitwise(rng):
    lo, hi = -np.ones(6), np.ones(6)
    for _ in range(200):
        x = rng.uniform(-2, 2, 6)
        v = rng.normal(size=6)
        assert np.array_equal(P.project_box(x, lo, hi), C.project_box(x, lo, hi))
        y = P.project_box(x, lo, hi)
        assert np.array_equal(P.tangent_box(y, lo, hi, v), C.tangent_box(y, lo, hi, v))


@pytest.mark.parametrize("bits", [1, 4, 16, 32])
def test_stochastic_round_bitwise(bits, rng):
    x = rng.uniform(-50, 50, 1000)
    u = rng.random(1000)
    assert np.array_equal(P.stochastic_round(x, bits, u), C.stochastic_round(x, bits, u))


def test_power_kernels_agree(rng):
    w, g = np.array(REF.weights), np.array(REF.gains)
    for p in rng.uniform(0.5, 10, (200, 4)):
        fp, gp = P.power_value_grad(p, g, w, REF.noise_var)
        fc, gc = C.power_value_grad(p, g, w, REF.noise_var)
        assert abs(fp - fc) <= 1e-12 and np.max(np.abs(gp - gc)) <= 1e-12
        ap = P.power_agent_grads(p, g, 4 * w, REF.noise_var)
        ac = C.power_agent_grads(p, g, 4 * w, REF.noise_var)
        assert np.max(np.abs(ap - ac)) <= 1e-12


@pytest.mark.parametrize("kind,bits,std", [(0, 0, 0.0), (1, 3, 0.0), (2, 0, 0.05)])
def test_dpcgd_run_agrees(kind, bits, std, rng):
    n, m, N = 4, 4, 400
    w = np.array(REF.weights)
    gains = rng.uniform(0.5, 1.5, (N, n))
    draws = rng.random((n, N, m)) if kind == 1 else rng.standard_normal((n, N, m))
    if kind == 0:
        draws = np.zeros((n, 1, 1))
    noise = rng.standard_normal((n, N, m))
    alphas = 100.0 / np.arange(1, N + 1)
    lams = 1.0 / np.log(np.arange(1, N + 1) + np.e - 1)
    args = (np.full(m, 0.5), np.full(m, 0.5), np.full(m, 10.0), gains, np.ones(n),
            n * w, w, REF.noise_var, alphas, lams, kind, bits, std, draws, 0.01, noise)
    xp, fp, kp, cp = P.dpcgd_power_run(*args)
    xc, fc, kc, cc = C.dpcgd_power_run(*args)
    assert np.max(np.abs(xp - xc)) <= 1e-12
    assert np.max(np.abs(fp - fc)) <= 1e-12
    assert np.max(np.abs(kp - kc)) <= 1e-10
    assert cp == cc


def _backend_in_subprocess(env_value):
    env = dict(os.environ)
    env.pop("SWEEPOPT_PURE_PYTHON", None)
    if env_value is not None:
        env["SWEEPOPT_PURE_PYTHON"] = env_value
    out = subprocess.run([sys.executable, "-c",
                          "import sweepopt; print(sweepopt.COMPILED)"],
                         env=env, capture_output=True, text=True, check=True)
    return out.stdout.strip()


def test_environment_forces_pure_backend():
    assert _backend_in_subprocess("1") == "False"
    assert _backend_in_subprocess(None) == "True"
