import math

import numpy as np
import pytest

from sweepopt.compressors import UniformQuantizer, sample
from sweepopt.dpcgd import (Agent, DpcgdConfig, DpcgdError, dpcgd_step, monte_carlo,
                            power_agents_objectives, run_dpcgd)
from sweepopt.geometry import Box
from sweepopt.objectives import (Objective, PowerAllocationParams, anchors_from_seed,
                                 power_allocation, sum_quadratic)
from sweepopt.optimizers import OptimizerConfig, run_pgd
from sweepopt.schedules import Harmonic, Zero

REF = PowerAllocationParams.reference()
BOX = REF.box()


def power_cfg(**kw):
    kw.setdefault("n_iters", 300)
    return DpcgdConfig(BOX, np.full(4, REF.p_min), **kw)


@pytest.mark.parametrize("comp", [None, {"type": "uniform_quantizer", "bits": 3},
                                  {"type": "gaussian", "variance": 1e-3}])
@pytest.mark.parametrize("channel", ["deterministic", "random_uniform"])
def test_fused_and_generic_agree_bitwise(comp, channel):
    cfg = power_cfg(compressor=comp, channel=channel, noise_variance=1e-4)
    a = run_dpcgd(cfg, REF, seed=3, engine="fused")
    b = run_dpcgd(cfg, REF, seed=3, engine="generic")
    assert np.array_equal(a.xs, b.xs)
    assert np.allclose(a.fs, b.fs, rtol=0, atol=1e-14)
    assert a.aux["clamps"] == b.aux["clamps"]


def test_reduces_to_pgd():
    A = anchors_from_seed(4)
    locals_ = [sum_quadratic([a]) for a in A]
    n = len(A)
    s = Box.cube(-1, 1, 10)
    cfg = DpcgdConfig(s, np.zeros(10), alpha_schedule=Harmonic(0.5 * n),
                      lambda_schedule=Zero(), n_iters=200)
    d = run_dpcgd(cfg, locals_, seed=0)
    p = run_pgd(sum_quadratic(A), s, OptimizerConfig(step_schedule=Harmonic(0.5),
                                                     max_iters=200), np.zeros(10))
    assert np.max(np.abs(d.xs - p.xs)) < 1e-12


def test_zero_gradients_keep_point():
    flat = Objective(3, lambda x: 0.0, lambda x: np.zeros(3), "flat")
    x0 = np.array([0.2, -0.1, 0.7])
    cfg = DpcgdConfig(Box.cube(-1, 1, 3), x0, n_iters=50,
                      compressor={"type": "uniform_quantizer", "bits": 4})
    tr = run_dpcgd(cfg, [flat, flat], seed=1)
    assert np.all(tr.xs == x0)


def test_first_extrapolation_is_start():
    seen = []

    def grad(z):
        seen.append(z.copy())
        return np.zeros(2)

    obj = Objective(2, lambda x: 0.0, grad, "spy")
    cfg = DpcgdConfig(Box.cube(-1, 1, 2), [0.3, 0.4], n_iters=1)
    agent = Agent(0, obj, UniformQuantizer(8, seed=0))
    dpcgd_step([agent], cfg.x0, cfg.x0, cfg, 0)
    assert np.array_equal(seen[0], cfg.x0)


def test_iterates_stay_in_box():
    cfg = power_cfg(compressor={"type": "uniform_quantizer", "bits": 2},
                    noise_variance=0.05, channel="random_uniform", n_iters=500)
    for sd in range(5):
        tr = run_dpcgd(cfg, REF, seed=sd)
        assert np.all((tr.xs >= REF.p_min) & (tr.xs <= REF.p_max))


def test_aggregation_is_unbiased():
    objs = power_agents_objectives(REF)
    z = np.array([1.0, 2.0, 3.0, 4.0])
    true = sum(o.gradient(z) for o in objs)
    n_draws = 100_000
    total = np.zeros((n_draws, 4))
    for i, o in enumerate(objs):
        total += sample(UniformQuantizer(2, seed=i), o.gradient(z), n_draws)
    mean = total.mean(axis=0)
    se = total.std(axis=0, ddof=1) / math.sqrt(n_draws)
    assert np.all(np.abs(mean - true) <= 4 * se + 1e-15)


def test_agents_average_to_objective():
    objs = power_agents_objectives(REF)
    F = power_allocation(REF)
    z = np.array([0.7, 1.3, 5.0, 9.0])
    assert abs(sum(o.value(z) for o in objs) / 4 - F.value(z)) < 1e-14
    assert np.allclose(sum(o.gradient(z) for o in objs) / 4, F.gradient(z), atol=1e-14)


def test_extrapolation_gap_shrinks():
    tr = run_dpcgd(power_cfg(n_iters=2000), REF, seed=0)
    gaps = np.linalg.norm(np.diff(tr.xs, axis=0), axis=1)
    d = len(gaps) // 10
    assert gaps[-d:].mean() < gaps[:d].mean()


def test_monte_carlo_deterministic_and_consistent():
    cfg = power_cfg(compressor={"type": "uniform_quantizer", "bits": 4}, n_iters=100)
    a = monte_carlo(cfg, REF, 4, base_seed=10)
    b = monte_carlo(cfg, REF, 4, base_seed=10, jobs=3)
    assert a.to_csv() == b.to_csv()
    one = monte_carlo(cfg, REF, 1, base_seed=12)
    single = run_dpcgd(cfg, REF, seed=12)
    assert np.array_equal(one.mean_F, single.fs) and np.all(one.std_F == 0)
    assert np.array_equal(a.F[2], single.fs)


def test_report_csv_layout():
    rep = monte_carlo(power_cfg(n_iters=3), REF, 2)
    lines = rep.to_csv().splitlines()
    assert lines[0] == "k,mean_F,std_F,F_run0,F_run1"
    assert len(lines) == 5
    assert lines[1].startswith("0,")
    assert float(lines[4].split(",")[3]) == rep.F[0, 3]


def test_config_errors():
    with pytest.raises(DpcgdError):
        power_cfg(channel="fading")
    with pytest.raises(DpcgdError):
        monte_carlo(power_cfg(), REF, 0)
    with pytest.raises(DpcgdError):
        run_dpcgd(DpcgdConfig(Box.cube(-1, 1, 1), [0.0], channel="random_uniform"),
                  [sum_quadratic([[0.0]])])


def test_alpha_verdict():
    assert power_cfg().alpha_verdict() == "admissible"
