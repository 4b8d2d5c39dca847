"""Distributed projected compressed gradient descent.

Each iteration ``k = 0, 1, ...``:

1. extrapolate ``z = x^k + lam_{k+1} (x^k - x^{k-1})`` with ``x^{-1} = x^0``;
2. agent ``i`` sends ``c_i(grad f_i(z) + xi_i)``;
3. the server sets ``x^{k+1} = P_C[x^k - (alpha_{k+1} / n) * sum_i (...)]``.

Schedules are one-based, so iteration ``k`` uses ``alpha_{k+1}``.

Power-allocation runs go through a fused kernel fed with random numbers
pre-drawn from each agent's own streams. The generic path below consumes the
same streams call by call and produces identical iterates.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._backend import kernels
from .compressors import Compressor, Identity, compressor_from_config
from .geometry import Box, ConvexSet, NotInSetError, TOL_MEMBERSHIP, as_point
from .objectives import Objective, PowerAllocationParams, q_function, sinr
from .optimizers import Trace
from .schedules import (Harmonic, LogDamped, StepSchedule, check_admissible)


class DpcgdError(ValueError):
    pass


@dataclass
class Agent:
    id: int
    local_objective: Objective
    compressor: Compressor
    noise_std: float = 0.0
    noise_rng: np.random.Generator = field(default_factory=np.random.default_rng)

    def gradient(self, z, gains=None) -> np.ndarray:
        if gains is None:
            return self.local_objective.gradient(z)
        return self.local_objective.meta["gradient_with_gains"](z, gains)

    def message(self, z, gains=None) -> np.ndarray:
        g = self.gradient(z, gains)
        if self.noise_std > 0.0:
            g = g + self.noise_std * self.noise_rng.standard_normal(g.shape[0])
        return self.compressor.compress(g)


@dataclass
class DpcgdConfig:
    set: ConvexSet
    x0: np.ndarray
    alpha_schedule: StepSchedule = field(default_factory=lambda: Harmonic(100.0))
    lambda_schedule: StepSchedule = field(default_factory=LogDamped)
    n_iters: int = 1000
    channel: str = "deterministic"
    channel_range: tuple = (0.5, 1.5)
    compressor: dict | None = None
    noise_variance: float = 0.0

    def __post_init__(self):
        self.x0 = as_point(self.x0)
        if not self.set.contains(self.x0):
            raise NotInSetError(self.set.distance(self.x0), TOL_MEMBERSHIP)
        if self.channel not in ("deterministic", "random_uniform"):
            raise DpcgdError(f"unknown channel model {self.channel!r}")
        lo, hi = self.channel_range
        if not 0 < lo < hi:
            raise DpcgdError("channel range needs 0 < lo < hi")
        if self.noise_variance < 0 or self.n_iters < 0:
            raise DpcgdError("noise variance and n_iters must be nonnegative")

    def alpha_verdict(self) -> str:
        return check_admissible(self.alpha_schedule, 1000).verdict


def _domain_ok(agents, z):
    for a in agents:
        ok = a.local_objective.meta.get("domain_ok")
        if ok is not None and not ok(z):
            return False
    return True


def dpcgd_step(agents, x, x_prev, cfg: DpcgdConfig, k: int, gains=None):
    """One server round from iteration index ``k >= 0``.

    Returns ``(x_next, clamped)``; ``clamped`` flags that the extrapolated
    point left the objectives' domain and was projected onto ``C`` first.
    """
    lam = cfg.lambda_schedule.step(k + 1)
    alpha = cfg.alpha_schedule.step(k + 1)
    return _step(agents, x, x_prev, cfg.set, alpha, lam, gains)


def _step(agents, x, x_prev, s, alpha, lam, gains):
    z = x + lam * (x - x_prev)
    clamped = not _domain_ok(agents, z)
    if clamped:
        z = s.project(z)
    agg = np.zeros(x.shape[0])
    for a in agents:
        agg += a.message(z, gains)
    step = alpha / len(agents)
    return s.project(x - step * agg), clamped


def power_agents_objectives(params: PowerAllocationParams) -> list[Objective]:
    """``f_i = n * w_i * Q(sqrt(sinr_i))`` so that the agents' average equals
    the weighted sum being minimized."""
    n = params.n_sources
    scales = n * np.array(params.weights)
    gains0 = np.array(params.gains)
    nv = params.noise_var
    out = []
    for i in range(n):
        def value(p, i=i):
            return float(scales[i] * q_function(math.sqrt(sinr(p, gains0, nv)[i])))

        def grad_with(p, g, i=i):
            return kernels.power_agent_grads(as_point(p), np.asarray(g, dtype=np.float64),
                                             scales, nv)[i]

        out.append(Objective(n, value, lambda p, i=i: grad_with(p, gains0, i),
                             f"power_agent_{i}", domain=params.box(),
                             meta={"gradient_with_gains": grad_with,
                                   "domain_ok": lambda p: bool(np.all(p > 0))}))
    return out


def _agent_streams(seed, n_agents):
    seqs = np.random.SeedSequence(seed).spawn(2 * n_agents + 1)
    comp = [np.random.default_rng(s) for s in seqs[:n_agents]]
    noise = [np.random.default_rng(s) for s in seqs[n_agents:2 * n_agents]]
    return comp, noise, np.random.default_rng(seqs[-1])


def make_agents(objectives, cfg: DpcgdConfig, seed) -> tuple[list[Agent], np.random.Generator]:
    comp_rngs, noise_rngs, channel_rng = _agent_streams(seed, len(objectives))
    std = math.sqrt(cfg.noise_variance)
    agents = [Agent(i, f, compressor_from_config(cfg.compressor, comp_rngs[i]),
                    std, noise_rngs[i])
              for i, f in enumerate(objectives)]
    return agents, channel_rng


def _channel_gains(cfg, params, channel_rng):
    n = params.n_sources
    if cfg.channel == "deterministic":
        g = np.broadcast_to(np.array(params.gains), (cfg.n_iters, n))
        return np.ascontiguousarray(g), np.array(params.gains)
    lo, hi = cfg.channel_range
    draws = channel_rng.uniform(lo, hi, size=(cfg.n_iters, n))
    # reported objective uses the mean channel
    return draws, np.full(n, 0.5 * (lo + hi))


def run_dpcgd(cfg: DpcgdConfig, family, seed=None, engine: str = "fused") -> Trace:
    """Run DPCGD on ``family``: either :class:`PowerAllocationParams` or a list
    of local objectives. ``engine="generic"`` forces the step-by-step path."""
    if isinstance(family, PowerAllocationParams):
        objectives = power_agents_objectives(family)
        if not isinstance(cfg.set, Box):
            raise DpcgdError("power allocation runs need a box constraint")
        if engine == "fused":
            return _run_power_fused(cfg, family, objectives, seed)
        return _run_generic(cfg, objectives, seed, family)
    if cfg.channel != "deterministic":
        raise DpcgdError("random channels apply to power allocation only")
    return _run_generic(cfg, list(family), seed, None)


def _run_power_fused(cfg, params, objectives, seed):
    agents, channel_rng = make_agents(objectives, cfg, seed)
    n, m, N = len(agents), cfg.x0.shape[0], cfg.n_iters
    gains, eval_gains = _channel_gains(cfg, params, channel_rng)
    comp = agents[0].compressor
    if isinstance(comp, Identity):
        comp_draws, comp_std = np.zeros((n, 1, 1)), 0.0
    else:
        comp_draws = np.stack([a.compressor.draw_block((N, m)) for a in agents])
        comp_std = getattr(comp, "std", 0.0)
    noise_std = agents[0].noise_std
    if noise_std > 0.0:
        noise_draws = np.stack([a.noise_rng.standard_normal((N, m)) for a in agents])
    else:
        noise_draws = np.zeros((n, 1, 1))
    bits = getattr(comp, "bits", 0)
    xs, fs, kkts, clamps = kernels.dpcgd_power_run(
        cfg.x0, cfg.set.lower, cfg.set.upper, gains, eval_gains,
        n * np.array(params.weights), np.array(params.weights), params.noise_var,
        cfg.alpha_schedule.steps(N), cfg.lambda_schedule.steps(N),
        comp.kind, bits, comp_std, comp_draws, noise_std, noise_draws)
    if not (np.all(np.isfinite(fs)) and np.all(np.isfinite(xs))):
        raise DpcgdError("non-finite values in the DPCGD run")
    return Trace(np.arange(N + 1), xs, fs, kkts, "max_iters", seed,
                 {"clamps": clamps})


def _run_generic(cfg, objectives, seed, params):
    agents, channel_rng = make_agents(objectives, cfg, seed)
    s = cfg.set
    N = cfg.n_iters
    n = len(agents)
    if params is not None:
        gains, eval_gains = _channel_gains(cfg, params, channel_rng)
        w = np.array(params.weights)

        def value_grad(x):
            return kernels.power_value_grad(x, eval_gains, w, params.noise_var)
    else:
        gains = None

        def value_grad(x):
            f = math.fsum(o.value(x) for o in objectives) / n
            g = np.add.reduce([o.gradient(x) for o in objectives]) / n
            return f, g

    alphas = cfg.alpha_schedule.steps(N)
    lams = cfg.lambda_schedule.steps(N)
    x = cfg.x0.copy()
    x_prev = x
    xs, fs, kkts = [x], [], []
    clamps = 0

    def record(x):
        f, g = value_grad(x)
        fs.append(f)
        kkts.append(float(np.linalg.norm(s.project_tangent(x, -g))))

    record(x)
    for k in range(N):
        gk = None if gains is None else gains[k]
        x_new, clamped = _step(agents, x, x_prev, s, alphas[k], lams[k], gk)
        clamps += clamped
        x_prev, x = x, x_new
        xs.append(x)
        record(x)
    return Trace(np.arange(N + 1), np.array(xs), np.array(fs), np.array(kkts),
                 "max_iters", seed, {"clamps": clamps})


@dataclass
class McReport:
    traces: list
    seeds: list
    mean_F: np.ndarray
    std_F: np.ndarray
    mean_kkt: np.ndarray

    @property
    def F(self) -> np.ndarray:
        """Per-run objective values, shape ``(n_runs, n_iters + 1)``."""
        return np.array([t.fs for t in self.traces])

    @property
    def clamp_events(self) -> int:
        return int(sum(t.aux.get("clamps", 0) for t in self.traces))

    def csv_rows(self):
        yield ["k", "mean_F", "std_F"] + [f"F_run{i}" for i in range(len(self.traces))]
        F = self.F.T.tolist()
        for k, (m, sd, row) in enumerate(zip(self.mean_F.tolist(),
                                             self.std_F.tolist(), F)):
            yield [str(k), repr(m), repr(sd)] + [repr(v) for v in row]

    def to_csv(self, path=None) -> str:
        text = "".join(",".join(r) + "\n" for r in self.csv_rows())
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def monte_carlo(cfg: DpcgdConfig, family, n_runs: int, base_seed: int = 0,
                jobs: int = 1, engine: str = "fused") -> McReport:
    """Independent runs with seeds ``base_seed + i``. The fused kernel drops
    the GIL, so ``jobs > 1`` uses threads."""
    if n_runs < 1:
        raise DpcgdError("n_runs must be at least 1")
    seeds = [base_seed + i for i in range(n_runs)]
    if jobs > 1:
        with ThreadPoolExecutor(jobs) as ex:
            traces = list(ex.map(lambda sd: run_dpcgd(cfg, family, sd, engine), seeds))
    else:
        traces = [run_dpcgd(cfg, family, sd, engine) for sd in seeds]
    F = np.array([t.fs for t in traces])
    K = np.array([t.kkts for t in traces])
    return McReport(traces, seeds, F.mean(axis=0), F.std(axis=0), K.mean(axis=0))
