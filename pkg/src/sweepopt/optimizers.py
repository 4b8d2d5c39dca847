"""Projected gradient schemes with optional compression and gradient noise.

* ``pgd``    x+ = P[x - h_k (c(grad f(x)) + xi)]
* ``fpnag``  x+ = y - g * G(y);  y+ = P[x+ + mu (x+ - x)]          (fixed mu)
* ``pnag``   as ``fpnag`` with mu_k from the theta recursion
* ``pogm``   y+ = P[x+ + mu_k (x+ - x) - g * lam_k * G(y)]

``G`` denotes the compressed, perturbed gradient. Momentum methods record the
feasible sequence ``y_n``; the unprojected ``x_n`` goes to ``Trace.aux["x"]``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .compressors import Compressor, Identity, compressor_from_config
from .geometry import ConvexSet, NotInSetError, TOL_MEMBERSHIP, as_point
from .objectives import Objective
from .schedules import (HarmonicShift, MomentumState, StepSchedule,
                        momentum_coeffs)

METHODS = ("pgd", "fpnag", "pnag", "pogm")


class OptimizerError(RuntimeError):
    pass


class DivergenceError(OptimizerError):
    """Non-finite objective or gradient. ``trace`` holds the records so far."""

    def __init__(self, message, trace):
        super().__init__(message)
        self.trace = trace


@dataclass
class OptimizerConfig:
    method: str = "pgd"
    gamma: float = 0.1
    mu: float = 0.5
    step_schedule: StepSchedule = field(default_factory=HarmonicShift)
    compressor: dict | None = None
    noise_variance: float = 0.0
    lr_decay: bool = False
    max_iters: int = 1000
    stop_kkt_tol: float = 0.0

    def __post_init__(self):
        if self.method not in METHODS:
            raise OptimizerError(f"unknown method {self.method!r}")
        if not self.gamma > 0:
            raise OptimizerError("gamma must be positive")
        if self.method == "fpnag" and not 0 < self.mu < 1:
            raise OptimizerError("fpnag needs 0 < mu < 1")
        if self.noise_variance < 0:
            raise OptimizerError("noise variance must be nonnegative")
        if self.max_iters < 0:
            raise OptimizerError("max_iters must be nonnegative")


@dataclass
class Trace:
    ks: np.ndarray
    xs: np.ndarray
    fs: np.ndarray
    kkts: np.ndarray
    status: str
    seed: int | None
    aux: dict = field(default_factory=dict)

    @property
    def x_final(self) -> np.ndarray:
        return self.xs[-1]

    @property
    def f_final(self) -> float:
        return float(self.fs[-1])

    @property
    def kkt_final(self) -> float:
        return float(self.kkts[-1])

    def __len__(self):
        return self.ks.shape[0]

    def csv_rows(self):
        yield ["k", "f", "kkt"] + [f"x_{i}" for i in range(self.xs.shape[1])]
        for k, f, r, x in zip(self.ks.tolist(), self.fs.tolist(),
                              self.kkts.tolist(), self.xs.tolist()):
            yield [str(k), repr(f), repr(r)] + [repr(v) for v in x]

    def to_csv(self, path=None) -> str:
        text = "".join(",".join(row) + "\n" for row in self.csv_rows())
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


class _Recorder:
    def __init__(self, s: ConvexSet, seed):
        self.s = s
        self.seed = seed
        self.xs, self.fs, self.kkts = [], [], []
        self.aux = {}

    def add(self, x, f, g):
        self.xs.append(x)
        self.fs.append(f)
        r = float(np.linalg.norm(self.s.project_tangent(x, -g)))
        self.kkts.append(r)
        return r

    def trace(self, status) -> Trace:
        n = len(self.xs)
        aux = {k: np.array(v) for k, v in self.aux.items()}
        return Trace(np.arange(n), np.array(self.xs), np.array(self.fs),
                     np.array(self.kkts), status, self.seed, aux)


def _streams(seed):
    comp_ss, noise_ss = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(comp_ss), np.random.default_rng(noise_ss)


def _eval(obj, x, rec):
    f = float(obj.value(x))
    g = obj.gradient(x)
    if not (math.isfinite(f) and np.all(np.isfinite(g))):
        raise DivergenceError(f"non-finite objective or gradient at k={len(rec.xs)}",
                              rec.trace("diverged"))
    return f, g


def _check_start(s, x0):
    x0 = as_point(x0)
    if not s.contains(x0, TOL_MEMBERSHIP):
        raise NotInSetError(s.distance(x0), TOL_MEMBERSHIP)
    return x0.copy()


class _Perturber:
    """Applies compression and additive Gaussian noise to a gradient."""

    def __init__(self, cfg: OptimizerConfig, seed, compressor: Compressor | None):
        comp_rng, self.noise_rng = _streams(seed)
        if compressor is None:
            compressor = compressor_from_config(cfg.compressor, comp_rng)
        self.comp = compressor
        self.passthrough = isinstance(compressor, Identity)
        self.noise_std = math.sqrt(cfg.noise_variance)
        self.xis = []

    def __call__(self, g):
        out = g if self.passthrough else self.comp.compress(g)
        if self.noise_std > 0.0:
            xi = self.noise_std * self.noise_rng.standard_normal(g.shape[0])
            self.xis.append(xi)
            out = out + xi
        return out


def run_pgd(obj: Objective, s: ConvexSet, cfg: OptimizerConfig, x0,
            seed=None, compressor: Compressor | None = None) -> Trace:
    x = _check_start(s, x0)
    rec = _Recorder(s, seed)
    pert = _Perturber(cfg, seed, compressor)
    hs = cfg.step_schedule.steps(cfg.max_iters)
    f, g = _eval(obj, x, rec)
    r = rec.add(x, f, g)
    status = "max_iters"
    for n in range(cfg.max_iters):
        if r < cfg.stop_kkt_tol:
            status = "converged"
            break
        x = s.project(x - hs[n] * pert(g))
        f, g = _eval(obj, x, rec)
        r = rec.add(x, f, g)
    else:
        if r < cfg.stop_kkt_tol:
            status = "converged"
    rec.aux["steps"] = hs[: len(rec.xs) - 1]
    if pert.xis:
        rec.aux["perturbations"] = pert.xis
    return rec.trace(status)


def _run_momentum(obj, s, cfg, x0, seed, compressor, kind):
    y = _check_start(s, x0)
    x = y.copy()
    rec = _Recorder(s, seed)
    rec.aux["x"] = [x.copy()]
    pert = _Perturber(cfg, seed, compressor)
    state = MomentumState("ogm" if kind == "pogm" else "nesterov")
    f, g = _eval(obj, y, rec)
    r = rec.add(y, f, g)
    status = "max_iters"
    gammas = []
    for n in range(1, cfg.max_iters + 1):
        if r < cfg.stop_kkt_tol:
            status = "converged"
            break
        gam = cfg.gamma / n if cfg.lr_decay else cfg.gamma
        gammas.append(gam)
        if kind == "fpnag":
            mu, lam = cfg.mu, 0.0
        else:
            mu, lam = momentum_coeffs(state)
        G = pert(g)
        x_new = y - gam * G
        z = x_new + mu * (x_new - x)
        if lam:
            z = z - (gam * lam) * G
        y = s.project(z)
        x = x_new
        rec.aux["x"].append(x)
        f, g = _eval(obj, y, rec)
        r = rec.add(y, f, g)
    else:
        if r < cfg.stop_kkt_tol:
            status = "converged"
    rec.aux["steps"] = gammas
    if pert.xis:
        rec.aux["perturbations"] = pert.xis
    return rec.trace(status)


def run_fpnag(obj, s, cfg, x0, seed=None, compressor=None) -> Trace:
    return _run_momentum(obj, s, cfg, x0, seed, compressor, "fpnag")


def run_pnag(obj, s, cfg, x0, seed=None, compressor=None) -> Trace:
    return _run_momentum(obj, s, cfg, x0, seed, compressor, "pnag")


def run_pogm(obj, s, cfg, x0, seed=None, compressor=None) -> Trace:
    return _run_momentum(obj, s, cfg, x0, seed, compressor, "pogm")


_RUNNERS = {"pgd": run_pgd, "fpnag": run_fpnag, "pnag": run_pnag,
            "pogm": run_pogm}


def run(obj, s, cfg: OptimizerConfig, x0, seed=None, compressor=None) -> Trace:
    return _RUNNERS[cfg.method](obj, s, cfg, x0, seed, compressor)
