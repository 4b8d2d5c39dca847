"""Benchmark objectives with analytic gradients and a finite-difference oracle."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ._backend import kernels
from .geometry import Box, ConvexSet, as_point


class ObjectiveError(ValueError):
    pass


class DomainError(ObjectiveError):
    """Raised when a point lies outside an objective's domain."""


@dataclass(frozen=True)
class Objective:
    dim: int
    value: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    name: str
    domain: ConvexSet | None = None
    meta: dict = field(default_factory=dict, compare=False)

    def __call__(self, x) -> float:
        return self.value(x)


def sum_quadratic(anchors) -> Objective:
    """``f(x) = 1/2 sum_i ||x - a_i||^2``; minimizer is the anchor mean."""
    A = np.array(anchors, dtype=np.float64)
    if A.size == 0:
        raise ObjectiveError("sum_quadratic needs at least one anchor")
    if A.ndim == 1:
        A = A.reshape(-1, 1)
    if A.ndim != 2:
        raise ObjectiveError("anchors must all share one dimension")
    A.flags.writeable = False

    def value(x):
        d = as_point(x) - A
        return 0.5 * float(np.add.reduce(np.einsum("ij,ij->i", d, d)))

    def gradient(x):
        # np.add.reduce over axis 0 sums in anchor order
        return np.add.reduce(as_point(x) - A, axis=0)

    return Objective(A.shape[1], value, gradient, "sum_quadratic",
                     meta={"anchors": A, "minimizer": A.mean(axis=0),
                           "lipschitz": float(A.shape[0])})


def anchors_from_seed(seed: int, n_anchors: int = 10, dim: int = 10,
                      low: float = -1.0, high: float = 1.0) -> np.ndarray:
    return np.random.default_rng(seed).uniform(low, high, size=(n_anchors, dim))


CAMEL_MINIMA = (np.array([0.0898, -0.7126]), np.array([-0.0898, 0.7126]))
CAMEL_MIN_VALUE = -1.0316


def six_hump_camel() -> Objective:
    def value(p):
        x, y = as_point(p)
        return ((4.0 - 2.1 * x * x + x ** 4 / 3.0) * x * x + x * y
                + (-4.0 + 4.0 * y * y) * y * y)

    def gradient(p):
        x, y = as_point(p)
        return np.array([8.0 * x - 8.4 * x ** 3 + 2.0 * x ** 5 + y,
                         x - 8.0 * y + 16.0 * y ** 3])

    return Objective(2, value, gradient, "six_hump_camel",
                     meta={"minima": CAMEL_MINIMA, "min_value": CAMEL_MIN_VALUE})


def q_function(x: float) -> float:
    """Gaussian tail probability via ``Q(x) = erfc(x / sqrt 2) / 2``."""
    return 0.5 * math.erfc(x / math.sqrt(2.0))


@dataclass(frozen=True)
class PowerAllocationParams:
    weights: tuple
    gains: tuple
    noise_var: float
    p_min: float
    p_max: float

    def __post_init__(self):
        w = tuple(float(v) for v in self.weights)
        a = tuple(float(v) for v in self.gains)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "gains", a)
        if len(w) == 0 or len(w) != len(a):
            raise ObjectiveError("weights and gains must be nonempty and equal length")
        if min(w) <= 0 or min(a) <= 0:
            raise ObjectiveError("weights and gains must be positive")
        if not self.noise_var > 0:
            raise ObjectiveError("noise variance must be positive")
        if not 0 < self.p_min < self.p_max:
            raise ObjectiveError("need 0 < p_min < p_max")

    @classmethod
    def reference(cls) -> "PowerAllocationParams":
        """Four transmitters, the setting used throughout the experiments."""
        return cls((0.4, 0.3, 0.2, 0.1), (2.0, 5.0 / 3.0, 4.0 / 3.0, 1.0),
                   0.1, 0.5, 10.0)

    @property
    def n_sources(self) -> int:
        return len(self.weights)

    def box(self) -> Box:
        return Box.cube(self.p_min, self.p_max, self.n_sources)

    def to_config(self) -> dict:
        return {"weights": list(self.weights), "gains": list(self.gains),
                "noise_var": self.noise_var, "p_min": self.p_min,
                "p_max": self.p_max}


def sinr(p, gains, noise_var) -> np.ndarray:
    p = as_point(p)
    g = np.asarray(gains, dtype=np.float64)
    signal = g * p
    return signal / (noise_var + signal.sum() - signal)


def power_allocation(params: PowerAllocationParams) -> Objective:
    """Weighted sum of per-link bit error probabilities ``sum g_i Q(sqrt s_i)``."""
    w = np.array(params.weights)
    a = np.array(params.gains)
    nv = params.noise_var

    def _check(p):
        p = as_point(p)
        if p.shape[0] != w.shape[0]:
            raise ObjectiveError(f"expected {w.shape[0]} powers, got {p.shape[0]}")
        if np.any(p <= 0):
            raise DomainError("transmit powers must be strictly positive")
        return p

    def value(p):
        return kernels.power_value_grad(_check(p), a, w, nv)[0]

    def gradient(p):
        return kernels.power_value_grad(_check(p), a, w, nv)[1]

    return Objective(params.n_sources, value, gradient, "power_allocation",
                     domain=params.box(), meta={"params": params})


def finite_diff_gradient(obj: Objective, x, h: float = 1e-5) -> np.ndarray:
    x = as_point(x)
    g = np.empty_like(x)
    for i in range(x.shape[0]):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (obj.value(x + e) - obj.value(x - e)) / (2.0 * h)
    return g


def objective_from_config(cfg: dict) -> Objective:
    name = cfg["name"]
    if name == "sum_quadratic":
        if "anchors" in cfg:
            return sum_quadratic(cfg["anchors"])
        return sum_quadratic(anchors_from_seed(
            cfg["anchor_seed"], cfg.get("n_anchors", 10), cfg.get("dim", 10)))
    if name == "six_hump_camel":
        return six_hump_camel()
    if name == "power_allocation":
        return power_allocation(power_params_from_config(cfg.get("params", {})))
    raise ObjectiveError(f"unknown objective {name!r}")


def power_params_from_config(cfg: dict) -> PowerAllocationParams:
    ref = PowerAllocationParams.reference().to_config()
    ref.update(cfg)
    return PowerAllocationParams(ref["weights"], ref["gains"], ref["noise_var"],
                                 ref["p_min"], ref["p_max"])
