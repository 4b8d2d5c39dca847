"""Continuous-time sweeping-process laboratory.

The inclusion ``-dx/dt in psi(t, x) + N_C(x)`` is integrated through its
equivalent ODE ``dx/dt = P_{T_C(x)}[-psi(t, x)]`` with projected Euler steps.
The decaying-step scheme ``z_k = P[z_{k-1} - h_k psi(t_{k-1}, z_{k-1})]`` is
compared with that reference over sliding windows.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .geometry import (Box, ConvexSet, NotInSetError, ProductSet,
                       TOL_MEMBERSHIP, WholeSpace, as_point)
from .objectives import Objective
from .schedules import StepSchedule, steps_to_reach


class PspError(ValueError):
    pass


class SpanError(PspError):
    pass


@dataclass(frozen=True)
class VectorField:
    psi: Callable[[float, np.ndarray], np.ndarray]
    name: str = "field"
    autonomous: bool = False

    def __call__(self, t, x):
        return self.psi(t, x)


def gradient_field(obj: Objective) -> VectorField:
    grad = obj.gradient
    return VectorField(lambda t, x: grad(x), f"grad {obj.name}", autonomous=True)


def zero_field() -> VectorField:
    return VectorField(lambda t, x: np.zeros_like(x), "zero", autonomous=True)


def _time_shifted(field: VectorField, s: float) -> VectorField:
    if field.autonomous:
        return field
    psi = field.psi
    return VectorField(lambda t, x: psi(s + t, x), field.name, False)


@dataclass(frozen=True)
class ContinuousTrajectory:
    ts: np.ndarray
    xs: np.ndarray
    h_fine: float

    def at(self, t) -> np.ndarray:
        return _interp(self.ts, self.xs, t)


def _interp(ts, xs, t):
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    out = np.empty((t.shape[0], xs.shape[1]))
    for j in range(xs.shape[1]):
        out[:, j] = np.interp(t, ts, xs[:, j])
    return out


@dataclass(frozen=True)
class Interpolant:
    """Piecewise-linear path through the knots ``(t_k, z_k)``.

    Past the last knot and up to ``span_end`` the path is constant; that tail
    is only created when the scheme provably stalls (see
    :func:`run_decaying_scheme`).
    """

    ts: np.ndarray
    zs: np.ndarray
    span_end: float
    meta: dict = field(default_factory=dict, compare=False)

    @classmethod
    def from_trajectory(cls, traj: ContinuousTrajectory) -> "Interpolant":
        return cls(traj.ts, traj.xs, float(traj.ts[-1]))

    def __call__(self, t) -> np.ndarray:
        """Evaluate at scalar ``t`` or an array of times (rows)."""
        scalar = np.ndim(t) == 0
        t_arr = np.atleast_1d(np.asarray(t, dtype=np.float64))
        if np.any(t_arr > self.span_end * (1 + 1e-12)) or np.any(t_arr < 0):
            raise SpanError(f"time outside [0, {self.span_end}]")
        out = _interp(self.ts, self.zs, t_arr)
        return out[0] if scalar else out


class KappaClock:
    """``kappa(t) = sup{sqrt(k + 1) : tau_k <= t}`` with
    ``tau_k = sum_{l<=k} sqrt(l)``."""

    def __init__(self):
        self._tau = np.array([0.0])

    def tau(self, k: int) -> float:
        self._extend_to_index(k)
        return float(self._tau[k])

    def _extend_to_index(self, k):
        n = self._tau.shape[0]
        if k < n:
            return
        new = max(k + 1, 2 * n)
        ls = np.arange(n, new, dtype=np.float64)
        self._tau = np.concatenate([self._tau, self._tau[-1] + np.cumsum(np.sqrt(ls))])

    def __call__(self, t: float) -> float:
        if t < 0:
            return 1.0
        while self._tau[-1] <= t:
            self._extend_to_index(2 * self._tau.shape[0])
        k = int(np.searchsorted(self._tau, t, side="right")) - 1
        return math.sqrt(k + 1)


@dataclass(frozen=True)
class LyapunovPair:
    V: Callable[[float, np.ndarray], float]
    W: Callable[[float, np.ndarray], float]
    name: str = "pair"


def _feasible_start(s, x0):
    x0 = as_point(x0)
    if not s.contains(x0, TOL_MEMBERSHIP):
        raise NotInSetError(s.distance(x0), TOL_MEMBERSHIP)
    return s.project(x0)


def solve_reference(field: VectorField, s: ConvexSet, x0, t_end: float,
                    h_fine: float = 1e-3) -> ContinuousTrajectory:
    """Projected Euler on the tangent-cone ODE with a final outer projection
    guarding round-off. The last step is shortened to land on ``t_end``."""
    if not (h_fine > 0 and t_end >= 0):
        raise PspError("need h_fine > 0 and t_end >= 0")
    x = _feasible_start(s, x0)
    proj, tang = s.fast_ops()
    n = max(0, math.ceil(t_end / h_fine - 1e-9))
    ts = np.empty(n + 1)
    xs = np.empty((n + 1, x.shape[0]))
    ts[0] = 0.0
    xs[0] = x
    psi = field.psi
    t = 0.0
    for j in range(n):
        h = min(h_fine, t_end - j * h_fine) if j == n - 1 else h_fine
        v = psi(t, x)
        if not np.all(np.isfinite(v)):
            raise PspError(f"non-finite field value at t={t}")
        x = proj(x + h * tang(x, -v))
        t = (j + 1) * h_fine if j < n - 1 else t_end
        ts[j + 1] = t
        xs[j + 1] = x
    return ContinuousTrajectory(ts, xs, h_fine)


def _stall_is_permanent(field, s, schedule):
    """A bitwise fixed point of one step stays fixed for every later step when
    the field ignores time, steps never grow and projection acts coordinatewise
    (monotone rounding then keeps each coordinate where it is)."""
    return (field.autonomous and schedule.nonincreasing
            and isinstance(s, (Box, WholeSpace)))


def run_decaying_scheme(field: VectorField, s: ConvexSet, x0,
                        schedule: StepSchedule, n_steps: int | None = None,
                        t_end: float | None = None,
                        fast_forward: bool = True) -> Interpolant:
    """Run the decaying-step scheme for ``n_steps`` steps or until the knot
    time reaches ``t_end``.

    If a step leaves the knot bitwise unchanged and the stall is provably
    permanent, the remaining steps are skipped: their knots all equal the
    current one and the elapsed time is read off the schedule's closed-form
    cumulative sum.
    """
    if (n_steps is None) == (t_end is None):
        raise PspError("give exactly one of n_steps or t_end")
    warn = []
    if not getattr(schedule, "admissible", False):
        warn.append(f"schedule {schedule.to_config()} is not admissible; "
                    "convergence claims do not apply")
        warnings.warn(warn[-1], RuntimeWarning, stacklevel=2)
    z = _feasible_start(s, x0)
    proj, _ = s.fast_ops()
    psi = field.psi
    permanent = fast_forward and _stall_is_permanent(field, s, schedule)

    ts, zs = [0.0], [z]
    t = 0.0
    k = 0
    stalled_at = None
    limit = n_steps if n_steps is not None else None
    while True:
        if limit is not None and k >= limit:
            break
        if t_end is not None and t >= t_end:
            break
        k += 1
        h = schedule.step(k)
        v = psi(t, z)
        if not np.all(np.isfinite(v)):
            raise PspError(f"non-finite field value at step {k}")
        z_new = proj(z - h * v)
        t = t + h
        ts.append(t)
        zs.append(z_new)
        if permanent and np.array_equal(z_new, z):
            stalled_at = k
            break
        z = z_new

    span_end = ts[-1]
    total = k
    if stalled_at is not None:
        if t_end is not None:
            total = max(k, steps_to_reach(schedule, t_end, start=k))
            span_end = max(ts[-1], schedule.cumulative(total))
        else:
            total = n_steps
            span_end = max(ts[-1], schedule.cumulative(n_steps))
    return Interpolant(np.array(ts), np.array(zs), float(span_end),
                       meta={"warnings": warn, "stalled_at": stalled_at,
                             "n_steps": total})


def window_error(interp: Interpolant, field: VectorField, s: ConvexSet,
                 start: float, tau: float, h_fine: float = 1e-3) -> float:
    """``sup_{start <= t <= start + tau} ||u(t) - z(t)||`` where ``z`` solves
    the reference dynamics from ``z(start) = u(start)``."""
    if start + tau > interp.span_end * (1 + 1e-12):
        raise SpanError(f"window [{start}, {start + tau}] exceeds the "
                        f"interpolant span {interp.span_end}")
    z0 = interp(start)
    ref = solve_reference(_time_shifted(field, start), s, z0, tau, h_fine)
    u = interp(np.minimum(start + ref.ts, interp.span_end))
    return float(np.max(np.linalg.norm(u - ref.xs, axis=1)))


@dataclass(frozen=True)
class ContractionReport:
    ts: np.ndarray
    distances: np.ndarray
    ratios: np.ndarray | None
    degenerate: bool

    @property
    def max_ratio(self) -> float:
        return 0.0 if self.ratios is None else float(np.max(self.ratios))


def contraction_test(field: VectorField, s: ConvexSet, x0, y0, gamma_mod: float,
                     t_end: float, h_fine: float = 1e-3) -> ContractionReport:
    """Distance between two reference solutions relative to the envelope
    ``exp(-gamma_mod t) ||x0 - y0||``."""
    a = solve_reference(field, s, x0, t_end, h_fine)
    b = solve_reference(field, s, y0, t_end, h_fine)
    d = np.linalg.norm(a.xs - b.xs, axis=1)
    if d[0] == 0.0:
        return ContractionReport(a.ts, d, None, True)
    return ContractionReport(a.ts, d, d / (np.exp(-gamma_mod * a.ts) * d[0]), False)


@dataclass(frozen=True)
class LyapunovReport:
    ts: np.ndarray
    V: np.ndarray
    W: np.ndarray
    W_integral: np.ndarray
    max_increase: float

    @property
    def energy(self) -> np.ndarray:
        return self.V + self.W_integral


def eval_lyapunov_along(pair: LyapunovPair, traj: ContinuousTrajectory) -> LyapunovReport:
    """Evaluates ``E(t) = V(t, x(t)) + int_0^t W`` (trapezoid) and reports the
    largest single-step increase of ``E``, zero if ``E`` never grows."""
    ts = traj.ts
    V = np.array([pair.V(t, x) for t, x in zip(ts, traj.xs)])
    W = np.array([pair.W(t, x) for t, x in zip(ts, traj.xs)])
    integral = np.zeros_like(V)
    if ts.shape[0] > 1:
        integral[1:] = np.cumsum(0.5 * (W[1:] + W[:-1]) * np.diff(ts))
    E = V + integral
    jumps = np.diff(E)
    max_inc = float(max(0.0, jumps.max())) if jumps.size else 0.0
    return LyapunovReport(ts, V, W, integral, max_inc)


def pnag_set(s: ConvexSet) -> ProductSet:
    """``R^m x C``: the momentum block is unconstrained."""
    return ProductSet(WholeSpace(s.dim), s)


def pnag_field(obj: Objective, gamma: float, mu: float,
               clock: KappaClock | None = None) -> VectorField:
    """Field on ``(x, y)`` whose negative is the drift
    ``kappa(t) [y - x - gamma grad f(y),  mu (y - x) - nu grad f(y)]``,
    ``nu = gamma (1 + mu)``. Pair it with :func:`pnag_set`."""
    if not gamma > 0 or not 0 < mu < 1:
        raise PspError("need gamma > 0 and 0 < mu < 1")
    clock = clock or KappaClock()
    nu = gamma * (1.0 + mu)
    m = obj.dim
    grad = obj.gradient

    def psi(t, z):
        x, y = z[:m], z[m:]
        g = grad(y)
        d = y - x
        k = clock(t)
        return -k * np.concatenate([d - gamma * g, mu * d - nu * g])

    return VectorField(psi, f"pnag {obj.name}", autonomous=False)


def pnag_lyapunov_pair(obj: Objective, s: ConvexSet, gamma: float, mu: float,
                       clock: KappaClock | None = None) -> LyapunovPair:
    """``V = |x - y|^2 / 2 + gamma f(y)`` and
    ``W = kappa ((1 - mu)|x - y|^2 + gamma nu |P_T(y)[-grad f(y)]|^2)``."""
    clock = clock or KappaClock()
    nu = gamma * (1.0 + mu)
    m = obj.dim
    _, tang = s.fast_ops()

    def V(t, z):
        d = z[:m] - z[m:]
        return 0.5 * float(d @ d) + gamma * obj.value(z[m:])

    def W(t, z):
        d = z[:m] - z[m:]
        y = z[m:]
        r = tang(y, -obj.gradient(y))
        return clock(t) * ((1.0 - mu) * float(d @ d) + gamma * nu * float(r @ r))

    return LyapunovPair(V, W, f"pnag {obj.name}")
