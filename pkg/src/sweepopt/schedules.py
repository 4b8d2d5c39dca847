"""Step-size and momentum schedules with summability checks.

Step schedules are indexed from ``k = 1``. ``cumulative(n)`` returns
``t_n = h_1 + ... + h_n`` in closed form where one exists.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import digamma

EULER_GAMMA = float(np.euler_gamma)


class ScheduleError(ValueError):
    pass


def _check_k(k):
    if k < 1:
        raise ScheduleError(f"schedules are indexed from k = 1, got {k}")


class StepSchedule:
    #: ``True`` when the analytic verdict is sum h = inf, sum h^2, sum h^3 < inf
    admissible: bool = False
    nonincreasing: bool = True

    def step(self, k: int) -> float:
        raise NotImplementedError

    def steps(self, n: int) -> np.ndarray:
        """``[h_1, ..., h_n]``."""
        return np.array([self.step(k) for k in range(1, n + 1)], dtype=np.float64)

    def cumulative(self, n: int) -> float:
        return float(math.fsum(self.steps(n)))

    def to_config(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Harmonic(StepSchedule):
    c: float = 1.0
    admissible = True

    def __post_init__(self):
        if not self.c > 0:
            raise ScheduleError("harmonic constant must be positive")

    def step(self, k):
        _check_k(k)
        return self.c / k

    def steps(self, n):
        return self.c / np.arange(1, n + 1, dtype=np.float64)

    def cumulative(self, n):
        if n < 1000:
            return float(math.fsum(self.steps(n)))
        return self.c * (float(digamma(n + 1.0)) + EULER_GAMMA)

    def to_config(self):
        return {"type": "harmonic", "c": self.c}


@dataclass(frozen=True)
class HarmonicShift(StepSchedule):
    """``h_k = 1 / (k + 1)``."""

    admissible = True

    def step(self, k):
        _check_k(k)
        return 1.0 / (k + 1)

    def steps(self, n):
        return 1.0 / np.arange(2, n + 2, dtype=np.float64)

    def cumulative(self, n):
        if n < 1000:
            return float(math.fsum(self.steps(n)))
        return float(digamma(n + 2.0)) + EULER_GAMMA - 1.0

    def to_config(self):
        return {"type": "harmonic_shift"}


@dataclass(frozen=True)
class LogDamped(StepSchedule):
    """``h_k = 1 / (1 + ln k)``; diverging squares, so not admissible as a
    step size. Used for extrapolation weights."""

    def step(self, k):
        _check_k(k)
        return 1.0 / (1.0 + math.log(k))

    def steps(self, n):
        return 1.0 / (1.0 + np.log(np.arange(1, n + 1, dtype=np.float64)))

    def to_config(self):
        return {"type": "log_damped"}


@dataclass(frozen=True)
class Constant(StepSchedule):
    h: float = 0.1

    def __post_init__(self):
        if not self.h >= 0:
            raise ScheduleError("constant step must be nonnegative")

    def step(self, k):
        _check_k(k)
        return self.h

    def steps(self, n):
        return np.full(n, self.h)

    def cumulative(self, n):
        return n * self.h

    def to_config(self):
        return {"type": "constant", "h": self.h}


@dataclass(frozen=True)
class Zero(StepSchedule):
    """``h_k = 0``; turns extrapolation off."""

    def step(self, k):
        _check_k(k)
        return 0.0

    def steps(self, n):
        return np.zeros(n)

    def cumulative(self, n):
        return 0.0

    def to_config(self):
        return {"type": "zero"}


def theta_next(theta: float) -> float:
    return (1.0 + math.sqrt(1.0 + 4.0 * theta * theta)) / 2.0


@dataclass
class MomentumState:
    """Position in the theta recursion. ``theta`` is theta_k, starting at 1."""

    kind: str = "nesterov"
    theta: float = 1.0
    k: int = 1


class _MomentumSchedule:
    kind = ""

    def step(self, k):
        raise TypeError(f"{type(self).__name__} yields momentum coefficients, "
                        "not step sizes; use momentum_coeffs")

    def start(self) -> MomentumState:
        return MomentumState(self.kind)

    def coeffs(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        """Arrays of the first ``n`` coefficient pairs."""
        st = self.start()
        pairs = [momentum_coeffs(st) for _ in range(n)]
        mu, lam = zip(*pairs) if pairs else ((), ())
        return np.array(mu), np.array(lam)

    def to_config(self):
        return {"type": self.kind}


@dataclass(frozen=True)
class NesterovMomentum(_MomentumSchedule):
    kind = "nesterov"


@dataclass(frozen=True)
class OgmTheta(_MomentumSchedule):
    kind = "ogm"


def momentum_coeffs(state: MomentumState) -> tuple[float, float]:
    """Return ``(mu_k, lambda_k)`` and advance ``state`` to ``k + 1``.

    ``mu_k = (theta_k - 1) / theta_{k+1}``; ``lambda_k = theta_k / theta_{k+1}``
    for the optimized-gradient variant and zero otherwise.
    """
    th = state.theta
    th1 = theta_next(th)
    mu = (th - 1.0) / th1
    lam = th / th1 if state.kind == "ogm" else 0.0
    state.theta = th1
    state.k += 1
    return mu, lam


def step(s, k: int) -> float:
    return s.step(k)


@dataclass(frozen=True)
class AdmissibilityReport:
    horizon: int
    sum_h: float
    sum_h2: float
    sum_h3: float
    diverging: bool
    admissible: bool
    verdict: str


def check_admissible(s: StepSchedule, horizon: int = 10 ** 6) -> AdmissibilityReport:
    """Partial sums to ``horizon`` together with the analytic verdict."""
    if isinstance(s, _MomentumSchedule):
        raise TypeError("momentum schedules have no step-size admissibility")
    if horizon < 1000:
        raise ScheduleError("horizon must be at least 1000")
    h = s.steps(horizon)
    diverging = not isinstance(s, Zero)
    return AdmissibilityReport(
        horizon=horizon,
        sum_h=float(math.fsum(h)),
        sum_h2=float(math.fsum(h * h)),
        sum_h3=float(math.fsum(h ** 3)),
        diverging=diverging,
        admissible=s.admissible,
        verdict="admissible" if s.admissible else "inadmissible",
    )


def steps_to_reach(s: StepSchedule, t: float, start: int = 0) -> int:
    """Smallest ``n >= start`` with ``cumulative(n) >= t``."""
    if t <= 0:
        return start
    if s.cumulative(start) >= t:
        return start
    lo, hi = max(start, 0), max(start, 1)
    while s.cumulative(hi) < t:
        lo, hi = hi, hi * 2
        if hi > 1 << 200:
            raise ScheduleError(f"time {t} is not reachable by this schedule")
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if s.cumulative(mid) >= t:
            hi = mid
        else:
            lo = mid
    return hi


def schedule_from_config(cfg: dict):
    kind = cfg["type"]
    if kind == "harmonic":
        return Harmonic(cfg.get("c", 1.0))
    if kind == "harmonic_shift":
        return HarmonicShift()
    if kind == "log_damped":
        return LogDamped()
    if kind == "constant":
        return Constant(cfg["h"])
    if kind == "zero":
        return Zero()
    if kind == "nesterov":
        return NesterovMomentum()
    if kind == "ogm":
        return OgmTheta()
    raise ScheduleError(f"unknown schedule type {kind!r}")
