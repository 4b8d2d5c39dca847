"""Unbiased stochastic gradient compressors and a statistics verifier.

Every compressor owns a seedable ``numpy.random.Generator``. Random numbers are
drawn in a fixed layout (one uniform or one standard normal per coordinate per
call) so that pre-drawing a block of them reproduces a sequence of calls
exactly; the fused DPCGD kernel relies on this.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._backend import kernels
from .geometry import as_point

MAX_BITS = 32


class CompressorError(ValueError):
    pass


def _rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


class Compressor:
    kind: int = kernels.COMP_IDENTITY

    def __init__(self, seed=None):
        self.rng = _rng(seed)

    def compress(self, x, rng=None) -> np.ndarray:
        raise NotImplementedError

    def mu(self, dim: int) -> float:
        """Absolute variance constant: ``E||c(x) - x||^2 <= mu``."""
        raise NotImplementedError

    def clone(self, seed) -> "Compressor":
        raise NotImplementedError

    def draw_block(self, shape) -> np.ndarray:
        """Raw random numbers equal to those consumed by ``shape[0]``
        successive calls on vectors of length ``shape[-1]``; ``None`` when
        the compressor consumes no randomness."""
        raise NotImplementedError

    def to_config(self) -> dict:
        raise NotImplementedError


class Identity(Compressor):
    def compress(self, x, rng=None):
        return as_point(x).copy()

    def mu(self, dim):
        return 0.0

    def clone(self, seed):
        return Identity(seed)

    def draw_block(self, shape):
        return None

    def to_config(self):
        return {"type": "identity"}

    def __repr__(self):
        return "Identity()"


class UniformQuantizer(Compressor):
    """Per-coordinate stochastic rounding onto the grid ``2^-bits * Z``."""

    kind = kernels.COMP_QUANTIZER

    def __init__(self, bits: int, seed=None):
        if int(bits) != bits or not 1 <= bits <= MAX_BITS:
            raise CompressorError(f"bits must be an integer in [1, {MAX_BITS}]")
        super().__init__(seed)
        self.bits = int(bits)

    def compress(self, x, rng=None):
        x = as_point(x)
        u = (rng or self.rng).random(x.shape[0])
        return kernels.stochastic_round(x, self.bits, u)

    def mu(self, dim):
        return dim * 4.0 ** (-self.bits)

    def clone(self, seed):
        return UniformQuantizer(self.bits, seed)

    def draw_block(self, shape):
        return self.rng.random(shape)

    def to_config(self):
        return {"type": "uniform_quantizer", "bits": self.bits}

    def __repr__(self):
        return f"UniformQuantizer(bits={self.bits})"


class GaussianNoise(Compressor):
    """Additive ``N(0, variance I)`` perturbation."""

    kind = kernels.COMP_GAUSSIAN

    def __init__(self, variance: float, seed=None):
        if not (math.isfinite(variance) and variance > 0):
            raise CompressorError("variance must be positive and finite")
        super().__init__(seed)
        self.variance = float(variance)
        self.std = math.sqrt(self.variance)

    def compress(self, x, rng=None):
        x = as_point(x)
        return x + self.std * (rng or self.rng).standard_normal(x.shape[0])

    def mu(self, dim):
        return dim * self.variance

    def clone(self, seed):
        return GaussianNoise(self.variance, seed)

    def draw_block(self, shape):
        return self.rng.standard_normal(shape)

    def to_config(self):
        return {"type": "gaussian", "variance": self.variance}

    def __repr__(self):
        return f"GaussianNoise(variance={self.variance})"


def compress(c: Compressor, x, rng=None) -> np.ndarray:
    return c.compress(x, rng)


@dataclass(frozen=True)
class CompressorStats:
    n_samples: int
    empirical_bias: np.ndarray
    empirical_variance_per_coord: np.ndarray

    @property
    def std_err(self) -> np.ndarray:
        return np.sqrt(self.empirical_variance_per_coord / self.n_samples)


def sample(c: Compressor, x, n: int, rng=None) -> np.ndarray:
    """``n`` independent compressions of ``x`` as an ``(n, m)`` array."""
    x = as_point(x)
    rng = rng or c.rng
    if isinstance(c, UniformQuantizer):
        u = rng.random((n, x.shape[0]))
        flat = kernels.stochastic_round(np.broadcast_to(x, u.shape).ravel(),
                                        c.bits, u.ravel())
        return flat.reshape(u.shape)
    if isinstance(c, GaussianNoise):
        return x + c.std * rng.standard_normal((n, x.shape[0]))
    return np.broadcast_to(x, (n, x.shape[0])).copy()


def verify_unbiasedness(c: Compressor, x, n: int, rng=None) -> CompressorStats:
    if n < 1000:
        raise CompressorError("verification needs at least 1000 samples")
    d = sample(c, x, n, rng) - as_point(x)
    return CompressorStats(n, d.mean(axis=0), d.var(axis=0, ddof=1))


def compressor_from_config(cfg: dict | None, seed=None) -> Compressor:
    if cfg is None:
        return Identity(seed)
    kind = cfg["type"]
    if kind == "identity":
        return Identity(seed)
    if kind == "uniform_quantizer":
        return UniformQuantizer(cfg["bits"], seed)
    if kind == "gaussian":
        return GaussianNoise(cfg["variance"], seed)
    raise CompressorError(f"unknown compressor type {kind!r}")
