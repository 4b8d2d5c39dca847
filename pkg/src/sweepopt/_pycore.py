"""Pure-Python (numpy) implementations of the numerical kernels.

Mirrors the compiled ``_core`` extension function for function; the package
falls back to this module when the extension is not built.
"""
import math

import numpy as np

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
_INV_SQRT2 = 1.0 / math.sqrt(2.0)

COMP_IDENTITY = 0
COMP_QUANTIZER = 1
COMP_GAUSSIAN = 2


def project_box(x, lower, upper):
    return np.minimum(np.maximum(x, lower), upper)


def tangent_box(x, lower, upper, v):
    out = np.array(v, dtype=np.float64, copy=True)
    at_lo = x == lower
    at_hi = x == upper
    out[at_lo] = np.maximum(out[at_lo], 0.0)
    out[at_hi] = np.minimum(out[at_hi], 0.0)
    return out


def stochastic_round(x, bits, u):
    scale = math.ldexp(1.0, bits)
    step = 1.0 / scale
    floor_ = np.floor(x)
    idx = np.floor((x - floor_) * scale)
    lo = floor_ + idx * step
    p_up = (x - lo) * scale
    return np.where(u < p_up, lo + step, lo)


def _sinr(p, gains, noise_var):
    n = p.shape[0]
    signal = gains * p
    denom = np.empty(n)
    for i in range(n):
        acc = noise_var
        for j in range(n):
            if j != i:
                acc += signal[j]
        denom[i] = acc
    return signal, denom


def power_value_grad(p, gains, weights, noise_var):
    signal, denom = _sinr(p, gains, noise_var)
    s = signal / denom
    r = np.sqrt(s)
    value = 0.0
    for i in range(p.shape[0]):
        value += weights[i] * 0.5 * math.erfc(r[i] * _INV_SQRT2)
    # dQ(sqrt(s))/ds
    c = -np.exp(-0.5 * s) * _INV_SQRT_2PI / (2.0 * r)
    wc = weights * c
    cross = wc * s / denom
    total_cross = 0.0
    for i in range(p.shape[0]):
        total_cross += cross[i]
    grad = wc * gains / denom - gains * (total_cross - cross)
    return value, grad


def power_agent_grads(p, gains, scales, noise_var):
    """Row i holds the gradient of scales[i] * Q(sqrt(sinr_i(p)))."""
    n = p.shape[0]
    signal, denom = _sinr(p, gains, noise_var)
    s = signal / denom
    r = np.sqrt(s)
    c = -np.exp(-0.5 * s) * _INV_SQRT_2PI / (2.0 * r)
    out = np.empty((n, n))
    for i in range(n):
        k = scales[i] * c[i]
        out[i, :] = -k * s[i] * gains / denom[i]
        out[i, i] = k * gains[i] / denom[i]
    return out


def _compress(g, kind, bits, comp_std, draw):
    if kind == COMP_QUANTIZER:
        return stochastic_round(g, bits, draw)
    if kind == COMP_GAUSSIAN:
        return g + comp_std * draw
    return g


def dpcgd_power_run(x0, lower, upper, gains, eval_gains, scales, weights,
                    noise_var, alphas, lambdas, comp_kind, bits, comp_std,
                    comp_draws, noise_std, noise_draws):
    n_iters = alphas.shape[0]
    m = x0.shape[0]
    n_agents = scales.shape[0]
    xs = np.empty((n_iters + 1, m))
    fs = np.empty(n_iters + 1)
    kkts = np.empty(n_iters + 1)
    clamps = 0

    x = x0.copy()
    x_prev = x0.copy()
    xs[0] = x
    f, g = power_value_grad(x, eval_gains, weights, noise_var)
    fs[0] = f
    kkts[0] = np.linalg.norm(tangent_box(x, lower, upper, -g))

    for k in range(n_iters):
        z = x + lambdas[k] * (x - x_prev)
        if np.any(z <= 0.0):
            z = project_box(z, lower, upper)
            clamps += 1
        grads = power_agent_grads(z, gains[k], scales, noise_var)
        agg = np.zeros(m)
        for i in range(n_agents):
            gi = grads[i]
            if noise_std > 0.0:
                gi = gi + noise_std * noise_draws[i, k]
            agg += _compress(gi, comp_kind, bits, comp_std,
                             comp_draws[i, k] if comp_kind else None)
        step = alphas[k] / n_agents
        x_prev = x
        x = project_box(x - step * agg, lower, upper)
        xs[k + 1] = x
        f, g = power_value_grad(x, eval_gains, weights, noise_var)
        fs[k + 1] = f
        kkts[k + 1] = np.linalg.norm(tangent_box(x, lower, upper, -g))
    return xs, fs, kkts, clamps
