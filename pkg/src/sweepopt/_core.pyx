# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled numerical kernels (box geometry, stochastic rounding, the
power-allocation objective and the fused DPCGD loop).

Signatures and semantics match ``sweepopt._pycore``.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport M_PI, erfc, exp, floor, ldexp, sqrt

cnp.import_array()

cdef double _INV_SQRT_2PI = 1.0 / sqrt(2.0 * M_PI)
cdef double _INV_SQRT2 = 1.0 / sqrt(2.0)

COMP_IDENTITY = 0
COMP_QUANTIZER = 1
COMP_GAUSSIAN = 2


cdef inline void _clip(double[::1] x, const double[::1] lo,
                       const double[::1] hi) noexcept nogil:
    cdef Py_ssize_t i
    for i in range(x.shape[0]):
        if x[i] < lo[i]:
            x[i] = lo[i]
        if x[i] > hi[i]:
            x[i] = hi[i]


def project_box(x, lower, upper):
    cdef double[::1] out = np.array(x, dtype=np.float64, copy=True)
    _clip(out, np.ascontiguousarray(lower, dtype=np.float64),
          np.ascontiguousarray(upper, dtype=np.float64))
    return np.asarray(out)


cdef inline void _tangent(const double[::1] x, const double[::1] lo,
                          const double[::1] hi, double[::1] v) noexcept nogil:
    cdef Py_ssize_t i
    for i in range(x.shape[0]):
        if x[i] == lo[i] and v[i] < 0.0:
            v[i] = 0.0
        elif x[i] == hi[i] and v[i] > 0.0:
            v[i] = 0.0


def tangent_box(x, lower, upper, v):
    cdef double[::1] out = np.array(v, dtype=np.float64, copy=True)
    _tangent(np.ascontiguousarray(x, dtype=np.float64),
             np.ascontiguousarray(lower, dtype=np.float64),
             np.ascontiguousarray(upper, dtype=np.float64), out)
    return np.asarray(out)


cdef inline double _round1(double x, double scale, double step,
                           double u) noexcept nogil:
    cdef double fl = floor(x)
    cdef double idx = floor((x - fl) * scale)
    cdef double lo = fl + idx * step
    if u < (x - lo) * scale:
        return lo + step
    return lo


def stochastic_round(x, int bits, u):
    cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef const double[::1] uv = np.ascontiguousarray(u, dtype=np.float64)
    cdef Py_ssize_t i, n = xv.shape[0]
    cdef double scale = ldexp(1.0, bits)
    cdef double step = 1.0 / scale
    out = np.empty(n)
    cdef double[::1] ov = out
    with nogil:
        for i in range(n):
            ov[i] = _round1(xv[i], scale, step, uv[i])
    return out


cdef void _sinr(const double[::1] p, const double[::1] gains, double noise_var,
                double[::1] signal, double[::1] denom) noexcept nogil:
    cdef Py_ssize_t i, j, n = p.shape[0]
    cdef double acc
    for i in range(n):
        signal[i] = gains[i] * p[i]
    for i in range(n):
        acc = noise_var
        for j in range(n):
            if j != i:
                acc += signal[j]
        denom[i] = acc


cdef double _value_grad(const double[::1] p, const double[::1] gains,
                        const double[::1] weights, double noise_var,
                        double[::1] signal, double[::1] denom,
                        double[::1] cross, double[::1] grad) noexcept nogil:
    cdef Py_ssize_t i, n = p.shape[0]
    cdef double s, r, c, wc, value = 0.0, total_cross = 0.0
    _sinr(p, gains, noise_var, signal, denom)
    for i in range(n):
        s = signal[i] / denom[i]
        r = sqrt(s)
        value += weights[i] * 0.5 * erfc(r * _INV_SQRT2)
        c = -exp(-0.5 * s) * _INV_SQRT_2PI / (2.0 * r)
        wc = weights[i] * c
        cross[i] = wc * s / denom[i]
        grad[i] = wc * gains[i] / denom[i]
        total_cross += cross[i]
    for i in range(n):
        grad[i] = grad[i] - gains[i] * (total_cross - cross[i])
    return value


def power_value_grad(p, gains, weights, double noise_var):
    cdef const double[::1] pv = np.ascontiguousarray(p, dtype=np.float64)
    cdef Py_ssize_t n = pv.shape[0]
    grad = np.empty(n)
    cdef double[::1] scratch = np.empty(3 * n)
    cdef double value = _value_grad(
        pv, np.ascontiguousarray(gains, dtype=np.float64),
        np.ascontiguousarray(weights, dtype=np.float64), noise_var,
        scratch[:n], scratch[n:2 * n], scratch[2 * n:], grad)
    return value, grad


cdef void _agent_grads(const double[::1] p, const double[::1] gains,
                       const double[::1] scales, double noise_var,
                       double[::1] signal, double[::1] denom,
                       double[:, ::1] out) noexcept nogil:
    cdef Py_ssize_t i, j, n = p.shape[0]
    cdef double s, r, k
    _sinr(p, gains, noise_var, signal, denom)
    for i in range(n):
        s = signal[i] / denom[i]
        r = sqrt(s)
        k = scales[i] * (-exp(-0.5 * s) * _INV_SQRT_2PI / (2.0 * r))
        for j in range(n):
            out[i, j] = -k * s * gains[j] / denom[i]
        out[i, i] = k * gains[i] / denom[i]


def power_agent_grads(p, gains, scales, double noise_var):
    cdef const double[::1] pv = np.ascontiguousarray(p, dtype=np.float64)
    cdef Py_ssize_t n = pv.shape[0]
    out = np.empty((n, n))
    cdef double[::1] scratch = np.empty(2 * n)
    _agent_grads(pv, np.ascontiguousarray(gains, dtype=np.float64),
                 np.ascontiguousarray(scales, dtype=np.float64), noise_var,
                 scratch[:n], scratch[n:], out)
    return out


cdef double _kkt_box(const double[::1] x, const double[::1] lo,
                     const double[::1] hi, const double[::1] g) noexcept nogil:
    cdef Py_ssize_t i
    cdef double v, acc = 0.0
    for i in range(x.shape[0]):
        v = -g[i]
        if x[i] == lo[i] and v < 0.0:
            v = 0.0
        elif x[i] == hi[i] and v > 0.0:
            v = 0.0
        acc += v * v
    return sqrt(acc)


def dpcgd_power_run(x0, lower, upper, gains, eval_gains, scales, weights,
                    double noise_var, alphas, lambdas, int comp_kind, int bits,
                    double comp_std, comp_draws, double noise_std, noise_draws):
    cdef const double[::1] lo = np.ascontiguousarray(lower, dtype=np.float64)
    cdef const double[::1] hi = np.ascontiguousarray(upper, dtype=np.float64)
    cdef const double[:, ::1] gk = np.ascontiguousarray(gains, dtype=np.float64)
    cdef const double[::1] eg = np.ascontiguousarray(eval_gains, dtype=np.float64)
    cdef const double[::1] sc = np.ascontiguousarray(scales, dtype=np.float64)
    cdef const double[::1] w = np.ascontiguousarray(weights, dtype=np.float64)
    cdef const double[::1] al = np.ascontiguousarray(alphas, dtype=np.float64)
    cdef const double[::1] la = np.ascontiguousarray(lambdas, dtype=np.float64)
    cdef const double[:, :, ::1] cd = np.ascontiguousarray(comp_draws, dtype=np.float64)
    cdef const double[:, :, ::1] nd = np.ascontiguousarray(noise_draws, dtype=np.float64)

    cdef Py_ssize_t n_iters = al.shape[0]
    cdef Py_ssize_t m = lo.shape[0]
    cdef Py_ssize_t n_agents = sc.shape[0]
    cdef Py_ssize_t k, i, j
    cdef long clamps = 0
    cdef bint outside
    cdef double step, gij, scale = ldexp(1.0, bits), qstep = 1.0 / scale

    xs_arr = np.empty((n_iters + 1, m))
    fs_arr = np.empty(n_iters + 1)
    kkts_arr = np.empty(n_iters + 1)
    cdef double[:, ::1] xs = xs_arr
    cdef double[::1] fs = fs_arr
    cdef double[::1] kkts = kkts_arr

    cdef double[::1] x = np.array(x0, dtype=np.float64, copy=True)
    cdef double[::1] x_prev = np.array(x0, dtype=np.float64, copy=True)
    cdef double[::1] x_new = np.empty(m)
    cdef double[::1] z = np.empty(m)
    cdef double[::1] agg = np.empty(m)
    cdef double[::1] grad = np.empty(m)
    cdef double[::1] signal = np.empty(m)
    cdef double[::1] denom = np.empty(m)
    cdef double[::1] cross = np.empty(m)
    cdef double[:, ::1] grads = np.empty((n_agents, m))

    with nogil:
        xs[0, :] = x
        fs[0] = _value_grad(x, eg, w, noise_var, signal, denom, cross, grad)
        kkts[0] = _kkt_box(x, lo, hi, grad)
        for k in range(n_iters):
            outside = False
            for j in range(m):
                z[j] = x[j] + la[k] * (x[j] - x_prev[j])
                if z[j] <= 0.0:
                    outside = True
            if outside:
                _clip(z, lo, hi)
                clamps += 1
            _agent_grads(z, gk[k], sc, noise_var, signal, denom, grads)
            for j in range(m):
                agg[j] = 0.0
            for i in range(n_agents):
                for j in range(m):
                    gij = grads[i, j]
                    if noise_std > 0.0:
                        gij = gij + noise_std * nd[i, k, j]
                    if comp_kind == 1:
                        gij = _round1(gij, scale, qstep, cd[i, k, j])
                    elif comp_kind == 2:
                        gij = gij + comp_std * cd[i, k, j]
                    agg[j] += gij
            step = al[k] / n_agents
            for j in range(m):
                x_new[j] = x[j] - step * agg[j]
            _clip(x_new, lo, hi)
            x_prev[:] = x
            x[:] = x_new
            xs[k + 1, :] = x
            fs[k + 1] = _value_grad(x, eg, w, noise_var, signal, denom, cross, grad)
            kkts[k + 1] = _kkt_box(x, lo, hi, grad)
    return xs_arr, fs_arr, kkts_arr, int(clamps)
