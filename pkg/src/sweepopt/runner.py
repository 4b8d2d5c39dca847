"""Execute validated experiment configs and write result bundles.

A bundle holds ``config.json`` (the input bytes, unchanged), one CSV per run
and ``summary.json``. Runs execute in parallel up to ``jobs``; files are
written only by the calling process, in a fixed order.
"""
from __future__ import annotations

import json
import os
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import dpcgd as dp
from . import psp
from .geometry import set_from_config
from .objectives import (Objective, objective_from_config, power_params_from_config,
                         sum_quadratic)
from .optimizers import DivergenceError, OptimizerConfig, run
from .schedules import HarmonicShift, schedule_from_config


class RunError(RuntimeError):
    """Runtime failure after partial results were flushed."""


def _rows_to_csv(rows) -> str:
    return "".join(",".join(r) + "\n" for r in rows)


def _r(v) -> str:
    return repr(float(v))


def _set_for(cfg, obj: Objective | None):
    dim = obj.dim if obj is not None else cfg.get("dim")
    return set_from_config(cfg["set"], dim)


# -- optimizer runs ---------------------------------------------------------

def _method_labels(methods):
    labels = [m.get("label", m["method"]) for m in methods]
    if len(set(labels)) != len(labels):
        labels = [f"{lab}{i}" for i, lab in enumerate(labels)]
    return labels


def _start(cfg, s, seed, dim):
    x0 = cfg["x0"]
    if isinstance(x0, dict):
        lo, hi = x0["uniform"]
        return np.random.default_rng(seed).uniform(lo, hi, dim)
    return np.array(x0, dtype=np.float64)


def _optimizer_job(cfg, mi, seed):
    obj = objective_from_config(cfg["objective"])
    s = _set_for(cfg, obj)
    m = cfg["methods"][mi]
    sched = (schedule_from_config(m["schedule"]) if "schedule" in m
             else HarmonicShift())
    oc = OptimizerConfig(method=m["method"], gamma=m.get("gamma", 0.1),
                         mu=m.get("mu", 0.5), step_schedule=sched,
                         compressor=cfg.get("compressor"),
                         noise_variance=cfg.get("noise_variance", 0.0),
                         lr_decay=cfg.get("lr_decay", False),
                         max_iters=cfg["n_iters"],
                         stop_kkt_tol=cfg.get("stop_kkt_tol", 0.0))
    x0 = _start(cfg, s, seed, obj.dim)
    t0 = time.perf_counter()
    try:
        tr = run(obj, s, oc, x0, seed=seed)
        err = None
    except DivergenceError as e:
        tr, err = e.trace, str(e)
    info = {"terminal_f": tr.f_final if len(tr) else None,
            "terminal_kkt": tr.kkt_final if len(tr) else None,
            "iterations": int(len(tr) - 1), "status": tr.status,
            "wall_time": time.perf_counter() - t0, "clamp_events": 0}
    if err:
        info["error"] = err
    return tr.to_csv(), info


def _optimizer_units(cfg):
    labels = _method_labels(cfg["methods"])
    return [(f"{labels[mi]}_seed{seed}", (cfg, mi, seed))
            for mi in range(len(cfg["methods"])) for seed in cfg["seeds"]]


# -- psp diagnostics ---------------------------------------------------------

def _psp_contraction(cfg, seed):
    dim = cfg["dim"]
    s = set_from_config(cfg["set"], dim)
    rng = np.random.default_rng(seed)
    c = rng.uniform(-1.0, 1.0, dim)
    x0 = s.project(rng.uniform(-1.0, 1.0, dim))
    y0 = s.project(rng.uniform(-1.0, 1.0, dim))
    field = psp.gradient_field(sum_quadratic([c]))
    rep = psp.contraction_test(field, s, x0, y0, cfg["gamma_mod"], cfg["t_end"],
                               cfg["h_fine"])
    ratios = rep.ratios if rep.ratios is not None else np.zeros_like(rep.ts)
    rows = [["t", "distance", "ratio"]]
    rows += [[_r(t), _r(d), _r(q)] for t, d, q in zip(rep.ts, rep.distances, ratios)]
    return _rows_to_csv(rows), {"max_ratio": rep.max_ratio}


def _psp_window(cfg, _seed):
    obj = objective_from_config(cfg["objective"])
    s = _set_for(cfg, obj)
    field = psp.gradient_field(obj)
    tau = cfg["tau"]
    windows = cfg["windows"]
    interp = psp.run_decaying_scheme(field, s, cfg["x0"],
                                     schedule_from_config(cfg["schedule"]),
                                     t_end=max(windows) + tau)
    errs = [psp.window_error(interp, field, s, w, tau, cfg["h_fine"]) for w in windows]
    rows = [["s", "window_error"]] + [[_r(w), _r(e)] for w, e in zip(windows, errs)]
    return _rows_to_csv(rows), {"window_errors": errs,
                                "stalled_at_step": interp.meta["stalled_at"]}


def _psp_lyapunov(cfg, h):
    obj = objective_from_config(cfg["objective"])
    s = _set_for(cfg, obj)
    gamma, mu = cfg["gamma"], cfg["mu"]
    x0 = np.array(cfg["x0"], dtype=np.float64)
    if x0.shape[0] == obj.dim:
        x0 = np.concatenate([x0, x0])
    traj = psp.solve_reference(psp.pnag_field(obj, gamma, mu), psp.pnag_set(s),
                               x0, cfg["t_end"], h)
    rep = psp.eval_lyapunov_along(psp.pnag_lyapunov_pair(obj, s, gamma, mu), traj)
    rows = [["t", "V", "W", "W_integral", "energy"]]
    rows += [[_r(t), _r(v), _r(w), _r(i), _r(e)] for t, v, w, i, e in
             zip(rep.ts, rep.V, rep.W, rep.W_integral, rep.energy)]
    return _rows_to_csv(rows), {"h_fine": h, "max_increase": rep.max_increase}


def _psp_job(cfg, arg):
    t0 = time.perf_counter()
    fn = {"contraction": _psp_contraction, "window": _psp_window,
          "lyapunov": _psp_lyapunov}[cfg["diagnostic"]]
    text, info = fn(cfg, arg)
    info["wall_time"] = time.perf_counter() - t0
    return text, info


def _psp_units(cfg):
    d = cfg["diagnostic"]
    if d == "contraction":
        return [(f"contraction_seed{sd}", (cfg, sd)) for sd in cfg["seeds"]]
    if d == "window":
        return [("window_errors", (cfg, None))]
    return [(f"lyapunov_h{h!r}", (cfg, h)) for h in cfg["h_fines"]]


# -- dpcgd --------------------------------------------------------------------

def _compressor_label(c):
    if c["type"] == "uniform_quantizer":
        return f"quantizer_b{c['bits']}"
    if c["type"] == "gaussian":
        return f"gaussian_var{c['variance']!r}"
    return "identity"


def _dpcgd_config(cfg, comp):
    params = power_params_from_config(cfg.get("params", {}))
    x0 = cfg.get("x0", "p_min")
    if isinstance(x0, str):
        val = {"p_min": params.p_min, "p_max": params.p_max,
               "center": 0.5 * (params.p_min + params.p_max)}[x0]
        x0 = np.full(params.n_sources, val)
    ch = cfg.get("channel", {"type": "deterministic"})
    dc = dp.DpcgdConfig(
        set=params.box(), x0=x0,
        alpha_schedule=schedule_from_config(cfg.get("alpha", {"type": "harmonic", "c": 100})),
        lambda_schedule=schedule_from_config(cfg.get("lambda", {"type": "log_damped"})),
        n_iters=cfg["n_iters"], channel=ch["type"],
        channel_range=(ch.get("low", 0.5), ch.get("high", 1.5)),
        compressor=comp, noise_variance=cfg.get("noise_variance", 0.0))
    return dc, params


def _dpcgd_job(cfg, ci, jobs=1):
    comp = cfg["compressors"][ci]
    dc, params = _dpcgd_config(cfg, comp)
    t0 = time.perf_counter()
    rep = dp.monte_carlo(dc, params, cfg["n_runs"], cfg["base_seed"], jobs=jobs)
    info = {"terminal_mean_f": float(rep.mean_F[-1]),
            "terminal_mean_kkt": float(rep.mean_kkt[-1]),
            "initial_mean_kkt": float(rep.mean_kkt[0]),
            "n_runs": cfg["n_runs"], "clamp_events": rep.clamp_events,
            "wall_time": time.perf_counter() - t0}
    return rep.to_csv(), info


def _dpcgd_units(cfg):
    return [(_compressor_label(c), (cfg, i)) for i, c in enumerate(cfg["compressors"])]


_DISPATCH = {"optimizer_run": (_optimizer_units, _optimizer_job),
             "psp_diagnostic": (_psp_units, _psp_job),
             "dpcgd": (_dpcgd_units, _dpcgd_job)}


def execute(cfg: dict, raw: bytes, out_dir: str, jobs: int = 1) -> dict:
    """Run ``cfg`` and write the bundle into ``out_dir``; returns the summary.

    Raises :class:`RunError` after flushing whatever finished when a run fails.
    """
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "config.json"), "wb") as fh:
        fh.write(raw)
    units_fn, job = _DISPATCH[cfg["experiment"]]
    units = units_fn(cfg)
    summary = {"experiment": cfg["experiment"], "runs": []}
    t0 = time.perf_counter()
    error = None

    def collect(name, result):
        text, info = result
        path = os.path.join(out_dir, f"{name}.csv")
        with open(path, "w", newline="") as fh:
            fh.write(text)
        summary["runs"].append({"name": name, "csv": f"{name}.csv", **info})
        return info.get("error")

    try:
        if cfg["experiment"] == "dpcgd":
            # monte-carlo runs release the GIL; parallelize inside each batch
            for name, args in units:
                error = collect(name, job(*args, jobs=jobs)) or error
        elif jobs > 1 and len(units) > 1:
            with ProcessPoolExecutor(jobs) as ex:
                futures = [(name, ex.submit(job, *args)) for name, args in units]
                for name, fut in futures:
                    error = collect(name, fut.result()) or error
        else:
            for name, args in units:
                error = collect(name, job(*args)) or error
    except Exception as exc:  # flush what finished, then report
        error = f"{type(exc).__name__}: {exc}"
    summary["wall_time"] = time.perf_counter() - t0
    if error:
        summary["error"] = error
    with open(os.path.join(out_dir, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    if error:
        raise RunError(error)
    return summary
