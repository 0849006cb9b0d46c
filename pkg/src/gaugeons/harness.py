"""Experiment grids: config validation, execution and byte-stable reports.

A config is a JSON object describing one experiment, or ``{"experiments": [...]}``
with several.  Each experiment::

    {
      "name": "killer",                      # optional label
      "mode": "oco" | "sco" | "solve_to_eps",
      "body": {"kind": "box", "d": 8, "thin": 1, "wide": 10},
      "stream": {"kind": "linear_adversarial", "schedule": "killer_kappa"},
      "algorithms": ["gauge_oco_bons", "gauge_oco_ogd", "ogd_exact_projection"],
      "horizons": [1000, 4000],
      "seeds": [0, 1],
      "overrides": {"eta": null, "nu": null, "c": null, "m": null, "eps": null},
      "sigma": 0.0,                          # sco: noise level (default: stream sigma)
      "eps_target": 0.01,                    # solve_to_eps only
      "max_rounds": 200000,                  # solve_to_eps only
      "curves": false                        # write cumulative regret curves
    }
"""
from concurrent.futures import ThreadPoolExecutor
import csv
import io
import json
import logging
import math
import os

import numpy as np

from . import geometry, losses, stochastic
from ._accel import backend
from .gauge import gauge_project
from .reduction import params_for, run_oco, run_ogd_projected

log = logging.getLogger(__name__)

ALGORITHMS = ("gauge_oco_bons", "gauge_oco_ogd", "ogd_exact_projection")
MODES = ("oco", "sco", "solve_to_eps")
OVERRIDES = ("eta", "nu", "c", "m", "eps")
COLUMNS = ("algorithm", "body", "stream", "d", "T", "seed", "regret_or_gap", "sep_calls",
           "inversions", "z_updates", "eta", "nu", "wall_ms")
EXPERIMENT_KEYS = {"name", "mode", "body", "stream", "algorithms", "horizons", "seeds",
                   "overrides", "sigma", "eps_target", "max_rounds", "curves"}

ENV_OUT = "GAUGEONS_OUT_DIR"
ENV_THREADS = "GAUGEONS_THREADS"

FALLBACK_ITERS = 100_000


class ConfigError(ValueError):
    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid config: " + "; ".join(self.problems))


# ---------------------------------------------------------------- config

def load_config(path):
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError([f"cannot read {path}: {exc.strerror}"]) from exc
    except json.JSONDecodeError as exc:
        raise ConfigError([f"not valid JSON: {exc}"]) from exc
    default = os.path.splitext(os.path.basename(path))[0]
    return validate(raw, default_name=default)


def _is_int(x):
    return isinstance(x, int) and not isinstance(x, bool)


def validate(raw, default_name="experiment"):
    """Return a list of normalized experiments or raise :class:`ConfigError`."""
    if not isinstance(raw, dict):
        raise ConfigError(["top level must be an object"])
    if "experiments" in raw:
        extra = set(raw) - {"experiments", "name"}
        if extra:
            raise ConfigError([f"unknown top-level fields: {sorted(extra)}"])
        items = raw["experiments"]
        if not isinstance(items, list) or not items:
            raise ConfigError(["experiments: must be a nonempty list"])
    else:
        items = [raw]
    out, problems = [], []
    for i, item in enumerate(items):
        prefix = f"experiments[{i}]." if "experiments" in raw else ""
        try:
            out.append(_validate_one(item, f"{default_name}_{i}" if len(items) > 1 else default_name))
        except ConfigError as exc:
            problems += [prefix + p for p in exc.problems]
    if problems:
        raise ConfigError(problems)
    names = [e["name"] for e in out]
    if len(set(names)) != len(names):
        raise ConfigError(["experiment names must be unique"])
    return out


def _validate_one(raw, default_name):
    if not isinstance(raw, dict):
        raise ConfigError(["experiment must be an object"])
    bad = []
    extra = set(raw) - EXPERIMENT_KEYS
    if extra:
        bad.append(f"unknown fields: {sorted(extra)}")
    exp = {"name": raw.get("name", default_name), "mode": raw.get("mode", "oco"),
           "overrides": dict(raw.get("overrides") or {}), "curves": bool(raw.get("curves", False))}
    if exp["mode"] not in MODES:
        bad.append(f"mode: must be one of {MODES}")

    body = None
    try:
        if not isinstance(raw.get("body"), dict):
            raise ValueError("missing")
        body = geometry.from_spec(raw["body"])
    except (ValueError, KeyError, TypeError) as exc:
        bad.append(f"body: {exc}")
    exp["body"] = body

    algos = raw.get("algorithms")
    if not isinstance(algos, list) or not algos:
        bad.append("algorithms: must be a nonempty list")
        algos = []
    elif any(a not in ALGORITHMS for a in algos) or len(set(algos)) != len(algos):
        bad.append(f"algorithms: entries must be distinct members of {ALGORITHMS}")
    exp["algorithms"] = list(algos)

    horizons = raw.get("horizons")
    if not isinstance(horizons, list) or not horizons or not all(_is_int(T) and T >= 1 for T in horizons):
        if exp["mode"] != "solve_to_eps" or horizons is not None:
            bad.append("horizons: must be a nonempty list of positive integers")
        horizons = []
    elif horizons != sorted(horizons):
        bad.append("horizons: must be sorted ascending")
    exp["horizons"] = list(horizons)

    seeds = raw.get("seeds")
    if not isinstance(seeds, list) or not seeds or not all(_is_int(s) and s >= 0 for s in seeds):
        bad.append("seeds: must be a nonempty list of nonnegative integers")
        seeds = []
    exp["seeds"] = list(seeds)

    for key, val in exp["overrides"].items():
        if key not in OVERRIDES:
            bad.append(f"overrides.{key}: unknown (allowed {OVERRIDES})")
        elif val is not None and (not isinstance(val, (int, float)) or isinstance(val, bool) or val <= 0):
            bad.append(f"overrides.{key}: must be a positive number or null")
    c = exp["overrides"].get("c")
    if isinstance(c, (int, float)) and not 0 < c < 1:
        bad.append("overrides.c: must lie in (0, 1)")
    m = exp["overrides"].get("m")
    if m is not None and not _is_int(m):
        bad.append("overrides.m: must be an integer")

    stream_spec = raw.get("stream")
    exp["stream"] = None
    if not isinstance(stream_spec, dict) or "kind" not in stream_spec:
        bad.append("stream: must be an object with a kind")
    elif body is not None:
        try:
            losses.from_spec(stream_spec, body.d, 0, body)
            exp["stream"] = dict(stream_spec)
        except (ValueError, TypeError) as exc:
            bad.append(f"stream: {exc}")

    sigma = raw.get("sigma")
    if sigma is not None and (not isinstance(sigma, (int, float)) or sigma < 0):
        bad.append("sigma: must be a nonnegative number")
    exp["sigma"] = sigma

    mode = exp["mode"]
    if mode in ("sco", "solve_to_eps") and exp["stream"] is not None:
        if exp["stream"]["kind"] == "linear_adversarial":
            bad.append(f"stream: mode {mode} needs a quadratic or linear_stochastic objective")
    if mode == "solve_to_eps":
        eps = raw.get("eps_target")
        if not isinstance(eps, (int, float)) or eps <= 0:
            bad.append("eps_target: must be a positive number")
        exp["eps_target"] = eps
        cap = raw.get("max_rounds", 200_000)
        if not _is_int(cap) or cap < 1:
            bad.append("max_rounds: must be a positive integer")
        exp["max_rounds"] = cap
        if sigma:
            bad.append("sigma: solve_to_eps is noise-free")
    if "ogd_exact_projection" in algos:
        if mode != "oco":
            bad.append("algorithms: ogd_exact_projection is only available in oco mode")
        elif body is not None and not geometry.has_closed_form_projection(body):
            bad.append(f"algorithms: ogd_exact_projection needs a closed-form projection, not {body.kind}")
    if bad:
        raise ConfigError(bad)
    return exp


# ---------------------------------------------------------------- comparators

def _fallback_linear_min(body, c, iters=FALLBACK_ITERS, rtol=1e-10):
    """min <c, x> over the body with the central-cut ellipsoid method.

    Only the separation oracle is used.  Returns ``(value, tol)``; ``tol`` is
    the volume certificate 2|c|R kappa exp(-k / (2d(d+1))) after k cuts.
    """
    r, R = geometry.sandwich_radii(body)
    d = body.d
    n = float(np.linalg.norm(c))
    if n == 0:
        return 0.0, 0.0
    if d < 2:
        raise ValueError("the ellipsoid fallback needs d >= 2")
    x = np.zeros(d)
    P = np.eye(d) * R * R
    best = 0.0
    scale = 2.0 * n * R * R / r
    tol = scale
    shrink = d * d / (d * d - 1.0)
    for k in range(1, iters + 1):
        res = geometry.separate(body, x)
        if res.is_member:
            best = min(best, float(c @ x))
            a = c
        else:
            a = res.normal
        Pa = P @ a
        q = float(a @ Pa)
        if q <= 0:
            break
        b = Pa / math.sqrt(q)
        x = x - b / (d + 1)
        P = shrink * (P - (2.0 / (d + 1)) * np.outer(b, b))
        P = 0.5 * (P + P.T)
        tol = scale * math.exp(-k / (2.0 * d * (d + 1)))
        if tol <= rtol * max(1.0, abs(best)):
            break
    return best, tol


def comparator(trace, body, stream):
    """Best fixed loss in hindsight, as ``(value, tol)``."""
    if stream.kind == "linear_adversarial":
        try:
            return -geometry.support(body, -trace.gsum), 0.0
        except geometry.ApproximateComparatorRequired:
            return _fallback_linear_min(body, trace.gsum)
    value, _, tol = losses.offline_optimum(stream, body)
    if stream.kind == "linear_stochastic":
        # noisy linear losses: hindsight comparator of the realized gradients
        try:
            return -geometry.support(body, -trace.gsum), 0.0
        except geometry.ApproximateComparatorRequired:
            return _fallback_linear_min(body, trace.gsum)
    return trace.T * value, trace.T * tol


def regret(trace, body, stream):
    value, _ = comparator(trace, body, stream)
    return trace.loss_sum - value


# ---------------------------------------------------------------- execution

def _stream_label(spec):
    kind = spec["kind"]
    if kind == "linear_adversarial":
        return f"{kind}:{spec.get('schedule', 'rademacher')}"
    if kind == "linear_stochastic":
        return f"{kind}(sigma={spec.get('sigma', 0.0):g})"
    return kind


def _cells(exp):
    horizons = exp["horizons"] or [None]
    for a_idx, algo in enumerate(exp["algorithms"]):
        for T in horizons:
            for seed in exp["seeds"]:
                yield a_idx, algo, T, seed


def _run_cell(exp, algo, T, seed):
    body = exp["body"]
    stream = losses.from_spec(exp["stream"], body.d, seed, body)
    mode = exp["mode"]
    keep = exp["curves"]
    extra = {}
    if mode == "oco":
        if algo == "ogd_exact_projection":
            trace = run_ogd_projected(body, stream, T, keep_records=keep)
        else:
            params = params_for(body, stream.G, T, exp["overrides"])
            sub = "barrier_ons" if algo == "gauge_oco_bons" else "ogd_ball"
            trace = run_oco(body, stream, T, sub, params=params, keep_records=keep)
        comp, tol = comparator(trace, body, stream)
        value = trace.loss_sum - comp
    else:
        sigma = exp["sigma"] if exp["sigma"] is not None else stream.sigma
        sub = "barrier_ons" if algo == "gauge_oco_bons" else "ogd_ball"
        if mode == "solve_to_eps":
            sigma = 0.0
            r, R = geometry.sandwich_radii(body)
            need, C = stochastic.budget(exp["eps_target"], losses.objective_bound(stream), R, R / r,
                                        body.d)
            extra = {"C_log": C, "T_needed": need, "budget_exceeded": need > exp["max_rounds"]}
            if extra["budget_exceeded"]:
                log.warning("%s: needs T=%d rounds, running the cap %d", exp["name"], need,
                            exp["max_rounds"])
            T = min(need, exp["max_rounds"])
        overrides = {k: v for k, v in exp["overrides"].items() if k != "eps"}
        params = stochastic.sco_params_for(body, losses.objective_bound(stream), T, sigma,
                                           overrides).oco()
        if exp["overrides"].get("eps"):
            params.eps = exp["overrides"]["eps"]
        w_hat, trace = stochastic.run_sco(body, stream, sigma, seed, T, params=params,
                                          keep_records=keep, subroutine=sub)
        best, _, tol = losses.offline_optimum(stream, body)
        comp = best
        value = stream.value(w_hat) - best
        extra["w_hat"] = [float(x) for x in w_hat]
        extra["f_avg"] = trace.loss_sum / T
    row = {
        "experiment": exp["name"],
        "algorithm": algo,
        "body": body.describe(),
        "stream": _stream_label(exp["stream"]),
        "d": body.d,
        "T": T,
        "seed": seed,
        "regret_or_gap": float(value),
        "sep_calls": int(trace.sep_calls),
        "inversions": int(trace.inversions),
        "z_updates": int(trace.z_updates),
        "eta": trace.params.get("eta"),
        "nu": trace.params.get("nu"),
        "wall_ms": trace.wall_time * 1000.0,
        "comparator": float(comp),
        "comparator_tol": float(tol),
        "max_gauge": float(trace.max_gauge),
        "feasibility_violations": int(trace.feasibility_violations),
        "max_u_norm": float(trace.max_u_norm),
        "max_g_tilde": float(trace.max_g_tilde),
        "params": trace.params,
    }
    row.update(extra)
    curve = _curve(trace, body, stream) if keep and mode == "oco" else None
    return row, curve


def _curve(trace, body, stream):
    if stream.kind != "linear_adversarial" or not trace.checkpoints:
        return None
    try:
        return [(t, loss + geometry.support(body, -gsum)) for t, loss, gsum in trace.checkpoints]
    except geometry.ApproximateComparatorRequired:
        return None


def run_experiment(config, threads=None):
    """Run every grid cell; returns ``{"rows": [...], "curves": {...}, "metadata": {...}}``."""
    exps = config if isinstance(config, list) else validate(config)
    threads = threads or int(os.environ.get(ENV_THREADS, "1") or 1)
    jobs = []
    for e_idx, exp in enumerate(exps):
        for a_idx, algo, T, seed in _cells(exp):
            jobs.append(((e_idx, a_idx, T or 0, seed), exp, algo, T, seed))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda j: (j[0], _run_cell(*j[1:])), jobs))
    else:
        results = [(j[0], _run_cell(*j[1:])) for j in jobs]
    results.sort(key=lambda r: r[0])
    rows = [r[1][0] for r in results]
    curves = {}
    for key, (row, curve) in results:
        if curve:
            curves[f"{row['experiment']}/{row['algorithm']}/T={row['T']}/seed={row['seed']}"] = curve
    meta = {"experiments": [e["name"] for e in exps], "backend": backend(),
            "solve_log_factor": "100*ln(2+d/eps)"}
    return {"rows": rows, "curves": curves, "metadata": meta}


# ---------------------------------------------------------------- emission

def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def to_csv(report, timing=False):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for row in report["rows"]:
        w.writerow([_fmt(row[c]) if (c != "wall_ms" or timing) else "" for c in COLUMNS])
    return buf.getvalue()


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_jsonable(v) for v in x.tolist()]
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    return x


def to_json(report, timing=False):
    rows = []
    for row in report["rows"]:
        row = dict(row)
        if not timing:
            row["wall_ms"] = None
        rows.append(row)
    doc = {"columns": list(COLUMNS), "rows": rows, "curves": report["curves"],
           "metadata": report["metadata"]}
    return json.dumps(_jsonable(doc), indent=1, sort_keys=True) + "\n"


def emit(report, fmt="csv", out_dir=None, name="report", timing=False):
    """Write the report; wall times always go to a separate ``.timings.json``.

    Returns the list of written paths.
    """
    if not report["rows"]:
        raise ValueError("report is empty")
    if fmt not in ("csv", "json"):
        raise ValueError("format must be csv or json")
    out_dir = out_dir or os.environ.get(ENV_OUT) or "."
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    main = os.path.join(out_dir, f"{name}.{fmt}")
    with open(main, "w", newline="") as fh:
        fh.write(to_csv(report, timing) if fmt == "csv" else to_json(report, timing))
    paths.append(main)
    if report["curves"]:
        cpath = os.path.join(out_dir, f"{name}.curves.csv")
        with open(cpath, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("run", "t", "regret"))
            for key in sorted(report["curves"]):
                for t, reg in report["curves"][key]:
                    w.writerow((key, t, repr(float(reg))))
        paths.append(cpath)
    tpath = os.path.join(out_dir, f"{name}.timings.json")
    with open(tpath, "w") as fh:
        json.dump([{k: r[k] for k in ("experiment", "algorithm", "T", "seed", "wall_ms")}
                   for r in report["rows"]], fh, indent=1)
        fh.write("\n")
    paths.append(tpath)
    return paths
