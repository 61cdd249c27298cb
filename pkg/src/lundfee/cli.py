"""Command-line interface: ``lundfee <command> [options]``.

Every command writes one table (CSV) or one JSON document to ``--out`` (or
stdout).  Options resolve as command-line flag > config file > built-in
default; the config file is JSON, given by ``--config`` or ``$LF_CONFIG``,
with global keys at the top level and per-command keys under the command
name, e.g. ``{"seed": 7, "dist": {"c": 0.4}}``.

Exit codes: 0 success, 2 invalid input or parameters, 3 infeasible target,
4 runaway simulation.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile

import numpy as np

from . import analytics as an
from . import benchmark as bm
from . import data as dt
from . import fees
from . import sim
from .errors import (BucketNotFoundError, EstimationError, InfeasibleTargetError, OracleUndefinedError,
                     ParameterError, ParseError, RunawaySimulationError, SchemaError)

EXIT_OK, EXIT_INVALID, EXIT_INFEASIBLE, EXIT_RUNAWAY = 0, 2, 3, 4


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# output

def _num(x):
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return float(x) if math.isfinite(x) else None
    return x


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in obj]
    return _num(obj)


def _cell(x):
    x = _num(x)
    if x is None:
        return "nan"
    if isinstance(x, float):
        return format(x, ".12g")
    return str(x)


def render_csv(columns, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_cell(x) for x in r])
    return buf.getvalue()


def render_json(obj):
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_output(text, path):
    """Write ``text`` to ``path`` via a temp file and rename; stdout if no path."""
    if path is None or path == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".lundfee-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def emit_table(opts, command, params, columns, rows, extra=None):
    if opts["format"] == "json":
        doc = {"command": command, "params": params, "columns": list(columns), "rows": [list(r) for r in rows]}
        doc.update(extra or {})
        write_output(render_json(doc), opts["out"])
    else:
        write_output(render_csv(columns, rows), opts["out"])


# ---------------------------------------------------------------------------
# option plumbing

_DEFAULTS: dict = {}


def _opt(p, command, name, default=None, **kw):
    dest = name.lstrip("-").replace("-", "_")
    _DEFAULTS.setdefault(command, {})[dest] = default
    if name.startswith("-"):
        kw["dest"] = dest
    p.add_argument(name, default=argparse.SUPPRESS, **kw)


def _load_config(path):
    if not path:
        return {}
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise UsageError("config file must hold a JSON object")
    return cfg


def resolve(ns, argv_command):
    """Merge defaults, config file and flags into a plain dict."""
    given = vars(ns)
    cfg = _load_config(given.get("config") or os.environ.get("LF_CONFIG"))
    sub = cfg.get(argv_command, {})
    if not isinstance(sub, dict):
        raise UsageError(f"config entry {argv_command!r} must be an object")
    known = dict(_DEFAULTS["_global"], **_DEFAULTS[argv_command])
    opts = dict(known)
    for source in ({k: v for k, v in cfg.items() if k in _DEFAULTS["_global"]}, sub):
        for k, v in source.items():
            k = k.replace("-", "_")
            if k not in known:
                raise UsageError(f"unknown config key {k!r} for {argv_command}")
            opts[k] = v
    opts.update({k: v for k, v in given.items() if k in known})
    if opts["format"] not in ("csv", "json"):
        raise UsageError("--format must be csv or json")
    opts["seed"] = int(opts["seed"])
    return opts


def _required(opts, *names):
    for n in names:
        if opts.get(n) is None:
            raise UsageError(f"--{n.replace('_', '-')} is required")


def _scale(opts):
    return dt.UnitScale(float(opts["minutes_per_block"]), float(opts["vmb_per_block"]))


def _weights(opts):
    kind, p = opts["weights"], [float(x) for x in np.atleast_1d(opts["weight_param"])]
    if kind == "deterministic":
        return sim.WeightDist.deterministic(*p)
    if kind == "exponential":
        return sim.WeightDist.exponential(*p)
    if kind == "uniform":
        return sim.WeightDist.uniform(*p)
    if kind == "empirical":
        return sim.WeightDist.empirical(p)
    raise ParameterError(f"unknown weight distribution {kind!r}")


# ---------------------------------------------------------------------------
# commands

def cmd_dist(o):
    _required(o, "y", "c")
    params = an.ClParams(float(o["y"]), float(o["c"]), float(o["z"]))
    step = float(o["step"])
    if not step > 0:
        raise ParameterError("--step must be positive")
    t_max = float(o["t_max"]) if o["t_max"] is not None else an.horizon(params)
    if not t_max > 0:
        raise ParameterError("--t-max must be positive")
    t = np.round(np.arange(int(math.ceil(t_max / step - 1e-9)) + 1) * step, 12)
    f = np.atleast_1d(an.pdf(t, params))
    F = np.atleast_1d(an.cdf_ty(t, params))
    mean = an.mean_time(an.ClParams(params.y, params.c)) + params.z
    emit_table(o, "dist", {"y": params.y, "c": params.c, "z": params.z, "step": step, "t_max": t_max},
               ("t", "pdf", "cdf"), zip(t, f, F), {"mean": mean})


def cmd_mean(o):
    _required(o, "y", "c")
    c, z = float(o["c"]), float(o["z"])
    rows = []
    for y in np.atleast_1d(o["y"]):
        p = an.ClParams(float(y), c, z)
        base = an.ClParams(p.y, c)
        rows.append((p.y, c, z, an.mean_time(base) + z, an.ig_params(base).mean + z,
                     an.expected_undershoot(p.y, c)))
    emit_table(o, "mean", {"c": c, "z": z}, ("y", "c", "z", "mean", "ig_mean", "undershoot"), rows)


def cmd_tail(o):
    _required(o, "y", "c")
    p = an.ClParams(float(o["y"]), float(o["c"]))
    n_max = int(o["n"])
    if n_max < 1:
        raise ParameterError("--n must be at least 1")
    tails = an.tail_blocks_all(p, n_max)
    emit_table(o, "tail", {"y": p.y, "c": p.c, "n": n_max}, ("n", "tail"),
               [(n, tails[n]) for n in range(1, n_max + 1)])


def cmd_simulate(o):
    model, reps, seed = o["model"], int(o["reps"]), sim.Seed(o["seed"])
    if reps < 1:
        raise ParameterError("--reps must be at least 1")
    params, analytic = {"model": model, "reps": reps}, None
    if model == "cl":
        _required(o, "y", "c")
        p = an.ClParams(float(o["y"]), float(o["c"]))
        b = sim.simulate_cl(p, reps, seed)
        columns, cols = ("time", "blocks", "undershoot"), (b.times, b.blocks, b.undershoot)
        analytic = an.mean_time(p)
        params.update(y=p.y, c=p.c)
    elif model == "dm1":
        _required(o, "y", "c")
        y, c = float(o["y"]), float(o["c"])
        k = sim.simulate_dm1(y, c, reps, seed)
        columns, cols = ("customers",), (k,)
        # by duality the busy-period count has the law of N_y, whose mean is E[T_y]
        analytic = an.mean_time(an.ClParams(y, c))
        params.update(y=y, c=c)
    elif model == "bm":
        _required(o, "y")
        y, drift, var = float(o["y"]), float(o["drift"]), float(o["variance"])
        x = sim.simulate_bm(y, drift, var, reps, seed)
        columns, cols = ("time",), (x,)
        analytic = y / -drift
        params.update(y=y, drift=drift, variance=var)
    elif model == "bsq":
        _required(o, "nu", "K", "m")
        p = sim.BsqParams(float(o["nu"]), float(o["lam"]), float(o["K"]), int(o["m"]), _weights(o))
        hits = [sim.simulate_bsq_hit(p, sim.Seed(seed.value, i)) for i in range(reps)]
        columns = ("time", "count_time", "blocks")
        cols = (np.array([h.time for h in hits]), np.array([h.count_time for h in hits]),
                np.array([h.blocks for h in hits]))
        params.update(nu=p.nu, lam=p.lam, K=p.K, m=p.m, weights=p.weights.kind,
                      weight_param=list(p.weights.params), equality_checked=True)
    else:
        raise ParameterError(f"unknown model {model!r}")
    x = np.asarray(cols[0], dtype=float)
    summary = {"model": model, "seed": seed.value, "reps": reps, "params": params, "mean": float(x.mean()),
               "stderr": float(x.std(ddof=1) / math.sqrt(reps)) if reps > 1 else None,
               "analytic_mean": analytic}
    rows = list(zip(*cols))
    if o["format"] == "json":
        write_output(render_json({"command": "simulate", "params": params, "columns": list(columns),
                                  "rows": [list(r) for r in rows], "summary": summary}), o["out"])
    else:
        write_output(render_csv(columns, rows), o["out"])
        if o["summary"]:
            write_output(render_json(summary), o["summary"])


def _aggregate(rows):
    """One line per (view, n): median KS and averaged mean over repetitions."""
    out = {}
    for r in rows:
        out.setdefault((r.view, r.n), []).append(r)
    table = []
    for (view, n), rs in out.items():
        se = [r.stderr for r in rs]
        table.append((view, n, sum(r.reps for r in rs), float(np.median([r.ks for r in rs])),
                      float(np.mean([r.mean for r in rs])), float(math.sqrt(sum(s * s for s in se)) / len(rs))))
    return table


def cmd_converge(o):
    mode = o["mode"]
    w = _weights(o)
    base = sim.BsqParams(float(o["nu"]), float(o["lam"]), float(o["K"]), 0, w)
    scales = [int(n) for n in np.atleast_1d(o["scales"])]
    if not scales or min(scales) < 1:
        raise ParameterError("--scales must be positive integers")
    y, reps, r = float(o["y"]), int(o["reps"]), int(o["repetitions"])
    if reps < 0 or r < 1:
        raise ParameterError("need --reps >= 0 and --repetitions >= 1")
    if mode == "fluid":
        rows = sim.fluid_scaling_experiment(base, y, scales, reps, o["seed"], r)
    elif mode == "diffusion":
        rows = sim.diffusion_scaling_experiment(base, y, scales, reps, o["seed"], r)
    else:
        raise ParameterError(f"unknown mode {mode!r}")
    params = {"mode": mode, "y": y, "scales": scales, "reps": reps, "repetitions": r, "nu": base.nu,
              "lam": base.lam, "K": base.K, "weights": w.kind, "weight_param": list(w.params), "c": base.c}
    emit_table(o, "converge", params, ("view", "n", "reps", "ks", "mean", "stderr"), _aggregate(rows))


def _read(path):
    try:
        return dt.read_snapshots(path)
    except OSError as exc:
        raise ParameterError(f"cannot read {path}: {exc.strerror}") from None


def cmd_extract(o):
    _required(o, "snapshots", "phi")
    snaps = _read(o["snapshots"])
    if not snaps:
        raise ParseError("no snapshot rows")
    series = dt.bucket_series(snaps, float(o["phi"]), _scale(o))
    eps = None if o["epsilon"] is None else float(o["epsilon"])
    vs = dt.extract_validation_sample(series, float(o["delta"]), eps)
    d = vs.durations
    model_mean = ig_mean = None
    if 0 < vs.c_hat < 1:
        p = an.ClParams(vs.y_hat, vs.c_hat)
        model_mean, ig_mean = an.mean_time(p), an.ig_params(p).mean
    summary = {"phi": vs.phi, "c_hat": vs.c_hat, "y_hat": vs.y_hat, "n": int(d.size),
               "mean": float(d.mean()) if d.size else None,
               "stderr": float(d.std(ddof=1) / math.sqrt(d.size)) if d.size > 1 else None,
               "model_mean": model_mean, "ig_mean": ig_mean, "delta": float(o["delta"]),
               "epsilon": vs.c_hat / 10.0 if eps is None else eps}
    columns = ("start_index", "start_time", "duration", "c_local", "samples")
    rows = [(x.start_index, series.timestamp(x.start_index), x.duration, x.c_local, x.samples)
            for x in vs.confirmations]
    if o["format"] == "json":
        write_output(render_json({"command": "extract", "params": {"phi": vs.phi}, "columns": list(columns),
                                  "rows": [list(r) for r in rows], "summary": summary}), o["out"])
    else:
        write_output(render_csv(columns, rows), o["out"])
        if o["summary"]:
            write_output(render_json(summary), o["summary"])


def _load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ParameterError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path} is not valid JSON: {exc}") from None


def _buckets(doc, keys):
    if not isinstance(doc, dict) or not isinstance(doc.get("buckets"), list):
        raise SchemaError("expected an object with a 'buckets' list")
    out = []
    for b in doc["buckets"]:
        if not isinstance(b, dict) or any(k not in b for k in keys):
            raise SchemaError(f"each bucket needs the keys {list(keys)}")
        out.append(b)
    return out


def _recommend_inputs(o):
    """Per-bucket model state and samples from whichever inputs were given."""
    if o["state"]:
        state = {}
        for b in _buckets(_load_json(o["state"]), ("phi", "c", "y")):
            state[float(b["phi"])] = None if b["c"] is None else (float(b["c"]), float(b["y"]))
        return state, None
    if o["samples"]:
        return None, {float(b["phi"]): np.asarray(b["samples"], dtype=float)
                      for b in _buckets(_load_json(o["samples"]), ("phi", "samples"))}
    if o["snapshots"]:
        snaps = _read(o["snapshots"])
        if len(snaps) < 2:
            raise ParseError("need at least two snapshot rows")
        scale = _scale(o)
        series = [dt.bucket_series(snaps, b, scale) for b in snaps[0].buckets]
        nxt = [dt.next_confirmation_index(s.values, 0.0) for s in series]
        rng = sim.Seed(o["seed"]).generator()
        samples, state = bm.window_state(series, nxt, len(snaps) - 1, int(o["window"]), int(o["count"]), rng)
        return state, samples
    raise UsageError("one of --state, --samples or --snapshots is required")


def cmd_recommend(o):
    target = fees.TargetSpec(float(o["t_star"]), float(o["confidence"]))
    method = o["method"]
    state, samples = _recommend_inputs(o)
    if method == "model":
        if state is None:
            raise UsageError("the model method needs --state or --snapshots")
        tails = fees.model_tails(state, target.t_star)
    elif method == "data":
        if samples is None:
            raise UsageError("the data method needs --samples or --snapshots")
        tails = fees.data_tails(samples, target.t_star)
    else:
        raise ParameterError(f"unknown method {method!r}")
    params = {"method": method, "t_star": target.t_star, "confidence": target.confidence}
    rec = fees._select(tails, target, method)
    if o["format"] == "csv":
        emit_table(o, "recommend", params, ("phi", "tail", "selected"),
                   [(b, t, int(b == rec.bucket)) for b, t in tails.items()])
    else:
        write_output(render_json({"command": "recommend", "t_star": target.t_star,
                                  "confidence": target.confidence,
                                  "recommendation": {"bucket": rec.bucket, "method": method,
                                                     "predicted_tail": rec.predicted_tail},
                                  "alternatives": [{"phi": b, "tail": t} for b, t in tails.items()]}),
                     o["out"])


def cmd_evaluate(o):
    kw = {}
    for k in ("instances", "window", "samples_per_bucket", "instance_gap", "lookahead"):
        if o[k] is not None:
            kw[k] = int(o[k])
    for k in ("t_star", "confidence", "amplitude", "period", "spacing"):
        if o[k] is not None:
            kw[k] = float(o[k])
    for k in ("buckets", "slopes"):
        if o[k] is not None:
            kw[k] = tuple(float(x) for x in np.atleast_1d(o[k]))
    cfg = bm.BenchmarkConfig(**kw)
    seeds = [int(s) for s in np.atleast_1d(o["seeds"])] if o["seeds"] is not None else [o["seed"]]
    columns = ("seed", "method", "n", "skipped", "pct_optimal", "pct_late", "mean_late", "pct_overpay",
               "mean_overpay")
    rows, pooled, skipped, wins = [], [], 0, 0
    for s in seeds:
        res = bm.run_benchmark(cfg, s)
        if not res.instances:
            raise OracleUndefinedError(f"seed {s}: no instance has a bucket confirming before t*")
        pooled += res.instances
        skipped += res.skipped
        sm = {}
        for m in ("model", "data"):
            sm[m] = res.summary(m)
            rows.append((s, m, sm[m].n, res.skipped, sm[m].pct_optimal, sm[m].pct_late, sm[m].mean_late,
                         sm[m].pct_overpay, sm[m].mean_overpay))
        wins += sm["model"].pct_optimal > sm["data"].pct_optimal
    allres = bm.BenchmarkResult(-1, pooled, skipped)
    for m in ("model", "data"):
        x = allres.summary(m)
        rows.append(("all", m, x.n, skipped, x.pct_optimal, x.pct_late, x.mean_late, x.pct_overpay, x.mean_overpay))
    params = {"seeds": seeds, "buckets": list(cfg.buckets), "slopes": list(cfg.slopes),
              "instances": cfg.instances, "t_star": cfg.t_star, "confidence": cfg.confidence,
              "amplitude": cfg.amplitude, "period": cfg.period}
    emit_table(o, "evaluate", params, columns, rows, {"model_win_fraction": wins / len(seeds)})


COMMANDS = {"dist": cmd_dist, "mean": cmd_mean, "tail": cmd_tail, "simulate": cmd_simulate,
            "converge": cmd_converge, "extract": cmd_extract, "recommend": cmd_recommend,
            "evaluate": cmd_evaluate}


def build_parser():
    _DEFAULTS.clear()
    g = argparse.ArgumentParser(add_help=False)
    _opt(g, "_global", "--seed", 0, type=int, help="root seed (default 0)")
    _opt(g, "_global", "--format", "csv", choices=("csv", "json"), help="output format (default csv)")
    _opt(g, "_global", "--out", None, help="output file (default stdout)")
    g.add_argument("--config", default=argparse.SUPPRESS, help="JSON config file (default $LF_CONFIG)")
    top = argparse.ArgumentParser(prog="lundfee", description="Confirmation-time analytics and fee selection.",
                                  parents=[g])
    sp = top.add_subparsers(dest="command", required=True)

    def sub(name, help):
        return sp.add_parser(name, help=help, parents=[g], description=help)

    p = sub("dist", "density and distribution function of T_y on a grid")
    _opt(p, "dist", "--y", type=float, help="initial level in blocks")
    _opt(p, "dist", "--c", type=float, help="slope, 0 < c < 1")
    _opt(p, "dist", "--z", 0.0, type=float, help="extra confirmations")
    _opt(p, "dist", "--step", 0.01, type=float)
    _opt(p, "dist", "--t-max", None, type=float, help="grid end (default: truncation horizon)")

    p = sub("mean", "exact mean confirmation time and its IG counterpart")
    _opt(p, "mean", "--y", nargs="+", type=float)
    _opt(p, "mean", "--c", type=float)
    _opt(p, "mean", "--z", 0.0, type=float)

    p = sub("tail", "P[N_y > n], the tail of the number of blocks")
    _opt(p, "tail", "--y", type=float)
    _opt(p, "tail", "--c", type=float)
    _opt(p, "tail", "--n", 10, type=int, help="largest n")

    p = sub("simulate", "Monte Carlo samples from one of the models")
    _opt(p, "simulate", "--model", "cl", choices=("cl", "bsq", "dm1", "bm"))
    _opt(p, "simulate", "--reps", 10000, type=int)
    _opt(p, "simulate", "--y", type=float)
    _opt(p, "simulate", "--c", type=float)
    _opt(p, "simulate", "--drift", -1.0, type=float)
    _opt(p, "simulate", "--variance", 1.0, type=float)
    _opt(p, "simulate", "--nu", type=float)
    _opt(p, "simulate", "--lam", 1.0, type=float)
    _opt(p, "simulate", "--K", type=float)
    _opt(p, "simulate", "--m", type=int)
    _opt(p, "simulate", "--weights", "exponential", choices=("deterministic", "exponential", "uniform", "empirical"))
    _opt(p, "simulate", "--weight-param", [1.0], nargs="+", type=float)
    _opt(p, "simulate", "--summary", None, help="also write the summary JSON here (csv format)")

    p = sub("converge", "KS distance of scaled BSQ hitting times to their limit")
    _opt(p, "converge", "--mode", "fluid", choices=("fluid", "diffusion"))
    _opt(p, "converge", "--y", 1.0, type=float)
    _opt(p, "converge", "--scales", [10, 100, 1000], nargs="+", type=int)
    _opt(p, "converge", "--reps", 2000, type=int)
    _opt(p, "converge", "--repetitions", 1, type=int)
    _opt(p, "converge", "--nu", 1.0, type=float)
    _opt(p, "converge", "--lam", 1.0, type=float)
    _opt(p, "converge", "--K", 2.0, type=float)
    _opt(p, "converge", "--weights", "deterministic", choices=("deterministic", "exponential", "uniform", "empirical"))
    _opt(p, "converge", "--weight-param", [1.0], nargs="+", type=float)

    scale = dt.UnitScale()
    p = sub("extract", "validation sample of confirmation times from snapshots")
    _opt(p, "extract", "snapshots", nargs="?", help="snapshot CSV (optionally gzip)")
    _opt(p, "extract", "--phi", type=float, help="bucket lower bound")
    _opt(p, "extract", "--delta", 0.05, type=float)
    _opt(p, "extract", "--epsilon", None, type=float, help="default c_hat/10")
    _opt(p, "extract", "--minutes-per-block", scale.minutes_per_block, type=float)
    _opt(p, "extract", "--vmb-per-block", scale.vmb_per_block, type=float)
    _opt(p, "extract", "--summary", None, help="also write the estimator JSON here (csv format)")

    p = sub("recommend", "cheapest bucket meeting a confirmation target")
    _opt(p, "recommend", "--method", "model", choices=("model", "data"))
    _opt(p, "recommend", "--state", None, help="JSON {buckets: [{phi, c, y}]}")
    _opt(p, "recommend", "--samples", None, help="JSON {buckets: [{phi, samples}]}")
    _opt(p, "recommend", "--snapshots", None, help="snapshot CSV; decides at its last row")
    _opt(p, "recommend", "--t-star", 5.0, type=float)
    _opt(p, "recommend", "--confidence", 0.95, type=float)
    _opt(p, "recommend", "--window", 2500, type=int)
    _opt(p, "recommend", "--count", 7500, type=int)
    _opt(p, "recommend", "--minutes-per-block", scale.minutes_per_block, type=float)
    _opt(p, "recommend", "--vmb-per-block", scale.vmb_per_block, type=float)

    p = sub("evaluate", "synthetic benchmark of both selectors against the oracle")
    _opt(p, "evaluate", "--seeds", None, nargs="+", type=int, help="default: --seed")
    for name, typ in (("--instances", int), ("--window", int), ("--samples-per-bucket", int),
                      ("--instance-gap", int), ("--lookahead", int), ("--t-star", float),
                      ("--confidence", float), ("--amplitude", float), ("--period", float),
                      ("--spacing", float)):
        _opt(p, "evaluate", name, None, type=typ)
    _opt(p, "evaluate", "--buckets", None, nargs="+", type=float)
    _opt(p, "evaluate", "--slopes", None, nargs="+", type=float)
    return top


def main(argv=None):
    parser = build_parser()
    ns = parser.parse_args(argv)
    out_path = None
    try:
        opts = resolve(ns, ns.command)
        out_path = opts["out"]
        COMMANDS[ns.command](opts)
    except InfeasibleTargetError as exc:
        body = {"error": "infeasible_target", "message": str(exc), "best_bucket": exc.best_bucket,
                "best_tail": exc.best_tail}
        write_output(render_json(body), out_path)
        print(f"lundfee: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except RunawaySimulationError as exc:
        print(f"lundfee: {exc}", file=sys.stderr)
        return EXIT_RUNAWAY
    except (UsageError, ParameterError, ParseError, SchemaError, BucketNotFoundError, EstimationError,
            OracleUndefinedError, ValueError) as exc:
        print(f"lundfee: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
