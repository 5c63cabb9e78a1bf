"""Instance generators, solve drivers, and the experiment runner.

Generators draw couplings with a counter-based RNG keyed on (seed, stream)
so instances are reproducible across runs and platforms. Drivers compose
the pipeline (two-core, BP, correction) into flat result rows; the runner
sweeps a config over sizes, temperatures, and seeds and emits CSV.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
import statistics
import time

import numpy as np

from .bp import BPConfig, SCHEDULES, run_bp, run_bp_multistart
from .model import (
    FactorGraph,
    ForneyGraph,
    MAX_ENUM_VARIABLES,
    ModelError,
    ModelParams,
    exact_log_z,
    exact_log_z_factor,
    factor_to_forney,
    reduce_degree,
    two_core,
)
from .series import loop_correction, pfaffian_series, z_empty

METHODS = ("bp", "z_empty", "pfaffian", "exact", "loop_oracle")

CSV_COLUMNS = (
    "row",
    "instance",
    "generator",
    "size",
    "beta",
    "theta",
    "seed",
    "method",
    "logz_est",
    "logz_exact",
    "error",
    "bp_iterations",
    "converged",
    "wall_ms",
    "note",
)


def _rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed=np.random.SeedSequence([seed, stream])))


def normal_draws(gen: np.random.Generator, count: int, std: float) -> np.ndarray:
    """std * N(0,1) samples via inverse CDF of explicitly generated uniforms.

    Uniforms come from the top 53 bits of raw 64-bit words, offset half a
    step so 0 and 1 are unreachable. Draw positions depend only on order,
    never on std, so a zero std consumes the same words as any other.
    """
    raw = gen.integers(0, 1 << 64, size=count, dtype=np.uint64, endpoint=False)
    u = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53
    nd = statistics.NormalDist()
    return np.array([nd.inv_cdf(x) for x in u]) * std


def _pair_table(j: float) -> np.ndarray:
    # agreement states get e^J, disagreement e^-J
    return np.array([math.exp(j), math.exp(-j), math.exp(-j), math.exp(j)])


def _field_table(h: float) -> np.ndarray:
    return np.array([math.exp(-h), math.exp(h)])


def grid_factor_graph(n: int, params: ModelParams) -> FactorGraph:
    """n x n nearest-neighbor model, pair couplings N(0, beta/2).

    Fields N(0, beta*theta) are attached only when theta > 0. Factors are
    created row-major, right neighbor before down neighbor, and draws are
    consumed in creation order (pairs first, then fields).
    """
    if n < 2:
        raise ModelError("grid needs n >= 2")
    variables = [f"x{r}_{c}" for r in range(n) for c in range(n)]
    pairs = []
    for r in range(n):
        for c in range(n):
            if c + 1 < n:
                pairs.append((f"J{r}_{c}_h", (f"x{r}_{c}", f"x{r}_{c + 1}")))
            if r + 1 < n:
                pairs.append((f"J{r}_{c}_v", (f"x{r}_{c}", f"x{r + 1}_{c}")))
    gen = _rng(params.seed, 0)
    js = normal_draws(gen, len(pairs), math.sqrt(params.beta / 2.0))
    factors = []
    for (fid, scope), j in zip(pairs, js):
        factors.append((fid, scope, _pair_table(abs(j) if params.attractive else j)))
    if params.theta > 0:
        hs = normal_draws(gen, len(variables), math.sqrt(params.beta * params.theta))
        for v, h in zip(variables, hs):
            factors.append((f"h{v[1:]}", (v,), _field_table(abs(h) if params.attractive else h)))
    return FactorGraph(variables, factors)


def spiderweb_factor_graph(rings: int, spokes: int, params: ModelParams) -> FactorGraph:
    """Hub joined to concentric rings; rings=1, spokes=3 is the complete K4.

    Pair factors: hub spokes first, then per ring its cycle edges then the
    radial links outward. Fields (theta > 0) follow, hub before ring
    vertices. Draw order matches creation order.
    """
    if rings < 1 or spokes < 3:
        raise ModelError("spiderweb needs rings >= 1 and spokes >= 3")
    variables = ["hub"] + [f"r{r}_{k}" for r in range(1, rings + 1) for k in range(spokes)]
    pairs = [(f"s{k}", ("hub", f"r1_{k}")) for k in range(spokes)]
    for r in range(1, rings + 1):
        for k in range(spokes):
            pairs.append((f"R{r}_{k}", (f"r{r}_{k}", f"r{r}_{(k + 1) % spokes}")))
        if r < rings:
            for k in range(spokes):
                pairs.append((f"m{r}_{k}", (f"r{r}_{k}", f"r{r + 1}_{k}")))
    gen = _rng(params.seed, 0)
    js = normal_draws(gen, len(pairs), math.sqrt(params.beta / 2.0))
    factors = []
    for (fid, scope), j in zip(pairs, js):
        factors.append((fid, scope, _pair_table(abs(j) if params.attractive else j)))
    if params.theta > 0:
        hs = normal_draws(gen, len(variables), math.sqrt(params.beta * params.theta))
        for v, h in zip(variables, hs):
            factors.append((f"h_{v}", (v,), _field_table(abs(h) if params.attractive else h)))
    return FactorGraph(variables, factors)


def gen_grid(n: int, params: ModelParams) -> tuple[FactorGraph, ForneyGraph]:
    fg = grid_factor_graph(n, params)
    return fg, reduce_degree(factor_to_forney(fg))


def gen_spiderweb(rings: int, spokes: int, params: ModelParams) -> tuple[FactorGraph, ForneyGraph]:
    fg = spiderweb_factor_graph(rings, spokes, params)
    return fg, reduce_degree(factor_to_forney(fg))


def error_metric(log_est: float, log_exact: float) -> float:
    """Relative log-partition error; nan when the reference log is zero."""
    if log_exact == 0.0:
        return float("nan")
    return abs(log_est - log_exact) / abs(log_exact)


def solve_forney(
    g: ForneyGraph,
    method: str = "z_empty",
    schedule: str | None = None,
    seed: int = 0,
    max_psi_size: int | None = None,
    threshold: float = 1e-14,
    max_iterations: int = 10000,
) -> dict:
    """Run one estimator on a Forney model and return a flat result dict.

    Keys: log_z (None when the estimate is undefined), bp_iterations,
    converged, note. The two-core constant from dangling-tree absorption is
    folded back into every estimate.
    """
    if method not in METHODS:
        raise ModelError(f"unknown method {method!r}")
    if method == "exact":
        log_z = exact_log_z(g)
        return {"log_z": log_z, "bp_iterations": 0, "converged": True, "note": ""}

    core, log_const = two_core(g)
    cfg = BPConfig(
        schedule=schedule or "fixed",
        threshold=threshold,
        max_iterations=max_iterations,
        seed=seed,
    )
    res = run_bp(core, cfg) if schedule else run_bp_multistart(core, cfg)
    out = {
        "log_z": None,
        "bp_iterations": res.iterations,
        "converged": res.converged,
        "note": "" if res.converged else "bp-not-converged",
    }
    base = log_const + res.log_z_bp
    if method == "bp":
        out["log_z"] = base
        return out
    if method == "z_empty":
        corr = z_empty(core, res)
    elif method == "pfaffian":
        series = pfaffian_series(core, res, max_psi_size=max_psi_size)
        corr = series.z_total
        if not series.complete:
            out["note"] = _join_note(out["note"], f"series-truncated-{len(series.terms)}-terms")
    else:  # loop_oracle
        total, count = loop_correction(core, res)
        out["note"] = _join_note(out["note"], f"loops-{count}")
        if total <= 0:
            out["note"] = _join_note(out["note"], "nonpositive-correction")
            return out
        out["log_z"] = base + math.log(total)
        return out
    if corr.sign <= 0:
        out["note"] = _join_note(out["note"], "nonpositive-correction")
        return out
    out["log_z"] = base + corr.log_magnitude
    return out


def _join_note(a: str, b: str) -> str:
    return f"{a};{b}" if a else b


_DEFAULTS = {
    "generator": None,
    "sizes": None,
    "betas": None,
    "thetas": "0",
    "seeds": "0",
    "methods": "z_empty",
    "attractive": "false",
    "max_psi": "",
    "schedule": "",
    "threshold": "1e-14",
    "max_iterations": "10000",
}


def parse_config(text: str) -> dict:
    """key = value lines; '#' comments; lists are space separated.

    seeds accepts ranges like 0..24 (inclusive). sizes are ints for grid
    and rings:spokes pairs for spiderweb.
    """
    raw = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ModelError(f"config line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _DEFAULTS:
            raise ModelError(f"config line {lineno}: unknown key {key!r}")
        if key in raw:
            raise ModelError(f"config line {lineno}: duplicate key {key!r}")
        raw[key] = value
    for key, default in _DEFAULTS.items():
        if key not in raw:
            if default is None:
                raise ModelError(f"config missing required key {key!r}")
            raw[key] = default

    cfg = {"generator": raw["generator"]}
    if cfg["generator"] not in ("grid", "spiderweb"):
        raise ModelError(f"unknown generator {raw['generator']!r}")
    if cfg["generator"] == "grid":
        cfg["sizes"] = [int(s) for s in raw["sizes"].split()]
    else:
        sizes = []
        for s in raw["sizes"].split():
            r, _, d = s.partition(":")
            if not d:
                raise ModelError(f"spiderweb size must be rings:spokes, got {s!r}")
            sizes.append((int(r), int(d)))
        cfg["sizes"] = sizes
    cfg["betas"] = [float(s) for s in raw["betas"].split()]
    cfg["thetas"] = [float(s) for s in raw["thetas"].split()]
    cfg["seeds"] = _parse_seeds(raw["seeds"])
    cfg["methods"] = raw["methods"].split()
    for m in cfg["methods"]:
        if m not in METHODS:
            raise ModelError(f"unknown method {m!r}")
    cfg["attractive"] = _parse_bool(raw["attractive"])
    cfg["max_psi"] = int(raw["max_psi"]) if raw["max_psi"] else None
    cfg["schedule"] = raw["schedule"]
    if cfg["schedule"] and cfg["schedule"] not in SCHEDULES:
        raise ModelError(f"unknown schedule {raw['schedule']!r}")
    cfg["threshold"] = float(raw["threshold"])
    cfg["max_iterations"] = int(raw["max_iterations"])
    return cfg


def _parse_seeds(text: str) -> list[int]:
    seeds = []
    for tok in text.split():
        if ".." in tok:
            lo, hi = tok.split("..", 1)
            seeds.extend(range(int(lo), int(hi) + 1))
        else:
            seeds.append(int(tok))
    if not seeds:
        raise ModelError("empty seed list")
    return seeds


def _parse_bool(text: str) -> bool:
    t = text.lower()
    if t in ("true", "yes", "1"):
        return True
    if t in ("false", "no", "0"):
        return False
    raise ModelError(f"expected a boolean, got {text!r}")


def _instance(cfg: dict, size, beta: float, theta: float, seed: int):
    params = ModelParams(beta=beta, theta=theta, attractive=cfg["attractive"], seed=seed)
    if cfg["generator"] == "grid":
        fg, g = gen_grid(size, params)
        label = str(size)
    else:
        fg, g = gen_spiderweb(size[0], size[1], params)
        label = f"{size[0]}:{size[1]}"
    return fg, g, label


def _fmt_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return "" if math.isnan(v) else f"{v:.17g}"
    return str(v)


def run_experiment(cfg: dict) -> list[dict]:
    """Sweep the config grid and return data rows plus per-cell summaries.

    Cells iterate in (size, beta, theta) product order with seeds inside;
    each instance produces one row per method. logz_exact comes from the
    factor-graph oracle when the instance fits under the enumeration cap.
    """
    rows = []
    for size, beta, theta in itertools.product(cfg["sizes"], cfg["betas"], cfg["thetas"]):
        cell_rows = {m: [] for m in cfg["methods"]}
        label = None
        for seed in cfg["seeds"]:
            fg, g, label = _instance(cfg, size, beta, theta, seed)
            log_exact = None
            if fg.num_variables <= MAX_ENUM_VARIABLES:
                log_exact = exact_log_z_factor(fg)
            for method in cfg["methods"]:
                t0 = time.perf_counter()
                note = ""
                if method == "exact":
                    # the factor-level oracle scales with variables, not
                    # with the reduced graph's edge count
                    r = {
                        "log_z": log_exact,
                        "bp_iterations": 0,
                        "converged": True,
                        "note": "" if log_exact is not None else "exact-unavailable",
                    }
                else:
                    try:
                        r = solve_forney(
                            g,
                            method=method,
                            schedule=cfg["schedule"] or None,
                            seed=seed,
                            max_psi_size=cfg["max_psi"],
                            threshold=cfg["threshold"],
                            max_iterations=cfg["max_iterations"],
                        )
                    except (ValueError, RuntimeError) as exc:
                        r = {"log_z": None, "bp_iterations": 0, "converged": False, "note": ""}
                        note = f"failed:{type(exc).__name__}"
                wall_ms = (time.perf_counter() - t0) * 1000.0
                note = _join_note(r["note"], note) if note else r["note"]
                err = None
                if r["log_z"] is not None and log_exact is not None:
                    err = error_metric(r["log_z"], log_exact)
                row = {
                    "row": "data",
                    "instance": f"{cfg['generator']}{label}_b{beta:g}_t{theta:g}_s{seed}",
                    "generator": cfg["generator"],
                    "size": label,
                    "beta": f"{beta:g}",
                    "theta": f"{theta:g}",
                    "seed": seed,
                    "method": method,
                    "logz_est": r["log_z"],
                    "logz_exact": log_exact,
                    "error": err,
                    "bp_iterations": r["bp_iterations"],
                    "converged": r["converged"],
                    "wall_ms": wall_ms,
                    "note": note,
                }
                rows.append(row)
                cell_rows[method].append(row)
        for method in cfg["methods"]:
            errs = [
                r["error"]
                for r in cell_rows[method]
                if r["error"] is not None and not math.isnan(r["error"])
            ]
            for stat, fn in (("mean", statistics.fmean), ("median", statistics.median)):
                rows.append(
                    {
                        "row": stat,
                        "instance": f"{cfg['generator']}{label}_b{beta:g}_t{theta:g}",
                        "generator": cfg["generator"],
                        "size": label,
                        "beta": f"{beta:g}",
                        "theta": f"{theta:g}",
                        "seed": None,
                        "method": method,
                        "logz_est": None,
                        "logz_exact": None,
                        "error": fn(errs) if errs else None,
                        "bp_iterations": None,
                        "converged": None,
                        "wall_ms": None,
                        "note": f"over-{len(errs)}-rows",
                    }
                )
    return rows


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for row in rows:
        w.writerow([_fmt_cell(row[c]) for c in CSV_COLUMNS])
    return buf.getvalue()
