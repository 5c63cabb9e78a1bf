"""Loopy belief propagation on normal-form graphs.

Messages live on directed edges as normalized 2-vectors over the edge
variable (index 0 is -1, index 1 is +1). Four update schedules are
provided; convergence means the largest absolute message change in a sweep
dropped below the threshold. Free-energy style quantities are evaluated in
log space.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from .model import ForneyGraph, ModelError, canon_edge

SCHEDULES = ("fixed", "random", "parallel", "residual")

MESSAGE_FLOOR = 1e-300
SATURATION_LIMIT = 1.0 - 1e-12


class BPNumericError(RuntimeError):
    """Messages left the representable range (NaN, overflow, or all-zero)."""


class SaturationError(RuntimeError):
    """An edge magnetization is numerically +-1, so loop weights are undefined."""


@dataclass(frozen=True)
class BPConfig:
    schedule: str = "fixed"
    threshold: float = 1e-14
    max_iterations: int = 10000
    seed: int = 0

    def __post_init__(self):
        if self.schedule not in SCHEDULES:
            raise ValueError(f"unknown schedule {self.schedule!r}, pick one of {SCHEDULES}")
        if self.threshold <= 0 or self.max_iterations < 1:
            raise ValueError("threshold must be positive and max_iterations at least 1")


@dataclass
class BPResult:
    converged: bool
    iterations: int
    final_residual: float
    schedule: str
    node_beliefs: dict = field(repr=False)
    edge_beliefs: dict = field(repr=False)
    magnetizations: dict = field(repr=False)
    neighbor_order: dict = field(repr=False)
    log_z_bp: float = 0.0


def _directed_edges(g: ForneyGraph) -> list[tuple[str, str]]:
    out = []
    for a, b in g.edges:
        out.append((a, b))
        out.append((b, a))
    return out


def _new_message(tables, neighbors, msgs, a: str, b: str) -> np.ndarray:
    """Outgoing message a -> b: marginalize a's table against other inputs."""
    nbrs = neighbors[a]
    k = len(nbrs)
    m = tables[a]
    for i, c in enumerate(nbrs):
        if c == b:
            out_axis = i
            continue
        shape = [1] * k
        shape[i] = 2
        m = m * msgs[(c, a)].reshape(shape)
    out = m.sum(axis=tuple(i for i in range(k) if i != out_axis))
    s = float(out.sum())
    if not math.isfinite(s) or s <= 0.0:
        raise BPNumericError(f"message {a!r}->{b!r} is not normalizable (sum={s!r})")
    out = np.maximum(out / s, MESSAGE_FLOOR)
    return out / out.sum()


def run_bp(g: ForneyGraph, cfg: BPConfig = BPConfig()) -> BPResult:
    """Run loopy BP until the message residual falls below cfg.threshold.

    Messages start uniform and no damping is applied. A non-converged run
    still returns beliefs from the final messages so callers can compare
    residuals across schedules.
    """
    dir_edges = _directed_edges(g)
    tables = {a: g.tables[a].reshape((2,) * g.degree(a)) for a in g.nodes}
    msgs = {de: np.array([0.5, 0.5]) for de in dir_edges}

    iterations = 0
    residual = math.inf
    converged = False
    if not dir_edges:
        converged, residual = True, 0.0
    elif cfg.schedule == "residual":
        iterations, residual, converged = _run_residual(g, cfg, dir_edges, tables, msgs)
    else:
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([cfg.seed])))
        for sweep in range(cfg.max_iterations):
            order = dir_edges
            if cfg.schedule == "random":
                order = [dir_edges[i] for i in rng.permutation(len(dir_edges))]
            if cfg.schedule == "parallel":
                fresh = {de: _new_message(tables, g.neighbors, msgs, *de) for de in order}
            residual = 0.0
            for de in order:
                new = fresh[de] if cfg.schedule == "parallel" else _new_message(
                    tables, g.neighbors, msgs, *de
                )
                residual = max(residual, float(np.abs(new - msgs[de]).max()))
                msgs[de] = new
            iterations = sweep + 1
            if residual < cfg.threshold:
                converged = True
                break

    return _finish(g, cfg, tables, msgs, converged, iterations, residual)


def _run_residual(g, cfg, dir_edges, tables, msgs):
    """Largest-residual-first updates; ties go to the lower edge index."""
    index = {de: i for i, de in enumerate(dir_edges)}
    dependents = {
        (a, b): [(b, c) for c in g.neighbors[b] if c != a] for (a, b) in dir_edges
    }
    version = {de: 0 for de in dir_edges}
    cand = {}
    heap = []
    for de in dir_edges:
        new = _new_message(tables, g.neighbors, msgs, *de)
        r = float(np.abs(new - msgs[de]).max())
        cand[de] = new
        heapq.heappush(heap, (-r, index[de], 0, de))
    pops = 0
    budget = cfg.max_iterations * len(dir_edges)
    residual = math.inf
    while heap:
        neg_r, _, ver, de = heap[0]
        if ver != version[de]:
            heapq.heappop(heap)
            continue
        residual = -neg_r
        if residual < cfg.threshold:
            return max(1, -(-pops // len(dir_edges))), residual, True
        if pops >= budget:
            return cfg.max_iterations, residual, False
        heapq.heappop(heap)
        pops += 1
        msgs[de] = cand[de]
        version[de] += 1
        cand[de] = msgs[de]
        heapq.heappush(heap, (0.0, index[de], version[de], de))
        for dep in dependents[de]:
            new = _new_message(tables, g.neighbors, msgs, *dep)
            r = float(np.abs(new - msgs[dep]).max())
            cand[dep] = new
            version[dep] += 1
            heapq.heappush(heap, (-r, index[dep], version[dep], dep))
    return max(1, -(-pops // len(dir_edges))), residual, True


def _log_safe(x: np.ndarray) -> np.ndarray:
    out = np.full(np.shape(x), -np.inf)
    np.log(x, out=out, where=np.asarray(x) > 0)
    return out


def _finish(g, cfg, tables, msgs, converged, iterations, residual):
    node_beliefs = {}
    for a in g.nodes:
        nbrs = g.neighbors[a]
        k = len(nbrs)
        logb = _log_safe(tables[a])
        for i, c in enumerate(nbrs):
            shape = [1] * k
            shape[i] = 2
            logb = logb + _log_safe(msgs[(c, a)]).reshape(shape)
        flat = logb.reshape(-1)
        top = float(flat.max())
        if not math.isfinite(top):
            raise BPNumericError(f"belief of node {a!r} vanished or overflowed")
        b = np.exp(flat - top)
        node_beliefs[a] = b / b.sum()

    edge_beliefs = {}
    magnetizations = {}
    for a, b in g.edges:
        p = msgs[(a, b)] * msgs[(b, a)]
        s = float(p.sum())
        if not math.isfinite(s) or s <= 0.0:
            raise BPNumericError(f"edge belief {a!r}-{b!r} is not normalizable")
        p = p / s
        edge_beliefs[(a, b)] = p
        magnetizations[(a, b)] = float(p[1] - p[0])

    free_energy = 0.0
    for a in g.nodes:
        b = node_beliefs[a]
        logf = _log_safe(g.tables[a])
        mask = b > 0
        free_energy += float(np.sum(b[mask] * (_log_safe(b)[mask] - logf[mask])))
    for e, p in edge_beliefs.items():
        mask = p > 0
        free_energy -= float(np.sum(p[mask] * _log_safe(p)[mask]))

    return BPResult(
        converged=converged,
        iterations=iterations,
        final_residual=residual,
        schedule=cfg.schedule,
        node_beliefs=node_beliefs,
        edge_beliefs=edge_beliefs,
        magnetizations=magnetizations,
        neighbor_order={a: g.neighbors[a] for a in g.nodes},
        log_z_bp=-free_energy,
    )


def run_bp_multistart(g: ForneyGraph, cfg: BPConfig = BPConfig()) -> BPResult:
    """Try every schedule in a fixed cascade; first converged run wins.

    If none converges, the run with the smallest final residual is returned
    (earlier schedule on ties). The winning schedule is recorded on the
    result.
    """
    best = None
    for schedule in SCHEDULES:
        res = run_bp(
            g,
            BPConfig(
                schedule=schedule,
                threshold=cfg.threshold,
                max_iterations=cfg.max_iterations,
                seed=cfg.seed,
            ),
        )
        if res.converged:
            return res
        if best is None or res.final_residual < best.final_residual:
            best = res
    return best


def mu_term(res: BPResult, a: str, subset) -> float:
    """Loop weight of node a against the neighbor subset S.

    Averages prod_{b in S} (sigma_ab - m_ab) under the node belief and
    divides by prod sqrt(1 - m_ab^2). Defined for |S| of 2 or 3; saturated
    magnetizations make the weight ill-conditioned and raise.
    """
    order = res.neighbor_order[a]
    subset = tuple(subset)
    if len(subset) not in (2, 3) or len(set(subset)) != len(subset):
        raise ModelError(f"subset must be 2 or 3 distinct neighbors, got {subset!r}")
    for b in subset:
        if b not in order:
            raise ModelError(f"{b!r} is not a neighbor of {a!r}")
    k = len(order)
    ms = []
    for b in subset:
        m = res.magnetizations[canon_edge(a, b)]
        if abs(m) >= SATURATION_LIMIT:
            raise SaturationError(f"edge {a!r}-{b!r} magnetization {m!r} is saturated")
        ms.append(m)
    belief = res.node_beliefs[a]
    num = 0.0
    for idx in range(belief.size):
        w = float(belief[idx])
        if w == 0.0:
            continue
        for b, m in zip(subset, ms):
            sigma = 1.0 if (idx >> (k - 1 - order.index(b))) & 1 else -1.0
            w *= sigma - m
        num += w
    den = 1.0
    for m in ms:
        den *= math.sqrt(1.0 - m * m)
    return num / den


def dump_beliefs(res: BPResult) -> str:
    """Text dump of all node and edge beliefs, 17 significant digits."""
    lines = []
    for a, b in res.node_beliefs.items():
        lines.append("node " + a + " " + " ".join(f"{v:.17g}" for v in b))
    for (a, b), p in res.edge_beliefs.items():
        lines.append(f"edge {a} {b} {p[0]:.17g} {p[1]:.17g}")
    return "\n".join(lines) + "\n"
