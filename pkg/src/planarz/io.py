"""Line-oriented model files.

Two headers are understood. `forney <num_nodes>` introduces a normal-form
graph given by `edge <a> <b>` lines (their order fixes each node's neighbor
order) and one `factor <node> <values...>` line per node. `factorgraph
<num_vars>` introduces `var <id>` lines and `factor <id> <vars...>
<values...>` lines; the split between scope and values is recovered from the
token count (k + 2^k has a unique solution). '#' starts a comment anywhere.
Unknown directives are rejected.
"""

from __future__ import annotations

import numpy as np

from .model import FactorGraph, ForneyGraph, ModelError


def _tokens(text: str):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield lineno, line.split()


def _parse_values(parts, lineno):
    try:
        return [float(p) for p in parts]
    except ValueError as exc:
        raise ModelError(f"line {lineno}: bad numeric value ({exc})") from None


def parse_model(text: str):
    """Parse a model file; returns ForneyGraph or FactorGraph by header."""
    rows = list(_tokens(text))
    if not rows:
        raise ModelError("empty model file")
    lineno, head = rows[0]
    if len(head) != 2 or head[0] not in ("forney", "factorgraph"):
        raise ModelError(f"line {lineno}: expected 'forney <n>' or 'factorgraph <n>' header")
    try:
        declared = int(head[1])
    except ValueError:
        raise ModelError(f"line {lineno}: bad count {head[1]!r}") from None
    if declared < 0:
        raise ModelError(f"line {lineno}: negative count")
    body = rows[1:]
    if head[0] == "forney":
        return _parse_forney(declared, body)
    return _parse_factorgraph(declared, body)


def _parse_forney(num_nodes, body):
    order: dict[str, list[str]] = {}
    tables: dict[str, list[float]] = {}
    for lineno, parts in body:
        kind = parts[0]
        if kind == "edge":
            if len(parts) != 3:
                raise ModelError(f"line {lineno}: edge needs two endpoints")
            a, b = parts[1], parts[2]
            if a == b:
                raise ModelError(f"line {lineno}: self loop at {a!r}")
            order.setdefault(a, []).append(b)
            order.setdefault(b, []).append(a)
        elif kind == "factor":
            if len(parts) < 3:
                raise ModelError(f"line {lineno}: factor needs a node id and values")
            name = parts[1]
            if name in tables:
                raise ModelError(f"line {lineno}: duplicate factor for node {name!r}")
            tables[name] = _parse_values(parts[2:], lineno)
        else:
            raise ModelError(f"line {lineno}: unknown directive {kind!r}")
    if len(tables) != num_nodes:
        raise ModelError(f"header declares {num_nodes} nodes, found {len(tables)} factor lines")
    unknown = set(order) - set(tables)
    if unknown:
        raise ModelError(f"edges reference nodes without factor lines: {sorted(unknown)}")
    neighbors = {name: tuple(order.get(name, ())) for name in tables}
    return ForneyGraph(neighbors, {k: np.asarray(v) for k, v in tables.items()})


def _scope_size(m: int, lineno: int) -> int:
    k = 0
    while k + (1 << k) < m:
        k += 1
    if k + (1 << k) != m:
        raise ModelError(f"line {lineno}: factor token count {m} fits no scope size")
    return k


def _parse_factorgraph(num_vars, body):
    variables: list[str] = []
    factors = []
    for lineno, parts in body:
        kind = parts[0]
        if kind == "var":
            if len(parts) != 2:
                raise ModelError(f"line {lineno}: var needs exactly one id")
            variables.append(parts[1])
        elif kind == "factor":
            if len(parts) < 3:
                raise ModelError(f"line {lineno}: factor needs an id and a table")
            k = _scope_size(len(parts) - 2, lineno)
            scope = tuple(parts[2 : 2 + k])
            values = _parse_values(parts[2 + k :], lineno)
            factors.append((parts[1], scope, np.asarray(values)))
        else:
            raise ModelError(f"line {lineno}: unknown directive {kind!r}")
    if len(variables) != num_vars:
        raise ModelError(f"header declares {num_vars} variables, found {len(variables)}")
    return FactorGraph(variables, factors)


def _check_token(name: str) -> str:
    s = str(name)
    if not s or any(c.isspace() for c in s) or "#" in s:
        raise ModelError(f"id {name!r} cannot be written as a file token")
    return s


def _fmt(v: float) -> str:
    return f"{v:.17g}"


def write_forney(g: ForneyGraph) -> str:
    """Serialize a normal-form graph.

    Edges are written in canonical sorted order, so each node's neighbor
    order in the written file is the canonical one; tables are permuted to
    match. The parsed-back model is therefore equivalent, not necessarily
    axis-identical.
    """
    lines = [f"forney {g.num_nodes}"]
    new_order: dict[str, list[str]] = {a: [] for a in g.nodes}
    for a, b in g.edges:
        _check_token(a), _check_token(b)
        lines.append(f"edge {a} {b}")
        new_order[a].append(b)
        new_order[b].append(a)
    for a in g.nodes:
        _check_token(a)
        old = g.neighbors[a]
        k = len(old)
        perm = tuple(old.index(b) for b in new_order[a])
        t = g.tables[a]
        if k and perm != tuple(range(k)):
            t = t.reshape((2,) * k).transpose(perm).reshape(-1)
        lines.append("factor " + a + " " + " ".join(_fmt(v) for v in t))
    return "\n".join(lines) + "\n"


def write_factor_graph(fg: FactorGraph) -> str:
    lines = [f"factorgraph {fg.num_variables}"]
    for v in fg.variables:
        lines.append(f"var {_check_token(v)}")
    for f in fg.factors:
        parts = ["factor", _check_token(f.id)]
        parts.extend(_check_token(v) for v in f.scope)
        parts.extend(_fmt(v) for v in f.table)
        lines.append(" ".join(parts))
    return "\n".join(lines) + "\n"


def read_model(path: str):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_model(fh.read())


def write_model(path: str, model) -> None:
    text = write_forney(model) if isinstance(model, ForneyGraph) else write_factor_graph(model)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
