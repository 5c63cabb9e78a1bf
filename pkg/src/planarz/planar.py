"""Planar machinery: embeddings, node-splitting gadgets, edge orientation.

The pipeline goes reduced graph -> split gadgets (one 2-node gadget per
degree-2 node, one triangle per degree-3 node) -> dummy edges until
biconnected -> rotation-system embedding -> orientation making every bounded
face odd when walked clockwise. Perfect matchings of the extended graph then
line up with the even-degree loop structure of the source graph.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import networkx as nx

from .bp import BPResult, mu_term
from .model import ForneyGraph, ModelError


class NonPlanarError(ValueError):
    """Graph admits no planar embedding; carries a Kuratowski witness."""

    def __init__(self, message, witness_edges=()):
        super().__init__(message)
        self.witness_edges = tuple(witness_edges)


@dataclass(frozen=True)
class ExtEdge:
    """Edge of an extended graph; weight is the matching weight."""

    u: int
    v: int
    kind: str  # internal | external | dummy
    weight: float
    origin: tuple

    def key(self) -> tuple[int, int]:
        return (self.u, self.v) if self.u < self.v else (self.v, self.u)


@dataclass(frozen=True)
class ExtendedGraph:
    """Port graph produced by splitting nodes of a reduced source graph.

    Vertex i is labels[i] = (source node, facing neighbor). Gadget-internal
    edges carry loop weights, external edges weight 1, dummy edges weight 0.
    """

    num_vertices: int
    labels: tuple
    edges: tuple
    source_nodes: tuple
    removed: tuple

    def adjacency(self) -> list[list[int]]:
        adj = [[] for _ in range(self.num_vertices)]
        for e in self.edges:
            adj[e.u].append(e.v)
            adj[e.v].append(e.u)
        return adj

    def with_extra_edges(self, extra) -> "ExtendedGraph":
        return ExtendedGraph(
            self.num_vertices, self.labels, self.edges + tuple(extra),
            self.source_nodes, self.removed,
        )


@dataclass(frozen=True)
class PlanarEmbedding:
    """Rotation system plus traced faces for a planar graph."""

    num_vertices: int
    rotation: tuple  # per vertex, neighbor tuple in cyclic order
    faces: tuple  # per face, tuple of directed edges (u, v)
    external_face: int


@dataclass(frozen=True)
class OrientedPlanarGraph:
    """Extended graph with an embedding and a parity-correct edge orientation."""

    ext: ExtendedGraph
    embedding: PlanarEmbedding
    orientation: dict  # canonical (u, v) -> (tail, head)


def _trace_faces(num_vertices, rotation):
    pos = [{b: i for i, b in enumerate(nbrs)} for nbrs in rotation]
    faces = []
    seen = set()
    for u in range(num_vertices):
        for v in rotation[u]:
            if (u, v) in seen:
                continue
            walk = []
            x, y = u, v
            while (x, y) not in seen:
                seen.add((x, y))
                walk.append((x, y))
                nxt = rotation[y][(pos[y][x] + 1) % len(rotation[y])]
                x, y = y, nxt
            faces.append(tuple(walk))
    return tuple(faces)


def embed(num_vertices: int, edges, rotation=None) -> PlanarEmbedding:
    """Planar embedding as a rotation system with traced faces.

    A supplied rotation is validated instead of computed. Non-planar input
    raises NonPlanarError carrying a Kuratowski witness. Every vertex must
    touch an edge.
    """
    key_edges = sorted({(min(u, v), max(u, v)) for u, v in edges})
    if not key_edges:
        raise ModelError("embed needs at least one edge")
    adj = [set() for _ in range(num_vertices)]
    for u, v in key_edges:
        if not (0 <= u < num_vertices and 0 <= v < num_vertices) or u == v:
            raise ModelError(f"bad edge ({u}, {v})")
        adj[u].add(v)
        adj[v].add(u)
    if any(not s for s in adj):
        raise ModelError("embed does not accept isolated vertices")

    if rotation is None:
        G = nx.Graph()
        G.add_nodes_from(range(num_vertices))
        G.add_edges_from(key_edges)
        ok, cert = nx.check_planarity(G, counterexample=True)
        if not ok:
            raise NonPlanarError(
                f"graph is not planar; Kuratowski witness has {cert.number_of_edges()} edges",
                witness_edges=sorted(tuple(sorted(e)) for e in cert.edges()),
            )
        rotation = tuple(tuple(cert.neighbors_cw_order(v)) for v in range(num_vertices))
    else:
        rotation = tuple(tuple(r) for r in rotation)
        if len(rotation) != num_vertices:
            raise ModelError("rotation must list every vertex")
        for v, nbrs in enumerate(rotation):
            if set(nbrs) != adj[v] or len(nbrs) != len(adj[v]):
                raise ModelError(f"rotation at vertex {v} does not match the edge set")

    faces = _trace_faces(num_vertices, rotation)

    # per-component Euler check: the rotation system is planar iff each
    # component satisfies V - E + F = 2 with its own outer face
    comp = list(range(num_vertices))

    def find(x):
        while comp[x] != x:
            comp[x] = comp[comp[x]]
            x = comp[x]
        return x

    for u, v in key_edges:
        comp[find(u)] = find(v)
    v_count = {}
    e_count = {}
    f_count = {}
    for v in range(num_vertices):
        v_count[find(v)] = v_count.get(find(v), 0) + 1
    for u, v in key_edges:
        e_count[find(u)] = e_count.get(find(u), 0) + 1
    for face in faces:
        root = find(face[0][0])
        f_count[root] = f_count.get(root, 0) + 1
    for root, nv in v_count.items():
        if nv - e_count.get(root, 0) + f_count.get(root, 0) != 2:
            raise NonPlanarError("rotation system violates Euler's formula")

    best = max(range(len(faces)), key=lambda i: (len(faces[i]), -i))
    return PlanarEmbedding(num_vertices, rotation, faces, best)


def fisher_extend(g: ForneyGraph, res: BPResult, removed=()) -> ExtendedGraph:
    """Split every kept node into its matching gadget.

    Degree-2 nodes become two ports joined by one weighted edge; degree-3
    nodes become a triangle whose edge between the ports facing b and c
    carries the node's loop weight against {b, c}. Ports facing a removed
    node get no external edge, which forces them to be matched internally.
    """
    if not g.is_reduced:
        raise ModelError("fisher_extend needs a reduced graph (degrees 2 and 3)")
    removed = tuple(removed)
    removed_set = set(removed)
    if len(removed_set) != len(removed):
        raise ModelError("removed nodes repeat")
    for a in removed:
        if a not in g.neighbors:
            raise ModelError(f"removed node {a!r} not in graph")
        if g.degree(a) != 3:
            raise ModelError(f"removed node {a!r} has degree {g.degree(a)}, need 3")

    labels = []
    port = {}
    for a in g.nodes:
        if a in removed_set:
            continue
        for b in g.neighbors[a]:
            port[(a, b)] = len(labels)
            labels.append((a, b))

    edges = []
    for a in g.nodes:
        if a in removed_set:
            continue
        nbrs = g.neighbors[a]
        if len(nbrs) == 2:
            pairs = [(0, 1)]
        else:
            pairs = [(0, 1), (0, 2), (1, 2)]
        for i, j in pairs:
            w = mu_term(res, a, (nbrs[i], nbrs[j]))
            edges.append(ExtEdge(
                port[(a, nbrs[i])], port[(a, nbrs[j])], "internal", w,
                ("internal", a, (nbrs[i], nbrs[j])),
            ))
    for a, b in g.edges:
        if a in removed_set or b in removed_set:
            continue
        edges.append(ExtEdge(port[(a, b)], port[(b, a)], "external", 1.0, ("external", (a, b))))

    kept = tuple(a for a in g.nodes if a not in removed_set)
    return ExtendedGraph(len(labels), tuple(labels), tuple(edges), kept, removed)


def biconnect(ext: ExtendedGraph) -> ExtendedGraph:
    """Add zero-weight dummy edges until the graph is connected and has no
    articulation points.

    New edges always join two neighbors of a shared cut vertex from
    different blocks (or two components), so some planar embedding keeps
    them inside a common face; planarity is re-checked at the end.
    """
    if ext.num_vertices == 0:
        return ext
    G = nx.Graph()
    G.add_nodes_from(range(ext.num_vertices))
    G.add_edges_from(e.key() for e in ext.edges)
    dummies = []

    def add_dummy(u, v):
        if u == v or G.has_edge(u, v):
            raise ModelError(f"dummy edge ({u}, {v}) would not be simple")
        G.add_edge(u, v)
        dummies.append(ExtEdge(min(u, v), max(u, v), "dummy", 0.0, ("dummy", len(dummies))))

    comps = sorted((sorted(c) for c in nx.connected_components(G)), key=lambda c: c[0])
    for a, b in itertools.pairwise(comps):
        add_dummy(a[0], b[0])

    while True:
        cuts = sorted(nx.articulation_points(G))
        if not cuts:
            break
        v = cuts[0]
        blocks = sorted(
            (sorted(b) for b in nx.biconnected_components(G) if v in b),
            key=lambda b: b[:],
        )
        b1, b2 = blocks[0], blocks[1]
        u = min(x for x in b1 if x != v and G.has_edge(x, v))
        w = min(x for x in b2 if x != v and G.has_edge(x, v))
        add_dummy(u, w)

    if not dummies:
        return ext
    ok, _ = nx.check_planarity(G)
    if not ok:
        raise NonPlanarError("dummy augmentation broke planarity")
    return ext.with_extra_edges(dummies)


def orient(ext: ExtendedGraph) -> OrientedPlanarGraph:
    """Direct every edge so each bounded face has an odd clockwise count.

    Spanning-tree edges point toward their larger endpoint. Faces are then
    visited in post-order over the dual tree built from the non-tree edges
    (rooted at the external face); each face fixes the one undirected edge
    it still has so its own parity comes out odd.
    """
    emb = embed(ext.num_vertices, [e.key() for e in ext.edges])
    n = ext.num_vertices

    adj = [[] for _ in range(n)]
    for e in ext.edges:
        u, v = e.key()
        adj[u].append(v)
        adj[v].append(u)
    adj = [sorted(set(a)) for a in adj]

    tree = set()
    seen = [False] * n
    seen[0] = True
    stack = [0]
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if not seen[v]:
                seen[v] = True
                tree.add((min(u, v), max(u, v)))
                stack.append(v)
    if not all(seen):
        raise ModelError("orient needs a connected graph; run biconnect first")

    orientation = {e: e for e in tree}  # tail = smaller endpoint

    face_of = {}
    for fi, walk in enumerate(emb.faces):
        for de in walk:
            face_of[de] = fi

    dual = {fi: [] for fi in range(len(emb.faces))}
    for u, v in {e.key() for e in ext.edges}:
        if (u, v) in tree:
            continue
        f1, f2 = face_of[(u, v)], face_of[(v, u)]
        if f1 == f2:
            raise ModelError(f"edge ({u}, {v}) is a bridge; graph is not biconnected")
        dual[f1].append((f2, (u, v)))
        dual[f2].append((f1, (u, v)))

    root = emb.external_face
    parent_edge = {root: None}
    order = []
    stack = [(root, None)]
    while stack:
        fi, via = stack.pop()
        order.append(fi)
        for nf, e in sorted(dual[fi]):
            if nf not in parent_edge:
                parent_edge[nf] = e
                stack.append((nf, e))
    if len(parent_edge) != len(emb.faces):
        raise ModelError("dual graph across non-tree edges is not connected")

    for fi in reversed(order):
        if fi == root:
            continue
        u, v = parent_edge[fi]
        walk = emb.faces[fi]
        cw = 0
        this_dir = None
        for x, y in walk:
            key = (min(x, y), max(x, y))
            if key == (u, v):
                this_dir = (x, y)
                continue
            if orientation[key] == (x, y):
                cw += 1
        orientation[(u, v)] = this_dir if cw % 2 == 0 else (this_dir[1], this_dir[0])

    return OrientedPlanarGraph(ext, emb, orientation)


def face_parity_violations(o: OrientedPlanarGraph) -> list[int]:
    """Indices of bounded faces whose clockwise count is even (should be none)."""
    bad = []
    for fi, walk in enumerate(o.embedding.faces):
        if fi == o.embedding.external_face:
            continue
        cw = sum(
            1 for x, y in walk if o.orientation[(min(x, y), max(x, y))] == (x, y)
        )
        if cw % 2 == 0:
            bad.append(fi)
    return bad


def dump_embedding(emb: PlanarEmbedding) -> str:
    lines = []
    for v in range(emb.num_vertices):
        lines.append(f"vertex {v}: " + " ".join(str(x) for x in emb.rotation[v]))
    for fi, walk in enumerate(emb.faces):
        mark = " external" if fi == emb.external_face else ""
        lines.append(f"face {fi}:{mark} " + " ".join(f"{x}>{y}" for x, y in walk))
    return "\n".join(lines) + "\n"


def dump_orientation(o: OrientedPlanarGraph) -> str:
    lines = []
    for (u, v), (t, h) in sorted(o.orientation.items()):
        lines.append(f"edge {u} {v} -> {t} {h}")
    return "\n".join(lines) + "\n"
