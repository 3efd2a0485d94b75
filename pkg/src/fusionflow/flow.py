"""Labelled open graphs, fusion networks and flow.

Correction sets and the odd neighbourhood are handled as vertex sets at the
API and as integer bitmasks inside the solvers.  The flow finder works
backwards from the outputs, solving one GF(2) system per vertex and layer;
an exhaustive search over correction sets and partial orders serves as an
independent oracle for small graphs.

The Y-parity condition of Pauli flow is applied to every Y vertex that is
not strictly after ``v`` (incomparable ones included).  Restricting it to
vertices strictly before ``v`` admits "flows" on graphs whose target map is
not an isometry.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import zx

PLANE_LABELS = ("XY", "XZ", "YZ")
PAULI_LABELS = ("X", "Y", "Z")
LABELS = PLANE_LABELS + PAULI_LABELS
TWO_PI = 2 * math.pi
HALF_PI = math.pi / 2

EXHAUSTIVE_LIMIT = 14


class FlowError(ValueError):
    pass


class SearchLimitExceeded(FlowError):
    pass


def _edge(a, b) -> frozenset:
    if a == b:
        raise FlowError(f"self-loop on {a!r}")
    return frozenset((a, b))


# ---------------------------------------------------------------------------
# Labels


def effect_label(plane: str, angle: float) -> tuple:
    """Plane form ``(XY|XZ|YZ, angle)`` of a label; Pauli angles act as a sign."""
    if plane == "X":
        return "XY", angle % TWO_PI
    if plane == "Y":
        return "XY", (HALF_PI + angle) % TWO_PI
    if plane == "Z":
        return "XZ", angle % TWO_PI
    return plane, angle % TWO_PI


def _effect_vector(plane: str, angle: float) -> np.ndarray:
    p, a = effect_label(plane, angle)
    return zx.eval_tensor(zx.measurement_effect(p, a)).ravel()


_PAULI_VECS = None


def pauli_label(plane: str, angle: float, tol: float = 1e-9):
    """``(P, sign_angle)`` if the effect is a Pauli eigen-effect, else None."""
    global _PAULI_VECS
    if _PAULI_VECS is None:
        _PAULI_VECS = [(p, s, _effect_vector(p, s)) for p in PAULI_LABELS for s in (0.0, math.pi)]
    v = _effect_vector(plane, angle)
    for p, s, w in _PAULI_VECS:
        if abs(abs(np.vdot(w, v)) - 1) < tol:
            return p, s
    return None


def clifford_relabel(plane: str, angle: float, c: int) -> tuple:
    """Label seen after a ``Z(c pi/2)`` on the measured node.

    Planes follow the target-graph table; Pauli labels are mapped through
    their plane form and read back as Paulis.
    """
    c %= 4
    if c == 0:
        return plane, angle
    if plane in PAULI_LABELS:
        p, a = effect_label(plane, angle)
        np_, na = clifford_relabel(p, a, c)
        lab = pauli_label(np_, na)
        assert lab is not None
        return lab
    if plane == "XY":
        return "XY", (angle + c * HALF_PI) % TWO_PI
    if plane == "XZ":
        new = "YZ" if c % 2 else "XZ"
        return new, ((-1) ** math.ceil(c / 2) * angle) % TWO_PI
    if plane == "YZ":
        new = "XZ" if c % 2 else "YZ"
        return new, ((-1) ** (c // 2) * angle) % TWO_PI
    raise FlowError(f"unknown plane {plane!r}")


# ---------------------------------------------------------------------------
# Open graphs


@dataclass
class OpenGraph:
    """Labelled open graph ``(G, I, O, lambda, alpha)``.

    ``planes`` and ``angles`` are defined on non-outputs.  Pauli labels carry
    an angle of 0 (or pi for the opposite eigenstate).
    """

    vertices: list
    edges: set = field(default_factory=set)
    inputs: frozenset = frozenset()
    outputs: frozenset = frozenset()
    planes: dict = field(default_factory=dict)
    angles: dict = field(default_factory=dict)

    def __post_init__(self):
        self.vertices = list(self.vertices)
        self.edges = {e if isinstance(e, frozenset) else _edge(*e) for e in self.edges}
        self.inputs = frozenset(self.inputs)
        self.outputs = frozenset(self.outputs)
        self.planes = dict(self.planes)
        self.angles = {v: float(a) for v, a in self.angles.items()}
        self.validate()

    def validate(self):
        vs = set(self.vertices)
        if len(vs) != len(self.vertices):
            raise FlowError("duplicate vertex")
        for e in self.edges:
            if not e <= vs or len(e) != 2:
                raise FlowError(f"bad edge {set(e)}")
        if not (self.inputs <= vs and self.outputs <= vs):
            raise FlowError("inputs/outputs must be vertices")
        for v in self.measured:
            lab = self.planes.get(v)
            if lab not in LABELS:
                raise FlowError(f"vertex {v!r} needs a plane in {LABELS}, got {lab!r}")
            self.angles.setdefault(v, 0.0)
        extra = set(self.planes) - set(self.measured)
        if extra:
            raise FlowError(f"labels on unmeasured vertices {sorted(map(str, extra))}")

    @property
    def measured(self) -> list:
        return [v for v in self.vertices if v not in self.outputs]

    @property
    def non_inputs(self) -> list:
        return [v for v in self.vertices if v not in self.inputs]

    def neighbours(self, v) -> set:
        return {w for e in self.edges if v in e for w in e if w != v}

    def adjacency(self) -> dict:
        adj = {v: set() for v in self.vertices}
        for e in self.edges:
            a, b = tuple(e)
            adj[a].add(b)
            adj[b].add(a)
        return adj

    def copy(self) -> "OpenGraph":
        return OpenGraph(list(self.vertices), set(self.edges), self.inputs, self.outputs, dict(self.planes), dict(self.angles))

    def has_edge(self, a, b) -> bool:
        return _edge(a, b) in self.edges

    def toggle_edge(self, a, b):
        self.edges ^= {_edge(a, b)}

    def to_json(self) -> dict:
        return {
            "vertices": self.vertices,
            "edges": sorted([sorted(e, key=str) for e in self.edges], key=str),
            "inputs": sorted(self.inputs, key=str),
            "outputs": sorted(self.outputs, key=str),
            "planes": {str(v): p for v, p in self.planes.items()},
            "angles": {str(v): a for v, a in self.angles.items()},
        }

    @classmethod
    def from_json(cls, data) -> "OpenGraph":
        try:
            vertices = list(data["vertices"])
            by_name = {str(v): v for v in vertices}
            planes = {by_name[k]: p.upper() for k, p in data.get("planes", {}).items()}
            angles = {by_name[k]: float(a) for k, a in data.get("angles", {}).items()}
            return cls(vertices, {tuple(e) for e in data.get("edges", [])}, data.get("inputs", []),
                       data.get("outputs", []), planes, angles)
        except (KeyError, TypeError, AttributeError) as exc:
            raise FlowError(f"malformed open graph JSON: {exc}") from exc

    def to_dot(self) -> str:
        colour = {"XY": "lightgreen", "XZ": "khaki", "YZ": "lightpink", "X": "red", "Y": "orange", "Z": "green"}
        lines = ["graph G {"]
        for v in self.vertices:
            attrs = [f'label="{v}"', "style=filled"]
            attrs.append(f'fillcolor="{colour.get(self.planes.get(v), "white")}"')
            if v in self.inputs:
                attrs.append("shape=box")
            if v in self.outputs:
                attrs.append("peripheries=2")
            lines.append(f'  "{v}" [{", ".join(attrs)}];')
        for e in sorted(self.edges, key=lambda e: sorted(map(str, e))):
            a, b = sorted(e, key=str)
            lines.append(f'  "{a}" -- "{b}";')
        lines.append("}")
        return "\n".join(lines)


def odd_neighbourhood(g: OpenGraph, K) -> set:
    adj = g.adjacency()
    out = set()
    for k in K:
        out ^= adj[k]
    return out


# ---------------------------------------------------------------------------
# Certificates and verification


@dataclass
class FlowCertificate:
    """Correction sets plus an order.

    The order is either ``layers`` (vertex -> int, smaller is earlier; ``v < w``
    iff ``layers[v] < layers[w]``) or an explicit strict ``relation`` given as
    a set of ``(v, w)`` pairs closed under transitivity.
    """

    p: dict
    layers: dict | None = None
    relation: frozenset | None = None

    def less(self, v, w) -> bool:
        if self.relation is not None:
            return (v, w) in self.relation
        return self.layers[v] < self.layers[w]

    def measurement_order(self, vertices) -> list:
        """A linear extension of the order over ``vertices``."""
        vs = list(vertices)
        if self.relation is None:
            return sorted(vs, key=lambda v: (self.layers[v], vs.index(v)))
        out, left = [], list(vs)
        while left:
            nxt = next(v for v in left if not any(self.less(w, v) for w in left if w != v))
            out.append(nxt)
            left.remove(nxt)
        return out

    def to_json(self) -> dict:
        d = {"p": {str(v): sorted(map(str, s)) for v, s in self.p.items()}}
        if self.layers is not None:
            d["layers"] = {str(v): k for v, k in self.layers.items()}
        if self.relation is not None:
            d["relation"] = sorted([str(a), str(b)] for a, b in self.relation)
        return d

    @classmethod
    def from_json(cls, data, vertices) -> "FlowCertificate":
        """Inverse of :meth:`to_json`; names are resolved against ``vertices``."""
        by_name = {str(v): v for v in vertices}
        try:
            p = {by_name[k]: {by_name[x] for x in s} for k, s in data["p"].items()}
            layers = {by_name[k]: int(n) for k, n in data["layers"].items()} if "layers" in data else None
            rel = frozenset((by_name[a], by_name[b]) for a, b in data["relation"]) if "relation" in data else None
        except (KeyError, TypeError, ValueError) as exc:
            raise FlowError(f"malformed certificate JSON: {exc}") from exc
        if layers is None and rel is None:
            raise FlowError("certificate needs layers or relation")
        return cls(p, layers, rel)


@dataclass
class Verdict:
    ok: bool
    condition: object = None
    vertex: object = None
    detail: str = ""

    def __bool__(self):
        return self.ok


def _check_order(g: OpenGraph, cert: FlowCertificate) -> Verdict:
    if cert.relation is not None:
        for a, b in cert.relation:
            if a == b:
                return Verdict(False, "order", a, "relation is not irreflexive")
            for c, d in cert.relation:
                if b == c and (a, d) not in cert.relation:
                    return Verdict(False, "order", a, "relation is not transitive")
    elif cert.layers is None or set(cert.layers) != set(g.vertices):
        return Verdict(False, "order", None, "layers must cover every vertex")
    return Verdict(True)


def _check_domain(g: OpenGraph, cert: FlowCertificate) -> Verdict:
    if set(cert.p) != set(g.measured):
        return Verdict(False, "domain", None, "correction sets must be given exactly on non-outputs")
    for v, s in cert.p.items():
        if not set(s) <= set(g.non_inputs):
            return Verdict(False, "domain", v, "correction set contains an input or unknown vertex")
    return Verdict(True)


def verify_gflow(g: OpenGraph, cert: FlowCertificate) -> Verdict:
    """Check the five gflow conditions; all labels must be planes."""
    for chk in (_check_order(g, cert), _check_domain(g, cert)):
        if not chk:
            return chk
    adj = g.adjacency()
    for v in g.measured:
        lam = g.planes[v]
        if lam not in PLANE_LABELS:
            return Verdict(False, "plane", v, f"gflow needs planes, got {lam}")
        s = set(cert.p[v])
        odd = set()
        for k in s:
            odd ^= adj[k]
        for w in s:
            if w != v and not cert.less(v, w):
                return Verdict(False, 1, v, f"{w!r} in g(v) but not after v")
        for w in odd:
            if w != v and not cert.less(v, w):
                return Verdict(False, 2, v, f"{w!r} in Odd(g(v)) but not after v")
        if lam == "XY" and not (v not in s and v in odd):
            return Verdict(False, 3, v)
        if lam == "XZ" and not (v in s and v in odd):
            return Verdict(False, 4, v)
        if lam == "YZ" and not (v in s and v not in odd):
            return Verdict(False, 5, v)
    return Verdict(True)


def verify_pauli_flow(g: OpenGraph, cert: FlowCertificate, no_odd=()) -> Verdict:
    """Check the nine Pauli-flow conditions literally.

    ``no_odd`` lists vertices ``f`` that may not lie in ``Odd(p(v))`` for any
    ``v != f`` (the XY-flow restriction on X-fusion nodes).
    """
    for chk in (_check_order(g, cert), _check_domain(g, cert)):
        if not chk:
            return chk
    adj = g.adjacency()
    lam = g.planes
    for v in g.measured:
        s = set(cert.p[v])
        odd = set()
        for k in s:
            odd ^= adj[k]
        for w in s:
            if lam.get(w) not in ("X", "Y") and w != v and not cert.less(v, w):
                return Verdict(False, 1, v, f"{w!r} in p(v) but not after v")
        for w in odd:
            if lam.get(w) not in ("Y", "Z") and w != v and not cert.less(v, w):
                return Verdict(False, 2, v, f"{w!r} in Odd(p(v)) but not after v")
        for w in g.vertices:
            if w != v and lam.get(w) == "Y" and not cert.less(v, w) and ((w in s) != (w in odd)):
                return Verdict(False, 3, v, f"Y vertex {w!r} not after v breaks the parity condition")
        lv = lam[v]
        ok = {
            "XY": v not in s and v in odd,
            "XZ": v in s and v in odd,
            "YZ": v in s and v not in odd,
            "X": v in odd,
            "Z": v in s,
            "Y": (v not in s and v in odd) or (v in s and v not in odd),
        }[lv]
        if not ok:
            cond = {"XY": 4, "XZ": 5, "YZ": 6, "X": 7, "Z": 8, "Y": 9}[lv]
            return Verdict(False, cond, v)
        for f in no_odd:
            if f != v and f in odd:
                return Verdict(False, "xy-flow", v, f"fusion node {f!r} in Odd(p(v))")
    return Verdict(True)


# ---------------------------------------------------------------------------
# GF(2) layered finder


class _Bits:
    """Vertex <-> bit index map with adjacency masks."""

    def __init__(self, g: OpenGraph):
        self.order = list(g.vertices)
        self.index = {v: i for i, v in enumerate(self.order)}
        self.adj = [0] * len(self.order)
        for e in g.edges:
            a, b = (self.index[x] for x in e)
            self.adj[a] |= 1 << b
            self.adj[b] |= 1 << a

    def mask(self, vs) -> int:
        m = 0
        for v in vs:
            m |= 1 << self.index[v]
        return m

    def verts(self, m: int) -> frozenset:
        return frozenset(self.order[i] for i in range(len(self.order)) if m >> i & 1)

    def odd(self, m: int) -> int:
        out = 0
        i = 0
        while m:
            if m & 1:
                out ^= self.adj[i]
            m >>= 1
            i += 1
        return out


def _solve_gf2(rows: list, n: int):
    """Solve ``rows`` = [(coeff mask over n vars, rhs bit)]; free variables 0."""
    pivots = []  # (col, mask, rhs)
    for mask, rhs in rows:
        for col, pm, pr in pivots:
            if mask >> col & 1:
                mask ^= pm
                rhs ^= pr
        if mask == 0:
            if rhs:
                return None
            continue
        col = mask.bit_length() - 1
        new = []
        for c2, pm, pr in pivots:
            if pm >> col & 1:
                pm ^= mask
                pr ^= rhs
            new.append((c2, pm, pr))
        pivots = new + [(col, mask, rhs)]
    x = 0
    for col, mask, rhs in pivots:
        # mask has only this pivot among pivot columns; free vars are zero
        if rhs:
            x |= 1 << col
    return x


def _correction_system(g: OpenGraph, bits: _Bits, v, solved: set, no_odd=()):
    """Linear constraints on ``p(v)`` when exactly the vertices in ``solved`` come later."""
    lam = g.planes
    allowed = [u for u in g.non_inputs if u in solved or u == v or lam.get(u) in ("X", "Y")]
    var_of = {u: i for i, u in enumerate(allowed)}
    cols = [bits.adj[bits.index[u]] for u in allowed]

    def odd_row(w):
        bw = bits.index[w]
        m = 0
        for i, col in enumerate(cols):
            if col >> bw & 1:
                m |= 1 << i
        return m

    rows = []
    for w in g.vertices:
        if w in solved or w == v:
            continue
        lw = lam.get(w)
        if lw == "Y":
            m = odd_row(w)
            if w in var_of:
                m ^= 1 << var_of[w]
            rows.append((m, 0))
        elif lw != "Z":
            rows.append((odd_row(w), 0))
    for f in no_odd:
        if f != v and f in solved:
            rows.append((odd_row(f), 0))
    lv = lam[v]
    own = 1 << var_of[v] if v in var_of else 0
    if lv == "XY":
        rows += [(own, 0), (odd_row(v), 1)]
    elif lv == "XZ":
        rows += [(own, 1), (odd_row(v), 1)]
    elif lv == "YZ":
        rows += [(own, 1), (odd_row(v), 0)]
    elif lv == "X":
        rows.append((odd_row(v), 1))
    elif lv == "Z":
        rows.append((own, 1))
    elif lv == "Y":
        rows.append((odd_row(v) ^ own, 1))
    return allowed, rows


def find_pauli_flow(g: OpenGraph, no_odd=(), first=()) -> FlowCertificate | None:
    """Maximally delayed layered Pauli-flow search.

    Each round solves every remaining vertex whose system is consistent given
    the vertices already placed later.  Growing the solved set only removes
    constraints, so the greedy rounds find a flow whenever one exists.
    ``first`` lists vertices that must precede every other vertex.

    Returns a certificate with ``layers`` or None when no flow exists.
    """
    no_odd = tuple(no_odd)
    first = set(first)
    bits = _Bits(g)
    solved = set(g.outputs)
    depth = {v: 0 for v in g.outputs}
    p = {}
    todo = [v for v in g.measured if v not in first]
    d = 0
    while True:
        if not todo:
            if not first:
                break
            todo, first = sorted(first, key=g.vertices.index), set()
        d += 1
        found = {}
        for v in todo:
            allowed, rows = _correction_system(g, bits, v, solved, no_odd)
            x = _solve_gf2(rows, len(allowed))
            if x is not None:
                found[v] = frozenset(u for i, u in enumerate(allowed) if x >> i & 1)
        if not found:
            return None
        for v, s in found.items():
            p[v] = s
            depth[v] = d
        solved |= set(found)
        todo = [v for v in todo if v not in found]
    top = max(depth.values(), default=0)
    return FlowCertificate(p, {v: top - k for v, k in depth.items()})


def _local_ok(lv: str, in_s: bool, in_odd: bool) -> bool:
    return {
        "XY": not in_s and in_odd,
        "XZ": in_s and in_odd,
        "YZ": in_s and not in_odd,
        "X": in_odd,
        "Z": in_s,
        "Y": in_s != in_odd,
    }[lv]


def _candidates(g: OpenGraph, bits: _Bits, v, no_odd) -> list:
    """Minimal (after-set, p) pairs for vertex ``v``, as bitmasks."""
    lam = g.planes
    vi = bits.index[v]
    pool = [bits.index[u] for u in g.non_inputs]
    xy_mask = bits.mask(u for u in g.vertices if lam.get(u) in ("X", "Y"))
    yz_mask = bits.mask(u for u in g.vertices if lam.get(u) in ("Y", "Z"))
    y_mask = bits.mask(u for u in g.vertices if lam.get(u) == "Y")
    forbid = bits.mask(f for f in no_odd if f != v)
    me = 1 << vi
    sigs = {}
    for r in range(len(pool) + 1):
        for combo in itertools.combinations(pool, r):
            s = 0
            for i in combo:
                s |= 1 << i
            odd = bits.odd(s)
            if not _local_ok(lam[v], bool(s & me), bool(odd & me)) or odd & forbid:
                continue
            after = ((s & ~xy_mask) | (odd & ~yz_mask) | ((s ^ odd) & y_mask)) & ~me
            sigs.setdefault(after, s)
    keys = list(sigs)
    minimal = [k for k in keys if not any(o != k and o & ~k == 0 for o in keys)]
    return [(a, sigs[a]) for a in minimal]


def exhaustive_pauli_flow(g: OpenGraph, no_odd=(), first=()) -> FlowCertificate | None:
    """Search all correction sets and measurement orders (small graphs only).

    Independent of the layered finder.  Refining the order only weakens the
    conditions, so linear orders suffice; a dynamic programme over the set of
    vertices already placed later decides which vertex may come next, given
    explicitly enumerated correction sets.
    """
    if len(g.measured) > EXHAUSTIVE_LIMIT:
        raise SearchLimitExceeded(f"exhaustive search limited to {EXHAUSTIVE_LIMIT} measured vertices")
    bits = _Bits(g)
    cands = {v: _candidates(g, bits, v, no_odd) for v in g.measured}
    if any(not c for c in cands.values()):
        return None
    first = set(first)
    meas = list(g.measured)
    outs = bits.mask(g.outputs)
    rest = bits.mask(v for v in meas if v not in first)
    full = bits.mask(meas)
    prev = {0: None}
    frontier = [0]
    while frontier and full not in prev:
        nxt = []
        for placed in frontier:
            later = placed | outs
            for v in meas:
                vb = 1 << bits.index[v]
                if placed & vb or (v in first and placed & rest != rest):
                    continue
                s = next((s for after, s in cands[v] if after & ~later == 0), None)
                if s is None:
                    continue
                key = placed | vb
                if key not in prev:
                    prev[key] = (placed, v, s)
                    nxt.append(key)
        frontier = nxt
    if full not in prev:
        return None
    p, order, key = {}, [], full
    while key:
        key, v, s = prev[key]
        p[v] = bits.verts(s)
        order.append(v)
    # vertices were placed from the last measured backwards
    layers = {v: i for i, v in enumerate(order)}
    layers.update({o: len(order) for o in g.outputs})
    return FlowCertificate(p, layers)


def find_gflow(g: OpenGraph) -> FlowCertificate | None:
    """Gflow via the Pauli-flow finder (identical conditions on plane labels)."""
    if any(g.planes[v] not in PLANE_LABELS for v in g.measured):
        raise FlowError("gflow needs plane labels only")
    return find_pauli_flow(g)


# ---------------------------------------------------------------------------
# Fusion networks


@dataclass(frozen=True)
class Fusion:
    a: object
    b: object
    plane: str = "X"
    angle: float = 0.0
    name: object = None


@dataclass
class FusionNetwork:
    """Resource open graph with fusions and per-vertex Clifford parameters.

    ``graph.planes`` labels the single-qubit measurements.  For XY networks
    (fusion labels X/Y only) use :meth:`xy`, which sets ``c(v)`` to the
    number of Y fusions on ``v`` modulo 4.
    """

    graph: OpenGraph
    fusions: list = field(default_factory=list)
    clifford: dict = field(default_factory=dict)

    def __post_init__(self):
        fs = []
        for i, f in enumerate(self.fusions):
            if not isinstance(f, Fusion):
                f = Fusion(*f)
            if f.name is None:
                f = Fusion(f.a, f.b, f.plane, f.angle, f"f{i}")
            fs.append(f)
        self.fusions = fs
        names = [f.name for f in fs]
        if len(set(names)) != len(names) or set(names) & set(self.graph.vertices):
            raise FlowError("fusion names must be distinct from each other and from vertices")
        for f in fs:
            if f.a == f.b:
                raise FlowError("fusion needs two distinct vertices")
            for x in (f.a, f.b):
                if x not in self.graph.vertices or x in self.graph.outputs:
                    raise FlowError(f"fusion endpoint {x!r} must be a non-output vertex")
            if f.plane not in LABELS:
                raise FlowError(f"bad fusion label {f.plane!r}")

    @classmethod
    def xy(cls, graph: OpenGraph, fusions) -> "FusionNetwork":
        net = cls(graph, list(fusions))
        if not net.is_xy:
            raise FlowError("XY network fusions must be labelled X or Y")
        c = {}
        for f in net.fusions:
            if f.plane == "Y":
                for x in (f.a, f.b):
                    c[x] = (c.get(x, 0) + 1) % 4
        net.clifford = c
        return net

    @property
    def is_xy(self) -> bool:
        return all(f.plane in ("X", "Y") for f in self.fusions)

    def fusion_nodes(self, plane=None) -> list:
        return [f.name for f in self.fusions if plane is None or f.plane == plane]

    def to_json(self) -> dict:
        return {
            "graph": self.graph.to_json(),
            "fusions": [{"a": f.a, "b": f.b, "plane": f.plane, "angle": f.angle, "name": f.name} for f in self.fusions],
            "clifford": {str(v): c for v, c in self.clifford.items()},
            "xy": self.is_xy and self.clifford == FusionNetwork.xy(self.graph, self.fusions).clifford,
        }

    @classmethod
    def from_json(cls, data) -> "FusionNetwork":
        try:
            g = OpenGraph.from_json(data["graph"])
            by_name = {str(v): v for v in g.vertices}
            fs = [Fusion(by_name[str(f["a"])], by_name[str(f["b"])], f.get("plane", "X").upper(),
                         float(f.get("angle", 0.0)), f.get("name")) for f in data.get("fusions", [])]
            if data.get("xy", "clifford" not in data):
                return cls.xy(g, fs)
            return cls(g, fs, {by_name[k]: int(c) for k, c in data.get("clifford", {}).items()})
        except (KeyError, TypeError, AttributeError) as exc:
            raise FlowError(f"malformed fusion network JSON: {exc}") from exc


def target_open_graph(n: FusionNetwork) -> OpenGraph:
    """Add a measured node per fusion and apply the Clifford relabelling."""
    g = n.graph
    planes, angles = {}, {}
    for v in g.measured:
        planes[v], angles[v] = clifford_relabel(g.planes[v], g.angles[v], n.clifford.get(v, 0))
    vertices = list(g.vertices)
    edges = set(g.edges)
    for f in n.fusions:
        vertices.append(f.name)
        edges |= {_edge(f.name, f.a), _edge(f.name, f.b)}
        planes[f.name] = f.plane
        angles[f.name] = f.angle if f.plane not in PAULI_LABELS else 0.0
    return OpenGraph(vertices, edges, g.inputs, g.outputs, planes, angles)


def _merge_labels(members: list, planes: dict, angles: dict, internal_edges: int):
    """Label of a vertex obtained by fusing spiders with the given labels."""
    z_like = [m for m in members if effect_label(planes[m], angles[m])[0] == "XY"]
    others = [m for m in members if m not in z_like]
    phase = sum(effect_label(planes[m], angles[m])[1] for m in z_like) + math.pi * internal_edges
    all_pauli = all(planes[m] in PAULI_LABELS for m in members)
    if len(others) > 1:
        raise FlowError(f"cannot merge several non-XY measurements {others}")
    if others:
        o = others[0]
        q = phase / HALF_PI
        if abs(q - round(q)) > 1e-9:
            raise FlowError("merging a non-Clifford phase into an XZ/YZ/Z measurement")
        return clifford_relabel(planes[o], angles[o], int(round(q)))
    if all_pauli:
        lab = pauli_label("XY", phase)
        assert lab is not None
        return lab
    return "XY", phase % TWO_PI


def simplified_target_graph(n: FusionNetwork) -> OpenGraph:
    """X fusions merge their endpoints; Y fusions toggle a Hadamard edge.

    A merged class is named by its X-fusion names joined with ``+`` (or by its
    single fusion's name) and inherits the symmetric difference of the members'
    neighbourhoods.  Edges inside a class contribute a pi phase each.
    """
    if not n.is_xy:
        raise FlowError("simplified target graph needs an XY network")
    g = n.graph
    parent = {v: v for v in g.vertices}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    xfs = [f for f in n.fusions if f.plane == "X"]
    for f in xfs:
        ra, rb = find(f.a), find(f.b)
        if ra == rb:
            # the redundant fusion's outcome-1 branch vanishes, which no graph captures
            raise FlowError(f"X fusions form a cycle at {f.name!r}")
        parent[ra] = rb
    classes = {}
    for v in g.vertices:
        classes.setdefault(find(v), []).append(v)
    names = {}
    for root, members in classes.items():
        if len(members) == 1:
            names[root] = members[0]
            continue
        fnames = [f.name for f in xfs if find(f.a) == root]
        names[root] = fnames[0] if len(fnames) == 1 else "+".join(map(str, fnames))
    rep = {v: names[find(v)] for v in g.vertices}

    vertices, planes, angles = [], {}, {}
    inputs, outputs = set(), set()
    for v in g.vertices:
        r = rep[v]
        if r in vertices:
            continue
        vertices.append(r)
        members = classes[find(v)]
        ins = [m for m in members if m in g.inputs]
        outs = [m for m in members if m in g.outputs]
        if len(ins) > 1 or len(outs) > 1:
            raise FlowError("X fusion would merge two inputs or two outputs")
        if ins:
            inputs.add(r)
        if outs:
            outputs.add(r)
        internal = sum(1 for e in g.edges if all(find(x) == find(v) for x in e))
        if outs:
            if any(g.planes[m] != "X" or g.angles[m] for m in members if m not in g.outputs) or internal % 2:
                raise FlowError("output merged with a non-trivially measured vertex")
            continue
        planes[r], angles[r] = _merge_labels(members, g.planes, g.angles, internal)

    edges = set()
    for e in g.edges:
        a, b = (rep[x] for x in e)
        if a != b:
            edges ^= {_edge(a, b)}
    for f in n.fusions:
        if f.plane == "Y":
            a, b = rep[f.a], rep[f.b]
            if a == b:
                raise FlowError("Y fusion inside an X-fused class")
            edges ^= {_edge(a, b)}
    return OpenGraph(vertices, edges, inputs, outputs, planes, angles)


def verify_xy_flow(n: FusionNetwork, cert: FlowCertificate) -> Verdict:
    if not n.is_xy:
        return Verdict(False, "network", None, "not an XY network")
    return verify_pauli_flow(target_open_graph(n), cert, no_odd=n.fusion_nodes("X"))


def find_xy_flow(n: FusionNetwork) -> FlowCertificate | None:
    """Pauli flow on the target graph with no X-fusion node in any odd neighbourhood.

    Fusion nodes are placed before every other vertex, so the certificate
    orders all fusions ahead of the single-qubit measurements.
    """
    if not n.is_xy:
        raise FlowError("XY-flow is defined for XY networks")
    return find_pauli_flow(target_open_graph(n), no_odd=n.fusion_nodes("X"), first=n.fusion_nodes())


# ---------------------------------------------------------------------------
# Flow-preserving rewrites


def _lc_own_label(plane: str, angle: float) -> tuple:
    """Label of ``u`` itself after local complementation about ``u``."""
    if plane in PAULI_LABELS:
        lab = pauli_label(*_lc_own_label(*effect_label(plane, angle)))
        assert lab is not None
        return lab
    if plane == "XY":
        return "XZ", (HALF_PI - angle) % TWO_PI
    if plane == "XZ":
        return "XY", (angle - HALF_PI) % TWO_PI
    return "YZ", (angle + HALF_PI) % TWO_PI


def local_complement(g: OpenGraph, u) -> OpenGraph:
    """``G * u`` with labels adjusted so the target map is unchanged.

    Uses ``|G*u> ~ X(-pi/2)_u Z(pi/2)_N(u) |G>``: ``u`` gets the own-vertex
    table and each measured neighbour behaves as if its Clifford parameter
    were 3.  Unmeasured boundary vertices in ``N[u]`` keep those rotations on
    their wires.
    """
    if u not in g.vertices or u in g.inputs:
        # an input leg on u blocks the X rotation
        raise FlowError("local complementation needs a non-input vertex")
    h = g.copy()
    nb = [w for w in g.vertices if w in g.neighbours(u)]
    for a, b in itertools.combinations(nb, 2):
        h.toggle_edge(a, b)
    if u in h.planes:
        h.planes[u], h.angles[u] = _lc_own_label(h.planes[u], h.angles[u])
    for w in nb:
        if w in h.planes:
            h.planes[w], h.angles[w] = clifford_relabel(h.planes[w], h.angles[w], 3)
    return h


def pivot(g: OpenGraph, u, v) -> OpenGraph:
    """``G ^ uv``, as local complementation about ``u``, ``v``, ``u``."""
    if not g.has_edge(u, v):
        raise FlowError("pivot needs an edge")
    return local_complement(local_complement(local_complement(g, u), v), u)


def copy_z(g: OpenGraph, u) -> OpenGraph:
    """Delete a Z-measured vertex; its outcome phase copies onto the neighbours.

    A Z label with angle ``a`` (0 or pi) adds ``a`` to each neighbour's spider;
    unmeasured neighbours keep a ``Z^(a/pi)`` on their wire.
    """
    if g.planes.get(u) != "Z" or u in g.inputs:
        raise FlowError("copy_z needs a non-input Z-measured vertex")
    c = 2 * int(round(g.angles[u] / math.pi)) % 4
    h = g.copy()
    nb = g.neighbours(u)
    h.vertices.remove(u)
    h.edges = {e for e in h.edges if u not in e}
    del h.planes[u], h.angles[u]
    for w in nb:
        if w in h.planes:
            h.planes[w], h.angles[w] = clifford_relabel(h.planes[w], h.angles[w], c)
    return OpenGraph(h.vertices, h.edges, h.inputs, h.outputs, h.planes, h.angles)


def x_fusion_split(g: OpenGraph, triple, b_neighbours=()) -> OpenGraph:
    """Unfuse vertex ``a`` into ``a - f - b`` with ``f``, ``b`` measured in X.

    ``triple = (a, f, b)`` names the kept vertex and the two new ones;
    ``b_neighbours`` move from ``a`` to ``b``.
    """
    a, f, b = triple
    if a not in g.vertices or f in g.vertices or b in g.vertices or f == b:
        raise FlowError("x_fusion_split needs an existing vertex and two fresh names")
    nb = set(b_neighbours)
    if not nb <= g.neighbours(a):
        raise FlowError("moved neighbours must be neighbours of the split vertex")
    h = g.copy()
    h.vertices += [f, b]
    for w in nb:
        h.toggle_edge(a, w)
        h.toggle_edge(b, w)
    h.edges |= {_edge(a, f), _edge(f, b)}
    h.planes[f] = h.planes[b] = "X"
    h.angles[f] = h.angles[b] = 0.0
    return OpenGraph(h.vertices, h.edges, h.inputs, h.outputs, h.planes, h.angles)


def y_fusion_insert(g: OpenGraph, pair, name="f") -> OpenGraph:
    """Replace the edge ``a - b`` by a Y-measured node joined to both.

    ``a`` and ``b`` are relabelled as if they carried Clifford parameter 1.
    """
    a, b = pair
    if not g.has_edge(a, b):
        raise FlowError("y_fusion_insert needs an edge between the pair")
    if a in g.outputs or b in g.outputs:
        raise FlowError("y_fusion_insert endpoints must be measured")
    if name in g.vertices:
        raise FlowError(f"vertex {name!r} already exists")
    h = g.copy()
    h.toggle_edge(a, b)
    h.vertices.append(name)
    h.edges |= {_edge(name, a), _edge(name, b)}
    h.planes[name], h.angles[name] = "Y", 0.0
    for x in (a, b):
        h.planes[x], h.angles[x] = clifford_relabel(h.planes[x], h.angles[x], 1)
    return OpenGraph(h.vertices, h.edges, h.inputs, h.outputs, h.planes, h.angles)


def destructive_inflate(n: FusionNetwork) -> FusionNetwork:
    """Give every fusion endpoint its own X-measured path ``a - u - v``.

    The fusion moves to the fresh ``v`` vertices, so each vertex is used by
    at most one fusion and every fused vertex is measured in X.
    """
    g = n.graph.copy()
    fusions = []
    for f in n.fusions:
        ends = []
        for i, x in enumerate((f.a, f.b)):
            u, v = f"{f.name}.u{i}", f"{f.name}.v{i}"
            if u in g.vertices or v in g.vertices:
                raise FlowError(f"name clash inflating {f.name}")
            g.vertices += [u, v]
            g.edges |= {_edge(x, u), _edge(u, v)}
            g.planes[u] = g.planes[v] = "X"
            g.angles[u] = g.angles[v] = 0.0
            ends.append(v)
        fusions.append(Fusion(ends[0], ends[1], f.plane, f.angle, f.name))
    g = OpenGraph(g.vertices, g.edges, g.inputs, g.outputs, g.planes, g.angles)
    if n.is_xy and n.clifford == FusionNetwork.xy(n.graph, n.fusions).clifford:
        return FusionNetwork.xy(g, fusions)
    return FusionNetwork(g, fusions, dict(n.clifford))


# ---------------------------------------------------------------------------
# Target maps


def target_map_diagram(g: OpenGraph, outcomes: dict | None = None) -> zx.ZxDiagram:
    """``prod <+_{lambda, alpha}| E_G N`` as a ZX diagram (inputs -> outputs).

    ``outcomes`` maps measured vertices to 0/1 (default all 0).  Inputs and
    outputs follow the vertex order.
    """
    outcomes = outcomes or {}
    ins = [v for v in g.vertices if v in g.inputs]
    outs_all = list(g.vertices)
    d = zx.graph_state_diagram(g.vertices, [tuple(e) for e in g.edges], inputs=ins, outputs=outs_all)
    effects = {}
    for pos, v in enumerate(outs_all):
        if v in g.outputs:
            continue
        plane, ang = effect_label(g.planes[v], g.angles[v])
        ang += math.pi * outcomes.get(v, 0)
        effects[pos] = zx.measurement_effect(plane, ang)
    return zx.plug_outputs(d, effects)


def target_linear_map(g: OpenGraph, outcomes: dict | None = None) -> np.ndarray:
    return zx.eval_tensor(target_map_diagram(g, outcomes))


def random_open_graph(rng, n: int, p_edge: float = 0.5, n_in: int = 1, n_out: int = 1,
                      labels=LABELS, angles: bool = True) -> OpenGraph:
    """Random labelled open graph on vertices ``0..n-1``; ``rng`` is a ``random.Random``."""
    vs = list(range(n))
    edges = {(a, b) for a, b in itertools.combinations(vs, 2) if rng.random() < p_edge}
    order = list(vs)
    rng.shuffle(order)
    outs = set(order[:n_out])
    ins = set(order[n_out:n_out + n_in])
    planes, angs = {}, {}
    for v in vs:
        if v in outs:
            continue
        planes[v] = rng.choice(labels)
        angs[v] = 0.0 if planes[v] in PAULI_LABELS or not angles else rng.random() * TWO_PI
    return OpenGraph(vs, edges, ins, outs, planes, angs)


def random_xy_network(rng, n: int, n_fusions: int, p_edge: float = 0.5, n_in: int = 1, n_out: int = 1,
                      labels=LABELS, tries: int = 1000) -> FusionNetwork:
    """Random XY network whose simplified target graph is defined.

    Resamples until the X fusions form a forest and every merged class is
    representable (see :func:`simplified_target_graph`).
    """
    if n - n_out < 2:
        raise ValueError("need at least two measured vertices")
    for _ in range(tries):
        g = random_open_graph(rng, n, p_edge, n_in, n_out, labels)
        meas = g.measured
        fs = [Fusion(*rng.sample(meas, 2), rng.choice("XY"), 0.0, f"f{i}") for i in range(n_fusions)]
        net = FusionNetwork.xy(g, fs)
        try:
            simplified_target_graph(net)
        except FlowError:
            continue
        return net
    raise FlowError("no valid XY network found; relax the parameters")
