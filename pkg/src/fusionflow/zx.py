"""ZX diagrams with Boolean-affine phases, exact scalars and tensor evaluation.

Spiders carry a static phase plus a set of Boolean outcome variables, each
contributing ``pi`` when set.  Scalars are tracked as a power of
``1/sqrt(2)`` (stars), a complex factor and a set of sign variables.

Linear maps are returned as matrices of shape ``(2**n_out, 2**n_in)`` with
qubit 0 as the most significant bit, so that composition is a matrix
product.
"""

from __future__ import annotations

import cmath
import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping

import numpy as np

TOL = 1e-9
SQRT2 = math.sqrt(2.0)
_MAX_DEN = 8

Z, X, B = "Z", "X", "B"

_H = np.array([[1.0, 1.0], [1.0, -1.0]], dtype=complex) / SQRT2


class ZxError(ValueError):
    """Malformed diagram or invalid operation."""


class RewriteError(ZxError):
    """Raised when a rewrite site does not match the rule's left-hand side."""


class UnassignedVariable(ZxError):
    """Raised when evaluation needs a variable that was not assigned."""


# ---------------------------------------------------------------------------
# Phases


def _as_pi_fraction(radians: float) -> Fraction | None:
    x = (radians / math.pi) % 2.0
    frac = Fraction(x).limit_denominator(_MAX_DEN)
    if abs(float(frac) - x) < 1e-12:
        return frac % 2
    if abs(x - 2.0) < 1e-12:
        return Fraction(0)
    return None


@dataclass(frozen=True)
class Phase:
    """Static angle plus an XOR set of Boolean variables (each worth ``pi``).

    ``value`` is a :class:`~fractions.Fraction` multiple of ``pi`` when the
    angle is a rational multiple with denominator at most 8, and a float in
    radians otherwise.
    """

    value: Fraction | float = Fraction(0)
    pi_vars: frozenset = frozenset()

    def __post_init__(self):
        v = self.value
        if isinstance(v, Fraction):
            object.__setattr__(self, "value", v % 2)
        else:
            frac = _as_pi_fraction(float(v))
            object.__setattr__(self, "value", frac if frac is not None else float(v) % (2 * math.pi))
        object.__setattr__(self, "pi_vars", frozenset(self.pi_vars))

    @classmethod
    def pi(cls, num: int | Fraction = 1, den: int = 1, pi_vars: Iterable = ()) -> "Phase":
        return cls(Fraction(num) / den, frozenset(pi_vars))

    @classmethod
    def of(cls, x) -> "Phase":
        """Coerce a float (radians), Fraction (units of pi) or Phase."""
        if isinstance(x, Phase):
            return x
        return cls(x)

    @property
    def radians(self) -> float:
        if isinstance(self.value, Fraction):
            return float(self.value) * math.pi
        return self.value

    @property
    def is_exact(self) -> bool:
        return isinstance(self.value, Fraction)

    def static_multiple(self, den: int) -> int | None:
        """Return ``m`` if the static part equals ``m * pi / den`` exactly."""
        if isinstance(self.value, Fraction):
            q = self.value * den
            return int(q) % (2 * den) if q.denominator == 1 else None
        q = self.value / math.pi * den
        r = round(q)
        return r % (2 * den) if abs(q - r) < 1e-9 else None

    def is_zero(self) -> bool:
        return not self.pi_vars and self.static_multiple(1) == 0

    def is_pauli(self) -> bool:
        return self.static_multiple(1) is not None

    def is_proper_clifford(self) -> bool:
        m = self.static_multiple(2)
        return m is not None and m % 2 == 1

    def __add__(self, other) -> "Phase":
        other = Phase.of(other)
        if isinstance(self.value, Fraction) and isinstance(other.value, Fraction):
            val = self.value + other.value
        else:
            val = self.radians + other.radians
        return Phase(val, self.pi_vars ^ other.pi_vars)

    def __neg__(self) -> "Phase":
        if isinstance(self.value, Fraction):
            return Phase(-self.value, self.pi_vars)
        return Phase(-self.value, self.pi_vars)

    def __sub__(self, other) -> "Phase":
        return self + (-Phase.of(other))

    def add_vars(self, pi_vars: Iterable) -> "Phase":
        return Phase(self.value, self.pi_vars ^ frozenset(pi_vars))

    def substitute(self, assign: Mapping) -> "Phase":
        hit = [v for v in self.pi_vars if v in assign]
        if not hit:
            return self
        flips = sum(int(assign[v]) for v in hit) % 2
        rest = self.pi_vars - frozenset(hit)
        return Phase(self.value, rest) + (Phase.pi(1) if flips else Phase())

    def evaluate(self, assign: Mapping) -> float:
        missing = [v for v in self.pi_vars if v not in assign]
        if missing:
            raise UnassignedVariable(f"unassigned variable {sorted(map(str, missing))[0]!r}")
        flips = sum(int(assign[v]) for v in self.pi_vars) % 2
        return self.radians + math.pi * flips

    def close_to(self, other: "Phase", tol: float = TOL) -> bool:
        if self.pi_vars != other.pi_vars:
            return False
        d = (self.radians - other.radians) % (2 * math.pi)
        return min(d, 2 * math.pi - d) < tol

    def to_pi_pair(self) -> tuple:
        if isinstance(self.value, Fraction):
            return self.value.numerator, self.value.denominator
        return self.value / math.pi, 1

    def __str__(self) -> str:
        if isinstance(self.value, Fraction):
            base = "0" if self.value == 0 else f"{self.value}π"
        else:
            base = f"{self.value:.6g}"
        if self.pi_vars:
            return base + "+" + "+".join(f"{v}π" for v in sorted(map(str, self.pi_vars)))
        return base


# ---------------------------------------------------------------------------
# Scalars


@dataclass(frozen=True)
class Scalar:
    """``(1/sqrt 2)**stars * factor * (-1)**(xor of sign_vars)``."""

    stars: int = 0
    factor: complex = 1.0 + 0.0j
    sign_vars: frozenset = frozenset()

    def __mul__(self, other: "Scalar") -> "Scalar":
        return Scalar(self.stars + other.stars, self.factor * other.factor, self.sign_vars ^ other.sign_vars)

    def with_stars(self, k: int) -> "Scalar":
        return Scalar(self.stars + k, self.factor, self.sign_vars)

    def times(self, c: complex) -> "Scalar":
        return Scalar(self.stars, self.factor * c, self.sign_vars)

    def with_signs(self, vs: Iterable) -> "Scalar":
        return Scalar(self.stars, self.factor, self.sign_vars ^ frozenset(vs))

    def substitute(self, assign: Mapping) -> "Scalar":
        hit = [v for v in self.sign_vars if v in assign]
        if not hit:
            return self
        flip = sum(int(assign[v]) for v in hit) % 2
        return Scalar(self.stars, -self.factor if flip else self.factor, self.sign_vars - frozenset(hit))

    def evaluate(self, assign: Mapping) -> complex:
        missing = [v for v in self.sign_vars if v not in assign]
        if missing:
            raise UnassignedVariable(f"unassigned variable {sorted(map(str, missing))[0]!r}")
        flip = sum(int(assign[v]) for v in self.sign_vars) % 2
        return (SQRT2 ** -self.stars) * self.factor * (-1 if flip else 1)


# ---------------------------------------------------------------------------
# Diagrams


@dataclass(frozen=True)
class Spider:
    id: object
    color: str
    phase: Phase = Phase()


class ZxDiagram:
    """Open graph of Z/X spiders with plain and Hadamard edges.

    Boundary ports are represented by degree-one vertices of color ``"B"``
    listed in ``inputs`` and ``outputs``.  Construction helpers mutate the
    instance; every public operation in this module returns a new diagram
    and leaves its arguments untouched.
    """

    def __init__(self):
        self.spiders: dict = {}
        self.edges: dict = {}  # edge id -> (a, b, hadamard)
        self.inputs: list = []
        self.outputs: list = []
        self.scalar = Scalar()
        self._next_id = 0
        self._next_edge = 0

    # -- construction -----------------------------------------------------
    def _fresh(self):
        while self._next_id in self.spiders:
            self._next_id += 1
        vid = self._next_id
        self._next_id += 1
        return vid

    def add_spider(self, color: str, phase=Phase(), vid=None):
        if color not in (Z, X, B):
            raise ZxError(f"unknown spider color {color!r}")
        if vid is None:
            vid = self._fresh()
        elif vid in self.spiders:
            raise ZxError(f"duplicate spider id {vid!r}")
        self.spiders[vid] = Spider(vid, color, Phase.of(phase))
        return vid

    def add_input(self, vid=None):
        vid = self.add_spider(B, vid=vid)
        self.inputs.append(vid)
        return vid

    def add_output(self, vid=None):
        vid = self.add_spider(B, vid=vid)
        self.outputs.append(vid)
        return vid

    def add_edge(self, a, b, hadamard: bool = False):
        if a not in self.spiders or b not in self.spiders:
            raise ZxError(f"edge endpoint missing: {a!r}-{b!r}")
        eid = self._next_edge
        self._next_edge += 1
        self.edges[eid] = (a, b, bool(hadamard))
        return eid

    def set_phase(self, vid, phase):
        s = self.spiders[vid]
        self.spiders[vid] = Spider(vid, s.color, Phase.of(phase))

    def remove_spider(self, vid):
        for eid in self.incident(vid):
            del self.edges[eid]
        del self.spiders[vid]

    def copy(self) -> "ZxDiagram":
        d = ZxDiagram()
        d.spiders = dict(self.spiders)
        d.edges = dict(self.edges)
        d.inputs = list(self.inputs)
        d.outputs = list(self.outputs)
        d.scalar = self.scalar
        d._next_id = self._next_id
        d._next_edge = self._next_edge
        return d

    # -- queries ------------------------------------------------------------
    def incident(self, vid) -> list:
        return [eid for eid, (a, b, _) in self.edges.items() if a == vid or b == vid]

    def degree(self, vid) -> int:
        return sum((a == vid) + (b == vid) for a, b, _ in self.edges.values())

    def neighbours(self, vid) -> list:
        out = []
        for a, b, _ in self.edges.values():
            if a == vid and b != vid:
                out.append(b)
            elif b == vid and a != vid:
                out.append(a)
        return out

    def edges_between(self, u, v) -> list:
        return [eid for eid, (a, b, _) in self.edges.items() if {a, b} == {u, v} and (u != v or a == b)]

    def variables(self) -> set:
        vs = set(self.scalar.sign_vars)
        for s in self.spiders.values():
            vs |= s.phase.pi_vars
        return vs

    @property
    def n_inputs(self) -> int:
        return len(self.inputs)

    @property
    def n_outputs(self) -> int:
        return len(self.outputs)

    def __repr__(self) -> str:
        return (
            f"ZxDiagram({len(self.spiders)} spiders, {len(self.edges)} edges, "
            f"{self.n_inputs}->{self.n_outputs})"
        )

    # -- serialisation --------------------------------------------------------
    def to_json(self) -> dict:
        spiders = []
        for s in self.spiders.values():
            num, den = s.phase.to_pi_pair()
            spiders.append(
                {"id": s.id, "color": s.color, "angle_num": num, "angle_den": den,
                 "pi_vars": sorted(map(str, s.phase.pi_vars))}
            )
        return {
            "spiders": spiders,
            "edges": [{"a": a, "b": b, "h": h} for a, b, h in self.edges.values()],
            "inputs": list(self.inputs),
            "outputs": list(self.outputs),
            "scalar": {
                "stars": self.scalar.stars,
                "re": self.scalar.factor.real,
                "im": self.scalar.factor.imag,
                "sign_vars": sorted(map(str, self.scalar.sign_vars)),
            },
        }

    @classmethod
    def from_json(cls, data) -> "ZxDiagram":
        if isinstance(data, str):
            data = json.loads(data)
        d = cls()
        try:
            for s in data["spiders"]:
                num, den = s.get("angle_num", 0), s.get("angle_den", 1)
                if isinstance(num, int) and isinstance(den, int):
                    val = Fraction(num, den)
                else:
                    val = float(num) / float(den) * math.pi
                d.add_spider(s["color"], Phase(val, frozenset(s.get("pi_vars", []))), vid=s["id"])
            for e in data["edges"]:
                d.add_edge(e["a"], e["b"], bool(e.get("h", False)))
            d.inputs = list(data.get("inputs", []))
            d.outputs = list(data.get("outputs", []))
            sc = data.get("scalar", {})
            d.scalar = Scalar(
                int(sc.get("stars", 0)),
                complex(sc.get("re", 1.0), sc.get("im", 0.0)),
                frozenset(sc.get("sign_vars", [])),
            )
        except (KeyError, TypeError) as exc:
            raise ZxError(f"malformed diagram JSON: {exc}") from exc
        for p in d.inputs + d.outputs:
            if p not in d.spiders or d.spiders[p].color != B:
                raise ZxError(f"port {p!r} is not a boundary vertex")
        return d

    def to_dot(self) -> str:
        colors = {Z: "palegreen", X: "tomato", B: "white"}
        lines = ["graph zx {"]
        for s in self.spiders.values():
            shape = "point" if s.color == B else "circle"
            label = "" if s.color == B else str(s.phase)
            lines.append(f'  "{s.id}" [shape={shape}, style=filled, fillcolor={colors[s.color]}, label="{label}"];')
        for a, b, h in self.edges.values():
            style = ' [style=dashed, color=blue]' if h else ""
            lines.append(f'  "{a}" -- "{b}"{style};')
        lines.append("}")
        return "\n".join(lines)


# ---------------------------------------------------------------------------
# Basic diagrams


def spider(color: str, n_in: int, n_out: int, phase=Phase()) -> ZxDiagram:
    d = ZxDiagram()
    v = d.add_spider(color, phase)
    for _ in range(n_in):
        d.add_edge(d.add_input(), v)
    for _ in range(n_out):
        d.add_edge(v, d.add_output())
    return d


def z_spider(n_in: int, n_out: int, phase=Phase()) -> ZxDiagram:
    return spider(Z, n_in, n_out, phase)


def x_spider(n_in: int, n_out: int, phase=Phase()) -> ZxDiagram:
    return spider(X, n_in, n_out, phase)


def identity(n: int = 1) -> ZxDiagram:
    d = ZxDiagram()
    ins = [d.add_input() for _ in range(n)]
    outs = [d.add_output() for _ in range(n)]
    for i, o in zip(ins, outs):
        d.add_edge(i, o)
    return d


def hadamard() -> ZxDiagram:
    d = ZxDiagram()
    d.add_edge(d.add_input(), d.add_output(), hadamard=True)
    return d


def swap() -> ZxDiagram:
    d = ZxDiagram()
    i0, i1 = d.add_input(), d.add_input()
    o0, o1 = d.add_output(), d.add_output()
    d.add_edge(i0, o1)
    d.add_edge(i1, o0)
    return d


def cz() -> ZxDiagram:
    """Exact CZ: two Z spiders joined by a Hadamard edge, times sqrt 2."""
    d = ZxDiagram()
    a, b = d.add_spider(Z), d.add_spider(Z)
    d.add_edge(d.add_input(), a)
    d.add_edge(d.add_input(), b)
    d.add_edge(a, d.add_output())
    d.add_edge(b, d.add_output())
    d.add_edge(a, b, hadamard=True)
    d.scalar = Scalar(-1)
    return d


def scalar_diagram(s: Scalar) -> ZxDiagram:
    d = ZxDiagram()
    d.scalar = s
    return d


def rotation(axis: str, angle) -> ZxDiagram:
    """Single-qubit phase gate ``diag(1, e^{i angle})`` in the Z or X basis."""
    return spider(Z if axis.upper() == "Z" else X, 1, 1, angle)


def euler(alpha, beta, gamma) -> ZxDiagram:
    """``Z(alpha)`` then ``X(beta)`` then ``Z(gamma)``, as a 1 -> 1 diagram."""
    return compose(compose(rotation("Z", alpha), rotation("X", beta)), rotation("Z", gamma))


class WireBuilder:
    """Grows a diagram wire by wire: every live wire key has an open end.

    An open end is ``(vertex, hadamard)``; the next thing attached to the
    wire connects to ``vertex`` through a Hadamard edge when ``hadamard`` is
    set.
    """

    def __init__(self, inputs=()):
        self.d = ZxDiagram()
        self.end: dict = {}
        for key in inputs:
            self.add_input(key)

    def copy(self) -> "WireBuilder":
        b = WireBuilder()
        b.d = self.d.copy()
        b.end = dict(self.end)
        return b

    def add_input(self, key):
        if key in self.end:
            raise ZxError(f"wire {key!r} already live")
        self.end[key] = (self.d.add_input(), False)

    def prepare(self, key, phase=Phase()):
        """Start a wire in the normalised state ``(|0> + e^{i phase}|1>)/sqrt 2``."""
        if key in self.end:
            raise ZxError(f"wire {key!r} already live")
        self.end[key] = (self.d.add_spider(Z, Phase.of(phase)), False)
        self.d.scalar = self.d.scalar.with_stars(1)

    def rename(self, mapping: Mapping):
        ends = {k: self.end.pop(k) for k in list(mapping)}
        for k, new in mapping.items():
            if new in self.end:
                raise ZxError(f"wire {new!r} already live")
            self.end[new] = ends[k]

    def _join(self, e1, e2, h):
        (v1, h1), (v2, h2) = e1, e2
        self.d.add_edge(v1, v2, bool(h1) ^ bool(h2) ^ bool(h))

    def splice(self, in_keys, sub: ZxDiagram, out_keys=None):
        """Attach ``sub``: its inputs consume ``in_keys``, its outputs become ``out_keys``.

        ``out_keys`` defaults to ``in_keys`` when the arities agree and to no
        wires for effects.
        """
        in_keys = list(in_keys)
        if out_keys is None:
            out_keys = in_keys if sub.n_outputs == len(in_keys) else []
        out_keys = list(out_keys)
        if sub.n_inputs != len(in_keys) or sub.n_outputs != len(out_keys):
            raise ZxError(f"splice arity: {sub.n_inputs}->{sub.n_outputs} on {len(in_keys)}->{len(out_keys)} wires")
        d = self.d
        mapping = {v: d.add_spider(sp.color, sp.phase) for v, sp in sub.spiders.items()
                   if v not in sub.inputs and v not in sub.outputs}
        port_nb = {}
        for a, b, h in sub.edges.values():
            for x, y in ((a, b), (b, a)):
                if x in sub.inputs or x in sub.outputs:
                    port_nb[x] = (y, h)
        for a, b, h in sub.edges.values():
            if a in mapping and b in mapping:
                d.add_edge(mapping[a], mapping[b], h)
        old = {pin: self.end.pop(key) for key, pin in zip(in_keys, sub.inputs)}
        new_end = {}
        done = set()
        for pin in sub.inputs:
            if pin in done:
                continue
            nb, h = port_nb[pin]
            if nb in mapping:
                self._join(old[pin], (mapping[nb], False), h)
            elif nb in sub.inputs:
                # cap between two inputs
                self._join(old[pin], old[nb], h)
                done.add(nb)
            else:
                v0, h0 = old[pin]
                new_end[nb] = (v0, h0 != h)
            done.add(pin)
        for pout in sub.outputs:
            if pout in new_end:
                continue
            nb, h = port_nb[pout]
            if nb in mapping:
                new_end[pout] = (mapping[nb], h)
            elif nb in sub.outputs:
                # cup between two outputs: a bare identity spider carries it
                w = d.add_spider(Z)
                new_end[pout] = (w, False)
                new_end[nb] = (w, h)
        for key, pout in zip(out_keys, sub.outputs):
            if key in self.end:
                raise ZxError(f"wire {key!r} already live")
            self.end[key] = new_end[pout]
        d.scalar = d.scalar * sub.scalar

    def finish(self, out_keys) -> ZxDiagram:
        """Close the listed wires as outputs (in order); every live wire must be listed."""
        out_keys = list(out_keys)
        if set(out_keys) != set(self.end) or len(out_keys) != len(self.end):
            raise ZxError(f"finish: live wires {sorted(map(str, self.end))} vs outputs {sorted(map(str, out_keys))}")
        d = self.d.copy()
        for key in out_keys:
            v, h = self.end[key]
            d.add_edge(v, d.add_output(), h)
        return d


# ---------------------------------------------------------------------------
# Evaluation


def _spider_tensor(color: str, phase_val: float, degree: int) -> np.ndarray:
    if degree == 0:
        return np.array(1 + cmath.exp(1j * phase_val))
    t = np.zeros((2,) * degree, dtype=complex)
    if color == Z:
        t[(0,) * degree] = 1
        t[(1,) * degree] += cmath.exp(1j * phase_val)
        return t
    parity = np.indices((2,) * degree).sum(axis=0) % 2
    return (1 + cmath.exp(1j * phase_val) * (1 - 2 * parity)) * SQRT2 ** -degree


def _trace_repeats(t: np.ndarray, labels: list) -> tuple:
    """Trace out labels occurring twice on the same tensor (self-loops)."""
    while True:
        seen = {}
        pair = None
        for pos, lab in enumerate(labels):
            if lab in seen:
                pair = (seen[lab], pos)
                break
            seen[lab] = pos
        if pair is None:
            return t, labels
        i, j = pair
        t = np.trace(t, axis1=i, axis2=j)
        labels = [lab for k, lab in enumerate(labels) if k not in (i, j)]


def _repeat_free(labels: list) -> list:
    return [lab for lab in labels if labels.count(lab) == 1]


def _plan(label_lists: tuple) -> list:
    """Greedy pairwise contraction order computed on labels alone."""
    work = {k: _repeat_free(list(ls)) for k, ls in enumerate(label_lists)}
    where: dict = {}
    for k, ls in work.items():
        for lab in ls:
            where.setdefault(lab, set()).add(k)
    steps = []
    nxt = len(work)
    while len(work) > 1:
        best = None
        for lab, ks in where.items():
            if len(ks) != 2:
                continue
            i, j = sorted(ks)
            li, lj = set(work[i]), set(work[j])
            key = (len(li ^ lj), -len(li & lj), i, j)
            if best is None or key < best:
                best = key
        if best is None:
            # disconnected pieces: outer product of the two smallest
            i, j = sorted(sorted(work, key=lambda k: (len(work[k]), k))[:2])
            merged = work[i] + work[j]
        else:
            i, j = best[2], best[3]
            merged = _repeat_free([lab for lab in work[i] if lab not in work[j]] + [lab for lab in work[j] if lab not in work[i]])
        steps.append((i, j, best is None))
        for k in (i, j):
            for lab in work.pop(k):
                where[lab].discard(k)
                if not where[lab]:
                    del where[lab]
        work[nxt] = merged
        for lab in merged:
            where.setdefault(lab, set()).add(nxt)
        nxt += 1
    return steps


_PLANS: dict = {}


def contract_network(tensors: list, open_labels: list) -> np.ndarray:
    """Greedy pairwise contraction of a labelled tensor network.

    Plans depend only on the labels and are cached, so repeated evaluations
    of one diagram under different assignments skip the search.

    Parameters
    ----------
    tensors : list of (ndarray, list of labels)
        Each label occurs in at most two tensors; labels in ``open_labels``
        occur in exactly one.
    open_labels : list
        Order of the free indices of the result.

    Returns
    -------
    ndarray
        Tensor with one axis of size 2 per open label.
    """
    if not tensors:
        return np.array(1.0 + 0j)
    key = tuple(tuple(ls) for _, ls in tensors)
    steps = _PLANS.get(key)
    if steps is None:
        if len(_PLANS) > 256:
            _PLANS.clear()
        steps = _PLANS[key] = _plan(key)
    work = {k: _trace_repeats(np.asarray(t, dtype=complex), list(ls)) for k, (t, ls) in enumerate(tensors)}
    nxt = len(work)
    for i, j, outer in steps:
        ti, lsi = work.pop(i)
        tj, lsj = work.pop(j)
        if outer:
            work[nxt] = (np.multiply.outer(ti, tj), lsi + lsj)
        else:
            common = [lab for lab in lsi if lab in lsj]
            ax_i = [lsi.index(lab) for lab in common]
            ax_j = [lsj.index(lab) for lab in common]
            res = np.tensordot(ti, tj, axes=(ax_i, ax_j))
            labels = [lab for lab in lsi if lab not in common] + [lab for lab in lsj if lab not in common]
            work[nxt] = _trace_repeats(res, labels)
        nxt += 1
    (t, labels), = work.values()
    if sorted(map(repr, labels)) != sorted(map(repr, open_labels)):
        raise ZxError("dangling indices remain after contraction")
    if labels:
        t = np.transpose(t, [labels.index(lab) for lab in open_labels])
    return t


def _check_assignment(d: ZxDiagram, assign: Mapping):
    for v in sorted(d.variables(), key=str):
        if v not in assign:
            raise UnassignedVariable(f"unassigned variable {v!r}")


def eval_tensor(d: ZxDiagram, assign: Mapping | None = None) -> np.ndarray:
    """Standard interpretation of ``d`` under a total outcome assignment.

    Returns
    -------
    ndarray, shape (2**n_out, 2**n_in)
    """
    assign = {} if assign is None else assign
    _check_assignment(d, assign)
    tensors = []
    legs: dict = {v: [] for v in d.spiders}
    for eid, (a, b, h) in d.edges.items():
        ca, cb = d.spiders[a].color, d.spiders[b].color
        if h or (ca == B and cb == B):
            la, lb = ("e", eid, 0), ("e", eid, 1)
            tensors.append((_H if h else np.eye(2, dtype=complex), [la, lb]))
        else:
            la = lb = ("e", eid)
        legs[a].append(la)
        legs[b].append(lb)
    port_label = {}
    for vid, s in d.spiders.items():
        if s.color == B:
            if len(legs[vid]) != 1:
                raise ZxError(f"boundary {vid!r} must have degree 1")
            port_label[vid] = legs[vid][0]
            continue
        tensors.append((_spider_tensor(s.color, s.phase.evaluate(assign), len(legs[vid])), legs[vid]))
    for p in d.inputs + d.outputs:
        if p not in port_label:
            raise ZxError(f"port {p!r} is not a boundary vertex")
    open_labels = [port_label[p] for p in d.outputs] + [port_label[p] for p in d.inputs]
    t = contract_network(tensors, open_labels)
    mat = np.asarray(t).reshape(2 ** d.n_outputs, 2 ** d.n_inputs)
    return mat * d.scalar.evaluate(assign)


def assignments(variables: Iterable) -> Iterable[dict]:
    vs = sorted(set(variables), key=str)
    for bits in itertools.product((0, 1), repeat=len(vs)):
        yield dict(zip(vs, bits))


# ---------------------------------------------------------------------------
# Composition


def _relabel(d: ZxDiagram, taken: set) -> ZxDiagram:
    mapping = {}
    nxt = 0
    for v in d.spiders:
        while nxt in taken or nxt in mapping.values():
            nxt += 1
        mapping[v] = nxt
        nxt += 1
    out = ZxDiagram()
    for v, s in d.spiders.items():
        out.add_spider(s.color, s.phase, vid=mapping[v])
    for a, b, h in d.edges.values():
        out.add_edge(mapping[a], mapping[b], h)
    out.inputs = [mapping[p] for p in d.inputs]
    out.outputs = [mapping[p] for p in d.outputs]
    out.scalar = d.scalar
    return out


def _union(d1: ZxDiagram, d2: ZxDiagram) -> tuple:
    a = _relabel(d1, set())
    b = _relabel(d2, set(a.spiders))
    out = a.copy()
    for v, s in b.spiders.items():
        out.add_spider(s.color, s.phase, vid=v)
    for x, y, h in b.edges.values():
        out.add_edge(x, y, h)
    out.scalar = a.scalar * b.scalar
    return out, a, b


def tensor(d1: ZxDiagram, d2: ZxDiagram) -> ZxDiagram:
    """Parallel composition; ports of ``d1`` come first."""
    out, a, b = _union(d1, d2)
    out.inputs = a.inputs + b.inputs
    out.outputs = a.outputs + b.outputs
    return out


def _boundary_edge(d: ZxDiagram, p):
    (eid,) = d.incident(p)
    a, b, h = d.edges[eid]
    return eid, (b if a == p else a), h


def compose(d1: ZxDiagram, d2: ZxDiagram) -> ZxDiagram:
    """Sequential composition: ``d1`` first, then ``d2``."""
    if d1.n_outputs != d2.n_inputs:
        raise ZxError(f"arity mismatch: {d1.n_outputs} outputs vs {d2.n_inputs} inputs")
    out, a, b = _union(d1, d2)
    out.inputs = list(a.inputs)
    out.outputs = list(b.outputs)
    for o, i in zip(a.outputs, b.inputs):
        e1, n1, h1 = _boundary_edge(out, o)
        e2, n2, h2 = _boundary_edge(out, i)
        if n1 == i:
            # o is wired directly to i; nothing to splice
            raise ZxError("internal: output wired to its own input")
        del out.edges[e1]
        del out.edges[e2]
        del out.spiders[o]
        del out.spiders[i]
        out.add_edge(n1, n2, h1 != h2)
    return out


def compose_all(*ds: ZxDiagram) -> ZxDiagram:
    out = ds[0]
    for d in ds[1:]:
        out = compose(out, d)
    return out


def tensor_all(*ds: ZxDiagram) -> ZxDiagram:
    out = ds[0]
    for d in ds[1:]:
        out = tensor(out, d)
    return out


def adjoint(d: ZxDiagram) -> ZxDiagram:
    """Dagger: swap ports, negate phases, conjugate the scalar."""
    out = d.copy()
    for v, s in d.spiders.items():
        out.spiders[v] = Spider(v, s.color, -s.phase)
    out.inputs, out.outputs = list(d.outputs), list(d.inputs)
    out.scalar = Scalar(d.scalar.stars, d.scalar.factor.conjugate(), d.scalar.sign_vars)
    return out


def plug_outputs(d: ZxDiagram, effects: Mapping) -> ZxDiagram:
    """Attach 1 -> 0 effect diagrams to selected output positions."""
    n = d.n_outputs
    parts = []
    for k in range(n):
        parts.append(effects[k] if k in effects else identity(1))
    layer = parts[0]
    for p in parts[1:]:
        layer = tensor(layer, p)
    return compose(d, layer)


# ---------------------------------------------------------------------------
# Substitution and comparison


def substitute(d: ZxDiagram, assign: Mapping) -> ZxDiagram:
    """Fold assigned variables into static phases and the scalar factor."""
    out = d.copy()
    for v, s in d.spiders.items():
        out.spiders[v] = Spider(v, s.color, s.phase.substitute(assign))
    out.scalar = d.scalar.substitute(assign)
    return out


def proportionality(a: np.ndarray, b: np.ndarray, tol: float = TOL) -> complex | None:
    """Return ``lam`` with ``a == lam * b`` entrywise within ``tol``, else None."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.shape != b.shape:
        return None
    scale = max(np.abs(a).max(initial=0.0), np.abs(b).max(initial=0.0), 1.0)
    idx = np.unravel_index(np.argmax(np.abs(b)), b.shape) if b.size else None
    if idx is None or abs(b[idx]) <= tol * scale:
        return 1.0 + 0j if np.abs(a).max(initial=0.0) <= tol * scale else None
    lam = a[idx] / b[idx]
    if np.abs(a - lam * b).max() <= tol * scale:
        return complex(lam)
    return None


def equal_up_to_scalar(d1: ZxDiagram, d2: ZxDiagram, tol: float = TOL, per_branch: bool = False):
    """Ratio ``lam`` with ``[[d1]] = lam [[d2]]`` on every joint assignment.

    With ``per_branch=False`` a single ratio must work for all assignments
    and it is returned (or None).  With ``per_branch=True`` a dict mapping
    each assignment (as a sorted tuple of items) to its ratio is returned,
    or None if some branch is not proportional.
    """
    if (d1.n_inputs, d1.n_outputs) != (d2.n_inputs, d2.n_outputs):
        return None
    ratios = {}
    for a in assignments(d1.variables() | d2.variables()):
        lam = proportionality(eval_tensor(d1, a), eval_tensor(d2, a), tol)
        if lam is None:
            return None
        ratios[tuple(sorted(a.items(), key=lambda kv: str(kv[0])))] = lam
    if per_branch:
        return ratios
    vals = list(ratios.values())
    if all(abs(v - vals[0]) <= tol * max(1.0, abs(vals[0])) for v in vals):
        return vals[0]
    return None


# ---------------------------------------------------------------------------
# Graph states, measurement effects and probabilities


def graph_state_diagram(vertices, edges, inputs=(), outputs=None) -> ZxDiagram:
    """Exact ``prod CZ |+>`` on a graph, with optional input vertices.

    Input vertices receive an input port instead of a ``|+>`` preparation.
    Every vertex gets an output port, in the order of ``outputs`` (default:
    ``vertices``).
    """
    d = ZxDiagram()
    vertices = list(vertices)
    outputs = vertices if outputs is None else list(outputs)
    node = {}
    for v in vertices:
        node[v] = d.add_spider(Z)
    for v in inputs:
        d.add_edge(d.add_input(), node[v])
    for v in outputs:
        d.add_edge(node[v], d.add_output())
    n_edges = 0
    for a, b in edges:
        d.add_edge(node[a], node[b], hadamard=True)
        n_edges += 1
    n_prep = len(vertices) - len(set(inputs))
    d.scalar = Scalar(n_prep - n_edges)
    return d


PLANES = ("XY", "XZ", "YZ", "X", "Y", "Z")


def measurement_effect(plane: str, angle=Phase(), var=None) -> ZxDiagram:
    """Normalised effect for outcome ``var`` of a single-qubit measurement.

    The outcome-0 effect has the same components as the state
    ``|+_{plane, angle}>``: ``(<0| + e^{i a}<1|)/sqrt 2`` for XY,
    ``(<+| + e^{i a}<-|)/sqrt 2`` for YZ and ``(<i| + e^{i a}<-i|)/sqrt 2``
    for XZ; Pauli labels use XY at 0 or pi/2 and XZ at 0.  ``var`` adds
    ``var * pi`` to the angle.
    """
    plane = plane.upper()
    phase = Phase.of(angle)
    if plane == "X":
        plane, phase = "XY", Phase()
    elif plane == "Y":
        plane, phase = "XY", Phase.pi(1, 2)
    elif plane == "Z":
        plane, phase = "XZ", Phase()
    if var is not None:
        phase = phase.add_vars([var])
    if plane == "XY":
        d = z_spider(1, 0, phase)
        d.scalar = Scalar(1)
        return d
    if plane == "YZ":
        d = x_spider(1, 0, phase)
        d.scalar = Scalar(1)
        return d
    if plane == "XZ":
        d = compose(z_spider(1, 1, Phase.pi(1, 2)), x_spider(1, 0, phase))
        d.scalar = Scalar(1)
        return d
    raise ZxError(f"unknown measurement plane {plane!r}")


def pauli_gate(kind: str, var=None, static: int = 1) -> ZxDiagram:
    """Pauli X or Z gate raised to ``static xor var``."""
    phase = Phase.pi(static, 1, [var] if var is not None else [])
    return rotation("X" if kind.upper() == "X" else "Z", phase)


def cp_probability(d: ZxDiagram, fixed: Mapping, input_density=None, tol: float = TOL) -> float:
    """Born probability ``sum Tr(K rho K^dagger)`` over unassigned variables.

    Remaining outputs of ``d`` are traced out.  ``input_density`` defaults to
    the scalar 1 for diagrams without inputs.
    """
    dim_in = 2 ** d.n_inputs
    rho = np.eye(1, dtype=complex) if input_density is None else np.asarray(input_density, dtype=complex)
    if rho.shape != (dim_in, dim_in):
        raise ZxError(f"input density must be {dim_in}x{dim_in}")
    free = d.variables() - set(fixed)
    total = 0.0
    for a in assignments(free):
        full = dict(fixed)
        full.update(a)
        k = eval_tensor(d, full)
        total += float(np.real(np.trace(k @ rho @ k.conj().T)))
    if total < -tol:
        raise ZxError(f"negative probability {total}: diagram is not CP")
    return max(total, 0.0)


# ---------------------------------------------------------------------------
# Rewrites


def _require(cond: bool, msg: str):
    if not cond:
        raise RewriteError(msg)


def _other_end(edge, v):
    a, b, _ = edge
    return b if a == v else a


def _plain_edges(d, u, v):
    return [e for e in d.edges_between(u, v) if not d.edges[e][2]]


def rewrite_spider_fusion(d: ZxDiagram, site) -> ZxDiagram:
    """Fuse two same-colour spiders joined by at least one plain edge."""
    u, v = site
    _require(u != v and u in d.spiders and v in d.spiders, "fusion needs two distinct spiders")
    su, sv = d.spiders[u], d.spiders[v]
    _require(su.color == sv.color and su.color in (Z, X), "fusion needs two spiders of the same colour")
    plain = _plain_edges(d, u, v)
    _require(bool(plain), "fusion needs a plain edge between the spiders")
    out = d.copy()
    del out.edges[plain[0]]
    for eid in out.incident(v):
        a, b, h = out.edges[eid]
        out.edges[eid] = (u if a == v else a, u if b == v else b, h)
    del out.spiders[v]
    phase = su.phase + sv.phase
    scalar = out.scalar
    for eid in list(out.incident(u)):
        a, b, h = out.edges[eid]
        if a == b == u:
            del out.edges[eid]
            if h:
                phase = phase + Phase.pi(1)
                scalar = scalar.with_stars(1)
    out.spiders[u] = Spider(u, su.color, phase)
    out.scalar = scalar
    return out


def rewrite_identity_removal(d: ZxDiagram, v) -> ZxDiagram:
    """Remove a phase-free degree-two spider, merging its edge types."""
    s = d.spiders.get(v)
    _require(s is not None and s.color in (Z, X), "identity removal needs a Z or X spider")
    _require(s.phase.is_zero(), "identity removal needs phase 0")
    inc = d.incident(v)
    _require(len(inc) == 2 and d.degree(v) == 2, "identity removal needs degree 2 without self-loops")
    (e1, e2) = inc
    n1, n2 = _other_end(d.edges[e1], v), _other_end(d.edges[e2], v)
    h = d.edges[e1][2] != d.edges[e2][2]
    out = d.copy()
    out.remove_spider(v)
    out.add_edge(n1, n2, h)
    return out


def rewrite_color_change(d: ZxDiagram, v) -> ZxDiagram:
    """Swap the colour of ``v`` and toggle Hadamards on its incident edges."""
    s = d.spiders.get(v)
    _require(s is not None and s.color in (Z, X), "colour change needs a Z or X spider")
    out = d.copy()
    out.spiders[v] = Spider(v, X if s.color == Z else Z, s.phase)
    for eid in d.incident(v):
        a, b, h = d.edges[eid]
        if a == b:
            continue
        out.edges[eid] = (a, b, not h)
    return out


def rewrite_copy(d: ZxDiagram, site) -> ZxDiagram:
    """Copy a unary Pauli-phase spider through an opposite-colour spider.

    ``site = (u, v)``: ``u`` has degree one, phase ``a pi`` (a static 0/1,
    optionally plus variables) and a plain edge to ``v``.
    """
    u, v = site
    su, sv = d.spiders.get(u), d.spiders.get(v)
    _require(su is not None and sv is not None, "copy site missing")
    _require(su.color in (Z, X) and sv.color in (Z, X) and su.color != sv.color, "copy needs opposite colours")
    _require(d.degree(u) == 1, "copied spider must be unary")
    (eu,) = d.incident(u)
    _require(_other_end(d.edges[eu], u) == v and not d.edges[eu][2], "copy needs a plain edge u-v")
    a = su.phase.static_multiple(1)
    _require(a is not None, "copied spider must have phase 0 or pi")
    _require(all(x != y for x, y, _ in (d.edges[e] for e in d.incident(v))), "copy target has a self-loop")
    uvars, bvars = su.phase.pi_vars, sv.phase.pi_vars
    _require(not (uvars and bvars), "copy would need a product of variables")
    scalar = d.scalar
    beta = sv.phase
    if uvars:
        bm = beta.static_multiple(1)
        _require(bm is not None, "variable copy needs a Pauli phase on the target")
        if bm == 1:
            scalar = scalar.with_signs(uvars)
    if a == 1:
        scalar = scalar.times(cmath.exp(1j * beta.radians)).with_signs(bvars)
    out = d.copy()
    others = [e for e in d.incident(v) if e != eu]
    n = len(others)
    for eid in others:
        w = _other_end(d.edges[eid], v)
        h = d.edges[eid][2]
        c = out.add_spider(su.color, su.phase)
        out.add_edge(c, w, h)
    out.remove_spider(u)
    out.remove_spider(v)
    out.scalar = scalar.with_stars(n - 1)
    return out


def rewrite_bialgebra(d: ZxDiagram, site) -> ZxDiagram:
    """Strong complementarity for phase-free Z ``u`` and X ``v`` joined once."""
    u, v = site
    su, sv = d.spiders.get(u), d.spiders.get(v)
    _require(su is not None and sv is not None, "bialgebra site missing")
    _require({su.color, sv.color} == {Z, X}, "bialgebra needs a Z and an X spider")
    _require(su.phase.is_zero() and sv.phase.is_zero(), "bialgebra needs phase-free spiders")
    between = d.edges_between(u, v)
    _require(len(between) == 1 and not d.edges[between[0]][2], "bialgebra needs exactly one plain edge")
    for w in (u, v):
        _require(all(x != y for x, y, _ in (d.edges[e] for e in d.incident(w))), "bialgebra site has a self-loop")
    u_legs = [e for e in d.incident(u) if e != between[0]]
    v_legs = [e for e in d.incident(v) if e != between[0]]
    m, n = len(u_legs), len(v_legs)
    out = d.copy()
    new_u = []
    for eid in u_legs:
        w, h = _other_end(d.edges[eid], u), d.edges[eid][2]
        c = out.add_spider(sv.color)
        out.add_edge(c, w, h)
        new_u.append(c)
    new_v = []
    for eid in v_legs:
        w, h = _other_end(d.edges[eid], v), d.edges[eid][2]
        c = out.add_spider(su.color)
        out.add_edge(c, w, h)
        new_v.append(c)
    for a in new_u:
        for b in new_v:
            out.add_edge(a, b)
    out.remove_spider(u)
    out.remove_spider(v)
    out.scalar = out.scalar.with_stars(-(m - 1) * (n - 1))
    return out


def rewrite_hopf(d: ZxDiagram, site) -> ZxDiagram:
    """Remove a pair of parallel plain edges between a Z and an X spider."""
    u, v = site
    su, sv = d.spiders.get(u), d.spiders.get(v)
    _require(su is not None and sv is not None, "Hopf site missing")
    _require({su.color, sv.color} == {Z, X}, "Hopf needs a Z and an X spider")
    plain = _plain_edges(d, u, v)
    _require(len(plain) >= 2, "Hopf needs two parallel plain edges")
    out = d.copy()
    del out.edges[plain[0]]
    del out.edges[plain[1]]
    out.scalar = out.scalar.with_stars(2)
    return out


def rewrite_pi_copy(d: ZxDiagram, site) -> ZxDiagram:
    """Push a degree-two ``pi`` spider ``u`` through its neighbour ``v``."""
    u, v = site
    su, sv = d.spiders.get(u), d.spiders.get(v)
    _require(su is not None and sv is not None, "pi-copy site missing")
    _require(su.color in (Z, X) and sv.color in (Z, X) and su.color != sv.color, "pi-copy needs opposite colours")
    _require(not su.phase.pi_vars and su.phase.static_multiple(1) == 1, "pi-copy needs a static pi phase")
    inc = d.incident(u)
    _require(len(inc) == 2 and d.degree(u) == 2, "pi-copy spider must have degree 2")
    to_v = [e for e in inc if _other_end(d.edges[e], u) == v and not d.edges[e][2]]
    _require(len(to_v) == 1, "pi-copy needs a single plain edge to the target")
    (e_far,) = [e for e in inc if e != to_v[0]]
    w, h_far = _other_end(d.edges[e_far], u), d.edges[e_far][2]
    _require(w != v, "pi-copy spider is attached twice to the target")
    _require(all(x != y for x, y, _ in (d.edges[e] for e in d.incident(v))), "pi-copy target has a self-loop")
    out = d.copy()
    others = [e for e in d.incident(v) if e != to_v[0]]
    out.remove_spider(u)
    out.add_edge(w, v, h_far)
    for eid in others:
        a, b, h = d.edges[eid]
        x = _other_end(d.edges[eid], v)
        del out.edges[eid]
        p = out.add_spider(su.color, Phase.pi(1))
        out.add_edge(v, p)
        out.add_edge(p, x, h)
    out.spiders[v] = Spider(v, sv.color, -sv.phase)
    out.scalar = out.scalar.times(cmath.exp(1j * sv.phase.radians)).with_signs(sv.phase.pi_vars)
    return out


def _interior_graph_like(d: ZxDiagram, v) -> list:
    """Neighbours of ``v`` if it is a Z spider joined only by single Hadamard edges to Z spiders."""
    s = d.spiders.get(v)
    _require(s is not None and s.color == Z, "site must be a Z spider")
    nbrs = []
    for eid in d.incident(v):
        a, b, h = d.edges[eid]
        _require(a != b, "site has a self-loop")
        w = _other_end(d.edges[eid], v)
        _require(h, "site must be joined by Hadamard edges only")
        _require(d.spiders[w].color == Z, "site neighbours must be Z spiders")
        nbrs.append(w)
    _require(len(nbrs) == len(set(nbrs)), "site has parallel edges")
    return nbrs


def _toggle_h_edge(d: ZxDiagram, a, b) -> int:
    """Toggle a Hadamard edge between Z spiders; returns stars added."""
    existing = [e for e in d.edges_between(a, b) if d.edges[e][2]]
    if existing:
        # a parallel pair of Hadamard edges cancels (Hopf) at cost 1/2
        del d.edges[existing[0]]
        return 2
    d.add_edge(a, b, True)
    return 0


def rewrite_local_complementation(d: ZxDiagram, v) -> ZxDiagram:
    """Eliminate an interior ``+-pi/2`` Z spider by local complementation.

    Neighbour pairs have their Hadamard edge toggled and every neighbour
    receives phase ``-alpha(v)``.
    """
    s = d.spiders.get(v)
    nbrs = _interior_graph_like(d, v)
    m = s.phase.static_multiple(2) if not s.phase.pi_vars else None
    _require(m in (1, 3), "local complementation needs phase +-pi/2")
    n = len(nbrs)
    out = d.copy()
    out.remove_spider(v)
    stars = 0
    for i in range(n):
        for j in range(i + 1, n):
            stars += _toggle_h_edge(out, nbrs[i], nbrs[j])
    for w in nbrs:
        out.set_phase(w, out.spiders[w].phase - s.phase)
    sign = 1 if m == 1 else -1
    # (sqrt 2)^{(n-1)(n-2)/2} e^{i sign pi/4}
    out.scalar = out.scalar.with_stars(stars - (n - 1) * (n - 2) // 2).times(cmath.exp(1j * sign * math.pi / 4))
    return out


def rewrite_pivot(d: ZxDiagram, site) -> ZxDiagram:
    """Eliminate two adjacent interior Z spiders with Pauli phases."""
    u, v = site
    nu = _interior_graph_like(d, u)
    nv = _interior_graph_like(d, v)
    _require(v in nu, "pivot needs adjacent spiders")
    pu, pv = d.spiders[u].phase, d.spiders[v].phase
    a, b = pu.static_multiple(1), pv.static_multiple(1)
    _require(a is not None and b is not None, "pivot needs phases 0 or pi")
    _require(not (pu.pi_vars and pv.pi_vars), "pivot would need a product of variables")
    A = [w for w in nu if w != v and w not in nv]
    Bs = [w for w in nv if w != u and w not in nu]
    C = [w for w in nu if w in nv]
    out = d.copy()
    out.remove_spider(u)
    out.remove_spider(v)
    stars = 0
    for g1, g2 in ((A, Bs), (A, C), (Bs, C)):
        for x in g1:
            for y in g2:
                stars += _toggle_h_edge(out, x, y)
    for w in A:
        out.set_phase(w, out.spiders[w].phase + pv)
    for w in Bs:
        out.set_phase(w, out.spiders[w].phase + pu)
    for w in C:
        out.set_phase(w, out.spiders[w].phase + pu + pv + Phase.pi(1))
    k0, k1, k2 = len(A), len(Bs), len(C)
    scalar = out.scalar.with_stars(stars + k0 + k1 + 2 * k2 - 1 - (k0 * k2 + k1 * k2 + k0 * k1))
    # (-1)^{a b} with a, b the Pauli bits of the two phases
    if a == 1 and b == 1:
        scalar = scalar.times(-1)
    if a == 1 and pv.pi_vars:
        scalar = scalar.with_signs(pv.pi_vars)
    if b == 1 and pu.pi_vars:
        scalar = scalar.with_signs(pu.pi_vars)
    out.scalar = scalar
    return out


REWRITES = {
    "spider_fusion": rewrite_spider_fusion,
    "identity_removal": rewrite_identity_removal,
    "color_change": rewrite_color_change,
    "copy": rewrite_copy,
    "bialgebra": rewrite_bialgebra,
    "hopf": rewrite_hopf,
    "pi_copy": rewrite_pi_copy,
    "local_complementation": rewrite_local_complementation,
    "pivot": rewrite_pivot,
}
