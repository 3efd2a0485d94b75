"""Measurement patterns and XY-fusion patterns.

Commands are stored in execution order (left to right).  The text format
follows the usual product notation and is read right to left::

    [X 4]^{l} [Z 2]^{j} [X 2]^{k} M{XY,a,l} 3 M{X,k} 1 F{X,s,j} 1 3 E 3 4 E 1 2 N 4 N 3 N 2 N 1

Fusions are non-destructive.  A successful fusion on ``i, j`` with label
``lam`` and outcome ``k`` acts as ``<lam, k pi|_f E_fi E_fj N_f`` on a
virtual qubit ``f`` (the target-graph node), scaled by ``1/sqrt 2`` and, for
Y fusions, preceded by ``Z(pi/2)`` on both qubits.  A
failed one applies the Z-plane phases ``Z(c pi/2 + (1-k) pi) (x) Z(c pi/2 + k pi)``
scaled by ``1/2``, with ``c = 0`` for X and ``c = 1`` for Y fusions.  These
Kraus maps sum to the identity and succeed with probability 1/2.
"""

from __future__ import annotations

import itertools
import json
import math
import random
import re
from dataclasses import dataclass, field, replace

import numpy as np

from . import flow, zx
from .flow import FlowCertificate, FlowError, Fusion, FusionNetwork, OpenGraph

HALF_PI = math.pi / 2


class PatternError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Commands


@dataclass(frozen=True)
class Cond:
    """XOR-affine Boolean expression ``const xor (xor of vars)``."""

    vars: frozenset = frozenset()
    const: int = 0

    @classmethod
    def of(cls, x) -> "Cond":
        if isinstance(x, Cond):
            return x
        if isinstance(x, int):
            return cls(frozenset(), x & 1)
        if isinstance(x, str):
            x = [x]
        return cls(frozenset(x))

    def __xor__(self, other) -> "Cond":
        o = Cond.of(other)
        return Cond(self.vars ^ o.vars, self.const ^ o.const)

    def evaluate(self, assign) -> int:
        return (self.const + sum(int(assign[v]) for v in self.vars)) % 2

    def restrict(self, available) -> "Cond":
        return Cond(frozenset(v for v in self.vars if v in available), self.const)

    def __str__(self):
        parts = sorted(map(str, self.vars)) + (["1"] if self.const else [])
        return "+".join(parts) if parts else "0"


@dataclass(frozen=True)
class N:
    q: object


@dataclass(frozen=True)
class E:
    a: object
    b: object


@dataclass(frozen=True)
class M:
    q: object
    plane: str
    angle: float | str = 0.0
    var: str = None


@dataclass(frozen=True)
class F:
    a: object
    b: object
    plane: str
    s: str
    k: str
    name: object = None


@dataclass(frozen=True)
class C:
    """Pauli correction ``kind`` in {X, Z} on ``q`` when ``cond`` is 1."""

    kind: str
    q: object
    cond: Cond = Cond()


# ---------------------------------------------------------------------------
# Patterns


@dataclass
class Pattern:
    register: list
    inputs: list = field(default_factory=list)
    outputs: list = field(default_factory=list)
    commands: list = field(default_factory=list)

    def __post_init__(self):
        self.register = list(self.register)
        self.inputs = [q for q in self.register if q in set(self.inputs)]
        self.outputs = [q for q in self.register if q in set(self.outputs)]

    @property
    def measurements(self) -> list:
        return [c for c in self.commands if isinstance(c, M)]

    @property
    def fusions(self) -> list:
        return [c for c in self.commands if isinstance(c, F)]

    def parameters(self) -> set:
        """Symbolic measurement angles still to be bound."""
        return {c.angle for c in self.measurements if isinstance(c.angle, str)}

    def bind(self, angles: dict) -> "Pattern":
        """Replace symbolic angles (and optionally measured qubits' angles) by floats.

        Keys may be parameter names or measured qubits.
        """
        cmds = []
        for c in self.commands:
            if isinstance(c, M):
                if c.q in angles and c.plane in flow.PLANE_LABELS:
                    c = replace(c, angle=float(angles[c.q]))
                elif isinstance(c.angle, str) and c.angle in angles:
                    c = replace(c, angle=float(angles[c.angle]))
            cmds.append(c)
        return Pattern(self.register, self.inputs, self.outputs, cmds)

    def angle_sites(self) -> list:
        """Measured qubits whose angle is free (non-Pauli planes)."""
        return [c.q for c in self.measurements if c.plane in flow.PLANE_LABELS]

    def to_json(self) -> dict:
        def enc(c):
            if isinstance(c, N):
                return {"op": "N", "q": c.q}
            if isinstance(c, E):
                return {"op": "E", "q": [c.a, c.b]}
            if isinstance(c, M):
                return {"op": "M", "q": c.q, "plane": c.plane, "angle": c.angle, "var": c.var}
            if isinstance(c, F):
                return {"op": "F", "q": [c.a, c.b], "plane": c.plane, "s": c.s, "k": c.k, "name": c.name}
            return {"op": c.kind, "q": c.q, "vars": sorted(map(str, c.cond.vars)), "const": c.cond.const}

        return {"register": self.register, "inputs": self.inputs, "outputs": self.outputs,
                "commands": [enc(c) for c in self.commands]}

    @classmethod
    def from_json(cls, data) -> "Pattern":
        if isinstance(data, str):
            data = json.loads(data)
        try:
            cmds = []
            for d in data["commands"]:
                op = d["op"]
                if op == "N":
                    cmds.append(N(d["q"]))
                elif op == "E":
                    cmds.append(E(*d["q"]))
                elif op == "M":
                    cmds.append(M(d["q"], d["plane"].upper(), d.get("angle", 0.0), d.get("var")))
                elif op == "F":
                    cmds.append(F(*d["q"], d["plane"].upper(), d["s"], d["k"], d.get("name")))
                elif op in ("X", "Z"):
                    cmds.append(C(op, d["q"], Cond(frozenset(d.get("vars", [])), int(d.get("const", 0)))))
                else:
                    raise PatternError(f"unknown command {op!r}")
            return cls(data["register"], data.get("inputs", []), data.get("outputs", []), cmds)
        except (KeyError, TypeError, AttributeError) as exc:
            raise PatternError(f"malformed pattern JSON: {exc}") from exc

    def to_text(self) -> str:
        return " ".join(_fmt(c) for c in reversed(self.commands))

    @classmethod
    def from_text(cls, text: str, inputs=(), outputs=None, register=None) -> "Pattern":
        """Parse the product notation; ``outputs`` default to never-measured qubits."""
        cmds = list(reversed(_parse(text)))
        seen = []
        for c in cmds:
            for q in _qubits(c):
                if q not in seen:
                    seen.append(q)
        for q in inputs:
            if q not in seen:
                seen.append(q)
        reg = list(register) if register is not None else sorted(seen, key=lambda q: (isinstance(q, str), str(q) if isinstance(q, str) else q))
        if outputs is None:
            measured = {c.q for c in cmds if isinstance(c, M)}
            outputs = [q for q in reg if q not in measured]
        return cls(reg, list(inputs), list(outputs), cmds)


def _qubits(c) -> tuple:
    if isinstance(c, (E, F)):
        return (c.a, c.b)
    return (c.q,)


def _fmt_q(q) -> str:
    return str(q)


def _fmt_angle(a) -> str:
    return a if isinstance(a, str) else f"{float(a):.12g}"


def _fmt(c) -> str:
    if isinstance(c, N):
        return f"N {_fmt_q(c.q)}"
    if isinstance(c, E):
        return f"E {_fmt_q(c.a)} {_fmt_q(c.b)}"
    if isinstance(c, M):
        if c.plane in flow.PAULI_LABELS and not c.angle:
            return f"M{{{c.plane},{c.var}}} {_fmt_q(c.q)}"
        return f"M{{{c.plane},{_fmt_angle(c.angle)},{c.var}}} {_fmt_q(c.q)}"
    if isinstance(c, F):
        return f"F{{{c.plane},{c.s},{c.k}}} {_fmt_q(c.a)} {_fmt_q(c.b)}"
    return f"[{c.kind} {_fmt_q(c.q)}]^{{{c.cond}}}"


_TOKEN = re.compile(
    r"\s*(?:\[(?P<ck>[XZ])\s+(?P<cq>[^\]\s]+)\]\^\{(?P<cc>[^}]*)\}"
    r"|N\s+(?P<nq>\S+)"
    r"|E\s+(?P<ea>\S+)\s+(?P<eb>\S+)"
    r"|M\{(?P<margs>[^}]*)\}\s+(?P<mq>\S+)"
    r"|F\{(?P<fargs>[^}]*)\}\s+(?P<fa>\S+)\s+(?P<fb>\S+))"
)


def _q(tok: str):
    return int(tok) if re.fullmatch(r"-?\d+", tok) else tok


def _cond(text: str) -> Cond:
    c = Cond()
    for part in filter(None, (p.strip() for p in re.split(r"[+⊕]", text))):
        c = c ^ (int(part) if part in ("0", "1") else part)
    return c


def _angle(tok: str):
    tok = tok.strip()
    try:
        return float(tok)
    except ValueError:
        pass
    m = re.fullmatch(r"(-?\d*\.?\d*)\s*\*?\s*pi\s*(?:/\s*(\d+))?", tok)
    if m:
        num = float(m.group(1)) if m.group(1) not in ("", "-") else (-1.0 if m.group(1) == "-" else 1.0)
        return num * math.pi / (int(m.group(2)) if m.group(2) else 1)
    return tok


def _parse(text: str) -> list:
    out, pos = [], 0
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise PatternError(f"cannot parse pattern near {text[pos:pos + 20]!r}")
        pos = m.end()
        g = m.groupdict()
        if g["ck"]:
            out.append(C(g["ck"], _q(g["cq"]), _cond(g["cc"])))
        elif g["nq"]:
            out.append(N(_q(g["nq"])))
        elif g["ea"]:
            out.append(E(_q(g["ea"]), _q(g["eb"])))
        elif g["mq"]:
            args = [a.strip() for a in g["margs"].split(",")]
            plane = args[0].upper()
            if len(args) == 2:
                out.append(M(_q(g["mq"]), plane, 0.0, args[1]))
            elif len(args) == 3:
                out.append(M(_q(g["mq"]), plane, _angle(args[1]), args[2]))
            else:
                raise PatternError(f"bad measurement arguments {g['margs']!r}")
        else:
            args = [a.strip() for a in g["fargs"].split(",")]
            if len(args) != 3:
                raise PatternError(f"bad fusion arguments {g['fargs']!r}")
            out.append(F(_q(g["fa"]), _q(g["fb"]), args[0].upper(), args[1], args[2]))
        while pos < len(text) and text[pos].isspace():
            pos += 1
    return out


# ---------------------------------------------------------------------------
# Runnability


@dataclass
class Report:
    ok: bool
    index: int | None = None
    reason: str = ""
    details: dict = field(default_factory=dict)

    def __bool__(self):
        return self.ok


def is_runnable(p: Pattern) -> Report:
    """Check preparation-before-use, single measurement and causal corrections.

    Fusions are non-destructive: they need both qubits live and leave them
    live.
    """
    reg = set(p.register)
    live = set(p.inputs)
    prepared = set(p.inputs)
    measured = set()
    produced = set()

    def bad(i, msg):
        return Report(False, i, msg)

    if not set(p.inputs) <= reg or not set(p.outputs) <= reg:
        return bad(None, "inputs and outputs must be in the register")
    for i, c in enumerate(p.commands):
        qs = _qubits(c)
        if not set(qs) <= reg:
            return bad(i, f"qubit outside the register in {_fmt(c)}")
        if isinstance(c, N):
            if c.q in prepared:
                return bad(i, f"qubit {c.q!r} prepared twice or is an input")
            prepared.add(c.q)
            live.add(c.q)
            continue
        for q in qs:
            if q not in live:
                state = "measured" if q in measured else "not prepared"
                return bad(i, f"qubit {q!r} is {state} in {_fmt(c)}")
        if isinstance(c, E) and c.a == c.b:
            return bad(i, "entangling a qubit with itself")
        if isinstance(c, F):
            if c.a == c.b:
                return bad(i, "fusing a qubit with itself")
            if c.plane not in ("X", "Y"):
                return bad(i, f"fusion label must be X or Y, got {c.plane!r}")
            for v in (c.s, c.k):
                if v in produced:
                    return bad(i, f"outcome variable {v!r} reused")
                produced.add(v)
        if isinstance(c, M):
            if c.q in p.outputs:
                return bad(i, f"output {c.q!r} measured")
            if c.plane not in flow.LABELS:
                return bad(i, f"unknown plane {c.plane!r}")
            if c.var is None or c.var in produced:
                return bad(i, f"measurement of {c.q!r} needs a fresh outcome variable")
            produced.add(c.var)
            live.discard(c.q)
            measured.add(c.q)
        if isinstance(c, C):
            if c.kind not in ("X", "Z"):
                return bad(i, f"unknown correction {c.kind!r}")
            missing = c.cond.vars - produced
            if missing:
                return bad(i, f"correction depends on outcome {sorted(map(str, missing))[0]!r} not yet produced")
    dead = [q for q in p.outputs if q not in live]
    if dead:
        return bad(None, f"output {dead[0]!r} is not live at the end")
    loose = [q for q in p.register if q in live and q not in p.outputs]
    if loose:
        return bad(None, f"qubit {loose[0]!r} is neither measured nor an output")
    return Report(True)


# ---------------------------------------------------------------------------
# Branch diagrams


def _effect(plane: str, angle: float, var) -> zx.ZxDiagram:
    p, a = flow.effect_label(plane, angle)
    return zx.measurement_effect(p, a, var)


def _diagram(p: Pattern, success: dict, keep_live=None) -> zx.ZxDiagram:
    """Diagram for a fixed success assignment; outcome variables stay symbolic."""
    for c in p.measurements:
        if isinstance(c.angle, str):
            raise PatternError(f"unbound angle {c.angle!r}; call Pattern.bind first")
    b = zx.WireBuilder(p.inputs)
    for c in p.commands:
        if isinstance(c, N):
            b.prepare(c.q)
        elif isinstance(c, E):
            b.splice([c.a, c.b], zx.cz())
        elif isinstance(c, M):
            b.splice([c.q], _effect(c.plane, c.angle, c.var))
        elif isinstance(c, C):
            gate = zx.rotation(c.kind, zx.Phase.pi(c.cond.const, 1, c.cond.vars))
            b.splice([c.q], gate)
        elif isinstance(c, F):
            if c.plane == "Y" and success[c.s]:
                for q in (c.a, c.b):
                    b.splice([q], zx.rotation("Z", zx.Phase.pi(1, 2)))
            if success[c.s]:
                f = ("fusion", c.s)
                b.prepare(f)
                b.splice([f, c.a], zx.cz())
                b.splice([f, c.b], zx.cz())
                b.splice([f], _effect(c.plane, 0.0, c.k))
                b.d.scalar = b.d.scalar.with_stars(1)
            else:
                cq = zx.Phase.pi(0 if c.plane == "X" else 1, 2)
                b.splice([c.a], zx.rotation("Z", cq + zx.Phase.pi(1, 1, [c.k])))
                b.splice([c.b], zx.rotation("Z", cq + zx.Phase.pi(0, 1, [c.k])))
                b.d.scalar = b.d.scalar.with_stars(2)
    outs = p.outputs if keep_live is None else keep_live
    return b.finish(outs)


@dataclass
class Branch:
    outcomes: dict
    diagram: zx.ZxDiagram
    success: bool

    @property
    def matrix(self) -> np.ndarray:
        return zx.eval_tensor(self.diagram)


def _outcome_vars(p: Pattern) -> list:
    vs = [c.var for c in p.measurements]
    vs += [c.k for c in p.fusions]
    return vs


def enumerate_branches(p: Pattern, success_only: bool = True) -> list:
    """All ``2^(m+f)`` success branches, or all ``2^(m+2f)`` branches."""
    rep = is_runnable(p)
    if not rep:
        raise PatternError(f"pattern not runnable: {rep.reason}")
    svars = [c.s for c in p.fusions]
    kvars = _outcome_vars(p)
    out = []
    s_choices = [tuple(1 for _ in svars)] if success_only else list(itertools.product((1, 0), repeat=len(svars)))
    for s_bits in s_choices:
        succ = dict(zip(svars, s_bits))
        d = _diagram(p, succ)
        for k_bits in itertools.product((0, 1), repeat=len(kvars)):
            assign = dict(zip(kvars, k_bits))
            outcomes = {**succ, **assign}
            out.append(Branch(outcomes, zx.substitute(d, assign), all(s_bits)))
    return out


def branch_matrices(p: Pattern) -> list:
    """``(outcomes, matrix)`` for every success branch, sharing one diagram."""
    succ = {c.s: 1 for c in p.fusions}
    d = _diagram(p, succ)
    kvars = _outcome_vars(p)
    res = []
    for k_bits in itertools.product((0, 1), repeat=len(kvars)):
        assign = dict(zip(kvars, k_bits))
        res.append(({**succ, **assign}, zx.eval_tensor(d, assign)))
    return res


# ---------------------------------------------------------------------------
# Determinism


@dataclass
class DeterminismReport:
    ok: bool
    mode: str
    failures: list = field(default_factory=list)
    ratios: list = field(default_factory=list)

    def __bool__(self):
        return self.ok


def _compare(mats, strong: bool, tol: float):
    """Check that all maps are non-zero multiples of the first non-zero one."""
    ref = next((m for _, m in mats if np.abs(m).max(initial=0) > tol), None)
    if ref is None:
        return False, "all branches vanish", []
    ratios = []
    for outcome, m in mats:
        lam = zx.proportionality(m, ref, tol)
        if lam is None or abs(lam) <= tol:
            return False, f"branch {outcome} is not a non-zero multiple of the reference", ratios
        if strong and abs(abs(lam) - 1) > tol:
            return False, f"branch {outcome} has amplitude ratio {abs(lam):.6g}", ratios
        ratios.append(lam)
    return True, "", ratios


def truncations(p: Pattern) -> list:
    """Sub-patterns cut after each measurement, keeping pending corrections.

    Later corrections that depend on any outcome produced before the cut are
    kept, with their conditions restricted to those outcomes; qubits still
    live become outputs.
    """
    subs = []
    for i, c in enumerate(p.commands):
        if not isinstance(c, M):
            continue
        head = p.commands[: i + 1]
        produced = set()
        live = list(p.inputs)
        for h in head:
            if isinstance(h, N):
                live.append(h.q)
            elif isinstance(h, M):
                produced.add(h.var)
                live.remove(h.q)
            elif isinstance(h, F):
                produced |= {h.s, h.k}
        tail = [t for t in p.commands[i + 1:] if isinstance(t, C) and t.cond.vars & produced and t.q in live]
        tail = [C(t.kind, t.q, t.cond.restrict(produced)) for t in tail]
        outs = [q for q in p.register if q in set(live)]
        subs.append(Pattern(p.register, p.inputs, outs, head + tail))
    return subs


def sample_angles(p: Pattern, n: int = 5, seed: int = 0) -> list:
    """Angle assignments for uniformity checks: all zero plus ``n`` random."""
    sites = p.angle_sites()
    rng = random.Random(seed)
    out = [{q: 0.0 for q in sites}]
    for _ in range(n):
        out.append({q: rng.random() * 2 * math.pi for q in sites})
    return out


def check_determinism(p: Pattern, mode: str = "plain", angle_samples=None, tol: float = 1e-8) -> DeterminismReport:
    """Determinism on success.

    Parameters
    ----------
    mode : {"plain", "strong", "stepwise"}
        ``strong`` also requires unit-modulus ratios; ``stepwise`` runs the
        plain check on the pattern and on every truncation.
    angle_samples : list of dict, optional
        Angle assignments (qubit -> radians) to re-check at; the pattern's own
        angles are always checked.  Uniform determinism is approximated this
        way.
    """
    if mode not in ("plain", "strong", "stepwise"):
        raise PatternError(f"unknown mode {mode!r}")
    rep = is_runnable(p)
    if not rep:
        return DeterminismReport(False, mode, [f"not runnable: {rep.reason}"])
    runs = [("given", p)] + [(f"angles#{i}", p.bind(a)) for i, a in enumerate(angle_samples or [])]
    failures, ratios = [], []
    for label, q in runs:
        pats = [(label, q)]
        if mode == "stepwise":
            pats += [(f"{label}/cut{j}", t) for j, t in enumerate(truncations(q))]
        for lab, t in pats:
            ok, why, rs = _compare(branch_matrices(t), mode == "strong", tol)
            if lab == label:
                ratios.append(rs)
            if not ok:
                failures.append(f"{lab}: {why}")
    return DeterminismReport(not failures, mode, failures, ratios)


# ---------------------------------------------------------------------------
# Synthesis from flow


def pattern_from_flow(n: FusionNetwork, cert: FlowCertificate) -> Pattern:
    """XY-fusion pattern realising the network's target map on success.

    All fusions come first, before any correction (the certificate must
    place fusion nodes before every other vertex, as
    :func:`flow.find_xy_flow` does).  Each measured
    vertex ``v`` triggers ``X`` on ``p(v)`` and ``Z`` on ``Odd(p(v))``,
    restricted to register qubits strictly after ``v``.  Corrections that
    would land on a Pauli-measured fusion node are folded into that node's
    outcome instead.
    """
    res = flow.verify_xy_flow(n, cert)
    if not res:
        raise FlowError(f"certificate is not an XY-flow: condition {res.condition} at {res.vertex!r}")
    t = flow.target_open_graph(n)
    fnodes = n.fusion_nodes()
    for f in fnodes:
        if any(not cert.less(f, v) for v in t.vertices if v not in fnodes):
            raise FlowError("pattern synthesis needs fusion nodes before all other vertices")
    g = n.graph
    adj = t.adjacency()
    var = {v: f"m_{v}" for v in g.measured}
    fus = {f.name: f for f in n.fusions}
    eff = {}
    for f in n.fusions:
        eff[f.name] = Cond.of(f"k_{f.name}")
    for v in g.measured:
        eff[v] = Cond.of(var[v])

    cmds = [N(q) for q in g.vertices if q not in g.inputs]
    cmds += [E(*sorted(e, key=g.vertices.index)) for e in sorted(g.edges, key=lambda e: sorted(map(g.vertices.index, e)))]
    order = [v for v in cert.measurement_order(t.vertices) if v not in t.outputs]
    order = [v for v in order if v in fus] + [v for v in order if v not in fus]
    for v in order:
        if v in fus:
            f = fus[v]
            cmds.append(F(f.a, f.b, f.plane, f"s_{v}", f"k_{v}", v))
    for v in order:
        if v not in fus:
            cmds.append(M(v, g.planes[v], g.angles[v], var[v]))
        s = set(cert.p[v])
        odd = set()
        for u in s:
            odd ^= adj[u]
        cond = eff[v]
        for w in t.vertices:
            if w == v or not cert.less(v, w):
                continue
            in_s, in_odd = w in s, w in odd
            if not (in_s or in_odd):
                continue
            if w in fus:
                # Pauli node: X and Z act on its outcome
                flip = (in_s if t.planes[w] in ("Y", "Z") else 0) ^ (in_odd if t.planes[w] in ("X", "Y") else 0)
                if flip:
                    eff[w] = eff[w] ^ cond
                continue
            # the Y fusions' Z(pi/2) already acted, so conjugate X into XZ
            if in_s and n.clifford.get(w, 0) % 2:
                in_odd = not in_odd
            if in_s:
                cmds.append(C("X", w, cond))
            if in_odd:
                cmds.append(C("Z", w, cond))
    return Pattern(g.vertices, g.inputs, g.outputs, cmds)


def underlying_network(p: Pattern) -> FusionNetwork:
    """Forget corrections: resource graph from E, fusions from F, labels from M."""
    rep = is_runnable(p)
    if not rep:
        raise PatternError(f"pattern not runnable: {rep.reason}")
    edges, planes, angles, fusions = set(), {}, {}, []
    for c in p.commands:
        if isinstance(c, E):
            edges ^= {frozenset((c.a, c.b))}
        elif isinstance(c, M):
            planes[c.q] = c.plane
            angles[c.q] = c.angle if not isinstance(c.angle, str) else 0.0
        elif isinstance(c, F):
            fusions.append(Fusion(c.a, c.b, c.plane, 0.0, c.name if c.name is not None else f"f{len(fusions)}"))
    g = OpenGraph(p.register, edges, p.inputs, p.outputs, planes, angles)
    return FusionNetwork.xy(g, fusions)


def network_target_map(n: FusionNetwork) -> zx.ZxDiagram:
    """Map realised on success by a pattern for ``n``: the target graph's map."""
    return target_linear_map(flow.target_open_graph(n))


def target_linear_map(g: OpenGraph) -> zx.ZxDiagram:
    """``T(M) = prod <+_{lambda,alpha}| E_G N`` as a diagram from inputs to outputs."""
    return flow.target_map_diagram(g)


def xy_pattern_example(alpha: float | str = "a") -> Pattern:
    """The four-qubit XY-fusion pattern with one X fusion between qubits 1 and 3."""
    text = f"[X 4]^{{l}} [Z 2]^{{j}} [X 2]^{{k}} M{{XY,{_fmt_angle(alpha)},l}} 3 M{{X,k}} 1 F{{X,s,j}} 1 3 E 3 4 E 1 2 N 4 N 3 N 2 N 1"
    return Pattern.from_text(text, outputs=[2, 4])
