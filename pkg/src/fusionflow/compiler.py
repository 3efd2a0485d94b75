"""Compilation pipeline: open graph -> linear XY network -> pattern -> emitter schedule -> verdicts.

The physical model is one spin emitter producing GHZ blocks (one per register
qubit, joined by a Hadamard on the atom), a router that reorders photons in
time, repeat-until-success fusion blocks and single-photon measurement
modules.  Verification contracts the all-success branch of that protocol.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import flow, fusion, patterns, streams, zx
from .flow import FlowError, Fusion, FusionNetwork, OpenGraph, _edge
from .patterns import E, F, M, Pattern

TOL = 1e-6


class CompileError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Inputs as reference outputs


def close_inputs(g: OpenGraph, prefix: str = "ref") -> tuple:
    """Bend every input into a fresh output joined to it by one edge.

    With ``H`` on the new outputs the closed graph's state is the Choi state
    of ``T(g)``.  Returns ``(closed_graph, {input: reference_vertex})``.
    """
    refs = {}
    vs, edges = list(g.vertices), set(g.edges)
    for v in g.vertices:
        if v in g.inputs:
            r = f"{prefix}.{v}"
            if r in vs:
                raise CompileError(f"vertex {r!r} already exists")
            refs[v] = r
            vs.append(r)
            edges.add(_edge(v, r))
    outs = set(g.outputs) | set(refs.values())
    return OpenGraph(vs, edges, frozenset(), frozenset(outs), dict(g.planes), dict(g.angles)), refs


def choi_to_matrix(state: np.ndarray, out_order: list, refs: dict, inputs: list, outputs: list) -> np.ndarray:
    """Undo :func:`close_inputs`: ``H`` on references, then reshape to outputs x inputs."""
    n = len(out_order)
    t = np.asarray(state, dtype=complex).reshape([2] * n) if n else np.asarray(state, dtype=complex)
    h = np.array([[1, 1], [1, -1]]) / math.sqrt(2)
    pos = {v: i for i, v in enumerate(out_order)}
    for v in inputs:
        ax = pos[refs[v]]
        t = np.moveaxis(np.tensordot(h, t, axes=([1], [ax])), 0, ax)
    perm = [pos[v] for v in outputs] + [pos[refs[v]] for v in inputs]
    t = np.transpose(t, perm) if n else t
    return t.reshape(2 ** len(outputs), 2 ** len(inputs))


# ---------------------------------------------------------------------------
# Hamiltonian linearization


@dataclass
class LinearNetwork:
    """A linear XY network and how its ports relate to the source graph.

    ``network.graph.vertices`` is the line order.  ``outputs`` maps each
    source output to the vertex carrying it (itself or the end of a tail).
    """

    network: FusionNetwork
    line: list
    outputs: dict
    bridges: list = field(default_factory=list)
    tails: list = field(default_factory=list)

    @property
    def fusions(self) -> int:
        return len(self.network.fusions)


def _visit_order(g: OpenGraph) -> list:
    """DFS order that prefers neighbours with the fewest unvisited neighbours."""
    adj = g.adjacency()
    idx = {v: i for i, v in enumerate(g.vertices)}
    left = set(g.vertices)
    order, cur = [], None
    while left:
        cands = [w for w in adj[cur] if w in left] if cur is not None else []
        if not cands:
            cands = list(left)
        cur = min(cands, key=lambda w: (len(adj[w] & left), idx[w]))
        order.append(cur)
        left.discard(cur)
    return order


def hamiltonian_linearize(g: OpenGraph) -> LinearNetwork:
    """Linear XY network with the same target map as ``g``.

    Consecutive vertices of a DFS order form the line; a Z-measured bridge
    joins consecutive vertices that are not adjacent.  Remaining edges become
    Y fusions.  An output touched by a fusion is measured in X instead and its
    wire continues through a two-vertex X-measured tail.

    Raises
    ------
    FlowError
        If ``g`` has no Pauli flow, or (not expected) the result has no XY-flow.
    """
    if flow.find_pauli_flow(g) is None:
        raise FlowError("graph has no Pauli flow")
    seq = _visit_order(g)
    edges = set(g.edges)
    planes, angles = dict(g.planes), dict(g.angles)
    outputs = set(g.outputs)
    out_map = {o: o for o in g.outputs}
    tails = []
    while True:
        on_line = {_edge(a, b) for a, b in zip(seq, seq[1:]) if _edge(a, b) in edges}
        bad = [o for o in seq if o in outputs and any(o in e and e not in on_line for e in edges)]
        if not bad:
            break
        for o in bad:
            t, o2 = f"{o}.t", f"{o}.o"
            if t in seq or o2 in seq:
                raise CompileError(f"name clash extending output {o!r}")
            i = seq.index(o)
            seq[i + 1:i + 1] = [t, o2]
            edges |= {_edge(o, t), _edge(t, o2)}
            outputs.discard(o)
            outputs.add(o2)
            planes[o] = planes[t] = "X"
            angles[o] = angles[t] = 0.0
            src = next(k for k, v in out_map.items() if v == o)
            out_map[src] = o2
            tails.append(o)
    on_line = {_edge(a, b) for a, b in zip(seq, seq[1:]) if _edge(a, b) in edges}
    line, bridges, line_edges = [], [], set()
    for i, v in enumerate(seq):
        if i and _edge(seq[i - 1], v) not in edges:
            z = f"z{len(bridges)}"
            while z in seq:
                z += "'"
            bridges.append(z)
            line.append(z)
            planes[z], angles[z] = "Z", 0.0
        line.append(v)
    for a, b in zip(line, line[1:]):
        line_edges.add(_edge(a, b))
    rest = sorted((e for e in edges if e not in on_line), key=lambda e: sorted(line.index(x) for x in e))
    fusions = [Fusion(*sorted(e, key=line.index), "Y", 0.0, f"y{i}") for i, e in enumerate(rest)]
    res = OpenGraph(line, line_edges, g.inputs, frozenset(outputs), planes, angles)
    net = FusionNetwork.xy(res, fusions)
    return LinearNetwork(net, line, out_map, bridges, tails)


def network_map(lin: LinearNetwork, g: OpenGraph) -> np.ndarray:
    """``T`` of the linear network with ports in ``g``'s vertex order."""
    net = lin.network
    m = zx.eval_tensor(patterns.network_target_map(net))
    outs = [v for v in net.graph.vertices if v in net.graph.outputs]
    ins = [v for v in net.graph.vertices if v in net.graph.inputs]
    want_out = [lin.outputs[v] for v in g.vertices if v in g.outputs]
    want_in = [v for v in g.vertices if v in g.inputs]
    return _permute_ports(m, outs, want_out, ins, want_in)


def _permute_ports(m, outs, want_out, ins, want_in) -> np.ndarray:
    no, ni = len(outs), len(ins)
    t = m.reshape([2] * (no + ni)) if no + ni else m
    perm = [outs.index(v) for v in want_out] + [no + ins.index(v) for v in want_in]
    t = np.transpose(t, perm) if perm else t
    return t.reshape(2 ** no, 2 ** ni)


# ---------------------------------------------------------------------------
# Scheduling


_SPECS = {"X": fusion.x_fusion, "Y": fusion.y_fusion}


def rounds_for(f: int, epsilon: float) -> int:
    """Smallest odd ``k`` with ``(1 - 2^-k)^f > 1 - epsilon``."""
    if not 0 < epsilon < 1:
        raise CompileError("epsilon must lie in (0, 1)")
    k = 1
    while (1 - 2.0 ** -k) ** f <= 1 - epsilon:
        k += 2
    return k


@dataclass
class ScheduleParams:
    """Settings of the emitter protocol for one linear pattern.

    Photons are emitted block by block (``blocks[q]`` photons for register
    qubit ``q``); ``u[t]`` is the atom unitary after photon ``t`` ("I" or
    "H").  ``sigma[t]`` is the slot photon ``t`` is routed to; slots hold the
    fusion rounds first, then one final photon per qubit.  ``router`` is the
    delay-line setting realising ``sigma``.
    """

    k: int
    epsilon: float
    fusions: list
    register: list
    blocks: dict
    u: list
    roles: list
    sigma: list
    slots: list
    planes: dict
    angles: dict
    z: dict
    router: streams.RouterSetup
    restart: str = "restart the whole computation when a fusion block fails all k rounds"

    @property
    def photons(self) -> int:
        return len(self.u)

    @property
    def success_bound(self) -> float:
        return (1 - 2.0 ** -self.k) ** len(self.fusions)

    def to_json(self) -> dict:
        return {
            "k": self.k, "epsilon": self.epsilon, "success_bound": self.success_bound,
            "fusions": [list(map(str, f[:2])) + [f[2], str(f[3])] for f in self.fusions],
            "register": [str(q) for q in self.register],
            "blocks": {str(q): n for q, n in self.blocks.items()},
            "u": self.u, "roles": [[str(x) for x in r] for r in self.roles],
            "sigma": self.sigma,
            "slots": [[str(x) for x in s] for s in self.slots],
            "planes": {str(q): p for q, p in self.planes.items()},
            "angles": {str(q): a for q, a in self.angles.items()},
            "z": {str(q): b for q, b in self.z.items()},
            "router": {"lines": self.router.lines, "x": {str(t): v for t, v in self.router.x.items()},
                       "y": {str(t): v for t, v in self.router.y.items()}},
            "restart": self.restart,
        }


def is_linear(p: Pattern) -> bool:
    pos = {q: i for i, q in enumerate(p.register)}
    return all(abs(pos[c.a] - pos[c.b]) == 1 for c in p.commands if isinstance(c, E))


def schedule_protocol(p: Pattern, k: int | None = None, epsilon: float = 0.05) -> ScheduleParams:
    """Emitter, router and module settings for a runnable linear pattern.

    Qubit ``q`` gets ``k f_q + 1`` GHZ photons (``f_q`` fusions on it): ``k``
    rounds per fusion and one final photon for its measurement or output.
    Between blocks the atom gets ``H`` when ``E_{q,q+1}`` is present, else a
    Z-measured spacer photon is emitted between two Hadamards.  RUS phases
    left after the success round become ``z`` corrections on the endpoints.
    """
    rep = patterns.is_runnable(p)
    if not rep:
        raise CompileError(f"pattern not runnable: {rep.reason}")
    if not is_linear(p):
        raise CompileError("pattern is not linear: entangling commands must join register neighbours")
    if p.inputs:
        raise CompileError("the emitter protocol takes no inputs; close them first")
    fus = [c for c in p.commands if isinstance(c, F)]
    f = len(fus)
    if k is None:
        k = rounds_for(f, epsilon)
    elif k < 1 or k % 2 == 0:
        raise CompileError("k must be a positive odd integer")
    elif (1 - 2.0 ** -k) ** f <= 1 - epsilon:
        raise CompileError(f"k = {k} gives success {(1 - 2.0 ** -k) ** f:.6f}, not above {1 - epsilon}")
    meas = {c.q: c for c in p.commands if isinstance(c, M)}
    counts = {q: 0 for q in p.register}
    for c in fus:
        counts[c.a] += 1
        counts[c.b] += 1
    z = {q: 0 for q in p.register}
    for c in fus:
        phis = streams._base_phases(_SPECS[c.plane]())
        for q, phi in zip((c.a, c.b), phis):
            x = (k - 1) * phi / math.pi
            if abs(x - round(x)) > 1e-9:
                raise CompileError(f"{k} rounds leave a non-Pauli phase on {q!r}")
            z[q] ^= int(round(x)) % 2
    edges = {frozenset((c.a, c.b)) for c in p.commands if isinstance(c, E)}
    u, roles, blocks = [], [], {}
    for i, q in enumerate(p.register):
        blocks[q] = k * counts[q] + 1
        roles.append(("final", q))
        for j, c in enumerate(fus):
            if q in (c.a, c.b):
                side = 0 if q == c.a else 1
                roles += [("fusion", j, r, side) for r in range(k)]
        u += ["I"] * blocks[q]
        if i + 1 < len(p.register):
            if frozenset((q, p.register[i + 1])) in edges:
                u[-1] = "H"
            else:
                u[-1] = "H"
                roles.append(("spacer", q))
                u.append("H")
    slots = [("fusion", j, r, side) for j in range(f) for r in range(k) for side in (0, 1)]
    slots += [("final", q) for q in p.register]
    slots += [r for r in roles if r[0] == "spacer"]
    index = {s: i for i, s in enumerate(slots)}
    sigma = [index[r] for r in roles]
    planes = {q: meas[q].plane for q in meas}
    angles = {q: meas[q].angle for q in meas}
    fl = [(c.a, c.b, c.plane, c.name) for c in fus]
    return ScheduleParams(k, epsilon, fl, list(p.register), blocks, u, roles, sigma, slots, planes, angles, z,
                          streams.permutation_schedule(sigma))


# ---------------------------------------------------------------------------
# Protocol unrolling


def success_branch(params: ScheduleParams, outputs: list) -> zx.ZxDiagram:
    """All-success branch of the scheduled protocol, outcomes 0, as a state on ``outputs``.

    The emitter is unrolled as a stream, photons are relabelled by the
    router's time-bin transfer, and every slot is closed by its module:
    first-round fusion success, failure-basis measurements in later rounds,
    corrected single-qubit measurements, and Z on spacers.
    """
    n = params.photons
    us = [zx.hadamard() if x == "H" else None for x in params.u]
    em = streams.emitter(lambda t: us[t] if us[t] is not None else zx.identity())
    unrolled = streams.unroll(em, n - 1)
    b = zx.WireBuilder()
    b.prepare("atom")
    b.splice(["atom"], unrolled.diagram, [("photon", t) for t in range(n)] + ["atom"])
    b.splice(["atom"], zx.measurement_effect("X"))
    routed = params.router.route({t: t for t in range(n)}, 2 * n + 2 * n)
    slot_of = {label: time - n for time, label in routed.items()}
    if sorted(slot_of) != list(range(n)) or any(slot_of[t] != params.sigma[t] for t in range(n)):
        raise CompileError("router does not realise the scheduled permutation")
    wire = {params.slots[slot_of[t]]: ("photon", t) for t in range(n)}
    for j, (a, c, plane, _) in enumerate(params.fusions):
        spec = _SPECS[plane]()
        maps = fusion.branch_maps(spec)
        b.splice([wire["fusion", j, 0, 0], wire["fusion", j, 0, 1]], zx.substitute(maps.success, {"k": 0, "j": 0}))
        phis = streams._base_phases(spec)
        for r in range(1, params.k):
            for side in (0, 1):
                b.splice([wire["fusion", j, r, side]], zx.measurement_effect("XY", phis[side]))
    for s in params.slots:
        if s[0] == "spacer":
            b.splice([wire[s]], zx.measurement_effect("Z"))
    for q in params.register:
        w = wire["final", q]
        if params.z.get(q):
            b.splice([w], zx.rotation("Z", math.pi))
        if q in params.planes:
            plane, ang = flow.effect_label(params.planes[q], params.angles[q])
            b.splice([w], zx.measurement_effect(plane, ang))
    return b.finish([wire["final", q] for q in outputs])


# ---------------------------------------------------------------------------
# Reports


@dataclass
class Check:
    id: str
    passed: bool
    detail: str = ""

    def to_json(self) -> dict:
        return {"id": self.id, "passed": bool(self.passed), "detail": self.detail}


@dataclass
class CompilationReport:
    graph: OpenGraph
    closed: OpenGraph
    refs: dict
    linear: LinearNetwork
    certificate: flow.FlowCertificate
    pattern: Pattern
    schedule: ScheduleParams
    checks: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def metrics(self) -> dict:
        net = self.linear.network
        return {"register": len(net.graph.vertices), "fusions": len(net.fusions), "bridges": len(self.linear.bridges),
                "tails": len(self.linear.tails), "photons": self.schedule.photons, "k": self.schedule.k,
                "commands": len(self.pattern.commands)}

    def to_json(self) -> dict:
        return {
            "graph": self.graph.to_json(),
            "network": self.linear.network.to_json(),
            "line": [str(v) for v in self.linear.line],
            "certificate": self.certificate.to_json(),
            "pattern": self.pattern.to_text(),
            "schedule": self.schedule.to_json(),
            "metrics": self.metrics(),
            "checks": [c.to_json() for c in self.checks],
            "ok": self.ok,
        }


def compile_graph(g: OpenGraph, epsilon: float = 0.05, k: int | None = None) -> CompilationReport:
    """Run the pipeline without verification (see :func:`verify_compilation`)."""
    closed, refs = close_inputs(g)
    lin = hamiltonian_linearize(closed)
    cert = flow.find_xy_flow(lin.network)
    if cert is None:
        raise FlowError("linear network has no XY-flow")
    p = patterns.pattern_from_flow(lin.network, cert)
    sched = schedule_protocol(p, k, epsilon)
    return CompilationReport(g, closed, refs, lin, cert, p, sched)


def _close(a, b, tol) -> tuple:
    """Equality up to global scalar on normalised maps; returns (ok, distance)."""
    # scale-free: long protocols carry tiny overall scalars
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        return False, float("inf")
    a, b = a / na, b / nb
    ov = np.vdot(b, a)
    ph = ov / abs(ov) if abs(ov) > 0 else 1.0
    dist = float(np.abs(a - ph * b).max())
    return dist <= tol, dist


def unitary_of(report: CompilationReport) -> np.ndarray:
    """Map implemented by the all-success branch, as outputs x inputs of the source graph."""
    g, net = report.graph, report.linear.network
    outs = [v for v in net.graph.vertices if v in net.graph.outputs]
    state = zx.eval_tensor(success_branch(report.schedule, outs)).ravel()
    inv = {v: k for k, v in report.linear.outputs.items()}
    names = [inv[v] for v in outs]
    return choi_to_matrix(state, names, report.refs, [v for v in g.vertices if v in g.inputs],
                          [v for v in g.vertices if v in g.outputs])


def verify_compilation(report: CompilationReport, horizon: int | None = None, tol: float = TOL,
                       determinism_cap: int = 12) -> CompilationReport:
    """Re-run every check of a compilation and store the verdicts on ``report``.

    Check ids: ``flow.source``, ``linear.target``, ``linear.flow``,
    ``pattern.runnable``, ``pattern.linear``, ``pattern.determinism``
    (skipped above ``2**determinism_cap`` branches), ``schedule.bound``,
    ``schedule.parity``, ``protocol.horizon``, ``protocol.unitary``.
    """
    g = report.graph
    checks = []
    target = zx.eval_tensor(flow.target_map_diagram(g))
    checks.append(Check("flow.source", flow.find_pauli_flow(g) is not None))
    ok, dist = _close(network_map(report.linear, report.closed), zx.eval_tensor(flow.target_map_diagram(report.closed)), tol)
    checks.append(Check("linear.target", ok, f"distance {dist:.2e}"))
    checks.append(Check("linear.flow", bool(flow.verify_xy_flow(report.linear.network, report.certificate))))
    rep = patterns.is_runnable(report.pattern)
    checks.append(Check("pattern.runnable", bool(rep), rep.reason if not rep else ""))
    checks.append(Check("pattern.linear", is_linear(report.pattern)))
    n_br = len(report.pattern.measurements) + len(report.pattern.fusions)
    if n_br <= determinism_cap:
        det = patterns.check_determinism(report.pattern, "strong")
        checks.append(Check("pattern.determinism", bool(det), "; ".join(det.failures[:2])))
    else:
        checks.append(Check("pattern.determinism", True, f"skipped: 2^{n_br} branches"))
    s = report.schedule
    checks.append(Check("schedule.bound", s.success_bound > 1 - s.epsilon, f"{s.success_bound:.6f} > {1 - s.epsilon}"))
    checks.append(Check("schedule.parity", s.k % 2 == 1, f"k = {s.k}"))
    if horizon is not None and s.photons > horizon:
        checks.append(Check("protocol.horizon", False, f"{s.photons} photons exceed {horizon} steps"))
    else:
        checks.append(Check("protocol.horizon", True, f"{s.photons} photons"))
        ok, dist = _close(unitary_of(report), target, tol)
        checks.append(Check("protocol.unitary", ok, f"distance {dist:.2e}"))
    report.checks = checks
    return report
