"""Stream processes over ZX diagrams and the optical modules built from them.

A stream step at time ``t`` maps ``M_t (x) X_t`` to ``M_{t+1} (x) Y_t``.  Every
wire is a qubit, so a type sequence is given by its widths.  A step may
offer several fragments: instrument branches whose concrete outcomes
(fusion success bits, say) steer later switches.  Outcomes that never steer
anything stay symbolic inside the fragment, namespaced as ``(name, t)``.

Routing in time (routers, delays, permutations) lives at the mode level in
:class:`RouterSetup`, since a router with several outputs has no qubit
counterpart.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import fusion, optics, zx
from .fusion import FusionSpec
from .zx import Phase, Scalar, ZxDiagram


class StreamError(ValueError):
    pass


class ExpressibilityError(StreamError):
    """A component has no realisation in the requested mode."""


# ---------------------------------------------------------------------------
# Stream processes


@dataclass
class Fragment:
    """One instrument branch of a step: fixed control outcomes and a diagram."""

    outcomes: dict
    diagram: ZxDiagram


def _const(w: int) -> Callable[[int], int]:
    return lambda t: w


@dataclass
class StreamProcess:
    """Memory widths ``memory(t)``, port widths and a step generator.

    ``step(t, history)`` returns a list of :class:`Fragment`; ``history`` holds
    the control outcomes of earlier steps.  ``lo`` optionally gives the
    per-step optical circuit (dual-rail, one qubit in, detectors named
    ``"a"``) for memoryless single-qubit modules.
    """

    memory: Callable[[int], int]
    n_in: Callable[[int], int]
    n_out: Callable[[int], int]
    step: Callable[[int, dict], list]
    name: str = "stream"
    lo: Callable[[int], optics.LoCircuit] | None = None
    offset: int = 0

    def fragments(self, t: int, history: dict | None = None) -> list:
        frags = self.step(t + self.offset, history or {})
        if isinstance(frags, ZxDiagram):
            frags = [Fragment({}, frags)]
        want = (self.memory(t) + self.n_in(t), self.memory(t + 1) + self.n_out(t))
        for f in frags:
            got = (f.diagram.n_inputs, f.diagram.n_outputs)
            if got != want:
                raise StreamError(f"{self.name}: step {t} has arity {got}, expected {want}")
        return frags

    def now(self, history=None) -> list:
        return self.fragments(0, history)

    def later(self) -> "StreamProcess":
        """The stream from time 1 on (its time 0 is this stream's time 1)."""
        m, i, o = self.memory, self.n_in, self.n_out
        return StreamProcess(lambda t: m(t + 1), lambda t: i(t + 1), lambda t: o(t + 1), self.step,
                             self.name + "+", None if self.lo is None else (lambda t, f=self.lo: f(t + 1)),
                             self.offset + 1)


def memoryless(fn: Callable[[int], ZxDiagram], n_in, n_out, name="memoryless", lo=None) -> StreamProcess:
    n_in = _const(n_in) if isinstance(n_in, int) else n_in
    n_out = _const(n_out) if isinstance(n_out, int) else n_out
    return StreamProcess(_const(0), n_in, n_out, lambda t, h: fn(t), name, lo)


def constant(d: ZxDiagram, name: str = "constant") -> StreamProcess:
    return memoryless(lambda t: d, d.n_inputs, d.n_outputs, name)


def identity_stream(width: int = 1) -> StreamProcess:
    return constant(zx.identity(width), "id")


def _permutation(widths: list, order: list) -> ZxDiagram:
    """Wire permutation: input blocks of ``widths`` come out in block ``order``."""
    d = ZxDiagram()
    ins = []
    for w in widths:
        ins.append([d.add_input() for _ in range(w)])
    for blk in order:
        for v in ins[blk]:
            d.add_edge(v, d.add_output())
    return d


def swap_stream(w1, w2) -> StreamProcess:
    """``X (x) Y -> Y (x) X`` for width sequences ``w1``, ``w2``."""
    w1 = _const(w1) if isinstance(w1, int) else w1
    w2 = _const(w2) if isinstance(w2, int) else w2
    return memoryless(lambda t: _permutation([w1(t), w2(t)], [1, 0]),
                      lambda t: w1(t) + w2(t), lambda t: w1(t) + w2(t), "swap")


def feedback(s: StreamProcess, k, initial: int = 0) -> StreamProcess:
    """``fbk_S(s)`` for ``s : dS (x) X -> S (x) Y`` with ``S`` of width ``k``.

    The fed-back wires join the memory: ``M'_t = M_t (x) S_{t-1}``, where
    ``S_{-1}`` is ``initial`` fresh memory lanes.  Wire order inside each
    fragment is memory, then ``S``, then the ports, so the fragments are
    reused unchanged.
    """
    k = _const(k) if isinstance(k, int) else k

    def ds(t):
        return k(t - 1) if t > 0 else initial

    return StreamProcess(lambda t: s.memory(t) + ds(t), lambda t: s.n_in(t) - ds(t),
                         lambda t: s.n_out(t) - k(t), s.step, f"fbk({s.name})", None, s.offset)


def _seq_fragment(f1: Fragment, f2: Fragment, m1: int, m2: int, x: int, z: int, m1n: int, m2n: int, y: int) -> Fragment:
    """Fragment of ``s1 ; s2`` from fragments of both, wires ``M1 M2 X -> M1' M2' Y``."""
    b = zx.WireBuilder([("m1", i) for i in range(m1)] + [("m2", i) for i in range(m2)] + [("x", i) for i in range(x)])
    b.splice([("m1", i) for i in range(m1)] + [("x", i) for i in range(x)], f1.diagram,
             [("m1n", i) for i in range(m1n)] + [("z", i) for i in range(z)])
    b.splice([("m2", i) for i in range(m2)] + [("z", i) for i in range(z)], f2.diagram,
             [("m2n", i) for i in range(m2n)] + [("y", i) for i in range(y)])
    d = b.finish([("m1n", i) for i in range(m1n)] + [("m2n", i) for i in range(m2n)] + [("y", i) for i in range(y)])
    return Fragment({**f1.outcomes, **f2.outcomes}, d)


def sequential(s1: StreamProcess, s2: StreamProcess) -> StreamProcess:
    """``s1`` then ``s2``; memory is ``M1 (x) M2``."""

    def step(t, h):
        t1 = t2 = t
        if s1.n_out(t) != s2.n_in(t):
            raise StreamError(f"step {t}: {s1.name} emits {s1.n_out(t)} wires, {s2.name} takes {s2.n_in(t)}")
        out = []
        for f1 in s1.fragments(t1, h):
            for f2 in s2.fragments(t2, {**h, **f1.outcomes}):
                out.append(_seq_fragment(f1, f2, s1.memory(t1), s2.memory(t2), s1.n_in(t1), s1.n_out(t1),
                                         s1.memory(t1 + 1), s2.memory(t2 + 1), s2.n_out(t2)))
        return out

    return StreamProcess(lambda t: s1.memory(t) + s2.memory(t), s1.n_in, s2.n_out,
                         step, f"{s1.name};{s2.name}")


def parallel(s1: StreamProcess, s2: StreamProcess) -> StreamProcess:
    """``s1 (x) s2``; memory ``M1 (x) M2``, ports ``X1 (x) X2 -> Y1 (x) Y2``."""

    def step(t, h):
        t1 = t2 = t
        m1, m2 = s1.memory(t1), s2.memory(t2)
        x1, x2 = s1.n_in(t1), s2.n_in(t2)
        m1n, m2n = s1.memory(t1 + 1), s2.memory(t2 + 1)
        y1, y2 = s1.n_out(t1), s2.n_out(t2)
        out = []
        for f1 in s1.fragments(t1, h):
            for f2 in s2.fragments(t2, h):
                keys = lambda p, n: [(p, i) for i in range(n)]
                b = zx.WireBuilder(keys("m1", m1) + keys("m2", m2) + keys("x1", x1) + keys("x2", x2))
                b.splice(keys("m1", m1) + keys("x1", x1), f1.diagram, keys("m1n", m1n) + keys("y1", y1))
                b.splice(keys("m2", m2) + keys("x2", x2), f2.diagram, keys("m2n", m2n) + keys("y2", y2))
                d = b.finish(keys("m1n", m1n) + keys("m2n", m2n) + keys("y1", y1) + keys("y2", y2))
                out.append(Fragment({**f1.outcomes, **f2.outcomes}, d))
        return out

    return StreamProcess(lambda t: s1.memory(t) + s2.memory(t), lambda t: s1.n_in(t) + s2.n_in(t),
                         lambda t: s1.n_out(t) + s2.n_out(t), step, f"{s1.name}|{s2.name}")


def delay(d: int = 1, width: int = 1) -> StreamProcess:
    """Delay of length ``d``: ``Y_t = X_{t-d}``, with ``Y_t`` for ``t < d`` read from ``M_0``.

    The unit delay is the feedback of the swap ``dX (x) X -> X (x) dX``;
    longer ones chain unit delays.  Memory lane ``i`` belongs to the
    ``i``-th unit, so ``Y_0`` is the last unit's initial lane.
    """
    if d < 0:
        raise StreamError("delay length must be non-negative")
    if d == 0:
        return identity_stream(width)
    s = None
    for _ in range(d):
        unit = feedback(swap_stream(width, width), width, initial=width)
        unit.name = "delay1"
        s = unit if s is None else sequential(s, unit)
    s.name = f"delay{d}"
    return s


def emitter(u: Callable[[int], ZxDiagram] | None = None) -> StreamProcess:
    """Spin emitter: the atom is the memory; each step emits one photon.

    Step ``t``: a Z spider copies the atom onto the photon, then ``u(t)``
    acts on the atom.  ``u = None`` gives a GHZ source, ``u = H`` a linear
    cluster.
    """

    def step(t, h):
        b = zx.WireBuilder([("atom", 0)])
        b.splice([("atom", 0)], zx.z_spider(1, 2), [("atom", 0), ("photon", 0)])
        if u is not None:
            b.splice([("atom", 0)], u(t))
        return b.finish([("atom", 0), ("photon", 0)])

    return StreamProcess(_const(1), _const(0), _const(1), step, "emitter")


_LO_X = [optics.BeamSplitter(0, 1), optics.PhaseShift(1, math.pi), optics.BeamSplitter(0, 1)]


def _lo_correct_measure(plane: str, angle: float, x: int, z: int) -> optics.LoCircuit:
    """Dual-rail ``Z^z`` then ``X^x`` then a measurement; detector ``a`` on mode 1 is outcome 1."""
    from .flow import effect_label

    comps = [optics.PhaseShift(1, math.pi)] if z else []
    if x:
        comps += _LO_X
    p, theta = effect_label(plane, angle)
    if plane == "Z":
        # XZ at 0 or pi: computational basis, flipped for pi
        if abs(math.cos(theta) + 1) < 1e-9:
            comps += _LO_X
    elif p == "XY":
        comps += [optics.PhaseShift(1, theta), optics.BeamSplitter(0, 1)]
    else:
        raise ExpressibilityError(f"no optical measurement for plane {plane!r}")
    comps += [optics.Detector(0, "a0"), optics.Detector(1, "a")]
    return optics.LoCircuit(2, comps)


def measurement_module(plane: Callable[[int], str], angle: Callable[[int], float] = lambda t: 0.0,
                       var: str = "a") -> StreamProcess:
    """Single-qubit measurement at every step; outcome ``(var, t)`` stays symbolic.

    ``plane(t)`` is X, Y, Z or XY (with ``angle(t)``); for Pauli labels the
    angle acts as a sign.
    """
    from .flow import effect_label

    def fn(t):
        p, a = effect_label(plane(t), angle(t))
        return zx.measurement_effect(p, a, (var, t))

    def lo(t):
        return _lo_correct_measure(plane(t), angle(t), 0, 0)

    return memoryless(fn, 1, 0, "measure", lo)


def correction_module(x: Callable[[int], object] = lambda t: 0, z: Callable[[int], object] = lambda t: 0) -> StreamProcess:
    """``X^{x_t} Z^{z_t}`` (Z first) at every step.

    Controls are bits or XOR-sets of outcome variables such as ``{("a", 0)}``.
    """

    def phase(c):
        if isinstance(c, int):
            return Phase.pi(c & 1, 1)
        return Phase(0, frozenset(c))

    def fn(t):
        return zx.compose(zx.rotation("Z", phase(z(t))), zx.rotation("X", phase(x(t))))

    return memoryless(fn, 1, 1, "correct")


def correct_measure_module(plane, angle, x, z, var: str = "a") -> StreamProcess:
    """Correction then measurement with concrete controls; has an optical form."""
    s = sequential(correction_module(x, z), measurement_module(plane, angle, var))

    def lo(t):
        if not isinstance(x(t), int) or not isinstance(z(t), int):
            raise ExpressibilityError("optical mode needs concrete correction bits")
        return _lo_correct_measure(plane(t), angle(t), x(t) & 1, z(t) & 1)

    s.lo = lo
    s.name = "correct-measure"
    return s


# ---------------------------------------------------------------------------
# Unrolling


@dataclass
class UnrolledProtocol:
    """Composite of ``n + 1`` steps.

    Inputs are ``M_0, X_0, ..., X_n`` and outputs ``Y_0, ..., Y_n, M_{n+1}``,
    each block in lane order; ports name them ``(kind, t, lane)``.
    """

    diagram: ZxDiagram
    in_ports: list
    out_ports: list
    outcomes: dict = field(default_factory=dict)

    def matrix(self, assign=None) -> np.ndarray:
        return zx.eval_tensor(self.diagram, assign or {})


def unroll(s: StreamProcess, n: int, choose: Callable[[int, list, dict], int] | None = None) -> UnrolledProtocol:
    """``unroll_n(s)``; ``choose(t, fragments, history)`` picks a branch when a step offers several."""
    if n < 0:
        raise StreamError("unroll needs n >= 0")
    m0 = s.memory(0)
    ins = [("M", 0, i) for i in range(m0)]
    for t in range(n + 1):
        ins += [("X", t, i) for i in range(s.n_in(t))]
    b = zx.WireBuilder(ins)
    mem = [("M", 0, i) for i in range(m0)]
    outs, history = [], {}
    for t in range(n + 1):
        frags = s.fragments(t, history)
        if len(frags) > 1 and choose is None:
            raise StreamError(f"step {t} offers {len(frags)} branches; pass choose")
        f = frags[0] if len(frags) == 1 else frags[choose(t, frags, history)]
        history = {**history, **f.outcomes}
        new_mem = [("M", t + 1, i) for i in range(s.memory(t + 1))]
        ys = [("Y", t, i) for i in range(s.n_out(t))]
        b.splice(mem + [("X", t, i) for i in range(s.n_in(t))], f.diagram, new_mem + ys)
        mem = new_mem
        outs += ys
    outs += mem
    return UnrolledProtocol(b.finish(outs), ins, outs, history)


def unroll_all(s: StreamProcess, n: int) -> list:
    """Unrollings for every sequence of fragment choices."""
    res = []

    def rec(t, b, mem, outs, history, ins):
        if t > n:
            res.append(UnrolledProtocol(b.finish(outs + mem), ins, outs + mem, history))
            return
        for f in s.fragments(t, history):
            bb = b.copy()
            new_mem = [("M", t + 1, i) for i in range(s.memory(t + 1))]
            ys = [("Y", t, i) for i in range(s.n_out(t))]
            bb.splice(mem + [("X", t, i) for i in range(s.n_in(t))], f.diagram, new_mem + ys)
            rec(t + 1, bb, new_mem, outs + ys, {**history, **f.outcomes}, ins)

    ins = [("M", 0, i) for i in range(s.memory(0))]
    for t in range(n + 1):
        ins += [("X", t, i) for i in range(s.n_in(t))]
    rec(0, zx.WireBuilder(ins), [("M", 0, i) for i in range(s.memory(0))], [], {}, ins)
    return res


# ---------------------------------------------------------------------------
# Simulation


@dataclass
class ProtocolBranch:
    outcomes: dict
    matrix: np.ndarray
    probability: float


def _apply_step(k: np.ndarray, f: np.ndarray, n_y: int, m: int, x: int, m_next: int, y: int) -> np.ndarray:
    """``(id_{Y<t} (x) f) . (k (x) id_{X_t})``, outputs reordered to ``Y<t, Y_t, M_{t+1}``."""
    n_in_bits = int(round(math.log2(k.shape[1])))
    kx = np.kron(k, np.eye(2 ** x))
    full = np.kron(np.eye(2 ** n_y), f) @ kx
    t = full.reshape([2] * (n_y + m_next + y) + [2 ** (n_in_bits + x)])
    perm = list(range(n_y)) + list(range(n_y + m_next, n_y + m_next + y)) + list(range(n_y, n_y + m_next))
    t = np.transpose(t, perm + [n_y + m_next + y])
    return t.reshape(2 ** (n_y + y + m_next), -1)


def _density(input_state, dim: int) -> np.ndarray:
    if input_state is None:
        return np.eye(dim) / dim
    a = np.asarray(input_state, dtype=complex)
    if a.ndim == 1:
        return np.outer(a, a.conj())
    return a


def simulate_protocol(s: StreamProcess, n: int, input_state=None, mode: str = "zx") -> list:
    """Exact branch enumeration of ``unroll_n(s)``.

    Every fragment choice and every assignment of the step's symbolic
    outcomes is a branch.  Probabilities are ``tr(K rho K^dagger)`` for the
    input density ``rho`` on ``M_0, X_0, ..., X_n`` (maximally mixed by
    default).

    Parameters
    ----------
    mode : {"zx", "lo"}
        ``lo`` runs the optical circuits of a memoryless single-qubit module
        through the Fock simulator instead.
    """
    if mode == "lo":
        return _simulate_lo(s, n, input_state)
    if mode != "zx":
        raise StreamError(f"unknown mode {mode!r}")
    branches = []

    def rec(t, k, n_y, history, outcomes):
        if t > n:
            branches.append((dict(outcomes), k))
            return
        m, x, m_next, y = s.memory(t), s.n_in(t), s.memory(t + 1), s.n_out(t)
        for f in s.fragments(t, history):
            vs = sorted(f.diagram.variables(), key=str)
            for bits in itertools.product((0, 1), repeat=len(vs)):
                assign = dict(zip(vs, bits))
                fm = zx.eval_tensor(f.diagram, assign)
                rec(t + 1, _apply_step(k, fm, n_y, m, x, m_next, y), n_y + y,
                    {**history, **f.outcomes, **assign}, {**outcomes, **f.outcomes, **assign})

    rec(0, np.eye(2 ** s.memory(0)), 0, {}, {})
    dim = branches[0][1].shape[1] if branches else 1
    rho = _density(input_state, dim)
    return [ProtocolBranch(o, k, float(np.real(np.trace(k @ rho @ k.conj().T)))) for o, k in branches]


def _simulate_lo(s: StreamProcess, n: int, input_state=None) -> list:
    if s.lo is None:
        raise ExpressibilityError(f"{s.name} has no optical realisation")
    if any(s.memory(t) or s.n_in(t) != 1 or s.n_out(t) for t in range(n + 2)):
        raise ExpressibilityError("optical mode handles memoryless one-qubit measurement modules only")
    per_step = []
    for t in range(n + 1):
        rep = optics.kraus_report(s.lo(t), 1, 0)
        opts = []
        for br in rep.branches:
            o = dict(zip(rep.variables, br.outcome))
            if br.leaked or o["a"] + o["a0"] != 1:
                if np.abs(br.effect).max() > 1e-12:
                    raise StreamError("optical module leaves the dual-rail subspace")
                continue
            opts.append(({("a", t): o["a"]}, br.kraus))
        per_step.append(opts)
    out = []
    for combo in itertools.product(*per_step):
        k = np.eye(1)
        outcomes = {}
        for o, m in combo:
            k = np.kron(k, m)
            outcomes.update(o)
        out.append((outcomes, k))
    rho = _density(input_state, 2 ** (n + 1))
    return [ProtocolBranch(o, k, float(np.real(np.trace(k @ rho @ k.conj().T)))) for o, k in out]


# ---------------------------------------------------------------------------
# Time-bin routing


@dataclass
class RouterSetup:
    """One input line, a router into delay lines ``0..L-1`` (line ``l`` delays by ``l``), a collector.

    ``x[t]`` is the line taken by the photon arriving at time ``t``;
    ``y[t]`` the line read at time ``t`` (None reads nothing).
    """

    lines: int
    x: dict
    y: dict

    def transfer(self, horizon: int) -> np.ndarray:
        """Single-photon transfer matrix from input time bins to output time bins."""
        u = np.zeros((horizon, horizon))
        for t, line in self.x.items():
            if not 0 <= line < self.lines:
                raise StreamError(f"line {line} out of range")
            arrive = t + line
            if arrive < horizon and self.y.get(arrive) == line:
                u[arrive, t] = 1
        return u

    def route(self, arrivals: dict, horizon: int) -> dict:
        """Route labelled single photons (time -> label) through the Fock simulator."""
        u = self.transfer(horizon)
        out = {}
        for t, label in arrivals.items():
            occ = tuple(1 if i == t else 0 for i in range(horizon))
            res = optics.fock_evolve(u.astype(complex), optics.FockVector(horizon, {occ: 1.0}))
            for k, amp in res.amplitudes.items():
                if abs(amp) > 1e-12:
                    out[k.index(1)] = label
        return out


def permutation_schedule(sigma) -> RouterSetup:
    """Router settings that emit photon ``t`` (of ``d``) at time ``d + sigma(t)``.

    Photon ``t`` waits in line ``d + sigma(t) - t``, so ``2d`` lines suffice.
    """
    d = len(sigma)
    if sorted(sigma) != list(range(d)):
        raise StreamError("sigma must be a permutation of 0..d-1")
    x = {t: d + sigma[t] - t for t in range(d)}
    y = {d + sigma[t]: x[t] for t in range(d)}
    return RouterSetup(2 * d, x, y)


# ---------------------------------------------------------------------------
# Repeat-until-success


def _base_phases(spec: FusionSpec) -> tuple:
    """Phases ``phi_i`` with ``<0|U_i ~ <+_phi_i|`` (green inputs)."""
    out = []
    for u in (spec.u1, spec.u2):
        row = fusion.euler_matrix(u)[0]
        if abs(abs(row[0]) - abs(row[1])) > 1e-9:
            raise StreamError("RUS needs a fusion with green failure")
        out.append(float(np.angle(row[1] / row[0]) % (2 * math.pi)))
    return tuple(out)


def rus_protocol(spec: FusionSpec) -> StreamProcess:
    """Repeat-until-success fusion between two GHZ emitters.

    Memory holds the two atoms (the logical qubits).  Each step both atoms
    emit a photon.  While no fusion has succeeded the photons are fused; the
    switch reads ``s_{t-1}`` and, once it is 1, routes the photons to
    measurements in the failure basis ``<Z(phi_i + x pi)|`` instead.  Those
    rounds report ``s_t = 1``.  Outcomes: ``("s", t)`` (control),
    ``("k", t)``, ``("j", t)`` for fusions and ``("a", t)`` (second photon),
    ``("b", t)`` (first photon) for measurements.
    """
    if not fusion.has_green_failure(spec):
        raise StreamError("RUS needs a fusion with green failure")
    phi1, phi2 = _base_phases(spec)

    def step(t, h):
        base = zx.WireBuilder([("q", 0), ("q", 1)])
        for i in (0, 1):
            base.splice([("q", i)], zx.z_spider(1, 2), [("q", i), ("p", i)])
        frags = []
        if h.get(("s", t - 1), 0):
            b = base.copy()
            e1 = zx.measurement_effect("XY", Phase(phi1).add_vars([("b", t)]))
            e2 = zx.measurement_effect("XY", Phase(phi2).add_vars([("a", t)]))
            b.splice([("p", 0)], e1)
            b.splice([("p", 1)], e2)
            frags.append(Fragment({("s", t): 1}, b.finish([("q", 0), ("q", 1)])))
            return frags
        maps = fusion.branch_maps(spec, ("k", t), ("j", t))
        for s_val, eff in ((1, maps.success), (0, maps.failure)):
            b = base.copy()
            b.splice([("p", 0), ("p", 1)], eff)
            frags.append(Fragment({("s", t): s_val}, b.finish([("q", 0), ("q", 1)])))
        return frags

    return StreamProcess(_const(2), _const(0), _const(0), step, "rus")


@dataclass
class RusTrace:
    s: list
    k: list
    j: list
    a: list
    b: list
    first_success: int | None
    c: list
    d: list
    probability: float
    derived: set
    corollary: dict


def rus_accumulators(s, k, a, b) -> tuple:
    """``c_t``, ``d_t`` from the recurrences with ``c_{-1} = d_{-1} = 1``."""
    c, d = [], []
    cp = dp = 1
    for st, kt, at, bt in zip(s, k, a, b):
        cp = cp ^ ((1 - st) & kt) ^ (st & at)
        dp = dp ^ ((1 - st) & (1 - kt)) ^ (st & bt)
        c.append(cp)
        d.append(dp)
    return c, d


def _z(phase):
    return np.diag([1, np.exp(1j * phase)])


def _success_diags(spec: FusionSpec) -> dict:
    # non-demolition: the photons are copies of the atoms
    maps = fusion.branch_maps(spec)
    return {(k, j): np.diag(maps.success_matrix(k, j).ravel()) for k in (0, 1) for j in (0, 1)}


def _derive_bits(phases, cores, m, n, first, kT, jT) -> set:
    """All ``(beta1, beta2)`` with ``m ~ Z(n phi1 + beta1 pi) (x) Z(n phi2 + beta2 pi) . core``."""
    phi1, phi2 = phases
    if first is None:
        core = np.eye(4)
        rounds = n + 1
    else:
        core = cores[kT, jT]
        rounds = n
    found = set()
    for b1, b2 in itertools.product((0, 1), repeat=2):
        ref = np.kron(_z(rounds * phi1 + b1 * math.pi), _z(rounds * phi2 + b2 * math.pi)) @ core
        lam = zx.proportionality(m, ref, 1e-9)
        if lam is not None and abs(lam) > 1e-12:
            found.add((b1, b2))
    return found


def corollary_bits(family: str, trace_s, k, j, c, d, first) -> dict:
    """The correction bits as printed for the X and Y fusion corollaries."""
    n = len(trace_s) - 1
    sn = 1 if first is not None else 0
    if family == "X":
        out = {"z": (sn & (c[n] ^ d[n])) ^ ((1 - sn) & c[n])}
        if first is not None:
            out["x"] = k[first] ^ j[first]
        return out
    if family == "Y":
        if first is None:
            return {}
        e = k[first] ^ j[first]
        y = e ^ d[n] if first < n else e ^ (1 - c[n])
        return {"z": e ^ c[n], "y": y}
    raise StreamError(f"unknown family {family!r}")


def _pz(b):
    return np.diag([1, -1]) if b else np.eye(2)


def _family_bits(family, m, n, phases, cores):
    """Correction bits read off a success map.

    X: ``(x, z)`` with ``m ~ (Z^z (x) I) . Pi_x`` (``Pi_x`` the parity-``x``
    projector, an X spider joining both atoms).  Y: ``(y, z)`` with
    ``m ~ (Z^y (x) Z^z) . R_n`` where ``R_n`` is the ``(k, j) = (0, 0)``
    success map after ``n`` phase rounds.
    """
    if family == "X":
        cands = {(x, z): np.kron(_pz(z), np.eye(2)) @ np.diag([float((a ^ b) == x) for a in (0, 1) for b in (0, 1)])
                 for x in (0, 1) for z in (0, 1)}
    else:
        ref = np.kron(_z(n * phases[0]), _z(n * phases[1])) @ cores[0, 0]
        cands = {(y, z): np.kron(_pz(y), _pz(z)) @ ref for y in (0, 1) for z in (0, 1)}
    for key, ref in cands.items():
        lam = zx.proportionality(m, ref, 1e-9)
        if lam is not None and abs(lam) > 1e-12:
            return key
    return None


def rus_statistics(spec: FusionSpec, n: int, family: str | None = None) -> dict:
    """Enumerate the unrolled RUS protocol for ``n + 1`` rounds.

    Returns a dict with ``p_success``, ``total`` probability, ``traces``
    (:class:`RusTrace`) and ``bits_match``: on every branch the map equals
    ``Z(n phi1 + (not d_n) pi) (x) Z(n phi2 + (not c_n) pi)`` after the first
    success's fusion map (``n + 1`` phase rounds when every round fails).

    With ``family`` ("X" or "Y") the success traces are also compared with
    the corollary bits: ``corollary_agree`` counts traces whose derived bits
    equal the printed ones up to one fixed Pauli frame (the most common
    offset, reported as ``corollary_frame``); ``corollary_diverge`` lists the
    others.
    """
    traces = []
    p_success = 0.0
    ok = True
    phases, cores = _base_phases(spec), _success_diags(spec)
    offsets = []
    for br in simulate_protocol(rus_protocol(spec), n):
        o = br.outcomes
        s = [o[("s", t)] for t in range(n + 1)]
        first = next((t for t in range(n + 1) if s[t] and not (t > 0 and s[t - 1])), None)
        k = [o.get(("k", t), 0) for t in range(n + 1)]
        j = [o.get(("j", t), 0) for t in range(n + 1)]
        a = [o.get(("a", t), 0) for t in range(n + 1)]
        b = [o.get(("b", t), 0) for t in range(n + 1)]
        c, d = rus_accumulators(s, k, a, b)
        derived = _derive_bits(phases, cores, br.matrix, n, first, k[first] if first is not None else 0,
                               j[first] if first is not None else 0)
        if (1 - d[n], 1 - c[n]) not in derived:
            ok = False
        cor = corollary_bits(family, s, k, j, c, d, first) if family else {}
        tr = RusTrace(s, k, j, a, b, first, c, d, br.probability, derived, cor)
        traces.append(tr)
        if first is not None:
            p_success += br.probability
            if family:
                got = _family_bits(family, br.matrix, n, phases, cores)
                want = (cor["x"], cor["z"]) if family == "X" else (cor["y"], cor["z"])
                offsets.append((tr, None if got is None else (got[0] ^ want[0], got[1] ^ want[1])))
    out = {"p_success": p_success, "traces": traces, "bits_match": ok,
           "total": sum(t.probability for t in traces)}
    if family:
        counts = {}
        for _, off in offsets:
            counts[off] = counts.get(off, 0) + 1
        frame = (0, 0) if family == "X" else max(counts, key=counts.get, default=(0, 0))
        out["corollary_frame"] = frame
        out["corollary_agree"] = counts.get(frame, 0)
        out["corollary_diverge"] = [tr for tr, off in offsets if off != frame]
    return out


# ---------------------------------------------------------------------------
# Protocol files


def _schedule(value, name: str):
    """Constant or per-step list; lists must cover every simulated step."""
    if isinstance(value, list):
        def at(t, v=value):
            if t >= len(v):
                raise StreamError(f"{name} schedule has no entry for step {t}")
            return v[t]
        return at
    return lambda t: value


def _unitary(spec):
    if spec is None:
        return None
    if spec == "H":
        return zx.hadamard()
    if isinstance(spec, (list, tuple)) and len(spec) == 3 and all(isinstance(x, (int, float)) for x in spec):
        return zx.euler(*spec)
    raise StreamError(f"bad unitary {spec!r}; use 'H', an Euler triple or null")


def protocol_from_json(data) -> StreamProcess:
    """Chain the components of a protocol description in order.

    ``{"components": [{"type": "emitter", "u": "H" | [a, b, g] | null | per-step list},
    {"type": "delay", "d": 1, "width": 1}, {"type": "measure", "plane": ..., "angle": ...},
    {"type": "correct", "x": ..., "z": ...}, {"type": "identity", "width": 1}]}``;
    schedule fields take a constant or a per-step list.
    """
    try:
        comps = data["components"]
        if not comps:
            raise StreamError("protocol has no components")
        s = None
        for c in comps:
            kind = c["type"]
            if kind == "emitter":
                u = c.get("u")
                if isinstance(u, list) and u and not all(isinstance(x, (int, float)) for x in u):
                    ds = [_unitary(x) for x in u]
                    part = emitter(lambda t, f=_schedule(ds, "u"): f(t) if f(t) is not None else zx.identity())
                else:
                    d = _unitary(u)
                    part = emitter(None if d is None else (lambda t, d=d: d))
            elif kind == "delay":
                part = delay(int(c.get("d", 1)), int(c.get("width", 1)))
            elif kind == "measure":
                part = measurement_module(_schedule(c.get("plane", "X"), "plane"),
                                          _schedule(c.get("angle", 0.0), "angle"), c.get("var", "a"))
            elif kind == "correct":
                part = correction_module(_schedule(c.get("x", 0), "x"), _schedule(c.get("z", 0), "z"))
            elif kind == "identity":
                part = identity_stream(int(c.get("width", 1)))
            else:
                raise StreamError(f"unknown component type {kind!r}")
            s = part if s is None else sequential(s, part)
        return s
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, StreamError):
            raise
        raise StreamError(f"malformed protocol: {exc}") from exc
