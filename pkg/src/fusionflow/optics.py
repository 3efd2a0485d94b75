"""Linear-optical circuits on bosonic modes and their dual-rail qubit action.

Amplitudes are computed exactly from permanents of submatrices of the mode
unitary.  Beam splitters are the Hadamard matrix on an ordered pair of modes
and phase shifts multiply a mode by ``e^{i theta}``.
"""

from __future__ import annotations

import itertools
import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .permanent import permanent

_BS = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)


class OpticsError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Components and circuits


@dataclass(frozen=True)
class BeamSplitter:
    i: int
    j: int

    @property
    def modes(self):
        return (self.i, self.j)


@dataclass(frozen=True)
class PhaseShift:
    i: int
    theta: float

    @property
    def modes(self):
        return (self.i,)


@dataclass(frozen=True)
class Source:
    i: int
    photons: int = 1

    @property
    def modes(self):
        return (self.i,)


@dataclass(frozen=True)
class Detector:
    i: int
    var: str

    @property
    def modes(self):
        return (self.i,)


Component = BeamSplitter | PhaseShift | Source | Detector


@dataclass
class LoCircuit:
    """Ordered list of optical components acting on ``mode_count`` modes."""

    mode_count: int
    components: list = field(default_factory=list)

    def __post_init__(self):
        self.validate()

    def validate(self):
        consumed = set()
        touched = set()
        for c in self.components:
            for m in c.modes:
                if not 0 <= m < self.mode_count:
                    raise OpticsError(f"mode {m} out of range for {self.mode_count} modes")
                if m in consumed:
                    raise OpticsError(f"component {c} acts on detected mode {m}")
            if isinstance(c, BeamSplitter) and c.i == c.j:
                raise OpticsError("beam splitter needs two distinct modes")
            if isinstance(c, Source) and c.i in touched:
                raise OpticsError(f"source on mode {c.i} after earlier components")
            if isinstance(c, Detector):
                consumed.add(c.i)
            touched.update(c.modes)

    def then(self, *components) -> "LoCircuit":
        return LoCircuit(self.mode_count, list(self.components) + list(components))

    @property
    def detectors(self) -> list:
        return [c for c in self.components if isinstance(c, Detector)]

    @property
    def undetected_modes(self) -> list:
        det = {c.i for c in self.detectors}
        return [m for m in range(self.mode_count) if m not in det]

    def to_json(self) -> dict:
        comps = []
        for c in self.components:
            if isinstance(c, BeamSplitter):
                comps.append({"type": "BS", "modes": [c.i, c.j]})
            elif isinstance(c, PhaseShift):
                comps.append({"type": "PS", "mode": c.i, "theta": c.theta})
            elif isinstance(c, Source):
                comps.append({"type": "source", "mode": c.i, "photons": c.photons})
            else:
                comps.append({"type": "detector", "mode": c.i, "var": c.var})
        return {"modes": self.mode_count, "components": comps}

    @classmethod
    def from_json(cls, data) -> "LoCircuit":
        if isinstance(data, str):
            data = json.loads(data)
        try:
            comps = []
            for c in data["components"]:
                t = c["type"].lower()
                if t in ("bs", "beamsplitter"):
                    comps.append(BeamSplitter(int(c["modes"][0]), int(c["modes"][1])))
                elif t in ("ps", "phaseshift"):
                    comps.append(PhaseShift(int(c["mode"]), float(c["theta"])))
                elif t == "source":
                    comps.append(Source(int(c["mode"]), int(c.get("photons", 1))))
                elif t == "detector":
                    comps.append(Detector(int(c["mode"]), str(c.get("var", f"d{c['mode']}"))))
                else:
                    raise OpticsError(f"unknown component type {c['type']!r}")
            return cls(int(data["modes"]), comps)
        except (KeyError, TypeError, IndexError) as exc:
            raise OpticsError(f"malformed circuit JSON: {exc}") from exc


def _embed(m: int, comp) -> np.ndarray:
    u = np.eye(m, dtype=complex)
    if isinstance(comp, BeamSplitter):
        idx = [comp.i, comp.j]
        u[np.ix_(idx, idx)] = _BS
    else:
        u[comp.i, comp.i] = np.exp(1j * comp.theta)
    return u


def circuit_unitary(c: LoCircuit) -> np.ndarray:
    """Mode unitary of a passive interferometer (later components on the left)."""
    u = np.eye(c.mode_count, dtype=complex)
    for comp in c.components:
        if isinstance(comp, (Source, Detector)):
            raise OpticsError("circuit_unitary needs a pure interferometer (no sources or detectors)")
        u = _embed(c.mode_count, comp) @ u
    return u


# ---------------------------------------------------------------------------
# Fock states


@dataclass
class FockVector:
    """Sparse superposition of occupation tuples over ``modes`` modes."""

    modes: int
    amplitudes: dict = field(default_factory=dict)
    cutoff: int | None = None

    def __post_init__(self):
        for occ in self.amplitudes:
            if len(occ) != self.modes:
                raise OpticsError(f"occupation {occ} does not have {self.modes} modes")
            if self.cutoff is not None and sum(occ) > self.cutoff:
                raise OpticsError(f"occupation {occ} exceeds cutoff {self.cutoff}")

    @classmethod
    def basis(cls, occ: Sequence[int], amplitude: complex = 1.0, cutoff=None) -> "FockVector":
        return cls(len(occ), {tuple(int(n) for n in occ): complex(amplitude)}, cutoff)

    @classmethod
    def vacuum(cls, modes: int) -> "FockVector":
        return cls.basis((0,) * modes)

    def norm(self) -> float:
        return math.sqrt(sum(abs(a) ** 2 for a in self.amplitudes.values()))

    def photon_numbers(self) -> set:
        return {sum(o) for o, a in self.amplitudes.items() if abs(a) > 1e-15}

    def pruned(self, tol: float = 1e-14) -> "FockVector":
        return FockVector(self.modes, {o: a for o, a in self.amplitudes.items() if abs(a) > tol}, self.cutoff)

    def scaled(self, c: complex) -> "FockVector":
        return FockVector(self.modes, {o: a * c for o, a in self.amplitudes.items()}, self.cutoff)

    def __add__(self, other: "FockVector") -> "FockVector":
        amps = defaultdict(complex, self.amplitudes)
        for o, a in other.amplitudes.items():
            amps[o] += a
        return FockVector(self.modes, dict(amps), self.cutoff)

    def inner(self, other: "FockVector") -> complex:
        return sum(a.conjugate() * other.amplitudes.get(o, 0) for o, a in self.amplitudes.items())

    def allclose(self, other: "FockVector", tol: float = 1e-12) -> bool:
        keys = set(self.amplitudes) | set(other.amplitudes)
        return all(abs(self.amplitudes.get(k, 0) - other.amplitudes.get(k, 0)) <= tol for k in keys)


def _occupations(n: int, m: int) -> Iterable[tuple]:
    """All tuples of ``m`` non-negative integers summing to ``n``."""
    if m == 0:
        if n == 0:
            yield ()
        return
    for combo in itertools.combinations_with_replacement(range(m), n):
        occ = [0] * m
        for i in combo:
            occ[i] += 1
        yield tuple(occ)


def _transfer_amplitude(u: np.ndarray, occ_in: tuple, occ_out: tuple) -> complex:
    rows = [j for j, n in enumerate(occ_out) for _ in range(n)]
    cols = [i for i, n in enumerate(occ_in) for _ in range(n)]
    if len(rows) != len(cols):
        return 0.0
    if not rows:
        return 1.0
    sub = u[np.ix_(rows, cols)]
    norm = math.prod(math.factorial(n) for n in occ_in) * math.prod(math.factorial(n) for n in occ_out)
    return permanent(sub) / math.sqrt(norm)


def fock_evolve(u: np.ndarray, s: FockVector) -> FockVector:
    """Apply the multi-photon action of mode unitary ``u`` to ``s``.

    Only modes on which ``u`` acts nontrivially are re-enumerated; the rest
    pass through unchanged.
    """
    u = np.asarray(u, dtype=complex)
    m = s.modes
    if u.shape != (m, m):
        raise OpticsError(f"unitary shape {u.shape} does not match {m} modes")
    off = np.abs(u - np.eye(m)) > 1e-15
    active = sorted(set(np.nonzero(off.any(axis=0))[0]) | set(np.nonzero(off.any(axis=1))[0]))
    if not active:
        return FockVector(m, dict(s.amplitudes), s.cutoff)
    sub_u = u[np.ix_(active, active)]
    out = defaultdict(complex)
    cache = {}
    for occ, amp in s.amplitudes.items():
        if amp == 0:
            continue
        occ_a = tuple(occ[i] for i in active)
        key = occ_a
        if key not in cache:
            n = sum(occ_a)
            cache[key] = [(o, _transfer_amplitude(sub_u, occ_a, o)) for o in _occupations(n, len(active))]
        for o_a, t in cache[key]:
            if t == 0:
                continue
            new = list(occ)
            for i, v in zip(active, o_a):
                new[i] = v
            out[tuple(new)] += amp * t
    return FockVector(m, dict(out), s.cutoff).pruned()


def run_circuit(c: LoCircuit, state: FockVector, cutoff: int | None = None) -> list:
    """Run sources, interferometers and detectors on ``state``.

    Returns
    -------
    list of (outcome tuple, FockVector)
        One entry per detector outcome pattern with nonzero amplitude, in
        detector order.  Residual states are unnormalised (their squared norm
        is the outcome probability for a normalised input).
    """
    if state.modes != c.mode_count:
        raise OpticsError(f"state has {state.modes} modes, circuit has {c.mode_count}")
    injected = sum(comp.photons for comp in c.components if isinstance(comp, Source))
    max_in = max((sum(o) for o in state.amplitudes), default=0)
    if cutoff is None:
        cutoff = max_in + injected
    if max_in + injected > cutoff:
        raise OpticsError(f"cutoff {cutoff} exceeded: up to {max_in + injected} photons present")
    branches = [((), FockVector(state.modes, dict(state.amplitudes), cutoff))]
    pending = []

    def flush(branches, pending):
        if not pending:
            return branches
        u = np.eye(c.mode_count, dtype=complex)
        for comp in pending:
            u = _embed(c.mode_count, comp) @ u
        return [(o, fock_evolve(u, f)) for o, f in branches]

    for comp in c.components:
        if isinstance(comp, (BeamSplitter, PhaseShift)):
            pending.append(comp)
            continue
        branches = flush(branches, pending)
        pending = []
        if isinstance(comp, Source):
            new = []
            for o, f in branches:
                amps = {}
                for occ, a in f.amplitudes.items():
                    if occ[comp.i] != 0:
                        raise OpticsError(f"source on occupied mode {comp.i}")
                    occ2 = list(occ)
                    occ2[comp.i] = comp.photons
                    amps[tuple(occ2)] = a
                new.append((o, FockVector(f.modes, amps, cutoff)))
            branches = new
        else:
            new = []
            for o, f in branches:
                split = defaultdict(dict)
                for occ, a in f.amplitudes.items():
                    occ2 = list(occ)
                    n = occ2[comp.i]
                    occ2[comp.i] = 0
                    split[n][tuple(occ2)] = a
                for n in sorted(split):
                    new.append((o + (n,), FockVector(f.modes, split[n], cutoff)))
            branches = new
    branches = flush(branches, pending)
    return [(o, f) for o, f in branches if f.norm() > 1e-14]


# ---------------------------------------------------------------------------
# Dual-rail encoding


def _default_pairs(n: int) -> list:
    return [(2 * i, 2 * i + 1) for i in range(n)]


def dual_rail_encode(q, n_qubits: int | None = None, pairs=None, modes: int | None = None) -> FockVector:
    """Encode a basis index or a qubit state vector into dual-rail Fock modes.

    ``|0>`` puts the photon in the first mode of a pair, ``|1>`` in the second.
    """
    if isinstance(q, (int, np.integer)):
        if n_qubits is None:
            raise OpticsError("n_qubits required for a basis index")
        vec = np.zeros(2 ** n_qubits, dtype=complex)
        vec[int(q)] = 1
    else:
        vec = np.asarray(q, dtype=complex).ravel()
        n_qubits = int(round(math.log2(vec.size)))
        if 2 ** n_qubits != vec.size:
            raise OpticsError("state length must be a power of two")
    pairs = _default_pairs(n_qubits) if pairs is None else list(pairs)
    modes = 2 * n_qubits if modes is None else modes
    amps = {}
    for idx, a in enumerate(vec):
        if a == 0:
            continue
        occ = [0] * modes
        for k, (m0, m1) in enumerate(pairs):
            bit = (idx >> (n_qubits - 1 - k)) & 1
            occ[m1 if bit else m0] = 1
        amps[tuple(occ)] = complex(a)
    return FockVector(modes, amps)


def dual_rail_decode(f: FockVector, pairs=None, tol: float = 1e-12):
    """Inverse of :func:`dual_rail_encode`; None if ``f`` leaks out of the qubit subspace."""
    if pairs is None:
        if f.modes % 2:
            return None
        pairs = _default_pairs(f.modes // 2)
    pairs = list(pairs)
    n = len(pairs)
    in_pairs = {m for p in pairs for m in p}
    vec = np.zeros(2 ** n, dtype=complex)
    for occ, a in f.amplitudes.items():
        if abs(a) <= tol:
            continue
        if any(occ[m] for m in range(f.modes) if m not in in_pairs):
            return None
        idx = 0
        for m0, m1 in pairs:
            if (occ[m0], occ[m1]) == (1, 0):
                bit = 0
            elif (occ[m0], occ[m1]) == (0, 1):
                bit = 1
            else:
                return None
            idx = 2 * idx + bit
        vec[idx] += a
    return vec


# ---------------------------------------------------------------------------
# Standard fusion circuits


def type1_circuit(theta1: float = 0.0, theta2: float = 0.0, theta3: float = 0.0) -> LoCircuit:
    """Type I fusion on qubits (0,1) and (2,3), keeping the pair (0,3).

    Optional phase shifts act on the ``|1>`` rails of both inputs and of the
    kept output.  The beam splitter takes mode 2 on its first port; detector
    ``a`` reads mode 2 and ``b`` reads mode 1.
    """
    comps = []
    if theta1:
        comps.append(PhaseShift(1, theta1))
    if theta2:
        comps.append(PhaseShift(3, theta2))
    comps += [BeamSplitter(2, 1), Detector(2, "a"), Detector(1, "b")]
    if theta3:
        comps.append(PhaseShift(3, theta3))
    return LoCircuit(4, comps)


def green_fusion_circuit(theta1: float = 0.0, theta2: float = 0.0, theta3: float = 0.0) -> LoCircuit:
    """Non-destructive fusion with green failure, output on the pair (0,3).

    Phase shifts ``theta1``/``theta2`` on the inputs, a beam splitter on each
    input pair, the Type I core, then ``theta3`` on the kept output.
    """
    comps = []
    if theta1:
        comps.append(PhaseShift(1, theta1))
    if theta2:
        comps.append(PhaseShift(3, theta2))
    comps += [BeamSplitter(0, 1), BeamSplitter(2, 3)]
    return LoCircuit(4, comps + type1_circuit(0, 0, theta3).components)


def type2_circuit() -> LoCircuit:
    """Type II fusion: beam splitters on both inputs, Type I core, X measurement.

    Detectors ``a``, ``b`` as in Type I, then ``c`` on mode 0 and ``d`` on mode 3.
    """
    comps = [BeamSplitter(0, 1), BeamSplitter(2, 3)] + type1_circuit().components
    comps += [BeamSplitter(0, 3), Detector(0, "c"), Detector(3, "d")]
    return LoCircuit(4, comps)


def ghz_analyzer(n: int) -> LoCircuit:
    """n-qubit GHZ analyzer: chained Type I cores then an X measurement.

    Stage ``t`` interferes the ``|0>`` rail of qubit ``t`` (first port) with
    the ``|1>`` rail of the running qubit and detects ``r_{2t-1}``, ``r_{2t}``
    on those modes; the final
    beam splitter on the surviving pair is detected as ``r_{2n-1}``, ``r_{2n}``.
    """
    if n < 2:
        raise OpticsError("analyzer needs at least two inputs")
    comps = []
    keep0, keep1 = 0, 1
    r = 1
    for t in range(1, n):
        a, b = 2 * t, keep1
        comps += [BeamSplitter(a, b), Detector(a, f"r{r}"), Detector(b, f"r{r + 1}")]
        r += 2
        keep1 = 2 * t + 1
    comps += [BeamSplitter(keep0, keep1), Detector(keep0, f"r{r}"), Detector(keep1, f"r{r + 1}")]
    return LoCircuit(2 * n, comps)


# ---------------------------------------------------------------------------
# Kraus extraction


@dataclass
class KrausBranch:
    """One detector outcome.

    ``kraus`` is the qubit-level map (shape ``(2**l, 2**k)``) or None when the
    branch leaks out of the dual-rail subspace.  ``effect`` is ``M^dagger M``
    for the full Fock-valued branch map ``M`` and is always available.
    """

    outcome: tuple
    kraus: np.ndarray | None
    effect: np.ndarray
    fock_map: list

    @property
    def leaked(self) -> bool:
        return self.kraus is None

    def probability(self, rho) -> float:
        return float(np.real(np.trace(self.effect @ np.asarray(rho, dtype=complex))))


@dataclass
class CoarseBranch:
    key: object
    outcomes: list
    effect: np.ndarray
    superoperator: np.ndarray | None  # sum of K (x) conj(K), None if any branch leaks

    def probability(self, rho) -> float:
        return float(np.real(np.trace(self.effect @ np.asarray(rho, dtype=complex))))


@dataclass
class KrausReport:
    variables: tuple
    branches: list
    n_inputs: int
    n_outputs: int

    def completeness(self) -> np.ndarray:
        return sum((b.effect for b in self.branches), np.zeros((2 ** self.n_inputs,) * 2, dtype=complex))

    def branch(self, outcome) -> KrausBranch | None:
        for b in self.branches:
            if b.outcome == tuple(outcome):
                return b
        return None

    def coarse_grain(self, fn: Callable[[dict], object]) -> dict:
        """Group outcomes by ``fn(outcome_dict)`` and sum them as CP maps."""
        groups = defaultdict(list)
        for b in self.branches:
            groups[fn(dict(zip(self.variables, b.outcome)))].append(b)
        out = {}
        for key, bs in groups.items():
            eff = sum(b.effect for b in bs)
            if any(b.leaked for b in bs):
                sup = None
            else:
                sup = sum(np.kron(b.kraus, b.kraus.conj()) for b in bs)
            out[key] = CoarseBranch(key, [b.outcome for b in bs], eff, sup)
        return out


def kraus_report(c: LoCircuit, qubit_inputs: int, qubit_outputs: int, in_pairs=None, out_pairs=None,
                 cutoff: int | None = None, tol: float = 1e-12) -> KrausReport:
    """Per-outcome qubit maps of a circuit acting on dual-rail inputs.

    Output pairs default to the undetected modes taken two at a time in mode
    order.
    """
    in_pairs = _default_pairs(qubit_inputs) if in_pairs is None else list(in_pairs)
    if out_pairs is None:
        free = c.undetected_modes
        if len(free) != 2 * qubit_outputs:
            raise OpticsError(f"{len(free)} undetected modes cannot carry {qubit_outputs} dual-rail qubits")
        out_pairs = [(free[2 * i], free[2 * i + 1]) for i in range(qubit_outputs)]
    dim = 2 ** qubit_inputs
    columns = defaultdict(lambda: [None] * dim)
    for x in range(dim):
        f = dual_rail_encode(x, qubit_inputs, in_pairs, c.mode_count)
        for outcome, res in run_circuit(c, f, cutoff):
            columns[outcome][x] = res
    names = tuple(d.var for d in c.detectors)
    branches = []
    for outcome in sorted(columns):
        cols = [col if col is not None else FockVector(c.mode_count) for col in columns[outcome]]
        keys = sorted(set().union(*(col.amplitudes for col in cols)))
        mat = np.array([[col.amplitudes.get(k, 0) for col in cols] for k in keys], dtype=complex).reshape(len(keys), dim)
        effect = mat.conj().T @ mat
        decoded = [dual_rail_decode(col, out_pairs, tol) for col in cols]
        if all(d is not None for d in decoded):
            kraus = np.column_stack(decoded) if decoded else np.zeros((2 ** qubit_outputs, 0))
        else:
            kraus = None
        branches.append(KrausBranch(outcome, kraus, effect, cols))
    return KrausReport(names, branches, qubit_inputs, qubit_outputs)


def outcome_distribution(c: LoCircuit, state: FockVector, cutoff: int | None = None) -> list:
    """List of (outcome, probability) with probabilities from squared norms."""
    return [(o, f.norm() ** 2) for o, f in run_circuit(c, state, cutoff)]
