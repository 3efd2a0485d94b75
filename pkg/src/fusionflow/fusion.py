"""Parametrised two-qubit fusion measurements and their classification.

A general fusion is the Type I core sandwiched between single-qubit
unitaries: on success it applies

    S(k, j) = (1/sqrt 2) <j| U3 Z_{2->1}(k pi) (U1 (x) U2)

and on failure

    F(k) = <not k| U1 (x) <k| U2.

Each unitary is an Euler triple ``(alpha, beta, gamma)`` meaning
``Z(gamma) X(beta) Z(alpha)`` with ``Z(alpha)`` applied first.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import zx
from .zx import Phase, Scalar, ZxDiagram

TOL = 1e-7
HALF_PI = math.pi / 2

PLANES = ("XY", "XZ", "YZ")

_PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def _angle(x) -> float:
    return Phase.of(x).radians


@dataclass(frozen=True)
class FusionSpec:
    """Euler triples for ``U1``, ``U2`` (inputs) and ``U3`` (before the Z measurement)."""

    u1: tuple = (0.0, 0.0, 0.0)
    u2: tuple = (0.0, 0.0, 0.0)
    u3: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        for name in ("u1", "u2", "u3"):
            t = tuple(_angle(x) % (2 * math.pi) for x in getattr(self, name))
            if len(t) != 3:
                raise ValueError(f"{name} must be an Euler triple")
            object.__setattr__(self, name, t)

    @property
    def phi(self) -> float:
        """Combined Z phase ``gamma1 + gamma2 + alpha3`` at the fusion spider."""
        return (self.u1[2] + self.u2[2] + self.u3[0]) % (2 * math.pi)

    def to_json(self) -> dict:
        return {"u1": list(self.u1), "u2": list(self.u2), "u3": list(self.u3)}

    @classmethod
    def from_json(cls, data) -> "FusionSpec":
        return cls(tuple(data["u1"]), tuple(data["u2"]), tuple(data["u3"]))


def euler_matrix(t) -> np.ndarray:
    a, b, g = t
    return zx.eval_tensor(zx.euler(a, b, g))


# Named specs ---------------------------------------------------------------

H_EULER = (HALF_PI, HALF_PI, HALF_PI)  # H up to global phase
ID_EULER = (0.0, 0.0, 0.0)


def type1_spec() -> FusionSpec:
    """Type I fusion followed by a Z measurement (all unitaries trivial)."""
    return FusionSpec(ID_EULER, ID_EULER, ID_EULER)


def type2_spec() -> FusionSpec:
    return FusionSpec(H_EULER, H_EULER, H_EULER)


def _u3_for_plane(plane: str, alpha: float) -> tuple:
    """Euler triple with ``<j| U3`` equal to the plane effect at ``alpha + j pi``."""
    if plane == "XY":
        return (alpha + HALF_PI, HALF_PI, HALF_PI)  # H Z(alpha)
    if plane == "YZ":
        return (0.0, alpha, 0.0)  # X(alpha)
    if plane == "XZ":
        return (HALF_PI, alpha, 0.0)  # X(alpha) Z(pi/2)
    raise ValueError(f"unknown plane {plane!r}")


def canonical_fusion(plane: str, alpha, c: int = 0, c2: int | None = None) -> FusionSpec:
    """Symmetric Pauli fusion with green failure in canonical form.

    Both inputs get ``H Z(c pi/2)``; on success the fused vertex is joined by
    Hadamard edges to both inputs and measured in ``plane`` at ``alpha``.
    ``c2`` sets a different Clifford parameter on the second input.
    """
    c2 = c if c2 is None else c2
    a = _angle(alpha)
    u1 = (HALF_PI + c * HALF_PI, HALF_PI, HALF_PI)
    u2 = (HALF_PI + c2 * HALF_PI, HALF_PI, HALF_PI)
    return FusionSpec(u1, u2, _u3_for_plane(plane.upper(), a))


def x_fusion() -> FusionSpec:
    return canonical_fusion("XY", 0.0, 0)


def y_fusion() -> FusionSpec:
    """CZ-type fusion: adds a Hadamard edge between the fused vertices."""
    return canonical_fusion("XY", HALF_PI, 1)


def phase_gadget_fusion(alpha) -> FusionSpec:
    return canonical_fusion("YZ", alpha, 0)


# Branch maps ----------------------------------------------------------------


@dataclass
class FusionBranchMaps:
    """ZX success map (variables ``k``, ``j``) and failure map (variable ``k``), both 2 -> 0."""

    success: ZxDiagram
    failure: ZxDiagram
    k: str = "k"
    j: str = "j"

    def success_matrix(self, k: int, j: int) -> np.ndarray:
        return zx.eval_tensor(self.success, {self.k: k, self.j: j})

    def failure_matrix(self, k: int) -> np.ndarray:
        return zx.eval_tensor(self.failure, {self.k: k})

    def completeness(self) -> np.ndarray:
        tot = np.zeros((4, 4), dtype=complex)
        for k in (0, 1):
            f = self.failure_matrix(k)
            tot += f.conj().T @ f
            for j in (0, 1):
                s = self.success_matrix(k, j)
                tot += s.conj().T @ s
        return tot


def _z_basis_effect(bit_phase: Phase) -> ZxDiagram:
    """``<x|`` as a red effect with phase ``x pi``, normalised."""
    d = zx.x_spider(1, 0, bit_phase)
    d.scalar = Scalar(1)
    return d


def branch_maps(spec: FusionSpec, k: str = "k", j: str = "j") -> FusionBranchMaps:
    u1, u2, u3 = (zx.euler(*t) for t in (spec.u1, spec.u2, spec.u3))
    core = zx.z_spider(2, 1, Phase(0, {k}))
    succ = zx.compose_all(zx.tensor(u1, u2), core, u3, _z_basis_effect(Phase(0, {j})))
    succ.scalar = succ.scalar.with_stars(1)
    fail_1 = zx.compose(u1, _z_basis_effect(Phase.pi(1, 1, [k])))
    fail_2 = zx.compose(u2, _z_basis_effect(Phase(0, {k})))
    fail = zx.tensor(fail_1, fail_2)
    return FusionBranchMaps(succ, fail, k, j)


def success_matrices(spec: FusionSpec) -> dict:
    m = branch_maps(spec)
    return {(k, j): m.success_matrix(k, j).ravel() for k in (0, 1) for j in (0, 1)}


def failure_matrices(spec: FusionSpec) -> dict:
    m = branch_maps(spec)
    return {k: m.failure_matrix(k).ravel() for k in (0, 1)}


# Predicates -------------------------------------------------------------------


def same_ray(a, b, tol: float = TOL) -> bool:
    """Equal up to a unit-modulus global phase."""
    a = np.asarray(a, dtype=complex).ravel()
    b = np.asarray(b, dtype=complex).ravel()
    ov = np.vdot(b, a)
    ph = ov / abs(ov) if abs(ov) > 0 else 1.0
    return np.abs(a - ph * b).max() <= tol


def has_green_failure(spec: FusionSpec, tol: float = TOL) -> bool:
    """Failure branch is a product of green (Z-spider) effects on both inputs.

    Each tensor factor of ``F(k)`` must be proportional to ``(1, e^{i theta})``,
    i.e. have components of equal magnitude.
    """
    for k, vec in failure_matrices(spec).items():
        m = vec.reshape(2, 2)
        u, s, vh = np.linalg.svd(m)
        if s[1] > tol:
            return False
        left, right = u[:, 0] * math.sqrt(s[0]), vh[0] * math.sqrt(s[0])
        for f in (left, right):
            if abs(abs(f[0]) - abs(f[1])) > tol:
                return False
    return True


def green_failure_angles(spec: FusionSpec) -> tuple | None:
    """``(theta1, theta2)`` with ``F(0) ~ <Z(theta1)| (x) <Z(theta2)|`` (outcome 0)."""
    if not has_green_failure(spec):
        return None
    m = failure_matrices(spec)[0].reshape(2, 2)
    u, s, vh = np.linalg.svd(m)
    left, right = u[:, 0], vh[0]
    return (float(np.angle(left[1] / left[0]) % (2 * math.pi)), float(np.angle(right[1] / right[0]) % (2 * math.pi)))


def pauli_corrections(spec: FusionSpec, tol: float = TOL) -> dict | None:
    """Pauli pairs with ``S(k, j) ~ S(0, 0) (P1 (x) P2)`` for each error value.

    Returns a dict ``(k, j) -> (P1, P2)`` or None when some branch needs a
    non-Pauli correction.
    """
    succ = success_matrices(spec)
    base = succ[(0, 0)]
    out = {}
    for key, vec in succ.items():
        found = None
        for p1, p2 in itertools.product("IXYZ", repeat=2):
            cand = base @ np.kron(_PAULI[p1], _PAULI[p2])
            if same_ray(vec, cand, tol):
                found = (p1, p2)
                break
        if found is None:
            return None
        out[key] = found
    return out


def has_pauli_error(spec: FusionSpec, tol: float = TOL) -> bool:
    return pauli_corrections(spec, tol) is not None


_SWAP = np.eye(4)[[0, 2, 1, 3]]


def is_symmetric(spec: FusionSpec, tol: float = TOL) -> bool:
    """Success branches invariant under swapping the inputs (up to global phase)."""
    return all(same_ray(v, v @ _SWAP, tol) for v in success_matrices(spec).values())


# Classification -------------------------------------------------------------------

_PARITY = {
    ("YZ", 0): "Z", ("YZ", 1): "Y",
    ("XZ", 0): "Z", ("XZ", 1): "X",
    ("XY", 0): "X", ("XY", 1): "Y",
}


def pauli_family(plane: str, a: int) -> str:
    """Family of the canonical fusion measured in ``plane`` at angle ``a pi/2``."""
    return _PARITY[(plane, a % 2)]


@dataclass
class FusionClass:
    green_failure: bool
    pauli_error: bool
    symmetric: bool
    family: str = "none"
    canonical_params: tuple | None = None  # (plane, alpha, c)
    clifford_pair: tuple | None = None  # (c1, c2) for non-symmetric matches
    entangling: bool = False
    corrections: dict | None = None

    def to_json(self) -> dict:
        return {
            "green_failure": self.green_failure,
            "pauli_error": self.pauli_error,
            "symmetric": self.symmetric,
            "family": self.family,
            "canonical_params": list(self.canonical_params) if self.canonical_params else None,
            "clifford_pair": list(self.clifford_pair) if self.clifford_pair else None,
            "entangling": self.entangling,
            "corrections": {f"{k}{j}": "".join(p) for (k, j), p in self.corrections.items()} if self.corrections else None,
        }


def _plane_rows(plane: str, c1: int, c2: int) -> tuple:
    """``A0, A1`` with canonical ``S(0,0)(alpha) ~ A0 + e^{i alpha} A1``."""
    s0 = success_matrices(canonical_fusion(plane, 0.0, c1, c2))[(0, 0)]
    s1 = success_matrices(canonical_fusion(plane, math.pi, c1, c2))[(0, 0)]
    s0, s1 = _align(s0, s1, plane, c1, c2)
    return (s0 + s1) / 2, (s0 - s1) / 2


def _align(s0, s1, plane, c1, c2):
    # fix the relative global phase between the alpha = 0 and alpha = pi evaluations
    sh = success_matrices(canonical_fusion(plane, HALF_PI, c1, c2))[(0, 0)]
    best = None
    for ph in np.exp(1j * np.linspace(0, 2 * math.pi, 8, endpoint=False)):
        a0, a1 = (s0 + ph * s1) / 2, (s0 - ph * s1) / 2
        cand = a0 + 1j * a1
        lam = np.vdot(cand, sh) / max(np.vdot(cand, cand).real, 1e-300)
        err = np.abs(sh - lam * cand).max()
        if best is None or err < best[0]:
            best = (err, s0, ph * s1)
    return best[1], best[2]


def _solve_alpha(v, a0, a1, tol):
    m = np.column_stack([a0, a1])
    coef, *_ = np.linalg.lstsq(m, v, rcond=None)
    if np.abs(m @ coef - v).max() > tol * max(1.0, np.abs(v).max()):
        return None
    mu, nu = coef
    if abs(mu) < tol or abs(abs(nu / mu) - 1) > 1e-6:
        return None
    return float(np.angle(nu / mu) % (2 * math.pi))


def _match_canonical(spec: FusionSpec, tol: float, symmetric_only: bool):
    v = success_matrices(spec)[(0, 0)]
    pairs = [(c, c) for c in range(2)] if symmetric_only else [(c1, c2) for c1 in range(4) for c2 in range(4)]
    for paulis in [("I", "I")] + [p for p in itertools.product("IXYZ", repeat=2) if p != ("I", "I")]:
        target = v @ np.kron(_PAULI[paulis[0]], _PAULI[paulis[1]])
        for plane in PLANES:
            for c1, c2 in pairs:
                a0, a1 = _plane_rows(plane, c1, c2)
                alpha = _solve_alpha(target, a0, a1, tol)
                if alpha is None:
                    continue
                cand = success_matrices(canonical_fusion(plane, alpha, c1, c2))[(0, 0)]
                if same_ray(target, cand, tol):
                    return plane, alpha, c1, c2
    return None


def classify(spec: FusionSpec, tol: float = TOL) -> FusionClass:
    green = has_green_failure(spec, tol)
    corr = pauli_corrections(spec, tol)
    sym = is_symmetric(spec, tol)
    cls = FusionClass(green, corr is not None, sym, corrections=corr)
    if not (green and corr is not None):
        return cls
    match = _match_canonical(spec, tol, symmetric_only=True) or _match_canonical(spec, tol, symmetric_only=False)
    if match is None:
        return cls
    plane, alpha, c1, c2 = match
    snapped = round(alpha / (math.pi / 8)) * (math.pi / 8)
    if abs(alpha - snapped) < 1e-9:
        alpha = snapped % (2 * math.pi)
    if c1 == c2:
        cls.canonical_params = (plane, alpha, c1)
    cls.clifford_pair = (c1, c2)
    q = alpha / HALF_PI
    if abs(q - round(q)) < 1e-6:
        cls.family = pauli_family(plane, int(round(q)))
    else:
        cls.family = plane
    cls.entangling = cls.family != "Z"
    return cls


# Probabilities ------------------------------------------------------------------------


def success_probability(spec: FusionSpec, input_density) -> float:
    """Born probability of success, summed over both error bits."""
    rho = np.asarray(input_density, dtype=complex)
    maps = branch_maps(spec)
    return sum(zx.cp_probability(maps.success, {maps.k: k, maps.j: j}, rho) for k in (0, 1) for j in (0, 1))


def graph_fusion_diagram(spec: FusionSpec, vertices, edges, pair, branch: str = "success") -> ZxDiagram:
    """Graph state with GHZ copies of ``pair`` fed into the fusion branch.

    Remaining outputs are the graph vertices in order.
    """
    vertices = list(vertices)
    a, b = pair
    outs = vertices + [a, b]
    g = zx.graph_state_diagram(vertices, edges, outputs=outs)
    maps = branch_maps(spec)
    eff = maps.success if branch == "success" else maps.failure
    layer = zx.tensor(zx.identity(len(vertices)), eff)
    return zx.compose(g, layer)


def graph_input_success_probability(spec: FusionSpec, vertices, edges, pair) -> float:
    """Success probability when the inputs are copies of graph-state vertices."""
    if not has_green_failure(spec):
        raise ValueError("graph-input success probability needs a fusion with green failure")
    d = graph_fusion_diagram(spec, vertices, edges, pair)
    return sum(zx.cp_probability(d, {"k": k, "j": j}) for k in (0, 1) for j in (0, 1))
