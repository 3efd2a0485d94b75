import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fusionflow import fusion, zx
from fusionflow.streams import (
    ExpressibilityError, StreamError, correct_measure_module, correction_module, delay, emitter, feedback,
    identity_stream, measurement_module, permutation_schedule, protocol_from_json, rus_accumulators, rus_protocol,
    rus_statistics, sequential, simulate_protocol, swap_stream, unroll,
)

H = np.array([[1, 1], [1, -1]]) / math.sqrt(2)
X = np.array([[0, 1], [1, 0]])
Z = np.diag([1, -1])


def rz(a):
    return np.diag([1, np.exp(1j * a)])


def euler_np(a, b, g):
    # Z(a), then X(b), then Z(g), each as (1, e^{i theta}) diagonals in its basis
    return rz(g) @ H @ rz(b) @ H @ rz(a)


def proportional(a, b, tol=1e-9):
    lam = zx.proportionality(a, b, tol)
    return lam is not None and abs(lam) > 1e-12


# -- unrolling -----------------------------------------------------------------------------

def test_unroll_constant_swap_is_two_swaps():
    u = unroll(swap_stream(1, 1), 1)
    sw = np.eye(4)[[0, 2, 1, 3]]
    # inputs X0 = (a0, b0), X1 = (a1, b1); outputs Y0, Y1
    assert np.allclose(u.matrix(), np.kron(sw, sw))
    assert u.in_ports == [("X", 0, 0), ("X", 0, 1), ("X", 1, 0), ("X", 1, 1)]


def test_unit_delay_is_feedback_of_swap():
    fb = feedback(swap_stream(1, 1), 1, initial=1)
    assert np.allclose(unroll(fb, 3).matrix(), unroll(delay(1), 3).matrix())


def test_unit_delay_shifts_by_one():
    u = unroll(delay(1), 2)
    # inputs M0, X0, X1, X2 -> outputs Y0 = M0, Y1 = X0, Y2 = X1, M3 = X2
    assert u.out_ports[0] == ("Y", 0, 0) and u.out_ports[-1] == ("M", 3, 0)
    assert np.allclose(u.matrix(), np.eye(16))


def test_delay_zero_is_identity():
    assert np.allclose(unroll(delay(0), 2).matrix(), unroll(identity_stream(), 2).matrix())


def basis_image(m, bits):
    idx = int("".join(map(str, bits)), 2) if bits else 0
    col = m[:, idx]
    out = int(np.argmax(np.abs(col)))
    assert np.isclose(abs(col[out]), 1)
    n = int(round(math.log2(m.shape[0])))
    return [(out >> (n - 1 - i)) & 1 for i in range(n)]


@pytest.mark.parametrize("seed", range(4))
def test_delay_three_shifts_five_steps(seed):
    rng = np.random.default_rng(seed)
    u = unroll(delay(3), 4)
    bits = list(rng.integers(0, 2, len(u.in_ports)))
    val = dict(zip(u.in_ports, bits))
    got = dict(zip(u.out_ports, basis_image(u.matrix(), bits)))
    for t in range(3, 5):
        assert got[("Y", t, 0)] == val[("X", t - 3, 0)]
    # early outputs come from the initial memory, late inputs stay in memory
    assert sorted(got[("Y", t, 0)] for t in range(3)) == sorted(val[("M", 0, i)] for i in range(3))
    assert sorted(got[("M", 5, i)] for i in range(3)) == sorted(val[("X", t, 0)] for t in range(2, 5))


def test_emitter_with_hadamards_is_linear_cluster():
    u = unroll(emitter(lambda t: zx.hadamard()), 2)
    assert u.in_ports == [("M", 0, 0)]
    assert u.out_ports == [("Y", 0, 0), ("Y", 1, 0), ("Y", 2, 0), ("M", 3, 0)]
    # photon t copies the atom, then H acts on the atom
    want = np.zeros((16, 2))
    for x, y1, y2, m in itertools.product((0, 1), repeat=4):
        want[(x << 3) | (y1 << 2) | (y2 << 1) | m, x] = H[y1, x] * H[y2, y1] * H[m, y2]
    assert np.allclose(u.matrix(), want)


@pytest.mark.parametrize("m,n", [(0, 2), (1, 3), (2, 3)])
def test_unrolling_is_functorial(m, n):
    rng = np.random.default_rng(m + 10 * n)
    angles = [tuple(rng.uniform(0, 2 * math.pi, 3)) for _ in range(n + 1)]
    s = emitter(lambda t: zx.euler(*angles[t]))
    head = unroll(s, m).matrix()
    rest = s
    for _ in range(m + 1):
        rest = rest.later()
    tail = unroll(rest, n - m - 1).matrix()
    assert np.allclose(unroll(s, n).matrix(), np.kron(np.eye(2 ** (m + 1)), tail) @ head)


def test_unroll_needs_a_choice_for_branching_steps():
    with pytest.raises(StreamError, match="choose"):
        unroll(rus_protocol(fusion.x_fusion()), 1)
    u = unroll(rus_protocol(fusion.x_fusion()), 1, choose=lambda t, frags, h: 0)
    assert u.outcomes == {("s", 0): 1, ("s", 1): 1}


def test_sequential_checks_port_widths():
    s = sequential(swap_stream(1, 1), measurement_module(lambda t: "X"))
    with pytest.raises(StreamError):
        unroll(s, 0)


# -- lemmas on finite unrollings ------------------------------------------------------------

@pytest.mark.parametrize("n", range(7))
def test_coinduction_phase_through_emitter(n):
    rng = np.random.default_rng(n)
    angles = [tuple(rng.uniform(0, 2 * math.pi, 3)) for _ in range(n + 1)]
    alpha = rng.uniform(0, 2 * math.pi)
    k = unroll(emitter(lambda t: zx.euler(*angles[t])), n).matrix()
    before = k @ rz(alpha)
    after = np.kron(rz(alpha), np.eye(2 ** (n + 1))) @ k
    assert np.allclose(before, after)


@pytest.mark.parametrize("n", range(6))
def test_measuring_ghz_photons_dephases_the_atom(n):
    s = sequential(emitter(), measurement_module(lambda t: "X"))
    branches = simulate_protocol(s, n)
    assert len(branches) == 2 ** (n + 1)
    for b in branches:
        parity = sum(b.outcomes[("a", t)] for t in range(n + 1)) % 2
        assert proportional(b.matrix, np.linalg.matrix_power(Z, parity))
        assert math.isclose(b.probability, 2.0 ** -(n + 1))
    channel = sum(np.kron(b.matrix, b.matrix.conj()) for b in branches)
    assert np.allclose(channel, (np.eye(4) + np.kron(Z, Z)) / 2)


# -- measurement and correction modules -------------------------------------------------------

def test_x_measurement_of_zero_is_fair():
    branches = simulate_protocol(measurement_module(lambda t: "X"), 0, input_state=[1, 0])
    assert sorted(b.probability for b in branches) == pytest.approx([0.5, 0.5])


def test_trivial_correction_is_identity():
    (b,) = simulate_protocol(correction_module(), 0)
    assert np.allclose(b.matrix, np.eye(2))


def test_symbolic_correction_follows_outcome():
    s = sequential(sequential(emitter(), measurement_module(lambda t: "X")), identity_stream(0))
    assert len(simulate_protocol(s, 1)) == 4
    c = correction_module(x=lambda t: {("a", t)})
    for b in simulate_protocol(c, 0):
        assert np.allclose(b.matrix, np.linalg.matrix_power(X, b.outcomes[("a", 0)]))


CASES = [("X", 0.0), ("X", math.pi), ("Y", 0.0), ("Z", 0.0), ("Z", math.pi), ("XY", 0.4), ("XY", 2.2)]


@pytest.mark.parametrize("plane,angle", CASES)
@pytest.mark.parametrize("x,z", list(itertools.product((0, 1), repeat=2)))
def test_correct_measure_optics_matches_zx(plane, angle, x, z):
    s = correct_measure_module(lambda t: plane, lambda t: angle, lambda t: x, lambda t: z)
    by_zx = {b.outcomes[("a", 0)]: b for b in simulate_protocol(s, 0)}
    by_lo = {b.outcomes[("a", 0)]: b for b in simulate_protocol(s, 0, mode="lo")}
    assert set(by_zx) == set(by_lo) == {0, 1}
    for a in (0, 1):
        assert fusion.same_ray(by_zx[a].matrix, by_lo[a].matrix, 1e-9)


@pytest.mark.parametrize("plane,angle", CASES)
@pytest.mark.parametrize("x,z", list(itertools.product((0, 1), repeat=2)))
def test_correction_then_measurement_relabels_outcome(plane, angle, x, z):
    # Pauli corrections before a Pauli or XY measurement act on the effect directly
    s = correct_measure_module(lambda t: plane, lambda t: angle, lambda t: x, lambda t: z)
    v = lambda p, a: zx.eval_tensor(zx.measurement_effect(p, a)).ravel()
    eff = {"X": v("XY", angle), "Y": v("XY", math.pi / 2 + angle), "Z": v("XZ", angle)}.get(plane, v("XY", angle))
    for b in simulate_protocol(s, 0):
        flipped = eff if b.outcomes[("a", 0)] == 0 else eff @ np.diag([1, -1]) if plane != "Z" else eff @ X
        want = flipped @ np.linalg.matrix_power(X, x) @ np.linalg.matrix_power(Z, z)
        assert fusion.same_ray(b.matrix.ravel(), want, 1e-9)


def test_lo_mode_rejects_memory_and_other_planes():
    with pytest.raises(ExpressibilityError):
        simulate_protocol(emitter(), 1, mode="lo")
    with pytest.raises(ExpressibilityError):
        simulate_protocol(measurement_module(lambda t: "YZ"), 0, mode="lo")
    with pytest.raises(StreamError):
        simulate_protocol(emitter(), 1, mode="fock")


@settings(max_examples=15, deadline=None)
@given(st.lists(st.sampled_from(["X", "Y", "Z"]), min_size=1, max_size=3),
       st.lists(st.floats(0, 2 * math.pi), min_size=3, max_size=3))
def test_probabilities_sum_to_one(planes, angles):
    us = [zx.euler(*angles)] * len(planes)
    s = sequential(emitter(lambda t: us[t]), measurement_module(lambda t: planes[t]))
    assert sum(b.probability for b in simulate_protocol(s, len(planes) - 1)) == pytest.approx(1, abs=1e-8)


# -- routing -------------------------------------------------------------------------------------

def test_identity_permutation_routes_straight():
    r = permutation_schedule([0, 1, 2])
    assert set(r.x.values()) == {3}
    assert r.route({0: "a", 1: "b", 2: "c"}, 6) == {3: "a", 4: "b", 5: "c"}


def test_reversal_on_three_photons():
    r = permutation_schedule([2, 1, 0])
    assert r.route({0: "a", 1: "b", 2: "c"}, 6) == {3: "c", 4: "b", 5: "a"}


@pytest.mark.parametrize("sigma", list(itertools.permutations(range(4))))
def test_all_permutations_of_four(sigma):
    r = permutation_schedule(list(sigma))
    out = r.route({t: t for t in range(4)}, 8)
    assert {t - 4: label for t, label in out.items()} == {sigma[t]: t for t in range(4)}
    u = r.transfer(8)
    assert np.allclose(u[4:, :4] @ u[4:, :4].T, np.eye(4))


def test_permutation_schedule_rejects_non_bijections():
    with pytest.raises(StreamError):
        permutation_schedule([0, 0, 1])


# -- repeat-until-success --------------------------------------------------------------------------

@pytest.mark.parametrize("spec", [fusion.x_fusion(), fusion.y_fusion()], ids=["X", "Y"])
@pytest.mark.parametrize("n", range(4))
def test_rus_success_probability(spec, n):
    r = rus_statistics(spec, n)
    assert r["p_success"] == pytest.approx(1 - 2.0 ** -(n + 1), abs=1e-10)
    assert r["total"] == pytest.approx(1, abs=1e-8)
    assert r["bits_match"]


def test_rus_base_case_is_the_fusion_mixture():
    spec = fusion.x_fusion()
    r = rus_statistics(spec, 0)
    maps = fusion.branch_maps(spec)
    for tr in r["traces"]:
        assert tr.probability == pytest.approx(1 / 8 if tr.first_success == 0 else 1 / 4)
    assert {len(tr.derived) for tr in r["traces"]} <= {1, 2}
    assert maps.completeness() == pytest.approx(np.eye(4))


@pytest.mark.parametrize("n", range(4))
def test_rus_recurrences_hold_literally(n):
    for tr in rus_statistics(fusion.y_fusion(), n)["traces"]:
        c, d = 1, 1
        for t in range(n + 1):
            s = tr.s[t]
            c ^= ((1 - s) & tr.k[t]) ^ (s & tr.a[t])
            d ^= ((1 - s) & (1 - tr.k[t])) ^ (s & tr.b[t])
            assert (tr.c[t], tr.d[t]) == (c, d)
        assert (tr.a[tr.first_success] if tr.first_success is not None else 0) == 0


@pytest.mark.parametrize("n", range(5))
def test_rus_x_fusion_matches_corollary(n):
    r = rus_statistics(fusion.x_fusion(), n, "X")
    assert r["corollary_diverge"] == []
    assert r["corollary_agree"] == sum(tr.first_success is not None for tr in r["traces"])


@pytest.mark.parametrize("n", [1, 3])
def test_rus_y_fusion_matches_corollary_for_odd_n(n):
    r = rus_statistics(fusion.y_fusion(), n, "Y")
    assert r["corollary_diverge"] == []


@pytest.mark.parametrize("n", [2, 4])
def test_rus_y_fusion_case_split_diverges_for_even_n(n):
    # the last-round case disagrees with the uniform rule y = e + d
    r = rus_statistics(fusion.y_fusion(), n, "Y")
    bad = r["corollary_diverge"]
    assert bad and all(tr.first_success == n for tr in bad)
    for tr in bad:
        e = tr.k[n] ^ tr.j[n]
        assert tr.corollary["y"] != e ^ tr.d[n]


def test_rus_y_fusion_even_rounds_leave_pauli_errors():
    spec = fusion.y_fusion()
    for n in (2, 4):
        for b in simulate_protocol(rus_protocol(spec), n):
            assert np.allclose(np.abs(b.matrix), np.abs(np.diag(np.diag(b.matrix))))


def test_rus_rejects_non_green_spec():
    spec = fusion.FusionSpec((0.3, 0.7, 0.2), (0.0, 0.0, 0.0), (0.0, 0.0, 0.0))
    assert not fusion.has_green_failure(spec)
    with pytest.raises(StreamError):
        rus_protocol(spec)


def test_rus_accumulators_start_at_one():
    assert rus_accumulators([0], [0], [0], [0]) == ([1], [0])
    assert rus_accumulators([1], [0], [1], [0]) == ([0], [1])


# -- protocol files ------------------------------------------------------------------------------

def test_protocol_from_json_matches_manual_chain():
    data = {"components": [{"type": "emitter", "u": "H"}, {"type": "measure", "plane": ["X", "Y", "Z"]}]}
    s = protocol_from_json(data)
    manual = sequential(emitter(lambda t: zx.hadamard()), measurement_module(lambda t: ["X", "Y", "Z"][t]))
    for a, b in zip(simulate_protocol(s, 2), simulate_protocol(manual, 2)):
        assert a.outcomes == b.outcomes and np.allclose(a.matrix, b.matrix)


@pytest.mark.parametrize("data", [
    {"components": []},
    {"components": [{"type": "laser"}]},
    {"components": [{"type": "emitter", "u": "Q"}]},
    {},
])
def test_malformed_protocols(data):
    with pytest.raises(StreamError):
        protocol_from_json(data)


def test_short_schedule_is_reported():
    s = protocol_from_json({"components": [{"type": "emitter"}, {"type": "measure", "plane": ["X"]}]})
    with pytest.raises(StreamError, match="step 1"):
        unroll(s, 1)
