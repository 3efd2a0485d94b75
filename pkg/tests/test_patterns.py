import dataclasses
import itertools
import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fusionflow import flow, zx
from fusionflow.flow import FlowCertificate, FlowError, Fusion, FusionNetwork, OpenGraph
from fusionflow.patterns import (
    C, E, F, M, N, Cond, Pattern, PatternError, branch_matrices, check_determinism, enumerate_branches,
    is_runnable, network_target_map, pattern_from_flow, sample_angles, target_linear_map, truncations,
    underlying_network, xy_pattern_example,
)

HALF_PI = math.pi / 2
H = np.array([[1, 1], [1, -1]]) / math.sqrt(2)
S = np.diag([1, 1j])
PAULI = {"X": np.array([[0, 1], [1, 0]]), "Z": np.diag([1, -1])}


def effect(plane, angle):
    p, a = flow.effect_label(plane, angle)
    return np.array([1, np.exp(1j * a)]) @ {"XY": np.eye(2), "YZ": H, "XZ": H @ S}[p] / math.sqrt(2)


# -- independent statevector semantics ------------------------------------------------

def _apply(state, labels, qs, op):
    ax = [labels.index(q) for q in qs]
    k = len(qs)
    op = op.reshape([2] * (2 * k))
    out = np.tensordot(op, state, axes=(list(range(k, 2 * k)), ax))
    rest = [lab for lab in labels if lab not in qs]
    return out, list(qs) + rest


def simulate(p, outcomes):
    """Branch map of ``p`` (outputs x inputs), built command by command."""
    cols = []
    for bits in itertools.product((0, 1), repeat=len(p.inputs)):
        state = np.zeros([2] * len(p.inputs), dtype=complex) if p.inputs else np.array(1, dtype=complex)
        state[bits] = 1
        labels = list(p.inputs)
        for c in p.commands:
            if isinstance(c, N):
                state = np.multiply.outer(np.ones(2) / math.sqrt(2), state)
                labels = [c.q] + labels
            elif isinstance(c, E):
                state, labels = _apply(state, labels, [c.a, c.b], np.diag([1, 1, 1, -1]))
            elif isinstance(c, M):
                e = effect(c.plane, c.angle + math.pi * outcomes[c.var])
                state = np.tensordot(e, state, axes=([0], [labels.index(c.q)]))
                labels = [q for q in labels if q != c.q]
            elif isinstance(c, C):
                if c.cond.evaluate(outcomes):
                    state, labels = _apply(state, labels, [c.q], PAULI[c.kind])
            elif isinstance(c, F):
                k = outcomes[c.k]
                if outcomes[c.s]:
                    e = effect(c.plane, k * math.pi)
                    op = (e[0] * np.eye(4) + e[1] * np.diag([1, -1, -1, 1])) / 2
                    if c.plane == "Y":
                        op = op @ np.kron(S, S)
                else:
                    base = 0 if c.plane == "X" else HALF_PI
                    op = np.kron(np.diag([1, np.exp(1j * (base + (1 - k) * math.pi))]),
                                 np.diag([1, np.exp(1j * (base + k * math.pi))])) / 2
                state, labels = _apply(state, labels, [c.a, c.b], op)
        state = np.transpose(state, [labels.index(q) for q in p.outputs]) if p.outputs else state
        cols.append(np.ravel(state))
    return np.array(cols).T


def flowed_networks(count, seed, max_res=6, max_fusions=2):
    rng = random.Random(seed)
    out = []
    while len(out) < count:
        try:
            net = flow.random_xy_network(rng, rng.randint(3, max_res), rng.randint(1, max_fusions),
                                         n_in=rng.randint(0, 1), n_out=rng.randint(1, 2))
        except (FlowError, ValueError):
            continue
        cert = flow.find_xy_flow(net)
        if cert is not None:
            out.append((net, cert))
    return out


# -- format ------------------------------------------------------------------------------

def test_example_text_round_trip():
    p = xy_pattern_example(0.7)
    assert Pattern.from_text(p.to_text(), outputs=[2, 4]) == p
    assert p.to_text().startswith("[X 4]^{l} [Z 2]^{j} [X 2]^{k} M{XY,0.7,l} 3 M{X,k} 1 F{X,s,j} 1 3")


def test_example_json_round_trip():
    p = xy_pattern_example(0.7)
    assert Pattern.from_json(p.to_json()) == p


def test_symbolic_angle_binding():
    p = xy_pattern_example()
    assert p.parameters() == {"a"}
    with pytest.raises(PatternError, match="unbound"):
        branch_matrices(p)
    assert p.bind({"a": 0.3}) == xy_pattern_example(0.3)


def test_parse_conditions_and_pi_angles():
    p = Pattern.from_text("[Z 2]^{a+b+1} M{YZ,pi/4,b} 1 M{XZ,-pi/2,a} 0 E 0 1 E 1 2 N 2 N 1", inputs=[0])
    assert p.commands[-1] == C("Z", 2, Cond(frozenset({"a", "b"}), 1))
    assert math.isclose(p.commands[-2].angle, math.pi / 4)
    assert math.isclose(p.commands[-3].angle, -math.pi / 2)


@pytest.mark.parametrize("text", ["Q 1", "M{XY} 1", "F{X,s} 1 2", "[Y 1]^{a}"])
def test_malformed_text(text):
    with pytest.raises(PatternError):
        Pattern.from_text(text)


def test_malformed_json():
    with pytest.raises(PatternError):
        Pattern.from_json({"register": [0], "commands": [{"op": "W", "q": 0}]})
    with pytest.raises(PatternError):
        Pattern.from_json({"commands": []})


# -- runnability ----------------------------------------------------------------------------

@pytest.mark.parametrize("text,fragment", [
    ("M{X,a} 1", "not prepared"),
    ("M{X,b} 1 M{X,a} 1 N 1", "measured"),
    ("M{X,a} 1 [X 1]^{a} N 1", "not yet produced"),
    ("M{X,a} 2 M{X,a} 1 N 2 N 1", "fresh"),
    ("E 1 1 N 1", "itself"),
    ("F{Z,s,k} 1 2 N 2 N 1", "X or Y"),
    ("F{X,s,k} 1 2 M{X,a} 2 N 2 N 1", "measured"),
    ("N 1 N 1", "twice"),
    ("E 1 2 N 2 N 1", "neither measured"),
])
def test_unrunnable_patterns(text, fragment):
    rep = is_runnable(Pattern.from_text(text, outputs=[]))
    assert not rep and fragment in rep.reason


def test_output_may_not_be_measured():
    p = Pattern.from_text("M{X,a} 1 N 1", outputs=[1])
    assert "output" in is_runnable(p).reason


def test_measuring_after_fusion_is_allowed():
    # fusion leaves both qubits in place
    assert is_runnable(xy_pattern_example(0.1))


# -- branches ------------------------------------------------------------------------------

def test_example_branch_counts():
    p = xy_pattern_example(0.7)
    assert len(enumerate_branches(p)) == 8
    full = enumerate_branches(p, success_only=False)
    assert len(full) == 16
    assert sum(b.success for b in full) == 8


@pytest.mark.parametrize("alpha", [0.0, 0.7, 2.9])
def test_branches_match_statevector_oracle(alpha):
    p = xy_pattern_example(alpha)
    for b in enumerate_branches(p, success_only=False):
        assert np.allclose(b.matrix, simulate(p, b.outcomes), atol=1e-10)


@pytest.mark.parametrize("plane", ["X", "Y"])
def test_fusion_instrument_is_complete(plane):
    # all four fusion branches on two input qubits sum to the identity
    p = Pattern([0, 1], [0, 1], [0, 1], [F(0, 1, plane, "s", "k")])
    total = sum(b.matrix.conj().T @ b.matrix for b in enumerate_branches(p, success_only=False))
    assert np.allclose(total, np.eye(4), atol=1e-10)
    succ = sum(b.matrix.conj().T @ b.matrix for b in enumerate_branches(p))
    assert np.allclose(succ, np.eye(4) / 2, atol=1e-10)


def test_synthesised_branches_match_oracle():
    for net, cert in flowed_networks(6, seed=3, max_res=5):
        p = pattern_from_flow(net, cert)
        for b in enumerate_branches(p, success_only=False)[::5]:
            assert np.allclose(b.matrix, simulate(p, b.outcomes), atol=1e-10)


# -- determinism -----------------------------------------------------------------------------

@pytest.mark.parametrize("mode", ["plain", "strong", "stepwise"])
def test_example_is_deterministic(mode):
    p = xy_pattern_example(0.7)
    rep = check_determinism(p, mode, sample_angles(p))
    assert rep, rep.failures


def test_example_ratios_are_unit_modulus():
    rep = check_determinism(xy_pattern_example(1.3), "strong")
    assert all(abs(abs(r) - 1) < 1e-9 for r in rep.ratios[0])


@pytest.mark.parametrize("drop", range(3))
def test_dropping_a_correction_breaks_determinism(drop):
    p = xy_pattern_example(0.7)
    idx = [i for i, c in enumerate(p.commands) if isinstance(c, C)][drop]
    q = dataclasses.replace(p, commands=p.commands[:idx] + p.commands[idx + 1:])
    assert not check_determinism(q, "plain", sample_angles(q, 2))


def test_stepwise_needs_every_cut():
    # deterministic overall, yet the cut after M1 is not
    p = Pattern.from_text("[Z 3]^{a} [X 3]^{b} M{X,b} 2 M{X,a} 1 E 2 3 E 1 2 N 3 N 2", inputs=[1])
    assert check_determinism(p, "plain")
    assert len(truncations(p)) == 2
    rep = check_determinism(p, "stepwise")
    assert not rep and rep.failures[0].startswith("given/cut0")


def test_unknown_mode():
    with pytest.raises(PatternError):
        check_determinism(xy_pattern_example(0.1), "weak")


# -- synthesis ----------------------------------------------------------------------------------

def test_example_network_synthesis():
    net = underlying_network(xy_pattern_example(0.7))
    cert = flow.find_xy_flow(net)
    p = pattern_from_flow(net, cert)
    assert check_determinism(p, "strong")
    target = zx.eval_tensor(network_target_map(net))
    assert all(zx.proportionality(m, target, 1e-8) is not None for _, m in branch_matrices(p))


def test_flow_patterns_realise_target_maps():
    for net, cert in flowed_networks(20, seed=11):
        p = pattern_from_flow(net, cert)
        assert is_runnable(p)
        target = zx.eval_tensor(network_target_map(net))
        mats = branch_matrices(p)
        assert len(mats) == 2 ** (len(net.graph.measured) + len(net.fusions))
        for _, m in mats:
            assert zx.proportionality(m, target, 1e-8) is not None
        assert check_determinism(p, "strong")


def test_underlying_network_round_trip():
    for net, cert in flowed_networks(5, seed=4):
        back = underlying_network(pattern_from_flow(net, cert))
        assert back.graph.edges == net.graph.edges
        assert [(f.a, f.b, f.plane, f.name) for f in back.fusions] == [(f.a, f.b, f.plane, f.name) for f in net.fusions]
        assert back.clifford == net.clifford


def test_synthesis_rejects_bad_certificates():
    net, cert = flowed_networks(1, seed=5)[0]
    t = flow.target_open_graph(net)
    empty = FlowCertificate({v: set() for v in t.measured}, {v: 0 for v in t.vertices})
    with pytest.raises(FlowError):
        pattern_from_flow(net, empty)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10_000))
def test_synthesised_text_round_trip(seed):
    net, cert = flowed_networks(1, seed=seed, max_res=5)[0]
    p = pattern_from_flow(net, cert)
    back = Pattern.from_text(p.to_text(), inputs=p.inputs, outputs=p.outputs, register=p.register)
    assert back.to_text() == p.to_text() and back.register == p.register
    assert Pattern.from_json(p.to_json()) == p
