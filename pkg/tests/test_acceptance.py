"""Acceptance criteria 1-10, each checked at its stated tolerance and time limit.

Every test records one line in ``RESULTS``; ``conftest.py`` prints them at the
end of the run.  ``python3 tests/test_acceptance.py`` runs them standalone.
"""

import itertools
import math
import random
import time

import numpy as np
import pytest

from fusionflow import compiler, flow, fusion, optics, patterns, streams, zx
from fusionflow.flow import FlowError, OpenGraph
from fusionflow.zx import Phase

RESULTS = {}

H = np.array([[1, 1], [1, -1]]) / math.sqrt(2)
Z = np.diag([1, -1])
STAR = 1 / math.sqrt(2)


def rz(t):
    return np.diag([1, np.exp(1j * t)])


def close(a, b, tol):
    return np.allclose(np.asarray(a), np.asarray(b), atol=tol, rtol=0)


def proportional(a, b, tol=1e-9):
    a, b = np.ravel(a), np.ravel(b)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na < 1e-12 or nb < 1e-12:
        return na < 1e-12 and nb < 1e-12
    return abs(abs(np.vdot(a, b)) - na * nb) < tol * na * nb


def up_to_phase(a, b, tol):
    a, b = np.asarray(a) / np.linalg.norm(a), np.asarray(b) / np.linalg.norm(b)
    ov = np.vdot(b, a)
    return ov != 0 and np.abs(a - ov / abs(ov) * b).max() <= tol


def record(number, title, limit, fn):
    t0 = time.perf_counter()
    ok, detail = fn()
    dt = time.perf_counter() - t0
    passed = bool(ok) and dt < limit
    line = f"[{'PASS' if passed else 'FAIL'}] {number:>2}. {title}: {detail} ({dt:.2f} s, limit {limit:g} s)"
    RESULTS[number] = line
    print(line)
    assert ok, line
    assert dt < limit, line


# -- 1 ---------------------------------------------------------------------------------------

def _type1():
    r = optics.kraus_report(optics.type1_circuit(), 2, 1)
    worst = 0.0
    for a, b in ((1, 0), (0, 1)):
        d = zx.z_spider(2, 1, Phase.pi(b))
        d.scalar = zx.Scalar(1)
        worst = max(worst, np.abs(r.branch((a, b)).kraus - zx.eval_tensor(d)).max())
    # failure: outcomes 0+0 or 2 photons on one side, coarse-grained by the surviving Z value
    fail = r.coarse_grain(lambda o: ("fail", 1 - (o["a"] + o["b"]) // 2) if o["a"] + o["b"] != 1 else "ok")
    for k in (0, 1):
        bra = np.zeros(4)
        bra[2 * (1 - k) + k] = 1
        worst = max(worst, np.abs(fail[("fail", k)].effect - np.outer(bra, bra)).max())
    complete = np.abs(r.completeness() - np.eye(4)).max()
    return worst <= 1e-9 and complete <= 1e-9, f"max entry error {worst:.1e} over 4 basis inputs"


def test_criterion_1_type1_kraus():
    record(1, "Type I fusion Kraus maps equal ZX branch maps", 1, _type1)


# -- 2 ---------------------------------------------------------------------------------------

def _type2():
    r = optics.kraus_report(optics.type2_circuit(), 2, 0)
    worst, n = 0.0, 0
    for br in r.branches:
        o = dict(zip(r.variables, br.outcome))
        if o["a"] + o["b"] != 1 or br.leaked:
            continue
        d = zx.x_spider(2, 0, Phase.pi(o["b"] + o["d"]))
        d.scalar = zx.Scalar(2)
        worst = max(worst, np.abs(br.kraus - zx.eval_tensor(d)).max())
        n += 1
    bs = optics.LoCircuit(2, [optics.BeamSplitter(0, 1), optics.Detector(0, "a"), optics.Detector(1, "b")])
    dist = dict(optics.outcome_distribution(bs, optics.FockVector(2, {(1, 1): 1.0})))
    hom = dist.get((1, 1), 0.0)
    return n == 4 and worst <= 1e-9 and hom == 0.0, f"4 success branches, error {worst:.1e}; P(1,1) = {hom}"


def test_criterion_2_type2_and_hom():
    record(2, "Type II fusion X-effect and HOM dip", 1, _type2)


# -- 3 ---------------------------------------------------------------------------------------

def _probabilities():
    specs = [fusion.x_fusion(), fusion.y_fusion(), fusion.type2_spec()]
    mixed = max(abs(fusion.success_probability(s, np.eye(4) / 4) - 0.5) for s in specs)
    rng = random.Random(3)
    worst, pairs = 0.0, 0
    for _ in range(10):
        n = rng.randint(2, 5)
        edges = [e for e in itertools.combinations(range(n), 2) if rng.random() < 0.5]
        for pair in itertools.combinations(range(n), 2):
            for s in specs[:2]:
                worst = max(worst, abs(fusion.graph_input_success_probability(s, range(n), edges, pair) - 0.5))
                pairs += 1
    return mixed <= 1e-9 and worst <= 1e-9, f"mixed {mixed:.1e}, {pairs} graph pairs max {worst:.1e}"


def test_criterion_3_fusion_probabilities():
    record(3, "Fusion success probability 1/2", 10, _probabilities)


# -- 4 ---------------------------------------------------------------------------------------

# independent table: YZ even->Z odd->Y, XZ even->Z odd->X, XY even->X odd->Y
PARITY = {"YZ": "ZY", "XZ": "ZX", "XY": "XY"}


def _classification():
    bad = []
    for plane, a, c in itertools.product(("XY", "YZ", "XZ"), range(4), range(2)):
        cls = fusion.classify(fusion.canonical_fusion(plane, a * math.pi / 2, c))
        if not (cls.green_failure and cls.pauli_error) or cls.family != PARITY[plane][a % 2]:
            bad.append((plane, a, c, cls.family))
    return not bad, f"{24 - len(bad)}/24 cells" + (f", wrong {bad}" if bad else "")


def test_criterion_4_classification_table():
    record(4, "Pauli-fusion classification parity table", 5, _classification)


# -- 5 ---------------------------------------------------------------------------------------

def _exhaustive_networks():
    """Every 4-vertex resource graph with output 3, optional input 0 and one X or Y fusion."""
    pairs = list(itertools.combinations(range(4), 2))
    for mask in range(1 << len(pairs)):
        edges = {p for i, p in enumerate(pairs) if mask >> i & 1}
        for ins, (a, b), plane in itertools.product((set(), {0}), itertools.combinations(range(3), 2), "XY"):
            g = OpenGraph(list(range(4)), edges, ins, {3}, {v: "XY" for v in range(3)}, {v: 0.4 * v + 0.3 for v in range(3)})
            yield flow.FusionNetwork.xy(g, [flow.Fusion(a, b, plane, 0.0, "f")])


def _flow_theorem():
    nets = list(_exhaustive_networks())
    rng = random.Random(55)
    while len(nets) < len(list(_exhaustive_networks())) + 200:
        n_out = rng.randint(1, 2)
        try:
            nets.append(flow.random_xy_network(rng, rng.randint(n_out + 2, 8), rng.randint(1, 3),
                                               n_in=rng.randint(0, 1), n_out=n_out))
        except (FlowError, ValueError):
            continue
    bad, found = 0, 0
    for net in nets:
        xy = flow.find_xy_flow(net) is not None
        simp = flow.find_pauli_flow(flow.simplified_target_graph(net)) is not None
        oracle = flow.exhaustive_pauli_flow(flow.target_open_graph(net), no_odd=net.fusion_nodes("X")) is not None
        bad += not (xy == simp == oracle)
        found += xy
    return bad == 0, f"{len(nets)} networks ({found} with flow), {bad} mismatches"


def test_criterion_5_flow_theorem():
    record(5, "XY-flow iff Pauli flow on simplified target", 120, _flow_theorem)


# -- 6 ---------------------------------------------------------------------------------------

def _determinism():
    msgs = []
    for alpha in (0.0, 0.7, 1.9, 3.3, 5.1):
        p = patterns.xy_pattern_example(alpha)
        n_branches = len(patterns.enumerate_branches(p))
        strong = patterns.check_determinism(p, "strong")
        unit = all(abs(abs(r) - 1) < 1e-9 for rs in strong.ratios for r in rs)
        step = patterns.check_determinism(p, "stepwise")
        if not (n_branches == 8 and strong and unit and step):
            msgs.append(f"alpha={alpha}")
    rng = random.Random(11)
    done = 0
    while done < 20:
        try:
            net = flow.random_xy_network(rng, rng.randint(3, 6), rng.randint(1, 2), n_in=rng.randint(0, 1),
                                         n_out=rng.randint(1, 2))
        except (FlowError, ValueError):
            continue
        cert = flow.find_xy_flow(net)
        if cert is None:
            continue
        p = patterns.pattern_from_flow(net, cert)
        target = zx.eval_tensor(patterns.network_target_map(net))
        if not patterns.check_determinism(p, "strong") or not all(
                zx.proportionality(m, target, 1e-8) is not None for _, m in patterns.branch_matrices(p)):
            msgs.append(f"network {done}")
        done += 1
    return not msgs, "example at 5 angles and 20 flowed networks" + (f"; failed {msgs}" if msgs else " deterministic")


def test_criterion_6_pattern_determinism():
    record(6, "Pattern determinism on success", 120, _determinism)


# -- 7 ---------------------------------------------------------------------------------------

def _rus():
    worst, traces, rec_bad, bits_bad = 0.0, 0, 0, 0
    for spec in (fusion.x_fusion(), fusion.y_fusion()):
        for n in range(6):
            r = streams.rus_statistics(spec, n)
            worst = max(worst, abs(r["p_success"] - (1 - 2.0 ** -(n + 1))))
            bits_bad += not r["bits_match"]
            for tr in r["traces"]:
                traces += 1
                c = d = 1
                for t in range(n + 1):
                    s = tr.s[t]
                    c ^= ((1 - s) & tr.k[t]) ^ (s & tr.a[t])
                    d ^= ((1 - s) & (1 - tr.k[t])) ^ (s & tr.b[t])
                    rec_bad += (tr.c[t], tr.d[t]) != (c, d)
    ok = worst <= 1e-10 and not rec_bad and not bits_bad
    return ok, f"max |P - (1 - 2^-(n+1))| = {worst:.1e}, {traces} branches, recurrence failures {rec_bad + bits_bad}"


def test_criterion_7_rus_probabilities():
    record(7, "RUS success within n+1 rounds", 60, _rus)


# -- 8 ---------------------------------------------------------------------------------------

def _rx(q):
    return H @ rz(q * math.pi / 2) @ H


def _output_op(g, ops):
    m = np.eye(1)
    for v in g.vertices:
        if v in g.outputs:
            m = np.kron(m, ops.get(v, np.eye(2)))
    return m


def _has_flow(g):
    return flow.exhaustive_pauli_flow(g) is not None


def _rewrite_cases(rng, g):
    """Yield (name, rewritten graph, output correction ops) for every applicable rewrite."""
    u = rng.choice([v for v in g.vertices if v not in g.inputs] or [None])
    if u is not None:
        ops = {w: rz(math.pi / 2) for w in g.neighbours(u) if w in g.outputs}
        if u in g.outputs:
            ops[u] = _rx(3)
        yield "lc", flow.local_complement(g, u), ops
    es = sorted(tuple(sorted(e, key=str)) for e in g.edges if not e & g.inputs)
    if es:
        a, b = rng.choice(es)
        ops, cur = {}, g
        for x in (a, b, a):
            for w in cur.neighbours(x):
                if w in g.outputs:
                    ops[w] = rz(math.pi / 2) @ ops.get(w, np.eye(2))
            if x in g.outputs:
                ops[x] = _rx(3) @ ops.get(x, np.eye(2))
            cur = flow.local_complement(cur, x)
        yield "pivot", flow.pivot(g, a, b), ops
    zs = [v for v in g.measured if g.planes[v] == "Z" and v not in g.inputs]
    if zs:
        a = int(round(g.angles[zs[0]] / math.pi)) % 2
        yield "copy", flow.copy_z(g, zs[0]), {w: rz(a * math.pi) for w in g.neighbours(zs[0]) if w in g.outputs}
    a = rng.choice(g.vertices)
    moved = [w for w in sorted(g.neighbours(a), key=str) if rng.random() < 0.5]
    yield "x_split", flow.x_fusion_split(g, (a, "f", "b"), moved), {}
    es = sorted(tuple(sorted(e, key=str)) for e in g.edges if not e & g.outputs)
    if es:
        yield "y_insert", flow.y_fusion_insert(g, rng.choice(es)), {}


def _rewrites():
    rng = random.Random(8)
    counts, bad = {}, []
    for _ in range(45):
        g = flow.random_open_graph(rng, rng.randint(3, 5), 0.5, rng.randint(0, 2), rng.randint(1, 2))
        for name, h, ops in _rewrite_cases(rng, g):
            counts[name] = counts.get(name, 0) + 1
            same = proportional(_output_op(g, ops) @ flow.target_linear_map(g), flow.target_linear_map(h))
            if not same or _has_flow(g) != _has_flow(h):
                bad.append(name)
    while counts.get("inflate", 0) < 20:
        try:
            net = flow.random_xy_network(rng, rng.randint(3, 5), rng.randint(1, 2), n_in=rng.randint(0, 1))
        except (FlowError, ValueError):
            continue
        inf = flow.destructive_inflate(net)
        t, ti = flow.target_open_graph(net), flow.target_open_graph(inf)
        counts["inflate"] = counts.get("inflate", 0) + 1
        same = len(ti.vertices) > 12 or proportional(flow.target_linear_map(t), flow.target_linear_map(ti))
        if not same or (flow.find_xy_flow(net) is None) != (flow.find_xy_flow(inf) is None):
            bad.append("inflate")
    total = sum(counts.values())
    ok = not bad and total >= 100 and len(counts) == 6
    return ok, f"{total} instances {dict(sorted(counts.items()))}, {len(bad)} failures"


def test_criterion_8_flow_preserving_rewrites():
    record(8, "Flow-preserving rewrites", 120, _rewrites)


# -- 9 ---------------------------------------------------------------------------------------

def _universality():
    g = OpenGraph(["i1", "i2", "o1", "o2"], {("i1", "o1"), ("i2", "o2"), ("o1", "o2")},
                  {"i1", "i2"}, {"o1", "o2"}, {"i1": "X", "i2": "X"}, {})
    rep = compiler.verify_compilation(compiler.compile_graph(g))
    u = compiler.unitary_of(rep)
    target = np.diag([1, 1, 1, -1]) @ np.kron(H, H)
    ok = rep.ok and up_to_phase(u, target, 1e-6)
    return ok, f"{rep.schedule.photons} photons, all checks {'pass' if rep.ok else 'fail'}, unitary within 1e-6"


def test_criterion_9_end_to_end():
    record(9, "CZ (H x H) through the full pipeline", 60, _universality)


# -- 10 --------------------------------------------------------------------------------------

def _stream_lemmas():
    bad = []
    for n in range(6):
        rng = np.random.default_rng(n)
        angles = [tuple(rng.uniform(0, 2 * math.pi, 3)) for _ in range(n + 1)]
        alpha = rng.uniform(0, 2 * math.pi)
        k = streams.unroll(streams.emitter(lambda t, a=angles: zx.euler(*a[t])), n).matrix()
        if not close(k @ rz(alpha), np.kron(rz(alpha), np.eye(2 ** (n + 1))) @ k, 1e-9):
            bad.append(("coinduction", n))
        branches = streams.simulate_protocol(
            streams.sequential(streams.emitter(), streams.measurement_module(lambda t: "X")), n)
        for b in branches:
            parity = sum(b.outcomes[("a", t)] for t in range(n + 1)) % 2
            if not proportional(b.matrix, np.linalg.matrix_power(Z, parity)):
                bad.append(("measure-emitter", n))
        channel = sum(np.kron(b.matrix, b.matrix.conj()) for b in branches)
        if len(branches) != 2 ** (n + 1) or not close(channel, (np.eye(4) + np.kron(Z, Z)) / 2, 1e-9):
            bad.append(("dephasing", n))
    return not bad, "coinduction and measure-emitter for n = 0..5" + (f"; failed {bad}" if bad else "")


def test_criterion_10_stream_lemmas():
    record(10, "Finite stream lemmas", 30, _stream_lemmas)


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q"]))
