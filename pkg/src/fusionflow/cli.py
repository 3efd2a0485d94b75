"""Command-line entry point: ``fusionflow <group> <command> [options]``.

Exit status is 0 when every requested check passes, 1 when a check fails and
2 for malformed input (a JSON diagnostic goes to stderr).
"""

from __future__ import annotations

import argparse
import json
import math
import random
import re
import sys
import time

import numpy as np

from . import compiler, flow, fusion, optics, patterns, streams, zx

_ANGLE = re.compile(r"^([+-]?\d*\.?\d*)\*?pi(?:/(\d+))?$")


class InputError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InputError(message)


def _angle(text: str) -> float:
    """``0.3``, ``pi``, ``-pi/2``, ``3pi/4`` or ``3*pi/4``."""
    s = text.strip().replace(" ", "")
    m = _ANGLE.match(s)
    if m:
        coef = m.group(1)
        c = -1.0 if coef == "-" else 1.0 if coef in ("", "+") else float(coef)
        return c * math.pi / int(m.group(2) or 1)
    try:
        return float(s)
    except ValueError:
        raise InputError(f"cannot read angle {text!r}") from None


def _triple(text: str) -> tuple:
    parts = text.split(",")
    if len(parts) != 3:
        raise InputError(f"Euler triple needs three angles, got {text!r}")
    return tuple(_angle(p) for p in parts)


def _names(text: str | None) -> list:
    if not text:
        return []
    return [int(x) if x.lstrip("-").isdigit() else x for x in text.split(",")]


def _load(path: str):
    with open(path) as fh:
        return json.load(fh)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=str)


def _emit(text: str, out: str | None):
    if out:
        with open(out, "w") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")
    else:
        print(text)


def _matrix_json(m: np.ndarray) -> dict:
    m = np.atleast_2d(m)
    return {"shape": list(m.shape), "re": np.round(m.real, 12).tolist(), "im": np.round(m.imag, 12).tolist()}


def _matrix_tsv(m: np.ndarray) -> str:
    m = np.atleast_2d(m)
    return "\n".join("\t".join(f"{z.real:.10g}{z.imag:+.10g}j" for z in row) for row in m)


# ---------------------------------------------------------------------------
# zx


def cmd_zx_eval(args) -> int:
    d = zx.ZxDiagram.from_json(_load(args.diagram))
    assign = {k: int(v) for k, v in (kv.split("=") for kv in args.assign.split(","))} if args.assign else {}
    m = zx.eval_tensor(d, assign)
    _emit(_matrix_tsv(m) if args.format == "tsv" else _dump(_matrix_json(m)), args.out)
    return 0


def cmd_zx_rewrite(args) -> int:
    d = zx.ZxDiagram.from_json(_load(args.diagram))
    rule = zx.REWRITES.get(args.rule)
    if rule is None:
        raise InputError(f"unknown rule {args.rule!r}; choose from {sorted(zx.REWRITES)}")
    site = _names(args.site)
    new = rule(d, site[0] if len(site) == 1 else tuple(site))
    same = zx.proportionality(zx.eval_tensor(new), zx.eval_tensor(d), 1e-9) is not None
    _emit(new.to_dot() if args.format == "dot" else _dump(new.to_json()), args.out)
    print(f"{'PASS' if same else 'FAIL'} zx.rewrite.{args.rule} tensor equality", file=sys.stderr)
    return 0 if same else 1


# ---------------------------------------------------------------------------
# optics and fusion


def cmd_lo_simulate(args) -> int:
    c = optics.LoCircuit.from_json(_load(args.circuit))
    occ = tuple(int(x) for x in args.input.split(","))
    if len(occ) != c.mode_count:
        raise InputError(f"input has {len(occ)} modes, circuit has {c.mode_count}")
    dist = optics.outcome_distribution(c, optics.FockVector(c.mode_count, {occ: 1.0}), args.cutoff)
    names = [d.var for d in c.detectors]
    lines = ["\t".join(map(str, names)) + "\tprobability"]
    lines += ["\t".join(map(str, o)) + f"\t{p:.12g}" for o, p in dist if p > 1e-15]
    _emit("\n".join(lines), args.out)
    return 0


def cmd_fusion_classify(args) -> int:
    if args.spec:
        spec = fusion.FusionSpec.from_json(_load(args.spec))
    else:
        spec = fusion.FusionSpec(_triple(args.u1), _triple(args.u2), _triple(args.u3))
    res = fusion.classify(spec)
    _emit(_dump({"spec": spec.to_json(), "class": res.to_json()}), args.out)
    return 0


# ---------------------------------------------------------------------------
# flow and patterns


def _graph_or_network(args):
    data = _load(args.graph)
    if args.xy_network:
        return flow.FusionNetwork.from_json(data)
    return flow.OpenGraph.from_json(data)


def cmd_flow_find(args) -> int:
    obj = _graph_or_network(args)
    cert = flow.find_xy_flow(obj) if args.xy_network else flow.find_pauli_flow(obj)
    if cert is None:
        kind = "XY-flow" if args.xy_network else "Pauli flow"
        _emit(_dump({"found": False, "condition": f"no {kind}: layer search left measured vertices uncorrectable"}),
              args.out)
        return 1
    if args.format == "dot":
        g = flow.target_open_graph(obj) if args.xy_network else obj
        _emit(g.to_dot(), args.out)
    else:
        _emit(_dump({"found": True, "certificate": cert.to_json()}), args.out)
    return 0


def cmd_flow_verify(args) -> int:
    obj = _graph_or_network(args)
    data = _load(args.cert)
    data = data.get("certificate", data)
    if args.xy_network:
        cert = flow.FlowCertificate.from_json(data, flow.target_open_graph(obj).vertices)
        v = flow.verify_xy_flow(obj, cert)
    else:
        cert = flow.FlowCertificate.from_json(data, obj.vertices)
        v = flow.verify_pauli_flow(obj, cert)
    print(_dump({"ok": v.ok, "condition": v.condition, "vertex": v.vertex, "detail": v.detail}))
    return 0 if v else 1


def _read_pattern(args) -> patterns.Pattern:
    with open(args.pattern) as fh:
        text = fh.read()
    if text.lstrip().startswith("{"):
        return patterns.Pattern.from_json(json.loads(text))
    outs = _names(args.outputs) if args.outputs is not None else None
    return patterns.Pattern.from_text(text.strip(), inputs=_names(args.inputs), outputs=outs)


def cmd_pattern_check(args) -> int:
    p = _read_pattern(args)
    if args.bind:
        p = p.bind({k: _angle(v) for k, v in (kv.split("=") for kv in args.bind.split(","))})
    run = patterns.is_runnable(p)
    print(f"{'PASS' if run else 'FAIL'} pattern.runnable {'' if run else run.reason}".rstrip())
    if not run:
        return 1
    samples = patterns.sample_angles(p, args.samples, seed=args.seed) if p.angle_sites() else None
    det = patterns.check_determinism(p, args.mode, samples)
    print(f"{'PASS' if det else 'FAIL'} pattern.determinism.{args.mode} {'; '.join(det.failures[:3])}".rstrip())
    return 0 if det else 1


def cmd_pattern_from_flow(args) -> int:
    net = flow.FusionNetwork.from_json(_load(args.network))
    cert = flow.find_xy_flow(net)
    if cert is None:
        print(_dump({"found": False, "condition": "network has no XY-flow"}))
        return 1
    p = patterns.pattern_from_flow(net, cert)
    _emit(p.to_text() if args.format == "text" else _dump(p.to_json()), args.out)
    return 0


# ---------------------------------------------------------------------------
# protocols


def cmd_protocol_unroll(args) -> int:
    s = streams.protocol_from_json(_load(args.protocol))
    u = streams.unroll(s, args.steps)
    if args.emit == "dot":
        _emit(u.diagram.to_dot(), args.out)
    else:
        _emit(_dump({"diagram": u.diagram.to_json(), "in_ports": u.in_ports, "out_ports": u.out_ports}), args.out)
    return 0


def cmd_protocol_rus(args) -> int:
    spec = fusion.x_fusion() if args.family == "X" else fusion.y_fusion()
    rows, ok = [], True
    for n in range(args.rounds + 1):
        st = streams.rus_statistics(spec, n)
        expect = 1 - 2.0 ** -(n + 1)
        good = abs(st["p_success"] - expect) <= 1e-10 and st["bits_match"]
        ok &= good
        rows.append({"n": n, "rounds": n + 1, "p_success": st["p_success"], "one_minus_2^-(n+1)": expect,
                     "branches": len(st["traces"]), "bits_match": st["bits_match"], "pass": good})
    if args.format == "json":
        _emit(_dump({"family": args.family, "rows": rows}), args.out)
    else:
        head = "n\trounds\tp_success\t1-2^-(n+1)\tbranches\tbits_match\tverdict"
        body = [f"{r['n']}\t{r['rounds']}\t{r['p_success']:.12f}\t{r['one_minus_2^-(n+1)']:.12f}\t"
                f"{r['branches']}\t{r['bits_match']}\t{'PASS' if r['pass'] else 'FAIL'}" for r in rows]
        _emit("\n".join([head] + body), args.out)
    return 0 if ok else 1


# ---------------------------------------------------------------------------
# compile and verify


def _random_graph(n: int, seed: int) -> flow.OpenGraph:
    rng = random.Random(seed)
    for _ in range(1000):
        g = flow.random_open_graph(rng, n, 0.6, n_in=rng.randint(0, 2), n_out=rng.randint(1, 2))
        if flow.find_pauli_flow(g) is not None:
            return g
    raise InputError(f"no flowed {n}-vertex graph found for seed {seed}")


def _print_checks(rep: compiler.CompilationReport):
    for c in rep.checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.id} {c.detail}".rstrip())


def cmd_compile(args) -> int:
    if (args.graph is None) == (args.random is None):
        raise InputError("give exactly one of --graph or --random")
    g = flow.OpenGraph.from_json(_load(args.graph)) if args.graph else _random_graph(args.random, args.seed)
    t0 = time.perf_counter()
    rep = compiler.compile_graph(g, args.epsilon, args.k)
    t1 = time.perf_counter()
    compiler.verify_compilation(rep, horizon=args.steps)
    t2 = time.perf_counter()
    data = rep.to_json()
    data["epsilon"] = args.epsilon
    if args.timings:
        # opt-in: timings break byte-identical reports
        data["timings"] = {"compile_s": t1 - t0, "verify_s": t2 - t1}
    _emit(_dump(data), args.out)
    if args.out:
        _print_checks(rep)
    return 0 if rep.ok else 1


def cmd_verify(args) -> int:
    data = _load(args.report)
    try:
        g = flow.OpenGraph.from_json(data["graph"])
        sched = data["schedule"]
        eps, k = float(sched["epsilon"]), int(sched["k"])
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed report: {exc}") from exc
    rep = compiler.compile_graph(g, eps, k)
    compiler.verify_compilation(rep, horizon=args.steps)
    fresh = json.loads(_dump(rep.to_json()))
    same = all(fresh[key] == data.get(key) for key in ("pattern", "schedule", "line"))
    rep.checks.insert(0, compiler.Check("report.artifacts", same, "stored stages match a fresh compilation"))
    _print_checks(rep)
    return 0 if rep.ok else 1


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="fusionflow", description="Fusion-based compilation and verification tools.")
    p.add_argument("--seed", type=int, default=0, help="seed for every randomised step")
    sub = p.add_subparsers(dest="group", required=True, parser_class=_Parser)

    def cmd(parent, name, fn, help_):
        c = parent.add_parser(name, help=help_)
        c.set_defaults(fn=fn)
        c.add_argument("--out", help="write the result here instead of stdout")
        return c

    g = sub.add_parser("zx", help="ZX diagrams").add_subparsers(dest="cmd", required=True, parser_class=_Parser)
    c = cmd(g, "eval", cmd_zx_eval, "contract a diagram to a matrix")
    c.add_argument("--diagram", required=True)
    c.add_argument("--assign", help="outcome variables, e.g. a=1,b=0")
    c.add_argument("--format", choices=["json", "tsv"], default="json")
    c = cmd(g, "rewrite", cmd_zx_rewrite, "apply one rewrite and check tensor equality")
    c.add_argument("--diagram", required=True)
    c.add_argument("--rule", required=True)
    c.add_argument("--site", required=True, help="spider id or comma-separated ids")
    c.add_argument("--format", choices=["json", "dot"], default="json")

    g = sub.add_parser("lo", help="linear optics").add_subparsers(dest="cmd", required=True, parser_class=_Parser)
    c = cmd(g, "simulate", cmd_lo_simulate, "outcome distribution as TSV")
    c.add_argument("--circuit", required=True)
    c.add_argument("--input", required=True, help="occupation per mode, e.g. 1,0,1,0")
    c.add_argument("--cutoff", type=int)

    g = sub.add_parser("fusion", help="fusion measurements").add_subparsers(dest="cmd", required=True,
                                                                             parser_class=_Parser)
    c = cmd(g, "classify", cmd_fusion_classify, "classify a fusion given by Euler triples")
    c.add_argument("--spec", help="FusionSpec JSON instead of --u1/--u2/--u3")
    for u in ("--u1", "--u2", "--u3"):
        c.add_argument(u, default="0,0,0")

    g = sub.add_parser("flow", help="flow certificates").add_subparsers(dest="cmd", required=True,
                                                                         parser_class=_Parser)
    c = cmd(g, "find", cmd_flow_find, "find a Pauli flow (or XY-flow)")
    c.add_argument("--graph", required=True)
    c.add_argument("--xy-network", action="store_true", help="read a fusion network and look for XY-flow")
    c.add_argument("--format", choices=["json", "dot"], default="json")
    c = cmd(g, "verify", cmd_flow_verify, "check a certificate")
    c.add_argument("--graph", required=True)
    c.add_argument("--cert", required=True)
    c.add_argument("--xy-network", action="store_true")

    g = sub.add_parser("pattern", help="measurement patterns").add_subparsers(dest="cmd", required=True,
                                                                               parser_class=_Parser)
    c = cmd(g, "check", cmd_pattern_check, "runnability and determinism")
    c.add_argument("--pattern", required=True, help="text or JSON pattern file")
    c.add_argument("--mode", choices=["plain", "strong", "stepwise"], default="strong")
    c.add_argument("--inputs")
    c.add_argument("--outputs")
    c.add_argument("--bind", help="symbolic angles, e.g. a=pi/4")
    c.add_argument("--samples", type=int, default=5)
    c = cmd(g, "from-flow", cmd_pattern_from_flow, "synthesise a pattern from an XY-flow")
    c.add_argument("--network", required=True)
    c.add_argument("--format", choices=["text", "json"], default="text")

    g = sub.add_parser("protocol", help="stream protocols").add_subparsers(dest="cmd", required=True,
                                                                            parser_class=_Parser)
    c = cmd(g, "unroll", cmd_protocol_unroll, "unroll a protocol description")
    c.add_argument("--protocol", required=True)
    c.add_argument("--steps", type=int, required=True)
    c.add_argument("--emit", choices=["dot", "json"], default="json")
    c = cmd(g, "rus", cmd_protocol_rus, "repeat-until-success probability table")
    c.add_argument("--family", choices=["X", "Y"], required=True)
    c.add_argument("--rounds", type=int, required=True)
    c.add_argument("--format", choices=["tsv", "json"], default="tsv")

    c = cmd(sub, "compile", cmd_compile, "compile and verify an open graph")
    c.add_argument("--graph")
    c.add_argument("--random", type=int, metavar="N", help="compile a random flowed N-vertex graph")
    c.add_argument("--epsilon", type=float, default=0.05)
    c.add_argument("--k", type=int)
    c.add_argument("--steps", type=int, help="protocol horizon")
    c.add_argument("--timings", action="store_true")
    c = cmd(sub, "verify", cmd_verify, "recheck a compilation report")
    c.add_argument("--report", required=True)
    c.add_argument("--steps", type=int)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.fn(args)
    except (ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        diag = {"error": type(exc).__name__, "message": str(exc)}
        print(json.dumps(diag, sort_keys=True), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
