"""``causal-mera`` command line entry point.

Exit status: 0 on success, 1 on usage or data errors, 2 when a check runs and
returns a negative verdict (a JSON report goes to standard output).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import causet as cz
from . import cmera
from . import io
from .channel import CausalRelation, is_causal, isometry_channel
from .localize import (
    LocalizationError,
    UnsupportedSpec,
    counterexample_isometry,
    counterexample_relation,
    decompose_step,
    is_purely_causal,
    step_spec,
)
from .mera import (
    MeraSpec,
    assemble_step,
    causal_cone_expectation,
    expectation_bruteforce,
    random_network,
    random_step_gates,
    relation_for,
)
from .tensor_core import IsometryMap, random_unitary

EXIT_OK, EXIT_ERROR, EXIT_NEGATIVE = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _manifest(args, outputs, inputs=()) -> None:
    params = {
        k: v for k, v in sorted(vars(args).items()) if k not in ("func", "command") and not callable(v)
    }
    for out in outputs:
        record = {
            "subcommand": args.command,
            "params": params,
            "inputs": {str(p): io.sha256(p) for p in inputs},
            "outputs": {str(p): io.sha256(p) for p in outputs},
            "version": __version__,
            "seed": getattr(args, "seed", None),
        }
        io.dump_json(record, f"{out}.manifest.json")


def _emit(obj, args) -> None:
    print(json.dumps(obj, sort_keys=True))
    if getattr(args, "out", None):
        io.dump_json(obj, args.out)
        _manifest(args, [args.out], _inputs(args))


def _inputs(args) -> list:
    return [getattr(args, k) for k in ("input", "relation", "net", "obs") if getattr(args, k, None)]


def _parse_chart(text: str) -> cz.DeSitterChart:
    values = {"alpha": 1.0, "a": 2.0, "r": 1.5}
    for item in filter(None, text.split(",")):
        key, _, val = item.partition("=")
        if key not in values:
            raise UsageError(f"unknown chart parameter {key!r}")
        values[key] = float(val)
    return cz.DeSitterChart(values["alpha"], values["a"], values["r"])


def _load_map(path) -> IsometryMap:
    data = io.load_json(path)
    if "kraus" in data:
        ch = io.channel_from_json(data)
        if len(ch.kraus) != 1:
            raise io.FormatError(f"{path}: field 'kraus' must hold a single isometry")
        return IsometryMap(ch.kraus[0], ch.in_layout, ch.out_layout)
    return io.isometry_from_json(data)


def _step_spec(args) -> MeraSpec:
    return step_spec(args.spec, args.n, args.chi)


# --- subcommands ---------------------------------------------------------------


def cmd_gen_causet(args):
    cs = cz.generate_mera_causet(args.kind, args.fine, args.layers)
    io.dump_json(cs.to_json(), args.out)
    _manifest(args, [args.out])
    return EXIT_OK


def cmd_embed(args):
    cs = cz.CausalSet.from_json(io.load_json(args.input))
    chart = _parse_chart(args.chart)
    rows = []
    for e in cz.embed_all(chart, cs):
        point = {"conformal": (e.t, e.x), "static": (e.tau, e.zeta), "flrw": (e.tau, e.xi)}[args.frame]
        rows.append(e.row() + [cz.metric_components(chart, args.frame, point).volume_density])
    io.write_csv(args.out, ["layer", "site", "t", "x", "tau", "zeta", "xi", "volume_density"], rows)
    _manifest(args, [args.out], [args.input])
    return EXIT_OK


def cmd_past(args):
    cs = cz.CausalSet.from_json(io.load_json(args.input))
    targets = [(0, int(s)) for s in args.targets.split(",") if s]
    past = cz.causal_past(cs, targets)
    io.write_csv(args.out, ["layer", "site"], [(k, s) for k in sorted(past) for s in past[k]])
    _manifest(args, [args.out], [args.input])
    return EXIT_OK


def cmd_check_causal(args):
    w = _load_map(args.input)
    if args.relation:
        r = io.relation_from_json(io.load_json(args.relation))
    else:
        r = relation_for(_step_spec(args))
        w = IsometryMap(w.matrix, r.inputs, r.outputs)
    report = is_causal(isometry_channel(w), r, args.tol)
    _emit(report.to_json(), args)
    return EXIT_OK if report.causal else EXIT_NEGATIVE


def cmd_decompose(args):
    w = _load_map(args.input)
    if args.spec == "two-block":
        if args.relation:
            r = io.relation_from_json(io.load_json(args.relation))
        else:
            ins, outs = w.in_layout, w.out_layout
            if len(ins) != 2 or len(outs) != 2:
                raise UsageError("two-block decomposition needs two inputs and two outputs")
            r = CausalRelation(ins, outs, {(ins[0][0], outs[0][0]), (ins[1][0], outs[1][0])})
        verdict = is_purely_causal(w, r, args.tol)
        if not verdict.purely_causal:
            print(json.dumps(verdict.to_json(), sort_keys=True))
            return EXIT_NEGATIVE
        doc = verdict.to_json()
    else:
        spec = _step_spec(args)
        try:
            dec = decompose_step(w, spec, args.tol)
        except LocalizationError as err:
            if isinstance(err, UnsupportedSpec):
                raise
            print(json.dumps({"verdict": err.verdict, "residual": err.residual, "reason": str(err)}, sort_keys=True))
            return EXIT_NEGATIVE
        doc = {
            "verdict": "PurelyCausal",
            "spec": io.spec_to_json(dec.spec),
            "residual": dec.residual,
            "bond_dims": dec.bond_dims,
            "gates": [{"name": name, "tensor": io.tensor_to_json(t)} for name, t in dec.tensors().items()],
        }
    if args.out:
        io.dump_json(doc, args.out)
        _manifest(args, [args.out], [args.input])
    print(json.dumps({k: doc[k] for k in doc if k != "gates"}, sort_keys=True))
    return EXIT_OK


def cmd_expect(args):
    net = io.network_from_json(io.load_json(args.net))
    obs = io.matrix_from_json(io.load_json(args.obs), "observable")
    f = causal_cone_expectation if args.method == "cone" else expectation_bruteforce
    value = f(net, obs, args.site)
    _emit({"method": args.method, "site": args.site, "re": value.real, "im": value.imag}, args)
    return EXIT_OK


def cmd_cmera_evolve(args):
    h = cmera.build_hamiltonian(args.n, args.dz, args.alpha, args.m)
    state = cmera.ground_state(h)
    m = {"total": h.total, "k": h.mk, "l": h.ml}[args.generator]
    reports = [r for r in args.report.split(",") if r]
    for r in reports:
        if r not in ("canonical", "energy", "uncertainty"):
            raise UsageError(f"unknown report {r!r}")
    s = cmera.propagator(m, args.dtau)
    canonical = cmera.check_canonical(s)
    rows = []

    def record(step, cov):
        st = cmera.GaussianFieldState(h.n, h.dz, cov)
        row = [step, step * args.dtau]
        for r in reports:
            if r == "canonical":
                row.append(canonical)
            elif r == "energy":
                row.append(st.energy(h, args.generator if args.generator != "total" else "total"))
            else:
                row.append(st.uncertainty_violation())
        rows.append(row)

    record(0, state.cov)
    final = cmera.evolve_covariance(state, m, args.dtau, args.steps, record)
    io.write_csv(args.out, [f"c{j}" for j in range(2 * h.n)], final.cov.tolist())
    outputs = [args.out]
    if reports:
        metrics = str(Path(args.out).with_suffix("")) + ".metrics.csv"
        io.write_csv(metrics, ["step", "tau"] + reports, rows)
        outputs.append(metrics)
    _manifest(args, outputs)
    return EXIT_OK


def cmd_metric(args):
    chart = _parse_chart(args.chart)
    point = [float(v) for v in args.point.split(",")]
    if len(point) != 2:
        raise UsageError("--point needs two comma-separated coordinates")
    g = cz.metric_components(chart, args.frame, point)
    _emit({"frame": args.frame, "point": point, "g": g.g.tolist(), "volume_density": g.volume_density}, args)
    return EXIT_OK


def cmd_worldline(args):
    chart = _parse_chart(args.chart)
    if args.u not in (1, -1):
        raise UsageError("--u must be 1 or -1")
    taus = np.linspace(args.tau_min, 0.0, args.samples)
    zetas = cz.lightlike_worldline(chart, args.zeta0, args.u, taus)
    io.write_csv(args.out, ["tau", "zeta"], [(float(t), float(z)) for t, z in zip(taus, zetas)])
    _manifest(args, [args.out])
    return EXIT_OK


def cmd_make_step(args):
    if args.spec == "two-block":
        rng = np.random.default_rng(args.seed)
        w = counterexample_isometry(random_unitary(4, rng), random_unitary(4, rng))
        r = counterexample_relation()
    else:
        spec = _step_spec(args)
        w = assemble_step(spec, *random_step_gates(spec, args.seed))
        r = relation_for(spec)
    io.dump_json(io.isometry_to_json(w), args.out)
    outputs = [args.out]
    if args.relation_out:
        io.dump_json(io.relation_to_json(r), args.relation_out)
        outputs.append(args.relation_out)
    _manifest(args, outputs)
    return EXIT_OK


def cmd_make_net(args):
    spec = MeraSpec(args.spec, args.n, args.chi, args.layers)
    io.dump_json(io.network_to_json(random_network(spec, args.seed)), args.out)
    _manifest(args, [args.out])
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="causal-mera", description="Causal structure tools for MERA networks.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def add(name, func, help_):
        sp = sub.add_parser(name, help=help_)
        sp.set_defaults(func=func)
        return sp

    def step_opts(sp, kinds=("binary", "ternary")):
        sp.add_argument("--spec", choices=kinds, default="binary")
        sp.add_argument("--n", type=int, default=2, help="coarse sites")
        sp.add_argument("--chi", type=int, default=2)

    sp = add("gen-causet", cmd_gen_causet, "generate a MERA causal set")
    sp.add_argument("--kind", choices=("binary", "ternary"), default="binary")
    sp.add_argument("--fine", type=int, required=True)
    sp.add_argument("--layers", type=int, required=True)
    sp.add_argument("--out", required=True)

    sp = add("embed", cmd_embed, "embed causal set events in de Sitter charts")
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--chart", default="a=2,r=1.5,alpha=1")
    sp.add_argument("--frame", choices=("conformal", "static", "flrw"), default="static")
    sp.add_argument("--out", required=True)

    sp = add("past", cmd_past, "causal past of boundary sites")
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--targets", required=True, help="comma-separated layer-0 sites")
    sp.add_argument("--out", required=True)

    sp = add("check-causal", cmd_check_causal, "verify an isometry against a causal relation")
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--relation", help="relation JSON; defaults to the step relation of --spec")
    step_opts(sp)
    sp.add_argument("--tol", type=float, default=1e-10)
    sp.add_argument("--out")

    sp = add("decompose", cmd_decompose, "decompose a step into local gates")
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--relation")
    step_opts(sp, ("binary", "ternary", "two-block"))
    sp.add_argument("--tol", type=float, default=1e-8)
    sp.add_argument("--out")

    sp = add("expect", cmd_expect, "expectation value of a local observable")
    sp.add_argument("--net", required=True)
    sp.add_argument("--obs", required=True)
    sp.add_argument("--site", type=int, required=True)
    sp.add_argument("--method", choices=("cone", "brute"), default="cone")
    sp.add_argument("--out")

    sp = add("cmera-evolve", cmd_cmera_evolve, "evolve the ground covariance of K")
    sp.add_argument("--n", type=int, default=64)
    sp.add_argument("--dz", type=float, default=0.1)
    sp.add_argument("--alpha", type=float, default=1.0)
    sp.add_argument("--m", type=float, default=0.5)
    sp.add_argument("--dtau", type=float, default=0.01)
    sp.add_argument("--steps", type=int, default=100)
    sp.add_argument("--generator", choices=("total", "k", "l"), default="total")
    sp.add_argument("--report", default="")
    sp.add_argument("--out", required=True)

    sp = add("metric", cmd_metric, "metric components at a point")
    sp.add_argument("--chart", default="a=2,r=1.5,alpha=1")
    sp.add_argument("--frame", choices=("conformal", "static", "flrw"), default="static")
    sp.add_argument("--point", required=True)
    sp.add_argument("--out")

    sp = add("worldline", cmd_worldline, "sample a null worldline in static coordinates")
    sp.add_argument("--chart", default="a=2,r=1.5,alpha=1")
    sp.add_argument("--zeta0", type=float, default=0.0)
    sp.add_argument("--u", type=int, default=1)
    sp.add_argument("--tau-min", type=float, default=-5.0)
    sp.add_argument("--samples", type=int, default=101)
    sp.add_argument("--out", required=True)

    sp = add("make-step", cmd_make_step, "write a random step isometry (or the two-block counterexample)")
    step_opts(sp, ("binary", "ternary", "two-block"))
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--relation-out")
    sp.add_argument("--out", required=True)

    sp = add("make-net", cmd_make_net, "write a random MERA network")
    step_opts(sp)
    sp.add_argument("--layers", type=int, default=1)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_usage(sys.stderr)
            return EXIT_ERROR
        return args.func(args)
    except UsageError as err:
        print(f"causal-mera: {err}", file=sys.stderr)
        return EXIT_ERROR
    except (ValueError, KeyError, OSError, LocalizationError) as err:
        print(f"causal-mera: error: {err}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
