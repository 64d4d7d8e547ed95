"""Command-line front end.

Verbs: ``analyze`` (Lie-frame decision report), ``synthesize`` (robust
two-stage pulse design), ``bound`` (performance-limit curves), ``simulate``
(circuit demos).  Structured results go to stdout as a single JSON document
(CSV for curves and schedules); every command is deterministic given the
same spec, flags, and seed.

Exit codes: 0 success, 1 usage or parse error, 2 numerical non-convergence,
3 optimizer infeasibility.
"""

from __future__ import annotations

import argparse
import csv
import datetime
import io
import json
import os
import sys

import numpy as np

from . import __version__, quantum, robust
from .lie import analyze_system
from .linalg import ConvergenceError, matexp
from .specfile import SpecError, load_spec

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERICAL = 2
EXIT_INFEASIBLE = 3


class _Parser(argparse.ArgumentParser):
    """argparse exits with code 2 on usage errors; the interface promises 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _fmt(value):
    """Round floats to 12 significant digits, recursively."""
    if isinstance(value, bool):
        return value
    if isinstance(value, (float, np.floating)):
        return float(f"{float(value):.12g}")
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, dict):
        return {k: _fmt(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_fmt(v) for v in value]
    return value


def _emit(doc: dict, no_timestamp: bool) -> None:
    if not no_timestamp:
        doc["timestamp"] = datetime.datetime.now(datetime.timezone.utc).isoformat()
    json.dump(_fmt(doc), sys.stdout, indent=2)
    sys.stdout.write("\n")


def _cmd_analyze(args) -> int:
    spec = load_spec(args.spec)
    sys_ = spec.system()
    report = analyze_system(
        sys_, spec.observable_matrices(), tol=args.tol,
        seed=args.seed, maxiter=args.max_solver_iters,
    )
    doc = {
        "command": "analyze",
        "spec": args.spec,
        "n_qubits": spec.n_qubits,
        "closure_dim": report.closure_dim,
        "full_dim": report.full_dim,
        "controllable": report.controllable,
        "symmetry_dim": report.symmetry_dim,
        "observables": {
            v.name: {
                "obs_space_dim": v.obs_space_dim,
                "observable": v.observable,
                "commutant_dim": v.commutant_dim,
                "tomografiable": v.tomografiable,
                "notes": v.notes,
            }
            for v in report.observables
        },
        "notes": report.notes,
    }
    _emit(doc, args.no_timestamp)
    return EXIT_OK


def _cmd_synthesize(args) -> int:
    spec = load_spec(args.spec)
    if spec.target is None or spec.schedule is None or spec.uncertainty is None:
        raise SpecError("synthesize needs target, schedule and uncertainty sections")
    sys_ = spec.system()
    cfg = robust.TwoStageConfig(
        f0=args.f0,
        horizon=spec.schedule.horizon,
        segments=spec.schedule.segments,
        seed=args.seed,
        max_iters_stage1=args.max_iters,
        max_iters_stage2=args.max_iters_stage2,
    )
    schedule, report = robust.optimize_two_stage(
        sys_, spec.target_matrix(), spec.uncertainty_model(), cfg
    )

    os.makedirs(args.out, exist_ok=True)
    sched_path = os.path.join(args.out, "schedule.csv")
    with open(sched_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["segment", "channel", "amplitude"])
        for k in range(schedule.segments):
            for ch in range(schedule.channels):
                writer.writerow([k, ch, f"{schedule.amplitudes[ch, k]:.12g}"])

    doc = {
        "command": "synthesize",
        "spec": args.spec,
        "f0": cfg.f0,
        "seed": cfg.seed,
        "horizon": cfg.horizon,
        "segments": cfg.segments,
        "feasible": report.feasible,
        "F_nom": report.f_nom,
        "J_rbst": report.j_rbst,
        "F_lb": report.f_lb,
        "bound_feasible": report.bound_feasible,
        "sampled_worst_fidelity": report.sampled_worst_fidelity,
        "stage1_trace": list(report.stage1_trace),
        "stage2_trace": list(report.stage2_trace),
        "notes": report.notes,
    }
    if not args.no_timestamp:
        doc["timestamp"] = datetime.datetime.now(datetime.timezone.utc).isoformat()
    with open(os.path.join(args.out, "report.json"), "w") as fh:
        json.dump(_fmt(doc), fh, indent=2)
        fh.write("\n")

    if args.plot:
        from .plotting import save_schedule_figure

        save_schedule_figure(schedule, report, os.path.join(args.out, "schedule.png"))

    print(
        f"F_nom={report.f_nom:.12g} J_rbst={report.j_rbst:.12g} "
        f"F_lb={report.f_lb:.12g}"
    )
    return EXIT_OK if report.feasible else EXIT_INFEASIBLE


def _parse_range(text: str) -> np.ndarray:
    parts = text.split(":")
    if len(parts) != 3:
        raise SpecError(f"malformed range {text!r}, expected start:step:end")
    try:
        start, step, end = (float(p) for p in parts)
    except ValueError:
        raise SpecError(f"malformed range {text!r}: non-numeric component")
    if step <= 0 or end < start:
        raise SpecError(f"malformed range {text!r}: need step > 0 and end >= start")
    n = int(np.floor((end - start) / step + 1e-9)) + 1
    return start + step * np.arange(n)


def _cmd_bound(args) -> int:
    deltas = _parse_range(args.delta_range)
    try:
        js = [float(x) for x in args.jrbst.split(",") if x.strip()]
    except ValueError:
        raise SpecError(f"malformed J list {args.jrbst!r}")
    if not js:
        raise SpecError("empty J list")
    rows = []
    for j in js:
        for delta in deltas:
            f_lb, feasible = robust.robust_bound(args.T, float(delta), j)
            rows.append(
                {
                    "T_delta": args.T * float(delta),
                    "J_rbst": j,
                    "F_lb": f_lb,
                    "feasible": feasible,
                }
            )
    out = io.StringIO()
    writer = csv.writer(out)
    writer.writerow(["T_delta", "J_rbst", "F_lb", "feasible", "log10_fidelity_error"])
    for r in rows:
        if r["F_lb"] >= 1.0:
            err = ""  # zero fidelity error: log10 is -inf, reported empty
        else:
            err = f"{np.log10(1.0 - r['F_lb']):.12g}"
        writer.writerow(
            [
                f"{r['T_delta']:.12g}",
                f"{r['J_rbst']:.12g}",
                f"{r['F_lb']:.12g}",
                "true" if r["feasible"] else "false",
                err,
            ]
        )
    sys.stdout.write(out.getvalue())
    if args.plot:
        from .plotting import save_bound_curves

        save_bound_curves(rows, args.plot)
    return EXIT_OK


def _cmd_simulate(args) -> int:
    spec = None if args.spec == "-" else load_spec(args.spec)
    doc = {"command": "simulate", "circuit": args.circuit, "seed": args.seed}

    if args.circuit == "bell":
        state = quantum.StateVector.from_bits("00")
        state = quantum.apply_gate(np.kron(quantum.HADAMARD, quantum.I2), state)
        state = quantum.apply_gate(quantum.CNOT, state)
        obs = quantum.computational_observable(2)
        hist = quantum.outcome_histogram(state, obs, args.shots, args.seed)
        doc["shots"] = args.shots
        doc["counts"] = {format(int(k), "02b"): v for k, v in hist.items()}
        doc["amplitudes"] = [[z.real, z.imag] for z in state.amplitudes]

    elif args.circuit == "qft":
        n = spec.n_qubits if spec else 3
        u = quantum.build_qft(n)
        state = quantum.apply_gate(u, quantum.StateVector.from_bits("0" * n))
        doc["n_qubits"] = n
        doc["amplitudes"] = [[z.real, z.imag] for z in state.amplitudes]

    elif args.circuit == "trotter":
        if spec:
            from .lie import parse_pauli

            expr = parse_pauli(spec.drift, spec.n_qubits)
            terms = [t.matrix() for t in expr.terms]
            n = spec.n_qubits
        else:
            terms = [quantum.PAULI_X, quantum.PAULI_Z]
            n = 1
        state0 = quantum.StateVector.from_bits("0" * n)
        approx = quantum.trotter_evolve(terms, args.t, args.steps, state0)
        exact_u = matexp(-1j * sum(terms) * args.t)
        exact = exact_u @ state0.amplitudes
        doc["t"] = args.t
        doc["steps"] = args.steps
        doc["amplitudes"] = [[z.real, z.imag] for z in approx.amplitudes]
        doc["error_vs_exact"] = float(np.linalg.norm(approx.amplitudes - exact))

    elif args.circuit == "vqa":
        circuit = quantum.ParamCircuit(
            generators=(quantum.PAULI_Y,),
            initial_state=quantum.StateVector.from_bits("0"),
            observable=quantum.Observable.from_matrix(quantum.PAULI_Z),
        )
        result = quantum.vqa_optimize(circuit, [0.3], step=0.1, iters=args.iters)
        doc["theta_star"] = list(result.theta)
        doc["f_star"] = result.trace[-1]
        doc["trace"] = result.trace
        doc["step_too_large"] = result.step_too_large

    else:  # argparse choices should prevent this
        raise SpecError(f"unknown circuit {args.circuit!r}")

    _emit(doc, args.no_timestamp)
    return EXIT_OK


def _build_parser() -> _Parser:
    parser = _Parser(prog="qsf", description=__doc__)
    parser.add_argument("--version", action="version", version=f"qsf {__version__}")
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("analyze", help="controllability/observability report")
    p.add_argument("spec")
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-solver-iters", type=int, default=20000)
    p.add_argument("--no-timestamp", action="store_true")
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("synthesize", help="robust two-stage pulse synthesis")
    p.add_argument("spec")
    p.add_argument("--f0", type=float, default=0.999)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="out")
    p.add_argument("--max-iters", type=int, default=2000)
    p.add_argument("--max-iters-stage2", type=int, default=400)
    p.add_argument("--plot", action="store_true")
    p.add_argument("--no-timestamp", action="store_true")
    p.set_defaults(func=_cmd_synthesize)

    p = sub.add_parser("bound", help="robust performance limit curves (CSV)")
    p.add_argument("--T", type=float, required=True)
    p.add_argument("--delta-range", required=True, help="start:step:end")
    p.add_argument("--jrbst", required=True, help="comma-separated J values")
    p.add_argument("--plot", metavar="FILE", help="also render the curves to FILE")
    p.set_defaults(func=_cmd_bound)

    p = sub.add_parser("simulate", help="circuit demos")
    p.add_argument("spec", help="spec file or '-' for built-in defaults")
    p.add_argument(
        "--circuit", required=True, choices=["bell", "qft", "trotter", "vqa"]
    )
    p.add_argument("--shots", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--steps", type=int, default=8)
    p.add_argument("--iters", type=int, default=200)
    p.add_argument("--no-timestamp", action="store_true")
    p.set_defaults(func=_cmd_simulate)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    limits = None
    threads = os.environ.get("QSF_THREADS")
    if threads:
        try:
            import threadpoolctl

            limits = threadpoolctl.threadpool_limits(int(threads))
        except (ImportError, ValueError):
            limits = None

    try:
        return args.func(args)
    except (SpecError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConvergenceError as exc:
        payload = {"error": str(exc), "residuals": exc.residuals}
        print(json.dumps(payload), file=sys.stderr)
        return EXIT_NUMERICAL
    finally:
        if limits is not None:
            limits.unregister()


if __name__ == "__main__":
    sys.exit(main())
