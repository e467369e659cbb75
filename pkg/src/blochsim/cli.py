"""Command-line front end: ``blochsim {run,grad,lindblad,vqt,bench}``."""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

from . import bench, io, lindblad, vqt
from .bloch import PauliObservable, expectation, purity
from .circuit import (
    backward,
    cost_expectation_cotangent,
    expectation_cost,
    finite_difference_gradients,
    forward,
)

FD_STEP = 1e-5
FD_TOLERANCE = 1e-6


def _threads(args) -> int:
    if args.threads is not None:
        return args.threads
    return int(os.environ.get("BLOCHSIM_THREADS", "1"))


def _out_dir(args) -> Path:
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2) + "\n", encoding="utf-8")


def _csv_writer(fh):
    return csv.writer(fh, lineterminator="\n")


def cmd_run(args) -> int:
    data = io.load_json(args.input)
    circuit = io.parse_circuit(data)
    r0 = io.parse_state(data.get("initial_state"), circuit.n_qubits)
    observables = io.parse_observables(data.get("observables"), circuit.n_qubits)
    r = forward(circuit, r0)
    out = _out_dir(args)
    _write_json(out / "state.json", {"n_qubits": circuit.n_qubits, "bloch": r.tolist(), "purity": purity(r)})
    with open(out / "expectations.csv", "w", newline="", encoding="utf-8") as fh:
        w = _csv_writer(fh)
        w.writerow(["observable", "value"])
        for name, obs in observables.items():
            w.writerow([name, repr(expectation(r, obs) + 0.0)])  # + 0.0 drops signed zeros
    return 0


def cmd_grad(args) -> int:
    data = io.load_json(args.input)
    circuit = io.parse_circuit(data)
    r0 = io.parse_state(data.get("initial_state"), circuit.n_qubits)
    obs = io.parse_observable(io._req(data, "observable", ""), circuit.n_qubits)
    r_out, cache = forward(circuit, r0, return_cache=True)
    report = backward(circuit, r_out, cost_expectation_cotangent(obs, circuit.n_qubits), cache)
    result = {"cost": expectation(r_out, obs), "gradients": report.params}
    status = 0
    if args.check_fd:
        fd = finite_difference_gradients(expectation_cost(circuit, r0, obs), circuit.parameters, FD_STEP)
        rel = {k: abs(report.params.get(k, 0.0) - v) / max(abs(report.params.get(k, 0.0)), 1e-8) for k, v in fd.items()}
        worst = max(rel.values(), default=0.0)
        tol = FD_TOLERANCE if args.tolerance is None else args.tolerance
        result["finite_difference"] = {"step": FD_STEP, "gradients": fd, "max_rel_error": worst, "tolerance": tol}
        if worst > tol:
            print(f"finite-difference check failed: max relative error {worst:.3e} > {tol:.1e}", file=sys.stderr)
            status = 1
    _write_json(_out_dir(args) / "gradients.json", result)
    return status


def cmd_lindblad(args) -> int:
    prob = io.parse_lindblad(io.load_json(args.input))
    method = args.method or prob["method"]
    dt = args.dt or prob["dt"] or lindblad.DEFAULT_DT
    gen = lindblad.build_generator(prob["hamiltonian"], prob["jumps"], prob["n_qubits"], params=prob["params"])
    r0 = prob["initial_state"]
    if method == "rk4":
        res = lindblad.evolve(r0, gen, prob["t_final"], "rk4", dt)
    else:
        res = lindblad.evolve(r0, gen, prob["t_final"], "expm", times=lindblad.time_grid(prob["t_final"], dt))
    every = max(1, prob["output_every"])
    idx = list(range(0, len(res.times), every))
    if idx[-1] != len(res.times) - 1:
        idx.append(len(res.times) - 1)
    obs = prob["observables"]
    dim = 4 ** prob["n_qubits"]
    with open(_out_dir(args) / "trajectory.csv", "w", newline="", encoding="utf-8") as fh:
        w = _csv_writer(fh)
        header = ["time"] + list(obs)
        if prob["full_states"]:
            header += [f"r{j}" for j in range(dim)]
        w.writerow(header)
        for i in idx:
            r = res.states[i]
            row = [repr(float(res.times[i]))] + [repr(expectation(r, o)) for o in obs.values()]
            if prob["full_states"]:
                row += [repr(float(v)) for v in r]
            w.writerow(row)
    return 0


def _vqt_hamiltonian(cfg) -> PauliObservable:
    if cfg["model"] == "heisenberg_1d":
        c = cfg["couplings"]
        return vqt.heisenberg_1d(cfg["lattice"]["n"], c["J"], c["g"], c["h"])
    c = cfg["couplings"]
    return vqt.heisenberg_2d(cfg["lattice"]["rows"], cfg["lattice"]["cols"], c["J_h"], c["J_v"])


def cmd_vqt(args) -> int:
    cfg = io.parse_vqt(io.load_json(args.input))
    H = _vqt_hamiltonian(cfg)
    base = args.seed or 0
    seeds = cfg["seeds"].get("list") or [base + i for i in range(cfg["seeds"]["count"])]
    results = vqt.sweep(H, cfg["betas"], seeds, cfg["layers"], cfg["lr"], cfg["iters"], workers=_threads(args))
    out = _out_dir(args)
    _write_json(out / "config.json", {**cfg, "seeds": seeds, "n_terms": len(H)})
    with open(out / "metrics.csv", "w", newline="", encoding="utf-8") as fh:
        w = _csv_writer(fh)
        w.writerow(["beta", "seed", "final_loss", "fidelity", "trace_distance"])
        for m in results:
            w.writerow([m.beta, m.seed, repr(m.final_loss), repr(m.fidelity), repr(m.trace_distance)])
    with open(out / "traces.csv", "w", newline="", encoding="utf-8") as fh:
        w = _csv_writer(fh)
        w.writerow(["beta", "seed", "iteration", "loss"])
        for m in results:
            for i, loss in enumerate(m.losses):
                w.writerow([m.beta, m.seed, i, repr(float(loss))])
    return 0


def cmd_bench(args) -> int:
    suite = io.load_json(args.input) if args.input else {}
    gates = suite.get("gates", list(bench.DEFAULT_GATES))
    ns = suite.get("n", list(range(4, 11)))
    reps = args.reps or int(suite.get("reps", 20))
    warmup = int(suite.get("warmup", 3))
    rows = bench.run_suite(gates, ns, reps, warmup, seed=args.seed or 0)
    out = _out_dir(args)
    bench.write_csv(rows, out / "bench.csv")
    slow = bench.speed_violations(rows)
    for g, n, b, d in slow:
        print(f"warning: {g} at n={n}: bloch {b:.0f} ns > dense {d:.0f} ns", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="blochsim", description="Bloch-vector quantum simulation tools.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, input_required=True):
        p.add_argument("--input", "-i", required=input_required, help="input JSON file")
        p.add_argument("--output", "-o", default=".", help="output directory (created if missing)")
        p.add_argument("--seed", type=int, default=None, help="base random seed")
        p.add_argument("--threads", type=int, default=None, help="worker processes (default: $BLOCHSIM_THREADS or 1)")
        p.add_argument("--tolerance", type=float, default=None, help="tolerance for built-in checks")
        return p

    p = common(sub.add_parser("run", help="apply a circuit and report expectations"))
    p.set_defaults(func=cmd_run)
    p = common(sub.add_parser("grad", help="gradients of an observable with respect to circuit parameters"))
    p.add_argument("--check-fd", action="store_true", help="compare with central finite differences")
    p.set_defaults(func=cmd_grad)
    p = common(sub.add_parser("lindblad", help="integrate a Lindblad problem"))
    p.add_argument("--method", choices=("expm", "rk4"), default=None)
    p.add_argument("--dt", type=float, default=None, help="time step (output grid for expm)")
    p.set_defaults(func=cmd_lindblad)
    p = common(sub.add_parser("vqt", help="variational thermalizer sweep over beta and seeds"))
    p.set_defaults(func=cmd_vqt)
    p = common(sub.add_parser("bench", help="time Bloch kernels against dense conjugation"), input_required=False)
    p.add_argument("--reps", type=int, default=None)
    p.set_defaults(func=cmd_bench)
    return parser


def _anchor(args, exc: io.SchemaError) -> str:
    """``file:line:col: `` prefix for schema errors that name a JSON path."""
    src = getattr(args, "input", None)
    if not src or not exc.path or exc.path.startswith(str(src)):
        return ""
    try:
        where = io.locate_path(Path(src).read_text(encoding="utf-8"), exc.path)
    except OSError:
        return ""
    return f"{src}:{where[0]}:{where[1]}: " if where else ""


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "dt", None) is not None and args.dt <= 0:
        print("error: --dt must be positive", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except io.SchemaError as exc:
        print(f"error: {_anchor(args, exc)}{exc}", file=sys.stderr)
        return 1
    except (ValueError, KeyError, OSError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
