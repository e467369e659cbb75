"""Timing of Bloch kernels against dense conjugation.

Both sides get their operators prebuilt, so the timed region is the
application to a state only: the Bloch superop applied to a ``4**n`` real
vector versus ``U rho U^dagger`` on a ``2**n x 2**n`` complex matrix.
"""

from __future__ import annotations

import csv
import statistics
import time
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass

import numpy as np

from . import oracle
from .bloch import bloch_from_density
from .kernels import GateSpec, apply, builtin_superop, gate_unitary

CSV_COLUMNS = ("gate", "n", "impl", "median_ns", "reps")
DEFAULT_GATES = ("X", "Y", "Z", "Rx", "Ry", "Rz")

# Parameter values used when a gate takes an angle.
_BENCH_PARAMS = {"Rx": (0.37,), "Ry": (0.37,), "Rz": (0.37,), "PhaseShift": (0.37,), "Rxx": (0.37,),
                 "Ryy": (0.37,), "Rzz": (0.37,), "Rxyz": (0.1, 0.2, 0.3), "Rxxyyzz": (0.1, 0.2, 0.3)}


@dataclass
class BenchRow:
    gate: str
    n: int
    impl: str
    median_ns: float
    reps: int


def median_time_ns(fn: Callable[[], object], reps: int = 20, warmup: int = 3) -> float:
    """Median wall time of ``fn()`` over ``reps`` calls after ``warmup`` discarded calls."""
    if reps < 1:
        raise ValueError("reps must be positive")
    for _ in range(warmup):
        fn()
    samples = []
    for _ in range(reps):
        t0 = time.perf_counter_ns()
        fn()
        samples.append(time.perf_counter_ns() - t0)
    return float(statistics.median(samples))


def bench_gate(name: str, n: int, reps: int = 20, warmup: int = 3, seed: int = 0,
               targets: Sequence[int] | None = None) -> list[BenchRow]:
    """Time one gate on ``n`` qubits with both implementations."""
    rng = np.random.default_rng(seed)
    arity = 2 if name in ("Rxx", "Ryy", "Rzz", "Rxxyyzz") else 1
    targets = tuple(range(arity)) if targets is None else tuple(targets)
    spec = GateSpec(name, _BENCH_PARAMS.get(name, ()), targets)
    sup = builtin_superop(spec)
    u = gate_unitary(spec)
    rho = oracle.random_density(n, rng, rank=1)
    r = bloch_from_density(rho)
    bloch_ns = median_time_ns(lambda: apply(r, sup, targets), reps, warmup)
    dense_ns = median_time_ns(lambda: oracle.conjugate(rho, u, targets), reps, warmup)
    return [BenchRow(name, n, "bloch", bloch_ns, reps), BenchRow(name, n, "dense", dense_ns, reps)]


def run_suite(gates: Iterable[str] = DEFAULT_GATES, ns: Iterable[int] = range(4, 11), reps: int = 20,
              warmup: int = 3, seed: int = 0) -> list[BenchRow]:
    rows = []
    for n in ns:
        for g in gates:
            rows.extend(bench_gate(g, n, reps, warmup, seed))
    return rows


def write_csv(rows: Iterable[BenchRow], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for row in rows:
            w.writerow([row.gate, row.n, row.impl, f"{row.median_ns:.0f}", row.reps])


def speed_violations(rows: Iterable[BenchRow]) -> list[tuple[str, int, float, float]]:
    """``(gate, n, bloch_ns, dense_ns)`` wherever the Bloch kernel is slower."""
    table: dict[tuple[str, int], dict[str, float]] = {}
    for row in rows:
        table.setdefault((row.gate, row.n), {})[row.impl] = row.median_ns
    return [(g, n, t["bloch"], t["dense"]) for (g, n), t in sorted(table.items())
            if "bloch" in t and "dense" in t and t["bloch"] > t["dense"]]
