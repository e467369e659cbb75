"""JSON problem descriptions and their conversion to library objects.

Schema errors raise :class:`SchemaError` naming the offending JSON path
(``stages[3].targets``); :func:`locate_path` maps such a path back to a line
and column of the source text, and malformed JSON reports its position
directly.
"""

from __future__ import annotations

import json
import re
from collections.abc import Mapping
from pathlib import Path

import numpy as np

from .bloch import (
    PauliObservable,
    basis_state,
    bloch_from_density,
    maximally_mixed,
    num_qubits,
    product_state,
    single_qubit_state,
    zero_state,
)
from .channels import PARAM_NAMES, KrausChannel
from .circuit import Circuit, Param
from .kernels import GATES

GATE_ALIASES = {
    # name: (number of controls, target gate)
    "CNOT": (1, "X"),
    "CX": (1, "X"),
    "CZ": (1, "Z"),
    "CCX": (2, "X"),
    "TOFFOLI": (2, "X"),
}


class SchemaError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path or '<root>'}: {message}")
        self.path = path


def load_json(path: str | Path) -> dict:
    """Read a JSON file, reporting syntax errors with line and column."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}:{exc.lineno}:{exc.colno}", exc.msg) from None
    if not isinstance(data, dict):
        raise SchemaError("", "top-level JSON value must be an object")
    return data


_DECODER = json.JSONDecoder()
_WS = re.compile(r"\s*")
_PATH_TOKEN = re.compile(r"([^.\[\]]+)|\[(\d+)\]")


def _path_tokens(path: str) -> list:
    return [int(idx) if idx else key for key, idx in _PATH_TOKEN.findall(path)]


def locate_path(text: str, path: str) -> tuple[int, int] | None:
    """1-based ``(line, column)`` of the value at ``path`` in JSON ``text``.

    Falls back to the deepest enclosing value that exists; ``None`` if the
    text is not valid JSON.
    """
    try:
        pos = _WS.match(text, 0).end()
        for token in _path_tokens(path):
            found = _child_offset(text, pos, token)
            if found is None:
                break
            pos = found
    except (ValueError, IndexError):
        return None
    line = text.count("\n", 0, pos) + 1
    return line, pos - (text.rfind("\n", 0, pos) + 1) + 1


def _child_offset(text: str, pos: int, token) -> int | None:
    opener = text[pos]
    if opener == "{" and isinstance(token, str):
        pos = _WS.match(text, pos + 1).end()
        while text[pos] != "}":
            key, pos = json.decoder.scanstring(text, pos + 1)
            pos = _WS.match(text, pos).end() + 1  # skip ':'
            pos = _WS.match(text, pos).end()
            if key == token:
                return pos
            pos = _WS.match(text, _DECODER.raw_decode(text, pos)[1]).end()
            if text[pos] == ",":
                pos = _WS.match(text, pos + 1).end()
        return None
    if opener == "[" and isinstance(token, int):
        pos = _WS.match(text, pos + 1).end()
        i = 0
        while text[pos] != "]":
            if i == token:
                return pos
            pos = _WS.match(text, _DECODER.raw_decode(text, pos)[1]).end()
            if text[pos] == ",":
                pos = _WS.match(text, pos + 1).end()
            i += 1
    return None


def _req(obj: Mapping, key: str, path: str):
    if not isinstance(obj, Mapping):
        raise SchemaError(path, "expected an object")
    if key not in obj:
        raise SchemaError(path, f"missing required key {key!r}")
    return obj[key]


def _int_list(value, path: str) -> list[int]:
    if not isinstance(value, list) or not all(isinstance(v, int) and not isinstance(v, bool) for v in value):
        raise SchemaError(path, "expected a list of integers")
    return list(value)


def _number(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(path, f"expected a number, got {value!r}")
    return float(value)


def parse_matrix(value, path: str = "matrix") -> np.ndarray:
    """Row-major nested list; each entry is a real number or a ``[re, im]`` pair."""
    if not isinstance(value, list) or not value or not all(isinstance(row, list) for row in value):
        raise SchemaError(path, "expected a non-empty list of rows")
    dim = len(value)
    out = np.empty((dim, dim), dtype=complex)
    for i, row in enumerate(value):
        if len(row) != dim:
            raise SchemaError(f"{path}[{i}]", f"expected {dim} entries, got {len(row)}")
        for j, entry in enumerate(row):
            if isinstance(entry, list):
                if len(entry) != 2:
                    raise SchemaError(f"{path}[{i}][{j}]", "complex entries are [re, im] pairs")
                out[i, j] = complex(_number(entry[0], f"{path}[{i}][{j}]"), _number(entry[1], f"{path}[{i}][{j}]"))
            else:
                out[i, j] = _number(entry, f"{path}[{i}][{j}]")
    return out


def matrix_to_json(mat: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(mat, dtype=complex)]


def parse_observable(value, n_qubits: int | None = None, path: str = "observable") -> PauliObservable:
    """``[["ZI", 1.0], ...]``; a bare word string means coefficient one."""
    if isinstance(value, str):
        value = [[value, 1.0]]
    if not isinstance(value, list):
        raise SchemaError(path, "expected a list of [word, coefficient] pairs")
    pairs = []
    for i, item in enumerate(value):
        if not (isinstance(item, list) and len(item) == 2 and isinstance(item[0], str)):
            raise SchemaError(f"{path}[{i}]", "expected a [word, coefficient] pair")
        pairs.append((item[0], _number(item[1], f"{path}[{i}][1]")))
    try:
        return PauliObservable.from_pairs(pairs, n_qubits=n_qubits)
    except ValueError as exc:
        raise SchemaError(path, str(exc)) from None


def parse_observables(value, n_qubits: int, path: str = "observables") -> dict[str, PauliObservable]:
    """Named observables: an object ``{name: observable}`` or a list of words."""
    if value is None:
        return {}
    if isinstance(value, list) and all(isinstance(v, str) for v in value):
        return {w: parse_observable(w, n_qubits, f"{path}[{i}]") for i, w in enumerate(value)}
    if isinstance(value, Mapping):
        return {k: parse_observable(v, n_qubits, f"{path}.{k}") for k, v in value.items()}
    raise SchemaError(path, "expected an object of observables or a list of Pauli words")


def parse_state(value, n_qubits: int, path: str = "initial_state") -> np.ndarray:
    """Initial state.

    Accepted forms: ``"zero"``, ``"mixed"``, a bit string such as ``"0110"``
    (rightmost is qubit 0), ``{"product": ["0", "+", ...]}`` (qubit 0 first),
    ``{"bloch": [...]}`` or ``{"density": matrix}``.
    """
    if value is None or value == "zero":
        return zero_state(n_qubits)
    if value == "mixed":
        return maximally_mixed(n_qubits)
    try:
        if isinstance(value, str):
            if len(value) != n_qubits or set(value) - {"0", "1"}:
                raise SchemaError(path, f"expected a bit string of length {n_qubits}")
            return basis_state(value)
        if isinstance(value, Mapping):
            if "product" in value:
                labels = value["product"]
                if not isinstance(labels, list) or len(labels) != n_qubits:
                    raise SchemaError(f"{path}.product", f"expected {n_qubits} single-qubit labels")
                return product_state([single_qubit_state(str(s)) for s in labels])
            if "bloch" in value:
                r = np.asarray(value["bloch"], dtype=float)
                if r.ndim != 1 or num_qubits(r) != n_qubits:
                    raise SchemaError(f"{path}.bloch", f"expected {4**n_qubits} entries")
                return r
            if "density" in value:
                r = bloch_from_density(parse_matrix(value["density"], f"{path}.density"))
                if num_qubits(r) != n_qubits:
                    raise SchemaError(f"{path}.density", f"expected a {2**n_qubits}-dimensional matrix")
                return r
    except SchemaError:
        raise
    except ValueError as exc:
        raise SchemaError(path, str(exc)) from None
    raise SchemaError(path, f"unrecognised state {value!r}")


def _param(value, path: str):
    if isinstance(value, str):
        return Param(value)
    if isinstance(value, Mapping):
        name = _req(value, "name", path)
        if not isinstance(name, str):
            raise SchemaError(f"{path}.name", "parameter names are strings")
        return Param(name, _number(value.get("scale", 1.0), f"{path}.scale"))
    return _number(value, path)


def _add_stage(circuit: Circuit, item, path: str) -> None:
    if not isinstance(item, Mapping):
        raise SchemaError(path, "expected an object")
    try:
        if "channel" in item:
            kind = item["channel"]
            targets = _int_list(_req(item, "targets", path), f"{path}.targets")
            if kind in ("kraus", "custom"):
                ops = _req(item, "operators", path)
                if not isinstance(ops, list):
                    raise SchemaError(f"{path}.operators", "expected a list of matrices")
                mats = [parse_matrix(m, f"{path}.operators[{i}]") for i, m in enumerate(ops)]
                circuit.channel(KrausChannel(tuple(mats)), None, targets)
            elif kind in PARAM_NAMES:
                key = PARAM_NAMES[kind]
                circuit.channel(kind, _param(_req(item, key, path), f"{path}.{key}"), targets)
            else:
                raise SchemaError(f"{path}.channel", f"unknown channel {kind!r}")
            return
        if "controls" in item:
            controls = _int_list(item["controls"], f"{path}.controls")
            gate = _req(item, "gate", path)
            gpath = f"{path}.gate"
            name = _req(gate, "name", gpath)
            params = [_param(p, f"{gpath}.params[{i}]") for i, p in enumerate(gate.get("params", []))]
            targets = _int_list(_req(gate, "targets", gpath), f"{gpath}.targets")
            matrix = parse_matrix(gate["matrix"], f"{gpath}.matrix") if "matrix" in gate else None
            circuit.controlled(controls, name, params, targets, matrix)
            return
        name = _req(item, "name", path)
        if not isinstance(name, str):
            raise SchemaError(f"{path}.name", "gate names are strings")
        targets = _int_list(_req(item, "targets", path), f"{path}.targets")
        if name.upper() in GATE_ALIASES:
            k, base = GATE_ALIASES[name.upper()]
            if len(targets) != k + 1:
                raise SchemaError(f"{path}.targets", f"{name} takes [controls..., target] ({k + 1} qubits)")
            circuit.controlled(targets[:k], base, [], targets[k:])
            return
        if name not in GATES:
            raise SchemaError(f"{path}.name", f"unknown gate {name!r}")
        params = [_param(p, f"{path}.params[{i}]") for i, p in enumerate(item.get("params", []))]
        matrix = parse_matrix(item["matrix"], f"{path}.matrix") if "matrix" in item else None
        circuit.gate(name, params, targets, matrix)
    except SchemaError:
        raise
    except (ValueError, KeyError, TypeError) as exc:
        raise SchemaError(path, str(exc).strip("'\"")) from None


def parse_circuit(data: Mapping) -> Circuit:
    """``{"n_qubits": n, "stages": [...], "parameters": {"theta": 0.3}}``."""
    n = _req(data, "n_qubits", "")
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise SchemaError("n_qubits", "expected a positive integer")
    params = data.get("parameters", {})
    if not isinstance(params, Mapping):
        raise SchemaError("parameters", "expected an object of name: value")
    circuit = Circuit(n, parameters={k: _number(v, f"parameters.{k}") for k, v in params.items()})
    stages = data.get("stages", [])
    if not isinstance(stages, list):
        raise SchemaError("stages", "expected a list")
    for i, item in enumerate(stages):
        _add_stage(circuit, item, f"stages[{i}]")
    missing = [p for p in circuit.parameter_names() if p not in circuit.parameters]
    if missing:
        raise SchemaError("parameters", f"no value for parameters {missing}")
    return circuit


def parse_lindblad(data: Mapping) -> dict:
    """Lindblad problem: Hamiltonian, jumps, final time, method and step size."""
    ham = data.get("hamiltonian", [])
    n = data.get("n_qubits")
    if n is None:
        if not ham:
            raise SchemaError("n_qubits", "required when the Hamiltonian is empty")
        n = len(ham[0][0]) if isinstance(ham[0], list) and ham[0] and isinstance(ham[0][0], str) else None
        if n is None:
            raise SchemaError("hamiltonian[0]", "expected a [word, coefficient] pair")
    H = parse_observable(ham, n, "hamiltonian")
    jumps = []
    for i, j in enumerate(data.get("jumps", [])):
        path = f"jumps[{i}]"
        mat = parse_matrix(_req(j, "matrix", path), f"{path}.matrix")
        targets = _int_list(_req(j, "targets", path), f"{path}.targets")
        rate = j.get("rate", 1.0)
        jumps.append({"matrix": mat, "targets": targets, "rate": rate if isinstance(rate, str) else _number(rate, f"{path}.rate")})
    t_final = _number(_req(data, "t_final", ""), "t_final")
    if t_final < 0:
        raise SchemaError("t_final", "must be non-negative")
    method = data.get("method", "rk4")
    if method not in ("expm", "rk4"):
        raise SchemaError("method", f"expected 'expm' or 'rk4', got {method!r}")
    dt = data.get("dt")
    if dt is not None and _number(dt, "dt") <= 0:
        raise SchemaError("dt", "must be positive")
    return {
        "n_qubits": n,
        "hamiltonian": H,
        "jumps": jumps,
        "params": {k: _number(v, f"parameters.{k}") for k, v in data.get("parameters", {}).items()},
        "t_final": t_final,
        "method": method,
        "dt": None if dt is None else float(dt),
        "initial_state": parse_state(data.get("initial_state"), n),
        "observables": parse_observables(data.get("observables"), n),
        "full_states": bool(data.get("full_states", False)),
        "output_every": int(data.get("output_every", 1)),
    }


def parse_vqt(data: Mapping) -> dict:
    """VQT experiment: model, lattice couplings, beta grid, seeds and optimiser settings."""
    model = data.get("model", "heisenberg_1d")
    lattice = data.get("lattice", {})
    couplings = data.get("couplings", {})
    if model == "heisenberg_1d":
        size = {"n": int(lattice.get("n", 4))}
        coup = {k: _number(couplings.get(k, d), f"couplings.{k}") for k, d in (("J", -1.0), ("g", 0.3), ("h", 0.2))}
    elif model == "heisenberg_2d":
        size = {"rows": int(lattice.get("rows", 2)), "cols": int(lattice.get("cols", 2))}
        coup = {k: _number(couplings.get(k, d), f"couplings.{k}") for k, d in (("J_h", 1.0), ("J_v", 0.6))}
    else:
        raise SchemaError("model", f"unknown model {model!r}")
    betas = data.get("betas", [0.0, 0.5, 1.0, 2.0, 3.0, 5.0, 10.0, 20.0])
    if not isinstance(betas, list) or not betas:
        raise SchemaError("betas", "expected a non-empty list")
    betas = [_number(b, f"betas[{i}]") for i, b in enumerate(betas)]
    if any(b < 0 for b in betas):
        raise SchemaError("betas", "beta must be non-negative")
    seeds = data.get("seeds", 10)
    if isinstance(seeds, int) and not isinstance(seeds, bool):
        seeds = {"count": seeds}
    elif isinstance(seeds, list):
        seeds = {"list": _int_list(seeds, "seeds")}
    else:
        raise SchemaError("seeds", "expected a count or a list of integers")
    return {
        "model": model,
        "lattice": size,
        "couplings": coup,
        "betas": betas,
        "seeds": seeds,
        "lr": _number(data.get("lr", 0.005), "lr"),
        "iters": int(data.get("iters", 500)),
        "layers": int(data.get("layers", 3)),
    }
