"""Command-line front end.

    fockbit <command> --state <spec> --K <int> --dim <int>
            [--engine joint|mixture|formula] [--renormalize] [--out <path>]
            [--format json|csv] [--sweep K=<a>..<b>] [--jobs <n>] [--seed <int>]

Commands: ``convert``, ``reverse``, ``roundtrip``, ``sweep``, ``validate``.

State specs: ``thermal:N=<float>``, ``coherent:alpha=<re>[+<im>i]``,
``fock:m=<int>``, ``random:rank=<int>`` (seeded by ``--seed``) and
``file:<path>``.

Exit codes: 0 success, 1 usage error, 2 input validation failure,
3 numerical guard or tolerance violation.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import io
import json
import math
import re
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import __version__, metrics
from .dynamics import GuardViolation
from .numerics import ConvergenceError, NotPSDError, NumericsError, eigh, hermiticity_error
from .protocol import ENGINES, ProtocolConfig, ProtocolError, QubitRegisterState, convert_reverse, roundtrip
from .serialize import SchemaError, atomic_write, complex_pairs, density_to_json, load_state_file
from .states import DensityOperator, PureState, StateError, coherent_state, number_state, thermal_state, validate_density

__all__ = [
    "EXIT_OK",
    "EXIT_USAGE",
    "EXIT_INVALID",
    "EXIT_NUMERICAL",
    "StateSpecError",
    "ParsedState",
    "RunSpec",
    "parse_state_spec",
    "parse_sweep",
    "default_dim",
    "run",
    "emit_csv",
    "main",
]

EXIT_OK, EXIT_USAGE, EXIT_INVALID, EXIT_NUMERICAL = 0, 1, 2, 3
CROSS_CHECK_TOL = 1e-10
COMMANDS = ("convert", "reverse", "roundtrip", "sweep", "validate")


class StateSpecError(ValueError):
    """Malformed state spec; ``position`` is the 0-based character offset."""

    def __init__(self, message: str, text: str, position: int):
        super().__init__(f"{message} at position {position} in {text!r}")
        self.text = text
        self.position = position


_UNSIGNED = r"(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?"
_COMPLEX = re.compile(
    rf"^(?:(?P<re>[+-]?{_UNSIGNED})(?P<im1>[+-](?:{_UNSIGNED})?i)?|(?P<im2>[+-]?(?:{_UNSIGNED})?i))$"
)
_SCHEMES = {
    "thermal": {"N": "float"},
    "coherent": {"alpha": "complex"},
    "fock": {"m": "int"},
    "random": {"rank": "int"},
}


def _parse_complex(value: str, text: str, pos: int) -> complex:
    """``a``, ``bi``, ``a+bi``, ``a-bi`` (a bare ``i`` means ``1i``)."""
    m = _COMPLEX.match(value)
    if not m:
        raise StateSpecError(f"invalid complex number {value!r}", text, pos)
    re_part = float(m.group("re")) if m.group("re") else 0.0
    im_txt = m.group("im1") or m.group("im2")
    im = 0.0
    if im_txt:
        coef = im_txt[:-1]
        im = float(coef + "1") if coef in ("", "+", "-") else float(coef)
    return complex(re_part, im)


@dataclass(frozen=True)
class ParsedState:
    """A parsed state spec; :meth:`build` constructs it at a given truncation."""

    scheme: str
    params: dict = field(default_factory=dict)
    path: str | None = None

    def build(self, D: int | None, seed: int | None = None):
        if self.scheme == "file":
            state, _ = load_state_file(self.path)
            if D is not None and state.dim != D:
                raise StateError(f"file state has dim {state.dim}, --dim is {D}")
            return state
        if D is None:
            raise StateError(f"a truncation (--dim) is required for {self.scheme} states")
        if self.scheme == "thermal":
            return thermal_state(self.params["N"], D)
        if self.scheme == "coherent":
            return coherent_state(self.params["alpha"], D)
        if self.scheme == "fock":
            return number_state(self.params["m"], D)
        return random_density(D, self.params["rank"], seed)


def random_density(D: int, rank: int, seed: int | None) -> DensityOperator:
    """Random rank-``rank`` density matrix from complex Gaussian factors."""
    if not 1 <= rank <= D:
        raise StateError(f"rank must lie in [1, {D}], got {rank}")
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((D, rank)) + 1j * rng.standard_normal((D, rank))
    rho = g @ g.conj().T
    return validate_density(rho / np.trace(rho).real)


def parse_state_spec(text: str) -> ParsedState:
    """Parse the state mini-language into a :class:`ParsedState`."""
    colon = text.find(":")
    if colon <= 0:
        raise StateSpecError("expected '<scheme>:'", text, max(colon, 0))
    scheme = text[:colon]
    body = text[colon + 1:]
    if scheme == "file":
        if not body:
            raise StateSpecError("missing file path", text, colon + 1)
        return ParsedState("file", path=body)
    if scheme not in _SCHEMES:
        raise StateSpecError(f"unknown scheme {scheme!r}", text, 0)
    expected = _SCHEMES[scheme]
    params: dict = {}
    value_pos: dict = {}
    pos = colon + 1
    for part in body.split(","):
        eq = part.find("=")
        if eq <= 0:
            raise StateSpecError("expected '<key>=<value>'", text, pos)
        key, value = part[:eq], part[eq + 1:]
        vpos = pos + eq + 1
        if key not in expected:
            raise StateSpecError(f"unknown parameter {key!r} for {scheme}", text, pos)
        if key in params:
            raise StateSpecError(f"duplicate parameter {key!r}", text, pos)
        kind = expected[key]
        try:
            if kind == "float":
                val = float(value)
                if not math.isfinite(val):
                    raise ValueError
            elif kind == "int":
                if not re.fullmatch(r"[+-]?\d+", value):
                    raise ValueError
                val = int(value)
            else:
                val = _parse_complex(value, text, vpos)
        except ValueError as exc:
            if isinstance(exc, StateSpecError):
                raise
            raise StateSpecError(f"invalid {kind} value {value!r}", text, vpos) from None
        params[key] = val
        value_pos[key] = vpos
        pos += len(part) + 1
    missing = set(expected) - set(params)
    if missing:
        raise StateSpecError(f"missing parameter {sorted(missing)[0]!r}", text, len(text))
    if scheme == "thermal" and params["N"] < 0:
        raise StateSpecError("mean photon number must be >= 0", text, value_pos["N"])
    if scheme == "fock" and params["m"] < 0:
        raise StateSpecError("Fock index must be >= 0", text, value_pos["m"])
    if scheme == "random" and params["rank"] < 1:
        raise StateSpecError("rank must be >= 1", text, value_pos["rank"])
    return ParsedState(scheme, params)


def parse_sweep(text: str) -> list[int]:
    m = re.fullmatch(r"K=(\d+)\.\.(\d+)", text)
    if not m:
        raise ValueError(f"sweep must look like K=<a>..<b>, got {text!r}")
    a, b = int(m.group(1)), int(m.group(2))
    if a < 1 or b < a:
        raise ValueError(f"sweep range must satisfy 1 <= a <= b, got {text!r}")
    return list(range(a, b + 1))


def default_dim(K: int) -> int:
    return max(64, 8 << K)


@dataclass(frozen=True)
class RunSpec:
    command: str
    state: str
    K: int | None = None
    D: int | None = None
    engine: str = "mixture"
    renormalize: bool = False
    out: str | None = None
    format: str = "json"
    sweep: tuple[int, ...] | None = None
    seed: int | None = None
    jobs: int = 1
    register_out: str | None = None
    matrices: bool = True


# -- report assembly ---------------------------------------------------------


def _metadata(spec: RunSpec, **extra) -> dict:
    meta = {
        "command": spec.command,
        "state": spec.state,
        "K": spec.K,
        "D": spec.D,
        "engine": spec.engine,
        "renormalize": spec.renormalize,
        "seed": spec.seed,
        "version": __version__,
    }
    meta.update(extra)
    meta["timestamp"] = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    return meta


def _reference(parsed: ParsedState, K: int) -> dict:
    if parsed.scheme == "thermal":
        v = parsed.params["N"] / (parsed.params["N"] + 1.0)
        ref = metrics.thermal_closed_forms(v, K)
        return {
            "fidelity": ref.fidelity,
            "vacuum_closeness": ref.fidelity,
            "qubit_entropies": list(ref.qubit_entropies),
            "residue_entropy": ref.residue_entropy,
            "input_entropy": ref.input_entropy,
        }
    if parsed.scheme == "coherent":
        return {"vacuum_closeness": metrics.coherent_fprime_closed(parsed.params["alpha"], K)}
    return {}


def _roundtrip_report(parsed: ParsedState, state, K: int, D: int, engine: str, renormalize: bool):
    cfg = ProtocolConfig(K, D, engine, renormalize)
    rep = roundtrip(state, cfg)
    ent = rep.entropy
    block = {
        "fidelity": rep.fidelity,
        "vacuum_closeness": rep.vacuum_closeness,
        "entropy": {
            "input": ent.input,
            "per_qubit": list(ent.per_qubit),
            "residue": ent.residue,
            "register": ent.register,
        },
        "balance_gap": ent.balance_gap,
        "reference": _reference(parsed, K),
    }
    return rep, block


def _max_cross_delta(deltas: dict) -> float:
    vals = [v for d in deltas.values() for v in d.values()]
    return max(vals) if vals else 0.0


def _forward_command(spec: RunSpec, parsed: ParsedState) -> tuple[dict, int]:
    K = spec.K
    state = parsed.build(spec.D, spec.seed)
    D = state.dim
    rep, block = _roundtrip_report(parsed, state, K, D, spec.engine, spec.renormalize)
    report = {
        "run": _metadata(spec, D=D),
        "metrics": block,
        "cross_check": rep.engine_deltas,
        "reconstruction_checks": rep.reconstruction_checks,
        "diagnostics": rep.diagnostics,
        "per_qubit": [{"alpha": q.alpha, "beta": [q.beta.real, q.beta.imag]} for q in rep.forward.per_qubit],
    }
    if spec.matrices:
        mats = {
            "register": complex_pairs(rep.forward.qubit_register.matrix),
            "residue": complex_pairs(rep.forward.residue_field.matrix),
        }
        if spec.command == "roundtrip":
            mats["reconstruction"] = complex_pairs(rep.reconstruction.matrix)
        report["matrices"] = mats
    if spec.register_out:
        reg = rep.forward.qubit_register
        atomic_write(spec.register_out, json.dumps(density_to_json(reg.matrix, K=K, tail_mass=reg.tail_mass)) + "\n")
    code = EXIT_OK if _max_cross_delta(rep.engine_deltas) <= CROSS_CHECK_TOL else EXIT_NUMERICAL
    return report, code


def _reverse_command(spec: RunSpec, parsed: ParsedState) -> tuple[dict, int]:
    if parsed.scheme != "file":
        raise StateError("reverse needs a qubit-register file state (file:<path>)")
    state, file_K = load_state_file(parsed.path)
    if isinstance(state, PureState):
        state = state.to_density()
    K = spec.K if spec.K is not None else file_K
    if K is None:
        raise StateError("register file has no 'K' field and --K was not given")
    if file_K is not None and file_K != K:
        raise StateError(f"--K {K} does not match register file K={file_K}")
    if state.dim != 1 << K:
        raise StateError(f"register dimension {state.dim} is not 2^K = {1 << K}")
    D = spec.D if spec.D is not None else default_dim(K)
    cfg = ProtocolConfig(K, D, spec.engine)
    reg = QubitRegisterState(state.matrix, K, tail_mass=state.tail_mass)
    rev = convert_reverse(reg, cfg)
    s_reg = metrics.von_neumann_entropy(reg)
    s_field = metrics.von_neumann_entropy(rev.field)
    per_qubit = [metrics.von_neumann_entropy(q.matrix) for q in reg.per_qubit()]
    report = {
        "run": _metadata(spec, K=K, D=D),
        "metrics": {
            "field_entropy": s_field,
            "register_entropy": s_reg,
            "per_qubit_entropy": per_qubit,
            "entropy_gap": abs(s_field - s_reg),
            "final_qubits_defect": rev.diagnostics["final_qubits_defect"],
            "vacuum_population": float(rev.field.matrix[0, 0].real),
        },
        "diagnostics": rev.diagnostics,
    }
    if spec.matrices:
        report["matrices"] = {
            "field": complex_pairs(rev.field.matrix),
            "final_qubits": complex_pairs(rev.final_qubits.matrix),
        }
    code = EXIT_OK if rev.diagnostics["final_qubits_defect"] <= 1e-12 else EXIT_NUMERICAL
    return report, code


def _validate_command(spec: RunSpec, parsed: ParsedState) -> tuple[dict, int]:
    state = parsed.build(spec.D, spec.seed)
    rho = state.to_density() if isinstance(state, PureState) else state
    lam = eigh(rho.matrix).eigenvalues
    report = {
        "run": _metadata(spec, D=rho.dim),
        "metrics": {
            "valid": True,
            "dim": rho.dim,
            "trace": rho.trace,
            "tail_mass": rho.tail_mass,
            "min_eigenvalue": float(lam[0]),
            "hermiticity_error": hermiticity_error(rho.matrix),
            "entropy": metrics.von_neumann_entropy(rho),
        },
    }
    return report, EXIT_OK


SWEEP_COLUMNS = (
    "K",
    "D",
    "fidelity",
    "vacuum_closeness",
    "reference_fidelity",
    "reference_vacuum_closeness",
    "input_entropy",
    "qubit_entropy_sum",
    "residue_entropy",
    "register_entropy",
    "balance_gap",
    "max_engine_delta",
)


def _sweep_point(parsed: ParsedState, spec: RunSpec, K: int) -> dict:
    D = spec.D if spec.D is not None else default_dim(K)
    state = parsed.build(None if parsed.scheme == "file" else D, spec.seed)
    rep, block = _roundtrip_report(parsed, state, K, state.dim, spec.engine, spec.renormalize)
    ref = block["reference"]
    return {
        "K": K,
        "D": state.dim,
        "fidelity": rep.fidelity,
        "vacuum_closeness": rep.vacuum_closeness,
        "reference_fidelity": ref.get("fidelity"),
        "reference_vacuum_closeness": ref.get("vacuum_closeness"),
        "input_entropy": rep.entropy.input,
        "qubit_entropy_sum": sum(rep.entropy.per_qubit),
        "residue_entropy": rep.entropy.residue,
        "register_entropy": rep.entropy.register,
        "balance_gap": rep.entropy.balance_gap,
        "max_engine_delta": _max_cross_delta(rep.engine_deltas),
    }


def _sweep_command(spec: RunSpec, parsed: ParsedState) -> tuple[list[dict], dict, int]:
    Ks = list(spec.sweep) if spec.sweep else ([spec.K] if spec.K else [])
    if not Ks:
        raise StateError("sweep needs --sweep K=<a>..<b> or --K")
    if spec.D is not None:
        for K in Ks:
            ProtocolConfig(K, spec.D, spec.engine)
    with ThreadPoolExecutor(max_workers=max(1, spec.jobs)) as pool:
        rows = list(pool.map(lambda K: _sweep_point(parsed, spec, K), Ks))
    code = EXIT_OK if all(r["max_engine_delta"] <= CROSS_CHECK_TOL for r in rows) else EXIT_NUMERICAL
    report = {"run": _metadata(spec, sweep=Ks), "rows": rows}
    return rows, report, code


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.12g}"


def emit_csv(rows: list[dict], path=None, columns=None) -> str:
    """Render rows as CSV (12 significant digits, LF line endings).

    Writes atomically to ``path`` when given; always returns the text.
    """
    if columns is None:
        columns = list(rows[0]) if rows else list(SWEEP_COLUMNS)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        if set(row) != set(columns):
            raise ValueError("rows are not homogeneous")
        writer.writerow([_fmt(row[c]) for c in columns])
    text = buf.getvalue()
    if path is not None:
        atomic_write(path, text)
    return text


def _emit(text: str, out: str | None) -> None:
    if out:
        atomic_write(out, text)
    else:
        sys.stdout.write(text)


def run(spec: RunSpec) -> tuple[dict, int]:
    """Execute ``spec``; returns ``(report, exit_code)`` and writes the output.

    Validation problems give exit code 2, numerical guard violations 3.
    """
    if spec.command not in COMMANDS:
        return {"error": f"unknown command {spec.command!r}"}, EXIT_USAGE
    try:
        parsed = parse_state_spec(spec.state)
        if spec.command in ("convert", "roundtrip"):
            if spec.K is None:
                raise StateError(f"{spec.command} needs --K")
            D = spec.D
            if D is None and parsed.scheme != "file":
                D = default_dim(spec.K)
            spec = replace(spec, D=D)
            ProtocolConfig(spec.K, D if D is not None else 1 << spec.K, spec.engine)
            report, code = _forward_command(spec, parsed)
            rows = None
        elif spec.command == "reverse":
            report, code = _reverse_command(spec, parsed)
            rows = None
        elif spec.command == "sweep":
            rows, report, code = _sweep_command(spec, parsed)
        else:
            report, code = _validate_command(spec, parsed)
            rows = None
    except (GuardViolation, NumericsError) as exc:
        if isinstance(exc, NumericsError) and not _is_numerical(exc):
            return _fail(spec, exc, EXIT_INVALID)
        return _fail(spec, exc, EXIT_NUMERICAL)
    except (StateSpecError, StateError, SchemaError, ProtocolError, FileNotFoundError, ValueError) as exc:
        return _fail(spec, exc, EXIT_INVALID)

    if spec.format == "csv":
        if rows is None:
            rows = [_flatten(report["metrics"])]
            text = emit_csv(rows)
        else:
            text = emit_csv(rows, columns=list(SWEEP_COLUMNS))
        _emit(text, spec.out)
    else:
        _emit(json.dumps(report, indent=2) + "\n", spec.out)
    return report, code


def _is_numerical(exc: Exception) -> bool:
    return isinstance(exc, (ConvergenceError, NotPSDError))


def _flatten(block: dict, prefix: str = "") -> dict:
    out = {}
    for key, value in block.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            out.update(_flatten(value, name + "."))
        elif isinstance(value, list):
            for i, item in enumerate(value, 1):
                out[f"{name}.{i}"] = item
        else:
            out[name] = value
    return out


def _fail(spec: RunSpec, exc: Exception, code: int) -> tuple[dict, int]:
    print(f"fockbit {spec.command}: {exc}", file=sys.stderr)
    return {"error": str(exc), "exit_code": code}, code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fockbit", description="Field-to-qubit conversion by nonlinear Jaynes-Cummings steps.")
    parser.add_argument("--version", action="version", version=f"fockbit {__version__}")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--state", required=True, help="state spec, e.g. thermal:N=1 or file:rho.json")
    parser.add_argument("--K", type=int, help="number of qubits")
    parser.add_argument("--dim", type=int, help="Fock truncation D (multiple of 2^K)")
    parser.add_argument("--engine", choices=ENGINES, default="mixture")
    parser.add_argument("--renormalize", action="store_true", help="renormalize the truncated input state")
    parser.add_argument("--out", help="output path (default: stdout)")
    parser.add_argument("--format", choices=("json", "csv"), default="json")
    parser.add_argument("--sweep", help="K=<a>..<b>")
    parser.add_argument("--jobs", type=int, default=1, help="concurrent sweep points")
    parser.add_argument("--seed", type=int, help="seed for random:rank=<r> states")
    parser.add_argument("--register-out", help="write the qubit register as a state file")
    parser.add_argument("--no-matrices", action="store_true", help="omit matrices from JSON reports")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    sweep = None
    if args.sweep is not None:
        try:
            sweep = tuple(parse_sweep(args.sweep))
        except ValueError as exc:
            parser.error(str(exc))
    if args.K is not None and args.K < 1:
        parser.error("--K must be >= 1")
    if args.jobs < 1:
        parser.error("--jobs must be >= 1")
    spec = RunSpec(
        command=args.command,
        state=args.state,
        K=args.K,
        D=args.dim,
        engine=args.engine,
        renormalize=args.renormalize,
        out=args.out,
        format=args.format,
        sweep=sweep,
        seed=args.seed,
        jobs=args.jobs,
        register_out=args.register_out,
        matrices=not args.no_matrices,
    )
    _, code = run(spec)
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
