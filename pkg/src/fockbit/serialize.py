"""JSON state files, report encoding and atomic file output.

State file schema (all complex numbers as ``[re, im]``)::

    {"dim": d, "entries": [[re, im], ...]}        # d*d entries, row-major
    {"dim": d, "amplitudes": [[re, im], ...]}     # pure state
    {"dim": 2**K, "K": K, "entries": [...]}       # qubit register

An optional ``tail_mass`` field is carried through.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from .states import DensityOperator, PureState, StateError, validate_density

__all__ = [
    "SchemaError",
    "complex_pairs",
    "matrix_from_pairs",
    "density_to_json",
    "pure_to_json",
    "load_state_file",
    "atomic_write",
]


class SchemaError(StateError):
    """A state file does not follow the JSON schema."""


def complex_pairs(a) -> list:
    """Nested ``[re, im]`` lists; floats keep their shortest round-trip repr."""
    a = np.asarray(a, dtype=complex)
    if a.ndim == 1:
        return [[float(z.real), float(z.imag)] for z in a]
    return [complex_pairs(row) for row in a]


def _parse_pairs(items, what: str) -> np.ndarray:
    if not isinstance(items, list):
        raise SchemaError(f"'{what}' must be an array of [re, im] pairs")
    out = np.empty(len(items), dtype=complex)
    for i, pair in enumerate(items):
        if (
            not isinstance(pair, list)
            or len(pair) != 2
            or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in pair)
        ):
            raise SchemaError(f"'{what}'[{i}] is not a [re, im] pair of numbers")
        if not all(math.isfinite(x) for x in pair):
            raise SchemaError(f"'{what}'[{i}] is not finite")
        out[i] = complex(pair[0], pair[1])
    return out


def matrix_from_pairs(items, dim: int) -> np.ndarray:
    flat = _parse_pairs(items, "entries")
    if flat.size != dim * dim:
        raise SchemaError(f"'entries' has {flat.size} items, expected dim*dim = {dim * dim}")
    return flat.reshape(dim, dim)


def density_to_json(matrix, *, K: int | None = None, tail_mass: float = 0.0) -> dict:
    m = np.asarray(matrix, dtype=complex)
    doc = {"dim": int(m.shape[0])}
    if K is not None:
        doc["K"] = int(K)
    doc["entries"] = [pair for row in complex_pairs(m) for pair in row]
    if tail_mass:
        doc["tail_mass"] = float(tail_mass)
    return doc


def pure_to_json(state: PureState) -> dict:
    doc = {"dim": state.dim, "amplitudes": complex_pairs(state.amplitudes)}
    if state.tail_mass:
        doc["tail_mass"] = float(state.tail_mass)
    return doc


def load_state_file(path) -> tuple[DensityOperator | PureState, int | None]:
    """Read a state file; returns the state and the ``K`` field if present."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except FileNotFoundError:
        raise
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaError(f"{path}: cannot read JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise SchemaError(f"{path}: top level must be an object")
    dim = doc.get("dim")
    if not isinstance(dim, int) or isinstance(dim, bool) or dim < 1:
        raise SchemaError(f"{path}: 'dim' must be a positive integer")
    K = doc.get("K")
    if K is not None:
        if not isinstance(K, int) or isinstance(K, bool) or K < 1 or (1 << K) != dim:
            raise SchemaError(f"{path}: 'K' must satisfy dim = 2^K")
    tail = doc.get("tail_mass")
    if tail is not None and (not isinstance(tail, (int, float)) or tail < 0):
        raise SchemaError(f"{path}: 'tail_mass' must be a non-negative number")
    has_entries, has_amps = "entries" in doc, "amplitudes" in doc
    if has_entries == has_amps:
        raise SchemaError(f"{path}: exactly one of 'entries' or 'amplitudes' is required")
    if has_amps:
        amps = _parse_pairs(doc["amplitudes"], "amplitudes")
        if amps.size != dim:
            raise SchemaError(f"{path}: 'amplitudes' has {amps.size} items, expected {dim}")
        return PureState(amps, tail_mass=float(tail or 0.0)), K
    m = matrix_from_pairs(doc["entries"], dim)
    return validate_density(m, tail_mass=None if tail is None else float(tail)), K


def atomic_write(path, text: str) -> None:
    """Write ``text`` via a temporary file in the target directory, then rename."""
    path = Path(path)
    directory = path.parent if str(path.parent) else Path(".")
    directory.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
