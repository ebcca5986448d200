"""Entropies, fidelities and closed-form reference curves.

All entropies are in bits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .numerics import PSD_CLAMP_TOL, as_matrix, eigh, sqrt_psd

__all__ = [
    "MetricsError",
    "EntropyReport",
    "ThermalClosedForms",
    "von_neumann_entropy",
    "uhlmann_fidelity",
    "vacuum_closeness",
    "thermal_closed_forms",
    "thermal_entropy",
    "coherent_fprime_closed",
    "entropy_balance",
]

ENTROPY_DROP = 1e-15


class MetricsError(ValueError):
    pass


def _matrix_of(state) -> np.ndarray:
    if hasattr(state, "to_density"):
        state = state.to_density()
    m = getattr(state, "matrix", state)
    return as_matrix(m)


def von_neumann_entropy(state) -> float:
    """``-sum lambda log2 lambda`` over the spectrum, ignoring ``lambda < 1e-15``.

    Accepts any object with a ``matrix`` attribute or a raw array. The
    state is not renormalized.
    """
    lam = eigh(_matrix_of(state)).eigenvalues
    if lam[0] < -PSD_CLAMP_TOL:
        raise MetricsError(f"not a density operator: eigenvalue {lam[0]:.3e}")
    lam = lam[lam >= ENTROPY_DROP]
    # ``+ 0.0`` turns the -0.0 of a pure state into 0.0
    return float(-np.sum(lam * np.log2(lam))) + 0.0 if lam.size else 0.0


def _unit_trace(m: np.ndarray) -> np.ndarray:
    tr = float(np.trace(m).real)
    if tr <= 0.0:
        raise MetricsError("state has non-positive trace")
    return m / tr


def uhlmann_fidelity(rho, sigma) -> float:
    """``Tr sqrt(sqrt(rho) sigma sqrt(rho))`` after scaling both to unit trace."""
    a = _unit_trace(_matrix_of(rho))
    b = _unit_trace(_matrix_of(sigma))
    if a.shape != b.shape:
        raise MetricsError(f"dimension mismatch: {a.shape} vs {b.shape}")
    ra = sqrt_psd(a)
    inner = ra @ b @ ra
    inner = 0.5 * (inner + inner.conj().T)
    f = float(np.trace(sqrt_psd(inner)).real)
    return min(max(f, 0.0), 1.0)


def vacuum_closeness(residue) -> float:
    """``sqrt(<0|rho|0>)`` of the residue field."""
    p0 = float(_matrix_of(residue)[0, 0].real)
    if p0 < -1e-12:
        raise MetricsError(f"vacuum population {p0:.3e} is negative")
    return math.sqrt(max(p0, 0.0))


def _binary_entropy_ratio(w: float) -> float:
    """Entropy of ``diag(1, w) / (1 + w)``."""
    if w == 0.0:
        return 0.0
    return math.log2(1.0 + w) - w / (1.0 + w) * math.log2(w)


def thermal_entropy(v: float) -> float:
    """Entropy of the untruncated thermal state with ratio ``v``."""
    if v == 0.0:
        return 0.0
    return -math.log2(1.0 - v) - v / (1.0 - v) * math.log2(v)


@dataclass(frozen=True)
class ThermalClosedForms:
    v: float
    K: int
    qubit_entropies: tuple[float, ...]
    qubit_ground_weights: tuple[float, ...]
    residue_entropy: float
    input_entropy: float
    fidelity: float


def thermal_closed_forms(v: float, K: int) -> ThermalClosedForms:
    """Exact thermal-input predictions for a ``K``-qubit conversion."""
    if not 0.0 <= v < 1.0:
        raise MetricsError(f"v must lie in [0, 1), got {v}")
    if K < 1:
        raise MetricsError("K must be >= 1")
    ws = [v ** (1 << (k - 1)) for k in range(1, K + 1)]
    big = v ** (1 << K)
    if v == 0.0:
        residue = 0.0
    else:
        residue = -math.log2(1.0 - big) - (1 << K) * big / (1.0 - big) * math.log2(v)
    return ThermalClosedForms(
        v=v,
        K=K,
        qubit_entropies=tuple(_binary_entropy_ratio(w) for w in ws),
        qubit_ground_weights=tuple(1.0 / (1.0 + w) for w in ws),
        residue_entropy=residue,
        input_entropy=thermal_entropy(v),
        fidelity=math.sqrt(1.0 - big),
    )


def coherent_fprime_closed(alpha: complex, K: int) -> float:
    """``sqrt(exp(-|alpha|^2) sum_{j < 2^K} |alpha|^{2j} / j!)``."""
    x = abs(complex(alpha)) ** 2
    term, total = math.exp(-x), 0.0
    for j in range(1 << K):
        total += term
        term *= x / (j + 1)
    return math.sqrt(min(total, 1.0))


@dataclass(frozen=True)
class EntropyReport:
    per_qubit: tuple[float, ...]
    residue: float
    input: float
    register: float
    balance_gap: float


def entropy_balance(result, rho) -> EntropyReport:
    """Entropy bookkeeping of a forward conversion of ``rho``.

    ``balance_gap`` is ``|sum_k S(q_k) + S(residue) - S(rho)|``. It is only
    expected to vanish when the register comes out as a product state.
    """
    per_qubit = tuple(von_neumann_entropy(q.matrix) for q in result.per_qubit)
    residue = von_neumann_entropy(result.residue_field)
    s_in = von_neumann_entropy(rho)
    s_reg = von_neumann_entropy(result.qubit_register)
    gap = abs(sum(per_qubit) + residue - s_in)
    return EntropyReport(per_qubit, residue, s_in, s_reg, gap)
