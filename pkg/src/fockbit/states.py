"""Single-mode field states and single-qubit states.

Fock truncation keeps levels ``|0>..|D-1>``. Thermal states are left
unnormalized after truncation and carry the discarded weight in
``tail_mass``; coherent states are renormalized over the window and keep
the pre-normalization tail for reporting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .numerics import NumericsError, as_matrix, eigh, hermiticity_error

__all__ = [
    "StateError",
    "DensityOperator",
    "PureState",
    "QubitState",
    "ThermalParams",
    "thermal_state",
    "coherent_state",
    "number_state",
    "validate_density",
]

TRACE_TOL = 1e-9
NORM_TOL = 1e-12


class StateError(ValueError):
    """A state failed construction or validation."""


@dataclass(frozen=True)
class DensityOperator:
    """Truncated field density matrix with entries ``c_nm``."""

    matrix: np.ndarray
    tail_mass: float = 0.0

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def renormalized(self) -> "DensityOperator":
        """Copy scaled to unit trace; ``tail_mass`` is kept for reporting."""
        tr = self.trace
        if tr <= 0.0:
            raise StateError("cannot renormalize a state with non-positive trace")
        return replace(self, matrix=self.matrix / tr)

    def support_top(self, tol: float = 0.0) -> int:
        """One past the highest Fock level with diagonal weight above ``tol``."""
        diag = np.abs(np.diag(self.matrix))
        nz = np.nonzero(diag > tol)[0]
        return int(nz[-1]) + 1 if nz.size else 0


@dataclass(frozen=True)
class PureState:
    """Unit-norm Fock amplitudes."""

    amplitudes: np.ndarray
    tail_mass: float = 0.0

    def __post_init__(self):
        norm = float(np.linalg.norm(self.amplitudes))
        if abs(norm - 1.0) > NORM_TOL:
            raise StateError(f"pure state norm is {norm!r}, expected 1")

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    def to_density(self) -> DensityOperator:
        psi = self.amplitudes
        return DensityOperator(np.outer(psi, psi.conj()), tail_mass=self.tail_mass)


@dataclass(frozen=True)
class QubitState:
    """``alpha |-><-| + beta |-><+| + beta* |+><-| + (1 - alpha) |+><+|``.

    Basis index 0 is ``|->`` (ground), index 1 is ``|+>``.
    """

    alpha: float
    beta: complex = 0j

    def __post_init__(self):
        a = float(self.alpha)
        if not -1e-12 <= a <= 1.0 + 1e-12:
            raise StateError(f"qubit ground population {a} outside [0, 1]")
        if abs(self.beta) ** 2 > a * (1.0 - a) + 1e-12:
            raise StateError("qubit coherence violates |beta|^2 <= alpha(1 - alpha)")

    @property
    def matrix(self) -> np.ndarray:
        a, b = self.alpha, complex(self.beta)
        return np.array([[a, b], [b.conjugate(), 1.0 - a]], dtype=complex)

    @classmethod
    def from_matrix(cls, m: np.ndarray) -> "QubitState":
        """Build from a 2x2 block, normalizing by its trace."""
        m = np.asarray(m, dtype=complex)
        tr = float(np.trace(m).real)
        if tr <= 0.0:
            raise StateError("qubit block has non-positive trace")
        a = float(m[0, 0].real) / tr
        return cls(min(max(a, 0.0), 1.0), complex(m[0, 1]) / tr)


@dataclass(frozen=True)
class ThermalParams:
    N: float
    v: float = field(init=False)

    def __post_init__(self):
        if not self.N >= 0.0 or math.isinf(self.N):
            raise StateError(f"mean photon number must be finite and >= 0, got {self.N}")
        object.__setattr__(self, "v", self.N / (self.N + 1.0))

    @classmethod
    def from_v(cls, v: float) -> "ThermalParams":
        if not 0.0 <= v < 1.0:
            raise StateError(f"thermal ratio v must lie in [0, 1), got {v}")
        return cls(v / (1.0 - v))


def _check_dim(D: int) -> int:
    if int(D) != D or D < 1:
        raise StateError(f"truncation must be a positive integer, got {D}")
    return int(D)


def thermal_state(N: float, D: int, *, v: float | None = None, renormalize: bool = False) -> DensityOperator:
    """Diagonal ``(1 - v) v^m`` for ``m < D`` with ``v = N / (N + 1)``.

    Pass ``v`` directly to avoid the round trip through ``N`` (exactness
    matters for ``v`` values like 0.1 in tests). ``tail_mass`` is ``v^D``.
    """
    D = _check_dim(D)
    if v is None:
        v = ThermalParams(N).v
    elif not 0.0 <= v < 1.0:
        raise StateError(f"thermal ratio v must lie in [0, 1), got {v}")
    m = np.arange(D)
    weights = (1.0 - v) * np.power(v, m)
    rho = DensityOperator(np.diag(weights).astype(complex), tail_mass=float(v**D))
    return rho.renormalized() if renormalize else rho


def coherent_state(alpha: complex, D: int) -> PureState:
    """Truncated coherent state, renormalized over ``|0>..|D-1>``."""
    D = _check_dim(D)
    alpha = complex(alpha)
    amps = np.empty(D, dtype=complex)
    amps[0] = math.exp(-abs(alpha) ** 2 / 2.0)
    for n in range(1, D):
        amps[n] = amps[n - 1] * alpha / math.sqrt(n)
    kept = float(np.sum(np.abs(amps) ** 2))
    return PureState(amps / math.sqrt(kept), tail_mass=_poisson_tail(abs(alpha) ** 2, D))


def _poisson_tail(x: float, D: int) -> float:
    """``sum_{n >= D} e^-x x^n / n!`` summed directly (no ``1 - kept`` cancellation)."""
    if x == 0.0:
        return 0.0
    term = math.exp(-x + D * math.log(x) - math.lgamma(D + 1))
    total, n = 0.0, D
    while term > 0.0 and term > total * 1e-17:
        total += term
        n += 1
        term *= x / n
    return min(total, 1.0)


def number_state(m: int, D: int) -> PureState:
    D = _check_dim(D)
    if int(m) != m or not 0 <= m < D:
        raise StateError(f"Fock index {m} outside [0, {D})")
    amps = np.zeros(D, dtype=complex)
    amps[int(m)] = 1.0
    return PureState(amps)


def validate_density(rho, tolerance: float = 1e-10, *, tail_mass: float | None = None) -> DensityOperator:
    """Check Hermiticity, positivity and trace; return a :class:`DensityOperator`.

    The trace deficit ``1 - tr(rho)`` is recorded as ``tail_mass`` unless
    an explicit value is given.
    """
    try:
        m = as_matrix(rho)
    except NumericsError as exc:
        raise StateError(str(exc)) from exc
    herr = hermiticity_error(m)
    if herr > tolerance:
        raise StateError(f"density matrix is not Hermitian (max |rho - rho^H| = {herr:.3e})")
    lam_min = float(eigh(m, hermitian_tol=tolerance).eigenvalues[0])
    if lam_min < -tolerance:
        raise StateError(f"density matrix has negative eigenvalue {lam_min:.6g}")
    tr = float(np.trace(m).real)
    if not 0.0 <= tr <= 1.0 + TRACE_TOL:
        raise StateError(f"density matrix trace {tr!r} outside [0, 1]")
    if tail_mass is None:
        tail_mass = max(0.0, 1.0 - tr)
    elif tr < 1.0 - tail_mass - TRACE_TOL:
        raise StateError(f"trace {tr!r} below 1 - tail_mass = {1.0 - tail_mass!r}")
    return DensityOperator(m, tail_mass=float(tail_mass))
