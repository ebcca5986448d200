"""Nonlinear Jaynes-Cummings step unitaries on field (x) qubit.

Step ``k`` couples ``|m,->`` to ``|m - p,+>`` with ``p = 2**(k-1)`` and
coupling strength ``m``, so its propagator at angle ``theta = Omega t`` is a
direct sum of 2x2 rotations by ``m * theta``::

    |m,->   -> cos(m theta)|m,->   - i sin(m theta)|m-p,+>
    |m-p,+> -> cos(m theta)|m-p,+> - i sin(m theta)|m,->

Levels ``|m,->`` with ``m < p`` are uncoupled, and so are the top-edge
levels ``|m,+>`` with ``m + p >= D`` (their partner is truncated away).
The protocol angle is ``theta_k = pi / 2**k``.

Joint states use a field-major layout: flat index ``fock * 2**n + bits``
where qubit ``k`` is register bit ``k - 1`` (qubit 1 least significant).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

__all__ = [
    "GuardViolation",
    "LayoutError",
    "StepSpec",
    "JointIndex",
    "JointState",
    "protocol_step",
    "step_action",
    "step_unitary",
    "apply_step",
    "hamiltonian",
]

GUARD_TOL = 1e-12

Direction = Literal["forward", "reverse"]


class GuardViolation(RuntimeError):
    """Amplitude sits on a truncation-guard level that the step would couple."""


class LayoutError(ValueError):
    """A joint state does not have the layout an operation expects."""


@dataclass(frozen=True)
class StepSpec:
    k: int
    theta: float

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise ValueError(f"step index must be an integer >= 1, got {self.k}")

    @property
    def p(self) -> int:
        """Photon-number hop of this step."""
        return 1 << (self.k - 1)


def protocol_step(k: int) -> StepSpec:
    """Step ``k`` at its protocol angle ``pi / 2**k``."""
    return StepSpec(k, math.pi / (1 << k))


@dataclass(frozen=True)
class JointIndex:
    fock: int
    qubit: int

    @property
    def flat(self) -> int:
        return 2 * self.fock + self.qubit


def step_action(spec: StepSpec, basis: JointIndex, D: int) -> list[tuple[JointIndex, complex]]:
    """Image of one basis state of field (x) qubit under the step propagator."""
    m, q, p = basis.fock, basis.qubit, spec.p
    if not 0 <= m < D or q not in (0, 1):
        raise ValueError(f"basis state {basis} outside truncation D={D}")
    if q == 0:
        if m < p:
            return [(basis, 1.0 + 0j)]
        phi = m * spec.theta
        return [(basis, complex(math.cos(phi))), (JointIndex(m - p, 1), -1j * math.sin(phi))]
    if m + p >= D:
        return [(basis, 1.0 + 0j)]
    phi = (m + p) * spec.theta
    return [(basis, complex(math.cos(phi))), (JointIndex(m + p, 0), -1j * math.sin(phi))]


def step_unitary(spec: StepSpec, D: int) -> np.ndarray:
    """``2D x 2D`` matrix of the step propagator, columns from :func:`step_action`."""
    if D < 1:
        raise ValueError("truncation must be >= 1")
    u = np.zeros((2 * D, 2 * D), dtype=complex)
    for m in range(D):
        for q in (0, 1):
            col = JointIndex(m, q)
            for row, amp in step_action(spec, col, D):
                u[row.flat, col.flat] = amp
    return u


def hamiltonian(k: int, D: int) -> np.ndarray:
    """Dimensionless ``H_k / (hbar Omega)`` built from truncated ladder operators.

    Uses ``a``, ``a^dagger`` and ``n`` on ``D`` levels, with ``n^{-1/2}``
    taken as the pseudo-inverse so that ``a n^{-1/2}`` annihilates the
    vacuum. Step 1 is assembled literally as
    ``sqrt(n) a^dagger sigma_- + a sqrt(n) sigma_+``. Intended as an
    independent check on :func:`step_unitary`.
    """
    a = np.diag(np.sqrt(np.arange(1, D, dtype=float)), 1).astype(complex)
    ad = a.conj().T
    nvals = np.arange(D, dtype=float)
    n = np.diag(nvals).astype(complex)
    inv_sqrt = np.diag([1.0 / math.sqrt(x) if x > 0 else 0.0 for x in nvals]).astype(complex)
    sig_minus = np.array([[0, 1], [0, 0]], dtype=complex)  # |+> -> |->
    sig_plus = sig_minus.T.copy()
    if k == 1:
        sq = np.diag(np.sqrt(nvals)).astype(complex)
        up, down = sq @ ad, a @ sq
    else:
        p = 1 << (k - 1)
        up = n @ np.linalg.matrix_power(inv_sqrt @ ad, p)
        down = np.linalg.matrix_power(a @ inv_sqrt, p) @ n
    return np.kron(up, sig_minus) + np.kron(down, sig_plus)


@dataclass
class JointState:
    """Field (x) ``n_qubits`` register, as a ket or a density matrix.

    ``data`` is a flat vector of length ``D * 2**n`` or a square matrix of
    that size, in the field-major layout described in the module docstring.
    """

    data: np.ndarray
    D: int
    n_qubits: int

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=complex)
        size = self.D * (1 << self.n_qubits)
        if self.data.ndim == 1:
            ok = self.data.shape == (size,)
        else:
            ok = self.data.shape == (size, size)
        if not ok:
            raise LayoutError(
                f"joint data shape {self.data.shape} does not match D={self.D}, "
                f"{self.n_qubits} qubits"
            )

    @property
    def is_ket(self) -> bool:
        return self.data.ndim == 1

    @property
    def dims(self) -> list[int]:
        """Subsystem dimensions in flat-index order: field, qubit n, ..., qubit 1."""
        return [self.D] + [2] * self.n_qubits

    @classmethod
    def from_field(cls, field: np.ndarray) -> "JointState":
        field = np.asarray(field, dtype=complex)
        return cls(field.copy(), field.shape[0], 0)

    def append_qubit(self, qubit: np.ndarray | None = None) -> "JointState":
        """Add qubit ``n + 1`` (new most significant bit), default ``|->``."""
        d = 1 << self.n_qubits
        if self.is_ket:
            q = np.array([1.0, 0.0], dtype=complex) if qubit is None else np.asarray(qubit, dtype=complex)
            t = self.data.reshape(self.D, 1, d) * q.reshape(1, 2, 1)
            return JointState(t.reshape(-1), self.D, self.n_qubits + 1)
        q = np.diag([1.0, 0.0]).astype(complex) if qubit is None else np.asarray(qubit, dtype=complex)
        r = self.data.reshape(self.D, 1, d, self.D, 1, d) * q.reshape(1, 2, 1, 1, 2, 1)
        size = 2 * d * self.D
        return JointState(r.reshape(size, size), self.D, self.n_qubits + 1)

    def density(self) -> np.ndarray:
        if self.is_ket:
            return np.outer(self.data, self.data.conj())
        return self.data

    def _tensor(self) -> np.ndarray:
        shape = self.dims
        return self.data.reshape(shape if self.is_ket else shape + shape)

    def _qubit_axis(self, k: int) -> int:
        if not 1 <= k <= self.n_qubits:
            raise LayoutError(f"qubit {k} does not exist (state has {self.n_qubits})")
        return 1 + self.n_qubits - k


def _rotate(t: np.ndarray, fock_axis: int, qubit_axis: int, spec: StepSpec, sign: float) -> np.ndarray:
    """Apply the step block rotation along one (fock, qubit) axis pair.

    ``sign = -1`` applies the propagator, ``+1`` its conjugate (which is
    both ``U^dagger`` on kets and ``U`` acting on the bra index).
    """
    x = np.moveaxis(t, (fock_axis, qubit_axis), (0, 1))
    D, p = x.shape[0], spec.p
    if p >= D:
        return t.copy()
    m = np.arange(p, D, dtype=float)
    shape = (D - p,) + (1,) * (x.ndim - 2)
    c = np.cos(m * spec.theta).reshape(shape)
    s = (sign * 1j) * np.sin(m * spec.theta).reshape(shape)
    lo = x[p:, 0]
    hi = x[: D - p, 1]
    out = x.copy()
    out[p:, 0] = c * lo + s * hi
    out[: D - p, 1] = s * lo + c * hi
    return np.moveaxis(out, (0, 1), (fock_axis, qubit_axis))


def _guard_mass(t: np.ndarray, fock_axis: int, qubit_axis: int, p: int) -> float:
    x = np.moveaxis(t, (fock_axis, qubit_axis), (0, 1))
    D = x.shape[0]
    band = x[max(D - p, 0):, 1]
    return float(np.max(np.abs(band))) if band.size else 0.0


def apply_step(
    state: JointState,
    spec: StepSpec,
    direction: Direction = "forward",
    target_qubit: int | None = None,
    *,
    guard_tol: float = GUARD_TOL,
) -> JointState:
    """Apply ``U`` (forward) or ``U^dagger`` (reverse) to the field and one qubit.

    ``target_qubit`` defaults to ``spec.k``. Raises :class:`GuardViolation`
    if the input has amplitude above ``guard_tol`` on a top-edge ``|m,+>``
    level of the target qubit, where truncation would make the step wrong.
    """
    if direction not in ("forward", "reverse"):
        raise ValueError(f"direction must be 'forward' or 'reverse', got {direction!r}")
    k = spec.k if target_qubit is None else target_qubit
    qa = state._qubit_axis(k)
    t = state._tensor()
    sign = -1.0 if direction == "forward" else 1.0
    nax = 1 + state.n_qubits

    axes = [(0, qa, sign)]
    if not state.is_ket:
        axes.append((nax, nax + qa, -sign))
    for fa, qb, _ in axes:
        g = _guard_mass(t, fa, qb, spec.p)
        if g > guard_tol:
            raise GuardViolation(
                f"step {spec.k}: amplitude {g:.3e} on truncation guard levels "
                f"|m,+> with m >= D - {spec.p}"
            )
    for fa, qb, sg in axes:
        t = _rotate(t, fa, qb, spec, sg)
    return JointState(t.reshape(state.data.shape), state.D, state.n_qubits)
