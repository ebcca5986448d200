"""Dense complex linear algebra used by every other module.

Everything here is a pure function of numpy arrays. The Hermitian
eigensolver is a cyclic (round-robin ordered) Jacobi method; disjoint
rotations within one round are applied together as vectorized row and
column updates.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

__all__ = [
    "NumericsError",
    "ConvergenceError",
    "NotPSDError",
    "HermitianEigenResult",
    "as_matrix",
    "dagger",
    "hermiticity_error",
    "eigh",
    "sqrt_psd",
    "tensor",
    "partial_trace",
    "ket_reduce",
]

HERMITIAN_TOL = 1e-10
PSD_CLAMP_TOL = 1e-10
JACOBI_OFF_TOL = 1e-14
JACOBI_MAX_SWEEPS = 100
# Off-diagonal entries below this are left alone: they sit far under any
# meaningful tolerance and dividing by subnormals overflows.
_JACOBI_SKIP = 1e-150


class NumericsError(ValueError):
    """Invalid input to a linear algebra routine."""


class ConvergenceError(NumericsError):
    """The Jacobi iteration hit its sweep cap."""


class NotPSDError(NumericsError):
    """An eigenvalue fell below the clamping tolerance."""


@dataclass(frozen=True)
class HermitianEigenResult:
    """Eigenvalues in ascending order; eigenvectors stored as columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    sweeps: int = 0

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T


def as_matrix(a, *, square: bool = True) -> np.ndarray:
    """Coerce ``a`` to a finite 2-D complex array."""
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2 or m.shape[0] == 0 or m.shape[1] == 0:
        raise NumericsError(f"expected a non-empty 2-D matrix, got shape {m.shape}")
    if square and m.shape[0] != m.shape[1]:
        raise NumericsError(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise NumericsError("matrix contains NaN or Inf entries")
    return m


def dagger(a: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(a, -1, -2))


def hermiticity_error(a: np.ndarray) -> float:
    """Max-norm of ``a - a^dagger``."""
    return float(np.max(np.abs(a - dagger(a)))) if a.size else 0.0


@lru_cache(maxsize=32)
def _round_robin(n: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Pairings covering every (p, q) once, grouped into disjoint rounds."""
    m = n + (n % 2)
    order = list(range(m))
    rounds = []
    for _ in range(m - 1):
        ps, qs = [], []
        for i in range(m // 2):
            p, q = order[i], order[m - 1 - i]
            if p < n and q < n:
                ps.append(min(p, q))
                qs.append(max(p, q))
        rounds.append((np.array(ps, dtype=int), np.array(qs, dtype=int)))
        order = [order[0], order[-1]] + order[1:-1]
    return rounds


def _off_norm(a: np.ndarray) -> float:
    off = a - np.diag(np.diag(a))
    return float(np.sqrt(np.sum(off.real**2 + off.imag**2)))


def eigh(
    a,
    *,
    tol: float = JACOBI_OFF_TOL,
    max_sweeps: int = JACOBI_MAX_SWEEPS,
    hermitian_tol: float = HERMITIAN_TOL,
) -> HermitianEigenResult:
    """Eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.

    Args:
        a: Square Hermitian matrix.
        tol: Absolute threshold on the off-diagonal Frobenius norm.
        max_sweeps: Sweep cap before :class:`ConvergenceError` is raised.
        hermitian_tol: Allowed max-norm of ``a - a^dagger``.

    Returns:
        A :class:`HermitianEigenResult` with ascending eigenvalues.
    """
    a = as_matrix(a)
    herr = hermiticity_error(a)
    if herr > hermitian_tol:
        raise NumericsError(f"matrix is not Hermitian (max |A - A^H| = {herr:.3e})")
    n = a.shape[0]
    w = 0.5 * (a + a.conj().T)
    v = np.eye(n, dtype=complex)
    sweeps = 0
    while _off_norm(w) > tol:
        if sweeps >= max_sweeps:
            raise ConvergenceError(
                f"Jacobi did not converge in {max_sweeps} sweeps "
                f"(off-diagonal norm {_off_norm(w):.3e})"
            )
        for ps, qs in _round_robin(n):
            apq = w[ps, qs]
            g = np.abs(apq)
            active = g > _JACOBI_SKIP
            if not np.any(active):
                continue
            ps, qs, apq, g = ps[active], qs[active], apq[active], g[active]
            e = apq / g
            app = w[ps, ps].real
            aqq = w[qs, qs].real
            theta = (aqq - app) / (2.0 * g)
            sign = np.where(theta >= 0.0, 1.0, -1.0)
            t = sign / (np.abs(theta) + np.hypot(theta, 1.0))
            c = 1.0 / np.hypot(t, 1.0)
            s = t * c
            ec = np.conj(e)

            cp, cq = w[:, ps], w[:, qs]
            w[:, ps] = cp * c - cq * (s * ec)
            w[:, qs] = cp * s + cq * (c * ec)
            rp, rq = w[ps, :], w[qs, :]
            w[ps, :] = c[:, None] * rp - (s * e)[:, None] * rq
            w[qs, :] = s[:, None] * rp + (c * e)[:, None] * rq
            w[ps, qs] = 0.0
            w[qs, ps] = 0.0

            vp, vq = v[:, ps], v[:, qs]
            v[:, ps] = vp * c - vq * (s * ec)
            v[:, qs] = vp * s + vq * (c * ec)
        sweeps += 1

    evals = np.diag(w).real.copy()
    order = np.argsort(evals, kind="stable")
    return HermitianEigenResult(evals[order], v[:, order], sweeps)


def sqrt_psd(a, *, clamp_tol: float = PSD_CLAMP_TOL) -> np.ndarray:
    """Principal square root of a Hermitian positive semidefinite matrix.

    Eigenvalues in ``[-clamp_tol, 0)`` are treated as zero; anything lower
    raises :class:`NotPSDError`.
    """
    res = eigh(a)
    lam = res.eigenvalues
    if lam[0] < -clamp_tol:
        raise NotPSDError(f"matrix has eigenvalue {lam[0]:.3e} < -{clamp_tol:g}")
    root = np.sqrt(np.clip(lam, 0.0, None))
    v = res.eigenvectors
    r = (v * root) @ v.conj().T
    return 0.5 * (r + r.conj().T)


def tensor(*ops) -> np.ndarray:
    """Kronecker product; row index of ``A (x) B`` is ``i_A * rows_B + i_B``."""
    if not ops:
        raise NumericsError("tensor needs at least one operand")
    out = np.asarray(ops[0], dtype=complex)
    for op in ops[1:]:
        out = np.kron(out, np.asarray(op, dtype=complex))
    return out


def _check_dims(total: int, dims: Sequence[int], keep: Sequence[int]) -> tuple[list[int], list[int]]:
    dims = [int(d) for d in dims]
    if any(d < 1 for d in dims):
        raise NumericsError(f"subsystem dimensions must be positive, got {dims}")
    if int(np.prod(dims)) != total:
        raise NumericsError(f"dims {dims} do not multiply to matrix dimension {total}")
    keep = sorted(set(int(k) for k in keep))
    if any(k < 0 or k >= len(dims) for k in keep):
        raise NumericsError(f"keep indices {keep} out of range for {len(dims)} subsystems")
    return dims, keep


def partial_trace(m, dims: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    """Reduce a composite operator onto the subsystems listed in ``keep``.

    Kept subsystems appear in increasing index order. An empty ``keep``
    returns the ``1 x 1`` matrix holding the full trace.
    """
    m = as_matrix(m)
    dims, keep = _check_dims(m.shape[0], dims, keep)
    n = len(dims)
    t = m.reshape(dims + dims)
    ket_idx = list(range(n))
    bra_idx = [k if k not in keep else n + k for k in range(n)]
    out_idx = keep + [n + k for k in keep]
    reduced = np.einsum(t, ket_idx + bra_idx, out_idx)
    d = int(np.prod([dims[k] for k in keep])) if keep else 1
    return np.asarray(reduced).reshape(d, d)


def ket_reduce(psi, dims: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    """Reduced density matrix of the pure state ``psi`` on ``keep``.

    Equivalent to ``partial_trace(outer(psi, psi*), dims, keep)`` without
    forming the full projector.
    """
    psi = np.asarray(psi, dtype=complex).ravel()
    dims, keep = _check_dims(psi.size, dims, keep)
    n = len(dims)
    t = psi.reshape(dims)
    traced = [k for k in range(n) if k not in keep]
    t = np.transpose(t, keep + traced)
    d = int(np.prod([dims[k] for k in keep])) if keep else 1
    t = t.reshape(d, -1)
    return t @ t.conj().T
