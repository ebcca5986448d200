"""Forward (field -> K qubits) and reverse (K qubits -> field) conversion.

Three engines compute the same maps:

``joint``
    Full density matrix of field (x) register, qubits appended one at a
    time. Exact and slow; used as the reference at small sizes.
``mixture``
    Eigendecompose the input and push each eigenvector through the step
    unitaries as a ket, then recombine with the eigenvalue weights.
``formula``
    Closed-form index bookkeeping: after ``K`` steps the Fock level
    ``j = 2^K n + b`` ends up as residue level ``2^K n`` and register
    basis state ``b``, with phase ``(-1)^(n + b_1) i^popcount(b)``.

Register basis index ``b = sum_k 2^(k-1) j_k`` with ``j_1`` the bit
extracted first (least significant).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Literal

import numpy as np

from . import metrics
from .dynamics import GUARD_TOL, GuardViolation, JointState, _guard_mass, _rotate, apply_step, protocol_step
from .numerics import eigh, partial_trace, tensor
from .states import DensityOperator, PureState, QubitState

__all__ = [
    "ProtocolError",
    "ENGINES",
    "ProtocolConfig",
    "QubitRegisterState",
    "ConversionResult",
    "ReverseResult",
    "ConversionReport",
    "register_bits",
    "register_index",
    "register_phases",
    "iter_forward_joint",
    "iter_reverse_joint",
    "convert_forward",
    "qubit_state_formula",
    "residue_formula",
    "convert_reverse",
    "reconstruct",
    "reconstruct_single_sum",
    "reconstruct_double_sum",
    "product_defect",
    "roundtrip",
]

Engine = Literal["joint", "mixture", "formula"]
ENGINES = ("joint", "mixture", "formula")
MAX_K = 16
JOINT_ORACLE_LIMIT = 1024
_CHUNK = 64


class ProtocolError(ValueError):
    """Incompatible configuration or input state."""


@dataclass(frozen=True)
class ProtocolConfig:
    K: int
    D: int
    engine: Engine = "mixture"
    renormalize_input: bool = False

    def __post_init__(self):
        if int(self.K) != self.K or not 1 <= self.K <= MAX_K:
            raise ProtocolError(f"K must be an integer in [1, {MAX_K}], got {self.K}")
        if int(self.D) != self.D or self.D < 1 or self.D % (1 << self.K):
            raise ProtocolError(f"D must be a positive multiple of 2^K = {1 << self.K}, got {self.D}")
        if self.engine not in ENGINES:
            raise ProtocolError(f"unknown engine {self.engine!r}; choose from {ENGINES}")

    @property
    def block(self) -> int:
        return 1 << self.K


@dataclass(frozen=True)
class QubitRegisterState:
    """``2^K x 2^K`` register density matrix (qubit 1 = least significant bit).

    ``tail_mass`` carries any trace deficit inherited from a truncated input.
    """

    matrix: np.ndarray
    K: int
    tail_mass: float = 0.0

    def __post_init__(self):
        d = 1 << self.K
        if self.matrix.shape != (d, d):
            raise ProtocolError(f"register matrix must be {d}x{d} for K={self.K}, got {self.matrix.shape}")

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def qubit(self, k: int) -> QubitState:
        """Reduced state of qubit ``k`` (1-based), normalized to unit trace."""
        return QubitState.from_matrix(partial_trace(self.matrix, [2] * self.K, [self.K - k]))

    def per_qubit(self) -> list[QubitState]:
        return [self.qubit(k) for k in range(1, self.K + 1)]

    @classmethod
    def product(cls, qubits: list[QubitState]) -> "QubitRegisterState":
        """``q_1 (x) ... (x) q_K`` in register order (qubit ``K`` leftmost)."""
        return cls(tensor(*[q.matrix for q in reversed(qubits)]), len(qubits))

    @classmethod
    def ground(cls, K: int, trace: float = 1.0) -> "QubitRegisterState":
        m = np.zeros((1 << K, 1 << K), dtype=complex)
        m[0, 0] = trace
        return cls(m, K)


@dataclass
class ConversionResult:
    qubit_register: QubitRegisterState
    per_qubit: list[QubitState]
    residue_field: DensityOperator
    engine_used: str
    diagnostics: dict = field(default_factory=dict)


@dataclass
class ReverseResult:
    field: DensityOperator
    final_qubits: QubitRegisterState
    engine_used: str
    diagnostics: dict = field(default_factory=dict)

    def __iter__(self):
        yield self.field
        yield self.final_qubits


def register_bits(b: int, K: int) -> tuple[int, ...]:
    """``(j_1, ..., j_K)`` of register index ``b``."""
    return tuple((b >> (k - 1)) & 1 for k in range(1, K + 1))


def register_index(bits) -> int:
    return sum(int(j) << k for k, j in enumerate(bits))


def register_phases(K: int) -> np.ndarray:
    """Forward phase of ``|b, -..->``: ``(-1)^(b_1) i^popcount(b)`` for ``b < 2^K``."""
    b = np.arange(1 << K)
    pop = np.array([bin(x).count("1") for x in b])
    return np.where(b & 1, -1.0, 1.0) * (1j ** pop)


def _as_density(state) -> DensityOperator:
    if isinstance(state, PureState):
        return state.to_density()
    if isinstance(state, DensityOperator):
        return state
    raise ProtocolError(f"expected DensityOperator or PureState, got {type(state).__name__}")


def _prepare(state, cfg: ProtocolConfig):
    if state.dim != cfg.D:
        raise ProtocolError(f"state dimension {state.dim} does not match D={cfg.D}")
    if cfg.renormalize_input and isinstance(state, DensityOperator):
        state = state.renormalized()
    return state


# -- forward -----------------------------------------------------------------


def iter_forward_joint(rho: DensityOperator, K: int) -> Iterator[tuple[int, JointState]]:
    """Yield ``(k, joint state)`` after each forward step ``k = 1..K``."""
    js = JointState.from_field(rho.matrix)
    for k in range(1, K + 1):
        js = apply_step(js.append_qubit(), protocol_step(k), "forward", k)
        yield k, js


def _forward_joint(rho: DensityOperator, K: int):
    tr_in = rho.trace
    drift = 0.0
    js = None
    for _, js in iter_forward_joint(rho, K):
        drift = max(drift, abs(float(np.trace(js.data).real) - tr_in))
    dims = js.dims
    register = partial_trace(js.data, dims, list(range(1, K + 1)))
    residue = partial_trace(js.data, dims, [0])
    return register, residue, drift


def _propagate_kets(t: np.ndarray, steps, sign: float) -> np.ndarray:
    """Apply ``steps`` (list of ``(spec, qubit)``) to a batch of kets.

    ``t`` has axes ``(fock, qubit K, ..., qubit 1, batch)``.
    """
    K = t.ndim - 2
    for spec, q in steps:
        qa = 1 + K - q
        g = _guard_mass(t, 0, qa, spec.p)
        if g > GUARD_TOL:
            raise GuardViolation(f"step {spec.k}: amplitude {g:.3e} on truncation guard levels")
        t = _rotate(t, 0, qa, spec, sign)
    return t


def _weighted_reductions(t: np.ndarray, w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Field and register reductions of ``sum_r w_r |t_r><t_r|``, ``t`` shaped ``(D, B, r)``."""
    D, B, n = t.shape
    tw = t * w
    field_m = tw.reshape(D, B * n) @ t.reshape(D, B * n).conj().T
    a = t.transpose(1, 0, 2).reshape(B, D * n)
    aw = tw.transpose(1, 0, 2).reshape(B, D * n)
    return field_m, aw @ a.conj().T


def _mixture_parts(state):
    """``(weights, columns)`` with ``state = sum_i w_i |c_i><c_i|``."""
    if isinstance(state, PureState):
        return np.ones(1), state.amplitudes.reshape(-1, 1)
    res = eigh(state.matrix)
    keep = res.eigenvalues != 0.0
    return res.eigenvalues[keep], res.eigenvectors[:, keep]


def _forward_mixture(state, K: int):
    D = state.dim
    B = 1 << K
    weights, vecs = _mixture_parts(state)
    steps = [(protocol_step(k), k) for k in range(1, K + 1)]
    register = np.zeros((B, B), dtype=complex)
    residue = np.zeros((D, D), dtype=complex)
    for start in range(0, weights.size, _CHUNK):
        w = weights[start:start + _CHUNK]
        v = vecs[:, start:start + _CHUNK]
        t = np.zeros((D,) + (2,) * K + (v.shape[1],), dtype=complex)
        t[(slice(None),) + (0,) * K] = v
        t = _propagate_kets(t, steps, -1.0).reshape(D, B, -1)
        f, r = _weighted_reductions(t, w)
        residue += f
        register += r
    drift = abs(float(np.trace(register).real) - float(np.sum(weights)))
    return register, residue, drift


def _blocks(c: np.ndarray, K: int) -> np.ndarray:
    B = 1 << K
    D = c.shape[0]
    if D % B:
        raise ProtocolError(f"dimension {D} is not a multiple of 2^K = {B}")
    return c.reshape(D // B, B, D // B, B)


def qubit_state_formula(c, K: int) -> QubitRegisterState:
    """Register after ``K`` steps and tracing the field, in closed form.

    Entry ``(j, l)`` is ``sum_m c[2^K m + j, 2^K m + l]`` times
    ``(-1)^(j_1 + l_1) i^|j| (-i)^|l|``.
    """
    rho = _as_density(c)
    blk = _blocks(rho.matrix, K)
    raw = np.einsum("mjml->jl", blk)
    ph = register_phases(K)
    return QubitRegisterState(raw * np.outer(ph, ph.conj()), K, tail_mass=rho.tail_mass)


def residue_formula(c, K: int) -> DensityOperator:
    """Field left after ``K`` steps: ``(-1)^(n+m) sum_j c[2^K n + j, 2^K m + j]`` at ``(2^K n, 2^K m)``."""
    rho = _as_density(c)
    B = 1 << K
    blk = _blocks(rho.matrix, K)
    reduced = np.einsum("njmj->nm", blk)
    n = np.arange(reduced.shape[0])
    sign = np.where((n[:, None] + n[None, :]) % 2, -1.0, 1.0)
    out = np.zeros_like(rho.matrix)
    out[::B, ::B] = reduced * sign
    return DensityOperator(out, tail_mass=rho.tail_mass)


def convert_forward(state, cfg: ProtocolConfig) -> ConversionResult:
    """Run the field through ``K`` qubits, each starting in ``|->``.

    Accepts a :class:`DensityOperator` or :class:`PureState` of dimension
    ``cfg.D``. Pure states skip the eigendecomposition in the mixture
    engine.
    """
    state = _prepare(state, cfg)
    K = cfg.K
    if cfg.engine == "joint":
        register, residue, drift = _forward_joint(_as_density(state), K)
    elif cfg.engine == "mixture":
        register, residue, drift = _forward_mixture(state, K)
    else:
        reg = qubit_state_formula(state, K)
        register, residue, drift = reg.matrix, residue_formula(state, K).matrix, 0.0

    tail = state.tail_mass
    reg_state = QubitRegisterState(0.5 * (register + register.conj().T), K, tail_mass=tail)
    residue = 0.5 * (residue + residue.conj().T)
    mask = np.ones(residue.shape, dtype=bool)
    mask[:: cfg.block, :: cfg.block] = False
    off_support = float(np.max(np.abs(residue[mask]))) if mask.any() else 0.0
    diagnostics = {
        "trace_in": float(_as_density(state).trace),
        "trace_drift": drift,
        "tail_mass": float(tail),
        "residue_off_support": off_support,
    }
    return ConversionResult(
        qubit_register=reg_state,
        per_qubit=reg_state.per_qubit(),
        residue_field=DensityOperator(residue, tail_mass=tail),
        engine_used=cfg.engine,
        diagnostics=diagnostics,
    )


# -- reverse -----------------------------------------------------------------


def _as_register(register, K: int) -> QubitRegisterState:
    if isinstance(register, QubitRegisterState):
        if register.K != K:
            raise ProtocolError(f"register has K={register.K}, config has K={K}")
        return register
    m = np.asarray(register, dtype=complex)
    return QubitRegisterState(m, K)


def iter_reverse_joint(register, cfg: ProtocolConfig) -> Iterator[tuple[int, JointState]]:
    """Yield ``(k, joint state)`` after each reverse step ``k = K..1``."""
    reg = _as_register(register, cfg.K)
    vac = np.zeros((cfg.D, cfg.D), dtype=complex)
    vac[0, 0] = 1.0
    js = JointState(np.kron(vac, reg.matrix), cfg.D, cfg.K)
    for k in range(cfg.K, 0, -1):
        js = apply_step(js, protocol_step(k), "reverse", k)
        yield k, js


def convert_reverse(register, cfg: ProtocolConfig) -> ReverseResult:
    """Load a register into a vacuum field, highest qubit first.

    Works for any register, entangled or not; the qubits always end in
    ``|-...->`` and the field is supported on ``|0>..|2^K - 1>``.
    """
    reg = _as_register(register, cfg.K)
    K, D, B = cfg.K, cfg.D, cfg.block
    dims = [D] + [2] * K
    if cfg.engine == "joint":
        js = None
        for _, js in iter_reverse_joint(reg, cfg):
            pass
        field_m = partial_trace(js.data, dims, [0])
        final = partial_trace(js.data, dims, list(range(1, K + 1)))
    elif cfg.engine == "mixture":
        res = eigh(reg.matrix)
        keep = res.eigenvalues != 0.0
        weights, vecs = res.eigenvalues[keep], res.eigenvectors[:, keep]
        steps = [(protocol_step(k), k) for k in range(K, 0, -1)]
        field_m = np.zeros((D, D), dtype=complex)
        final = np.zeros((B, B), dtype=complex)
        for start in range(0, weights.size, _CHUNK):
            w = weights[start:start + _CHUNK]
            v = vecs[:, start:start + _CHUNK]
            t = np.zeros((D, B, v.shape[1]), dtype=complex)
            t[0] = v
            t = _propagate_kets(t.reshape((D,) + (2,) * K + (-1,)), steps, 1.0).reshape(D, B, -1)
            f, r = _weighted_reductions(t, w)
            field_m += f
            final += r
    else:
        ph = register_phases(K)
        field_m = np.zeros((D, D), dtype=complex)
        field_m[:B, :B] = reg.matrix * np.outer(ph.conj(), ph)
        final = QubitRegisterState.ground(K, reg.trace).matrix

    field_m = 0.5 * (field_m + field_m.conj().T)
    final = 0.5 * (final + final.conj().T)
    ground = QubitRegisterState.ground(K, reg.trace).matrix
    diagnostics = {
        "trace_drift": abs(float(np.trace(field_m).real) - reg.trace),
        "final_qubits_defect": float(np.max(np.abs(final - ground))),
    }
    return ReverseResult(
        field=DensityOperator(field_m, tail_mass=reg.tail_mass),
        final_qubits=QubitRegisterState(final, K, tail_mass=reg.tail_mass),
        engine_used=cfg.engine,
        diagnostics=diagnostics,
    )


# -- reconstruction ------------------------------------------------------------


def reconstruct(c, K: int, *, engine: Engine = "mixture") -> DensityOperator:
    """Field obtained by converting forward and then reversing the register."""
    rho = _as_density(c)
    cfg = ProtocolConfig(K, rho.dim, engine)
    fwd = convert_forward(rho, cfg)
    return convert_reverse(fwd.qubit_register, cfg).field


def reconstruct_single_sum(c, K: int) -> DensityOperator:
    """Candidate closed form ``c'_nm = sum_m' c[2^K m' + n, 2^K m' + m]``."""
    rho = _as_density(c)
    B = 1 << K
    out = np.zeros_like(rho.matrix)
    out[:B, :B] = np.einsum("anam->nm", _blocks(rho.matrix, K))
    return DensityOperator(out, tail_mass=rho.tail_mass)


def reconstruct_double_sum(c, K: int) -> DensityOperator:
    """Literal ``c'_nm = sum_{n', m'} c[2^K n' + n, 2^K m' + m]``.

    Kept for comparison only: cross-block terms make it non-trace-preserving
    for states with coherences between blocks.
    """
    rho = _as_density(c)
    B = 1 << K
    out = np.zeros_like(rho.matrix)
    out[:B, :B] = np.einsum("anbm->nm", _blocks(rho.matrix, K))
    return DensityOperator(out, tail_mass=rho.tail_mass)


def product_defect(js: JointState) -> float:
    """Max-norm of ``rho - rho_field (x) rho_qubit_n (x) ... (x) rho_qubit_1``."""
    rho = js.density()
    dims = js.dims
    parts = [partial_trace(rho, dims, [i]) for i in range(len(dims))]
    tr = float(np.trace(rho).real)
    prod = tensor(*parts) / tr ** (len(parts) - 1)
    return float(np.max(np.abs(rho - prod)))


# -- round trip ----------------------------------------------------------------


@dataclass
class ConversionReport:
    config: ProtocolConfig
    forward: ConversionResult
    reconstruction: DensityOperator
    fidelity: float
    vacuum_closeness: float
    entropy: metrics.EntropyReport
    engine_deltas: dict
    reconstruction_checks: dict
    diagnostics: dict


def _max_delta(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.max(np.abs(a - b)))


def roundtrip(state, cfg: ProtocolConfig, *, cross_check: bool | None = None) -> ConversionReport:
    """Forward conversion, reverse conversion and the resulting metrics.

    The joint-engine cross-check runs automatically when ``D * 2^K`` is at
    most 1024; pass ``cross_check`` to force it on or off.
    """
    state = _prepare(state, cfg)
    rho = _as_density(state)
    fwd = convert_forward(state, cfg)
    rev = convert_reverse(fwd.qubit_register, cfg)
    recon = rev.field

    fidelity = metrics.uhlmann_fidelity(rho, recon)
    fprime = metrics.vacuum_closeness(fwd.residue_field)
    ent = metrics.entropy_balance(fwd, rho)

    if cross_check is None:
        cross_check = cfg.D * cfg.block <= JOINT_ORACLE_LIMIT
    deltas: dict = {}
    others = [e for e in ENGINES if e != cfg.engine]
    if not cross_check:
        others = [e for e in others if e != "joint"]
    for eng in others:
        alt = ProtocolConfig(cfg.K, cfg.D, eng)
        other = convert_forward(state, alt)
        deltas[eng] = {
            "register": _max_delta(other.qubit_register.matrix, fwd.qubit_register.matrix),
            "residue": _max_delta(other.residue_field.matrix, fwd.residue_field.matrix),
        }

    single = reconstruct_single_sum(rho, cfg.K)
    double = reconstruct_double_sum(rho, cfg.K)
    checks = {
        "single_sum_delta": _max_delta(single.matrix, recon.matrix),
        "double_sum_delta": _max_delta(double.matrix, recon.matrix),
        "double_sum_trace_deviation": abs(double.trace - rho.trace),
    }
    diagnostics = dict(fwd.diagnostics)
    diagnostics["reverse_trace_drift"] = rev.diagnostics["trace_drift"]
    diagnostics["final_qubits_defect"] = rev.diagnostics["final_qubits_defect"]
    return ConversionReport(
        config=cfg,
        forward=fwd,
        reconstruction=recon,
        fidelity=fidelity,
        vacuum_closeness=fprime,
        entropy=ent,
        engine_deltas=deltas,
        reconstruction_checks=checks,
        diagnostics=diagnostics,
    )
