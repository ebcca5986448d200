"""Exact simulation of field-to-qubit state conversion with nonlinear Jaynes-Cummings steps."""

__version__ = "0.1.0"

from .dynamics import GuardViolation, JointState, StepSpec, apply_step, protocol_step, step_unitary
from .metrics import (
    coherent_fprime_closed,
    entropy_balance,
    thermal_closed_forms,
    uhlmann_fidelity,
    vacuum_closeness,
    von_neumann_entropy,
)
from .protocol import (
    ProtocolConfig,
    QubitRegisterState,
    convert_forward,
    convert_reverse,
    qubit_state_formula,
    reconstruct,
    residue_formula,
    roundtrip,
)
from .states import DensityOperator, PureState, QubitState, coherent_state, number_state, thermal_state, validate_density
