"""Random test-state generators shared by the test modules."""

import numpy as np

from fockbit.states import QubitState, validate_density


def random_density_matrix(rng, D, support=None, rank=None):
    """Ginibre density matrix, optionally confined to levels ``< support``."""
    s = D if support is None else support
    r = s if rank is None else rank
    g = rng.standard_normal((s, r)) + 1j * rng.standard_normal((s, r))
    rho = np.zeros((D, D), dtype=complex)
    rho[:s, :s] = g @ g.conj().T
    rho /= np.trace(rho).real
    return validate_density(rho)


def random_qubit(rng):
    """Uniformly random mixed qubit from a Bloch vector inside the ball."""
    direction = rng.standard_normal(3)
    direction /= np.linalg.norm(direction)
    r = rng.uniform(0, 1) ** (1 / 3)
    x, y, z = r * direction
    return QubitState(alpha=(1 + z) / 2, beta=complex(x, -y) / 2)


def random_hermitian(rng, n):
    b = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return (b + b.conj().T) / 2
