"""Random-instance generators and qubit scenario builders shared by the tests."""

import numpy as np

from holab.curves import HamiltonianSpec, TimeGrid, evolve_density, sample_curve
from holab.operator_core import PAULI_X, PAULI_Y, PAULI_Z

SIGMAS = np.array([PAULI_X, PAULI_Y, PAULI_Z])


def rand_complex(rng, *shape):
    return rng.normal(size=shape) + 1j * rng.normal(size=shape)


def rand_density(rng, n, rank=None, floor=0.0):
    k = n if rank is None else rank
    a = rand_complex(rng, n, k)
    rho = a @ a.conj().T
    rho = rho / np.trace(rho).real
    if floor:
        rho = (1 - n * floor) * rho + floor * np.eye(n)
    return rho


def rand_hermitian(rng, n):
    a = rand_complex(rng, n, n)
    return (a + a.conj().T) / 2


def rand_tangent(rng, n):
    h = rand_hermitian(rng, n)
    return h - np.trace(h) / n * np.eye(n)


def rand_skew(rng, n):
    a = rand_complex(rng, n, n)
    return (a - a.conj().T) / 2


def rand_unitary(rng, n):
    q, r = np.linalg.qr(rand_complex(rng, n, n))
    return q * (np.diag(r) / np.abs(np.diag(r)))


def rand_axis(rng):
    v = rng.normal(size=3)
    return v / np.linalg.norm(v)


def n_sigma(axis):
    return np.einsum("i,ijk->jk", np.asarray(axis, dtype=float), SIGMAS)


def qubit_circle(p0, axis=(0.0, -1.0, 0.0), tau=np.pi, steps=4000):
    """rho_t = U_t diag(p0, 1 - p0) U_t^dagger with U_t = cos t - i sin t n.sigma."""
    h = HamiltonianSpec.constant(n_sigma(axis))
    return evolve_density(np.diag([p0, 1.0 - p0]), h, TimeGrid(0.0, tau, steps))


def random_unitary_loop(rng, rho0, steps=2000):
    """Closed curve rho_t = U_t rho0 U_t^dagger with U_t periodic in t on [0, 2 pi]."""
    n = rho0.shape[0]
    v = rand_unitary(rng, n)
    levels = rng.integers(-3, 4, size=n).astype(float)
    h = v @ np.diag(levels) @ v.conj().T
    return evolve_density(rho0, HamiltonianSpec.constant(h), TimeGrid(0.0, 2 * np.pi, steps))


def random_faithful_loop(rng, n, steps=2000, floor=0.05):
    """Closed curve rho_t proportional to A_t A_t^dagger + floor, A_t = A0 + A1 cos t + A2 sin t."""
    a0, a1, a2 = (rand_complex(rng, n, n) for _ in range(3))
    scale = 0.3 * rng.uniform(0.2, 1.0)

    def rho(t):
        a = a0 + scale * (a1 * np.cos(t) + a2 * np.sin(t))
        m = a @ a.conj().T
        m = m / np.trace(m).real
        return (1 - n * floor) * m + floor * np.eye(n)

    return sample_curve(rho, TimeGrid(0.0, 2 * np.pi, steps))


# acceptance bookkeeping, printed by the terminal-summary hook in conftest
ACCEPTANCE_RESULTS: dict[int, tuple[bool, str]] = {}


def report(number: int, ok: bool, detail: str) -> None:
    ACCEPTANCE_RESULTS[number] = (bool(ok), detail)
    print(f"acceptance {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail
