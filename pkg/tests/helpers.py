"""Independent brute-force constructions used as oracles."""

import numpy as np

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.diag([1.0, -1.0]).astype(complex)
PAULIS = {"x": X, "y": Y, "z": Z}


def embed(ops: dict, N: int) -> np.ndarray:
    """Kronecker product with ``ops[site]`` at its site and identities elsewhere."""
    out = np.ones((1, 1), dtype=complex)
    for i in range(N):
        out = np.kron(out, ops.get(i, I2))
    return out


def brute_hamiltonian(J, h, m, N, l_max):
    """Deformed Ising Hamiltonian assembled directly from its defining formula."""
    if N > 1:
        l = np.array([-l_max + 2 * l_max * i / (N - 1) for i in range(N)])
    else:
        l = np.zeros(1)
    c = np.cosh(l)
    H = np.zeros((2**N, 2**N), dtype=complex)
    for i in range(N - 1):
        H += -(J / 4) * (c[i] + c[i + 1]) / 2 * embed({i: Z, i + 1: Z}, N)
    for i in range(N):
        H += (h / 2) * c[i] * embed({i: X}, N) + (m / 2) * c[i] * embed({i: Z}, N)
    return H


def expm_h(H, t):
    w, v = np.linalg.eigh(H)
    return (v * np.exp(-1j * w * t)) @ v.conj().T
