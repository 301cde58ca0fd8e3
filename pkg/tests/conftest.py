import numpy as np
import pytest
from hypothesis import settings
from scipy.linalg import expm

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]])
Z = np.diag([1.0, -1.0]).astype(complex)
XXYYZZ = np.kron(X, X) + np.kron(Y, Y) + np.kron(Z, Z)


def heis_oracle(a):
    """exp(-i a (XX + YY + ZZ)) by scipy's Pade exponential."""
    return expm(-1j * a * XXYYZZ)


def rz_oracle(theta):
    return expm(-0.5j * theta * Z)


def kron_all(mats):
    out = np.eye(1, dtype=complex)
    for m in mats:
        out = np.kron(out, m)
    return out


def embed(n, ops):
    """Operator acting as ops[q] on qubit q (qubit 0 most significant)."""
    return kron_all([ops.get(q, np.eye(2)) for q in range(n)])


def hamiltonian_oracle(n, edges, disorders):
    h = np.zeros((2**n, 2**n), dtype=complex)
    for i, j in edges:
        for p in (X, Y, Z):
            h += embed(n, {i: p, j: p})
    for q, d in enumerate(disorders):
        h += d * embed(n, {q: Z})
    return h


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
