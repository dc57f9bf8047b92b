import itertools

import numpy as np
import pytest
from scipy.linalg import expm

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
SIGMA = {"I": np.eye(2, dtype=complex), "X": SX, "Y": SY, "Z": SZ}


def expm_rotation(axis: str, angle: float) -> np.ndarray:
    """exp(-i angle/2 sigma) via a generic matrix exponential."""
    return expm(-0.5j * angle * SIGMA[axis])


def sp_unitaries_oracle():
    """The 48 Pauli-then-symplectic unitaries built from matrix exponentials."""
    out = []
    for pa, ps in itertools.product("IXYZ", (1, -1)):
        p = np.eye(2, dtype=complex) if pa == "I" else expm_rotation(pa, ps * np.pi)
        for sa, ss in itertools.product("XYZ", (1, -1)):
            out.append(expm_rotation(sa, ss * np.pi / 2) @ p)
    return out


def random_unitary(rng, d):
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_kraus(rng, d=2, k=3):
    """Kraus operators of a random CPTP map from a random isometry."""
    v = random_unitary(rng, d * k)[:, :d]
    return [v[i * d:(i + 1) * d, :] for i in range(k)]


def apply_kraus(kraus, rho):
    return sum(k @ rho @ k.conj().T for k in kraus)


def kron_all(ops):
    out = np.eye(1, dtype=complex)
    for o in ops:
        out = np.kron(out, o)
    return out


def pauli_string_matrix(ops: str) -> np.ndarray:
    return kron_all([SIGMA[c] for c in ops])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
