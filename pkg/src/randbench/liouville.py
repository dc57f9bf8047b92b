"""Dense Liouville-space states and channels.

Density matrices are vectorized by column stacking, ``vec(rho) =
rho.reshape(-1, order="F")``.  With that convention ``vec(A rho B) =
(B^T kron A) vec(rho)``, so the conjugation ``rho -> U rho U^dag`` is the
superoperator ``conj(U) kron U``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
UNITARY_TOL = 1e-10


class ValidationError(ValueError):
    """Raised when an input violates a physical or dimensional precondition."""


def _dim_to_qubits(dim: int) -> int:
    n = int(round(np.log2(dim)))
    if n < 1 or 2**n != dim:
        raise ValidationError(f"dimension {dim} is not a power of two")
    return n


def vec(rho: np.ndarray) -> np.ndarray:
    """Column-stack a matrix (or a batch of matrices along axis 0)."""
    rho = np.asarray(rho)
    if rho.ndim == 2:
        return rho.reshape(-1, order="F")
    return np.swapaxes(rho, -1, -2).reshape(rho.shape[0], -1)


def unvec(v: np.ndarray) -> np.ndarray:
    """Inverse of :func:`vec`."""
    v = np.asarray(v)
    d = int(round(np.sqrt(v.shape[-1])))
    if v.ndim == 1:
        return v.reshape(d, d, order="F")
    return np.swapaxes(v.reshape(v.shape[0], d, d), -1, -2)


@dataclass(frozen=True)
class DensityState:
    """A density matrix stored as a column-stacked Liouville vector."""

    n_qubits: int
    vec: np.ndarray

    @property
    def dim(self) -> int:
        return 2**self.n_qubits

    @property
    def matrix(self) -> np.ndarray:
        return unvec(self.vec)

    @classmethod
    def from_matrix(cls, rho: np.ndarray, *, normalized: bool = True) -> "DensityState":
        rho = np.asarray(rho, dtype=complex)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise ValidationError(f"density matrix must be square, got {rho.shape}")
        n = _dim_to_qubits(rho.shape[0])
        herm_dev = np.max(np.abs(rho - rho.conj().T))
        if herm_dev > HERMITIAN_TOL:
            raise ValidationError(f"density matrix not Hermitian (max deviation {herm_dev:.3g})")
        if normalized and abs(np.trace(rho) - 1) > TRACE_TOL:
            raise ValidationError(f"trace {np.trace(rho).real:.15g} != 1")
        return cls(n, vec(rho))

    @classmethod
    def from_ket(cls, psi: np.ndarray) -> "DensityState":
        psi = np.asarray(psi, dtype=complex)
        psi = psi / np.linalg.norm(psi)
        return cls.from_matrix(np.outer(psi, psi.conj()))

    @classmethod
    def maximally_mixed(cls, n_qubits: int) -> "DensityState":
        d = 2**n_qubits
        return cls.from_matrix(np.eye(d) / d)

    def trace(self) -> complex:
        return np.trace(self.matrix)

    def purity(self) -> float:
        return float(np.vdot(self.vec, self.vec).real)

    def expectation(self, op: np.ndarray) -> float:
        return float(np.trace(op @ self.matrix).real)


@dataclass(frozen=True)
class Superoperator:
    """A linear map on Liouville vectors, shape ``(D^2, D^2)``."""

    n_qubits: int
    mat: np.ndarray

    @property
    def dim(self) -> int:
        return 2**self.n_qubits

    def __matmul__(self, other: "Superoperator") -> "Superoperator":
        """Composition: ``(a @ b)`` applies ``b`` first, then ``a``."""
        if self.n_qubits != other.n_qubits:
            raise ValidationError(
                f"cannot compose {self.n_qubits}- and {other.n_qubits}-qubit channels"
            )
        return Superoperator(self.n_qubits, self.mat @ other.mat)

    def dagger(self) -> "Superoperator":
        return Superoperator(self.n_qubits, self.mat.conj().T)

    def kron(self, other: "Superoperator") -> "Superoperator":
        """Tensor product of channels; ``self`` acts on the leading qubits."""
        return tensor_superops([self, other])

    def power(self, k: int) -> "Superoperator":
        return Superoperator(self.n_qubits, np.linalg.matrix_power(self.mat, k))


def identity_superop(n_qubits: int) -> Superoperator:
    return Superoperator(n_qubits, np.eye(4**n_qubits, dtype=complex))


def unitary_to_superop(u: np.ndarray) -> Superoperator:
    """Return the conjugation channel ``rho -> U rho U^dag`` as ``conj(U) kron U``."""
    u = np.asarray(u, dtype=complex)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise ValidationError(f"unitary must be square, got shape {u.shape}")
    n = _dim_to_qubits(u.shape[0])
    dev = np.linalg.norm(u @ u.conj().T - np.eye(u.shape[0]))
    if dev > UNITARY_TOL:
        raise ValidationError(f"matrix is not unitary: ||U U^dag - I|| = {dev:.3g}")
    return Superoperator(n, np.kron(u.conj(), u))


def kraus_to_superop(kraus_ops: Sequence[np.ndarray]) -> Superoperator:
    """Sum of ``conj(K) kron K`` over Kraus operators (no CP/TP check)."""
    ks = [np.asarray(k, dtype=complex) for k in kraus_ops]
    n = _dim_to_qubits(ks[0].shape[0])
    return Superoperator(n, sum(np.kron(k.conj(), k) for k in ks))


def tensor_superops(channels: Sequence[Superoperator]) -> Superoperator:
    """Channel acting as ``channels[0] (x) channels[1] (x) ...`` on a product register.

    Under column stacking ``vec(A (x) B)`` is not ``vec(A) (x) vec(B)``, so the
    Kronecker product of the superoperator matrices is permuted accordingly.
    """
    n_total = sum(c.n_qubits for c in channels)
    dims = [c.dim for c in channels]
    k = len(channels)
    # Each factor's matrix maps vec index (col_i, row_i) -> (col_i, row_i):
    # column stacking puts the row index fastest, i.e. vec[c*d + r].
    big = channels[0].mat.reshape(dims[0], dims[0], dims[0], dims[0])
    for c in channels[1:]:
        big = np.multiply.outer(big, c.mat.reshape(c.dim, c.dim, c.dim, c.dim))
    # big axes: for each factor i: (out_col_i, out_row_i, in_col_i, in_row_i)
    out_cols = [4 * i for i in range(k)]
    out_rows = [4 * i + 1 for i in range(k)]
    in_cols = [4 * i + 2 for i in range(k)]
    in_rows = [4 * i + 3 for i in range(k)]
    big = big.transpose(out_cols + out_rows + in_cols + in_rows)
    d = 2**n_total
    return Superoperator(n_total, big.reshape(d * d, d * d))


def apply(ch: Superoperator, state: DensityState) -> DensityState:
    if ch.n_qubits != state.n_qubits:
        raise ValidationError(
            f"channel acts on {ch.n_qubits} qubits, state has {state.n_qubits}"
        )
    return DensityState(state.n_qubits, ch.mat @ state.vec)


def depolarize(p: float, n_qubits: int) -> Superoperator:
    """Depolarizing channel ``rho -> p rho + (1 - p) I / D``.

    ``p`` may be negative down to ``-1/(D^2 - 1)``, the complete-positivity bound.
    """
    d = 2**n_qubits
    lo = -1.0 / (d * d - 1)
    if not (lo - 1e-15 <= p <= 1 + 1e-15):
        raise ValidationError(f"depolarizing parameter {p} outside CP range [{lo:.6g}, 1]")
    v_id = vec(np.eye(d)) / d
    # I/D * Tr(rho); Tr(rho) = vec(I)^dag vec(rho)
    replace = np.outer(v_id, vec(np.eye(d)).conj())
    mat = p * np.eye(d * d) + (1 - p) * replace
    return Superoperator(n_qubits, mat.astype(complex))


def depolarizing_parameter(ch: Superoperator) -> float:
    """``(Tr(mat) - 1) / (D^2 - 1)``."""
    d2 = ch.mat.shape[0]
    return float((np.trace(ch.mat).real - 1.0) / (d2 - 1))


def state_fidelity(state: DensityState, ref: DensityState) -> float:
    """Overlap ``Tr[rho^dag rho_ref]`` without a ``1/D`` prefactor."""
    if state.n_qubits != ref.n_qubits:
        raise ValidationError("state dimensions differ")
    return float(np.vdot(state.vec, ref.vec).real)


def avg_gate_fidelity_from_p(p: float, dim: int) -> float:
    return p + (1 - p) / dim


def twirl(ch: Superoperator, gates: Sequence[Superoperator]) -> Superoperator:
    """Average of ``C^-1 Lambda C`` over a list of unitary-derived superoperators."""
    if len(gates) == 0:
        raise ValidationError("twirl needs at least one gate")
    acc = np.zeros_like(ch.mat)
    for g in gates:
        if g.n_qubits != ch.n_qubits:
            raise ValidationError("gate and channel dimensions differ")
        # unitary superoperators satisfy C^-1 = C^dag
        acc += g.mat.conj().T @ ch.mat @ g.mat
    return Superoperator(ch.n_qubits, acc / len(gates))


def is_trace_preserving(ch: Superoperator, tol: float = TRACE_TOL) -> bool:
    d = ch.dim
    tr_row = vec(np.eye(d)).conj()
    return bool(np.max(np.abs(tr_row @ ch.mat - tr_row)) <= tol)
