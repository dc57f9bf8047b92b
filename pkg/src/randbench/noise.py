"""Gate error models.

Every noisy gate is the ideal conjugation followed by an error channel,
``Lambda @ U``.  Pulse-correlated errors (``OverRotation``, ``RfEnsemble``) are
fractional amplitude errors: a pulse meant to rotate by ``theta`` rotates by
``(1 + eps) * theta`` about the same signed axis.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .clifford import (
    PauliLabel,
    SPGate,
    SymplecticLabel,
    MultiGateLabel,
    gate_unitary,
    embed_single,
    rotation,
)
from .liouville import (
    Superoperator,
    ValidationError,
    avg_gate_fidelity_from_p,
    depolarize,
    depolarizing_parameter,
    identity_superop,
    tensor_superops,
    unitary_to_superop,
)


@dataclass(frozen=True)
class RfDistribution:
    """Discrete distribution ``g(eps)`` of fractional drive-amplitude offsets."""

    epsilons: tuple
    weights: tuple

    def __post_init__(self):
        eps = np.asarray(self.epsilons, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if eps.ndim != 1 or eps.shape != w.shape or eps.size == 0:
            raise ValidationError("epsilons and weights must be equal-length 1-D sequences")
        if not np.all(np.isfinite(eps)):
            raise ValidationError("epsilon values must be finite")
        if np.any(w < 0):
            raise ValidationError("weights must be non-negative")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValidationError(f"weights sum to {w.sum():.15g}, not 1")
        object.__setattr__(self, "epsilons", tuple(eps.tolist()))
        object.__setattr__(self, "weights", tuple(w.tolist()))

    @classmethod
    def normalized(cls, epsilons: Sequence[float], weights: Sequence[float]) -> "RfDistribution":
        w = np.asarray(weights, dtype=float)
        if np.any(w < 0) or w.sum() <= 0:
            raise ValidationError("weights must be non-negative with a positive sum")
        return cls(tuple(epsilons), tuple(w / w.sum()))

    @classmethod
    def point(cls, eps: float) -> "RfDistribution":
        return cls((eps,), (1.0,))

    @classmethod
    def two_point(cls) -> "RfDistribution":
        """Default: a well-calibrated majority plus a strongly detuned minority."""
        return cls((0.01, 0.15), (0.7, 0.3))

    @classmethod
    def uniform(cls, half_width: float, n_points: int = 81) -> "RfDistribution":
        """Midpoint-rule discretization of a uniform density on ``[-w, w]``."""
        edges = np.linspace(-half_width, half_width, n_points + 1)
        mids = 0.5 * (edges[1:] + edges[:-1])
        return cls(tuple(mids), tuple(np.full(n_points, 1.0 / n_points)))

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        idx = rng.choice(len(self.epsilons), size=size, p=np.asarray(self.weights))
        return np.asarray(self.epsilons)[idx]


@dataclass(frozen=True)
class Ideal:
    pass


@dataclass(frozen=True)
class Depolarizing:
    """Register-wide depolarizing channel with parameter ``p`` after each gate."""

    p: float


@dataclass(frozen=True)
class LocalDepolarizing:
    """Independent single-qubit depolarizing channels, one parameter per qubit."""

    p: tuple


@dataclass(frozen=True)
class Relaxation:
    """Per-qubit T1/T2 (seconds) acting on every qubit for each gate's duration."""

    t1: tuple
    t2: tuple

    def __post_init__(self):
        t1 = tuple(np.atleast_1d(np.asarray(self.t1, dtype=float)).tolist())
        t2 = tuple(np.atleast_1d(np.asarray(self.t2, dtype=float)).tolist())
        if len(t1) != len(t2):
            raise ValidationError("t1 and t2 need one entry per qubit")
        for a, b in zip(t1, t2):
            _check_t1_t2(a, b)
        object.__setattr__(self, "t1", t1)
        object.__setattr__(self, "t2", t2)

    def for_qubit(self, q: int) -> tuple[float, float]:
        if len(self.t1) == 1:
            return self.t1[0], self.t2[0]
        return self.t1[q], self.t2[q]


@dataclass(frozen=True)
class OverRotation:
    """Fixed fractional over-rotation ``epsilon`` on every pulse."""

    epsilon: float


@dataclass(frozen=True)
class RfEnsemble:
    """Over-rotation with ``epsilon`` drawn from ``distribution`` once per run."""

    distribution: RfDistribution


NoiseModel = Union[Ideal, Depolarizing, LocalDepolarizing, Relaxation, OverRotation, RfEnsemble]


@dataclass(frozen=True)
class GateTiming:
    """Gate durations in seconds.

    Z rotations in frame-change mode and the identity Pauli take the duration
    of the pulse they stand in for.  ``cnot_overrides`` maps an unordered qubit
    pair (``frozenset``) to a CNOT duration that replaces ``cnot``.
    """

    pi2: float = 24e-6
    pi: float = 48e-6
    single: float = 1.2e-3
    cnot: float = 2.4e-3
    wait: float = 1.2e-3
    cnot_overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        vals = [self.pi2, self.pi, self.single, self.cnot, self.wait, *self.cnot_overrides.values()]
        if any(v < 0 for v in vals):
            raise ValidationError("gate durations must be non-negative")

    def __hash__(self):
        return hash((self.pi2, self.pi, self.single, self.cnot, self.wait,
                     tuple(sorted((tuple(sorted(k)), v) for k, v in self.cnot_overrides.items()))))

    def duration(self, gate) -> float:
        if isinstance(gate, PauliLabel):
            return self.pi
        if isinstance(gate, SymplecticLabel):
            return self.pi2
        if isinstance(gate, SPGate):
            return self.pi + self.pi2
        if gate.kind == "CNOT":
            return self.cnot_overrides.get(frozenset(gate.qubits), self.cnot)
        if gate.kind == "WAIT":
            return self.wait
        return self.single


def _check_t1_t2(t1: float, t2: float) -> None:
    if t1 <= 0 or t2 <= 0:
        raise ValidationError("T1 and T2 must be positive")
    if t2 > 2 * t1 * (1 + 1e-12):
        raise ValidationError(f"T2={t2} exceeds 2*T1={2 * t1}")


def relaxation_superop(t1: float, t2: float, tau: float) -> Superoperator:
    """Zero-temperature amplitude damping (rate 1/T1) plus pure dephasing.

    Populations relax toward ``|0><0|`` as ``exp(-tau/T1)``; coherences decay as
    ``exp(-tau/T2)``.  ``t1 = inf`` gives pure dephasing.
    """
    _check_t1_t2(t1, t2)
    if tau < 0:
        raise ValidationError("duration must be non-negative")
    lam1 = np.exp(-tau / t1)
    lam2 = np.exp(-tau / t2)
    # column-stacked basis order: rho00, rho10, rho01, rho11
    m = np.zeros((4, 4), dtype=complex)
    m[0, 0] = 1.0
    m[0, 3] = 1.0 - lam1
    m[3, 3] = lam1
    m[1, 1] = lam2
    m[2, 2] = lam2
    return Superoperator(1, m)


def relaxation_register(model: Relaxation, tau: float, n_qubits: int) -> Superoperator:
    return tensor_superops(
        [relaxation_superop(*model.for_qubit(q), tau) for q in range(n_qubits)]
    )


def local_depolarizing_register(ps: Sequence[float]) -> Superoperator:
    return tensor_superops([depolarize(p, 1) for p in ps])


def overrotation_superop(axis: str, nominal_angle: float, epsilon: float, sign: int = 1) -> Superoperator:
    """Extra rotation by ``epsilon * nominal_angle`` about the pulse's own axis."""
    return unitary_to_superop(overrotation_unitary(axis, nominal_angle, epsilon, sign))


def overrotation_unitary(axis: str, nominal_angle: float, epsilon: float, sign: int = 1) -> np.ndarray:
    return rotation(axis, sign, epsilon * nominal_angle)


def involution_overrotation(u: np.ndarray, epsilon: float) -> np.ndarray:
    """Error unitary ``U^(1+eps) U^dag`` for a Hermitian involution ``U``.

    ``U = exp(i pi P)`` with ``P = (I - U)/2`` a projector, so the error is
    ``exp(i pi eps P) = I + (exp(i pi eps) - 1) P``.
    """
    d = u.shape[0]
    proj = (np.eye(d) - u) / 2
    return np.eye(d) + (np.exp(1j * np.pi * epsilon) - 1) * proj


def _pulse_error(gate, eps: float) -> np.ndarray:
    if isinstance(gate, PauliLabel):
        return overrotation_unitary(gate.axis, np.pi, eps, gate.sign)
    return overrotation_unitary(gate.axis, np.pi / 2, eps, gate.sign)


def _epsilon(model: NoiseModel, eps_sample: Optional[float]) -> float:
    if isinstance(model, OverRotation):
        return model.epsilon if eps_sample is None else eps_sample
    if eps_sample is None:
        raise ValidationError("RfEnsemble noise needs an epsilon sample")
    return eps_sample


def noisy_gate(
    gate,
    model: NoiseModel,
    timing: GateTiming = GateTiming(),
    eps_sample: Optional[float] = None,
    n_qubits: Optional[int] = None,
    qubit: int = 0,
) -> Superoperator:
    """Superoperator ``Lambda @ U`` of one gate under ``model``.

    Pulse labels (Pauli, symplectic, or an SP pair) act on ``qubit`` of an
    ``n_qubits`` register (default 1).  Multi-qubit labels need ``n_qubits``.
    An SP pair receives one depolarizing channel for the pair and per-pulse
    coherent or relaxation errors.
    """
    if isinstance(gate, MultiGateLabel):
        if n_qubits is None:
            raise ValidationError("n_qubits is required for multi-qubit gates")
        return _noisy_multi(gate, model, timing, eps_sample, n_qubits)
    n = 1 if n_qubits is None else n_qubits
    if isinstance(gate, SPGate):
        first = _noisy_pulse(gate.pauli, model, timing, eps_sample, n, qubit)
        second = _noisy_pulse(gate.symplectic, model, timing, eps_sample, n, qubit)
        out = second @ first
        return _step_depolarizing(model, n) @ out
    out = _noisy_pulse(gate, model, timing, eps_sample, n, qubit)
    return _step_depolarizing(model, n) @ out


def _step_depolarizing(model: NoiseModel, n: int) -> Superoperator:
    if isinstance(model, Depolarizing):
        return depolarize(model.p, n)
    if isinstance(model, LocalDepolarizing):
        if len(model.p) != n:
            raise ValidationError(f"LocalDepolarizing has {len(model.p)} entries for {n} qubits")
        return local_depolarizing_register(model.p)
    return identity_superop(n)


def _noisy_pulse(gate, model, timing, eps_sample, n, qubit) -> Superoperator:
    u = embed_single(gate.unitary(), qubit, n)
    ideal = unitary_to_superop(u)
    if isinstance(model, (OverRotation, RfEnsemble)):
        if getattr(gate, "axis", None) == "I":
            return ideal
        err = embed_single(_pulse_error(gate, _epsilon(model, eps_sample)), qubit, n)
        return unitary_to_superop(err) @ ideal
    if isinstance(model, Relaxation):
        return relaxation_register(model, timing.duration(gate), n) @ ideal
    return ideal


def _noisy_multi(gate, model, timing, eps_sample, n) -> Superoperator:
    u = gate_unitary(gate, n)
    ideal = unitary_to_superop(u)
    if isinstance(model, Ideal):
        return ideal
    if isinstance(model, (Depolarizing, LocalDepolarizing)):
        return _step_depolarizing(model, n) @ ideal
    if isinstance(model, Relaxation):
        return relaxation_register(model, timing.duration(gate), n) @ ideal
    if gate.kind == "WAIT":
        return ideal
    err = involution_overrotation(u, _epsilon(model, eps_sample))
    return unitary_to_superop(err) @ ideal


def error_per_gate_lower_bound(t1: float, t2: float, tau: float) -> float:
    """Average gate infidelity of pure T1/T2 decoherence acting for ``tau``."""
    p = depolarizing_parameter(relaxation_superop(t1, t2, tau))
    return 1.0 - avg_gate_fidelity_from_p(p, 2)


def register_error_per_step(model: Relaxation, tau: float, n_qubits: int) -> float:
    """Average gate infidelity of register-wide relaxation for ``tau`` (independent qubits)."""
    p = depolarizing_parameter(relaxation_register(model, tau, n_qubits))
    return 1.0 - avg_gate_fidelity_from_p(p, 2**n_qubits)
