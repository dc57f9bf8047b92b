"""BB1 composite pulses and their calibration-error robustness."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .clifford import I2, X, Y, Z


@dataclass(frozen=True)
class RotationStep:
    """Rotation by ``angle`` about the equatorial axis at azimuth ``phase``."""

    angle: float
    phase: float = 0.0

    def __post_init__(self):
        if not self.angle > 0:
            raise ValueError("flip angle must be positive")

    def unitary(self, epsilon: float = 0.0) -> np.ndarray:
        theta = self.angle * (1.0 + epsilon)
        n_sigma = np.cos(self.phase) * X + np.sin(self.phase) * Y
        return np.cos(theta / 2) * I2 - 1j * np.sin(theta / 2) * n_sigma


def bb1_phases(theta: float) -> tuple[float, float]:
    phi1 = float(np.arccos(-theta / (4 * np.pi)))
    return phi1, 3 * phi1


def bb1_expand(theta: float, phase: float = 0.0, placement: str = "before") -> list[RotationStep]:
    """Expand ``R_phase(theta)`` into a BB1 sequence, listed in time order.

    ``placement`` puts the 180-360-180 correction block before the pulse, after
    it, or between two halves of it (``"symmetric"``).
    """
    if not (0 < theta <= 2 * np.pi):
        raise ValueError(f"flip angle {theta} outside (0, 2*pi]")
    phi1, phi2 = bb1_phases(theta)
    block = [
        RotationStep(np.pi, phase + phi1),
        RotationStep(2 * np.pi, phase + phi2),
        RotationStep(np.pi, phase + phi1),
    ]
    if placement == "before":
        return block + [RotationStep(theta, phase)]
    if placement == "after":
        return [RotationStep(theta, phase)] + block
    if placement == "symmetric":
        half = RotationStep(theta / 2, phase)
        return [half] + block + [half]
    raise ValueError(f"unknown placement {placement!r}")


def realize(steps: Sequence[RotationStep], epsilon: float = 0.0) -> np.ndarray:
    """Unitary of the sequence with every flip angle scaled by ``1 + epsilon``."""
    u = np.eye(2, dtype=complex)
    for s in steps:
        u = s.unitary(epsilon) @ u
    return u


def gate_infidelity(target: np.ndarray, actual: np.ndarray) -> float:
    """Phase-insensitive ``1 - |Tr(U_target^dag U_actual) / d|^2``.

    For one qubit this is evaluated as the squared weight of the traceless
    Pauli components of ``V = U_target^dag U_actual``, which keeps full relative
    precision when the infidelity is far below machine epsilon.
    """
    v = target.conj().T @ actual
    d = v.shape[0]
    if d == 2:
        comps = [np.trace(s @ v) / 2 for s in (X, Y, Z)]
        return float(sum(abs(c) ** 2 for c in comps))
    overlap = np.trace(v) / d
    return float(max(0.0, 1.0 - abs(overlap) ** 2))


def plain_infidelity(theta: float, epsilon: float, phase: float = 0.0) -> float:
    target = RotationStep(theta, phase).unitary()
    return gate_infidelity(target, RotationStep(theta, phase).unitary(epsilon))


def bb1_infidelity(theta: float, epsilon: float, phase: float = 0.0, placement: str = "before") -> float:
    target = RotationStep(theta, phase).unitary()
    return gate_infidelity(target, realize(bb1_expand(theta, phase, placement), epsilon))


def bb1_error_unitary(theta: float, epsilon: float, placement: str = "before") -> np.ndarray:
    """``U_bb1(eps) U_target^dag`` for a pulse about +x; conjugate to move the axis."""
    target = RotationStep(theta, 0.0).unitary()
    return realize(bb1_expand(theta, 0.0, placement), epsilon) @ target.conj().T


def loglog_slope(eps: np.ndarray, infid: np.ndarray) -> float:
    """Least-squares slope of ``log(infidelity)`` against ``log(eps)``."""
    slope, _ = np.polyfit(np.log(eps), np.log(infid), 1)
    return float(slope)


def scan(theta: float, eps_values: Sequence[float], placement: str = "before") -> np.ndarray:
    """Rows of ``(eps, plain infidelity, BB1 infidelity)``."""
    rows = [(e, plain_infidelity(theta, e), bb1_infidelity(theta, e, placement=placement))
            for e in eps_values]
    return np.array(rows, dtype=float)
