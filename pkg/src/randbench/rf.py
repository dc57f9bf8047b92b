"""Analytic fidelity decay under drive-amplitude (r.f.) inhomogeneity.

A run with fractional amplitude offset ``eps`` over-rotates every pulse by
``eps`` times its nominal angle.  For one SP pair the accumulated error
``E = R_S(pi eps/2) (S R_P(pi eps) S^dag)`` is a single rotation whose angle
depends only on the relative orientation of the two pulse axes.  Averaged
over the 48 pairs the error channel is depolarizing with parameter
:func:`pbar`, so the decay at fixed ``eps`` is exponential and the ensemble
decay is a ``g``-weighted sum of exponentials.
"""
from __future__ import annotations

import dataclasses
import enum
from dataclasses import dataclass

import numpy as np

from . import clifford as cl
from .clifford import PauliLabel, SymplecticLabel
from .liouville import ValidationError
from .noise import Ideal, RfDistribution, RfEnsemble
from .protocol import DecayCurve, ExperimentConfig, run_single_qubit_rb

__all__ = [
    "RfDistribution",
    "StrengthClass",
    "classify_sp_pair",
    "class_error_angle",
    "class_depolarizing_parameter",
    "pbar",
    "pair_error_unitary",
    "analytic_decay",
    "RfComparison",
    "compare_mc_vs_analytic",
]


class StrengthClass(enum.Enum):
    PARALLEL = "parallel"
    ANTIPARALLEL = "antiparallel"
    PERPENDICULAR = "perpendicular"

    @property
    def probability(self) -> float:
        return _PROBABILITY[self]

    def angle(self, eps):
        return class_error_angle(self, eps)


_PROBABILITY = {
    StrengthClass.PARALLEL: 1 / 8,
    StrengthClass.ANTIPARALLEL: 3 / 8,
    StrengthClass.PERPENDICULAR: 1 / 2,
}


def classify_sp_pair(p: PauliLabel, s: SymplecticLabel) -> StrengthClass:
    """Strength class of the accumulated over-rotation of the pair ``(p, s)``.

    An identity Pauli pulse adds no rotation, which leaves the symplectic
    pulse's own ``pi eps / 2`` error: the same strength as opposite axes.
    """
    if p.axis == "I":
        return StrengthClass.ANTIPARALLEL
    if p.axis == s.axis:
        return StrengthClass.PARALLEL if p.sign == s.sign else StrengthClass.ANTIPARALLEL
    return StrengthClass.PERPENDICULAR


def class_error_angle(cls: StrengthClass, eps):
    eps = np.asarray(eps, dtype=float)
    if cls is StrengthClass.PARALLEL:
        return 1.5 * np.pi * eps
    if cls is StrengthClass.ANTIPARALLEL:
        return 0.5 * np.pi * np.abs(eps)
    c = np.cos(np.pi * eps / 4) * np.cos(np.pi * eps / 2)
    return 2 * np.arccos(np.clip(c, -1.0, 1.0))


def _p_of_angle(alpha):
    return (4 * np.cos(alpha / 2) ** 2 - 1) / 3


def class_depolarizing_parameter(cls: StrengthClass, eps):
    """``(4 cos^2(alpha/2) - 1) / 3`` for the class's error angle ``alpha``."""
    return _p_of_angle(class_error_angle(cls, eps))


def pbar(eps):
    """Class-weighted average depolarizing parameter at offset ``eps``."""
    return sum(c.probability * class_depolarizing_parameter(c, eps) for c in StrengthClass)


def pair_error_unitary(p: PauliLabel, s: SymplecticLabel, eps: float) -> np.ndarray:
    """Dense error ``U_actual U_ideal^dag`` of the over-rotated pair ``(p, s)``."""
    ideal_p, ideal_s = p.unitary(), s.unitary()
    actual_p = cl.rotation(p.axis, p.sign, np.pi * (1 + eps))
    actual_s = cl.rotation(s.axis, s.sign, np.pi / 2 * (1 + eps))
    return (actual_s @ actual_p) @ (ideal_s @ ideal_p).conj().T


def analytic_decay(g: RfDistribution, lengths, rho0_purity: float = 1.0, dim: int = 2) -> DecayCurve:
    """``F(n) = sum_eps g(eps) [pbar(eps)^n (Tr rho0^2 - 1/D) + 1/D]``.

    The returned curve carries zero standard deviation: it is exact.
    """
    if not isinstance(g, RfDistribution):
        raise ValidationError("analytic_decay needs an RfDistribution")
    w = np.asarray(g.weights)
    if abs(w.sum() - 1) > 1e-12:
        raise ValidationError("distribution is not normalized")
    lengths = np.asarray(lengths, dtype=int)
    pb = np.asarray([pbar(e) for e in g.epsilons])
    powers = pb[None, :] ** lengths[:, None]
    mean = (powers * (rho0_purity - 1 / dim) + 1 / dim) @ w
    return DecayCurve(lengths, mean, np.zeros_like(mean), np.zeros(len(lengths), dtype=int), dim)


NUMERICAL_SE_FLOOR = 1e-12


@dataclass
class RfComparison:
    lengths: np.ndarray
    analytic: np.ndarray
    monte_carlo: np.ndarray
    standard_error: np.ndarray
    z: np.ndarray
    n_runs: np.ndarray
    threshold: float = 3.0

    @property
    def passed(self) -> bool:
        return bool(np.all(np.abs(self.z) <= self.threshold))

    def rows(self):
        return list(zip(self.lengths.tolist(), self.analytic.tolist(), self.monte_carlo.tolist(),
                        self.standard_error.tolist(), self.z.tolist()))


def compare_mc_vs_analytic(g: RfDistribution, cfg: ExperimentConfig, workers: int = 1,
                           threshold: float = 3.0) -> RfComparison:
    """Run the single-qubit protocol under ``RfEnsemble(g)`` and z-score it
    against :func:`analytic_decay`.

    The analytic model covers over-rotated plain pulses between an ideal
    preparation and an ideal recovery, so the run forces ``noisy_recovery``
    off and rejects composite pulses or frame-change Z pulses.
    """
    if cfg.n_qubits != 1:
        raise ValidationError("the r.f. comparison is single-qubit only")
    if not isinstance(cfg.noise, (RfEnsemble, Ideal)):
        raise ValidationError(f"expected RfEnsemble noise, got {type(cfg.noise).__name__}")
    if isinstance(cfg.noise, RfEnsemble) and cfg.noise.distribution != g:
        raise ValidationError("config distribution differs from the analytic one")
    if cfg.pulse_shape != "plain":
        raise ValidationError("the analytic model assumes plain pulses")
    if cfg.z_mode != "physical":
        raise ValidationError("the analytic model assumes physical Z pulses")
    if cfg.measurement_sigma:
        raise ValidationError("readout noise is not part of the analytic model")
    mc_cfg = dataclasses.replace(cfg, noise=RfEnsemble(g), noisy_recovery=False)
    mc = run_single_qubit_rb(mc_cfg, workers=workers)
    an = analytic_decay(g, mc.lengths)
    # simulated fidelities carry ~1e-15 of rounding; below this floor a
    # standard error says nothing about sampling
    se = np.maximum(mc.standard_error(), NUMERICAL_SE_FLOOR)
    z = (mc.mean - an.mean) / se
    return RfComparison(mc.lengths, an.mean, mc.mean, se, z, mc.n_runs, threshold)
