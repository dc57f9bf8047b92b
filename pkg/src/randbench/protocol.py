"""Randomized-benchmarking experiment runners.

Single-qubit runs use the 48 Pauli-then-symplectic pulse pairs: one random
symplectic sequence per computational sequence, fresh random Paulis for every
randomization, and a final recovery pair that sends the tracked observable to
``+Z`` or ``-Z`` with equal probability.  Multi-qubit runs draw H/PHP/CNOT
generators, synthesize an H/PHP + CNOT recovery to ``+-Z I ... I`` and
parallelize the whole sequence into timesteps.

Fidelity of a run is ``1/d + (1 - 1/d) * s * <Z_readout>``, where ``s`` is the
sign of the ideal final observable and ``d`` the benchmarked dimension.  It is
1 for a perfect run and saturates at ``1/d`` under full depolarization.

Random streams are keyed on ``(seed, role, sequence index, length)`` so results
do not depend on worker count or execution order.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from . import clifford as cl
from .clifford import SignedPauli
from .liouville import ValidationError, depolarize, tensor_superops, unvec, vec
from .noise import (
    Depolarizing,
    GateTiming,
    Ideal,
    LocalDepolarizing,
    NoiseModel,
    OverRotation,
    Relaxation,
    RfEnsemble,
    involution_overrotation,
    relaxation_register,
)
from .pulses import bb1_error_unitary

SINGLE_QUBIT_LENGTHS = (1, 2, 4, 8, 16, 24, 32, 48, 64, 96, 128, 160, 192)
MULTI_QUBIT_LENGTHS = (1, 2, 4, 8, 12, 16, 24, 32, 48, 64, 80, 100, 120)

# role tags for random streams
_SEQ, _RUN = 0, 1


@dataclass(frozen=True)
class ExperimentConfig:
    """Benchmarking experiment description.

    ``n_randomizations`` (Pauli randomizations per truncation) only applies to
    the single-qubit protocol.  ``n_epsilon_samples`` multiplies the runs per
    point for ``RfEnsemble`` noise.  ``measurement_sigma`` adds Gaussian
    readout noise to every measured fidelity.
    """

    n_qubits: int = 1
    lengths: tuple = SINGLE_QUBIT_LENGTHS
    max_length: Optional[int] = None
    n_sequences: int = 4
    n_randomizations: int = 8
    noise: NoiseModel = Ideal()
    timing: GateTiming = GateTiming()
    z_mode: str = "physical"
    pulse_shape: str = "plain"
    seed: int = 0
    n_epsilon_samples: int = 1
    noisy_recovery: bool = True
    measurement_sigma: float = 0.0

    def __post_init__(self):
        lengths = tuple(int(n) for n in self.lengths)
        object.__setattr__(self, "lengths", lengths)
        if self.max_length is None:
            object.__setattr__(self, "max_length", max(lengths) if lengths else 0)
        self.validate()

    def validate(self) -> None:
        if self.n_qubits < 1:
            raise ValidationError("n_qubits must be >= 1")
        if not self.lengths:
            raise ValidationError("at least one truncation length is required")
        if list(self.lengths) != sorted(set(self.lengths)) or self.lengths[0] < 0:
            raise ValidationError("lengths must be strictly increasing and non-negative")
        if self.lengths[-1] > self.max_length:
            raise ValidationError(
                f"truncation {self.lengths[-1]} exceeds max_length {self.max_length}"
            )
        for name in ("n_sequences", "n_randomizations", "n_epsilon_samples"):
            if getattr(self, name) < 1:
                raise ValidationError(f"{name} must be >= 1")
        if self.z_mode not in ("physical", "frame_change"):
            raise ValidationError(f"unknown z_mode {self.z_mode!r}")
        if self.pulse_shape not in ("plain", "bb1"):
            raise ValidationError(f"unknown pulse_shape {self.pulse_shape!r}")
        if self.measurement_sigma < 0:
            raise ValidationError("measurement_sigma must be >= 0")
        noise = self.noise
        if isinstance(noise, Depolarizing):
            depolarize(noise.p, 1)  # range check
        if isinstance(noise, LocalDepolarizing):
            if len(noise.p) != self.n_qubits:
                raise ValidationError("LocalDepolarizing needs one parameter per qubit")
            for p in noise.p:
                depolarize(p, 1)
        if isinstance(noise, Relaxation) and len(noise.t1) not in (1, self.n_qubits):
            raise ValidationError("Relaxation needs one T1/T2 pair or one per qubit")

    @classmethod
    def single_qubit(cls, **kw) -> "ExperimentConfig":
        """Defaults: 192-gate sequences, 4 sequences x 8 Pauli randomizations."""
        return cls(**{"n_qubits": 1, "lengths": SINGLE_QUBIT_LENGTHS, "max_length": 192,
                      "n_sequences": 4, "n_randomizations": 8, **kw})

    @classmethod
    def multi_qubit(cls, n_qubits: int = 3, **kw) -> "ExperimentConfig":
        """Defaults: 120-gate sequences, 48 sequences."""
        return cls(**{"n_qubits": n_qubits, "lengths": MULTI_QUBIT_LENGTHS, "max_length": 120,
                      "n_sequences": 48, "n_randomizations": 1, **kw})

    def runs_per_point(self, multi: bool = False) -> int:
        reps = self.n_epsilon_samples if isinstance(self.noise, RfEnsemble) else 1
        if not multi:
            reps *= self.n_randomizations
        return self.n_sequences * reps


@dataclass
class DecayCurve:
    """Mean fidelity per truncation length.

    ``runs`` (optional) keeps every run, one ``(n_sequences, n_reps)`` array
    per length, for bootstrap resampling and clustered standard errors.
    """

    lengths: np.ndarray
    mean: np.ndarray
    std: np.ndarray
    n_runs: np.ndarray
    dim: int = 2
    runs: Optional[list] = None
    sem: Optional[np.ndarray] = None

    def __post_init__(self):
        self.lengths = np.asarray(self.lengths, dtype=int)
        self.mean = np.asarray(self.mean, dtype=float)
        self.std = np.asarray(self.std, dtype=float)
        self.n_runs = np.asarray(self.n_runs, dtype=int)
        k = len(self.lengths)
        if not (len(self.mean) == len(self.std) == len(self.n_runs) == k):
            raise ValidationError("curve columns have different lengths")

    @classmethod
    def from_runs(cls, lengths, runs: Sequence[np.ndarray], dim: int) -> "DecayCurve":
        runs = [np.atleast_2d(np.asarray(r, dtype=float)) for r in runs]
        mean = [r.mean() for r in runs]
        std = [r.std(ddof=1) if r.size > 1 else 0.0 for r in runs]
        return cls(lengths, mean, std, [r.size for r in runs], dim, runs)

    def standard_error(self) -> np.ndarray:
        """Standard error of each mean, clustered by computational sequence when
        per-run data are available (runs within a sequence share its gates)."""
        if self.runs is None:
            if self.sem is not None:
                return np.asarray(self.sem, dtype=float)
            return self.std / np.sqrt(np.maximum(self.n_runs, 1))
        out = []
        for r in self.runs:
            if r.shape[0] > 1:
                out.append(r.mean(axis=1).std(ddof=1) / math.sqrt(r.shape[0]))
            else:
                out.append(r.std(ddof=1) / math.sqrt(r.size) if r.size > 1 else 0.0)
        return np.array(out)

    def select(self, mask) -> "DecayCurve":
        mask = np.asarray(mask)
        idx = np.flatnonzero(mask) if mask.dtype == bool else mask
        runs = None if self.runs is None else [self.runs[i] for i in idx]
        sem = None if self.sem is None else np.asarray(self.sem)[idx]
        return DecayCurve(self.lengths[idx], self.mean[idx], self.std[idx],
                          self.n_runs[idx], self.dim, runs, sem)


# --- single-qubit lookup tables --------------------------------------------

_AXES6 = [SignedPauli(s, a) for a in "XYZ" for s in (1, -1)]
_AXIS_INDEX = {p: i for i, p in enumerate(_AXES6)}
_PLUS_Z = _AXIS_INDEX[SignedPauli(1, "Z")]

_PAULIS = cl.all_pauli_labels()
_SYMPS = cl.all_symplectic_labels()


@lru_cache(maxsize=None)
def _tables():
    sp = cl._sp_gates()
    track = np.array([[_AXIS_INDEX[cl.propagate(g, a)] for a in _AXES6] for g in sp])
    rec = np.array([[cl.sp_gate_index(cl.recovery_gate_for(a, s)) for s in (1, -1)]
                    for a in _AXES6])
    return track, rec


def _label_arrays(labels):
    axis = np.array(["IXYZ".index(l.axis) for l in labels])
    sign = np.array([l.sign for l in labels])
    return axis, sign


_P_AXIS, _P_SIGN = _label_arrays(_PAULIS)
_S_AXIS, _S_SIGN = _label_arrays(_SYMPS)
_SIGMA = np.stack([cl.I2, cl.X, cl.Y, cl.Z])


def _rot_batch(axis: np.ndarray, sign: np.ndarray, angle) -> np.ndarray:
    """Batch of ``exp(-i sign angle/2 sigma_axis)``; axis 0 is the identity."""
    half = np.asarray(angle, dtype=float) / 2
    c = np.cos(half)[..., None, None]
    s = (sign * np.sin(half))[..., None, None]
    u = c * cl.I2 - 1j * s * _SIGMA[axis]
    u[axis == 0] = cl.I2
    return u


@lru_cache(maxsize=None)
def _frame_table() -> np.ndarray:
    """``[axis, sign_bit]`` -> unitary ``C`` with ``C X C^dag = sign * axis``.

    Axis 0 (identity) maps to the identity; its pulses never carry errors.
    """
    table = np.tile(cl.I2, (4, 2, 1, 1))
    for g, u in cl.enumerate_single_qubit_cliffords():
        img = cl.propagate(g, SignedPauli(1, "X"))
        a, sb = "IXYZ".index(img.ops), int(img.sign < 0)
        table[a, sb] = u
    return table


def pulse_is_physical(axis: str, z_mode: str) -> bool:
    """Whether a pulse about ``axis`` is driven (and so carries pulse errors).

    Identity Paulis are timed no-ops; in frame-change mode Z rotations are
    exact frame updates followed by a delay of the same length.
    """
    if axis == "I":
        return False
    return not (axis == "Z" and z_mode == "frame_change")


def _embed_batch(u: np.ndarray, qubit: int, n: int) -> np.ndarray:
    if n == 1:
        return u
    a, b = 2**qubit, 2 ** (n - qubit - 1)
    big = np.einsum("ij,nkl,mo->nikmjlo", np.eye(a), u, np.eye(b))
    d = 2**n
    return big.reshape(u.shape[0], d, d)


def _conjugate(rho: np.ndarray, u: np.ndarray) -> np.ndarray:
    return u @ rho @ np.conj(np.swapaxes(u, -1, -2))


def _apply_superop(rho: np.ndarray, mat: np.ndarray) -> np.ndarray:
    return unvec(vec(rho) @ mat.T)


def _depolarize_batch(rho: np.ndarray, p: float) -> np.ndarray:
    d = rho.shape[-1]
    tr = np.trace(rho, axis1=-2, axis2=-1)
    return p * rho + (1 - p) * tr[:, None, None] * np.eye(d) / d


def _z_expectation(rho: np.ndarray, qubit: int, n: int) -> np.ndarray:
    d = 2**n
    zdiag = np.array([1 - 2 * ((b >> (n - 1 - qubit)) & 1) for b in range(d)])
    return np.real(np.einsum("nii,i->n", rho, zdiag))


def _pauli_expectation(rho: np.ndarray, qubit: int, n: int, axis: np.ndarray) -> np.ndarray:
    """``<sigma_axis>`` on ``qubit`` per run; ``axis`` is 1..3 per run."""
    ops = np.stack([cl.embed_single(_SIGMA[a], qubit, n) for a in range(4)])
    return np.real(np.einsum("nij,nji->n", ops[axis], rho))


class _PulseNoise:
    """Noise for single-qubit pulses on a register, vectorized over runs."""

    def __init__(self, cfg: ExperimentConfig, qubit: int):
        self.cfg = cfg
        self.qubit = qubit
        self.n = cfg.n_qubits
        self._relax: dict = {}
        self._bb1: dict = {}

    def coherent(self) -> bool:
        return isinstance(self.cfg.noise, (OverRotation, RfEnsemble))

    def pulse(self, rho, axis, sign, angle, eps, duration):
        """Apply one pulse (per-run axis/sign) with its pulse-correlated errors."""
        u = _rot_batch(axis, sign, np.full(axis.shape, angle))
        if self.coherent():
            physical = axis != 0
            if self.cfg.z_mode == "frame_change":
                physical &= axis != 3
            err = self._error(axis, sign, angle, eps)
            err[~physical] = cl.I2
            u = err @ u
        rho = _conjugate(rho, _embed_batch(u, self.qubit, self.n))
        if isinstance(self.cfg.noise, Relaxation):
            rho = _apply_superop(rho, self._relaxation(duration))
        return rho

    def _error(self, axis, sign, angle, eps):
        if self.cfg.pulse_shape == "plain":
            return _rot_batch(axis, sign, eps * angle)
        uniq, inv = np.unique(eps, return_inverse=True)
        ex = np.stack([self._bb1_x(angle, e) for e in uniq])[inv]
        c = _frame_table()[axis, (sign < 0).astype(int)]
        return c @ ex @ np.conj(np.swapaxes(c, -1, -2))

    def _bb1_x(self, angle, e):
        key = (angle, float(e))
        if key not in self._bb1:
            self._bb1[key] = bb1_error_unitary(angle, float(e))
        return self._bb1[key]

    def _relaxation(self, tau):
        if tau not in self._relax:
            self._relax[tau] = relaxation_register(self.cfg.noise, tau, self.n).mat
        return self._relax[tau]

    def step(self, rho):
        noise = self.cfg.noise
        if isinstance(noise, Depolarizing):
            return _depolarize_batch(rho, noise.p)
        if isinstance(noise, LocalDepolarizing):
            mat = tensor_superops([depolarize(p, 1) for p in noise.p]).mat
            return _apply_superop(rho, mat)
        return rho


def _sp_sequence(cfg: ExperimentConfig, i: int) -> np.ndarray:
    rng = np.random.default_rng([cfg.seed, _SEQ, i])
    return rng.integers(6, size=cfg.max_length)


def _draw_eps(cfg: ExperimentConfig, rng: np.random.Generator, size: int) -> np.ndarray:
    noise = cfg.noise
    draws = rng.random(size)
    if isinstance(noise, RfEnsemble):
        cdf = np.cumsum(noise.distribution.weights)
        idx = np.minimum(np.searchsorted(cdf, draws, side="right"), len(cdf) - 1)
        return np.asarray(noise.distribution.epsilons)[idx]
    if isinstance(noise, OverRotation):
        return np.full(size, noise.epsilon)
    return np.zeros(size)


def _sp_batch(cfg: ExperimentConfig, seq_ids, symp_all: np.ndarray, length: int,
              qubit: int, spectators: bool):
    """All repetitions of the sequences ``seq_ids`` truncated at ``length``.

    Random draws come from one stream per (sequence, length); the simulation
    itself is vectorized over every run in the batch.  Returns target
    fidelities ``(n_seq, n_reps)`` and spectator fidelities
    ``(n_seq, n_reps, n_qubits)`` (NaN on the target column).
    """
    n = cfg.n_qubits
    reps = cfg.n_randomizations * (cfg.n_epsilon_samples if isinstance(cfg.noise, RfEnsemble) else 1)
    draws = {k: [] for k in ("paulis", "signs", "eps", "spec_axis", "spec_sign", "readout")}
    for i in seq_ids:
        rng = np.random.default_rng([cfg.seed, _RUN, i, length, qubit])
        draws["paulis"].append(rng.integers(8, size=(reps, length)))
        draws["signs"].append(np.where(rng.random(reps) < 0.5, 1, -1))
        draws["eps"].append(_draw_eps(cfg, rng, reps))
        draws["spec_axis"].append(rng.integers(1, 4, size=(reps, n)))
        draws["spec_sign"].append(np.where(rng.random((reps, n)) < 0.5, 1, -1))
        draws["readout"].append(rng.standard_normal((reps, n)) * cfg.measurement_sigma)
    paulis, signs, eps, spec_axis, spec_sign, readout = (
        np.concatenate(draws[k]) for k in
        ("paulis", "signs", "eps", "spec_axis", "spec_sign", "readout"))
    symp = np.repeat(symp_all[:, :length], reps, axis=0)
    runs = len(signs)

    track, rec = _tables()
    t = cfg.timing
    noise = _PulseNoise(cfg, qubit)

    # initial state: target |0>, spectators in random Pauli eigenstates
    rho = np.ones((runs, 1, 1), dtype=complex)
    for q in range(n):
        if q == qubit or not spectators:
            one = np.tile(np.array([[1, 0], [0, 0]], dtype=complex), (runs, 1, 1))
        else:
            one = 0.5 * (cl.I2 + spec_sign[:, q, None, None] * _SIGMA[spec_axis[:, q]])
        rho = np.einsum("nij,nkl->nikjl", rho, one).reshape(runs, 2 ** (q + 1), 2 ** (q + 1))

    tracked = np.full(runs, _PLUS_Z)
    for j in range(length):
        p = paulis[:, j]
        s = symp[:, j]
        rho = noise.pulse(rho, _P_AXIS[p], _P_SIGN[p], np.pi, eps, t.pi)
        rho = noise.pulse(rho, _S_AXIS[s], _S_SIGN[s], np.pi / 2, eps, t.pi2)
        rho = noise.step(rho)
        tracked = track[p * 6 + s, tracked]

    g = rec[tracked, (signs < 0).astype(int)]
    p, s = g // 6, g % 6
    if cfg.noisy_recovery:
        rho = noise.pulse(rho, _P_AXIS[p], _P_SIGN[p], np.pi, eps, t.pi)
        rho = noise.pulse(rho, _S_AXIS[s], _S_SIGN[s], np.pi / 2, eps, t.pi2)
        rho = noise.step(rho)
    else:
        u = _rot_batch(_S_AXIS[s], _S_SIGN[s], np.full(runs, np.pi / 2)) @ \
            _rot_batch(_P_AXIS[p], _P_SIGN[p], np.full(runs, np.pi))
        rho = _conjugate(rho, _embed_batch(u, qubit, n))

    z = _z_expectation(rho, qubit, n)
    fid = 0.5 + 0.5 * signs * z + readout[:, qubit]
    spec = np.full((runs, n), np.nan)
    if spectators:
        for q in range(n):
            if q == qubit:
                continue
            val = spec_sign[:, q] * _pauli_expectation(rho, q, n, spec_axis[:, q])
            spec[:, q] = 0.5 + 0.5 * val + readout[:, q]
    k = len(seq_ids)
    return fid.reshape(k, reps), spec.reshape(k, reps, n)


def _sp_chunk(args):
    """Per-sequence, per-length results for one chunk of sequence indices."""
    cfg, seq_ids, qubit, spectators = args
    symp_all = np.stack([_sp_sequence(cfg, i) for i in seq_ids])
    by_len = [_sp_batch(cfg, seq_ids, symp_all, L, qubit, spectators) for L in cfg.lengths]
    return [[(fid[r], spec[r]) for fid, spec in by_len] for r in range(len(seq_ids))]


def _map_chunks(fn, cfg: ExperimentConfig, extra: tuple, workers: int):
    ids = list(range(cfg.n_sequences))
    if workers <= 1:
        return fn((cfg, ids, *extra))
    chunks = [ids[k::workers] for k in range(workers)]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        parts = list(ex.map(fn, [(cfg, c, *extra) for c in chunks]))
    # reassemble in sequence order
    by_id = {}
    for c, part in zip(chunks, parts):
        by_id.update(zip(c, part))
    return [by_id[i] for i in ids]


def _run_sp(cfg: ExperimentConfig, qubit: int, spectators: bool, workers: int):
    per_seq = _map_chunks(_sp_chunk, cfg, (qubit, spectators), workers)
    n_len = len(cfg.lengths)
    target = [np.stack([per_seq[i][k][0] for i in range(cfg.n_sequences)]) for k in range(n_len)]
    spec = [np.stack([per_seq[i][k][1] for i in range(cfg.n_sequences)]) for k in range(n_len)]
    return target, spec


def run_single_qubit_rb(cfg: ExperimentConfig, workers: int = 1) -> DecayCurve:
    """Single-qubit benchmarking with Pauli randomization; ``cfg.n_qubits`` must be 1."""
    if cfg.n_qubits != 1:
        raise ValidationError("run_single_qubit_rb needs n_qubits = 1")
    target, _ = _run_sp(cfg, 0, False, workers)
    return DecayCurve.from_runs(cfg.lengths, target, dim=2)


@dataclass
class SubsystemReport:
    """Per-target decay curves and, per target, identity-fidelity curves of each spectator."""

    targets: dict = field(default_factory=dict)
    spectators: dict = field(default_factory=dict)


def subsystem_benchmark(cfg: ExperimentConfig, workers: int = 1) -> SubsystemReport:
    """Single-qubit benchmarking of each qubit inside the full register.

    Spectators start in uniformly random Pauli eigenstates and idle; their
    survival averages to the identity-operation fidelity on that qubit.
    """
    if cfg.n_qubits < 2:
        raise ValidationError("subsystem_benchmark needs n_qubits >= 2")
    report = SubsystemReport()
    for q in range(cfg.n_qubits):
        target, spec = _run_sp(cfg, q, True, workers)
        report.targets[q] = DecayCurve.from_runs(cfg.lengths, target, dim=2)
        for r in range(cfg.n_qubits):
            if r != q:
                report.spectators[(q, r)] = DecayCurve.from_runs(
                    cfg.lengths, [s[..., r] for s in spec], dim=2)
    return report


# --- multi-qubit protocol ---------------------------------------------------

def multi_sequence(cfg: ExperimentConfig, i: int) -> list:
    rng = np.random.default_rng([cfg.seed, _SEQ, i])
    return [cl.sample_multi_gate(rng, cfg.n_qubits) for _ in range(cfg.max_length)]


class _MultiSim:
    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.n = cfg.n_qubits
        self.d = 2**self.n
        self._relax: dict = {}
        self._local: dict = {}

    def timestep(self, rho: np.ndarray, step: tuple, eps: float, noisy: bool) -> np.ndarray:
        noise = self.cfg.noise
        u = np.eye(self.d, dtype=complex)
        coherent = noisy and isinstance(noise, (OverRotation, RfEnsemble))
        for g in step:
            ug = cl.gate_unitary(g, self.n)
            if coherent and g.kind != "WAIT":
                ug = involution_overrotation(ug, eps) @ ug
            u = ug @ u
        rho = u @ rho @ u.conj().T
        if not noisy:
            return rho
        active = [g for g in step if g.kind != "WAIT"]
        if isinstance(noise, Depolarizing):
            pk = noise.p ** len(active)
            rho = pk * rho + (1 - pk) * np.trace(rho) * np.eye(self.d) / self.d
        elif isinstance(noise, LocalDepolarizing):
            for g in active:
                rho = unvec(self._local_mat(g.qubits) @ vec(rho))
        elif isinstance(noise, Relaxation):
            tau = max(self.cfg.timing.duration(g) for g in step)
            rho = unvec(self._relax_mat(tau) @ vec(rho))
        return rho

    def _local_mat(self, qubits):
        if qubits not in self._local:
            ps = [self.cfg.noise.p[q] if q in qubits else 1.0 for q in range(self.n)]
            self._local[qubits] = tensor_superops([depolarize(p, 1) for p in ps]).mat
        return self._local[qubits]

    def _relax_mat(self, tau):
        if tau not in self._relax:
            self._relax[tau] = relaxation_register(self.cfg.noise, tau, self.n).mat
        return self._relax[tau]


def _multi_chunk(args):
    cfg, seq_ids = args
    n, d = cfg.n_qubits, 2**cfg.n_qubits
    reps = cfg.n_epsilon_samples if isinstance(cfg.noise, RfEnsemble) else 1
    sim = _MultiSim(cfg)
    z0 = SignedPauli(1, "Z" + "I" * (n - 1))
    zdiag = np.array([1 - 2 * ((b >> (n - 1)) & 1) for b in range(d)])
    rho0 = (np.eye(d) + np.diag(zdiag)) / d
    out = []
    for i in seq_ids:
        seq = multi_sequence(cfg, i)
        prefix = [z0]
        for g in seq:
            prefix.append(cl.propagate(g, prefix[-1]))
        per_len = []
        for L in cfg.lengths:
            rng = np.random.default_rng([cfg.seed, _RUN, i, L])
            eps = _draw_eps(cfg, rng, reps)
            readout = rng.standard_normal(reps) * cfg.measurement_sigma
            tracked = prefix[L]
            rec = cl.recovery_multi(tracked)
            final = cl.propagate_sequence(rec, tracked)
            if cfg.noisy_recovery:
                noisy_steps, clean_steps = cl.parallelize(seq[:L] + rec), []
            else:
                noisy_steps, clean_steps = cl.parallelize(seq[:L]), cl.parallelize(rec)
            fids = np.empty(reps)
            for k in range(reps):
                rho = rho0.astype(complex)
                for step in noisy_steps:
                    rho = sim.timestep(rho, step, eps[k], True)
                for step in clean_steps:
                    rho = sim.timestep(rho, step, eps[k], False)
                z = float(np.real(np.sum(np.diag(rho) * zdiag)))
                fids[k] = 1 / d + (1 - 1 / d) * final.sign * z + readout[k]
            per_len.append(fids)
        out.append(per_len)
    return out


def run_multi_qubit_rb(cfg: ExperimentConfig, workers: int = 1) -> DecayCurve:
    """Multi-qubit benchmarking with H/PHP/CNOT generators on a linear chain.

    Recovery gates are simulated (noisy unless ``cfg.noisy_recovery`` is off)
    but not counted in the length.
    """
    if cfg.n_qubits < 2:
        raise ValidationError("run_multi_qubit_rb needs n_qubits >= 2")
    per_seq = _map_chunks(_multi_chunk, cfg, (), workers)
    runs = [np.stack([per_seq[i][k] for i in range(cfg.n_sequences)])
            for k in range(len(cfg.lengths))]
    return DecayCurve.from_runs(cfg.lengths, runs, dim=2**cfg.n_qubits)


def computational_sequence(cfg: ExperimentConfig, i: int) -> list:
    """The ``i``-th computational sequence of ``cfg`` at full length.

    Single-qubit runs return the symplectic pulses (Pauli pulses are drawn
    per run); multi-qubit runs return the generator labels.
    """
    if not 0 <= i < cfg.n_sequences:
        raise ValidationError(f"sequence index {i} outside [0, {cfg.n_sequences})")
    if cfg.n_qubits == 1:
        return [_SYMPS[k] for k in _sp_sequence(cfg, i)]
    return multi_sequence(cfg, i)


def run(cfg: ExperimentConfig, workers: int = 1) -> DecayCurve:
    if cfg.n_qubits == 1:
        return run_single_qubit_rb(cfg, workers)
    return run_multi_qubit_rb(cfg, workers)


def with_noise(cfg: ExperimentConfig, noise: NoiseModel) -> ExperimentConfig:
    return replace(cfg, noise=noise)
