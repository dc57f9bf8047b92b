import dataclasses
import itertools

import numpy as np
import pytest

from randbench import clifford as cl
from randbench.fit import fit_exponential
from randbench.liouville import ValidationError
from randbench.noise import (
    Depolarizing,
    GateTiming,
    Ideal,
    LocalDepolarizing,
    OverRotation,
    Relaxation,
    RfDistribution,
    RfEnsemble,
    register_error_per_step,
)
from randbench.protocol import (
    DecayCurve,
    ExperimentConfig,
    multi_sequence,
    run,
    run_multi_qubit_rb,
    run_single_qubit_rb,
    subsystem_benchmark,
)


def exact_multi_curve(n, p, lengths):
    """Exact mean fidelity of the multi-qubit protocol under per-gate global
    depolarizing noise, from a Markov chain on unsigned Pauli strings.

    Depolarizing commutes with Cliffords, so a run with tracked Pauli ``P``
    after ``L`` gates and a recovery of ``r(P)`` gates has signed fidelity
    ``1/D + (1 - 1/D) p^(L + r(P))``; only the distribution of ``P`` matters.
    """
    strings = ["".join(s) for s in itertools.product("IXYZ", repeat=n) if set(s) != {"I"}]
    idx = {s: i for i, s in enumerate(strings)}
    gates = [(cl.MultiGateLabel(k, (q,)), 1 / (3 * n)) for q in range(n) for k in ("H", "PHP")]
    pairs = cl.nearest_neighbor_pairs(n)
    gates += [(cl.CNOT(c, t), 1 / 3 / len(pairs)) for c, t in pairs]
    trans = np.zeros((len(strings), len(strings)))
    for s in strings:
        for g, w in gates:
            trans[idx[cl.propagate(g, cl.SignedPauli(1, s)).ops], idx[s]] += w
    rec_len = np.array([len(cl.recovery_multi(cl.SignedPauli(1, s))) for s in strings])
    dist = np.zeros(len(strings))
    dist[idx["Z" + "I" * (n - 1)]] = 1
    d = 2**n
    out = {}
    for L in range(max(lengths) + 1):
        out[L] = 1 / d + (1 - 1 / d) * p**L * (dist @ p**rec_len)
        dist = trans @ dist
    return np.array([out[L] for L in lengths])


class TestConfig:
    def test_defaults(self):
        cfg = ExperimentConfig.single_qubit()
        assert cfg.max_length == 192 and cfg.runs_per_point() == 32
        m = ExperimentConfig.multi_qubit()
        assert m.max_length == 120 and m.n_sequences == 48 and m.n_qubits == 3

    @pytest.mark.parametrize("kw", [
        dict(lengths=(4, 2)),
        dict(lengths=(1, 300)),
        dict(n_sequences=0),
        dict(z_mode="virtual"),
        dict(pulse_shape="gaussian"),
        dict(noise=Depolarizing(1.5)),
        dict(measurement_sigma=-1.0),
    ])
    def test_validation(self, kw):
        with pytest.raises(ValidationError):
            ExperimentConfig.single_qubit(**kw)

    def test_local_depolarizing_size(self):
        with pytest.raises(ValidationError):
            ExperimentConfig.multi_qubit(3, noise=LocalDepolarizing((0.9, 0.9)))

    def test_wrong_protocol(self):
        with pytest.raises(ValidationError):
            run_single_qubit_rb(ExperimentConfig.multi_qubit(2))
        with pytest.raises(ValidationError):
            run_multi_qubit_rb(ExperimentConfig.single_qubit())


class TestDecayCurve:
    def test_from_runs_and_select(self):
        runs = [np.ones((2, 3)), np.array([[0.9, 0.8, 0.7], [0.6, 0.5, 0.4]])]
        c = DecayCurve.from_runs([1, 2], runs, dim=2)
        assert c.n_runs.tolist() == [6, 6]
        assert c.mean[1] == pytest.approx(0.65)
        # clustered by sequence: the two sequence means are 0.8 and 0.5
        assert c.standard_error()[1] == pytest.approx(np.std([0.8, 0.5], ddof=1) / np.sqrt(2))
        s = c.select(c.lengths >= 2)
        assert s.lengths.tolist() == [2] and len(s.runs) == 1

    def test_column_mismatch(self):
        with pytest.raises(ValidationError):
            DecayCurve([1, 2], [1.0], [0.0, 0.0], [1, 1])


class TestSingleQubit:
    @pytest.mark.parametrize("seed", [0, 1, 2])
    @pytest.mark.parametrize("z_mode,pulse_shape", [("physical", "plain"), ("frame_change", "bb1")])
    def test_ideal_totality(self, seed, z_mode, pulse_shape):
        cfg = ExperimentConfig.single_qubit(seed=seed, z_mode=z_mode, pulse_shape=pulse_shape)
        c = run_single_qubit_rb(cfg)
        for r in c.runs:
            np.testing.assert_allclose(np.abs(r), 1.0, atol=1e-10)

    def test_depolarizing_closed_form(self):
        p = 0.999
        cfg = ExperimentConfig.single_qubit(noise=Depolarizing(p))
        c = run_single_qubit_rb(cfg)
        # every run sees L depolarized pairs plus the depolarized recovery pair
        np.testing.assert_allclose(c.mean, 0.5 + 0.5 * p ** (c.lengths + 1), atol=1e-12)
        assert np.all(c.std < 1e-12)
        fit = fit_exponential(c, n_bootstrap=0)
        assert fit.p == pytest.approx(p, abs=2e-4)

    def test_ideal_recovery_shifts_exponent(self):
        p = 0.99
        cfg = ExperimentConfig.single_qubit(noise=Depolarizing(p), noisy_recovery=False, lengths=(1, 10, 50),
                                            max_length=50, n_sequences=2, n_randomizations=2)
        np.testing.assert_allclose(run(cfg).mean, 0.5 + 0.5 * p ** np.array([1, 10, 50]), atol=1e-12)

    def test_determinism_across_workers(self):
        cfg = ExperimentConfig.single_qubit(noise=OverRotation(0.05), seed=4, n_sequences=6)
        a = run_single_qubit_rb(cfg, workers=1)
        b = run_single_qubit_rb(cfg, workers=2)
        np.testing.assert_array_equal(a.mean, b.mean)
        for x, y in zip(a.runs, b.runs):
            np.testing.assert_array_equal(x, y)

    def test_seed_changes_runs(self):
        cfg = ExperimentConfig.single_qubit(noise=OverRotation(0.05), n_sequences=2)
        a = run(cfg)
        b = run(dataclasses.replace(cfg, seed=1))
        assert not np.array_equal(a.mean, b.mean)

    def test_prefix_consistency(self):
        # a run set restricted to fewer lengths reproduces the shared lengths
        cfg = ExperimentConfig.single_qubit(noise=OverRotation(0.05), n_sequences=2)
        small = dataclasses.replace(cfg, lengths=(8, 64))
        full = run(cfg)
        part = run(small)
        np.testing.assert_array_equal(part.mean, full.mean[np.isin(full.lengths, (8, 64))])

    def test_rf_matches_run_count(self):
        cfg = ExperimentConfig.single_qubit(noise=RfEnsemble(RfDistribution.two_point()),
                                            n_epsilon_samples=3, lengths=(1, 4), max_length=4)
        c = run(cfg)
        assert c.n_runs.tolist() == [96, 96]

    def test_measurement_noise(self):
        cfg = ExperimentConfig.single_qubit(measurement_sigma=0.01, lengths=(1, 2), max_length=2,
                                            n_sequences=8)
        c = run(cfg)
        assert c.std == pytest.approx([0.01, 0.01], rel=0.2)

    @pytest.mark.parametrize("d,cfg", [
        (2, ExperimentConfig.single_qubit(noise=Depolarizing(0.97))),
        (8, ExperimentConfig.multi_qubit(3, noise=Depolarizing(0.95))),
    ])
    def test_saturation(self, d, cfg):
        fit = fit_exponential(run(cfg, workers=2), n_bootstrap=0)
        assert fit.offset == pytest.approx(1 / d, abs=0.01)

    def test_standard_error_shrinks_with_sequences(self):
        se = {}
        for ns in (4, 48):
            cfg = ExperimentConfig.single_qubit(noise=OverRotation(0.05), n_sequences=ns, seed=1)
            se[ns] = run(cfg).standard_error()[1:]
        assert np.mean(se[48]) < 0.5 * np.mean(se[4])
        assert np.mean(se[48] < se[4]) >= 0.8


class TestZMode:
    def test_ideal_identical(self):
        a = run(ExperimentConfig.single_qubit(z_mode="physical"))
        b = run(ExperimentConfig.single_qubit(z_mode="frame_change"))
        np.testing.assert_allclose(a.mean, b.mean, atol=1e-12)

    def test_dephasing_agrees(self):
        noise = Relaxation((np.inf,), (5e-3,))
        fits = []
        for mode in ("physical", "frame_change"):
            c = run(ExperimentConfig.single_qubit(noise=noise, z_mode=mode, seed=3))
            fits.append(fit_exponential(c, fixed_offset=0.5, n_bootstrap=200))
        a, b = fits
        assert a.p < 0.995
        sigma = np.hypot(np.ptp(a.ci68_p), np.ptp(b.ci68_p)) / 2
        assert abs(a.p - b.p) <= 2 * sigma

    def test_overrotation_differs(self):
        fits = []
        for mode in ("physical", "frame_change"):
            cfg = ExperimentConfig.single_qubit(noise=OverRotation(0.05), z_mode=mode, n_sequences=16)
            fits.append(fit_exponential(run(cfg), fixed_offset=0.5, n_bootstrap=200))
        a, b = fits
        sigma = np.hypot(np.ptp(a.ci68_p), np.ptp(b.ci68_p)) / 2
        assert abs(a.p - b.p) > 2 * sigma
        # physical Z pulses also pick up the error and depolarize it more
        assert a.p < b.p


class TestMultiQubit:
    @pytest.mark.parametrize("n", [2, 3])
    def test_ideal_totality(self, n):
        c = run_multi_qubit_rb(ExperimentConfig.multi_qubit(n, n_sequences=12, seed=n))
        for r in c.runs:
            np.testing.assert_allclose(np.abs(r), 1.0, atol=1e-10)

    def test_matches_exact_markov_expectation(self):
        p = 0.99
        cfg = ExperimentConfig.multi_qubit(3, noise=Depolarizing(p), n_sequences=96, seed=5)
        c = run_multi_qubit_rb(cfg, workers=2)
        exact = exact_multi_curve(3, p, c.lengths)
        z = (c.mean - exact) / c.standard_error()
        assert np.all(np.abs(z[1:]) < 4)
        assert abs(z.mean()) < 1.5

    def test_exact_expectation_at_zero_length(self):
        cfg = ExperimentConfig.multi_qubit(3, noise=Depolarizing(0.9), lengths=(0,), max_length=1,
                                           n_sequences=3)
        # no gates and no recovery: the state is untouched
        assert run(cfg).mean[0] == pytest.approx(1.0)

    def test_determinism_across_workers(self):
        cfg = ExperimentConfig.multi_qubit(3, noise=OverRotation(0.02), n_sequences=6, seed=2)
        a = run_multi_qubit_rb(cfg, workers=1)
        b = run_multi_qubit_rb(cfg, workers=3)
        for x, y in zip(a.runs, b.runs):
            np.testing.assert_array_equal(x, y)

    def test_depolarizing_rate_recovered(self):
        p = 0.99
        c = run_multi_qubit_rb(ExperimentConfig.multi_qubit(3, noise=Depolarizing(p), seed=1), workers=2)
        fit = fit_exponential(c.select(c.lengths >= 30), n_bootstrap=0)
        assert fit.p == pytest.approx(p, rel=0.01)

    def test_relaxation_against_composed_bound(self):
        noise = Relaxation((1.0,), (0.5,))
        timing = GateTiming(single=1.2e-3, cnot=2.4e-3, wait=1.2e-3)
        cfg = ExperimentConfig.multi_qubit(3, noise=noise, timing=timing, n_sequences=96, seed=0)
        c = run_multi_qubit_rb(cfg, workers=2)
        fit = fit_exponential(c.select(c.lengths >= 30), fixed_offset=1 / 8, n_bootstrap=0)
        # per-gate average of the register relaxation error over the executed
        # schedule: each parallel step relaxes all qubits for its longest gate
        total, n_gates = 0.0, 0
        for i in range(cfg.n_sequences):
            seq = multi_sequence(cfg, i)
            for step in cl.parallelize(seq):
                total += register_error_per_step(noise, max(timing.duration(g) for g in step), 3)
            n_gates += len(seq)
        assert fit.error_per_gate == pytest.approx(total / n_gates, rel=0.10)

    def test_sequence_draw_reproducible(self):
        cfg = ExperimentConfig.multi_qubit(3, seed=9)
        assert multi_sequence(cfg, 3) == multi_sequence(cfg, 3)
        assert multi_sequence(cfg, 3) != multi_sequence(cfg, 4)


class TestSubsystem:
    def test_ideal_flat(self):
        rep = subsystem_benchmark(ExperimentConfig.single_qubit(n_qubits=2, n_sequences=2))
        for c in list(rep.targets.values()) + list(rep.spectators.values()):
            np.testing.assert_allclose(c.mean, 1.0, atol=1e-10)
        assert set(rep.spectators) == {(0, 1), (1, 0)}

    def test_noise_on_one_qubit(self):
        p = 0.99
        cfg = ExperimentConfig.single_qubit(n_qubits=2, noise=LocalDepolarizing((p, 1.0)), n_sequences=2)
        rep = subsystem_benchmark(cfg)
        closed = 0.5 + 0.5 * p ** (rep.targets[0].lengths + 1)
        np.testing.assert_allclose(rep.targets[0].mean, closed, atol=1e-12)
        np.testing.assert_allclose(rep.targets[1].mean, 1.0, atol=1e-12)
        # qubit 0 idles while qubit 1 is benchmarked and still decays
        np.testing.assert_allclose(rep.spectators[(1, 0)].mean, closed, atol=1e-12)
        np.testing.assert_allclose(rep.spectators[(0, 1)].mean, 1.0, atol=1e-12)

    def test_per_qubit_rates(self):
        ps = (0.99, 0.995, 0.998)
        cfg = ExperimentConfig.single_qubit(n_qubits=3, noise=LocalDepolarizing(ps), n_sequences=2,
                                            n_randomizations=2)
        rep = subsystem_benchmark(cfg)
        for q, p in enumerate(ps):
            fit = fit_exponential(rep.targets[q], n_bootstrap=0)
            assert fit.error_per_gate == pytest.approx((1 - p) / 2, rel=0.10)

    def test_needs_register(self):
        with pytest.raises(ValidationError):
            subsystem_benchmark(ExperimentConfig.single_qubit())
