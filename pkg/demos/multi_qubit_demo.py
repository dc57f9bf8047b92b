"""Three-qubit benchmarking with nearest-neighbour CNOTs.

Shows one exported computational sequence and its recovery, then fits the
asymptotic part of a depolarizing decay with the offset pinned at 1/8.
"""
from randbench import clifford as cl
from randbench.fit import error_per_gate, fit_exponential
from randbench.noise import Depolarizing
from randbench.protocol import ExperimentConfig, computational_sequence, run_multi_qubit_rb


def main() -> None:
    p = 0.99
    cfg = ExperimentConfig.multi_qubit(3, noise=Depolarizing(p), seed=0)
    seq = computational_sequence(cfg, 0)[:8]
    tracked = cl.propagate_sequence(seq, cl.SignedPauli.parse("+ZII"))
    print("first 8 gates:", " ".join(cl.format_sequence(seq).split()))
    print(f"tracked Pauli {tracked}, recovery:", " ".join(cl.format_sequence(cl.recovery_multi(tracked)).split()))

    curve = run_multi_qubit_rb(cfg, workers=2)
    fit = fit_exponential(curve.select(curve.lengths >= 30), fixed_offset=1 / 8, seed=0)
    print(f"injected error per gate {error_per_gate(p, 8):.5f}, fitted {fit.error_per_gate:.5f}")


if __name__ == "__main__":
    main()
