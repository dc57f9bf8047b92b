"""Benchmarking each qubit of a register while the others idle.

Local depolarizing noise with different strengths per qubit shows up in the
target decays; spectators record the identity-operation fidelity.
"""
from randbench.fit import fit_exponential
from randbench.noise import LocalDepolarizing
from randbench.protocol import ExperimentConfig, subsystem_benchmark


def main() -> None:
    cfg = ExperimentConfig.multi_qubit(2, noise=LocalDepolarizing((0.995, 0.98)),
                                       lengths=(1, 4, 8, 16, 32, 64), n_sequences=4,
                                       n_randomizations=4, seed=0)
    rep = subsystem_benchmark(cfg, workers=2)
    for q, curve in rep.targets.items():
        fit = fit_exponential(curve, fixed_offset=0.5, n_bootstrap=0)
        print(f"target qubit {q}: fitted p {fit.p:.4f}")
    for (q, r), curve in rep.spectators.items():
        print(f"target {q}, spectator {r}: survival at L = {int(curve.lengths[-1])} is {curve.mean[-1]:.4f}")


if __name__ == "__main__":
    main()
