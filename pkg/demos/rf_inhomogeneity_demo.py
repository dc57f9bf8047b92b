"""Non-exponential decay from a spread of r.f. amplitude errors.

Each run sees one fixed relative amplitude error.  For a single error value
the decay is exponential.  For a broad spread it is a mixture of exponentials,
and model selection prefers a two-rate fit.  A Monte Carlo run is checked
against the analytic curve.
"""
import numpy as np

from randbench.fit import model_select
from randbench.noise import RfDistribution, RfEnsemble
from randbench.protocol import SINGLE_QUBIT_LENGTHS, ExperimentConfig
from randbench.rf import analytic_decay, compare_mc_vs_analytic, pbar


def main() -> None:
    lengths = np.array(SINGLE_QUBIT_LENGTHS)
    for eps in (0.01, 0.05, 0.15):
        print(f"eps = {eps:.2f}: averaged depolarizing parameter {float(pbar(eps)):.6f}")

    for name, g in (("point 0.05", RfDistribution.point(0.05)),
                    ("uniform +-0.2", RfDistribution.uniform(0.2))):
        sel = model_select(analytic_decay(g, lengths))
        print(f"{name}: preferred model {sel.preferred}")

    g = RfDistribution.two_point()
    cfg = ExperimentConfig.single_qubit(noise=RfEnsemble(g), lengths=(2, 8, 32, 128),
                                        n_sequences=2000, n_randomizations=1, seed=1)
    rep = compare_mc_vs_analytic(g, cfg, workers=2)
    print("length  analytic  monte_carlo  z")
    for n, a, m, z in zip(rep.lengths, rep.analytic, rep.monte_carlo, rep.z):
        print(f"{int(n):6d}  {a:.5f}   {m:.5f}    {z:+.2f}")
    print("agreement within 3 sigma:", rep.passed)


if __name__ == "__main__":
    main()
