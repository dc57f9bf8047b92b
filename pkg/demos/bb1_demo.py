"""Robustness of the BB1 composite pulse to amplitude calibration error.

A plain rotation has infidelity quadratic in the relative error; BB1
suppresses it to sixth order.
"""
import numpy as np

from randbench.pulses import bb1_infidelity, bb1_phases, loglog_slope, plain_infidelity


def main() -> None:
    theta = np.pi / 2
    print("BB1 phases for a quarter turn:", [round(x, 5) for x in bb1_phases(theta)])
    eps = np.logspace(-3, -1, 9)
    plain = np.array([plain_infidelity(theta, e) for e in eps])
    bb1 = np.array([bb1_infidelity(theta, e) for e in eps])
    print("eps        plain        bb1")
    for e, a, b in zip(eps, plain, bb1):
        print(f"{e:.2e}   {a:.3e}   {b:.3e}")
    print(f"log-log slopes: plain {loglog_slope(eps, plain):.3f}, bb1 {loglog_slope(eps, bb1):.3f}")


if __name__ == "__main__":
    main()
