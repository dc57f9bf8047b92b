"""Twirling an arbitrary single-qubit channel over the Clifford group.

A random CPTP map is averaged over the 48 symplectic-Pauli products, which
cover the 24 single-qubit Cliffords twice up to a global phase.  The result
is a depolarizing channel whose parameter equals that of the original map,
which is why benchmarking reports a single number per gate.
"""
import numpy as np

from randbench import clifford as cl
from randbench.liouville import (
    depolarize,
    depolarizing_parameter,
    kraus_to_superop,
    twirl,
    unitary_to_superop,
)


def random_channel(rng: np.random.Generator, n_kraus: int = 3) -> list:
    g = rng.normal(size=(2 * n_kraus, 2)) + 1j * rng.normal(size=(2 * n_kraus, 2))
    q, _ = np.linalg.qr(g)
    return [q[2 * k:2 * k + 2, :] for k in range(n_kraus)]


def main() -> None:
    rng = np.random.default_rng(0)
    cliffords = [unitary_to_superop(u) for _, u in cl.enumerate_single_qubit_cliffords()]
    print(f"{len(cliffords)} gate superoperators")
    for i in range(3):
        raw = kraus_to_superop(random_channel(rng))
        p = depolarizing_parameter(raw)
        tw = twirl(raw, cliffords)
        dev = np.max(np.abs(tw.mat - depolarize(p, 1).mat))
        print(f"channel {i}: p = {p:.6f}, max |twirl - depolarize(p)| = {dev:.1e}")


if __name__ == "__main__":
    main()
