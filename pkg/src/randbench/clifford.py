"""Clifford gate sets, signed-Pauli tracking and recovery synthesis.

Two gate sets are used:

* single qubit: the 48 labelled pairs of a Pauli pulse (pi rotation about
  +-I, +-X, +-Y, +-Z) followed by a symplectic pulse (pi/2 rotation about
  +-X, +-Y, +-Z);
* many qubits: H, PHP^dag (Hadamard conjugated by the phase gate) on any
  qubit and CNOT between nearest neighbours on a linear chain.

Qubits are indexed from 0; qubit 0 is the readout qubit and the most
significant factor in Kronecker products.  A label ``+X`` on a pulse means a
right-handed rotation about the +x axis, ``U = exp(-i angle/2 X)``.

States are tracked as a single signed Pauli ``s`` under the conjugation
``s -> U s U^dag``.  Propagation is table driven and exact.
"""
from __future__ import annotations

import warnings
from collections import deque
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence, Union

import numpy as np

PAULI_AXES = "IXYZ"
SYMPLECTIC_AXES = "XYZ"

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI_MATRICES = {"I": I2, "X": X, "Y": Y, "Z": Z}

HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
PHASE = np.diag([1, 1j]).astype(complex)
PHP = PHASE @ HADAMARD @ PHASE.conj().T


def _sign_str(sign: int) -> str:
    return "+" if sign > 0 else "-"


def _parse_sign(ch: str) -> int:
    if ch == "+":
        return 1
    if ch == "-":
        return -1
    raise ValueError(f"bad sign {ch!r}")


def rotation(axis: str, sign: int, angle: float) -> np.ndarray:
    """``exp(-i sign angle/2 sigma_axis)``; axis ``I`` gives the identity."""
    if axis == "I":
        return I2.copy()
    return np.cos(angle / 2) * I2 - 1j * sign * np.sin(angle / 2) * PAULI_MATRICES[axis]


@dataclass(frozen=True, order=True)
class PauliLabel:
    """A pi pulse about a signed axis; ``I`` is a timed no-op."""

    axis: str
    sign: int = 1

    def __post_init__(self):
        if self.axis not in PAULI_AXES or self.sign not in (1, -1):
            raise ValueError(f"invalid Pauli label {self.sign}{self.axis}")

    def __str__(self) -> str:
        return _sign_str(self.sign) + self.axis

    def unitary(self) -> np.ndarray:
        return rotation(self.axis, self.sign, np.pi)


@dataclass(frozen=True, order=True)
class SymplecticLabel:
    """A pi/2 pulse about a signed axis."""

    axis: str
    sign: int = 1

    def __post_init__(self):
        if self.axis not in SYMPLECTIC_AXES or self.sign not in (1, -1):
            raise ValueError(f"invalid symplectic label {self.sign}{self.axis}")

    def __str__(self) -> str:
        return _sign_str(self.sign) + self.axis

    def unitary(self) -> np.ndarray:
        return rotation(self.axis, self.sign, np.pi / 2)


@dataclass(frozen=True)
class SPGate:
    """Pauli pulse followed by a symplectic pulse."""

    pauli: PauliLabel
    symplectic: SymplecticLabel

    def unitary(self) -> np.ndarray:
        return self.symplectic.unitary() @ self.pauli.unitary()

    def __str__(self) -> str:
        return f"P{self.pauli} S{self.symplectic}"


MULTI_KINDS = ("H", "PHP", "CNOT", "WAIT")


@dataclass(frozen=True)
class MultiGateLabel:
    """One generator of the multi-qubit gate set.

    ``qubits`` is ``(q,)`` for H, PHP and WAIT and ``(control, target)`` for CNOT.
    """

    kind: str
    qubits: tuple

    def __post_init__(self):
        if self.kind not in MULTI_KINDS:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        want = 2 if self.kind == "CNOT" else 1
        if len(self.qubits) != want:
            raise ValueError(f"{self.kind} takes {want} qubit index(es), got {self.qubits}")
        if any(q < 0 for q in self.qubits):
            raise ValueError("qubit indices must be non-negative")
        if self.kind == "CNOT" and self.qubits[0] == self.qubits[1]:
            raise ValueError("CNOT control and target must differ")

    def __str__(self) -> str:
        return " ".join([self.kind, *map(str, self.qubits)])

    def validate(self, n_qubits: int, linear_chain: bool = True) -> None:
        if max(self.qubits) >= n_qubits:
            raise ValueError(f"{self} addresses a qubit outside 0..{n_qubits - 1}")
        if self.kind == "CNOT" and linear_chain and abs(self.qubits[0] - self.qubits[1]) != 1:
            raise ValueError(f"{self} is not nearest-neighbour")


def H(q: int) -> MultiGateLabel:
    return MultiGateLabel("H", (q,))


def PHPgate(q: int) -> MultiGateLabel:
    return MultiGateLabel("PHP", (q,))


def CNOT(control: int, target: int) -> MultiGateLabel:
    return MultiGateLabel("CNOT", (control, target))


def WAIT(q: int) -> MultiGateLabel:
    return MultiGateLabel("WAIT", (q,))


@dataclass(frozen=True)
class SignedPauli:
    """``sign * ops[0] (x) ops[1] (x) ...`` with ``ops`` a string over ``IXYZ``."""

    sign: int
    ops: str

    def __post_init__(self):
        if self.sign not in (1, -1) or not self.ops or set(self.ops) - set(PAULI_AXES):
            raise ValueError(f"invalid signed Pauli {self.sign} {self.ops!r}")

    @classmethod
    def parse(cls, text: str) -> "SignedPauli":
        text = text.strip()
        sign = 1
        if text[0] in "+-":
            sign, text = _parse_sign(text[0]), text[1:]
        return cls(sign, text)

    def __str__(self) -> str:
        return _sign_str(self.sign) + self.ops

    @property
    def n_qubits(self) -> int:
        return len(self.ops)

    def is_identity(self) -> bool:
        return set(self.ops) == {"I"}

    def matrix(self) -> np.ndarray:
        out = np.array([[1.0 + 0j]])
        for c in self.ops:
            out = np.kron(out, PAULI_MATRICES[c])
        return self.sign * out


# --- single-qubit conjugation tables: letter -> (sign, letter) -------------

_NEXT = {"X": "Y", "Y": "Z", "Z": "X"}
_IDENT_TABLE = {c: (1, c) for c in PAULI_AXES}


def _rotation_table(axis: str, sign: int, quarter_turns: int) -> dict:
    """Conjugation table of a rotation by ``quarter_turns * pi/2`` about ``sign*axis``."""
    if axis == "I":
        return dict(_IDENT_TABLE)
    b = _NEXT[axis]
    c = _NEXT[b]
    table = dict(_IDENT_TABLE)
    if quarter_turns % 4 == 1:
        table[b] = (sign, c)
        table[c] = (-sign, b)
    elif quarter_turns % 4 == 2:
        table[b] = (-1, b)
        table[c] = (-1, c)
    return table


_H_TABLE = {"I": (1, "I"), "X": (1, "Z"), "Y": (-1, "Y"), "Z": (1, "X")}
_PHP_TABLE = {"I": (1, "I"), "X": (-1, "X"), "Y": (1, "Z"), "Z": (1, "Y")}


def _compose_tables(first: dict, second: dict) -> dict:
    out = {}
    for c in PAULI_AXES:
        s1, c1 = first[c]
        s2, c2 = second[c1]
        out[c] = (s1 * s2, c2)
    return out


def _single_table(gate) -> dict:
    if isinstance(gate, PauliLabel):
        return _rotation_table(gate.axis, gate.sign, 2)
    if isinstance(gate, SymplecticLabel):
        return _rotation_table(gate.axis, gate.sign, 1)
    if isinstance(gate, SPGate):
        return _compose_tables(_single_table(gate.pauli), _single_table(gate.symplectic))
    raise TypeError(f"not a single-qubit label: {gate!r}")


_XZ_BITS = {"I": (0, 0), "X": (1, 0), "Z": (0, 1), "Y": (1, 1)}
_BITS_XZ = {v: k for k, v in _XZ_BITS.items()}


def _cnot_pair(pc: str, pt: str) -> tuple[int, str, str]:
    """CNOT conjugation of ``pc (x) pt`` (control, target) in symplectic form."""
    xc, zc = _XZ_BITS[pc]
    xt, zt = _XZ_BITS[pt]
    flip = xc & zt & (xt ^ zc ^ 1)
    xt ^= xc
    zc ^= zt
    return (-1 if flip else 1), _BITS_XZ[(xc, zc)], _BITS_XZ[(xt, zt)]


Gate = Union[PauliLabel, SymplecticLabel, SPGate, MultiGateLabel]


def propagate(gate: Gate, pauli: SignedPauli, qubit: int = 0) -> SignedPauli:
    """Conjugate ``pauli`` by the Clifford ``gate``: ``U pauli U^dag``.

    Single-qubit pulse labels act on ``qubit``; multi-qubit labels carry their
    own indices.
    """
    ops = list(pauli.ops)
    sign = pauli.sign
    if isinstance(gate, MultiGateLabel):
        if max(gate.qubits) >= len(ops):
            raise ValueError(f"{gate} addresses a qubit outside the register")
        if gate.kind == "CNOT":
            c, t = gate.qubits
            flip, ops[c], ops[t] = _cnot_pair(ops[c], ops[t])
            return SignedPauli(sign * flip, "".join(ops))
        if gate.kind == "WAIT":
            return pauli
        table = _H_TABLE if gate.kind == "H" else _PHP_TABLE
        q = gate.qubits[0]
    else:
        table = _single_table(gate)
        q = qubit
        if q >= len(ops):
            raise ValueError(f"qubit {q} outside the register")
    s, ops[q] = table[ops[q]]
    return SignedPauli(sign * s, "".join(ops))


def propagate_sequence(gates: Iterable[Gate], pauli: SignedPauli, qubit: int = 0) -> SignedPauli:
    for g in gates:
        pauli = propagate(g, pauli, qubit)
    return pauli


# --- enumeration and sampling ---------------------------------------------

def all_pauli_labels() -> list[PauliLabel]:
    return [PauliLabel(a, s) for a in PAULI_AXES for s in (1, -1)]


def all_symplectic_labels() -> list[SymplecticLabel]:
    return [SymplecticLabel(a, s) for a in SYMPLECTIC_AXES for s in (1, -1)]


@lru_cache(maxsize=None)
def _sp_gates() -> tuple:
    return tuple(SPGate(p, s) for p in all_pauli_labels() for s in all_symplectic_labels())


def enumerate_single_qubit_cliffords() -> list[tuple[SPGate, np.ndarray]]:
    """All 48 Pauli-then-symplectic pairs with their 2x2 unitaries.

    The order (Pauli axis IXYZ, sign +-, then symplectic axis XYZ, sign +-) is
    the lexicographic order used for recovery tie-breaking.
    """
    return [(g, g.unitary()) for g in _sp_gates()]


def sp_gate_index(gate: SPGate) -> int:
    return _sp_gates().index(gate)


def sp_gate_from_index(i: int) -> SPGate:
    return _sp_gates()[i]


def sample_sp_gate(rng: np.random.Generator) -> SPGate:
    pauli = all_pauli_labels()[rng.integers(8)]
    symp = all_symplectic_labels()[rng.integers(6)]
    return SPGate(pauli, symp)


def nearest_neighbor_pairs(n_qubits: int) -> list[tuple[int, int]]:
    """Ordered (control, target) pairs on a linear chain, both orientations."""
    pairs = []
    for q in range(n_qubits - 1):
        pairs += [(q, q + 1), (q + 1, q)]
    return pairs


def sample_multi_gate(rng: np.random.Generator, n_qubits: int) -> MultiGateLabel:
    """H/PHP on a random qubit with probability 2/3, otherwise a random NN CNOT."""
    if n_qubits < 2:
        warnings.warn("fewer than 2 qubits: CNOT branch disabled", RuntimeWarning, stacklevel=2)
        single = True
    else:
        single = rng.random() < 2.0 / 3.0
    if single:
        kind = "H" if rng.integers(2) == 0 else "PHP"
        return MultiGateLabel(kind, (int(rng.integers(n_qubits)),))
    pairs = nearest_neighbor_pairs(n_qubits)
    c, t = pairs[rng.integers(len(pairs))]
    return CNOT(c, t)


# --- recovery ---------------------------------------------------------------

def _recovery_candidates(tracked: SignedPauli, target_sign: int) -> list[SPGate]:
    want = SignedPauli(target_sign, "Z")
    return [g for g in _sp_gates() if propagate(g, tracked) == want]


def recovery_gate_for(tracked: SignedPauli, target_sign: int) -> SPGate:
    """Lexicographically first SP pair sending ``tracked`` to ``target_sign * Z``."""
    return _recovery_candidates(tracked, target_sign)[0]


def recovery_single(tracked: SignedPauli, rng: np.random.Generator) -> tuple[SPGate, int]:
    """Pick a target sign uniformly and the first SP pair mapping ``tracked`` to it.

    Returns ``(gate, sign)`` with ``propagate(gate, tracked) == sign * Z``.
    """
    if tracked.n_qubits != 1:
        raise ValueError("recovery_single expects a one-qubit Pauli")
    if tracked.is_identity():
        raise RuntimeError("cannot recover from the identity observable")
    sign = 1 if rng.random() < 0.5 else -1
    return recovery_gate_for(tracked, sign), sign


def _local_recovery(tracked: SignedPauli) -> list[MultiGateLabel]:
    gates = []
    for q, c in enumerate(tracked.ops):
        if c == "X":
            gates.append(H(q))
        elif c == "Y":
            gates.append(PHPgate(q))
    return gates


_BFS_MAX_QUBITS = 10


def _cnot_z_transfer(zbits: tuple, n: int) -> list[MultiGateLabel]:
    """Fewest nearest-neighbour CNOTs taking Z-support ``zbits`` to qubit 0 only.

    On Z-type Paulis ``CNOT(c, t)`` toggles ``z[c] ^= z[t]``.
    """
    goal = tuple([1] + [0] * (n - 1))
    if zbits == goal:
        return []
    pairs = nearest_neighbor_pairs(n)
    if n <= _BFS_MAX_QUBITS:
        prev = {zbits: None}
        queue = deque([zbits])
        while queue:
            cur = queue.popleft()
            for c, t in pairs:
                if not cur[t]:
                    continue
                nxt = list(cur)
                nxt[c] ^= 1
                nxt = tuple(nxt)
                if nxt in prev:
                    continue
                prev[nxt] = (cur, CNOT(c, t))
                if nxt == goal:
                    path = []
                    node = nxt
                    while prev[node] is not None:
                        node, g = prev[node]
                        path.append(g)
                    return path[::-1]
                queue.append(nxt)
        raise RuntimeError(f"no CNOT path from {zbits}")
    # greedy sweep from the far end of the chain toward qubit 0
    z = list(zbits)
    gates = []
    for q in range(n - 1, 0, -1):
        if not z[q]:
            continue
        if not z[q - 1]:
            gates.append(CNOT(q - 1, q))
            z[q - 1] ^= 1
        gates.append(CNOT(q, q - 1))
        z[q] ^= z[q - 1]
    return gates


def recovery_multi(tracked: SignedPauli) -> list[MultiGateLabel]:
    """Local H/PHP stage to reach an I/Z pattern, then a minimal CNOT transfer to qubit 0.

    Propagating ``tracked`` through the result gives ``+-Z I ... I``.
    """
    if tracked.is_identity():
        raise ValueError("cannot recover from the identity observable")
    local = _local_recovery(tracked)
    mid = propagate_sequence(local, tracked)
    zbits = tuple(int(c == "Z") for c in mid.ops)
    return local + _cnot_z_transfer(zbits, tracked.n_qubits)


# --- parallelization and dense matrices -------------------------------------

Timestep = tuple  # tuple[MultiGateLabel, ...] on pairwise disjoint qubits


def parallelize(seq: Sequence[MultiGateLabel]) -> list[Timestep]:
    """Greedy packing: each gate goes in the first timestep after every earlier
    gate that shares one of its qubits."""
    steps: list[list[MultiGateLabel]] = []
    last: dict[int, int] = {}
    for g in seq:
        slot = 1 + max((last.get(q, -1) for q in g.qubits), default=-1)
        if slot == len(steps):
            steps.append([])
        steps[slot].append(g)
        for q in g.qubits:
            last[q] = slot
    return [tuple(s) for s in steps]


def _embed(op: np.ndarray, qubit: int, n_qubits: int) -> np.ndarray:
    out = np.array([[1.0 + 0j]])
    for q in range(n_qubits):
        out = np.kron(out, op if q == qubit else I2)
    return out


def _cnot_matrix(c: int, t: int, n: int) -> np.ndarray:
    d = 2**n
    m = np.zeros((d, d), dtype=complex)
    for b in range(d):
        bits = [(b >> (n - 1 - q)) & 1 for q in range(n)]
        if bits[c]:
            bits[t] ^= 1
        out = sum(bit << (n - 1 - q) for q, bit in enumerate(bits))
        m[out, b] = 1
    return m


@lru_cache(maxsize=4096)
def gate_unitary(gate: MultiGateLabel, n_qubits: int) -> np.ndarray:
    """Dense ``2^n x 2^n`` unitary of a multi-qubit generator."""
    if gate.kind == "CNOT":
        return _cnot_matrix(gate.qubits[0], gate.qubits[1], n_qubits)
    single = {"H": HADAMARD, "PHP": PHP, "WAIT": I2}[gate.kind]
    return _embed(single, gate.qubits[0], n_qubits)


def embed_single(u: np.ndarray, qubit: int, n_qubits: int) -> np.ndarray:
    return _embed(np.asarray(u, dtype=complex), qubit, n_qubits)


def sequence_unitary(seq: Sequence[MultiGateLabel], n_qubits: int) -> np.ndarray:
    u = np.eye(2**n_qubits, dtype=complex)
    for g in seq:
        u = gate_unitary(g, n_qubits) @ u
    return u


def decompose_pauli(op: np.ndarray) -> SignedPauli:
    """Identify ``op`` as ``+-`` a Pauli string (dense reference, not used in tracking)."""
    d = op.shape[0]
    n = int(round(np.log2(d)))
    for letters in _all_strings(n):
        ref = SignedPauli(1, letters).matrix()
        overlap = np.trace(ref.conj().T @ op) / d
        if abs(abs(overlap) - 1) < 1e-9:
            if abs(overlap.imag) > 1e-9:
                raise ValueError("operator is not Hermitian")
            return SignedPauli(1 if overlap.real > 0 else -1, letters)
    raise ValueError("operator is not a signed Pauli string")


def _all_strings(n: int) -> list[str]:
    out = [""]
    for _ in range(n):
        out = [s + c for s in out for c in PAULI_AXES]
    return out


# --- text serialization -----------------------------------------------------

def format_sequence(gates: Iterable[Gate]) -> str:
    """One label per line: ``H 0``, ``CNOT 0 1``, ``P +X``, ``S -Y``."""
    lines = []
    for g in gates:
        if isinstance(g, SPGate):
            lines += [f"P {g.pauli}", f"S {g.symplectic}"]
        elif isinstance(g, PauliLabel):
            lines.append(f"P {g}")
        elif isinstance(g, SymplecticLabel):
            lines.append(f"S {g}")
        else:
            lines.append(str(g))
    return "\n".join(lines) + ("\n" if lines else "")


def parse_sequence(text: str) -> list[Gate]:
    """Inverse of :func:`format_sequence`; blank lines and ``#`` comments are skipped."""
    out: list[Gate] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, *rest = line.split()
        try:
            if head in ("P", "S"):
                if len(rest) != 1 or len(rest[0]) != 2:
                    raise ValueError("expected a signed axis such as +X")
                sign, axis = _parse_sign(rest[0][0]), rest[0][1]
                out.append(PauliLabel(axis, sign) if head == "P" else SymplecticLabel(axis, sign))
            else:
                out.append(MultiGateLabel(head, tuple(int(x) for x in rest)))
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
    return out
