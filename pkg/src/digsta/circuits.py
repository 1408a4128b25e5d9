"""Gate-level circuits: Pauli rotations, CNOT decompositions, Trotter blocks,
and two-qubit state preparation."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Literal, Sequence

import numpy as np

from .qcore import check_pauli, pauli_matrix
from .sta import AngleSequence, TermSlot, as_slots, full_term_slots

QUBITS = ("A", "B")
GateKind = Literal["rot", "cnot", "cz"]

_EYE4 = np.eye(4, dtype=complex)
_CNOT = {
    ("A", "B"): np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex),
    ("B", "A"): np.array([[1, 0, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0], [0, 1, 0, 0]], dtype=complex),
}
_CZ = np.diag([1, 1, 1, -1]).astype(complex)


@dataclass(frozen=True)
class Gate:
    kind: GateKind
    pauli: str = "II"
    angle: float = 0.0
    control: str = "A"
    target: str = "B"

    def __post_init__(self):
        if self.kind == "rot":
            check_pauli(self.pauli)
            if not math.isfinite(self.angle):
                raise ValueError("rotation angle must be finite")
        elif self.kind in ("cnot", "cz"):
            if self.control not in QUBITS or self.target not in QUBITS or self.control == self.target:
                raise ValueError(f"bad control/target {self.control}->{self.target}")
        else:
            raise ValueError(f"unknown gate kind {self.kind!r}")

    @property
    def is_two_qubit(self) -> bool:
        return self.kind != "rot" or "I" not in self.pauli

    def __str__(self) -> str:
        if self.kind == "rot":
            return f"ROT {self.pauli} {self.angle:.17g}"
        if self.kind == "cnot":
            return f"CNOT {self.control} {self.target}"
        return "CZ A B"


def rot(pauli: str, angle: float) -> Gate:
    return Gate("rot", pauli=pauli, angle=float(angle))


def cnot(control: str = "A", target: str = "B") -> Gate:
    return Gate("cnot", control=control, target=target)


def on_qubit(axis: str, qubit: str) -> str:
    """Two-qubit Pauli label of a single-qubit operator, e.g. ("X", "B") -> "IX"."""
    return axis + "I" if qubit == "A" else "I" + axis


@dataclass(frozen=True)
class Circuit:
    """Gates in application order (index 0 acts first)."""

    gates: tuple[Gate, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))

    def __add__(self, other: "Circuit") -> "Circuit":
        return Circuit(self.gates + other.gates)

    def __len__(self) -> int:
        return len(self.gates)

    def __iter__(self):
        return iter(self.gates)

    @property
    def cnot_count(self) -> int:
        return sum(g.kind == "cnot" for g in self.gates)

    def dumps(self) -> str:
        return "".join(f"{g}\n" for g in self.gates)

    @classmethod
    def loads(cls, text: str) -> "Circuit":
        gates = []
        for lineno, line in enumerate(text.splitlines(), start=1):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            try:
                if parts[0] == "ROT" and len(parts) == 3:
                    gates.append(rot(parts[1], float(parts[2])))
                elif parts[0] == "CNOT" and len(parts) == 3:
                    gates.append(cnot(parts[1], parts[2]))
                elif parts[0] == "CZ" and len(parts) == 3:
                    gates.append(Gate("cz", control=parts[1], target=parts[2]))
                else:
                    raise ValueError(f"unrecognised gate {line!r}")
            except ValueError as exc:
                raise ValueError(f"line {lineno}: {exc}") from None
        return cls(tuple(gates))


def rotation_matrix(pauli: str, angle: float) -> np.ndarray:
    """exp(-i angle P / 2) = cos(angle/2) I - i sin(angle/2) P."""
    return math.cos(angle / 2) * _EYE4 - 1j * math.sin(angle / 2) * pauli_matrix(pauli)


def gate_matrix(g: Gate) -> np.ndarray:
    if g.kind == "rot":
        return rotation_matrix(g.pauli, g.angle)
    if g.kind == "cnot":
        return _CNOT[(g.control, g.target)].copy()
    return _CZ.copy()


def circuit_unitary(c: Circuit) -> np.ndarray:
    u = _EYE4.copy()
    for g in c.gates:
        u = gate_matrix(g) @ u
    return u


# Basis change W with W^dagger Z W = -P for each X or Y factor; the circuit
# applies W, then the ZZ-rotation core, then W^dagger.  An odd number of such
# factors flips the sign of the core angle.
_TO_Z = {"X": ("Y", -math.pi / 2), "Y": ("X", math.pi / 2), "Z": None}


def decompose_two_qubit_rotation(pauli: str, theta: float) -> list[Gate]:
    """CNOT realisation of exp(-i theta P_A P_B / 2), equal up to global phase.

    For ``"YY"`` this is R_X(-pi/2)^{x2}, CNOT, R_ZB(theta), CNOT, R_X(pi/2)^{x2}
    in application order.
    """
    check_pauli(pauli)
    if "I" in pauli:
        raise ValueError(f"{pauli} acts on one qubit only; use a single-qubit rotation")
    pre, post = [], []
    sign = 1.0
    for qubit, axis in zip(QUBITS, pauli):
        change = _TO_Z[axis]
        if change is None:
            continue
        basis_axis, angle = change
        sign = -sign
        label = on_qubit(basis_axis, qubit)
        pre.append(rot(label, -angle))
        post.append(rot(label, angle))
    return pre + [cnot("A", "B"), rot("IZ", sign * theta), cnot("A", "B")] + post


def expand_rotation(pauli: str, theta: float) -> list[Gate]:
    if "I" in pauli:
        return [rot(pauli, theta)]
    return decompose_two_qubit_rotation(pauli, theta)


# --------------------------------------------------------------------------- presets

def _slots(*specs) -> tuple[TermSlot, ...]:
    return tuple(s if isinstance(s, TermSlot) else TermSlot(s) for s in specs)


# Slot lists in application order (the rightmost operator of each step first).
PRESETS: dict[str, tuple[TermSlot, ...]] = {
    "h2-ground": _slots("YY", ("YI", "IY"), ("XI", "IX"), ("ZI", "IZ")),
    "h2-excited": _slots("YY", "IZ", "ZI", "XI"),
    "h2-one-step": _slots("YY", ("ZI", "IZ")),
    "bhz": _slots("ZX", "IY", "IZ"),
    "bhz-one-step": _slots(TermSlot(("IZ",), 0.5), "ZX", TermSlot(("IZ",), 0.5)),
    "full": full_term_slots(),
}


def preset(name: str) -> tuple[TermSlot, ...]:
    try:
        return PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown term preset {name!r}; choose from {sorted(PRESETS)}") from None


def step_circuit(angles: Sequence[float], terms: Sequence[TermSlot]) -> Circuit:
    gates: list[Gate] = []
    for theta, slot in zip(angles, terms):
        # paired single-qubit rotations commute; emit in a fixed (sorted) order
        for pauli in sorted(slot.paulis):
            gates.extend(expand_rotation(pauli, theta))
    return Circuit(tuple(gates))


def trotter_circuit(seq: AngleSequence, terms: Iterable | str | None = None) -> Circuit:
    """Concatenate one block per Trotter step.

    ``terms`` (a preset name or slot list) is checked against ``seq.terms``.
    """
    if terms is not None:
        expected = preset(terms) if isinstance(terms, str) else as_slots(terms)
        if tuple(expected) != tuple(seq.terms):
            raise ValueError("angle sequence terms do not match the requested preset")
    out = Circuit()
    for row in seq.theta:
        out = out + step_circuit(row, seq.terms)
    return out


def step_blocks(seq: AngleSequence) -> list[Circuit]:
    return [step_circuit(row, seq.terms) for row in seq.theta]


# --------------------------------------------------------------------------- state preparation

def zyz_angles(u: np.ndarray) -> tuple[float, float, float]:
    """(beta, gamma, delta) with u = e^{i alpha} R_z(beta) R_y(gamma) R_z(delta)."""
    u = np.asarray(u, dtype=complex)
    u = u / np.sqrt(np.linalg.det(u))
    gamma = 2 * math.atan2(abs(u[1, 0]), abs(u[0, 0]))
    sum_half = np.angle(u[1, 1]) if abs(u[1, 1]) > 1e-12 else 0.0
    diff_half = np.angle(u[1, 0]) if abs(u[1, 0]) > 1e-12 else 0.0
    # u11 = e^{i(b+d)/2} cos(g/2), u10 = e^{i(b-d)/2} sin(g/2)
    beta = sum_half + diff_half
    delta = sum_half - diff_half
    return float(beta), float(gamma), float(delta)


def _local_unitary_gates(u: np.ndarray, qubit: str, tol: float = 1e-14) -> list[Gate]:
    beta, gamma, delta = zyz_angles(u)
    gates = [rot(on_qubit("Z", qubit), delta), rot(on_qubit("Y", qubit), gamma), rot(on_qubit("Z", qubit), beta)]
    return [g for g in gates if abs(math.remainder(g.angle, 4 * math.pi)) > tol]


def prepare_state(target: np.ndarray, tol: float = 1e-14) -> Circuit:
    """Circuit taking |00> to ``target`` (up to global phase).

    Schmidt form: R_Y on A sets the Schmidt weights, one CNOT entangles, and
    a Z-Y-Z triplet per qubit rotates into the Schmidt bases.
    """
    target = np.asarray(target, dtype=complex)
    if target.shape != (4,) or abs(np.linalg.norm(target) - 1) > 1e-10:
        raise ValueError("target must be a normalized two-qubit state vector")
    u, s, vh = np.linalg.svd(target.reshape(2, 2))
    gates: list[Gate] = []
    weight_angle = 2 * math.atan2(s[1], s[0])
    if abs(weight_angle) > tol:
        gates.append(rot("YI", weight_angle))
    if s[1] > tol:
        gates.append(cnot("A", "B"))
    gates += _local_unitary_gates(u, "A", tol)
    gates += _local_unitary_gates(vh.T, "B", tol)
    return Circuit(tuple(gates))
