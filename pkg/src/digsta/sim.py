"""Ideal and noisy execution of circuits, and the step-wise digitized-STA protocol."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .circuits import Circuit, gate_matrix, prepare_state, rotation_matrix, step_blocks
from .qcore import (
    DegenerateStateError,
    density_matrix,
    dominant_eigenvector,
    expectation,
    level_energy,
    level_projector,
    pauli_sum_matrix,
    projected_fidelity,
)
from .sta import AngleSequence, RefineOptions, STAProblem, angle_sequence, refine_angles


@dataclass(frozen=True)
class NoiseParams:
    """Coherence times in microseconds, gate durations in nanoseconds.

    The gate durations are not device data; they only set the per-gate
    error scale.
    """

    t1_A: float = 5.8
    t1_B: float = 6.9
    tphi_A: float = 26.0
    tphi_B: float = 28.0
    single_gate_ns: float = 30.0
    two_gate_ns: float = 45.0
    readout_A: tuple[float, float] = (0.99, 0.95)
    readout_B: tuple[float, float] = (0.97, 0.93)

    def __post_init__(self):
        for name in ("t1_A", "t1_B", "tphi_A", "tphi_B", "single_gate_ns", "two_gate_ns"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for f in self.readout_A + self.readout_B:
            if not 0 <= f <= 1:
                raise ValueError("readout fidelities must lie in [0, 1]")

    @classmethod
    def noiseless(cls) -> "NoiseParams":
        return cls(t1_A=math.inf, t1_B=math.inf, tphi_A=math.inf, tphi_B=math.inf,
                   readout_A=(1.0, 1.0), readout_B=(1.0, 1.0))


def amplitude_damping_kraus(gamma: float) -> list[np.ndarray]:
    return [
        np.array([[1, 0], [0, math.sqrt(1 - gamma)]], dtype=complex),
        np.array([[0, math.sqrt(gamma)], [0, 0]], dtype=complex),
    ]


def dephasing_kraus(p: float) -> list[np.ndarray]:
    """Off-diagonal elements shrink by (1 - p)."""
    return [
        math.sqrt(1 - p) * np.eye(2, dtype=complex),
        math.sqrt(p) * np.diag([1, 0]).astype(complex),
        math.sqrt(p) * np.diag([0, 1]).astype(complex),
    ]


def _lift(k: np.ndarray, qubit: str) -> np.ndarray:
    return np.kron(k, np.eye(2)) if qubit == "A" else np.kron(np.eye(2), k)


def apply_channel(rho: np.ndarray, kraus: list[np.ndarray], qubit: str) -> np.ndarray:
    out = np.zeros_like(rho)
    for k in kraus:
        k4 = _lift(k, qubit)
        out += k4 @ rho @ k4.conj().T
    return out


def _decay(duration_ns: float, time_us: float) -> float:
    return 0.0 if math.isinf(time_us) else 1.0 - math.exp(-duration_ns * 1e-3 / time_us)


def apply_idle_noise(rho: np.ndarray, duration_ns: float, n: NoiseParams) -> np.ndarray:
    for qubit, t1, tphi in (("A", n.t1_A, n.tphi_A), ("B", n.t1_B, n.tphi_B)):
        gamma = _decay(duration_ns, t1)
        if gamma:
            rho = apply_channel(rho, amplitude_damping_kraus(gamma), qubit)
        p = _decay(duration_ns, tphi)
        if p:
            rho = apply_channel(rho, dephasing_kraus(p), qubit)
    return rho


def run_ideal(c: Circuit, psi0: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi0, dtype=complex)
    for g in c.gates:
        psi = gate_matrix(g) @ psi
    return psi / np.linalg.norm(psi)


def evolve_density(c: Circuit, rho: np.ndarray, n: NoiseParams) -> np.ndarray:
    """Each gate is followed by amplitude damping and dephasing on both qubits."""
    rho = np.asarray(rho, dtype=complex)
    for g in c.gates:
        u = gate_matrix(g)
        rho = u @ rho @ u.conj().T
        rho = apply_idle_noise(rho, n.two_gate_ns if g.is_two_qubit else n.single_gate_ns, n)
    rho = 0.5 * (rho + rho.conj().T)
    return rho / np.trace(rho).real


def run_noisy(c: Circuit, psi0: np.ndarray, n: NoiseParams) -> np.ndarray:
    return evolve_density(c, density_matrix(psi0), n)


def readout_confusion(populations: np.ndarray, n: NoiseParams) -> np.ndarray:
    """Measured populations of |00>, |01>, |10>, |11> given true ones."""
    def confusion(f0, f1):
        return np.array([[f0, 1 - f1], [1 - f0, f1]])

    m = np.kron(confusion(*n.readout_A), confusion(*n.readout_B))
    return m @ np.asarray(populations, dtype=float)


# --------------------------------------------------------------------------- protocol


class StepFailure(ArithmeticError):
    def __init__(self, step: int, cause: Exception):
        super().__init__(f"step {step}: {cause}")
        self.step = step


@dataclass
class RunEntry:
    m: int
    F: float
    E: float
    state: np.ndarray


@dataclass
class RunRecord:
    entries: list[RunEntry] = field(default_factory=list)
    target_energy: float = float("nan")

    @property
    def final(self) -> RunEntry:
        return self.entries[-1]

    @property
    def fidelities(self) -> list[float]:
        return [e.F for e in self.entries]

    @property
    def energies(self) -> list[float]:
        return [e.E for e in self.entries]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["m", "F", "E"])
        for e in self.entries:
            writer.writerow([e.m, repr(e.F), repr(e.E)])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "target_energy": self.target_energy,
            "entries": [
                {"m": e.m, "F": e.F, "E": e.E, "state": [[z.real, z.imag] for z in e.state]}
                for e in self.entries
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "RunRecord":
        entries = [
            RunEntry(d["m"], d["F"], d["E"], np.array([complex(re, im) for re, im in d["state"]]))
            for d in data["entries"]
        ]
        return cls(entries, data.get("target_energy", float("nan")))


def run_digitized_sta(
    p: STAProblem,
    seq: AngleSequence,
    repreparation: bool = False,
    noise: Optional[NoiseParams] = None,
    record_steps: Optional[int] = None,
) -> RunRecord:
    """Apply the step blocks of ``seq`` one at a time and record F_m, E_m.

    ``record_steps`` truncates the run (``0`` keeps only the initial entry).
    With noise the state reported after each step is the dominant eigenvector
    of the density matrix; with ``repreparation`` every step starts from |00>
    and first runs the state-preparation circuit of the previous result.
    """
    if tuple(seq.terms) != tuple(p.terms):
        raise ValueError("angle sequence does not belong to this problem")
    h = pauli_sum_matrix(p.h_target)
    target = level_projector(h, p.track)
    record = RunRecord(target_energy=level_energy(h, p.track))

    def entry(m, state):
        return RunEntry(m, projected_fidelity(state, target), expectation(h, state), state)

    state = p.psi0 / np.linalg.norm(p.psi0)
    record.entries.append(entry(0, state))
    blocks = step_blocks(seq)
    if record_steps is not None:
        blocks = blocks[:record_steps]
    zero = np.zeros(4, dtype=complex)
    zero[0] = 1.0
    rho = density_matrix(state)
    for m, block in enumerate(blocks, start=1):
        if repreparation:
            start = zero
            circuit = prepare_state(state) + block
        else:
            start = state
            circuit = block
        if noise is None:
            state = run_ideal(circuit, start)
        else:
            rho = evolve_density(circuit, density_matrix(start) if repreparation else rho, noise)
            try:
                state = dominant_eigenvector(rho)
            except DegenerateStateError as exc:
                raise StepFailure(m, exc) from exc
        record.entries.append(entry(m, state))
    return record


def sequence_unitary(seq: AngleSequence) -> np.ndarray:
    """Product of the logical rotations, equal to the compiled circuit up to phase."""
    u = np.eye(4, dtype=complex)
    for row in seq.theta:
        for theta, slot in zip(row, seq.terms):
            for pauli in sorted(slot.paulis):
                u = rotation_matrix(pauli, theta) @ u
    return u


def fidelity_objective(p: STAProblem):
    """Ideal final-state fidelity against the tracked level of ``p.h_target``."""
    target = level_projector(pauli_sum_matrix(p.h_target), p.track)
    psi0 = p.psi0

    def objective(seq: AngleSequence) -> float:
        return projected_fidelity(sequence_unitary(seq) @ psi0, target)

    return objective


def compile_sequence(p: STAProblem, refine: bool = False, options: RefineOptions = RefineOptions()) -> AngleSequence:
    seq = angle_sequence(p)
    if refine:
        seq = refine_angles(seq, fidelity_objective(p), options)
    return seq
