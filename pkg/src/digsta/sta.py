"""Counter-diabatic driving and its digitization into rotation angles.

The continuous protocol interpolates ``H_ad(s) = H0 + lam(s) (H - H0)`` with
``lam(s) = sin^2(pi s / 2)`` and ``s = t / T``, and adds the counter-diabatic
term built from the instantaneous spectral projectors.  The digitized
protocol samples ``H_tot`` once per Trotter step, projects it onto the
allowed gate generators, and turns the coefficients into angles
``theta = w * dt``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Literal, Sequence

import numpy as np
from scipy.optimize import minimize

from .qcore import (
    PAULI_LABELS,
    PauliSum,
    check_pauli,
    energy_levels,
    is_hermitian,
    pauli_matrix,
    pauli_sum_matrix,
    propagator,
)

log = logging.getLogger(__name__)

Sampling = Literal["right", "mid"]


def schedule(s: float) -> float:
    return math.sin(math.pi * s / 2) ** 2


def schedule_rate(s: float) -> float:
    """d lam / d s."""
    return math.pi / 2 * math.sin(math.pi * s)


@dataclass(frozen=True)
class TermSlot:
    """One rotation angle of a Trotter step.

    ``paulis`` share the angle (e.g. the paired Y_A, Y_B rotations); ``weight``
    splits a generator that appears in several slots of the same step, so
    ``R_ZB(t/2) R_ZX(t') R_ZB(t/2)`` is written with two half-weight Z_B slots.
    """

    paulis: tuple[str, ...]
    weight: float = 1.0

    def __post_init__(self):
        paulis = (self.paulis,) if isinstance(self.paulis, str) else tuple(self.paulis)
        if not paulis:
            raise ValueError("a term slot needs at least one Pauli string")
        for p in paulis:
            check_pauli(p)
            if p == "II":
                raise ValueError("the identity only contributes a global phase")
        object.__setattr__(self, "paulis", paulis)

    @property
    def label(self) -> str:
        return "+".join(self.paulis) if self.weight == 1.0 else f"{'+'.join(self.paulis)}*{self.weight:g}"


def as_slots(terms: Iterable) -> tuple[TermSlot, ...]:
    out = []
    for t in terms:
        if isinstance(t, TermSlot):
            out.append(t)
        else:
            out.append(TermSlot(t))
    return tuple(out)


def full_term_slots() -> tuple[TermSlot, ...]:
    """Every non-identity Pauli string: the unprojected Trotterization."""
    return tuple(TermSlot(p) for p in PAULI_LABELS if p != "II")


@dataclass(frozen=True)
class STAProblem:
    h0: PauliSum
    h_target: PauliSum
    psi0: np.ndarray
    T: float = 1.0
    M: int = 1
    terms: tuple[TermSlot, ...] = field(default_factory=full_term_slots)
    track: int = 0
    sampling: Sampling = "right"
    degeneracy_rtol: float = 1e-7

    def __post_init__(self):
        object.__setattr__(self, "terms", as_slots(self.terms))
        object.__setattr__(self, "psi0", np.asarray(self.psi0, dtype=complex))
        if self.M < 1:
            raise ValueError("M must be >= 1")
        if not self.T > 0:
            raise ValueError("T must be positive")
        if not self.terms:
            raise ValueError("term list is empty")
        if self.sampling not in ("right", "mid"):
            raise ValueError(f"unknown sampling rule {self.sampling!r}")
        if abs(np.linalg.norm(self.psi0) - 1) > 1e-10:
            raise ValueError("initial state is not normalized")

    def with_(self, **changes) -> "STAProblem":
        return replace(self, **changes)

    def sample_points(self) -> np.ndarray:
        m = np.arange(1, self.M + 1)
        return m / self.M if self.sampling == "right" else (m - 0.5) / self.M


@dataclass(frozen=True)
class AngleSequence:
    theta: np.ndarray  # shape (M, J), radians
    terms: tuple[TermSlot, ...]

    def __post_init__(self):
        theta = np.array(self.theta, dtype=float)
        if theta.ndim != 2 or theta.shape[1] != len(self.terms):
            raise ValueError(f"angle matrix shape {theta.shape} does not match {len(self.terms)} terms")
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)

    @property
    def M(self) -> int:
        return self.theta.shape[0]

    def with_theta(self, theta: np.ndarray) -> "AngleSequence":
        return AngleSequence(np.reshape(theta, self.theta.shape), self.terms)


def h_ad(p: STAProblem, s: float) -> PauliSum:
    return p.h0 + (p.h_target - p.h0).scaled(schedule(s))


def _spectral_decomposition(m: np.ndarray, rtol: float):
    evals, evecs = np.linalg.eigh(m)
    levels = energy_levels(evals, rtol=rtol, atol=1e-300)
    energies = [float(np.mean(evals[idx])) for idx in levels]
    projectors = [evecs[:, idx] @ evecs[:, idx].conj().T for idx in levels]
    return energies, projectors


def cd_from_projectors(energies, projectors, dh: np.ndarray) -> np.ndarray:
    """i sum_{a != b} P_a dH P_b / (E_b - E_a)."""
    out = np.zeros_like(dh, dtype=complex)
    for a, (ea, pa) in enumerate(zip(energies, projectors)):
        for b, (eb, pb) in enumerate(zip(energies, projectors)):
            if a != b:
                out += 1j * (pa @ dh @ pb) / (eb - ea)
    return out


def h_cd(p: STAProblem, s: float) -> np.ndarray:
    """Counter-diabatic Hamiltonian at reduced time ``s``.

    Eigenvalues closer than ``degeneracy_rtol`` times the spectral range are
    treated as one level; couplings inside a level are pure gauge and dropped.
    """
    rate = schedule_rate(s) / p.T
    dh = rate * pauli_sum_matrix(p.h_target - p.h0)
    if not np.any(dh):
        return np.zeros((4, 4), dtype=complex)
    energies, projectors = _spectral_decomposition(pauli_sum_matrix(h_ad(p, s)), p.degeneracy_rtol)
    out = cd_from_projectors(energies, projectors, dh)
    return 0.5 * (out + out.conj().T)


def h_tot(p: STAProblem, s: float) -> np.ndarray:
    return pauli_sum_matrix(h_ad(p, s)) + h_cd(p, s)


def project_onto_terms(m: np.ndarray, terms: Sequence) -> list[float]:
    """Hilbert-Schmidt projection of ``m`` onto the allowed generators.

    Each slot receives ``weight * mean_j Tr(P_j m) / 2`` over its shared Pauli
    strings; components outside the slots are discarded (see
    :func:`projection_residual`).
    """
    if not is_hermitian(m):
        raise ValueError("cannot project a non-Hermitian matrix")
    coeff = {}
    out = []
    for slot in as_slots(terms):
        vals = []
        for pstr in slot.paulis:
            if pstr not in coeff:
                coeff[pstr] = float(np.trace(pauli_matrix(pstr) @ m).real) / 2
            vals.append(coeff[pstr])
        out.append(slot.weight * float(np.mean(vals)))
    return out


def projection_residual(m: np.ndarray, terms: Sequence) -> float:
    """Frobenius norm of the traceless part of ``m`` not captured by the slots."""
    slots = as_slots(terms)
    omegas = project_onto_terms(m, slots)
    approx = np.zeros((4, 4), dtype=complex)
    for slot, w in zip(slots, omegas):
        for pstr in slot.paulis:
            approx += 0.5 * w * pauli_matrix(pstr)
    traceless = m - np.trace(m) / 4 * np.eye(4)
    return float(np.linalg.norm(traceless - approx))


def angle_sequence(p: STAProblem) -> AngleSequence:
    """theta[m, j] = w_j(s_m) * T / M with w from the projected ``H_tot``."""
    dt = p.T / p.M
    rows = [np.asarray(project_onto_terms(h_tot(p, s), p.terms)) * dt for s in p.sample_points()]
    return AngleSequence(np.array(rows), p.terms)


def continuous_sta_evolve(p: STAProblem, substeps: int = 2000) -> np.ndarray:
    """Midpoint-rule time-ordered product of exact propagators of ``H_tot``.

    Independent of the term projection and the gate compiler; used as the
    reference for everything downstream.
    """
    if substeps < 1:
        raise ValueError("substeps must be positive")
    dt = p.T / substeps
    psi = p.psi0.copy()
    for k in range(substeps):
        psi = propagator(h_tot(p, (k + 0.5) / substeps), dt) @ psi
    return psi / np.linalg.norm(psi)


@dataclass(frozen=True)
class RefineOptions:
    simplex_size: float = 0.05
    fatol: float = 1e-9
    max_evals: int = 2000
    max_restarts: int = 10
    seed: int = 0


def refine_angles(
    seq: AngleSequence,
    objective: Callable[[AngleSequence], float],
    options: RefineOptions = RefineOptions(),
) -> AngleSequence:
    """Nelder-Mead ascent of ``objective`` over the flattened angles.

    Each round restarts a fresh simplex at the incumbent; rounds stop once one
    gains less than ``fatol`` or the evaluation budget (per round) is spent.
    The returned sequence never scores below the input.  The seed fixes the
    orientation of every initial simplex.
    """
    rng = np.random.default_rng(options.seed)
    x = seq.theta.ravel().astype(float)
    n = x.size

    def loss(v):
        return -objective(seq.with_theta(v))

    best = start = loss(x)
    for round_ in range(options.max_restarts + 1):
        signs = np.ones(n) if round_ == 0 else rng.choice([-1.0, 1.0], size=n)
        steps = options.simplex_size * signs
        simplex = np.vstack([x] + [x + steps[i] * np.eye(n)[i] for i in range(n)])
        result = minimize(
            loss,
            x,
            method="Nelder-Mead",
            options={"initial_simplex": simplex, "maxfev": options.max_evals, "fatol": options.fatol, "xatol": 1e-10},
        )
        gain = best - result.fun
        if gain > 0:
            x, best = result.x, result.fun
        if gain < options.fatol:
            break
    log.debug("refine_angles: objective %.12f -> %.12f", -start, -best)
    if best < start - 1e-12:
        return seq.with_theta(x)
    return seq
