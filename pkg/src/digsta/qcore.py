"""Dense two-qubit linear algebra and Pauli-string algebra.

Conventions used throughout the package:

* qubit A is the first (most significant) tensor factor, so the basis order
  is |00>, |01>, |10>, |11> with |q_A q_B>;
* a :class:`PauliSum` stores the coefficients ``w_j`` of ``H = sum_j w_j P_j / 2``,
  so a rotation angle over a time step ``dt`` is simply ``w_j * dt``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from typing import Iterable, Mapping

import numpy as np

HERMITIAN_ATOL = 1e-10

_SINGLE = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

PAULI_LABELS: tuple[str, ...] = tuple(a + b for a, b in product("IXYZ", repeat=2))

_MATRIX_CACHE = {label: np.kron(_SINGLE[label[0]], _SINGLE[label[1]]) for label in PAULI_LABELS}
for _m in _MATRIX_CACHE.values():
    _m.setflags(write=False)


class NotHermitianError(ValueError):
    pass


class DegenerateStateError(ArithmeticError):
    """Raised when a requested eigenvector is not uniquely defined."""


def check_pauli(label: str) -> str:
    if not isinstance(label, str) or len(label) != 2 or any(c not in "IXYZ" for c in label):
        raise ValueError(f"invalid two-qubit Pauli string {label!r}")
    return label


@dataclass(frozen=True)
class PauliSum:
    """Real linear combination of two-qubit Pauli strings, ``sum_j w_j P_j / 2``."""

    terms: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for label, coeff in dict(self.terms).items():
            check_pauli(label)
            if isinstance(coeff, complex) or np.iscomplexobj(coeff):
                raise TypeError(f"coefficient of {label} must be real")
            clean[label] = float(coeff)
        object.__setattr__(self, "terms", dict(sorted(clean.items())))

    def __getitem__(self, label: str) -> float:
        return self.terms.get(check_pauli(label), 0.0)

    def __add__(self, other: "PauliSum") -> "PauliSum":
        out = dict(self.terms)
        for label, coeff in other.terms.items():
            out[label] = out.get(label, 0.0) + coeff
        return PauliSum(out)

    def __sub__(self, other: "PauliSum") -> "PauliSum":
        return self + other.scaled(-1.0)

    def scaled(self, factor: float) -> "PauliSum":
        return PauliSum({k: factor * v for k, v in self.terms.items()})

    def matrix(self) -> np.ndarray:
        return pauli_sum_matrix(self)

    def __repr__(self) -> str:
        body = ", ".join(f"{k}: {v:.6g}" for k, v in self.terms.items())
        return f"PauliSum({{{body}}})"


def pauli_matrix(label: str) -> np.ndarray:
    """4x4 matrix of a two-qubit Pauli string such as ``"ZI"`` or ``"YY"``."""
    return _MATRIX_CACHE[check_pauli(label)].copy()


def pauli_sum_matrix(h: PauliSum) -> np.ndarray:
    out = np.zeros((4, 4), dtype=complex)
    for label, coeff in h.terms.items():
        out += 0.5 * coeff * _MATRIX_CACHE[label]
    return out


def is_hermitian(m: np.ndarray, atol: float = HERMITIAN_ATOL) -> bool:
    m = np.asarray(m)
    return m.ndim == 2 and m.shape[0] == m.shape[1] and bool(np.allclose(m, m.conj().T, rtol=0, atol=atol))


def _require_hermitian(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m, dtype=complex)
    if m.shape not in ((2, 2), (4, 4)):
        raise ValueError(f"expected a 2x2 or 4x4 matrix, got shape {m.shape}")
    if not is_hermitian(m):
        raise NotHermitianError("matrix is not Hermitian within 1e-10")
    return m


def pauli_decompose(m: np.ndarray, drop: float = 0.0) -> PauliSum:
    """Inverse of :func:`pauli_sum_matrix`: ``w_j = Tr(P_j m) / 2``.

    Coefficients with magnitude ``<= drop`` are omitted.
    """
    m = _require_hermitian(m)
    if m.shape != (4, 4):
        raise ValueError("pauli_decompose expects a two-qubit (4x4) matrix")
    terms = {}
    for label in PAULI_LABELS:
        coeff = np.trace(_MATRIX_CACHE[label] @ m).real / 2.0
        if abs(coeff) > drop:
            terms[label] = coeff
    return PauliSum(terms)


def fix_phase(v: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Rotate the global phase so the first non-negligible amplitude is real positive."""
    v = np.asarray(v, dtype=complex)
    idx = np.flatnonzero(np.abs(v) > tol)
    if idx.size == 0:
        return v.copy()
    a = v[idx[0]]
    return v * (abs(a) / a)


def herm_eig(m: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
    """Ascending eigenvalues and phase-fixed orthonormal eigenvectors."""
    m = _require_hermitian(m)
    evals, evecs = np.linalg.eigh(0.5 * (m + m.conj().T))
    return evals, [fix_phase(evecs[:, i]) for i in range(evecs.shape[1])]


def energy_levels(evals: np.ndarray, rtol: float = 1e-9, atol: float = 1e-12) -> list[list[int]]:
    """Group sorted eigenvalue indices into (near-)degenerate levels."""
    evals = np.asarray(evals, dtype=float)
    tol = max(atol, rtol * float(evals[-1] - evals[0]))
    groups = [[0]]
    for i in range(1, len(evals)):
        if evals[i] - evals[groups[-1][-1]] <= tol:
            groups[-1].append(i)
        else:
            groups.append([i])
    return groups


def level_projector(m: np.ndarray, level: int, rtol: float = 1e-9) -> np.ndarray:
    """Spectral projector onto the ``level``-th distinct eigenvalue of ``m``.

    Degenerate eigenvalues (e.g. the BHZ bands) form a single level, so the
    projector is basis independent.
    """
    evals, evecs = np.linalg.eigh(_require_hermitian(m))
    levels = energy_levels(evals, rtol=rtol)
    if not 0 <= level < len(levels):
        raise IndexError(f"level {level} out of range ({len(levels)} distinct levels)")
    v = evecs[:, levels[level]]
    return v @ v.conj().T


def level_energy(m: np.ndarray, level: int, rtol: float = 1e-9) -> float:
    evals = np.linalg.eigvalsh(_require_hermitian(m))
    return float(np.mean(evals[energy_levels(evals, rtol=rtol)[level]]))


def propagator(h: np.ndarray, dt: float) -> np.ndarray:
    """exp(-i h dt) through the eigendecomposition of ``h``."""
    h = _require_hermitian(h)
    evals, evecs = np.linalg.eigh(h)
    return (evecs * np.exp(-1j * evals * dt)) @ evecs.conj().T


def normalize(v: Iterable[complex]) -> np.ndarray:
    v = np.asarray(v, dtype=complex)
    n = np.linalg.norm(v)
    if n == 0:
        raise ValueError("zero vector cannot be normalized")
    return v / n


def basis_state(bits: str) -> np.ndarray:
    """Computational basis state, e.g. ``basis_state("01")`` is |0>_A |1>_B."""
    v = np.zeros(2 ** len(bits), dtype=complex)
    v[int(bits, 2)] = 1.0
    return v


def fidelity(a: np.ndarray, b: np.ndarray) -> float:
    """|<b|a>|^2, clipped to [0, 1]."""
    return float(min(1.0, max(0.0, abs(np.vdot(b, a)) ** 2)))


def projected_fidelity(state: np.ndarray, projector: np.ndarray) -> float:
    """<psi|P|psi>; reduces to :func:`fidelity` for a rank-one projector."""
    return float(min(1.0, max(0.0, np.vdot(state, projector @ state).real)))


def expectation(h: PauliSum | np.ndarray, state: np.ndarray) -> float:
    m = pauli_sum_matrix(h) if isinstance(h, PauliSum) else np.asarray(h)
    value = np.vdot(state, m @ state)
    if abs(value.imag) > 1e-10 * max(1.0, abs(value.real)):
        raise NotHermitianError(f"expectation has imaginary part {value.imag:.3e}")
    return float(value.real)


def density_matrix(state: np.ndarray) -> np.ndarray:
    state = np.asarray(state, dtype=complex)
    return np.outer(state, state.conj())


def dominant_eigenvector(rho: np.ndarray, gap: float = 1e-9) -> np.ndarray:
    """Eigenvector of the largest population of a density matrix.

    Raises :class:`DegenerateStateError` if the top eigenvalue is not separated
    from the next one by more than ``gap``.
    """
    rho = _require_hermitian(rho)
    evals, evecs = np.linalg.eigh(rho)
    if evals[-1] - evals[-2] <= gap:
        raise DegenerateStateError(
            f"top populations {evals[-1]:.12f} and {evals[-2]:.12f} are degenerate"
        )
    return fix_phase(evecs[:, -1])
