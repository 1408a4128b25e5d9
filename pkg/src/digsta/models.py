"""Target and initial Hamiltonians for the H2 molecule and the BHZ model."""
from __future__ import annotations

import configparser
import csv
import io
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import IO, Literal

import numpy as np

from .qcore import PauliSum, basis_state, normalize

H2_COLUMNS = ("R_angstrom", "g0", "g", "g12")
BHZ_KEYS = ("C1", "C2", "C3", "C4")

Branch = Literal["ground", "excited"]


class ModelDataError(ValueError):
    pass


@dataclass(frozen=True)
class H2Coefficients:
    R: float
    g0: float
    g: float
    g12: float

    def __post_init__(self):
        if not self.R > 0:
            raise ModelDataError(f"internuclear distance must be positive, got {self.R}")


@dataclass(frozen=True)
class H2CoefficientTable:
    rows: tuple[H2Coefficients, ...]

    def __post_init__(self):
        if not self.rows:
            raise ModelDataError("coefficient table is empty")
        rs = [r.R for r in self.rows]
        if any(b <= a for a, b in zip(rs, rs[1:])):
            raise ModelDataError("table rows must be strictly increasing in R")

    @property
    def distances(self) -> list[float]:
        return [r.R for r in self.rows]

    def lookup(self, R: float, tol: float = 1e-9) -> H2Coefficients:
        """Exact-match row lookup; the table is never interpolated."""
        for row in self.rows:
            if abs(row.R - R) <= tol:
                return row
        raise KeyError(f"R={R} Å is not a row of the coefficient table")

    def __contains__(self, R: float) -> bool:
        try:
            self.lookup(R)
        except KeyError:
            return False
        return True


def _as_text(source) -> str:
    if isinstance(source, (bytes, bytearray)):
        return source.decode("utf-8")
    if isinstance(source, (str, Path)):
        return Path(source).read_text(encoding="utf-8")
    data = source.read()
    return data.decode("utf-8") if isinstance(data, bytes) else data


def load_h2_table(source: str | Path | bytes | IO) -> H2CoefficientTable:
    """Parse the ``R_angstrom,g0,g,g12`` CSV (``#`` comments allowed).

    ``source`` is a path, raw bytes, or an open file.
    """
    text = _as_text(source)
    rows: list[H2Coefficients] = []
    header_seen = False
    for lineno, line in enumerate(io.StringIO(text), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        fields = [f.strip() for f in next(csv.reader([stripped]))]
        if not header_seen:
            if tuple(fields) != H2_COLUMNS:
                raise ModelDataError(f"line {lineno}: expected header {','.join(H2_COLUMNS)}")
            header_seen = True
            continue
        if len(fields) != 4:
            raise ModelDataError(f"line {lineno}: expected 4 fields, got {len(fields)}")
        try:
            values = [float(f) for f in fields]
        except ValueError as exc:
            raise ModelDataError(f"line {lineno}: {exc}") from None
        if not all(math.isfinite(v) for v in values):
            raise ModelDataError(f"line {lineno}: non-finite value")
        try:
            rows.append(H2Coefficients(*values))
        except ModelDataError as exc:
            raise ModelDataError(f"line {lineno}: {exc}") from None
    if not rows:
        raise ModelDataError("no coefficient rows found")
    rows.sort(key=lambda r: r.R)
    for a, b in zip(rows, rows[1:]):
        if a.R == b.R:
            raise ModelDataError(f"duplicate R={a.R}")
    return H2CoefficientTable(tuple(rows))


def default_h2_table() -> H2CoefficientTable:
    return load_h2_table(resources.files("digsta.data").joinpath("h2_coefficients.csv").read_bytes())


def h2_hamiltonian(c: H2Coefficients) -> PauliSum:
    """g0 + g Z_A + g Z_B + g12 Y_A Y_B."""
    return PauliSum({"II": 2 * c.g0, "ZI": 2 * c.g, "IZ": 2 * c.g, "YY": 2 * c.g12})


def h2_initial_ground(c: H2Coefficients) -> tuple[PauliSum, np.ndarray]:
    """H0 = g (Y_A + Y_B) and its eigenstate (|0> + i|1>)(|0> + i|1>)/2.

    The product state has H0 eigenvalue 2g, the ground level when g < 0.
    """
    if c.g == 0:
        raise ModelDataError("g = 0 gives a degenerate initial Hamiltonian")
    plus_y = normalize([1, 1j])
    return PauliSum({"YI": 2 * c.g, "IY": 2 * c.g}), np.kron(plus_y, plus_y)


def h2_initial_excited(c: H2Coefficients) -> tuple[PauliSum, np.ndarray]:
    if c.g == 0:
        raise ModelDataError("g = 0 gives a degenerate initial Hamiltonian")
    return PauliSum({"ZI": 2 * c.g}), basis_state("01")


def h2_scaled_reference(table: H2CoefficientTable, R: float, R0: float) -> PauliSum:
    """Reference-point initial Hamiltonian [g12(R) / g12(R0)] H(R0)."""
    ref = table.lookup(R0)
    if ref.g12 == 0:
        raise ModelDataError(f"g12(R0={R0}) = 0, scaling undefined")
    return h2_hamiltonian(ref).scaled(table.lookup(R).g12 / ref.g12)


# --------------------------------------------------------------------------- BHZ


@dataclass(frozen=True)
class BHZParams:
    C1: float
    C2: float
    C3: float
    C4: float
    a: float = 1.0

    def __post_init__(self):
        if not self.a > 0:
            raise ModelDataError("lattice constant must be positive")

    def g0(self, kx: float, ky: float = 0.0) -> float:
        return self.C1 - self.C2 * bhz_f(kx, ky, self.a)

    def g(self, kx: float, ky: float = 0.0) -> float:
        return self.C3 * bhz_f(kx, ky, self.a)

    def g12(self, k: float) -> float:
        return self.C4 * math.sin(k * self.a)


def load_bhz_params(source: str | Path | bytes | IO) -> BHZParams:
    """Read ``C1..C4`` (eV) and ``a_units`` from ``key = value`` text."""
    parser = configparser.ConfigParser()
    try:
        parser.read_string("[bhz]\n" + _as_text(source))
    except configparser.Error as exc:
        raise ModelDataError(f"malformed BHZ parameter file: {exc}") from None
    section = parser["bhz"]
    missing = [k for k in BHZ_KEYS if k not in section]
    if missing:
        raise ModelDataError(f"missing BHZ keys: {', '.join(missing)}")
    try:
        values = {k: float(section[k]) for k in BHZ_KEYS}
        a = float(section.get("a_units", "1.0"))
    except ValueError as exc:
        raise ModelDataError(str(exc)) from None
    return BHZParams(a=a, **values)


def default_bhz_params() -> BHZParams:
    return load_bhz_params(resources.files("digsta.data").joinpath("bhz_hgte.ini").read_bytes())


def bhz_f(kx: float, ky: float = 0.0, a: float = 1.0) -> float:
    return 8.0 * (math.sin(kx * a / 2) ** 2 + math.sin(ky * a / 2) ** 2)


def bhz_hamiltonian(kx: float, ky: float, p: BHZParams) -> PauliSum:
    """g0(k) + g(k) Z_B + Z_A [g12(kx) X_B + g12(ky) Y_B]."""
    return PauliSum({
        "II": 2 * p.g0(kx, ky),
        "IZ": 2 * p.g(kx, ky),
        "ZX": 2 * p.g12(kx),
        "ZY": 2 * p.g12(ky),
    })


def bhz_band_energies(kx: float, ky: float, p: BHZParams) -> tuple[float, float]:
    """Closed-form valence/conduction energies, each twofold degenerate."""
    r = math.sqrt(p.g(kx, ky) ** 2 + p.g12(kx) ** 2 + p.g12(ky) ** 2)
    return p.g0(kx, ky) - r, p.g0(kx, ky) + r


def bhz_initial(kx0: float, p: BHZParams, branch: Branch) -> tuple[PauliSum, np.ndarray]:
    """H0 = g(kx0) Z_B with |01> (ground) or |00> (excited)."""
    gk = p.g(kx0)
    if kx0 == 0 or gk == 0:
        raise ModelDataError("kx0 = 0 is the Dirac point; H0 would vanish")
    ground_bits, excited_bits = ("01", "00") if gk > 0 else ("00", "01")
    if branch not in ("ground", "excited"):
        raise ValueError(f"unknown branch {branch!r}")
    bits = ground_bits if branch == "ground" else excited_bits
    return PauliSum({"IZ": 2 * gk}), basis_state(bits)


def bhz_scaled_reference(kx: float, kx0: float, p: BHZParams) -> PauliSum:
    ref = p.g12(kx0)
    if ref == 0:
        raise ModelDataError(f"g12(kx0={kx0}) = 0, scaling undefined")
    return bhz_hamiltonian(kx0, 0.0, p).scaled(p.g12(kx) / ref)

