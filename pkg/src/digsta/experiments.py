"""Experiment drivers behind the command-line subcommands.

Every driver returns a plain ``dict`` summary and, when ``write`` is true,
writes its CSV/JSON/SVG outputs under ``cfg.out``.  Sweep points are
independent and may be farmed out to worker processes; results are
collected in grid order so the files do not depend on scheduling.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Optional

import numpy as np

from .circuits import preset
from .config import ExperimentConfig, config_dict
from .models import (
    BHZParams,
    H2CoefficientTable,
    ModelDataError,
    bhz_hamiltonian,
    bhz_initial,
    bhz_scaled_reference,
    default_bhz_params,
    default_h2_table,
    h2_hamiltonian,
    h2_initial_excited,
    h2_initial_ground,
    h2_scaled_reference,
    load_bhz_params,
    load_h2_table,
)
from .plotting import emit_plot
from .qcore import herm_eig, level_energy, pauli_sum_matrix
from .sim import (
    NoiseParams,
    RunRecord,
    compile_sequence,
    fidelity_objective,
    run_digitized_sta,
)
from .sta import RefineOptions, STAProblem, angle_sequence, h_tot, projection_residual

log = logging.getLogger(__name__)

BRANCHES = {"ground": 0, "excited": 1}


@dataclass(frozen=True)
class RunSettings:
    """The subset of the config every single STA run needs (picklable)."""

    T: float
    sampling: str
    degeneracy_rtol: float
    refine: bool
    repreparation: bool
    noise: bool
    refine_options: RefineOptions

    @classmethod
    def from_config(cls, cfg: ExperimentConfig) -> "RunSettings":
        return cls(
            T=cfg.T,
            sampling=cfg.sampling,
            degeneracy_rtol=cfg.degeneracy_rtol,
            refine=cfg.refine,
            repreparation=cfg.repreparation,
            noise=cfg.noise,
            refine_options=RefineOptions(
                simplex_size=cfg.refine_simplex,
                fatol=cfg.refine_fatol,
                max_evals=cfg.refine_max_evals,
                seed=cfg.seed,
            ),
        )

    def problem(self, h0, h_target, psi0, M, terms, track) -> STAProblem:
        return STAProblem(
            h0=h0, h_target=h_target, psi0=psi0, T=self.T, M=M, terms=terms, track=track,
            sampling=self.sampling, degeneracy_rtol=self.degeneracy_rtol,
        )


@dataclass
class RunResult:
    problem: STAProblem
    theta: np.ndarray
    record: RunRecord
    compiled_fidelity: float
    max_residual: float

    def summary(self) -> dict:
        final = self.record.final
        return {
            "M": self.problem.M,
            "final_F": final.F,
            "final_E": final.E,
            "target_energy": self.record.target_energy,
            "compiled_F": self.compiled_fidelity,
            "max_projection_residual": self.max_residual,
            "theta": self.theta.tolist(),
        }


def execute(p: STAProblem, settings: RunSettings) -> RunResult:
    """Compile (and optionally refine) the angles of ``p`` and run the protocol."""
    compiled = angle_sequence(p)
    compiled_f = fidelity_objective(p)(compiled)
    seq = compile_sequence(p, refine=settings.refine, options=settings.refine_options)
    noise = NoiseParams() if settings.noise else None
    record = run_digitized_sta(p, seq, repreparation=settings.repreparation, noise=noise)
    residual = max(projection_residual(h_tot(p, s), p.terms) for s in p.sample_points())
    return RunResult(p, np.array(seq.theta), record, compiled_f, residual)


# --------------------------------------------------------------------------- inputs


def load_inputs(cfg: ExperimentConfig) -> tuple[H2CoefficientTable, BHZParams]:
    table = load_h2_table(cfg.h2_table) if cfg.h2_table else default_h2_table()
    params = load_bhz_params(cfg.bhz_params) if cfg.bhz_params else default_bhz_params()
    return table, params


def h2_reference_problem(table: H2CoefficientTable, R: float, branch: str, M: int,
                         settings: RunSettings, terms: Optional[str] = None) -> STAProblem:
    c = table.lookup(R)
    h0, psi0 = (h2_initial_ground if branch == "ground" else h2_initial_excited)(c)
    return settings.problem(h0, h2_hamiltonian(c), psi0, M, preset(terms or f"h2-{branch}"), BRANCHES[branch])


def bhz_reference_problem(params: BHZParams, kx0: float, branch: str, M: int,
                          settings: RunSettings, terms: Optional[str] = None) -> STAProblem:
    h0, psi0 = bhz_initial(kx0, params, branch)
    return settings.problem(h0, bhz_hamiltonian(kx0, 0.0, params), psi0, M, preset(terms or "bhz"), BRANCHES[branch])


# --------------------------------------------------------------------------- output helpers


def _fmt(x) -> str:
    if isinstance(x, float):
        return "nan" if math.isnan(x) else repr(x)
    return str(x)


def write_csv(path: Path, header: list[str], rows: Iterable[Iterable]) -> Path:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(buf.getvalue(), encoding="utf-8")
    return path


def _json_safe(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, np.generic):
        return _json_safe(obj.item())
    return obj


def write_json(path: Path, data: dict) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_json_safe(data), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def state_to_json(state: np.ndarray) -> list[list[float]]:
    return [[float(z.real), float(z.imag)] for z in state]


def state_from_json(data) -> np.ndarray:
    return np.array([complex(re, im) for re, im in data])


def _pmap(fn: Callable, items: list, workers: int) -> list:
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# --------------------------------------------------------------------------- H2 reference runs


def cmd_h2_reference(cfg: ExperimentConfig, write: bool = True) -> dict:
    """Multi-step STA at one distance for each M in ``cfg.M_list``."""
    branch = "ground" if cfg.experiment == "h2-ground-ref" else "excited"
    table, _ = load_inputs(cfg)
    if cfg.R not in table:
        raise ModelDataError(f"coefficient table has no row for R={cfg.R}")
    settings = RunSettings.from_config(cfg)
    out = Path(cfg.out)
    runs = []
    for M in cfg.M_values:
        result = execute(h2_reference_problem(table, cfg.R, branch, M, settings, cfg.terms or None), settings)
        runs.append(result.summary())
        if write:
            stem = out / f"{cfg.experiment}_M{M}"
            stem.parent.mkdir(parents=True, exist_ok=True)
            csv_path = stem.with_suffix(".csv")
            csv_path.write_text(result.record.to_csv(), encoding="utf-8")
            write_json(stem.with_suffix(".json"), result.record.to_dict())
            if cfg.plots:
                emit_plot(csv_path, "fidelity-vs-step", title=f"H2 {branch}, R={cfg.R} Å, M={M}")
    c = table.lookup(cfg.R)
    summary = {
        "experiment": cfg.experiment,
        "R": cfg.R,
        "coefficients": {"g0": c.g0, "g": c.g, "g12": c.g12},
        "target_energy": level_energy(pauli_sum_matrix(h2_hamiltonian(c)), BRANCHES[branch]),
        "runs": runs,
        "config": config_dict(cfg),
    }
    if write:
        write_json(out / f"{cfg.experiment}_summary.json", summary)
    return summary


# --------------------------------------------------------------------------- H2 landscape


def _reference_states_h2(table, R0, settings, M) -> dict[str, RunResult]:
    return {b: execute(h2_reference_problem(table, R0, b, M, settings), settings) for b in BRANCHES}


def _landscape_point(args) -> dict:
    table, R, R0, ref_states, settings = args
    c = table.lookup(R)
    h0 = h2_scaled_reference(table, R, R0)
    target = h2_hamiltonian(c)
    evals = herm_eig(pauli_sum_matrix(target))[0]
    row = {"R": R, "exact": [float(e) for e in evals]}
    for branch, n in BRANCHES.items():
        p = settings.problem(h0, target, ref_states[branch], 1, preset("h2-one-step"), n)
        res = execute(p, settings)
        row[branch] = {
            "E": res.record.final.E,
            "F": res.record.final.F,
            "compiled_F": res.compiled_fidelity,
            "theta": res.theta[0].tolist(),
            "state": state_to_json(res.record.final.state),
        }
    return row


def cmd_h2_landscape(cfg: ExperimentConfig, write: bool = True) -> dict:
    table, _ = load_inputs(cfg)
    settings = RunSettings.from_config(cfg)
    if cfg.R0 not in table:
        raise ModelDataError(f"coefficient table has no row for the reference R0={cfg.R0}")
    if table.lookup(cfg.R0).g12 == 0:
        raise ModelDataError("g12(R0) = 0; the reference scaling is undefined")
    grid = [R for R in cfg.R_values if R in table]
    if not grid:
        raise ModelDataError("no landscape grid point is covered by the coefficient table")
    refs = _reference_states_h2(table, cfg.R0, settings, cfg.reference_M)
    ref_states = {b: r.record.final.state for b, r in refs.items()}
    rows = _pmap(_landscape_point, [(table, R, cfg.R0, ref_states, settings) for R in grid], cfg.workers)
    summary = {
        "experiment": cfg.experiment,
        "R0": cfg.R0,
        "references": {
            b: {**r.summary(), "state": state_to_json(r.record.final.state)} for b, r in refs.items()
        },
        "points": rows,
        "config": config_dict(cfg),
    }
    if write:
        out = Path(cfg.out)
        csv_path = write_csv(
            out / "h2_landscape.csv",
            ["R", "eps0", "eps1", "F0", "F1", "theta1", "theta2"],
            [[r["R"], r["ground"]["E"], r["excited"]["E"], r["ground"]["F"], r["excited"]["F"],
              *r["ground"]["theta"]] for r in rows],
        )
        write_csv(
            out / "h2_landscape_angles.csv",
            ["R", "branch", "theta1", "theta2", "F_compiled", "F_final"],
            [[r["R"], b, *r[b]["theta"], r[b]["compiled_F"], r[b]["F"]] for r in rows for b in BRANCHES],
        )
        write_json(out / "h2_landscape_summary.json", summary)
        if cfg.plots:
            emit_plot(csv_path, "energy-vs-R", title=f"H2 one-step STA from R0={cfg.R0} Å")
    return summary


# --------------------------------------------------------------------------- BHZ


def _reference_runs_bhz(params, kx0, settings, M) -> dict[tuple[float, str], RunResult]:
    refs = {}
    for sign in (1.0, -1.0):
        k = sign * abs(kx0)
        for branch in BRANCHES:
            refs[(k, branch)] = execute(bhz_reference_problem(params, k, branch, M, settings), settings)
    return refs


def cmd_bhz_ref(cfg: ExperimentConfig, write: bool = True) -> dict:
    _, params = load_inputs(cfg)
    settings = RunSettings.from_config(cfg)
    out = Path(cfg.out)
    runs = []
    for M in cfg.M_values:
        for (k, branch), res in _reference_runs_bhz(params, cfg.kx0, settings, M).items():
            runs.append({"kx0": k, "branch": branch, **res.summary()})
            if write:
                stem = out / f"bhz-ref_k{k:+.3f}_{branch}_M{M}"
                stem.parent.mkdir(parents=True, exist_ok=True)
                csv_path = stem.with_suffix(".csv")
                csv_path.write_text(res.record.to_csv(), encoding="utf-8")
                write_json(stem.with_suffix(".json"), res.record.to_dict())
                if cfg.plots:
                    emit_plot(csv_path, "fidelity-vs-step", title=f"BHZ {branch}, kx0={k:+.2f}/a, M={M}")
    summary = {"experiment": cfg.experiment, "runs": runs, "config": config_dict(cfg)}
    if write:
        write_json(out / "bhz-ref_summary.json", summary)
    return summary


def _bands_point(args) -> dict:
    params, kx, kx0, ref_states, settings = args
    target = bhz_hamiltonian(kx, 0.0, params)
    evals = herm_eig(pauli_sum_matrix(target))[0]
    row = {"kx_a": kx, "exact": [float(e) for e in evals]}
    if abs(kx) < 1e-12:
        # Dirac point: the scaled initial Hamiltonian vanishes, so no STA run
        row["flag"] = "dirac-point-exact-diagonalization"
        for branch, n in BRANCHES.items():
            row[branch] = {"E": level_energy(pauli_sum_matrix(target), 0) if n == 0 else float(evals[-1]),
                           "F": float("nan"), "theta": []}
        return row
    k0 = math.copysign(abs(kx0), kx)
    h0 = bhz_scaled_reference(kx, k0, params)
    for branch, n in BRANCHES.items():
        p = settings.problem(h0, target, ref_states[(k0, branch)], 1, preset("bhz-one-step"), n)
        res = execute(p, settings)
        row[branch] = {
            "E": res.record.final.E,
            "F": res.record.final.F,
            "compiled_F": res.compiled_fidelity,
            "theta": res.theta[0].tolist(),
            "state": state_to_json(res.record.final.state),
        }
    return row


def cmd_bhz_bands(cfg: ExperimentConfig, write: bool = True) -> dict:
    _, params = load_inputs(cfg)
    settings = RunSettings.from_config(cfg)
    if params.g12(cfg.kx0) == 0 or cfg.kx0 == 0:
        raise ModelDataError("reference wavevector must not be the Dirac point")
    refs = _reference_runs_bhz(params, cfg.kx0, settings, cfg.reference_M)
    ref_states = {key: r.record.final.state for key, r in refs.items()}
    grid = cfg.kx_values
    rows = _pmap(_bands_point, [(params, kx, cfg.kx0, ref_states, settings) for kx in grid], cfg.workers)
    summary = {
        "experiment": cfg.experiment,
        "references": [
            {"kx0": k, "branch": b, **r.summary(), "state": state_to_json(r.record.final.state)}
            for (k, b), r in refs.items()
        ],
        "points": rows,
        "flagged": [r["kx_a"] for r in rows if "flag" in r],
        "config": config_dict(cfg),
    }
    if write:
        out = Path(cfg.out)
        csv_path = write_csv(
            out / "bhz_bands.csv",
            ["kx_a", "eps_valence", "eps_conduction", "F0", "F1"],
            [[r["kx_a"], r["ground"]["E"], r["excited"]["E"], r["ground"]["F"], r["excited"]["F"]] for r in rows],
        )
        write_json(out / "bhz_bands_summary.json", summary)
        if cfg.plots:
            emit_plot(csv_path, "bands", title="BHZ bands along X-Γ-X")
    return summary


# --------------------------------------------------------------------------- convergence


def _convergence_point(args) -> float:
    table, R, M, terms, settings = args
    res = execute(h2_reference_problem(table, R, "ground", M, settings, terms), settings)
    return res.record.final.F


def cmd_sta_convergence(cfg: ExperimentConfig, write: bool = True) -> dict:
    """Direct multi-step STA (no reference point) as a function of M."""
    table, _ = load_inputs(cfg)
    if cfg.R not in table:
        raise ModelDataError(f"coefficient table has no row for R={cfg.R}")
    settings = RunSettings.from_config(cfg)
    Ms = cfg.M_values
    terms = cfg.terms or "h2-ground"
    fs = _pmap(_convergence_point, [(table, cfg.R, M, terms, settings) for M in Ms], cfg.workers)
    reached = [M for M, f in zip(Ms, fs) if f >= cfg.threshold]
    summary = {
        "experiment": cfg.experiment,
        "R": cfg.R,
        "terms": terms,
        "threshold": cfg.threshold,
        "M_star": reached[0] if reached else None,
        "M_max": max(Ms),
        "curve": [{"M": M, "F_final": f} for M, f in zip(Ms, fs)],
        "config": config_dict(cfg),
    }
    if write:
        out = Path(cfg.out)
        csv_path = write_csv(out / "sta_convergence.csv", ["M", "F_final"], zip(Ms, fs))
        write_json(out / "sta_convergence_summary.json", summary)
        if cfg.plots:
            emit_plot(csv_path, "convergence", title=f"direct digitized STA, R={cfg.R} Å")
    return summary


COMMANDS: dict[str, Callable[[ExperimentConfig, bool], dict]] = {
    "h2-ground-ref": cmd_h2_reference,
    "h2-excited-ref": cmd_h2_reference,
    "h2-landscape": cmd_h2_landscape,
    "bhz-ref": cmd_bhz_ref,
    "bhz-bands": cmd_bhz_bands,
    "sta-convergence": cmd_sta_convergence,
}
