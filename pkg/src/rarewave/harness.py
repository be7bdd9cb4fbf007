"""Experiment orchestration: configuration, single runs, studies, reports.

Configs are flat key=value text under [section] headers.  A single run
simulates the perturbed expansion-wave problem, reconstructs the front
foliation, and measures residuals, sign monitors, scaling quantities and
energies; studies aggregate runs over resolution, amplitude or start-time
ladders into JSON/CSV reports with gnuplot-ready data files.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import energies as en
from . import geometry as geo
from .euler2d import (FlowField, Grid, PerturbationMode, PerturbationSpec, SolverConfig,
                      clamped_fan_profile, init_perturbed_rarefaction, run, total_mass)
from .gas import PolytropicGas, density_from_sound_speed
from .snapshot_io import write_csv, write_planes, write_snapshot

__all__ = [
    "ConfigError",
    "RunConfig",
    "StudySpec",
    "parse_config",
    "default_config",
    "run_single",
    "run_study",
    "emit_plots",
]


class ConfigError(ValueError):
    """Invalid configuration; message carries the offending line when known."""


@dataclass
class RunConfig:
    # gas / background fan
    gamma: float = 2.0
    k0: float = 0.5
    v0: float = 0.0
    c0: float = 1.0
    # grid
    n1: int = 1024
    n2: int = 128
    x1_min: float = -2.4
    x1_max: float = 2.2
    # time window
    delta: float = 0.05
    t_star: float = 1.0
    # tracked band and data glue; u_lo excludes the front-corner layer that
    # the first-order solver smears into the foliation history
    u_star: float = 1.5
    u_lo: float = 0.3
    u_glue: float = 1.9
    # perturbation; k1 = 0 selects the plateau profile
    epsilon: float = 0.01
    seed: int = 2024
    modes: Tuple[Tuple[int, int, float], ...] = ((0, 1, 1.0), (0, 2, 0.5))
    strip_lo: float = -0.35
    strip_hi: float = 1.95
    # solver; each snapshot gets a partner a few cell-crossing times later so
    # two-time derivatives refine with the grid
    cfl: float = 0.45
    flux: str = "rusanov"
    integrator: str = "ssprk2"
    snapshots: int = 21
    pair_cells: int = 4
    # analysis
    orders: int = 1
    u_levels: int = 4
    with_fluxes: bool = True
    save_snapshots: str = "ends"  # none | ends | all
    workers: int = 1
    # output
    out_dir: str = "runs"

    def validate(self):
        try:
            PolytropicGas(self.gamma, self.k0)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.c0 <= 0.0:
            raise ConfigError("c0 must be positive")
        if self.v0 + self.c0 <= 0.0:
            raise ConfigError("fan head speed v0 + c0 must be positive")
        if self.n1 < 8 or self.n2 < 8:
            raise ConfigError("n1 and n2 must be at least 8")
        if self.x1_max <= self.x1_min:
            raise ConfigError("x1_max must exceed x1_min")
        dx1 = (self.x1_max - self.x1_min) / self.n1
        if self.delta <= 0.0:
            raise ConfigError("delta must be positive")
        if self.delta < 4.0 * dx1 / (self.v0 + self.c0):
            raise ConfigError(
                f"delta = {self.delta} under-resolves the fan: needs at least "
                f"4*dx1/(v0+c0) = {4.0 * dx1 / (self.v0 + self.c0):.4g}")
        if not self.delta < self.t_star <= 1.0:
            raise ConfigError("need delta < t_star <= 1")
        vacuum = (self.gamma + 1.0) / (self.gamma - 1.0) * self.c0
        if not 0.0 < self.u_star <= vacuum:
            raise ConfigError(
                f"u_star = {self.u_star} outside (0, vacuum bound {vacuum:.4g}]")
        if not self.u_star < self.u_glue < vacuum:
            raise ConfigError(
                f"u_glue = {self.u_glue} must lie in (u_star, vacuum bound {vacuum:.4g})")
        if not 0.0 <= self.u_lo < self.u_star:
            raise ConfigError("u_lo must lie in [0, u_star)")
        if self.epsilon < 0.0:
            raise ConfigError("epsilon must be non-negative")
        if not 0.0 < self.cfl <= 0.9:
            raise ConfigError(f"cfl = {self.cfl} outside (0, 0.9]")
        if self.flux not in ("rusanov", "hll"):
            raise ConfigError(f"unknown flux {self.flux!r}")
        if self.integrator not in ("euler", "ssprk2"):
            raise ConfigError(f"unknown integrator {self.integrator!r}")
        if self.snapshots < 2:
            raise ConfigError("need at least 2 snapshots")
        if not self.x1_min < self.strip_lo < self.strip_hi < self.x1_max:
            raise ConfigError("perturbation strip must sit inside the x1 domain")
        if self.orders < 0 or self.orders > en.ORDER_CAP:
            raise ConfigError(f"orders must lie in [0, {en.ORDER_CAP}]")
        if self.save_snapshots not in ("none", "ends", "all"):
            raise ConfigError(f"unknown save_snapshots {self.save_snapshots!r}")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        return self

    def gas(self) -> PolytropicGas:
        return PolytropicGas(self.gamma, self.k0)

    def grid(self) -> Grid:
        return Grid(self.n1, self.n2, self.x1_min, self.x1_max)

    def perturbation(self) -> PerturbationSpec:
        rng = np.random.default_rng(self.seed)
        modes = tuple(
            PerturbationMode(k1=k1, k2=k2, amplitude=amp,
                             phase=float(rng.uniform(0.0, 2.0 * math.pi)))
            for (k1, k2, amp) in self.modes)
        return PerturbationSpec(epsilon=self.epsilon, modes=modes,
                                strip=(self.strip_lo, self.strip_hi))

    def base_times(self) -> np.ndarray:
        # geometric spacing: the flow scales like 1/t near the start time, so
        # uniform snapshot gaps would under-resolve the early foliation
        ratio = self.t_star / self.delta
        return self.delta * ratio ** (np.arange(self.snapshots) / (self.snapshots - 1.0))

    def pair_gap(self) -> float:
        dx1 = (self.x1_max - self.x1_min) / self.n1
        return self.pair_cells * dx1 / (self.v0 + self.c0)

    def ladder(self):
        """(all snapshot times, base indices, partner indices).

        Each base time gets a partner one pair_gap later (earlier for the
        final time); near-coincident points are merged.
        """
        base = self.base_times()
        gap = self.pair_gap()
        pts = list(base)
        for t in base:
            pts.append(t + gap if t + gap <= self.t_star + 1e-12 else t - gap)
        pts = sorted(pts)
        merged = [pts[0]]
        for p in pts[1:]:
            if p - merged[-1] > 0.05 * gap:
                merged.append(p)
        merged = np.asarray(merged)

        def locate(t):
            return int(np.argmin(np.abs(merged - t)))

        base_idx = [locate(t) for t in base]
        pair_idx = [locate(t + gap if t + gap <= self.t_star + 1e-12 else t - gap)
                    for t in base]
        return merged, base_idx, pair_idx

    def solver(self) -> SolverConfig:
        times, _, _ = self.ladder()
        return SolverConfig(cfl=self.cfl, flux=self.flux,
                            time_integrator=self.integrator,
                            snapshot_times=tuple(times))

    def content_hash(self) -> str:
        payload = json.dumps(dataclasses.asdict(self), sort_keys=True).encode()
        return hashlib.sha256(payload).hexdigest()[:16]


@dataclass
class StudySpec:
    kind: str  # single | convergence | epsilon_scaling | delta_robustness
    ladder: Tuple[float, ...] = ()

    def __post_init__(self):
        kinds = ("single", "convergence", "epsilon_scaling", "delta_robustness")
        if self.kind not in kinds:
            raise ConfigError(f"unknown study kind {self.kind!r}")
        if self.kind != "single" and len(self.ladder) < 2:
            raise ConfigError(f"{self.kind} study needs a ladder of at least 2 values")


# ---------------------------------------------------------------------------
# config text parsing

_SECTIONS = {
    "gas": {"gamma": float, "k0": float},
    "fan": {"v0": float, "c0": float},
    "grid": {"n1": int, "n2": int, "x1_min": float, "x1_max": float},
    "time": {"delta": float, "t_star": float},
    "band": {"u_star": float, "u_lo": float, "u_glue": float},
    "perturbation": {"epsilon": float, "seed": int, "modes": "modes",
                     "strip_lo": float, "strip_hi": float},
    "solver": {"cfl": float, "flux": str, "integrator": str, "snapshots": int},
    "analysis": {"orders": int, "u_levels": int, "with_fluxes": "bool",
                 "save_snapshots": str, "workers": int},
    "output": {"dir": "out_dir"},
}


def _parse_modes(text: str):
    modes = []
    for part in text.split(","):
        bits = part.strip().split(":")
        if len(bits) != 3:
            raise ValueError(f"mode {part!r} is not k1:k2:amplitude")
        modes.append((int(bits[0]), int(bits[1]), float(bits[2])))
    return tuple(modes)


def parse_config(text: str) -> RunConfig:
    """Parse key=value sections into a validated RunConfig."""
    values: Dict[str, object] = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip().lower()
            if section not in _SECTIONS:
                raise ConfigError(f"line {lineno}: unknown section [{section}]")
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
        if section is None:
            raise ConfigError(f"line {lineno}: key outside any [section]")
        key, val = (s.strip() for s in line.split("=", 1))
        spec = _SECTIONS[section]
        if key not in spec:
            raise ConfigError(f"line {lineno}: unknown key {key!r} in [{section}]")
        kind = spec[key]
        try:
            if kind is float:
                values[key] = float(val)
            elif kind is int:
                values[key] = int(val)
            elif kind is str:
                values[key] = val
            elif kind == "bool":
                values[key] = val.lower() in ("1", "true", "yes", "on")
            elif kind == "modes":
                values["modes"] = _parse_modes(val)
            elif kind == "out_dir":
                values["out_dir"] = val
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from None
    cfg = RunConfig(**values)
    try:
        return cfg.validate()
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def default_config() -> RunConfig:
    return RunConfig().validate()


# ---------------------------------------------------------------------------
# single run

def _band(cfg: RunConfig, u: np.ndarray) -> np.ndarray:
    return geo.band_mask(u, cfg.u_lo, cfg.u_star)


def _x2_variation(snapshots: Sequence[FlowField]) -> float:
    worst = 0.0
    for s in snapshots:
        for a in (s.rho, s.m1, s.m2):
            worst = max(worst, float(np.max(np.abs(a - a[:, :1]))))
    return worst


def _l1_fan_error(cfg: RunConfig, snapshot: FlowField) -> float:
    gas, grid = snapshot.gas, snapshot.grid
    X1, _ = grid.mesh()
    _, c_exact = clamped_fan_profile(gas, cfg.v0, cfg.c0, cfg.u_glue, X1, snapshot.time)
    rho_exact = density_from_sound_speed(gas, c_exact)
    return float(np.sum(np.abs(snapshot.rho - rho_exact))) * grid.dx1 * grid.dx2


def run_single(cfg: RunConfig, out_dir: Optional[Path] = None) -> dict:
    """Simulate, reconstruct the foliation, measure everything, write reports.

    Returns the report dict; also persists report.json, CSV tables and a
    MANIFEST under out_dir (skipping the work when a completed manifest
    with the same config hash is already present).
    """
    cfg.validate()
    out = Path(out_dir) if out_dir is not None else Path(cfg.out_dir) / f"run-{cfg.content_hash()}"
    out.mkdir(parents=True, exist_ok=True)
    manifest_path = out / "MANIFEST.json"
    report_path = out / "report.json"
    if manifest_path.exists():
        manifest = json.loads(manifest_path.read_text())
        if manifest.get("status") == "completed" \
                and manifest.get("config_hash") == cfg.content_hash() and report_path.exists():
            report = json.loads(report_path.read_text())
            report["cached"] = True
            return report
    manifest_path.write_text(json.dumps(
        {"status": "running", "config_hash": cfg.content_hash()}))
    try:
        report = _run_single_inner(cfg, out)
    except Exception as exc:
        manifest_path.write_text(json.dumps(
            {"status": "failed", "config_hash": cfg.content_hash(), "error": repr(exc)}))
        raise
    report_path.write_text(json.dumps(report, indent=1))
    manifest_path.write_text(json.dumps(
        {"status": "completed", "config_hash": cfg.content_hash()}))
    return report


def _run_single_inner(cfg: RunConfig, out: Path) -> dict:
    gas, grid = cfg.gas(), cfg.grid()
    spec = cfg.perturbation()
    solver = cfg.solver()
    _, base_idx, pair_idx = cfg.ladder()

    field0 = init_perturbed_rarefaction(gas, grid, cfg.delta, (cfg.v0, cfg.c0), spec,
                                        u_glue=cfg.u_glue)
    snapshots = run(field0, solver)
    times = [s.time for s in snapshots]

    X1, _ = grid.mesh()
    u_init = (cfg.v0 + cfg.c0) - X1 / cfg.delta
    u_seq = geo.evolve_u(snapshots, u_init, cfl=cfg.cfl)
    foliations = [geo.frame_fields(s, u, check_band=(cfg.u_lo, cfg.u_star))
                  for s, u in zip(snapshots, u_seq)]

    report: dict = {
        "config": dataclasses.asdict(cfg),
        "config_hash": cfg.content_hash(),
        "times": [times[k] for k in base_idx],
        "cached": False,
    }

    # conservation and symmetry bookkeeping
    report["x2_variation"] = _x2_variation(snapshots)
    mass0 = total_mass(snapshots[0])
    report["mass_drift"] = [
        total_mass(s) + s.boundary_mass_flux - mass0 for s in snapshots]
    write_csv(out / "conservation.csv", ["t", "mass", "boundary_outflow", "drift"],
              [[s.time, total_mass(s), s.boundary_mass_flux, d]
               for s, d in zip(snapshots, report["mass_drift"])])
    report["l1_fan_error_final"] = (_l1_fan_error(cfg, snapshots[-1])
                                    if cfg.epsilon == 0.0 else None)

    # ray-traced cross-check of the level-set transport: u along a few
    # generator rays seeded across the band should stay constant
    seeds_u = np.linspace(cfg.u_lo + 0.1, cfg.u_star - 0.1, 5)
    x1_seed = ((cfg.v0 + cfg.c0) - seeds_u) * cfg.delta
    x2_seed = np.full_like(x1_seed, math.pi)
    _, u_along = geo.trace_characteristics(snapshots, foliations, x1_seed, x2_seed)
    report["ray_u_drift"] = float(np.max(np.abs(u_along - u_along[0])))

    # pointwise foliation statistics over the tracked band at base times
    kappa_rows, frame_rows = [], []
    for k in base_idx:
        s, fol = snapshots[k], foliations[k]
        m = _band(cfg, fol.u)
        if not np.any(m):
            continue
        kappa_rows.append([s.time,
                           float(np.max(np.abs(fol.kappa[m] / s.time - 1.0))),
                           float(np.max(np.abs(fol.mu[m] - s.c[m] * fol.kappa[m])))])
        frame_rows.append([s.time,
                           float(np.max(np.abs(fol.that1[m] + 1.0))),
                           float(np.max(np.abs(fol.that2[m]))),
                           float(np.max(np.abs(fol.chi[m]))),
                           float(np.max(np.abs(fol.zeta[m]))),
                           float(np.max(np.abs(fol.eta[m])))])
    report["kappa_stats"] = kappa_rows
    report["frame_stats"] = frame_rows
    write_csv(out / "kappa_stats.csv", ["t", "max_kappa_over_t_dev", "max_mu_identity_dev"],
              kappa_rows)
    write_csv(out / "frame_stats.csv",
              ["t", "max_that1p1", "max_that2", "max_chi", "max_zeta", "max_eta"], frame_rows)

    # sign monitors, second-frame extrema and residuals per (base, partner)
    # pair; each pair spans a few cell-crossing times so the two-time
    # derivatives refine with the grid
    monitor_rows = []
    yscale_rows = []
    residual_rows = []
    for kb, kp in zip(base_idx, pair_idx):
        k0, k1 = (kb, kp) if times[kp] > times[kb] else (kp, kb)
        s0, s1 = snapshots[k0], snapshots[k1]
        m = _band(cfg, foliations[k0].u)
        if not np.any(m):
            continue
        mon = geo.sign_monitors(s0, s1, foliations[k0], foliations[k1], m)
        monitor_rows.append([snapshots[kb].time,
                             mon["L_mu"][0], mon["L_mu"][1],
                             mon["T_wbar"][0], mon["T_wbar"][1],
                             mon["Lbar_wbar"][0], mon["Lbar_wbar"][1]])
        frame = geo.second_frame(snapshots[kb])
        mb = _band(cfg, foliations[kb].u)
        yscale_rows.append([snapshots[kb].time,
                            float(np.max(np.abs(frame.yt[mb]))),
                            float(np.max(np.abs(frame.zt[mb]))),
                            float(np.max(np.abs(frame.y[mb]))),
                            float(np.max(np.abs(frame.z[mb])))])
        ry = geo.commutation_residual_y(s0, s1)
        rz = geo.commutation_residual_z(s0, s1)
        struct = geo.structure_residuals(s0, s1, foliations[k0], foliations[k1])
        row = [snapshots[kb].time, float(np.max(np.abs(ry[m]))), float(np.max(np.abs(rz[m])))]
        for name in ("kappa", "that1", "that2", "chi"):
            res, ok = struct[name]
            sel = m & ok
            row.append(float(np.max(np.abs(res[sel]))) if np.any(sel) else float("nan"))
        residual_rows.append(row)
    report["monitors"] = monitor_rows
    report["second_frame_stats"] = yscale_rows
    report["residuals"] = residual_rows
    write_csv(out / "monitors.csv",
              ["t", "min_L_mu", "max_L_mu", "min_T_wbar", "max_T_wbar",
               "min_Lbar_wbar", "max_Lbar_wbar"], monitor_rows)
    write_csv(out / "second_frame.csv",
              ["t", "max_yt", "max_zt", "max_y", "max_z"], yscale_rows)
    write_csv(out / "residuals.csv",
              ["t", "commutation_y", "commutation_z", "structure_kappa",
               "structure_that1", "structure_that2", "structure_chi"], residual_rows)

    # initial-slice predicates
    predicate_lines = en.check_data_predicates(snapshots[0], foliations[0], cfg.epsilon,
                                               cfg.delta, cfg.u_star)
    report["data_predicates"] = [[p.name, p.measured, p.scale, p.passed]
                                 for p in predicate_lines]

    # energies
    analysis = en.EnergyAnalysis(snapshots, foliations, u_min=cfg.u_lo)
    u_values = list(np.linspace(cfg.u_star / cfg.u_levels, cfg.u_star, cfg.u_levels)) \
        if cfg.u_levels > 1 else [cfg.u_star]
    energy_report = analysis.report(
        psis=("wbar", "w", "psi2"), orders=list(range(cfg.orders + 1)),
        t_indices=base_idx, u_values=u_values,
        epsilon=cfg.epsilon, with_fluxes=cfg.with_fluxes)
    energy_rows = [[r.t, r.u, r.psi, r.n, r.E, r.Ebar, r.F, r.Fbar,
                    r.E0ring if r.E0ring is not None else "",
                    r.F0ring if r.F0ring is not None else ""]
                   for r in energy_report.rows]
    report["energies"] = energy_rows
    write_csv(out / "energies.csv",
              ["t", "u", "psi", "n", "E", "Ebar", "F", "Fbar", "E0ring", "F0ring"],
              energy_rows)

    # measured growth-lemma instance at order 0 for w (fit + verdict)
    gron = _measured_gronwall(cfg, energy_report, [times[k] for k in base_idx])
    report["gronwall_fit"] = gron

    if cfg.save_snapshots != "none":
        chosen = snapshots if cfg.save_snapshots == "all" else [snapshots[0], snapshots[-1]]
        for s in chosen:
            write_snapshot(s, out / f"snapshot_t{s.time:.4f}.rwl")
        fol = foliations[-1]
        write_planes(grid, fol.time, gas,
                     {"u": fol.u, "kappa": fol.kappa, "mu": fol.mu,
                      "that1": fol.that1, "that2": fol.that2, "chi": fol.chi,
                      "zeta": fol.zeta, "eta": fol.eta},
                     out / "foliation_final.rwl")
    return report


def _measured_gronwall(cfg: RunConfig, energy_report: en.EnergyReport, times) -> dict:
    """Fit hypothesis constants to the measured order-0 outgoing data for w."""
    u_vals = sorted({r.u for r in energy_report.rows})
    if len(u_vals) < 2 or cfg.epsilon == 0.0:
        return {"fitted": False}
    u_lattice = np.array([0.0] + u_vals)
    E = np.zeros((len(times), len(u_lattice)))
    F = np.zeros_like(E)
    for r in energy_report.rows:
        if r.psi != "w" or r.n != 0 or not np.isfinite(r.F):
            continue
        k = int(np.argmin(np.abs(np.asarray(times) - r.t)))
        j = int(np.argmin(np.abs(u_lattice - r.u)))
        E[k, j] = r.E
        F[k, j] = r.F
    try:
        inst = en.fit_gronwall_constants(E, F, np.asarray(times), u_lattice)
        verdict = en.gronwall_verify(inst)
        return {"fitted": True, "A": inst.A, "B": inst.B, "C": inst.C,
                "max_ratio": verdict.max_ratio, "passed": verdict.passed}
    except en.GronwallHypothesisError as exc:
        return {"fitted": True, "passed": False, "error": str(exc)}


# ---------------------------------------------------------------------------
# studies

def _member_config(cfg: RunConfig, kind: str, value: float) -> RunConfig:
    if kind == "convergence":
        return dataclasses.replace(cfg, n1=int(value))
    if kind == "epsilon_scaling":
        return dataclasses.replace(cfg, epsilon=float(value))
    if kind == "delta_robustness":
        return dataclasses.replace(cfg, delta=float(value))
    return cfg


def _run_member(args):
    cfg, out_dir = args
    return run_single(cfg, out_dir=Path(out_dir))


def run_study(spec: StudySpec, cfg: RunConfig, out_dir: Optional[Path] = None) -> dict:
    """Execute the study members and aggregate their reports.

    Failures of individual members are recorded and the study continues.
    """
    cfg.validate()
    out = Path(out_dir) if out_dir is not None else Path(cfg.out_dir) / f"study-{spec.kind}"
    out.mkdir(parents=True, exist_ok=True)
    members = [("single", cfg)] if spec.kind == "single" else [
        (f"{spec.kind}-{v:g}", _member_config(cfg, spec.kind, v)) for v in spec.ladder]

    jobs = [(mc, str(out / name)) for name, mc in members]
    results: List[Optional[dict]] = [None] * len(jobs)
    failures: List[str] = []
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            futs = [pool.submit(_run_member, j) for j in jobs]
            for i, f in enumerate(futs):
                try:
                    results[i] = f.result()
                except Exception as exc:
                    failures.append(f"{members[i][0]}: {exc!r}")
    else:
        for i, j in enumerate(jobs):
            try:
                results[i] = _run_member(j)
            except Exception as exc:
                failures.append(f"{members[i][0]}: {exc!r}")

    study = {"kind": spec.kind, "ladder": list(spec.ladder), "failures": failures,
             "members": [m[0] for m in members],
             "reports": [r for r in results]}
    if spec.kind == "convergence" and all(r is not None for r in results):
        study["convergence"] = _convergence_metrics(results)
    if spec.kind == "epsilon_scaling" and all(r is not None for r in results):
        study["epsilon_scaling"] = _epsilon_metrics(results, spec.ladder)
    if spec.kind == "delta_robustness" and all(r is not None for r in results):
        study["delta_robustness"] = _delta_metrics(results)
    (out / "study.json").write_text(json.dumps(study, indent=1))
    emit_plots(study, out)
    return study


def _final_residual(report: dict, col: int) -> float:
    rows = report["residuals"]
    vals = [r[col] for r in rows if r[0] >= 2.0 * report["config"]["delta"]
            and np.isfinite(r[col])]
    return float(np.max(vals)) if vals else float("nan")


def _convergence_metrics(results: Sequence[dict]) -> dict:
    """Fan-error and residual ratios between consecutive resolutions."""
    out = {"n1": [r["config"]["n1"] for r in results]}
    errs = [r["l1_fan_error_final"] for r in results]
    if all(e is not None for e in errs):
        out["l1_fan_error"] = errs
        out["l1_ratios"] = [errs[i] / errs[i + 1] for i in range(len(errs) - 1)]
    names = {"commutation_y": 1, "commutation_z": 2, "structure_kappa": 3,
             "structure_that1": 4, "structure_that2": 5}
    for name, col in names.items():
        vals = [_final_residual(r, col) for r in results]
        out[name] = vals
        out[name + "_ratios"] = [vals[i] / vals[i + 1] if vals[i + 1] else float("nan")
                                 for i in range(len(vals) - 1)]
    return out


def _energy_at(report: dict, psi: str, n: int, ring: bool = False) -> float:
    """Energy at the final time and widest band from a report's rows."""
    rows = report["energies"]
    best_t = max(r[0] for r in rows)
    best_u = max(r[1] for r in rows)
    for r in rows:
        if r[0] == best_t and r[1] == best_u and r[2] == psi and r[3] == n:
            if ring:
                return float(r[8]) if r[8] != "" else float("nan")
            return float(r[4]) + float(r[5])
    return float("nan")


def _epsilon_metrics(results: Sequence[dict], ladder) -> dict:
    quantities = {
        "max_that1p1": lambda r: float(np.max([row[1] for row in r["frame_stats"]
                                               if row[0] >= 2 * r["config"]["delta"]])),
        "max_that2": lambda r: float(np.max([row[2] for row in r["frame_stats"]
                                             if row[0] >= 2 * r["config"]["delta"]])),
        "E0_w": lambda r: _energy_at(r, "w", 0),
        "E0_psi2": lambda r: _energy_at(r, "psi2", 0),
        "E0ring_wbar": lambda r: _energy_at(r, "wbar", 0, ring=True),
        "E1_wbar": lambda r: _energy_at(r, "wbar", 1),
        "E1_w": lambda r: _energy_at(r, "w", 1),
        "E1_psi2": lambda r: _energy_at(r, "psi2", 1),
        "max_yt": lambda r: float(np.max([row[1] for row in r["second_frame_stats"]
                                          if row[0] >= 2 * r["config"]["delta"]])),
    }
    out = {"epsilon": list(ladder)}
    for name, fn in quantities.items():
        vals = [fn(r) for r in results]
        out[name] = vals
        out[name + "_ratios"] = [vals[i] / vals[i + 1] if vals[i + 1] else float("nan")
                                 for i in range(len(vals) - 1)]
    return out


def _delta_metrics(results: Sequence[dict]) -> dict:
    out = {"delta": [r["config"]["delta"] for r in results]}
    out["max_kappa_dev"] = [float(np.max([row[1] for row in r["kappa_stats"]
                                          if row[0] >= 2 * r["config"]["delta"]]))
                            for r in results]
    out["E0_w_over_eps2t2"] = []
    for r in results:
        eps, t = r["config"]["epsilon"], r["times"][-1]
        e = _energy_at(r, "w", 0)
        out["E0_w_over_eps2t2"].append(e / (eps ** 2 * t ** 2) if eps > 0 else float("nan"))
    return out


# ---------------------------------------------------------------------------
# plot-data emission

def _two_column(path: Path, xs, ys):
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as fh:
        for x, y in zip(xs, ys):
            fh.write(f"{x:.17g} {y:.17g}\n")


def slope_fit(xs, ys) -> dict:
    """Least-squares slope of log(y) vs log(x) with its R**2."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    good = (xs > 0) & (ys > 0)
    if good.sum() < 2:
        return {"slope": float("nan"), "r2": float("nan")}
    lx, ly = np.log(xs[good]), np.log(ys[good])
    A = np.stack([lx, np.ones_like(lx)], axis=1)
    coef, res, *_ = np.linalg.lstsq(A, ly, rcond=None)
    pred = A @ coef
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    ss_res = float(np.sum((ly - pred) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return {"slope": float(coef[0]), "r2": r2}


def emit_plots(report: dict, out_dir) -> List[Path]:
    """Write gnuplot-ready two-column data files for a run or study report."""
    out = Path(out_dir)
    written: List[Path] = []

    def emit_run(run_report: dict, prefix: Path):
        rows = run_report.get("energies", [])
        if rows:
            best_u = max(r[1] for r in rows)
            for psi in ("wbar", "w", "psi2"):
                for n in sorted({r[3] for r in rows}):
                    pts = [(r[0], r[4] + r[5]) for r in rows
                           if r[2] == psi and r[3] == n and r[1] == best_u]
                    if pts and any(p[1] > 0 for p in pts):
                        p = prefix / f"energy_{psi}_n{n}.dat"
                        _two_column(p, [q[0] for q in pts], [q[1] for q in pts])
                        written.append(p)
            pts = [(r[1], r[6]) for r in rows
                   if r[2] == "w" and r[3] == 0 and r[0] == max(q[0] for q in rows)]
            if pts:
                p = prefix / "flux_vs_u.dat"
                _two_column(p, [q[0] for q in pts], [q[1] for q in pts])
                written.append(p)
        if run_report.get("kappa_stats"):
            p = prefix / "kappa_profile.dat"
            _two_column(p, [r[0] for r in run_report["kappa_stats"]],
                        [r[1] for r in run_report["kappa_stats"]])
            written.append(p)
        if run_report.get("monitors"):
            p = prefix / "sign_monitors.dat"
            _two_column(p, [r[0] for r in run_report["monitors"]],
                        [r[1] for r in run_report["monitors"]])
            written.append(p)
        if run_report.get("residuals"):
            p = prefix / "residuals.dat"
            _two_column(p, [r[0] for r in run_report["residuals"]],
                        [r[1] for r in run_report["residuals"]])
            written.append(p)

    if "reports" in report:
        for name, sub in zip(report["members"], report["reports"]):
            if sub is not None:
                emit_run(sub, out / name)
        fits = {}
        for name, sub in zip(report["members"], report["reports"]):
            if sub is None:
                continue
            rows = [r for r in sub.get("energies", []) if r[2] == "w" and r[3] == 0]
            if rows:
                best_u = max(r[1] for r in rows)
                ts = [r[0] for r in rows if r[1] == best_u]
                es = [r[4] + r[5] for r in rows if r[1] == best_u]
                fits[name] = slope_fit(ts, es)
        (out / "slope_fits.json").write_text(json.dumps(fits, indent=1))
        written.append(out / "slope_fits.json")
    else:
        emit_run(report, out)
    return written
