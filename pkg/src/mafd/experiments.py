"""Experiment harness: convergence traces, UL/DL power trade-off region,
and the SI-loss sweep, with a fixed-position uniform planar array baseline.

Every cell (seed x sweep point) regenerates its scenario from the seed, so a
rerun with the same seeds reproduces every CSV byte for byte. Reference
objectives are calibrated per scenario by solving the two single-objective
corner problems at the baseline layout; both schemes then share the same
normalization.

Output files per run directory:
  convergence_A{size}wl_seed{seed}.csv   iteration,gbest_fitness,gbest_penalty
  convergence_summary.csv                per-run summary with stability point
  tradeoff.csv       scheme,lambda_ul,seed,status,total_ul_w,total_dl_w,objective
  si_sweep.csv       rho_db,scheme,n_antennas,seed,status,total_ul_w,total_dl_w
  si_sweep_summary.csv   seed-averaged powers and the feasible fraction
  layout_*.txt       optimized layouts (reloadable, used by audit mode)
  fig_*.svg          deterministic plot renders of the CSVs
"""

from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass, field, replace

import numpy as np

from . import inner as inner_mod
from . import pso as pso_mod
from .channel import AntennaLayout
from .inner import calibrate_references, prepare, solve_inner
from .pso import NoFeasibleLayoutError, SwarmConfig, objective_mode_for
from .scenario import (ConfigurationError, Scenario, SystemConfig,
                       db_to_linear, generate)

logger = logging.getLogger(__name__)

CSV_FLOAT = "%.12g"
LAYOUT_HEADER = "# mafd-layout v1"


class ExperimentError(ValueError):
    """Bad experiment specification or malformed experiment output."""


@dataclass
class ExperimentSpec:
    kind: str                      # convergence | tradeoff | si_sweep | single
    base_config: SystemConfig
    seeds: list
    out_dir: str
    region_sizes_wl: list = field(default_factory=lambda: [3.0, 5.0])
    weight_step: float = 0.1
    rho_grid_db: list = field(default_factory=lambda: [-120.0, -110.0,
                                                       -100.0, -90.0])
    antenna_counts: list = None
    swarm: SwarmConfig = field(default_factory=SwarmConfig)
    workers: int = 1
    audit: bool = False
    make_plots: bool = True

    def validate(self):
        if self.kind not in ("convergence", "tradeoff", "si_sweep", "single"):
            raise ExperimentError(f"unknown experiment kind {self.kind!r}")
        if not self.seeds:
            raise ExperimentError("need at least one seed")
        if self.kind == "convergence" and not self.region_sizes_wl:
            raise ExperimentError("region size sweep must be nonempty")
        if self.kind == "si_sweep" and not self.rho_grid_db:
            raise ExperimentError("rho grid must be nonempty")
        if self.kind == "tradeoff":
            n = 1.0 / self.weight_step
            if abs(n - round(n)) > 1e-9:
                raise ExperimentError(
                    f"weight_step {self.weight_step} must divide 1 evenly")


# ---------------------------------------------------------------------------
# FPA baseline
# ---------------------------------------------------------------------------

def _grid_shape(n: int) -> tuple[int, int]:
    """Near-square factorization rows x cols with rows <= cols."""
    rows = int(math.isqrt(n))
    while rows > 1 and n % rows:
        rows -= 1
    return rows, n // rows


def fpa_layout(n_antennas: int, wavelength: float,
               region_tx: float = None, region_rx: float = None,
               enforce_region: bool = False) -> AntennaLayout:
    """Uniform planar array at half-wavelength pitch, centered at the
    region origin; used identically on the transmit and receive side.

    The grid may exceed the movable-antenna region: the baseline array is
    not confined to it unless ``enforce_region`` is set, in which case an
    oversize grid raises ConfigurationError.
    """
    rows, cols = _grid_shape(n_antennas)
    pitch = wavelength / 2.0
    xs = (np.arange(cols) - (cols - 1) / 2.0) * pitch
    ys = (np.arange(rows) - (rows - 1) / 2.0) * pitch
    gx, gy = np.meshgrid(xs, ys)
    pos = np.vstack([gx.ravel(), gy.ravel()])
    extent = max((cols - 1) * pitch, (rows - 1) * pitch)
    for side, name in ((region_tx, "transmit"), (region_rx, "receive")):
        if side is not None and extent > side + 1e-12:
            msg = (f"FPA grid extent {extent:.4g} m exceeds the {name} "
                   f"region side {side:.4g} m")
            if enforce_region:
                raise ConfigurationError(msg)
            logger.info("%s; region constraint waived for the baseline", msg)
    return AntennaLayout(tx=pos.copy(), rx=pos.copy())


# ---------------------------------------------------------------------------
# Shared cell machinery
# ---------------------------------------------------------------------------

def _scenario_for(config: SystemConfig, seed: int, **overrides) -> Scenario:
    return generate(config.replace(rng_seed=seed, **overrides))


def _calibrated_refs(scenario: Scenario, baseline: AntennaLayout):
    """Corner-solve references at the baseline layout; falls back to the
    configured constants when the baseline cannot anchor them."""
    try:
        data = prepare(scenario, baseline)
        refs = calibrate_references(data)
    except Exception as exc:
        logger.warning("calibration failed (%s); using configured references",
                       exc)
        refs = None
    if refs is None:
        return scenario.config.ref_objectives, False
    return refs, True


def save_layout(layout: AntennaLayout, path):
    with open(path, "w") as fh:
        fh.write(LAYOUT_HEADER + "\n")
        for name, pos in (("tx", layout.tx), ("rx", layout.rx)):
            for i in range(pos.shape[1]):
                fh.write(f"{name} {'%.17g' % pos[0, i]} "
                         f"{'%.17g' % pos[1, i]}\n")


def load_layout(path) -> AntennaLayout:
    tx, rx = [], []
    with open(path) as fh:
        header = fh.readline().strip()
        if header != LAYOUT_HEADER:
            raise ExperimentError(f"{path}: expected {LAYOUT_HEADER!r}")
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            dest = tx if parts[0] == "tx" else rx
            dest.append([float(parts[1]), float(parts[2])])
    return AntennaLayout(tx=np.array(tx).T, rx=np.array(rx).T)


def _fmt(x) -> str:
    if isinstance(x, float):
        if math.isinf(x):
            return "inf"
        if math.isnan(x):
            return "nan"
        return CSV_FLOAT % x
    return str(x)


def _write_csv(path, header: list, rows: list):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def read_csv(path) -> tuple[list, list]:
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    if not lines:
        raise ExperimentError(f"{path}: empty CSV")
    header = lines[0].split(",")
    rows = [ln.split(",") for ln in lines[1:]]
    return header, rows


def _require_columns(header, needed, path):
    for col in needed:
        if col not in header:
            raise ExperimentError(f"{path}: missing column {col!r}")


def stability_iteration(fitness_trace, tol: float = 1e-6) -> int:
    """First iteration after which the global best changes by < tol."""
    f = list(fitness_trace)
    if not f:
        return 0
    last = f[-1]
    for q, val in enumerate(f):
        if not (val - last >= tol):     # robust to inf - inf
            return q
    return len(f) - 1


# ---------------------------------------------------------------------------
# Experiments
# ---------------------------------------------------------------------------

def run_convergence(spec: ExperimentSpec) -> dict:
    spec.validate()
    os.makedirs(spec.out_dir, exist_ok=True)
    cfg0 = spec.base_config
    summary = []
    traces = {}
    for size_wl in spec.region_sizes_wl:
        side = size_wl * cfg0.wavelength
        for seed in spec.seeds:
            scenario = _scenario_for(cfg0, seed, region_size_tx=side,
                                     region_size_rx=side)
            baseline = fpa_layout(cfg0.num_tx_antennas, cfg0.wavelength)
            refs, calibrated = _calibrated_refs(scenario, baseline)
            swarm = replace(spec.swarm, rng_seed=seed)
            tag = f"A{_fmt(size_wl)}wl_seed{seed}"
            try:
                result = pso_mod.run(scenario, swarm, refs=refs,
                                     workers=spec.workers)
            except NoFeasibleLayoutError:
                logger.warning("convergence %s: no feasible layout", tag)
                summary.append((size_wl, seed, "no-feasible-layout",
                                math.inf, -1, -1))
                continue
            rows = result.trace.rows()
            _write_csv(os.path.join(spec.out_dir, f"convergence_{tag}.csv"),
                       ["iteration", "gbest_fitness", "gbest_penalty"], rows)
            save_layout(result.layout,
                        os.path.join(spec.out_dir, f"layout_{tag}.txt"))
            stab = stability_iteration(result.trace.gbest_fitness)
            status = "ok" if calibrated else "uncalibrated"
            summary.append((size_wl, seed, status, result.gbest_fitness,
                            result.gbest_penalty, stab))
            traces[(size_wl, seed)] = result.trace
    _write_csv(os.path.join(spec.out_dir, "convergence_summary.csv"),
               ["region_size_wl", "seed", "status", "final_fitness",
                "final_penalty", "iterations_to_stability"], summary)
    if spec.make_plots:
        emit_plots(spec.out_dir)
    return {"summary": summary, "traces": traces}


def _weight_grid(step: float) -> list:
    n = round(1.0 / step)
    return [i / n for i in range(n + 1)]


def run_tradeoff(spec: ExperimentSpec) -> dict:
    spec.validate()
    os.makedirs(spec.out_dir, exist_ok=True)
    cfg0 = spec.base_config
    baseline = fpa_layout(cfg0.num_tx_antennas, cfg0.wavelength)
    rows = []
    for seed in spec.seeds:
        scenario = _scenario_for(cfg0, seed)
        refs, _ = _calibrated_refs(scenario, baseline)
        for lam in _weight_grid(spec.weight_step):
            weights = (lam, 1.0 - lam)
            mode = objective_mode_for(weights)
            try:
                data = prepare(scenario, baseline, weights=weights, refs=refs)
                sol = solve_inner(data, objective_mode=mode)
                obj = pso_mod.scalar_objective(sol, weights, refs) \
                    if sol.feasible else math.inf
                rows.append(("fpa", lam, seed, sol.status, sol.total_ul,
                             sol.total_dl, obj))
            except Exception as exc:
                logger.warning("tradeoff fpa seed=%s lam=%s failed: %s",
                               seed, lam, exc)
                rows.append(("fpa", lam, seed, "error", math.nan, math.nan,
                             math.inf))
            swarm = replace(spec.swarm, rng_seed=seed)
            try:
                result = pso_mod.run(scenario, swarm, weights=weights,
                                     refs=refs, workers=spec.workers)
                sol = result.solution
                obj = pso_mod.scalar_objective(sol, weights, refs)
                rows.append(("ma", lam, seed, sol.status, sol.total_ul,
                             sol.total_dl, obj))
                save_layout(result.layout, os.path.join(
                    spec.out_dir, f"layout_tradeoff_lam{_fmt(lam)}_"
                                  f"seed{seed}.txt"))
            except NoFeasibleLayoutError:
                rows.append(("ma", lam, seed, "no-feasible-layout",
                             math.nan, math.nan, math.inf))
    _write_csv(os.path.join(spec.out_dir, "tradeoff.csv"),
               ["scheme", "lambda_ul", "seed", "status", "total_ul_w",
                "total_dl_w", "objective"], rows)
    if spec.make_plots:
        emit_plots(spec.out_dir)
    return {"rows": rows}


def run_si_sweep(spec: ExperimentSpec) -> dict:
    spec.validate()
    os.makedirs(spec.out_dir, exist_ok=True)
    cfg0 = spec.base_config
    counts = spec.antenna_counts or [cfg0.num_tx_antennas]
    rows = []
    for n_ant in counts:
        if n_ant < cfg0.num_ul_uts:
            raise ExperimentError(
                f"antenna count {n_ant} below the UL UT count")
        baseline = fpa_layout(n_ant, cfg0.wavelength)
        for rho_db in spec.rho_grid_db:
            for seed in spec.seeds:
                scenario = _scenario_for(
                    cfg0, seed, num_tx_antennas=n_ant, num_rx_antennas=n_ant,
                    si_loss=db_to_linear(rho_db))
                refs, _ = _calibrated_refs(scenario, baseline)
                try:
                    data = prepare(scenario, baseline, refs=refs)
                    sol = solve_inner(data)
                    rows.append((rho_db, "fpa", n_ant, seed, sol.status,
                                 sol.total_ul, sol.total_dl))
                except Exception as exc:
                    logger.warning("si_sweep fpa rho=%s seed=%s failed: %s",
                                   rho_db, seed, exc)
                    rows.append((rho_db, "fpa", n_ant, seed, "error",
                                 math.nan, math.nan))
                swarm = replace(spec.swarm, rng_seed=seed)
                try:
                    result = pso_mod.run(scenario, swarm, refs=refs,
                                         workers=spec.workers)
                    sol = result.solution
                    rows.append((rho_db, "ma", n_ant, seed, sol.status,
                                 sol.total_ul, sol.total_dl))
                    save_layout(result.layout, os.path.join(
                        spec.out_dir, f"layout_si_rho{_fmt(rho_db)}_"
                                      f"N{n_ant}_seed{seed}.txt"))
                except NoFeasibleLayoutError:
                    rows.append((rho_db, "ma", n_ant, seed,
                                 "no-feasible-layout", math.nan, math.nan))
    _write_csv(os.path.join(spec.out_dir, "si_sweep.csv"),
               ["rho_db", "scheme", "n_antennas", "seed", "status",
                "total_ul_w", "total_dl_w"], rows)

    summary = []
    for n_ant in counts:
        for rho_db in spec.rho_grid_db:
            for scheme in ("fpa", "ma"):
                cell = [r for r in rows if r[0] == rho_db and r[1] == scheme
                        and r[2] == n_ant]
                good = [r for r in cell if r[4] == "optimal"]
                frac = len(good) / len(cell) if cell else 0.0
                t1 = float(np.mean([r[5] for r in good])) if good else math.nan
                t2 = float(np.mean([r[6] for r in good])) if good else math.nan
                summary.append((rho_db, scheme, n_ant, t1, t2, frac))
    _write_csv(os.path.join(spec.out_dir, "si_sweep_summary.csv"),
               ["rho_db", "scheme", "n_antennas", "mean_total_ul_w",
                "mean_total_dl_w", "feasible_fraction"], summary)
    if spec.make_plots:
        emit_plots(spec.out_dir)
    return {"rows": rows, "summary": summary}


def run_single(spec: ExperimentSpec) -> dict:
    spec.validate()
    os.makedirs(spec.out_dir, exist_ok=True)
    cfg0 = spec.base_config
    seed = spec.seeds[0]
    scenario = _scenario_for(cfg0, seed)
    baseline = fpa_layout(cfg0.num_tx_antennas, cfg0.wavelength)
    refs, _ = _calibrated_refs(scenario, baseline)
    swarm = replace(spec.swarm, rng_seed=seed)
    result = pso_mod.run(scenario, swarm, refs=refs, workers=spec.workers)
    rows = result.trace.rows()
    _write_csv(os.path.join(spec.out_dir, f"convergence_single_seed{seed}.csv"),
               ["iteration", "gbest_fitness", "gbest_penalty"], rows)
    save_layout(result.layout,
                os.path.join(spec.out_dir, f"layout_single_seed{seed}.txt"))
    sol = result.solution
    _write_csv(os.path.join(spec.out_dir, "single_summary.csv"),
               ["seed", "status", "gbest_fitness", "gbest_penalty",
                "total_ul_w", "total_dl_w", "min_rank_ratio"],
               [(seed, sol.status, result.gbest_fitness,
                 result.gbest_penalty, sol.total_ul, sol.total_dl,
                 float(np.min(sol.rank_ratios)) if sol.feasible
                 else math.nan)])
    return {"result": result}


RUNNERS = {"convergence": run_convergence, "tradeoff": run_tradeoff,
           "si_sweep": run_si_sweep, "single": run_single}


def run_experiment(spec: ExperimentSpec) -> dict:
    spec.validate()
    out = RUNNERS[spec.kind](spec)
    if spec.audit and spec.kind in ("tradeoff", "si_sweep"):
        problems = audit_outputs(spec)
        out["audit"] = problems
        if problems:
            raise ExperimentError("audit failed: " + "; ".join(problems[:5]))
    return out


# ---------------------------------------------------------------------------
# Audit: every recorded (T_1, T_2) must re-solve identically from its layout
# ---------------------------------------------------------------------------

def audit_outputs(spec: ExperimentSpec, rel_tol: float = 1e-6) -> list:
    problems = []
    cfg0 = spec.base_config
    if spec.kind == "tradeoff":
        path = os.path.join(spec.out_dir, "tradeoff.csv")
        header, rows = read_csv(path)
        _require_columns(header, ["scheme", "lambda_ul", "seed", "status",
                                  "total_ul_w", "total_dl_w"], path)
        baseline = fpa_layout(cfg0.num_tx_antennas, cfg0.wavelength)
        for row in rows:
            rec = dict(zip(header, row))
            if rec["status"] != "optimal":
                continue
            seed = int(rec["seed"])
            lam = float(rec["lambda_ul"])
            weights = (lam, 1.0 - lam)
            scenario = _scenario_for(cfg0, seed)
            refs, _ = _calibrated_refs(scenario, baseline)
            if rec["scheme"] == "fpa":
                layout = baseline
            else:
                layout = load_layout(os.path.join(
                    spec.out_dir,
                    f"layout_tradeoff_lam{_fmt(lam)}_seed{seed}.txt"))
            data = prepare(scenario, layout, weights=weights, refs=refs)
            sol = solve_inner(data, objective_mode=objective_mode_for(weights))
            for name, got in (("total_ul_w", sol.total_ul),
                              ("total_dl_w", sol.total_dl)):
                want = float(rec[name])
                if abs(got - want) > rel_tol * max(1.0, abs(want)):
                    problems.append(
                        f"{rec['scheme']} lam={lam} seed={seed}: {name} "
                        f"{want} != re-solve {got}")
    elif spec.kind == "si_sweep":
        path = os.path.join(spec.out_dir, "si_sweep.csv")
        header, rows = read_csv(path)
        _require_columns(header, ["rho_db", "scheme", "n_antennas", "seed",
                                  "status", "total_ul_w", "total_dl_w"], path)
        for row in rows:
            rec = dict(zip(header, row))
            if rec["status"] != "optimal":
                continue
            rho_db = float(rec["rho_db"])
            n_ant = int(rec["n_antennas"])
            seed = int(rec["seed"])
            scenario = _scenario_for(cfg0, seed, num_tx_antennas=n_ant,
                                     num_rx_antennas=n_ant,
                                     si_loss=db_to_linear(rho_db))
            baseline = fpa_layout(n_ant, cfg0.wavelength)
            refs, _ = _calibrated_refs(scenario, baseline)
            if rec["scheme"] == "fpa":
                layout = baseline
            else:
                layout = load_layout(os.path.join(
                    spec.out_dir, f"layout_si_rho{_fmt(rho_db)}_"
                                  f"N{n_ant}_seed{seed}.txt"))
            data = prepare(scenario, layout, refs=refs)
            sol = solve_inner(data)
            for name, got in (("total_ul_w", sol.total_ul),
                              ("total_dl_w", sol.total_dl)):
                want = float(rec[name])
                if abs(got - want) > rel_tol * max(1.0, abs(want)):
                    problems.append(
                        f"{rec['scheme']} rho={rho_db} seed={seed}: {name} "
                        f"{want} != re-solve {got}")
    return problems


# ---------------------------------------------------------------------------
# Plots (deterministic SVG)
# ---------------------------------------------------------------------------

def _svg_figure():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    matplotlib.rcParams["svg.hashsalt"] = "mafd"
    return plt


def emit_plots(out_dir) -> list:
    """Render every known CSV in ``out_dir`` to SVG; returns created paths."""
    created = []
    conv = sorted(f for f in os.listdir(out_dir)
                  if f.startswith("convergence_") and f.endswith(".csv")
                  and "summary" not in f)
    if conv:
        created.append(_plot_convergence(out_dir, conv))
    if os.path.exists(os.path.join(out_dir, "tradeoff.csv")):
        created.append(_plot_tradeoff(out_dir))
    if os.path.exists(os.path.join(out_dir, "si_sweep_summary.csv")):
        created.append(_plot_si_sweep(out_dir))
    return created


def _savefig(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None})
    return path


def _plot_convergence(out_dir, files):
    plt = _svg_figure()
    fig, (ax_f, ax_p) = plt.subplots(1, 2, figsize=(9, 3.6))
    for name in files:
        path = os.path.join(out_dir, name)
        header, rows = read_csv(path)
        _require_columns(header, ["iteration", "gbest_fitness",
                                  "gbest_penalty"], path)
        it = [int(r[header.index("iteration")]) for r in rows]
        f = [float(r[header.index("gbest_fitness")]) for r in rows]
        p = [float(r[header.index("gbest_penalty")]) for r in rows]
        label = name[len("convergence_"):-len(".csv")]
        ax_f.step(it, f, where="post", label=label)
        ax_p.step(it, p, where="post", label=label)
    ax_f.set_xlabel("iteration")
    ax_f.set_ylabel("global best fitness")
    ax_p.set_xlabel("iteration")
    ax_p.set_ylabel("global best penalty count")
    if len(files) <= 8:
        ax_f.legend(fontsize=7)
    fig.tight_layout()
    out = _savefig(fig, os.path.join(out_dir, "fig_convergence.svg"))
    plt.close(fig)
    return out


def _plot_tradeoff(out_dir):
    plt = _svg_figure()
    path = os.path.join(out_dir, "tradeoff.csv")
    header, rows = read_csv(path)
    _require_columns(header, ["scheme", "lambda_ul", "status", "total_ul_w",
                              "total_dl_w"], path)
    fig, ax = plt.subplots(figsize=(5, 4))
    for scheme, marker in (("fpa", "s"), ("ma", "o")):
        pts = {}
        for r in rows:
            rec = dict(zip(header, r))
            if rec["scheme"] != scheme or rec["status"] != "optimal":
                continue
            lam = float(rec["lambda_ul"])
            pts.setdefault(lam, []).append((float(rec["total_ul_w"]),
                                            float(rec["total_dl_w"])))
        lam_sorted = sorted(pts)
        t1 = [float(np.mean([p[0] for p in pts[l]])) for l in lam_sorted]
        t2 = [float(np.mean([p[1] for p in pts[l]])) for l in lam_sorted]
        ax.plot(t1, t2, marker=marker, label=scheme.upper())
    ax.set_xlabel("total UL transmit power (W)")
    ax.set_ylabel("total DL transmit power (W)")
    ax.legend()
    fig.tight_layout()
    out = _savefig(fig, os.path.join(out_dir, "fig_tradeoff.svg"))
    plt.close(fig)
    return out


def _plot_si_sweep(out_dir):
    plt = _svg_figure()
    path = os.path.join(out_dir, "si_sweep_summary.csv")
    header, rows = read_csv(path)
    _require_columns(header, ["rho_db", "scheme", "n_antennas",
                              "mean_total_ul_w", "mean_total_dl_w"], path)
    fig, (ax_ul, ax_dl) = plt.subplots(1, 2, figsize=(9, 3.6))
    groups = {}
    for r in rows:
        rec = dict(zip(header, r))
        key = (rec["scheme"], int(rec["n_antennas"]))
        groups.setdefault(key, []).append(
            (float(rec["rho_db"]), float(rec["mean_total_ul_w"]),
             float(rec["mean_total_dl_w"])))
    for (scheme, n_ant), vals in sorted(groups.items()):
        vals.sort()
        rho = [v[0] for v in vals]
        ax_ul.plot(rho, [v[1] for v in vals], marker="o",
                   label=f"{scheme.upper()} N={n_ant}")
        ax_dl.plot(rho, [v[2] for v in vals], marker="o",
                   label=f"{scheme.upper()} N={n_ant}")
    ax_ul.set_xlabel("SI loss coefficient (dB)")
    ax_ul.set_ylabel("mean total UL power (W)")
    ax_dl.set_xlabel("SI loss coefficient (dB)")
    ax_dl.set_ylabel("mean total DL power (W)")
    ax_ul.legend(fontsize=8)
    fig.tight_layout()
    out = _savefig(fig, os.path.join(out_dir, "fig_si_sweep.svg"))
    plt.close(fig)
    return out
