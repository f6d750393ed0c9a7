"""Inner optimization: UL powers and DL beamforming covariances at fixed
antenna positions.

For a given layout the problem is convex after two standard moves: the
worst-case CCI rate constraint becomes a linear matrix inequality through
the S-procedure, and the rank-one constraint on each DL covariance is
dropped (semidefinite relaxation). The scalarized objective is the weighted
Tchebycheff value tau; pure UL- or DL-power minimization are available as
corner modes and as reference-point calibrators.

All decision variables are internally rescaled by a power scale derived
from the noise floors so the cone solver sees O(1) data; results are
reported in physical watts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import conic, receiver
from .channel import AntennaLayout, ChannelSet, assemble
from .conic import ConicProgram, LinExpr, MatExpr, hermitian_embed
from .receiver import ZfBank
from .scenario import ConfigurationError, Scenario

RANK_RATIO_WARN = 0.95
INFEASIBLE_FITNESS = math.inf


@dataclass
class InnerProblemData:
    """Everything the inner solve needs, frozen at one antenna layout."""

    channels: ChannelSet
    zf: ZfBank
    ul_gamma_th: np.ndarray     # (J,), 2^R - 1
    dl_gamma_th: np.ndarray     # (K,)
    cci_est: np.ndarray         # (J, K)
    eps_dl: np.ndarray          # (K,), aggregated radii
    weights: tuple[float, float]
    refs: tuple[float, float]
    ul_noise: float
    dl_noise: np.ndarray        # (K,)
    rho: float

    # derived, filled in __post_init__
    cross_gains: np.ndarray = field(init=False)   # (J, J): |b_j^H l_i|^2
    comb_norms: np.ndarray = field(init=False)    # (J,): ||b_j||^2
    si_forms: list = field(init=False)            # A_j, Hermitian (M, M)
    dl_outer: list = field(init=False)            # H_k = h_k h_k^H

    def __post_init__(self):
        bank = self.zf.vectors
        self.cross_gains = np.abs(bank.conj().T @ self.channels.ul) ** 2
        self.comb_norms = np.real(np.sum(bank.conj() * bank, axis=0))
        self.si_forms = [receiver.si_coupling_matrix(self.zf,
                                                     self.channels.h_si, j)
                         for j in range(self.num_ul)]
        self.dl_outer = [np.outer(self.channels.h(k),
                                  self.channels.h(k).conj())
                         for k in range(self.num_dl)]
        if np.any(self.dl_gamma_th <= 0):
            raise ConfigurationError("DL SINR thresholds must be positive")
        if self.refs[0] == 0 or self.refs[1] == 0:
            raise ConfigurationError("reference objectives must be nonzero")

    @property
    def num_ul(self) -> int:
        return self.channels.ul.shape[1]

    @property
    def num_dl(self) -> int:
        return self.channels.dl.shape[1]

    @property
    def num_tx(self) -> int:
        return self.channels.dl.shape[0]


def prepare(scenario: Scenario, layout: AntennaLayout, *,
            weights=None, refs=None) -> InnerProblemData:
    """Assemble channels, the ZF bank, and thresholds at one layout."""
    cfg = scenario.config
    channels = assemble(layout, scenario)
    zf = receiver.zf_bank(channels)
    return InnerProblemData(
        channels=channels, zf=zf,
        ul_gamma_th=2.0 ** cfg.ul_rate_thresholds - 1.0,
        dl_gamma_th=2.0 ** cfg.dl_rate_thresholds - 1.0,
        cci_est=scenario.cci_est,
        eps_dl=scenario.aggregated_cci_radii(),
        weights=tuple(weights) if weights is not None else cfg.tcheby_weights,
        refs=tuple(refs) if refs is not None else cfg.ref_objectives,
        ul_noise=cfg.ul_noise, dl_noise=cfg.dl_noise,
        rho=cfg.si_loss,
    )


@dataclass
class InnerSolution:
    """Solved operating point at one layout (or its failure record)."""

    status: str                  # conic.SolveReport status vocabulary
    p: np.ndarray                # (J,) watts
    w_mats: list                 # K Hermitian PSD (M, M), watts
    w_vecs: list                 # K extracted beamformers (M,)
    delta: np.ndarray            # (K,) S-procedure multipliers
    tau: float                   # Tchebycheff value (nan in corner modes)
    total_ul: float              # T_1 = sum p_j
    total_dl: float              # T_2 = sum Tr W_k
    rank_ratios: np.ndarray      # (K,) lambda_max / trace
    warnings: list
    report: conic.SolveReport
    objective_mode: str

    @property
    def feasible(self) -> bool:
        return self.status == "optimal"


def _failed_solution(report, mode, num_ul, num_dl) -> InnerSolution:
    nanvec = np.full(num_ul, math.nan)
    return InnerSolution(
        status=report.status, p=nanvec, w_mats=[], w_vecs=[],
        delta=np.full(num_dl, math.nan), tau=math.nan,
        total_ul=math.nan, total_dl=math.nan,
        rank_ratios=np.full(num_dl, math.nan),
        warnings=[], report=report, objective_mode=mode)


def _power_scale(data: InnerProblemData) -> float:
    """Geometric mean of the UL and DL interference-free power floors."""
    candidates = []
    ul = [g * n * data.ul_noise / c for g, n, c in
          zip(data.ul_gamma_th, data.comb_norms, np.diag(data.cross_gains))
          if g > 0 and c > 0]
    if ul:
        candidates.append(float(np.mean(ul)))
    h_gain = [float(np.real(np.trace(hk))) for hk in data.dl_outer]
    dl = [g * n / hg for g, n, hg in
          zip(data.dl_gamma_th, data.dl_noise, h_gain) if hg > 0]
    if dl:
        candidates.append(float(np.mean(dl)))
    if not candidates:
        return 1.0
    scale = math.exp(sum(math.log(c) for c in candidates) / len(candidates))
    return min(max(scale, 1e-20), 1e20)


def build_c1(data: InnerProblemData, j: int, alpha: float = 1.0) -> LinExpr:
    """UL rate constraint of UT j as an affine inequality (>= 0) over the
    powers and DL covariances, in units of ``alpha`` watts."""
    g = data.ul_gamma_th[j]
    expr = LinExpr()
    expr.add_scalar(f"p{j}", float(data.cross_gains[j, j]))
    for i in range(data.num_ul):
        if i != j:
            expr.add_scalar(f"p{i}", -g * float(data.cross_gains[j, i]))
    if g > 0 and data.rho > 0:
        for k in range(data.num_dl):
            expr.add_trace(f"W{k}", -g * data.rho * data.si_forms[j])
    expr.constant = -g * float(data.comb_norms[j]) * data.ul_noise / alpha
    return expr


def lmi_blocks(data: InnerProblemData, k: int, alpha: float = 1.0):
    """Complex Hermitian coefficient matrices of the robust DL constraint.

    Returns (constant, p_coeffs, delta_coeff, trace_terms); the constraint
    is  constant + sum_j p_j * P_j + delta_k * D + sum_i Tr(A_i W_i) * corner
    PSD, with every matrix (J+1) x (J+1).

    The last row/column is congruence-scaled by 1/s with s ~ ||c_hat_k||,
    which balances the block without changing its feasible set (T M T is
    PSD iff M is, for the invertible T = diag(I, 1/s)).
    """
    j_n = data.num_ul
    c_hat = data.cci_est[:, k]
    s = max(float(np.linalg.norm(c_hat)),
            math.sqrt(data.dl_noise[k] / alpha))
    c_sc = c_hat / s
    dim = j_n + 1
    corner = np.zeros((dim, dim), dtype=complex)
    corner[j_n, j_n] = 1.0 / s ** 2

    constant = np.zeros((dim, dim), dtype=complex)
    constant[j_n, j_n] = -data.dl_noise[k] / (alpha * s ** 2)

    p_coeffs = []
    for j in range(j_n):
        m = np.zeros((dim, dim), dtype=complex)
        m[j, j] = -1.0
        m[j, j_n] = -c_sc[j]
        m[j_n, j] = -np.conj(c_sc[j])
        m[j_n, j_n] = -abs(c_sc[j]) ** 2
        p_coeffs.append(m)

    delta_coeff = np.eye(dim, dtype=complex)
    delta_coeff[j_n, j_n] = -(float(data.eps_dl[k]) / s) ** 2

    trace_terms = []
    for i in range(data.num_dl):
        a = data.dl_outer[k] / data.dl_gamma_th[k] if i == k \
            else -data.dl_outer[k]
        trace_terms.append((f"W{i}", a, corner))
    return constant, p_coeffs, delta_coeff, trace_terms


def build_lmi(data: InnerProblemData, k: int, alpha: float = 1.0) -> MatExpr:
    """Robust DL rate constraint of UT k as a real embedded PSD block."""
    constant, p_coeffs, delta_coeff, trace_terms = lmi_blocks(data, k, alpha)
    dim = 2 * (data.num_ul + 1)
    expr = MatExpr(dim=dim, constant=hermitian_embed(constant))
    for j, m in enumerate(p_coeffs):
        expr.add_scalar(f"p{j}", hermitian_embed(m))
    expr.add_scalar(f"delta{k}", hermitian_embed(delta_coeff))
    for name, a, corner in trace_terms:
        expr.add_trace(name, a, hermitian_embed(corner))
    return expr


def build_tchebycheff(data: InnerProblemData, alpha: float = 1.0):
    """Scalarization: (objective over tau, the two bound constraints).

    Constraint i reads  tau - w_i (T_i - T_i*) / |T_i*| >= 0  with T_i in
    physical watts and the decision variables in units of ``alpha`` watts.
    """
    w1, w2 = data.weights
    t1s, t2s = data.refs
    if t1s == 0 or t2s == 0:
        raise ConfigurationError("reference objectives must be nonzero")
    c9 = []
    e1 = LinExpr(constant=w1 * t1s / abs(t1s))
    e1.add_scalar("tau", 1.0)
    for j in range(data.num_ul):
        e1.add_scalar(f"p{j}", -w1 * alpha / abs(t1s))
    c9.append(e1)
    e2 = LinExpr(constant=w2 * t2s / abs(t2s))
    e2.add_scalar("tau", 1.0)
    eye = np.eye(data.num_tx, dtype=complex)
    for k in range(data.num_dl):
        e2.add_trace(f"W{k}", -w2 * alpha / abs(t2s) * eye)
    c9.append(e2)
    objective = LinExpr()
    objective.add_scalar("tau", 1.0)
    return objective, c9


def psd_clip(w: np.ndarray) -> np.ndarray:
    """Nearest-PSD projection (eigenvalue clipping); removes the slightly
    negative eigenvalues interior-point solutions carry at tolerance level."""
    w = 0.5 * (w + w.conj().T)
    vals, vecs = np.linalg.eigh(w)
    if vals[0] >= 0.0:
        return w
    return (vecs * np.maximum(vals, 0.0)) @ vecs.conj().T


def _extract_one(w: np.ndarray):
    """Principal-eigenpair beamformer and the rank-one quality ratio."""
    tr = float(np.real(np.trace(w)))
    if tr <= 1e-300:
        return np.zeros(w.shape[0], dtype=complex), 1.0
    vals, vecs = np.linalg.eigh(w)
    lam = float(max(vals[-1], 0.0))
    return math.sqrt(lam) * vecs[:, -1], lam / tr


def extract_beamformers(w_mats):
    """Rank-one recovery for every covariance; returns (vectors, ratios,
    warnings). A ratio below RANK_RATIO_WARN yields a warning entry but the
    beamformers are still returned."""
    vecs, ratios, warnings = [], [], []
    for k, w in enumerate(w_mats):
        v, r = _extract_one(w)
        vecs.append(v)
        ratios.append(r)
        if r < RANK_RATIO_WARN:
            warnings.append(f"W{k}: rank-one ratio {r:.4f} below "
                            f"{RANK_RATIO_WARN}; extraction degraded")
    return vecs, np.array(ratios), warnings


def solve_inner(data: InnerProblemData, *, objective_mode: str = "tchebycheff",
                tol: float = conic.DEFAULT_TOL, backend: str = None,
                rescale: bool = True, dump_path=None) -> InnerSolution:
    """Build and solve the inner cone program at one layout.

    ``objective_mode`` selects the Tchebycheff scalarization or one of the
    single-objective corners ('min_ul', 'min_dl'). An infeasible status is a
    valid outcome: the layout cannot meet the rate targets.
    """
    if objective_mode not in ("tchebycheff", "min_ul", "min_dl"):
        raise ValueError(f"unknown objective mode {objective_mode!r}")
    alpha = _power_scale(data) if rescale else 1.0
    j_n, k_n, m = data.num_ul, data.num_dl, data.num_tx

    prog = ConicProgram()
    for j in range(j_n):
        prog.add_scalar(f"p{j}")
    for k in range(k_n):
        prog.add_scalar(f"delta{k}")
        prog.add_hermitian(f"W{k}", m)

    for j in range(j_n):                       # C1 and C3
        prog.add_inequality(build_c1(data, j, alpha))
        prog.add_inequality(LinExpr(scalar_coeffs={f"p{j}": 1.0}))
    for k in range(k_n):                       # robust C2, C7, C10
        prog.add_psd(build_lmi(data, k, alpha))
        psd = MatExpr(dim=2 * m)
        psd.add_var(f"W{k}", 1.0)
        prog.add_psd(psd)
        prog.add_inequality(LinExpr(scalar_coeffs={f"delta{k}": 1.0}))

    if objective_mode == "tchebycheff":
        prog.add_scalar("tau")
        objective, c9 = build_tchebycheff(data, alpha)
        for expr in c9:
            prog.add_inequality(expr)
    elif objective_mode == "min_ul":
        objective = LinExpr(scalar_coeffs={f"p{j}": 1.0 for j in range(j_n)})
    else:
        objective = LinExpr()
        for k in range(k_n):
            objective.add_trace(f"W{k}", np.eye(m, dtype=complex))
    prog.set_objective(objective)

    report = conic.solve(prog, tol=tol, backend=backend, dump_path=dump_path)
    if report.status != "optimal":
        return _failed_solution(report, objective_mode, j_n, k_n)

    p = np.maximum(alpha * np.array([report.values[f"p{j}"]
                                     for j in range(j_n)]), 0.0)
    w_mats = [psd_clip(alpha * report.values[f"W{k}"]) for k in range(k_n)]
    delta = alpha * np.array([report.values[f"delta{k}"] for k in range(k_n)])
    total_ul = float(np.sum(p))
    total_dl = float(sum(np.real(np.trace(w)) for w in w_mats))
    tau = float(report.values["tau"]) if objective_mode == "tchebycheff" \
        else math.nan
    w_vecs, ratios, warnings = extract_beamformers(w_mats)
    return InnerSolution(
        status="optimal", p=p, w_mats=w_mats, w_vecs=w_vecs, delta=delta,
        tau=tau, total_ul=total_ul, total_dl=total_dl, rank_ratios=ratios,
        warnings=warnings, report=report, objective_mode=objective_mode)


def calibrate_references(data: InnerProblemData, *, tol=conic.DEFAULT_TOL,
                         backend=None) -> tuple[float, float] | None:
    """Reference objectives from the two single-objective corner solves.

    Returns None when either corner problem is not solved to optimality
    (the layout then cannot anchor a normalized trade-off).
    """
    sol_ul = solve_inner(data, objective_mode="min_ul", tol=tol,
                         backend=backend)
    sol_dl = solve_inner(data, objective_mode="min_dl", tol=tol,
                         backend=backend)
    if not (sol_ul.feasible and sol_dl.feasible):
        return None
    floor = 1e-30
    return max(sol_ul.total_ul, floor), max(sol_dl.total_dl, floor)


def check_solution_invariants(data: InnerProblemData, sol: InnerSolution,
                              slack: float = 1e-7) -> list[str]:
    """Normalized constraint residuals of an optimal solution; returns the
    list of violations (empty when all invariants hold)."""
    if not sol.feasible:
        return ["solution is not optimal"]
    problems = []
    scale = max(sol.total_ul, sol.total_dl, 1e-30)
    if np.any(sol.p < -1e-9 * scale):
        problems.append(f"negative UL power {sol.p.min():.3e}")
    for k, w in enumerate(sol.w_mats):
        eigmin = float(np.linalg.eigvalsh(w)[0])
        if eigmin < -1e-9 * max(float(np.real(np.trace(w))), 1e-30):
            problems.append(f"W{k} eigenvalue {eigmin:.3e} below tolerance")
    alpha = 1.0
    values = {f"p{j}": float(sol.p[j]) for j in range(data.num_ul)}
    values.update({f"W{k}": sol.w_mats[k] for k in range(data.num_dl)})
    values.update({f"delta{k}": float(sol.delta[k])
                   for k in range(data.num_dl)})
    for j in range(data.num_ul):
        expr = build_c1(data, j, alpha)
        val = expr.evaluate(values)
        if val < -slack * (1.0 + expr.magnitude(values)):
            problems.append(f"C1[{j}] slack {val:.3e}")
    for k in range(data.num_dl):
        m = build_lmi(data, k, alpha).evaluate(values)
        eigmin = float(np.linalg.eigvalsh(m)[0])
        if eigmin < -slack * (1.0 + float(np.linalg.norm(m, 2))):
            problems.append(f"LMI[{k}] min eigenvalue {eigmin:.3e}")
    return problems


def audit_solution(data: InnerProblemData, sol: InnerSolution, *,
                   samples: int = 1000, seed: int = 0,
                   rate_margin: float = 1e-6) -> list[str]:
    """Independent feasibility audit through the receiver statistics.

    Checks every UL rate via the SINR expression and every DL rate via
    worst-case CCI sampling; returns violation messages.
    """
    if not sol.feasible:
        return ["solution is not optimal"]
    problems = []
    gamma_needed = data.ul_gamma_th
    for j in range(data.num_ul):
        sinr = receiver.ul_sinr(data.zf, data.channels, sol.p, sol.w_mats,
                                data.rho, data.ul_noise, j)
        rate = math.log2(1.0 + sinr)
        need = math.log2(1.0 + gamma_needed[j])
        if rate < need - rate_margin:
            problems.append(f"UL rate {j}: {rate:.6f} < {need:.6f}")
    for k in range(data.num_dl):
        need = math.log2(1.0 + data.dl_gamma_th[k])
        worst = receiver.worst_case_dl_rate(
            data.channels, sol.w_mats, data.cci_est[:, k],
            float(data.eps_dl[k]), sol.p, float(data.dl_noise[k]), k,
            samples=samples, seed=seed)
        if worst < need - rate_margin:
            problems.append(f"DL worst-case rate {k}: {worst:.6f} < {need:.6f}")
    return problems
