"""Outer loop: particle-swarm search over stacked antenna positions.

Each particle is a stacked position vector u = [t; r]. Velocities follow the
inertia + cognitive + social rule with a linearly decreasing inertia weight;
positions are clamped to the movement regions after every step. Minimum
inter-antenna spacing is enforced exactly at initialization and through a
counting penalty afterwards, so the swarm can cross infeasible territory
while the global best is pushed back onto the feasible set.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import inner as inner_mod
from .channel import AntennaLayout
from .inner import InnerSolution, prepare, solve_inner
from .receiver import SingularChannelError
from .scenario import ConfigurationError, Scenario, SystemConfig

logger = logging.getLogger(__name__)


class NoFeasibleLayoutError(RuntimeError):
    """Every particle ended with infinite fitness."""


@dataclass
class SwarmConfig:
    num_particles: int = 10        # Z
    max_iters: int = 60            # Q
    omega_min: float = 0.4
    omega_max: float = 0.9
    alpha_cognitive: float = 1.4   # pulls toward each particle's own best
    alpha_social: float = 1.4      # pulls toward the global best
    penalty: float = 1.0           # beta
    rng_seed: int = 0
    init_velocity_fraction: float = 0.25   # of the region size, per side

    def validate(self):
        if self.num_particles < 1:
            raise ConfigurationError("num_particles must be >= 1")
        if self.max_iters < 0:
            raise ConfigurationError("max_iters must be >= 0")
        if not (0 <= self.omega_min <= self.omega_max):
            raise ConfigurationError("need 0 <= omega_min <= omega_max")
        if self.alpha_cognitive < 0 or self.alpha_social < 0:
            raise ConfigurationError("learning factors must be nonnegative")
        if self.penalty <= 0:
            raise ConfigurationError("penalty must be positive")


@dataclass
class Particle:
    u: np.ndarray
    v: np.ndarray
    pbest_u: np.ndarray
    pbest_fitness: float


@dataclass
class SwarmTrace:
    """Per-iteration global-best record; append() enforces monotonicity."""

    iterations: list = field(default_factory=list)
    gbest_fitness: list = field(default_factory=list)
    gbest_penalty: list = field(default_factory=list)
    gbest_u: list = field(default_factory=list)

    def append(self, iteration: int, fitness: float, penalty: int,
               u: np.ndarray):
        if self.gbest_fitness and fitness > self.gbest_fitness[-1]:
            raise RuntimeError(
                f"global best fitness increased at iteration {iteration}: "
                f"{self.gbest_fitness[-1]} -> {fitness}")
        self.iterations.append(iteration)
        self.gbest_fitness.append(fitness)
        self.gbest_penalty.append(penalty)
        self.gbest_u.append(np.array(u))

    def rows(self):
        return list(zip(self.iterations, self.gbest_fitness,
                        self.gbest_penalty))


@dataclass
class Swarm:
    particles: list
    gbest_u: np.ndarray
    gbest_fitness: float
    rng: np.random.Generator


@dataclass
class PsoResult:
    layout: AntennaLayout
    solution: InnerSolution
    trace: SwarmTrace
    gbest_fitness: float
    gbest_penalty: int


def packing_feasible(sys: SystemConfig) -> bool:
    """Square-grid witness: ceil(sqrt(n))-per-side grid at pitch D fits."""
    for count, side in ((sys.num_tx_antennas, sys.region_size_tx),
                        (sys.num_rx_antennas, sys.region_size_rx)):
        per_side = math.ceil(math.sqrt(count))
        if (per_side - 1) * sys.min_spacing > side + 1e-12:
            return False
    return True


def _sample_region(rng: np.random.Generator, count: int, side: float,
                   min_spacing: float, max_tries: int = 4000) -> np.ndarray:
    """Dart-throwing with restarts: (2, count) points, pairwise >= spacing."""
    half = side / 2.0
    for _ in range(max_tries):
        pts = np.empty((2, count))
        placed = 0
        tries = 0
        while placed < count and tries < 200 * count:
            cand = rng.uniform(-half, half, size=2)
            if placed == 0 or np.all(
                    np.linalg.norm(pts[:, :placed] - cand[:, None],
                                   axis=0) >= min_spacing):
                pts[:, placed] = cand
                placed += 1
            tries += 1
        if placed == count:
            return pts
    raise ConfigurationError(
        f"could not place {count} antennas at spacing {min_spacing} "
        f"in a region of side {side}")


def random_layout(rng: np.random.Generator, sys: SystemConfig
                  ) -> AntennaLayout:
    """One layout satisfying the region and spacing constraints exactly."""
    tx = _sample_region(rng, sys.num_tx_antennas, sys.region_size_tx,
                        sys.min_spacing)
    rx = _sample_region(rng, sys.num_rx_antennas, sys.region_size_rx,
                        sys.min_spacing)
    return AntennaLayout(tx=tx, rx=rx)


def penalty_count(u: np.ndarray, sys: SystemConfig) -> int:
    """Number of antennas participating in a same-region pair closer than
    the minimum spacing; transmit and receive regions counted separately."""
    layout = AntennaLayout.from_stacked(u, sys.num_tx_antennas,
                                        sys.num_rx_antennas)
    total = 0
    for pos in (layout.tx, layout.rx):
        n = pos.shape[1]
        if n < 2:
            continue
        d = np.linalg.norm(pos[:, :, None] - pos[:, None, :], axis=0)
        close = d < sys.min_spacing
        np.fill_diagonal(close, False)
        total += int(np.count_nonzero(close.any(axis=1)))
    return total


def objective_mode_for(weights) -> str:
    """Exact corner weights use the single-objective problems directly."""
    if weights[0] == 1.0:
        return "min_ul"
    if weights[1] == 1.0:
        return "min_dl"
    return "tchebycheff"


def scalar_objective(sol: InnerSolution, weights, refs) -> float:
    """Tchebycheff value of a solved point; sol.tau when available."""
    if sol.objective_mode == "tchebycheff":
        return sol.tau
    n1 = weights[0] * (sol.total_ul - refs[0]) / abs(refs[0])
    n2 = weights[1] * (sol.total_dl - refs[1]) / abs(refs[1])
    return max(n1, n2)


def fitness(u: np.ndarray, scenario: Scenario, *,
            weights=None, refs=None, penalty: float = 1.0,
            tol: float = 1e-8, backend=None) -> tuple[float, InnerSolution | None]:
    """Penalty-augmented fitness: inner optimum tau + penalty * violations.

    Inner infeasibility (or a numerical failure, or a singular ZF bank) maps
    to +inf so the particle ranks below every feasible one. Corner weights
    (1, 0) and (0, 1) rank by the matching single-objective value.
    """
    cfg = scenario.config
    layout = AntennaLayout.from_stacked(u, cfg.num_tx_antennas,
                                        cfg.num_rx_antennas)
    xi = penalty_count(u, cfg)
    w = tuple(weights) if weights is not None else cfg.tcheby_weights
    r = tuple(refs) if refs is not None else cfg.ref_objectives
    try:
        data = prepare(scenario, layout, weights=w, refs=r)
        sol = solve_inner(data, objective_mode=objective_mode_for(w),
                          tol=tol, backend=backend)
    except SingularChannelError as exc:
        logger.warning("fitness: singular ZF bank (%s); +inf penalty", exc)
        return math.inf, None
    if not sol.feasible:
        if sol.status == "numerical-failure":
            logger.warning("fitness: inner solver failure (%s); +inf penalty",
                           sol.report.diagnostics)
        return math.inf, sol
    return scalar_objective(sol, w, r) + penalty * xi, sol


def init_swarm(cfg: SwarmConfig, sys: SystemConfig,
               eval_fn) -> tuple[Swarm, list]:
    """Feasible initial swarm: spacing-respecting positions, uniform
    velocities in +-(region size * init fraction) per coordinate."""
    cfg.validate()
    sys.validate()
    if not packing_feasible(sys):
        raise ConfigurationError(
            "regions cannot host the antennas at the minimum spacing")
    rng = np.random.default_rng(cfg.rng_seed)
    particles = []
    vel_scale = np.concatenate([
        np.full(2 * sys.num_tx_antennas,
                sys.region_size_tx * cfg.init_velocity_fraction),
        np.full(2 * sys.num_rx_antennas,
                sys.region_size_rx * cfg.init_velocity_fraction)])
    us = []
    for _ in range(cfg.num_particles):
        u = random_layout(rng, sys).as_stacked()
        v = rng.uniform(-1.0, 1.0, size=u.size) * vel_scale
        particles.append(Particle(u=u, v=v, pbest_u=u.copy(),
                                  pbest_fitness=math.inf))
        us.append(u)
    fits = eval_fn(us)
    gbest_u, gbest_f = None, math.inf
    for part, f in zip(particles, fits):
        part.pbest_fitness = f
        if f < gbest_f:
            gbest_f = f
            gbest_u = part.u.copy()
    if gbest_u is None:
        gbest_u = particles[0].u.copy()
    swarm = Swarm(particles=particles, gbest_u=gbest_u,
                  gbest_fitness=gbest_f, rng=rng)
    return swarm, fits


def update_velocity(particle: Particle, gbest_u: np.ndarray, q: int,
                    cfg: SwarmConfig, rng: np.random.Generator) -> np.ndarray:
    """Inertia + cognitive + social velocity for iteration q (1-based)."""
    omega = cfg.omega_max - (cfg.omega_max - cfg.omega_min) * q / cfg.max_iters
    e1 = rng.uniform(0.0, 1.0, size=particle.u.size)
    e2 = rng.uniform(0.0, 1.0, size=particle.u.size)
    return (omega * particle.v
            + cfg.alpha_cognitive * e1 * (particle.pbest_u - particle.u)
            + cfg.alpha_social * e2 * (gbest_u - particle.u))


def update_position(u: np.ndarray, v: np.ndarray,
                    sys: SystemConfig) -> np.ndarray:
    """Step then clamp every coordinate into its movement region."""
    out = u + v
    nt2 = 2 * sys.num_tx_antennas
    np.clip(out[:nt2], -sys.region_size_tx / 2, sys.region_size_tx / 2,
            out=out[:nt2])
    np.clip(out[nt2:], -sys.region_size_rx / 2, sys.region_size_rx / 2,
            out=out[nt2:])
    return out


def _serial_eval(scenario, weights, refs, penalty, tol, backend):
    def eval_fn(us):
        return [fitness(u, scenario, weights=weights, refs=refs,
                        penalty=penalty, tol=tol, backend=backend)[0]
                for u in us]
    return eval_fn


def _fitness_worker(args):
    u, scenario, weights, refs, penalty, tol, backend = args
    return fitness(u, scenario, weights=weights, refs=refs, penalty=penalty,
                   tol=tol, backend=backend)[0]


def _parallel_eval(scenario, weights, refs, penalty, tol, backend, workers):
    from concurrent.futures import ProcessPoolExecutor
    pool = ProcessPoolExecutor(max_workers=workers)

    def eval_fn(us):
        args = [(u, scenario, weights, refs, penalty, tol, backend)
                for u in us]
        return list(pool.map(_fitness_worker, args))
    eval_fn.pool = pool
    return eval_fn


def run(scenario: Scenario, cfg: SwarmConfig, *, weights=None, refs=None,
        tol: float = 1e-8, backend=None, workers: int = 1) -> PsoResult:
    """Full two-loop optimization for one scenario.

    Fitness evaluations within an iteration are independent; the best-known
    positions are updated by a sequential fold in particle order, so results
    do not depend on evaluation parallelism. Raises NoFeasibleLayoutError
    when no particle ever achieves finite fitness.
    """
    sys = scenario.config
    if workers > 1:
        eval_fn = _parallel_eval(scenario, weights, refs, cfg.penalty, tol,
                                 backend, workers)
    else:
        eval_fn = _serial_eval(scenario, weights, refs, cfg.penalty, tol,
                               backend)
    try:
        swarm, _ = init_swarm(cfg, sys, eval_fn)
        trace = SwarmTrace()
        trace.append(0, swarm.gbest_fitness,
                     penalty_count(swarm.gbest_u, sys), swarm.gbest_u)

        for q in range(1, cfg.max_iters + 1):
            for part in swarm.particles:
                part.v = update_velocity(part, swarm.gbest_u, q, cfg,
                                         swarm.rng)
                part.u = update_position(part.u, part.v, sys)
            fits = eval_fn([part.u for part in swarm.particles])
            for part, f in zip(swarm.particles, fits):
                if f < part.pbest_fitness:
                    part.pbest_fitness = f
                    part.pbest_u = part.u.copy()
                if f < swarm.gbest_fitness:
                    swarm.gbest_fitness = f
                    swarm.gbest_u = part.u.copy()
            trace.append(q, swarm.gbest_fitness,
                         penalty_count(swarm.gbest_u, sys), swarm.gbest_u)
    finally:
        if hasattr(eval_fn, "pool"):
            eval_fn.pool.shutdown()

    if not math.isfinite(swarm.gbest_fitness):
        raise NoFeasibleLayoutError(
            "no feasible layout found: every particle has infinite fitness")

    layout = AntennaLayout.from_stacked(swarm.gbest_u, sys.num_tx_antennas,
                                        sys.num_rx_antennas)
    w = tuple(weights) if weights is not None else sys.tcheby_weights
    r = tuple(refs) if refs is not None else sys.ref_objectives
    data = prepare(scenario, layout, weights=w, refs=r)
    solution = solve_inner(data, objective_mode=objective_mode_for(w),
                           tol=tol, backend=backend)
    return PsoResult(layout=layout, solution=solution, trace=trace,
                     gbest_fitness=swarm.gbest_fitness,
                     gbest_penalty=penalty_count(swarm.gbest_u, sys))
