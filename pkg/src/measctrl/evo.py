"""Covariance matrix adaptation evolution strategy, (mu/mu_w, lambda) flavour,
and its use as an assumption-free search over continuous-measurement controls
and over piecewise-constant pulses of the three-level ladder.

The strategy minimizes. Random numbers come from ``numpy``'s ``PCG64``
bit generator seeded with ``OptimizerConfig.seed``, so runs are repeatable.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .continuous import INNER_STEPS, ORACLE_STEPS, ControlFunctions, final_yield
from .three_level import RabiPulse, run_protocol

ALPHA_BOUNDS = (-2.0 * math.pi, 2.0 * math.pi)
THETA_BOUNDS = (0.0, math.pi)
MAX_RESAMPLES = 100


class NonFiniteObjectiveError(ValueError):
    pass


def default_population_size(dimension: int) -> int:
    return 4 + int(math.floor(3.0 * math.log(dimension)))


@dataclass
class OptimizerConfig:
    dimension: int
    population_size: int | None = None
    initial_step: float = 0.3
    max_evaluations: int = 100_000
    seed: int = 0
    bounds: Sequence[tuple[float, float]] | None = None
    # stop once the best value has stalled and the population is flat to this level
    tol_fun: float = 1e-12
    min_step: float = 1e-12

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("dimension must be >= 1")
        if self.population_size is None:
            self.population_size = default_population_size(self.dimension)
        if self.population_size < 4:
            raise ValueError("population_size must be >= 4")
        if self.initial_step <= 0:
            raise ValueError("initial_step must be positive")
        if self.bounds is not None:
            if len(self.bounds) != self.dimension:
                raise ValueError("need one (lo, hi) pair per coordinate")
            if any(not lo < hi for lo, hi in self.bounds):
                raise ValueError("bounds need lo < hi")


@dataclass
class OptimizationRun:
    best_params: np.ndarray
    best_value: float
    history: list[tuple[int, float]] = field(default_factory=list)
    evaluations: int = 0
    generations: int = 0
    stop_reason: str = ""
    best_per_generation: list[np.ndarray] = field(default_factory=list)


def es_optimize(
    objective: Callable[[np.ndarray], float],
    cfg: OptimizerConfig,
    x0: Sequence[float] | None = None,
) -> OptimizationRun:
    """Minimize ``objective`` with CMA-ES.

    Candidates that leave the box are redrawn up to 100 times and then
    clipped. Stops when the budget cannot cover another generation, the
    step size falls below ``cfg.min_step``, or the objective is flat.
    Updates depend on ranks only.
    """
    n = cfg.dimension
    lam = cfg.population_size
    mu = lam // 2
    w = math.log(mu + 0.5) - np.log(np.arange(1, mu + 1))
    w /= w.sum()
    mueff = 1.0 / float(np.sum(w**2))

    cc = (4.0 + mueff / n) / (n + 4.0 + 2.0 * mueff / n)
    cs = (mueff + 2.0) / (n + mueff + 5.0)
    c1 = 2.0 / ((n + 1.3) ** 2 + mueff)
    cmu = min(1.0 - c1, 2.0 * (mueff - 2.0 + 1.0 / mueff) / ((n + 2.0) ** 2 + mueff))
    damps = 1.0 + 2.0 * max(0.0, math.sqrt((mueff - 1.0) / (n + 1.0)) - 1.0) + cs
    chi_n = math.sqrt(n) * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n))

    if cfg.bounds is not None:
        lo = np.array([b[0] for b in cfg.bounds], dtype=float)
        hi = np.array([b[1] for b in cfg.bounds], dtype=float)
    else:
        lo = np.full(n, -np.inf)
        hi = np.full(n, np.inf)
    if x0 is None:
        if cfg.bounds is None:
            raise ValueError("x0 is required without bounds")
        x0 = 0.5 * (lo + hi)
    mean = np.array(x0, dtype=float)
    if mean.shape != (n,):
        raise ValueError("x0 has the wrong dimension")

    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    sigma = float(cfg.initial_step)
    pc = np.zeros(n)
    ps = np.zeros(n)
    C = np.eye(n)
    Bmat = np.eye(n)
    D = np.ones(n)

    best_x = mean.copy()
    best_f = math.inf
    run = OptimizationRun(best_x, best_f)
    stall_window = 10 + int(math.ceil(30.0 * n / lam))
    gen_best: list[float] = []
    evals = 0

    while True:
        if evals + lam > cfg.max_evaluations:
            run.stop_reason = "max_evaluations"
            break
        X = np.empty((lam, n))
        for k in range(lam):
            for _ in range(MAX_RESAMPLES):
                x = mean + sigma * (Bmat @ (D * rng.standard_normal(n)))
                if np.all(x >= lo) and np.all(x <= hi):
                    break
            X[k] = np.clip(x, lo, hi)
        f = np.empty(lam)
        for k in range(lam):
            val = float(objective(X[k]))
            if not math.isfinite(val):
                raise NonFiniteObjectiveError(f"objective returned {val} at x={X[k].tolist()}")
            f[k] = val
        evals += lam

        order = np.argsort(f, kind="stable")
        if f[order[0]] < best_f:
            best_f = float(f[order[0]])
            best_x = X[order[0]].copy()
        run.history.append((evals, best_f))
        run.best_per_generation.append(X[order[0]].copy())
        gen_best.append(float(f[order[0]]))

        Y = (X[order[:mu]] - mean) / sigma
        yw = w @ Y
        mean = mean + sigma * yw

        inv_sqrt_C = Bmat @ np.diag(1.0 / D) @ Bmat.T
        ps = (1.0 - cs) * ps + math.sqrt(cs * (2.0 - cs) * mueff) * (inv_sqrt_C @ yw)
        gen = len(gen_best)
        ps_norm = float(np.linalg.norm(ps))
        hsig = ps_norm / math.sqrt(1.0 - (1.0 - cs) ** (2 * gen)) / chi_n < 1.4 + 2.0 / (n + 1.0)
        pc = (1.0 - cc) * pc + (math.sqrt(cc * (2.0 - cc) * mueff) * yw if hsig else 0.0)
        rank_mu = (Y.T * w) @ Y
        C = ((1.0 - c1 - cmu) * C
             + c1 * (np.outer(pc, pc) + (0.0 if hsig else cc * (2.0 - cc)) * C)
             + cmu * rank_mu)
        sigma *= math.exp((cs / damps) * (ps_norm / chi_n - 1.0))

        C = np.triu(C) + np.triu(C, 1).T
        eigvals, Bmat = np.linalg.eigh(C)
        D = np.sqrt(np.maximum(eigvals, 1e-300))

        if sigma * D.max() < cfg.min_step:
            run.stop_reason = "min_step"
            break
        if cfg.tol_fun > 0 and gen >= stall_window:
            recent = gen_best[-stall_window:]
            if max(recent) - min(recent) < cfg.tol_fun and f[order[-1]] - f[order[0]] < cfg.tol_fun:
                run.stop_reason = "tol_fun"
                break
        if D.max() > 1e7 * D.min():
            run.stop_reason = "condition"
            break

    run.best_params = best_x
    run.best_value = best_f
    run.evaluations = evals
    run.generations = len(gen_best)
    return run


# --- free control search -----------------------------------------------------

class ControlSearchResult(NamedTuple):
    controls: ControlFunctions
    yield_: float
    run: OptimizationRun


def unwrap_half_turns(alpha: np.ndarray) -> np.ndarray:
    """Shift each knot by a multiple of ``pi`` so consecutive knots differ by
    at most ``pi/2``.

    ``P`` and ``1 - P`` have the same double commutator, so ``alpha`` and
    ``alpha + pi`` give the same measurement. The shifted list has the same
    projector at every knot; only the interpolation changes, and needless
    fast half-turn sweeps between knots disappear.
    """
    alpha = np.asarray(alpha, dtype=float)
    out = alpha.copy()
    half = 0.5 * math.pi
    for k in range(1, out.size):
        out[k] = out[k - 1] + (alpha[k] - out[k - 1] + half) % math.pi - half
    return out


def knots_from_unit(u: np.ndarray, knots: int) -> tuple[np.ndarray, np.ndarray]:
    """Map ``[0, 1]^(2 knots)`` to alpha knots in ``[-2pi, 2pi]`` (then
    unwrapped by half turns) and theta knots in ``[0, pi]``."""
    a_lo, a_hi = ALPHA_BOUNDS
    t_lo, t_hi = THETA_BOUNDS
    alpha = a_lo + (a_hi - a_lo) * u[:knots]
    return unwrap_half_turns(alpha), t_lo + (t_hi - t_lo) * u[knots:]


def _round_steps(steps: int, segments: int) -> int:
    return -(-steps // segments) * segments


def free_control_search(
    gamma_prime: float,
    knots: int = 16,
    cfg: OptimizerConfig | None = None,
    steps: int = INNER_STEPS,
    final_steps: int = ORACLE_STEPS,
) -> ControlSearchResult:
    """Maximize the final yield over piecewise-linear ``alpha(t)``, ``theta(t)``
    with ``knots`` equally spaced free values each.

    The search runs on ``-yield`` with ``steps`` RK4 steps per evaluation;
    the best controls are re-integrated with ``final_steps`` for the
    reported yield.
    """
    if knots < 2:
        raise ValueError("need at least two knots")
    if gamma_prime < 0:
        raise ValueError("gamma_prime must be non-negative")
    if cfg is None:
        cfg = OptimizerConfig(dimension=2 * knots)
    if cfg.dimension != 2 * knots:
        raise ValueError("optimizer dimension must be 2 * knots")
    if cfg.bounds is None:
        cfg.bounds = [(0.0, 1.0)] * (2 * knots)
    steps = _round_steps(steps, knots - 1)
    final_steps = _round_steps(final_steps, knots - 1)

    def objective(u: np.ndarray) -> float:
        a, th = knots_from_unit(u, knots)
        return -final_yield(ControlFunctions.piecewise_linear(a, th), gamma_prime, steps)

    run = es_optimize(objective, cfg)
    a, th = knots_from_unit(run.best_params, knots)
    ctrl = ControlFunctions.piecewise_linear(a, th)
    return ControlSearchResult(ctrl, final_yield(ctrl, gamma_prime, final_steps), run)


# --- segmented pulses for the three-level ladder -------------------------------

SEGMENT_AREA_BOUNDS = (0.0, 4.0 * math.pi)
SEGMENT_PHASE_BOUNDS = (0.0, 2.0 * math.pi)


class PulseSearchResult(NamedTuple):
    stage1: list[RabiPulse]
    stage2: list[RabiPulse]
    population: float
    run: OptimizationRun


def segmented_pulse_search(
    segments: int = 2,
    measured_level: int | None = 0,
    cfg: OptimizerConfig | None = None,
) -> PulseSearchResult:
    """Maximize the population of ``|1>`` over piecewise-constant pulses,
    ``segments`` constant pieces before and after the measurement.

    Each piece is an (area, phase) pair with area in ``[0, 4pi]`` and phase
    in ``[0, 2pi]``; durations are immaterial and set to 1.
    """
    if segments < 1:
        raise ValueError("need at least one segment per stage")
    dim = 4 * segments
    if cfg is None:
        cfg = OptimizerConfig(dimension=dim)
    if cfg.dimension != dim:
        raise ValueError("optimizer dimension must be 4 * segments")
    if cfg.bounds is None:
        cfg.bounds = [SEGMENT_AREA_BOUNDS, SEGMENT_PHASE_BOUNDS] * (2 * segments)

    def pulses(x: np.ndarray) -> tuple[list[RabiPulse], list[RabiPulse]]:
        ps = [RabiPulse.from_area(x[2 * k], x[2 * k + 1]) for k in range(2 * segments)]
        return ps[:segments], ps[segments:]

    def objective(x: np.ndarray) -> float:
        s1, s2 = pulses(x)
        return -float(run_protocol(s1, measured_level, s2)[1, 1].real)

    run = es_optimize(objective, cfg)
    s1, s2 = pulses(run.best_params)
    return PulseSearchResult(s1, s2, -run.best_value, run)
