"""Continuous measurement of a rotating qubit projector.

Dynamics (interaction picture)::

    d rho/dt = -gamma [P(t), [P(t), rho]]
    P(t) = |psi(t)><psi(t)|,  |psi(t)> = cos(alpha/2)|0> + exp(i theta) sin(alpha/2)|1>

Only ``gamma' = gamma T_f / 2`` matters for the final yield, so the
analytic routines take ``gamma_prime`` and work in units where ``T_f = 1``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np
from scipy.optimize import bisect, minimize

from ._rk4 import from_pauli, n_records, rk4_bloch, to_pauli
from .quantum import check_density_matrix

GROUND = np.array([[1.0, 0.0], [0.0, 0.0]], dtype=complex)
ORACLE_STEPS = 100_000
INNER_STEPS = 10_000
_SERIES_CUTOFF = 1e-6


@dataclass(frozen=True)
class ControlFunctions:
    """Piecewise-linear ``alpha(t)`` and ``theta(t)`` on ``[0, T_f]``."""

    alpha_times: np.ndarray
    alpha_values: np.ndarray
    theta_times: np.ndarray
    theta_values: np.ndarray

    def __post_init__(self):
        for name in ("alpha_times", "alpha_values", "theta_times", "theta_values"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=float)
            object.__setattr__(self, name, arr)
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"non-finite control values in {name}")
        for ts, vs in ((self.alpha_times, self.alpha_values), (self.theta_times, self.theta_values)):
            if ts.ndim != 1 or ts.shape != vs.shape or ts.size < 2:
                raise ValueError("each control needs matching knot times/values, at least two knots")
            if np.any(np.diff(ts) <= 0):
                raise ValueError("knot times must be strictly increasing")
        if self.alpha_times[0] != 0.0 or self.theta_times[0] != 0.0:
            raise ValueError("controls must start at t = 0")
        if self.alpha_times[-1] != self.theta_times[-1]:
            raise ValueError("alpha and theta must end at the same final time")

    @property
    def T_f(self) -> float:
        return float(self.alpha_times[-1])

    @classmethod
    def linear(cls, A: float, B: float, T_f: float = 1.0, theta: float = 0.0) -> ControlFunctions:
        """``alpha(t) = A t/T_f + B`` with constant phase."""
        ts = np.array([0.0, T_f])
        return cls(ts, np.array([B, A + B]), ts, np.array([theta, theta]))

    @classmethod
    def piecewise_linear(cls, alpha_knots: Sequence[float], theta_knots: Sequence[float], T_f: float = 1.0) -> ControlFunctions:
        """Equally spaced knots over ``[0, T_f]``."""
        a = np.asarray(alpha_knots, dtype=float)
        th = np.asarray(theta_knots, dtype=float)
        return cls(np.linspace(0.0, T_f, a.size), a, np.linspace(0.0, T_f, th.size), th)

    def alpha(self, t):
        return np.interp(t, self.alpha_times, self.alpha_values)

    def theta(self, t):
        return np.interp(t, self.theta_times, self.theta_values)


@dataclass(frozen=True)
class LinearControlParams:
    A: float
    B: float
    gamma_prime: float
    delta_sq: float = field(init=False)

    def __post_init__(self):
        if self.gamma_prime < 0:
            raise ValueError("gamma_prime must be non-negative")
        object.__setattr__(self, "delta_sq", self.gamma_prime**2 - self.A**2)

    def controls(self, T_f: float = 1.0) -> ControlFunctions:
        return ControlFunctions.linear(self.A, self.B, T_f)


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    @property
    def yield_(self) -> float:
        return float(self.states[-1, 1, 1].real)


def _propagate(ctrl: ControlFunctions, gamma: float, t0: float, t1: float, x0: np.ndarray, steps: int, record_every: int) -> np.ndarray:
    """RK4 for ``dX/dt = -gamma [P, [P, X]]`` with Hermitian ``X``; returns
    the recorded matrices."""
    trace, v0 = to_pauli(x0)
    out = np.empty((n_records(steps, record_every), 3))
    rk4_bloch(
        ctrl.alpha_times, ctrl.alpha_values, ctrl.theta_times, ctrl.theta_values,
        float(gamma), float(t0), float(t1), v0, int(steps), int(record_every), out,
    )
    return from_pauli(trace, out)


_V_GROUND = np.array([0.0, 0.0, 1.0])


def integrate_master_equation(
    rho0: np.ndarray,
    ctrl: ControlFunctions,
    gamma: float,
    T_f: float,
    steps: int = ORACLE_STEPS,
    record_every: int = 1,
) -> Trajectory:
    """Fixed-step RK4 integration of the double-commutator master equation
    over ``[0, T_f]``. Keeps every ``record_every``-th state plus the last."""
    if steps < 100:
        raise ValueError("use at least 100 steps")
    if record_every < 1:
        raise ValueError("record_every must be positive")
    if not (math.isfinite(gamma) and math.isfinite(T_f)) or T_f <= 0:
        raise ValueError("gamma and T_f must be finite, T_f > 0")
    if not math.isclose(ctrl.T_f, T_f, rel_tol=1e-12):
        raise ValueError(f"controls span [0, {ctrl.T_f}], expected [0, {T_f}]")
    rho0 = check_density_matrix(rho0)
    if rho0.shape != (2, 2):
        raise ValueError("continuous measurement acts on a two-level system")
    states = _propagate(ctrl, gamma, 0.0, T_f, rho0, steps, record_every)
    idx = np.arange(0, steps + 1, record_every)
    if idx[-1] != steps:
        idx = np.append(idx, steps)
    return Trajectory(idx * (T_f / steps), states)


def final_yield(ctrl: ControlFunctions, gamma_prime: float, steps: int = INNER_STEPS) -> float:
    """Yield at ``T_f`` from ``|0><0|``; ``gamma = 2 gamma' / T_f``."""
    T_f = ctrl.T_f
    out = np.empty((2, 3))
    rk4_bloch(
        ctrl.alpha_times, ctrl.alpha_values, ctrl.theta_times, ctrl.theta_values,
        2.0 * gamma_prime / T_f, 0.0, T_f, _V_GROUND, int(steps), int(steps), out,
    )
    return 0.5 * (1.0 - out[-1, 2])


# --- analytic linear control ------------------------------------------------

def _damped_hyperbolics(gamma_prime: float, x: float) -> tuple[float, float]:
    """``exp(-g') cosh(sqrt x)`` and ``exp(-g') sinh(sqrt x)/sqrt x`` as
    analytic functions of ``x = delta^2`` (either sign)."""
    damp = math.exp(-gamma_prime)
    if abs(x) < _SERIES_CUTOFF:
        g1 = 1.0 + x / 2.0 + x * x / 24.0 + x**3 / 720.0
        g2 = 1.0 + x / 6.0 + x * x / 120.0 + x**3 / 5040.0
        return damp * g1, damp * g2
    if x < 0.0:
        w = math.sqrt(-x)
        return damp * math.cos(w), damp * math.sin(w) / w
    d = math.sqrt(x)
    # delta <= gamma', so exp(delta - gamma') cannot overflow
    lead = 0.5 * math.exp(d - gamma_prime)
    tail = math.exp(-2.0 * d)
    return lead * (1.0 + tail), -lead * math.expm1(-2.0 * d) / d


def analytic_yield_linear(p: LinearControlParams) -> float:
    """Closed-form final yield for ``alpha(t) = A t/T_f + B``, ``theta = 0``."""
    A, B, g = p.A, p.B, p.gamma_prime
    ch, sh = _damped_hyperbolics(g, p.delta_sq)
    return 0.5 - 0.5 * (math.cos(A) * ch + (g * math.cos(2.0 * B + A) + A * math.sin(A)) * sh)


def solve_optimal_A(gamma_prime: float) -> float:
    """Optimal slope: 0 for ``gamma' <= 1``, else the root of
    ``gamma' sin A = A`` in ``(0, pi)``."""
    if gamma_prime < 0:
        raise ValueError("gamma_prime must be non-negative")
    if gamma_prime <= 1.0:
        return 0.0
    f = lambda a: gamma_prime * math.sin(a) - a
    lo = 1e-300
    hi = math.pi - 1e-15
    if not (f(lo) > 0.0 > f(hi)):
        # gamma' just above 1: root below float resolution of the bracket
        return 0.0
    return bisect(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)


def optimal_yield_continuous(gamma_prime: float) -> tuple[float, float, float]:
    """``(A_m, B_m, Y)`` with ``2 B_m + A_m = pi``."""
    A = solve_optimal_A(gamma_prime)
    B = 0.5 * (math.pi - A)
    Y = 0.5 * (1.0 - math.exp(-gamma_prime * (1.0 + math.cos(A))) * math.cos(A))
    return A, B, Y


def asymptotic_yield_continuous(gamma_prime: float) -> float:
    """Large-``gamma T_f`` law ``1 - pi^2/(2 gamma T_f)`` with ``gamma T_f = 2 gamma'``."""
    return 1.0 - math.pi**2 / (4.0 * gamma_prime)


def maximize_linear_yield(gamma_prime: float) -> tuple[float, float, float]:
    """Numerical maximum of the closed-form linear-control yield over
    ``(A, B)`` by multistart Nelder-Mead. Oracle for :func:`optimal_yield_continuous`."""
    obj = lambda v: -analytic_yield_linear(LinearControlParams(v[0], v[1], gamma_prime))
    best = None
    for A0 in np.linspace(-2 * math.pi, 2 * math.pi, 9):
        for B0 in np.linspace(0.0, math.pi, 5):
            r = minimize(obj, [A0, B0], method="Nelder-Mead",
                         options={"xatol": 1e-12, "fatol": 1e-16, "maxiter": 20_000})
            if best is None or r.fun < best.fun:
                best = r
    return float(best.x[0]), float(best.x[1]), float(-best.fun)


# --- variational analysis ---------------------------------------------------

def variational_kernel_linear(p: LinearControlParams, T_f: float, t: float, tau: float) -> float:
    """Diagonal entry ``Y_alpha(t, tau)`` of the response ``rho_alpha(t, tau)``
    at the optimal linear control (``gamma' sin A = A``, ``2B + A = pi``)::

        -1/2 sin(A (1 - t/T_f)) exp[(A (t - 2 tau) cot A - A t csc A) / T_f]

    Vanishes at ``t = T_f`` for every ``tau``.
    """
    if tau > t:
        raise ValueError("need tau <= t")
    A = p.A
    if A == 0.0:
        return 0.0
    expo = (A * (t - 2.0 * tau) / math.tan(A) - A * t / math.sin(A)) / T_f
    return -0.5 * math.sin(A * (1.0 - t / T_f)) * math.exp(expo)


def printed_variational_kernel(p: LinearControlParams, T_f: float, t: float, tau: float) -> float:
    """The kernel with exponent ``(A (t - 2 tau) cot A - t csc A) / T_f``.

    Kept only to quantify its disagreement with the propagated response;
    it agrees with :func:`variational_kernel_linear` at ``t = T_f`` only.
    """
    if tau > t:
        raise ValueError("need tau <= t")
    A = p.A
    if A == 0.0:
        return 0.0
    expo = (A * (t - 2.0 * tau) / math.tan(A) - t / math.sin(A)) / T_f
    return -0.5 * math.sin(A * (1.0 - t / T_f)) * math.exp(expo)


def _projector_and_derivative(alpha: float) -> tuple[np.ndarray, np.ndarray]:
    c, s = math.cos(0.5 * alpha), math.sin(0.5 * alpha)
    psi = np.array([c, s])
    dpsi = 0.5 * np.array([-s, c])
    return np.outer(psi, psi), np.outer(dpsi, psi) + np.outer(psi, dpsi)


def propagated_variational_kernel(p: LinearControlParams, T_f: float, t: float, tau: float, steps: int = 20_000) -> np.ndarray:
    """``rho_alpha(t, tau)`` by direct propagation: the response
    ``d L/d alpha rho(tau)`` evolved from ``tau`` to ``t`` under
    ``-gamma L``, with ``L = [P, [P, .]]``."""
    if not 0.0 <= tau <= t <= T_f:
        raise ValueError("need 0 <= tau <= t <= T_f")
    ctrl = p.controls(T_f)
    gamma = 2.0 * p.gamma_prime / T_f
    n1 = max(100, int(round(steps * tau / T_f)))
    n2 = max(100, int(round(steps * (t - tau) / T_f)))
    rho_tau = GROUND if tau == 0.0 else _propagate(ctrl, gamma, 0.0, tau, GROUND, n1, n1)[-1]
    P, dP = _projector_and_derivative(float(ctrl.alpha(tau)))
    inner = P @ rho_tau - rho_tau @ P
    d_inner = dP @ rho_tau - rho_tau @ dP
    x0 = (dP @ inner - inner @ dP) + (P @ d_inner - d_inner @ P)
    if t == tau:
        return x0.real.copy()
    return _propagate(ctrl, gamma, tau, t, x0, n2, n2)[-1].real.copy()


def _bump_controls(p: LinearControlParams, T_f: float, n_bumps: int, j: int, eps: float, direction: str) -> ControlFunctions:
    ts = np.linspace(0.0, T_f, 2 * n_bumps + 1)
    alpha = p.A * ts / T_f + p.B
    theta = np.zeros_like(ts)
    hat = np.zeros_like(ts)
    hat[2 * j + 1] = 1.0
    if direction == "alpha":
        alpha = alpha + eps * hat
    else:
        theta = theta + eps * hat
    return ControlFunctions(ts, alpha, ts, theta)


def stationarity_check(
    p: LinearControlParams,
    T_f: float = 1.0,
    n_bumps: int = 16,
    eps: float = 1e-4,
    steps: int = ORACLE_STEPS,
    direction: Literal["alpha", "theta", "both"] = "both",
) -> float:
    """Largest central-difference derivative of the final yield along
    localized hat perturbations of ``alpha(t)`` and/or ``theta(t)``.

    Hat ``j`` rises from 0 to 1 and back over ``[j, j+1] T_f / n_bumps``.
    Near zero at a stationary control.
    """
    dirs = ("alpha", "theta") if direction == "both" else (direction,)
    segs = 2 * n_bumps
    steps = -(-steps // segs) * segs  # keep every kink on a step boundary
    worst = 0.0
    for d in dirs:
        for j in range(n_bumps):
            y_plus = final_yield(_bump_controls(p, T_f, n_bumps, j, eps, d), p.gamma_prime, steps)
            y_minus = final_yield(_bump_controls(p, T_f, n_bumps, j, -eps, d), p.gamma_prime, steps)
            worst = max(worst, abs(y_plus - y_minus) / (2.0 * eps))
    return worst
