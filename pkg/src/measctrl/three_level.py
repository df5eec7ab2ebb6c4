"""Measurement-assisted coherent control of the symmetric three-level ladder.

Levels ``|0>, |1>, |2>`` with equal Rabi coupling on both transitions::

    H(Omega) = Omega |0><1| + Omega |1><2| + h.c.

Coherent evolution from ``|0>`` keeps ``C_1^2 = 2 C_0 C_2`` and caps the
population of ``|1>`` at 1/2. A single non-selective measurement of
``|0><0|`` (or ``|2><2|``) between two constant pulses breaks the symmetry.

Pulse strength enters only through the area ``x = 2 sqrt(2) |Omega| tau``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .quantum import basis_projector, measure_instantaneous

H0 = np.diag([1.0, 2.0, 3.0])
MU = np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 1.0], [0.0, 1.0, 0.0]])
SQRT2 = math.sqrt(2.0)
PRIOR_NUMERIC_OPTIMUM = 0.669
COHERENT_LIMIT = 0.5


@dataclass(frozen=True)
class RabiPulse:
    """Constant Rabi frequency ``magnitude * exp(i phase)`` held for ``duration``."""

    magnitude: float
    phase: float
    duration: float

    def __post_init__(self):
        if self.magnitude < 0:
            raise ValueError("magnitude must be non-negative")
        if self.duration <= 0:
            raise ValueError("duration must be positive")

    @property
    def omega(self) -> complex:
        return self.magnitude * complex(math.cos(self.phase), math.sin(self.phase))

    @property
    def area(self) -> float:
        return 2.0 * SQRT2 * self.magnitude * self.duration

    @classmethod
    def from_area(cls, x: float, phase: float = 0.0, duration: float = 1.0) -> RabiPulse:
        """Pulse with area ``x``. A negative area is the same pulse with the
        field sign flipped, i.e. phase shifted by pi."""
        if x < 0:
            x, phase = -x, phase + math.pi
        return cls(x / (2.0 * SQRT2 * duration), math.remainder(phase, 2.0 * math.pi), duration)


@dataclass(frozen=True)
class ThreeLevelPlan:
    pulse1: RabiPulse
    measured_level: int
    pulse2: RabiPulse

    def __post_init__(self):
        if self.measured_level not in (0, 2):
            raise ValueError("measured_level must be 0 or 2")


@dataclass(frozen=True)
class StateCoefficients:
    C0: complex
    C1: complex
    C2: complex

    def __post_init__(self):
        norm = abs(self.C0) ** 2 + abs(self.C1) ** 2 + abs(self.C2) ** 2
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"coefficients not normalized: {norm}")

    @classmethod
    def from_ket(cls, ket: Sequence[complex]) -> StateCoefficients:
        return cls(complex(ket[0]), complex(ket[1]), complex(ket[2]))

    def ket(self) -> np.ndarray:
        return np.array([self.C0, self.C1, self.C2], dtype=complex)


def hamiltonian(omega: complex) -> np.ndarray:
    w = complex(omega)
    return np.array([[0, w, 0], [w.conjugate(), 0, w], [0, w.conjugate(), 0]], dtype=complex)


def propagator_from_area(x, psi) -> np.ndarray:
    """``exp(-i tau H(Omega))`` with ``Omega = |Omega| exp(i psi)`` and
    ``x = 2 sqrt(2) |Omega| tau``; broadcasts over ``x`` and ``psi``.

    Built from ``|Omega> = (Omega|0> + Omega*|2>) / (sqrt 2 |Omega|)``::

        U = P_perp + cos(x/2) (|1><1| + |Omega><Omega|)
                   - i sin(x/2) (|1><Omega| + |Omega><1|)
    """
    x, psi = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(psi, dtype=float))
    e = np.exp(1j * psi) / SQRT2
    zero = np.zeros_like(e)
    w = np.stack([e, zero, e.conj()], axis=-1)          # |Omega>
    w_perp = np.stack([e, zero, -e.conj()], axis=-1)    # |Omega~>
    one = np.zeros(x.shape + (3,), dtype=complex)
    one[..., 1] = 1.0
    outer = lambda a, b: a[..., :, None] * b.conj()[..., None, :]
    c = np.cos(0.5 * x)[..., None, None]
    s = np.sin(0.5 * x)[..., None, None]
    return (outer(w_perp, w_perp)
            + c * (outer(one, one) + outer(w, w))
            - 1j * s * (outer(one, w) + outer(w, one)))


def propagator(pulse: RabiPulse) -> np.ndarray:
    if pulse.magnitude == 0.0:
        # |Omega> is undefined; the formula's limit is the identity
        return np.eye(3, dtype=complex)
    return propagator_from_area(pulse.area, pulse.phase)


def taylor_expm(M: np.ndarray, terms: int = 30) -> np.ndarray:
    """Matrix exponential by scaling and squaring a truncated Taylor series."""
    M = np.asarray(M, dtype=complex)
    norm = np.linalg.norm(M, 1)
    s = max(0, int(math.ceil(math.log2(norm / 0.25))) if norm > 0 else 0)
    A = M / 2.0**s
    result = np.eye(M.shape[0], dtype=complex)
    term = np.eye(M.shape[0], dtype=complex)
    for k in range(1, terms + 1):
        term = term @ A / k
        result = result + term
    for _ in range(s):
        result = result @ result
    return result


def symmetry_invariant(c: StateCoefficients | Sequence[complex]) -> float:
    """``|C0 C2 - C1^2 / 2|``, conserved by any coherent pulse sequence."""
    if isinstance(c, StateCoefficients):
        c0, c1, c2 = c.C0, c.C1, c.C2
    else:
        c0, c1, c2 = c
    return abs(c0 * c2 - 0.5 * c1 * c1)


def evolve_coherent(ket: Sequence[complex], pulses: Sequence[RabiPulse]) -> np.ndarray:
    psi = np.asarray(ket, dtype=complex)
    for p in pulses:
        psi = propagator(p) @ psi
    return psi


def run_protocol(stage1: Sequence[RabiPulse], measured_level: int | None, stage2: Sequence[RabiPulse]) -> np.ndarray:
    """``|0>`` -> pulses of ``stage1`` -> optional measurement -> ``stage2``.
    Returns the final density matrix."""
    psi = evolve_coherent([1.0, 0.0, 0.0], stage1)
    rho = np.outer(psi, psi.conj())
    if measured_level is not None:
        rho = measure_instantaneous(rho, basis_projector(measured_level, 3))
    for p in stage2:
        U = propagator(p)
        rho = U @ rho @ U.conj().T
    return rho


def run_plan(plan: ThreeLevelPlan) -> tuple[np.ndarray, float]:
    """Final state and population of ``|1>`` for the three-step protocol."""
    rho = run_protocol([plan.pulse1], plan.measured_level, [plan.pulse2])
    return rho, float(rho[1, 1].real)


def plan_population_batch(x1, x2, dpsi, measured_level: int | None = 0) -> np.ndarray:
    """Vectorized population of ``|1>`` for first-pulse phase 0, second-pulse
    phase ``dpsi`` (the population only depends on the phase difference)."""
    x1, x2, dpsi = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (x1, x2, dpsi)))
    psi1 = propagator_from_area(x1, 0.0)[..., :, 0]
    rho = psi1[..., :, None] * psi1.conj()[..., None, :]
    if measured_level is not None:
        keep = np.ones((3, 3))
        keep[measured_level, :] = 0.0
        keep[:, measured_level] = 0.0
        keep[measured_level, measured_level] = 1.0
        rho = rho * keep
    U2 = propagator_from_area(x2, dpsi)
    row = U2[..., 1, :]
    return np.einsum("...i,...ij,...j->...", row, rho, row.conj()).real


def population_closed_form(x1: float, x2: float, psi1: float, psi2: float):
    """Population of ``|1>`` in closed form::

        (1/16) {5 - cos x1 - [1 + 3 cos x1] cos x2
                + 2 [2 sin(x1/2) - sin x1] sin x2 cos(psi2 - psi1)}

    With the propagator of :func:`propagator` this equals :func:`run_plan`
    after shifting ``psi2`` by pi (equivalently flipping the sign of one
    pulse area); see :func:`closed_form_phase`.
    """
    return (5.0 - np.cos(x1) - (1.0 + 3.0 * np.cos(x1)) * np.cos(x2)
            + 2.0 * (2.0 * np.sin(0.5 * x1) - np.sin(x1)) * np.sin(x2) * np.cos(psi2 - psi1)) / 16.0


def closed_form_phase(plan: ThreeLevelPlan) -> tuple[float, float, float, float]:
    """Arguments of :func:`population_closed_form` reproducing ``run_plan(plan)``
    for a ``|0><0|`` measurement."""
    return plan.pulse1.area, plan.pulse2.area, plan.pulse1.phase, plan.pulse2.phase + math.pi


def euler_population(x1: float, x2: float, a2_plus_b1: float):
    """Population of ``|1>`` when each propagator is written as
    ``exp(i a H0) exp(i x mu / (2 sqrt 2)) exp(i b H0)``."""
    return (5.0 - np.cos(x2) - np.cos(x1) * (1.0 + 3.0 * np.cos(x2))
            + 2.0 * np.cos(a2_plus_b1) * (np.sin(x1) - 2.0 * np.sin(0.5 * x1)) * np.sin(x2)) / 16.0


def euler_propagator(a: float, x: float, b: float) -> np.ndarray:
    phase = lambda t: np.diag(np.exp(1j * t * np.diag(H0)))
    return phase(a) @ taylor_expm(1j * x / (2.0 * SQRT2) * MU) @ phase(b)


def run_euler(a1: float, x1: float, b1: float, a2: float, x2: float, b2: float, measured_level: int = 0) -> float:
    """Matrix route for the Euler-parameterized protocol: ``U1^dag rho0 U1``,
    measurement, ``U2^dag rho U2``. Returns the population of ``|1>``."""
    U1 = euler_propagator(a1, x1, b1)
    U2 = euler_propagator(a2, x2, b2)
    rho = U1.conj().T @ basis_projector(0, 3) @ U1
    rho = measure_instantaneous(rho, basis_projector(measured_level, 3))
    rho = U2.conj().T @ rho @ U2
    return float(rho[1, 1].real)


# --- optimum ------------------------------------------------------------------

def _arctan_ratio() -> float:
    return math.atan(math.sqrt(18.0 + 2.0 * math.sqrt(6.0)) / (math.sqrt(6.0) - 1.0))


def closed_form_optimum() -> tuple[float, float, float]:
    """``(x1*, x2*, P_max)`` from the closed-form expressions, upper sign."""
    r = _arctan_ratio()
    x1 = 2.0 * r - 2.0 * math.pi
    x2 = -r
    s6 = math.sqrt(6.0)
    p_max = 4e-3 * (math.sqrt(393.0 - 48.0 * s6) + 138.0 + 7.0 * s6)
    return x1, x2, p_max


def golden_section_max(f: Callable[[float], float], a: float, b: float, tol: float = 1e-12) -> tuple[float, float]:
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


def grid_refine_max(
    f_batch: Callable[..., np.ndarray],
    axes: Sequence[np.ndarray],
    tol: float = 1e-12,
    max_passes: int = 500,
) -> tuple[np.ndarray, float]:
    """Grid search over the tensor grid ``axes`` followed by coordinate-wise
    golden-section passes, each within one grid cell of the current point."""
    mesh = np.meshgrid(*axes, indexing="ij")
    vals = f_batch(*mesh)
    idx = np.unravel_index(int(np.argmax(vals)), vals.shape)
    x = np.array([ax[i] for ax, i in zip(axes, idx)], dtype=float)
    best = float(vals[idx])
    cells = [float(ax[1] - ax[0]) for ax in axes]

    def along(i):
        def g(v):
            y = x.copy()
            y[i] = v
            return float(f_batch(*y))
        return g

    for _ in range(max_passes):
        prev = best
        for i, h in enumerate(cells):
            xi, yi = golden_section_max(along(i), x[i] - h, x[i] + h, tol)
            if yi >= best:
                x[i], best = xi, yi
        if best - prev <= 1e-16:
            break
    return x, best


@dataclass(frozen=True)
class OptimalPlan:
    x1_star: float
    x2_star: float
    closed_form_p_max: float
    grid_x: tuple[float, float, float]
    grid_p_max: float
    plan: ThreeLevelPlan
    plan_population: float


def _default_axes(n_area: int = 256, n_phase: int = 64) -> list[np.ndarray]:
    return [
        np.linspace(-2 * math.pi, 2 * math.pi, n_area),
        np.linspace(-2 * math.pi, 2 * math.pi, n_area),
        np.linspace(0.0, 2 * math.pi, n_phase, endpoint=False),
    ]


def optimal_plan(n_area: int = 256, n_phase: int = 64) -> OptimalPlan:
    """Closed-form optimum, its independent grid+refinement check, and a
    physical plan (non-negative areas, unit durations) that attains it."""
    x1, x2, p_max = closed_form_optimum()
    gx, gp = grid_refine_max(
        lambda a, b, d: population_closed_form(a, b, 0.0, d), _default_axes(n_area, n_phase)
    )
    # areas are non-negative for a physical pulse; the sign moves into the phase
    p1 = RabiPulse.from_area(x1, 0.0)
    candidates = [ThreeLevelPlan(p1, 0, RabiPulse.from_area(x2, d)) for d in (0.0, math.pi)]
    pops = [run_plan(c)[1] for c in candidates]
    k = int(np.argmax(pops))
    return OptimalPlan(x1, x2, p_max, tuple(float(v) for v in gx), gp, candidates[k], pops[k])


def maximize_protocol(measured_level: int | None, n_area: int = 96, n_phase: int = 32) -> tuple[np.ndarray, float]:
    """Grid+refinement maximum of the simulated protocol population over
    ``(x1, x2, psi2 - psi1)``; ``measured_level=None`` means no measurement."""
    f = lambda a, b, d: plan_population_batch(a, b, d, measured_level)
    return grid_refine_max(f, _default_axes(n_area, n_phase))


def maximize_euler(n_area: int = 256, n_phase: int = 64) -> tuple[np.ndarray, float]:
    return grid_refine_max(euler_population, _default_axes(n_area, n_phase))
