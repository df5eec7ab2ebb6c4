"""Sequences of instantaneous projective measurements on a qubit.

The measurements are the only driving force: starting in ``|0><0|``, each
step applies ``rho -> rho - [P_k, [P_k, rho]]`` and the figure of merit is
the final population of ``|1>``. Free evolution between measurements is
left out (interaction picture); :func:`run_sequence_schrodinger` puts it
back for a diagonal free Hamiltonian.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .quantum import (
    check_density_matrix,
    free_propagator,
    make_projector,
    measure_instantaneous,
)

GROUND = np.array([[1.0, 0.0], [0.0, 0.0]], dtype=complex)
BRUTE_FORCE_MAX_N = 6


@dataclass(frozen=True)
class MeasurementSequence:
    alphas: tuple[float, ...]
    thetas: tuple[float, ...]

    def __post_init__(self):
        if len(self.alphas) < 1:
            raise ValueError("a sequence needs at least one measurement")
        if len(self.alphas) != len(self.thetas):
            raise ValueError("alphas and thetas differ in length")

    @classmethod
    def from_angles(cls, alphas: Sequence[float], thetas: Sequence[float] | None = None) -> MeasurementSequence:
        """Build a sequence with angles folded into the canonical ranges."""
        if thetas is None:
            thetas = [0.0] * len(alphas)
        folded = [make_projector(a, t) for a, t in zip(alphas, thetas)]
        return cls(tuple(p.alpha for p in folded), tuple(p.theta for p in folded))

    @property
    def N(self) -> int:
        return len(self.alphas)

    def projectors(self):
        return [make_projector(a, t) for a, t in zip(self.alphas, self.thetas)]


@dataclass(frozen=True)
class SequenceResult:
    yield_: float
    coherence: complex
    final_state: np.ndarray


def run_sequence(rho0: np.ndarray, seq: MeasurementSequence) -> SequenceResult:
    """Apply the measurements of ``seq`` in order, starting from ``rho0``."""
    rho = check_density_matrix(rho0)
    if rho.shape != (2, 2):
        raise ValueError("measurement sequences act on a two-level system")
    for P in seq.projectors():
        rho = measure_instantaneous(rho, P)
    return SequenceResult(float(rho[1, 1].real), complex(rho[1, 0]), rho)


def run_sequence_schrodinger(
    rho0: np.ndarray,
    seq: MeasurementSequence,
    H0: Sequence[float] | np.ndarray,
    times: Sequence[float],
) -> np.ndarray:
    """Schrödinger-picture iteration with free evolution under diagonal ``H0``.

    The state evolves freely from ``T_{k-1}`` to ``T_k`` (``T_0 = 0``) and is
    then measured with the lab-frame projector ``P_k``. Returns the state at
    ``T_N``.
    """
    if len(times) != seq.N:
        raise ValueError("need one measurement time per projector")
    rho = check_density_matrix(rho0)
    t_prev = 0.0
    for P, t in zip(seq.projectors(), times):
        U = free_propagator(H0, t - t_prev)
        rho = measure_instantaneous(U @ rho @ U.conj().T, P)
        t_prev = t
    return rho


def yield_closed_form(seq: MeasurementSequence) -> float:
    """Yield from ``|0><0|`` as ``(1 - cos a_1 C_12 ... C_{N-1,N} cos a_N) / 2``
    with ``C_mn = cos a_m cos a_n + cos(t_m - t_n) sin a_m sin a_n``."""
    a = np.asarray(seq.alphas, dtype=float)
    t = np.asarray(seq.thetas, dtype=float)
    C = np.cos(a[:-1]) * np.cos(a[1:]) + np.cos(t[:-1] - t[1:]) * np.sin(a[:-1]) * np.sin(a[1:])
    return 0.5 * (1.0 - math.cos(a[0]) * float(np.prod(C)) * math.cos(a[-1]))


def _check_n(N: int) -> int:
    if int(N) != N or N < 1:
        raise ValueError(f"N must be a positive integer, got {N!r}")
    return int(N)


def optimal_sequence(N: int) -> MeasurementSequence:
    """Equal steps of ``pi/(N+1)``: ``alpha_k = (N+1-k) pi/(N+1)``, all ``theta_k = 0``."""
    N = _check_n(N)
    step = math.pi / (N + 1)
    return MeasurementSequence(tuple((N + 1 - k) * step for k in range(1, N + 1)), (0.0,) * N)


def optimal_yield_instantaneous(N: int) -> float:
    N = _check_n(N)
    return 0.5 * (1.0 + math.cos(math.pi / (N + 1)) ** (N + 1))


def asymptotic_yield_instantaneous(N: int) -> float:
    return 1.0 - math.pi**2 / (4.0 * _check_n(N))


# --- brute-force oracle -----------------------------------------------------

def _batch_yield(alphas: np.ndarray, thetas: np.ndarray) -> np.ndarray:
    """Density-matrix iteration for a batch of sequences, shape ``(B, N)``."""
    B, N = alphas.shape
    rho = np.broadcast_to(GROUND, (B, 2, 2)).copy()
    for k in range(N):
        c = np.cos(0.5 * alphas[:, k])
        s = np.exp(1j * thetas[:, k]) * np.sin(0.5 * alphas[:, k])
        psi = np.stack([c, s], axis=1)
        P = psi[:, :, None] * psi.conj()[:, None, :]
        Q = np.eye(2) - P
        rho = P @ rho @ P + Q @ rho @ Q
    return rho[:, 1, 1].real


def _line_search(x: np.ndarray, i: int, lo: float, hi: float, grid: int, zoom_points: int, tol: float) -> tuple[float, float]:
    """Maximize the yield along coordinate ``i`` of the flat parameter vector
    ``x = (alphas, thetas)``: full-range grid, then repeated bracket zooming."""
    N = x.size // 2

    def evaluate(values: np.ndarray) -> np.ndarray:
        X = np.repeat(x[None, :], values.size, axis=0)
        X[:, i] = values
        return _batch_yield(X[:, :N], X[:, N:])

    pts = np.linspace(lo, hi, grid, endpoint=False)
    ys = evaluate(pts)
    j = int(np.argmax(ys))
    best_x, best_y = pts[j], ys[j]
    width = (hi - lo) / grid
    while width > tol:
        pts = np.linspace(best_x - width, best_x + width, zoom_points)
        ys = evaluate(pts)
        j = int(np.argmax(ys))
        if ys[j] >= best_y:
            best_x, best_y = pts[j], ys[j]
        width = 2.0 * width / (zoom_points - 1)
    return float(best_x), float(best_y)


@lru_cache(maxsize=None)
def brute_force_optimal(
    N: int,
    grid: int = 64,
    starts: int = 4,
    seed: int = 0,
    tol: float = 1e-10,
    max_passes: int = 2000,
) -> tuple[MeasurementSequence, float]:
    """Maximize the N-step yield without using its closed form.

    Coordinate ascent over all ``2N`` angles from several seeded random
    starts. Each coordinate move scans a ``grid``-point mesh over the full
    angle range and then zooms in on the best cell. Passes repeat until the
    yield changes by less than ``tol``.
    """
    N = _check_n(N)
    if N > BRUTE_FORCE_MAX_N:
        raise ValueError(f"brute force limited to N <= {BRUTE_FORCE_MAX_N}")
    if grid < 64:
        raise ValueError("grid needs at least 64 points per angle")
    rng = np.random.default_rng(seed)
    bounds = [(-math.pi, math.pi)] * N + [(0.0, math.pi)] * N
    best_x, best_y = None, -math.inf
    for _ in range(starts):
        x = np.array([rng.uniform(lo, hi) for lo, hi in bounds])
        y = float(_batch_yield(x[None, :N], x[None, N:])[0])
        for _ in range(max_passes):
            y_prev = y
            for i, (lo, hi) in enumerate(bounds):
                xi, yi = _line_search(x, i, lo, hi, grid, 17, 1e-9)
                if yi >= y:
                    x[i], y = xi, yi
            if y - y_prev < tol:
                break
        if y > best_y:
            best_x, best_y = x.copy(), y
    seq = MeasurementSequence.from_angles(best_x[:N], best_x[N:])
    return seq, best_y
