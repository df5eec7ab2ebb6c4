"""Small dense density-matrix algebra for two- and three-level systems.

States and operators are plain complex ``numpy`` arrays of shape ``(d, d)``
with ``d`` in ``{2, 3}``. Every function here is pure: inputs are never
modified in place.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
PSD_TOL = 1e-9


class DimensionError(ValueError):
    """Operands have incompatible matrix shapes."""


class InvalidStateError(ValueError):
    """A matrix violates a density-matrix invariant."""


def _fold_angles(alpha: float, theta: float) -> tuple[float, float]:
    # Same projector under alpha -> alpha + 2pi and (alpha, theta) -> (-alpha, theta + pi).
    two_pi = 2.0 * math.pi
    theta = math.fmod(theta, two_pi)
    if theta < 0.0:
        theta += two_pi
    if theta >= two_pi:  # tiny negative theta rounds up to 2pi
        theta = 0.0
    if theta >= math.pi:
        theta -= math.pi
        alpha = -alpha
    if theta >= math.pi:  # round-off at the upper edge: (alpha, pi) ~ (-alpha, 0)
        theta = 0.0
        alpha = -alpha
    alpha = math.fmod(alpha + math.pi, two_pi)
    if alpha < 0.0:
        alpha += two_pi
    alpha -= math.pi
    if alpha >= math.pi:
        alpha = -math.pi
    return alpha, theta


@dataclass(frozen=True)
class Projector:
    """Rank-1 qubit projector ``|psi><psi|`` with
    ``|psi> = cos(alpha/2)|0> + exp(i theta) sin(alpha/2)|1>``.

    Use :func:`make_projector` to get canonical angles.
    """

    alpha: float
    theta: float
    dim: int = 2

    @property
    def ket(self) -> np.ndarray:
        return np.array(
            [math.cos(0.5 * self.alpha), np.exp(1j * self.theta) * math.sin(0.5 * self.alpha)],
            dtype=complex,
        )

    @property
    def matrix(self) -> np.ndarray:
        psi = self.ket
        return np.outer(psi, psi.conj())


def make_projector(alpha: float, theta: float) -> Projector:
    """Build the qubit projector for Bloch angles, folded into
    ``alpha in [-pi, pi)`` and ``theta in [0, pi)``."""
    a, t = _fold_angles(float(alpha), float(theta))
    return Projector(a, t, 2)


def basis_projector(level: int, dim: int) -> np.ndarray:
    """``|level><level|`` in a ``dim``-dimensional space."""
    if not 0 <= level < dim:
        raise ValueError(f"level {level} outside 0..{dim - 1}")
    P = np.zeros((dim, dim), dtype=complex)
    P[level, level] = 1.0
    return P


def pure_state(ket: Sequence[complex]) -> np.ndarray:
    psi = np.asarray(ket, dtype=complex)
    psi = psi / np.linalg.norm(psi)
    return np.outer(psi, psi.conj())


def as_matrix(P: Projector | np.ndarray) -> np.ndarray:
    if isinstance(P, Projector):
        return P.matrix
    return np.asarray(P, dtype=complex)


def _same_shape(rho: np.ndarray, P: np.ndarray) -> None:
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1] or rho.shape != P.shape:
        raise DimensionError(f"shape mismatch: state {rho.shape} vs operator {P.shape}")


def measure_instantaneous(rho: np.ndarray, P: Projector | np.ndarray) -> np.ndarray:
    """Non-selective measurement of a single projector:
    ``rho - [P, [P, rho]] = P rho P + (1 - P) rho (1 - P)``."""
    rho = np.asarray(rho, dtype=complex)
    P = as_matrix(P)
    _same_shape(rho, P)
    Q = np.eye(P.shape[0]) - P
    return P @ rho @ P + Q @ rho @ Q


def measure_observable(rho: np.ndarray, projectors: Iterable[Projector | np.ndarray]) -> np.ndarray:
    """Non-selective measurement of an observable given by its spectral
    projectors: ``sum_k P_k rho P_k``.

    The projectors must be mutually orthogonal and sum to the identity.
    """
    rho = np.asarray(rho, dtype=complex)
    Ps = [as_matrix(P) for P in projectors]
    if not Ps:
        raise ValueError("empty projector set")
    for P in Ps:
        _same_shape(rho, P)
    d = rho.shape[0]
    if not np.allclose(sum(Ps), np.eye(d), atol=HERMITIAN_TOL, rtol=0.0):
        raise ValueError("projectors do not sum to the identity")
    for i, Pi in enumerate(Ps):
        if not np.allclose(Pi @ Pi, Pi, atol=HERMITIAN_TOL, rtol=0.0):
            raise ValueError(f"operator {i} is not idempotent")
        for Pj in Ps[i + 1:]:
            if not np.allclose(Pi @ Pj, 0.0, atol=HERMITIAN_TOL):
                raise ValueError("projectors are not mutually orthogonal")
    return sum(P @ rho @ P for P in Ps)


def _energies(H0: np.ndarray | Sequence[float]) -> np.ndarray:
    H0 = np.asarray(H0)
    if H0.ndim == 2:
        if np.count_nonzero(H0 - np.diag(np.diag(H0))):
            raise ValueError("free Hamiltonian must be diagonal")
        H0 = np.diag(H0)
    if np.iscomplexobj(H0):
        if np.any(H0.imag != 0):
            raise ValueError("free Hamiltonian must be real")
        H0 = H0.real
    return H0.astype(float)


def free_propagator(H0: np.ndarray | Sequence[float], t: float) -> np.ndarray:
    """``exp(-i H0 t)`` for diagonal ``H0`` (diagonal matrix or energy list)."""
    return np.diag(np.exp(-1j * _energies(H0) * t))


def picture_transform(rho_s: np.ndarray, H0: np.ndarray | Sequence[float], t: float) -> np.ndarray:
    """Schrödinger -> interaction picture: ``exp(i H0 t) rho exp(-i H0 t)``."""
    if not math.isfinite(t):
        raise ValueError("time must be finite")
    E = _energies(H0)
    rho_s = np.asarray(rho_s, dtype=complex)
    if rho_s.shape != (E.size, E.size):
        raise DimensionError(f"state {rho_s.shape} vs Hamiltonian of size {E.size}")
    phase = np.exp(1j * t * (E[:, None] - E[None, :]))
    return rho_s * phase


def purity(rho: np.ndarray) -> float:
    rho = np.asarray(rho, dtype=complex)
    # tr(rho^2) = sum |rho_ij|^2 for Hermitian rho
    return float(np.sum(np.abs(rho) ** 2))


def hermitian_min_eigenvalue(H: np.ndarray) -> float:
    """Smallest eigenvalue of a 2x2 or 3x3 Hermitian matrix from the
    characteristic polynomial."""
    H = np.asarray(H, dtype=complex)
    if H.shape == (2, 2):
        a, d = H[0, 0].real, H[1, 1].real
        b2 = abs(H[0, 1]) ** 2
        return 0.5 * (a + d) - math.sqrt(0.25 * (a - d) ** 2 + b2)
    if H.shape == (3, 3):
        p1 = abs(H[0, 1]) ** 2 + abs(H[0, 2]) ** 2 + abs(H[1, 2]) ** 2
        diag = H.diagonal().real
        q = float(diag.sum()) / 3.0
        p2 = float(np.sum((diag - q) ** 2)) + 2.0 * p1
        if p2 == 0.0:
            return q
        p = math.sqrt(p2 / 6.0)
        Bm = (H - q * np.eye(3)) / p
        r = float(np.linalg.det(Bm).real) / 2.0
        phi = math.acos(min(1.0, max(-1.0, r))) / 3.0
        return q + 2.0 * p * math.cos(phi + 2.0 * math.pi / 3.0)
    raise DimensionError(f"closed-form spectrum only for 2x2 and 3x3, got {H.shape}")


def check_density_matrix(rho: np.ndarray, *, psd_tol: float = PSD_TOL) -> np.ndarray:
    """Return ``rho`` as a complex array, raising :class:`InvalidStateError`
    unless it is Hermitian, unit trace and positive semidefinite."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape not in ((2, 2), (3, 3)):
        raise DimensionError(f"expected 2x2 or 3x3 matrix, got {rho.shape}")
    if not np.all(np.isfinite(rho)):
        raise InvalidStateError("non-finite entries")
    if np.max(np.abs(rho - rho.conj().T)) > HERMITIAN_TOL:
        raise InvalidStateError("not Hermitian")
    tr = np.trace(rho)
    if abs(tr - 1.0) > TRACE_TOL:
        raise InvalidStateError(f"trace {tr.real:.3e} != 1")
    lam = hermitian_min_eigenvalue(rho)
    if lam < -psd_tol:
        raise InvalidStateError(f"negative eigenvalue {lam:.3e}")
    return rho


def is_unitary(U: np.ndarray, tol: float = 1e-12) -> bool:
    U = np.asarray(U, dtype=complex)
    return bool(np.max(np.abs(U @ U.conj().T - np.eye(U.shape[0]))) <= tol)


def density_matrix_to_json(rho: np.ndarray) -> list[list[list[float]]]:
    """Row-major ``[re, im]`` pairs, for JSON debug output."""
    rho = np.asarray(rho, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in rho]


def density_matrix_from_json(data: Sequence[Sequence[Sequence[float]]]) -> np.ndarray:
    return np.array([[complex(re, im) for re, im in row] for row in data], dtype=complex)
