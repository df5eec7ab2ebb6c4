"""Compiled fixed-step RK4 for ``d X/dt = -gamma [P(t), [P(t), X]]``.

``P(t)`` is the qubit projector with Bloch angles ``alpha(t)``, ``theta(t)``
given as piecewise-linear knot lists. ``X`` is Hermitian (a state or a
state variation) and is carried in Pauli coordinates,
``X = (x0 + v . sigma) / 2``. For ``P = (1 + n . sigma) / 2`` the generator
acts as ``v -> v - n (n . v)`` and leaves ``x0`` alone. RK4 commutes with
this linear change of coordinates, so the steps are those of the matrix
scheme.
"""
from __future__ import annotations

import math

import numba
import numpy as np


@numba.njit(cache=True)
def _interp(ts, vs, t, j):
    # j: segment hint; query times only move forward within one integration
    n = ts.size
    if t <= ts[0]:
        return vs[0], 0
    if t >= ts[n - 1]:
        return vs[n - 1], n - 2
    while ts[j + 1] < t:
        j += 1
    f = (t - ts[j]) / (ts[j + 1] - ts[j])
    return vs[j] + (vs[j + 1] - vs[j]) * f, j


@numba.njit(cache=True)
def _axis(a, th):
    s = math.sin(a)
    return s * math.cos(th), s * math.sin(th), math.cos(a)


@numba.njit(cache=True)
def _rhs(n, vx, vy, vz, g):
    d = n[0] * vx + n[1] * vy + n[2] * vz
    return -g * (vx - n[0] * d), -g * (vy - n[1] * d), -g * (vz - n[2] * d)


@numba.njit(cache=True)
def rk4_bloch(a_t, a_v, th_t, th_v, gamma, t0, t1, v0, steps, record_every, out):
    """Integrate the Pauli vector ``v0`` from ``t0`` to ``t1`` in ``steps`` steps.

    Writes ``v`` at ``t0``, every ``record_every`` steps and at ``t1`` into
    ``out`` (shape ``(n_records, 3)``). Returns the number of rows written.
    """
    h = (t1 - t0) / steps
    hh = 0.5 * h
    w = h / 6.0
    vx = v0[0]
    vy = v0[1]
    vz = v0[2]
    out[0, 0] = vx
    out[0, 1] = vy
    out[0, 2] = vz
    rec = 1
    ja = 0
    jt = 0
    a, ja = _interp(a_t, a_v, t0, ja)
    th, jt = _interp(th_t, th_v, t0, jt)
    n_start = _axis(a, th)
    for k in range(steps):
        a, ja = _interp(a_t, a_v, t0 + (k + 0.5) * h, ja)
        th, jt = _interp(th_t, th_v, t0 + (k + 0.5) * h, jt)
        n_mid = _axis(a, th)
        a, ja = _interp(a_t, a_v, t0 + (k + 1) * h, ja)
        th, jt = _interp(th_t, th_v, t0 + (k + 1) * h, jt)
        n_end = _axis(a, th)
        k1 = _rhs(n_start, vx, vy, vz, gamma)
        k2 = _rhs(n_mid, vx + hh * k1[0], vy + hh * k1[1], vz + hh * k1[2], gamma)
        k3 = _rhs(n_mid, vx + hh * k2[0], vy + hh * k2[1], vz + hh * k2[2], gamma)
        k4 = _rhs(n_end, vx + h * k3[0], vy + h * k3[1], vz + h * k3[2], gamma)
        vx += w * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
        vy += w * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
        vz += w * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2])
        n_start = n_end
        if (k + 1) % record_every == 0 or k + 1 == steps:
            out[rec, 0] = vx
            out[rec, 1] = vy
            out[rec, 2] = vz
            rec += 1
    return rec


def n_records(steps: int, record_every: int) -> int:
    return steps // record_every + 1 + (1 if steps % record_every else 0)


def to_pauli(X: np.ndarray) -> tuple[float, np.ndarray]:
    """Hermitian 2x2 ``X`` -> ``(tr X, v)`` with ``X = (tr X + v . sigma) / 2``."""
    X = np.asarray(X, dtype=complex)
    v = np.array([2.0 * X[1, 0].real, 2.0 * X[1, 0].imag, (X[0, 0] - X[1, 1]).real])
    return float((X[0, 0] + X[1, 1]).real), v


def from_pauli(trace: float, v: np.ndarray) -> np.ndarray:
    """Inverse of :func:`to_pauli`; ``v`` may carry leading batch axes."""
    v = np.asarray(v, dtype=float)
    X = np.empty(v.shape[:-1] + (2, 2), dtype=complex)
    X[..., 0, 0] = 0.5 * (trace + v[..., 2])
    X[..., 1, 1] = 0.5 * (trace - v[..., 2])
    X[..., 1, 0] = 0.5 * (v[..., 0] + 1j * v[..., 1])
    X[..., 0, 1] = 0.5 * (v[..., 0] - 1j * v[..., 1])
    return X
