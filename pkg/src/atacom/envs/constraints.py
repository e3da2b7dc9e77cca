"""Constraint builders used by the shipped environments.

All distances are in metres; every builder returns a :class:`ConstraintSpec`
with analytic Jacobians (and ``jac_dot`` where the constraint is used with
second-order dynamics).
"""
from __future__ import annotations

import numpy as np

from ..manifold import ConstraintSpec

_EPS = 1e-12


def _unit(delta):
    d = np.linalg.norm(delta)
    return delta / max(d, _EPS), max(d, _EPS)


def disk_avoidance(center, radius: float, name: str = "disk") -> ConstraintSpec:
    """``radius - ||p - center|| <= 0``."""
    center = np.asarray(center, dtype=float)

    def fn(p):
        return np.array([radius - np.linalg.norm(p - center)])

    def jac(p):
        n, _ = _unit(p - center)
        return -n[None, :]

    def jac_dot(p, v):
        n, d = _unit(p - center)
        # d/dt of -n^T is -((I - n n^T) v / d)^T
        return -((v - n * (n @ v)) / d)[None, :]

    return ConstraintSpec(fn, jac, 1, jac_dot=jac_dot, name=name)


def box_bounds(lo, hi, name: str = "box") -> ConstraintSpec:
    """``lo - p <= 0`` and ``p - hi <= 0`` for every axis, lower rows first."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    n = lo.size
    J = np.vstack([-np.eye(n), np.eye(n)])
    zeros = np.zeros((2 * n, n))

    def fn(p):
        return np.concatenate([lo - p, p - hi])

    return ConstraintSpec(fn, lambda p: J, 2 * n, jac_dot=lambda p, v: zeros, name=name)


def moving_disks(n_obstacles: int, radius: float, name: str = "obstacles") -> ConstraintSpec:
    """``radius - ||q - z_i|| <= 0`` with obstacle positions stacked in ``z``."""

    def _deltas(q, z):
        diff = q[None, :] - np.asarray(z, dtype=float).reshape(n_obstacles, -1)
        dist = np.maximum(np.linalg.norm(diff, axis=1), _EPS)
        return diff / dist[:, None], dist

    def fn(q, z):
        _, dist = _deltas(q, z)
        return radius - dist

    def jac(q, z):
        normals, _ = _deltas(q, z)
        return -normals

    def jac_z(q, z):
        normals, _ = _deltas(q, z)
        dim = normals.shape[1]
        out = np.zeros((n_obstacles, n_obstacles * dim))
        for i in range(n_obstacles):
            out[i, i * dim:(i + 1) * dim] = normals[i]
        return out

    return ConstraintSpec(fn, jac, n_obstacles, jac_z=jac_z, name=name)


def circle_equality(radius: float = 1.0, name: str = "circle") -> ConstraintSpec:
    """``||s||^2 - radius^2 = 0``."""

    def fn(s):
        return np.array([s @ s - radius ** 2])

    def jac(s):
        return 2.0 * np.asarray(s, dtype=float)[None, :]

    return ConstraintSpec(fn, jac, 1, kind="equality", name=name)


def inverted_circle(radius: float = 1.0) -> ConstraintSpec:
    """``-(s1^2 + s2^2) + radius^2 <= 0``: stay outside the circle."""

    def fn(s):
        return np.array([radius ** 2 - s @ s])

    def jac(s):
        return -2.0 * np.asarray(s, dtype=float)[None, :]

    return ConstraintSpec(fn, jac, 1, name="inverted_circle")


def cosine_band() -> ConstraintSpec:
    """``cos(4 s1) + s2^2 - 0.8 <= 0``, whose safe set is disconnected."""

    def fn(s):
        return np.array([np.cos(4.0 * s[0]) + s[1] ** 2 - 0.8])

    def jac(s):
        return np.array([[-4.0 * np.sin(4.0 * s[0]), 2.0 * s[1]]])

    return ConstraintSpec(fn, jac, 1, name="cosine_band")
