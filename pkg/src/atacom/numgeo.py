"""Small dense linear-algebra kernels: pseudoinverse, kernel bases and the
smoothly varying tangent frame.

Everything here is a pure function of its inputs. Rank decisions go through a
single :class:`RankPolicy` so that the pseudoinverse and the kernel basis agree
on which singular values count as zero.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np


class InvalidMatrixError(ValueError):
    """Raised when a matrix contains NaN/inf or has an unusable shape."""


class EmptyKernelError(ValueError):
    """Raised when the kernel is trivial, i.e. there is no direction to act in."""


class FrameMismatchError(ValueError):
    """Raised when the reference frame width differs from the kernel dimension."""


@dataclass(frozen=True)
class RankPolicy:
    """Singular values below ``relative_tolerance * sigma_max`` are treated as zero."""

    relative_tolerance: float = 1e-10

    def __post_init__(self):
        if not 0.0 < self.relative_tolerance < 1.0:
            raise ValueError(
                f"relative_tolerance must lie in (0, 1), got {self.relative_tolerance}"
            )


DEFAULT_POLICY = RankPolicy()


class Decomposition(NamedTuple):
    pinv: np.ndarray
    kernel: np.ndarray
    rank: int
    singular_values: np.ndarray


def as_matrix(M) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim == 1:
        M = M[None, :]
    if M.ndim != 2 or M.shape[0] < 1 or M.shape[1] < 1:
        raise InvalidMatrixError(f"expected a non-empty 2-D matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise InvalidMatrixError("matrix has non-finite entries")
    return M


def decompose(M, policy: RankPolicy = DEFAULT_POLICY) -> Decomposition:
    """One full SVD shared by the pseudoinverse and the kernel basis.

    The kernel is returned as an ``N x (N - r)`` matrix with orthonormal
    columns; it may have zero columns.
    """
    M = as_matrix(M)
    U, s, Vt = np.linalg.svd(M, full_matrices=True)
    if s.size == 0 or s[0] == 0.0:
        rank = 0
    else:
        rank = int(np.count_nonzero(s > policy.relative_tolerance * s[0]))
    inv_s = 1.0 / s[:rank]
    pinv = (Vt[:rank].T * inv_s) @ U[:, :rank].T
    kernel = Vt[rank:].T.copy()
    return Decomposition(pinv, kernel, rank, s)


def pseudoinverse(M, policy: RankPolicy = DEFAULT_POLICY) -> np.ndarray:
    """Moore-Penrose pseudoinverse with the rank decided by ``policy``."""
    return decompose(M, policy).pinv


def nullspace_basis(J, policy: RankPolicy = DEFAULT_POLICY) -> np.ndarray:
    """Orthonormal basis of ``ker J`` as the columns of an ``N x (N - r)`` matrix.

    Raises :class:`EmptyKernelError` if ``J`` has full column rank.
    """
    kernel = decompose(J, policy).kernel
    if kernel.shape[1] == 0:
        raise EmptyKernelError("kernel is trivial; no admissible direction exists")
    return kernel


def procrustes_align(B, T) -> np.ndarray:
    """Rotate the orthonormal basis ``B`` to be as close as possible to ``T``.

    Solves ``min_Q ||(B Q)^T T - I||_F`` over orthogonal ``Q`` and returns
    ``B Q``. The result depends only on the column space of ``B``, not on the
    particular basis handed in.
    """
    B = np.asarray(B, dtype=float)
    T = np.asarray(T, dtype=float)
    if B.shape != T.shape:
        raise FrameMismatchError(
            f"basis has shape {B.shape} but reference frame has shape {T.shape}"
        )
    A, _, Wt = np.linalg.svd(B.T @ T)
    return B @ (A @ Wt)


def smooth_basis(J, T, policy: RankPolicy = DEFAULT_POLICY) -> np.ndarray:
    """Kernel basis of ``J`` that varies continuously with ``J``.

    ``T`` is a fixed ``N x U`` matrix with orthonormal columns; the kernel of
    ``J`` must be ``U``-dimensional.
    """
    T = np.asarray(T, dtype=float)
    B = nullspace_basis(J, policy)
    if B.shape[1] != T.shape[1]:
        raise FrameMismatchError(
            f"kernel dimension is {B.shape[1]} but reference frame has {T.shape[1]} columns"
        )
    return procrustes_align(B, T)


def identity_frame(n_rows: int, n_cols: int) -> np.ndarray:
    """Reference frame with ones on the leading diagonal, zeros elsewhere."""
    return np.eye(n_rows, n_cols)
