"""Symmetric positive-definite linear algebra with gradients.

Both ops read only the symmetric part ``(m + m^T) / 2`` of their input, so a
finite-difference perturbation of a single off-diagonal entry and the analytic
gradient agree.
"""

from __future__ import annotations

import numpy as np

from ..errors import ContractViolation, SingularityError
from .core import Tensor, as_tensor, make_node


def _sym(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + np.swapaxes(m, -1, -2))


def cholesky(m: np.ndarray) -> np.ndarray:
    """Lower-triangular factor of a batch of SPD matrices (column-by-column).

    Raises SingularityError with the first pivot that is not strictly positive.
    """
    if m.ndim < 2 or m.shape[-1] != m.shape[-2]:
        raise ContractViolation(f"cholesky: expected square matrices, got shape {m.shape}")
    n = m.shape[-1]
    factor = np.zeros_like(m, dtype=np.float64)
    for j in range(n):
        row = factor[..., j, :j]
        pivot = m[..., j, j] - np.einsum("...k,...k->...", row, row)
        if not np.all(np.isfinite(pivot)) or np.any(pivot <= 0.0):
            raise SingularityError(j)
        d = np.sqrt(pivot)
        factor[..., j, j] = d
        if j + 1 < n:
            below = m[..., j + 1:, j] - np.einsum("...ik,...k->...i", factor[..., j + 1:, :j], row)
            factor[..., j + 1:, j] = below / d[..., None]
    return factor


def _spd_inverse_from_factor(factor: np.ndarray) -> np.ndarray:
    inv_l = np.linalg.inv(factor)
    return _sym(np.swapaxes(inv_l, -1, -2) @ inv_l)


def cholesky_logdet(m: Tensor) -> Tensor:
    """``log det(m)`` for SPD ``m`` of shape [..., R, R]; returns shape [...]."""
    m = as_tensor(m)
    a = _sym(m.data)
    factor = cholesky(a)
    diag = np.diagonal(factor, axis1=-2, axis2=-1)
    out = 2.0 * np.log(diag).sum(axis=-1)

    def backward(g):
        inv = _spd_inverse_from_factor(factor)
        return (np.asarray(g)[..., None, None] * inv,)

    return make_node(np.asarray(out), (m,), backward, "cholesky_logdet")


def spd_inverse(m: Tensor) -> Tensor:
    """Inverse of SPD matrices [..., R, R] via the Cholesky factor."""
    m = as_tensor(m)
    inv = _spd_inverse_from_factor(cholesky(_sym(m.data)))

    def backward(g):
        return (_sym(-(inv @ g @ inv)),)

    return make_node(inv, (m,), backward, "spd_inverse")
