"""Cosine similarity and the dual triplet-ranking objective.

The ranking loss sums hinge violations over every in-batch negative in
both retrieval directions:

    L(S) = sum_i sum_{j != i} [alpha - S_ii + S_ij]_+ + [alpha - S_ii + S_ji]_+

and the full objective combines the fused-branch and global-branch
score matrices as L(S_final) + lambda_g * L(S_global).
"""
from __future__ import annotations

import numpy as np

from . import autograd as ag
from .autograd import Tensor


def cosine(v: Tensor, t: Tensor) -> Tensor:
    """Cosine of two rank-1 vectors as a shape-(1,) tensor.

    Raises DegenerateVectorError when either vector has near-zero norm.
    """
    if v.data.ndim != 1 or t.data.ndim != 1 or v.data.shape != t.data.shape:
        raise ag.DimensionError(
            f"cosine expects equal-length rank-1 tensors, got "
            f"{v.data.shape} and {t.data.shape}")
    n = v.data.shape[0]
    vn = ag.normalize_rows(ag.reshape(v, (1, n)))
    tn = ag.normalize_rows(ag.reshape(t, (1, n)))
    return ag.reshape(ag.matmul(vn, ag.transpose(tn)), (1,))


def cosine_matrix(a: Tensor, b: Tensor) -> Tensor:
    """Pairwise cosines between rows of a (m, d) and rows of b (n, d)."""
    return ag.matmul(ag.normalize_rows(a), ag.transpose(ag.normalize_rows(b)))


def triplet_loss(s: Tensor, alpha: float) -> Tensor:
    """Bidirectional hinge loss over a (B, B) score matrix.

    Row i scores image i against every text; the diagonal holds the
    positives.  Both directions sum over all B-1 negatives.
    """
    if s.data.ndim != 2 or s.data.shape[0] != s.data.shape[1]:
        raise ag.DimensionError(f"triplet_loss expects a square matrix, "
                                f"got {s.data.shape}")
    b = s.data.shape[0]
    if b < 2:
        raise ag.DimensionError("triplet_loss needs at least 2 pairs")
    diag = ag.take_diag(s)
    off = ag.constant(1.0 - np.eye(b))
    neg_diag = ag.scale(diag, -1.0)
    # (S_ij - S_ii) + alpha: margins first, then the offset, so that
    # score grids written with short decimals hinge to exact short
    # decimals as well
    by_image = ag.add_scalar(
        ag.transpose(ag.add_bias(ag.transpose(s), neg_diag)), alpha)
    # (S_ij - S_jj) + alpha: same, down each column's positive
    by_text = ag.add_scalar(ag.add_bias(s, neg_diag), alpha)
    hinge = ag.add(ag.relu(ag.mul(by_image, off)), ag.relu(ag.mul(by_text, off)))
    return ag.reduce_sum(hinge)


def total_loss(s_final: Tensor, s_global: Tensor, alpha: float,
               lambda_g: float) -> tuple[Tensor, Tensor, Tensor]:
    """(total, final-branch, global-branch) loss tensors."""
    loss_final = triplet_loss(s_final, alpha)
    loss_global = triplet_loss(s_global, alpha)
    total = ag.add(loss_final, ag.scale(loss_global, lambda_g))
    return total, loss_final, loss_global
