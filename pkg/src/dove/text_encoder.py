"""Token embedding lookup and bidirectional GRU encoding.

The embedding table is ingested data (not a learned parameter); each
caption is processed individually so sequence length never leaks into
the math.  Both GRU directions share the structure

    z_t = sigmoid(e_t W_z + h_{t-1} U_z + b_z)
    r_t = sigmoid(e_t W_r + h_{t-1} U_r + b_r)
    c_t = tanh(e_t W_h + (r_t * h_{t-1}) U_h + b_h)
    h_t = (1 - z_t) * h_{t-1} + z_t * c_t

with h_0 = 0.  The backward direction scans the caption end-to-start and
stores its state at the position it just consumed.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autograd as ag
from .autograd import Tensor
from .dataio import EMBED_DIM
from .params import ParamRegistry

GATE_NAMES = ("z", "r", "h")


class TokenError(ValueError):
    """Token ids are empty or outside the embedding table."""


@dataclass
class HiddenStates:
    forward: Tensor   # (n_tokens, d)
    backward: Tensor  # (n_tokens, d)


def register_gru_params(reg: ParamRegistry, d: int, prefix: str = "text.gru"):
    for direction in ("fwd", "bwd"):
        for gate in GATE_NAMES:
            reg.matrix(f"{prefix}.{direction}.w_{gate}", EMBED_DIM, d)
            reg.matrix(f"{prefix}.{direction}.u_{gate}", d, d)
            reg.bias(f"{prefix}.{direction}.b_{gate}", d)


def embed_tokens(token_ids: list[int], table: np.ndarray) -> Tensor:
    """Look up rows of the embedding table as a constant (n_tokens, 300)."""
    if len(token_ids) == 0:
        raise TokenError("caption has no tokens")
    n_rows = table.shape[0]
    for t in token_ids:
        if not 0 <= t < n_rows:
            raise TokenError(f"token id {t} outside table of {n_rows} rows")
    return ag.constant(table[list(token_ids)])


def _scan(e: Tensor, reg: ParamRegistry, prefix: str, reverse: bool) -> Tensor:
    n, d = e.data.shape[0], reg[f"{prefix}.b_z"].data.shape[0]
    # project the whole caption through the input-side maps in one shot
    xz = ag.affine(e, reg[f"{prefix}.w_z"], reg[f"{prefix}.b_z"])
    xr = ag.affine(e, reg[f"{prefix}.w_r"], reg[f"{prefix}.b_r"])
    xh = ag.affine(e, reg[f"{prefix}.w_h"], reg[f"{prefix}.b_h"])
    u_z, u_r, u_h = reg[f"{prefix}.u_z"], reg[f"{prefix}.u_r"], reg[f"{prefix}.u_h"]

    h = ag.constant(np.zeros((1, d)))
    rows: list[Tensor | None] = [None] * n
    steps = range(n - 1, -1, -1) if reverse else range(n)
    for t in steps:
        z = ag.sigmoid(ag.add(ag.row(xz, t), ag.matmul(h, u_z)))
        r = ag.sigmoid(ag.add(ag.row(xr, t), ag.matmul(h, u_r)))
        c = ag.tanh(ag.add(ag.row(xh, t), ag.matmul(ag.mul(r, h), u_h)))
        # h <- h + z * (c - h)
        h = ag.add(h, ag.mul(z, ag.sub(c, h)))
        rows[t] = h
    out = rows[0]
    for t in range(1, n):
        out = ag.concat_rows(out, rows[t])
    return out


def bigru(e: Tensor, reg: ParamRegistry, prefix: str = "text.gru") -> HiddenStates:
    """Hidden states of both directions, one row per token."""
    if e.data.ndim != 2 or e.data.shape[1] != EMBED_DIM:
        raise ag.DimensionError(
            f"bigru expects (n_tokens, {EMBED_DIM}), got {e.data.shape}")
    return HiddenStates(
        forward=_scan(e, reg, f"{prefix}.fwd", reverse=False),
        backward=_scan(e, reg, f"{prefix}.bwd", reverse=True),
    )
