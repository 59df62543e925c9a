"""Region-oriented attention: visual fusion and visual-guided text.

Fusion (over one image) relates multiscale rows F_M (n_m, d) to region
rows F_R (n_r, d):

    F_M' = F_M W_m + b_m          F_R' = F_R W_r + b_r
    S    = sigmoid(F_M' F_R'^T)                       -- (n_m, n_r)
    rows = [S F_R' + F_M' ; S^T F_M' + F_R']          -- (n_m + n_r, d)
    F_MR = head(rows)

Guidance (per image-text pair) gates a pooled text vector by its scalar
affinity with the pooled region vector:

    f_r = e_r W_r + b_r           f_g = e_g W_g + b_g
    gate = sigmoid(<f_r, f_g>)
    u = gate * f_g + f_g
    T_RG = head(u)                (nonlinear head keeps a residual +u)

Heads: "linear" is a single affine map; "nonlinear" is a two-layer map
with interior rectifier plus a residual connection.  Both cross products
inside fusion contract over an unordered row set and therefore sum in
canonical order (see autograd.attend_rows), which makes region- and
scale-permutation invariance exact at the bit level.
"""
from __future__ import annotations

from . import autograd as ag
from .autograd import Tensor
from .params import ParamRegistry


def register_ifa_params(reg: ParamRegistry, d: int, head: str):
    reg.matrix("ifa.w_m", d, d)
    reg.bias("ifa.b_m", d)
    reg.matrix("ifa.w_r", d, d)
    reg.bias("ifa.b_r", d)
    if head == "linear":
        reg.matrix("ifa.head.w", d, d)
        reg.bias("ifa.head.b", d)
    else:
        reg.matrix("ifa.head.w1", d, d)
        reg.bias("ifa.head.b1", d)
        reg.matrix("ifa.head.w2", d, d)
        reg.bias("ifa.head.b2", d)


def register_iga_params(reg: ParamRegistry, d: int, head: str):
    reg.matrix("iga.w_r", d, d)
    reg.bias("iga.b_r", d)
    reg.matrix("iga.w_g", d, d)
    reg.bias("iga.b_g", d)
    if head == "linear":
        reg.matrix("iga.head.w", d, d)
        reg.bias("iga.head.b", d)
    else:
        reg.matrix("iga.head.w1", d, d)
        reg.bias("iga.head.b1", d)
        reg.matrix("iga.head.w2", d, d)
        reg.bias("iga.head.b2", d)


def _head(x: Tensor, reg: ParamRegistry, prefix: str, head: str) -> Tensor:
    if head == "linear":
        return ag.affine(x, reg[f"{prefix}.w"], reg[f"{prefix}.b"])
    h = ag.relu(ag.affine(x, reg[f"{prefix}.w1"], reg[f"{prefix}.b1"]))
    return ag.add(ag.affine(h, reg[f"{prefix}.w2"], reg[f"{prefix}.b2"]), x)


def ifa_fuse(f_m: Tensor, f_r: Tensor, reg: ParamRegistry,
             head: str = "linear") -> Tensor:
    """Fused visual rows, shape (n_m + n_r, d)."""
    fm = ag.affine(f_m, reg["ifa.w_m"], reg["ifa.b_m"])
    fr = ag.affine(f_r, reg["ifa.w_r"], reg["ifa.b_r"])
    rel = ag.sigmoid(ag.matmul(fm, ag.transpose(fr)))
    region_to_scale = ag.add(ag.attend_rows(rel, fr), fm)
    scale_to_region = ag.add(ag.attend_rows(ag.transpose(rel), fm), fr)
    rows = ag.concat_rows(region_to_scale, scale_to_region)
    return _head(rows, reg, "ifa.head", head)


def fuse_visual(f_m: Tensor, f_r: Tensor, reg: ParamRegistry,
                head: str = "linear", disabled: bool = False) -> Tensor:
    """Fused rows, or the plain row concatenation when fusion is off."""
    if disabled:
        return ag.concat_rows(f_m, f_r)
    return ifa_fuse(f_m, f_r, reg, head)


def iga_transform_regions(e_r: Tensor, reg: ParamRegistry) -> Tensor:
    """(m, d) pooled region vectors -> their guidance projections."""
    return ag.affine(e_r, reg["iga.w_r"], reg["iga.b_r"])


def iga_transform_text(e_g: Tensor, reg: ParamRegistry) -> Tensor:
    return ag.affine(e_g, reg["iga.w_g"], reg["iga.b_g"])


def iga_guide(e_r: Tensor, e_g: Tensor, reg: ParamRegistry,
              head: str = "nonlinear") -> Tensor:
    """Guided text embedding for one (image, text) pair; rank-1 (d,)."""
    if e_r.data.ndim != 1 or e_g.data.ndim != 1:
        raise ag.DimensionError("iga_guide expects rank-1 pooled vectors")
    f_r = iga_transform_regions(ag.reshape(e_r, (1, e_r.data.shape[0])), reg)
    f_g = iga_transform_text(ag.reshape(e_g, (1, e_g.data.shape[0])), reg)
    gate = ag.sigmoid(ag.reduce_sum(ag.mul(f_r, f_g)))
    u = ag.scale_rows(f_g, ag.add_scalar(gate, 1.0))
    guided = _head(u, reg, "iga.head", head)
    return ag.reshape(guided, (guided.data.shape[1],))


def iga_guide_rows(f_r_row: Tensor, f_g_rows: Tensor, reg: ParamRegistry,
                   head: str = "nonlinear") -> Tensor:
    """Guided text embeddings of one image against many texts at once.

    ``f_r_row`` is the image's (1, d) guidance projection, ``f_g_rows``
    the (n, d) text projections.  Row j equals iga_guide for pair
    (image, text_j); the batched form just evaluates the same map for
    every row in one set of matrix ops.
    """
    gates = ag.sigmoid(ag.matmul(f_g_rows, ag.transpose(f_r_row)))
    u = ag.scale_rows(f_g_rows,
                      ag.add_scalar(ag.reshape(gates, (gates.data.shape[0],)), 1.0))
    return _head(u, reg, "iga.head", head)


def pool(rows: Tensor) -> Tensor:
    """Column-wise mean: collapses a row set into one embedding vector."""
    return ag.mean_rows(rows)
