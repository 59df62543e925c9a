"""Gated multi-head self-attention and the dual-branch text enhancer.

Per head (width d_h = d / heads) over an (n, d) input X:

    Q = X W_q + b_q,  K = X W_k + b_k,  V = X W_v + b_v
    G = sigmoid((Q * K) W_a + b_a)          -- multiplicative gate
    out = softmax_rows((G*Q) (G*K)^T / sqrt(d_h)) V

Head outputs are concatenated along the feature axis; there is no extra
output projection.  Each head owns its gate parameters.

The dual-branch enhancer runs two mirrored branches over an input pair
(A, B).  A branch self-attends A with a residual, turns B's
self-attention into a (0,1) probability mask through a two-layer map
with a terminal sigmoid, and multiplies the two.  Branch outputs are
summed and passed through a residual two-layer decoder.  Branches (and
the two attention instances inside a branch) have independent
parameters.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from . import autograd as ag
from .autograd import Tensor
from .params import ParamRegistry

BRANCHES = ("fwd", "bwd")


def register_ga_params(reg: ParamRegistry, prefix: str, d: int, heads: int):
    d_h = d // heads
    for k in range(heads):
        p = f"{prefix}.h{k}"
        for part in ("q", "k", "v"):
            reg.matrix(f"{p}.w_{part}", d, d_h)
            reg.bias(f"{p}.b_{part}", d_h)
        reg.matrix(f"{p}.w_a", d_h, d_h)
        reg.bias(f"{p}.b_a", d_h)


def gated_self_attention(x: Tensor, reg: ParamRegistry, prefix: str,
                         heads: int) -> Tensor:
    """(n, d) -> (n, d); see the module docstring for the head math."""
    d = x.data.shape[1]
    if d % heads != 0:
        raise ag.DimensionError(f"width {d} not divisible by {heads} heads")
    d_h = d // heads
    inv_sqrt = 1.0 / math.sqrt(d_h)
    out = None
    for k in range(heads):
        p = f"{prefix}.h{k}"
        q = ag.affine(x, reg[f"{p}.w_q"], reg[f"{p}.b_q"])
        key = ag.affine(x, reg[f"{p}.w_k"], reg[f"{p}.b_k"])
        v = ag.affine(x, reg[f"{p}.w_v"], reg[f"{p}.b_v"])
        gate = ag.sigmoid(ag.affine(ag.mul(q, key), reg[f"{p}.w_a"],
                                    reg[f"{p}.b_a"]))
        scores = ag.scale(ag.matmul(ag.mul(gate, q),
                                    ag.transpose(ag.mul(gate, key))), inv_sqrt)
        head_out = ag.matmul(ag.softmax_rows(scores), v)
        out = head_out if out is None else ag.concat_cols(out, head_out)
    return out


def _two_layer(x: Tensor, reg: ParamRegistry, prefix: str,
               terminal: str) -> Tensor:
    h = ag.relu(ag.affine(x, reg[f"{prefix}.w1"], reg[f"{prefix}.b1"]))
    y = ag.affine(h, reg[f"{prefix}.w2"], reg[f"{prefix}.b2"])
    if terminal == "sigmoid":
        return ag.sigmoid(y)
    return y


def register_dtga_params(reg: ParamRegistry, d: int, heads: int,
                         prefix: str = "dtga"):
    for branch in BRANCHES:
        register_ga_params(reg, f"{prefix}.{branch}.self_attn", d, heads)
        register_ga_params(reg, f"{prefix}.{branch}.probe_attn", d, heads)
        for name in ("w1", "w2"):
            reg.matrix(f"{prefix}.{branch}.prob.{name}", d, d)
        for name in ("b1", "b2"):
            reg.bias(f"{prefix}.{branch}.prob.{name}", d)
    for name in ("w1", "w2"):
        reg.matrix(f"{prefix}.decode.{name}", d, d)
    for name in ("b1", "b2"):
        reg.bias(f"{prefix}.decode.{name}", d)


@dataclass
class DtgaTrace:
    """Branch internals, exposed so tests can check every stage."""
    attended_a: Tensor   # self-attention of the first input
    enhanced_a: Tensor   # attended_a + A
    prob_b: Tensor       # probability mask derived from the second input
    attended_b: Tensor
    enhanced_b: Tensor
    prob_a: Tensor
    masked_ab: Tensor    # enhanced_a * prob_b
    masked_ba: Tensor
    combined: Tensor     # masked_ab + masked_ba
    output: Tensor       # decoder(combined) + combined


def dtga(a: Tensor, b: Tensor, reg: ParamRegistry, heads: int,
         prefix: str = "dtga") -> DtgaTrace:
    """Dual-branch enhancement of the input pair (a, b)."""
    att_a = gated_self_attention(a, reg, f"{prefix}.fwd.self_attn", heads)
    enh_a = ag.add(att_a, a)
    prob_b = _two_layer(gated_self_attention(b, reg, f"{prefix}.fwd.probe_attn",
                                             heads),
                        reg, f"{prefix}.fwd.prob", terminal="sigmoid")
    masked_ab = ag.mul(enh_a, prob_b)

    att_b = gated_self_attention(b, reg, f"{prefix}.bwd.self_attn", heads)
    enh_b = ag.add(att_b, b)
    prob_a = _two_layer(gated_self_attention(a, reg, f"{prefix}.bwd.probe_attn",
                                             heads),
                        reg, f"{prefix}.bwd.prob", terminal="sigmoid")
    masked_ba = ag.mul(enh_b, prob_a)

    combined = ag.add(masked_ab, masked_ba)
    output = ag.add(_two_layer(combined, reg, f"{prefix}.decode", terminal="none"),
                    combined)
    return DtgaTrace(att_a, enh_a, prob_b, att_b, enh_b, prob_a,
                     masked_ab, masked_ba, combined, output)


def select_inputs(h_forward: Tensor, h_backward: Tensor,
                  mode: str) -> tuple[Tensor, Tensor]:
    """Which recurrent streams feed the two branches."""
    if mode == "ff":
        return h_forward, h_forward
    if mode == "bb":
        return h_backward, h_backward
    if mode == "fb":
        return h_forward, h_backward
    if mode == "avg":
        avg = ag.scale(ag.add(h_forward, h_backward), 0.5)
        return avg, avg
    raise ValueError(f"unknown input mode {mode!r}")


def word_features(h_forward: Tensor, h_backward: Tensor, reg: ParamRegistry,
                  heads: int, mode: str = "fb", disabled: bool = False,
                  prefix: str = "dtga") -> Tensor:
    """Word-level text features; the disabled path averages the streams."""
    if disabled:
        return ag.scale(ag.add(h_forward, h_backward), 0.5)
    a, b = select_inputs(h_forward, h_backward, mode)
    return dtga(a, b, reg, heads, prefix).output
