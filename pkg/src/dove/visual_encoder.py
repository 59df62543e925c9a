"""Projections of ingested visual features into the shared width d.

Multiscale rows pass through a residual two-layer map (with an affine
adapter first when the bank width differs from d); region rows get a
single affine projection from their native width.
"""
from __future__ import annotations

from . import autograd as ag
from .autograd import Tensor
from .params import ParamRegistry


def register_visual_params(reg: ParamRegistry, d: int, d_in: int, d_r: int):
    if d_in != d:
        reg.matrix("visual.msv.adapter.w", d_in, d)
        reg.bias("visual.msv.adapter.b", d)
    reg.matrix("visual.msv.mlp.w1", d, d)
    reg.bias("visual.msv.mlp.b1", d)
    reg.matrix("visual.msv.mlp.w2", d, d)
    reg.bias("visual.msv.mlp.b2", d)
    reg.matrix("visual.roi.w", d_r, d)
    reg.bias("visual.roi.b", d)


def msv_project(m_v: Tensor, reg: ParamRegistry) -> Tensor:
    """(n_m, d_in) -> (n_m, d): residual MLP over (adapted) multiscale rows."""
    x = m_v
    if "visual.msv.adapter.w" in reg:
        x = ag.affine(x, reg["visual.msv.adapter.w"], reg["visual.msv.adapter.b"])
    h = ag.relu(ag.affine(x, reg["visual.msv.mlp.w1"], reg["visual.msv.mlp.b1"]))
    return ag.add(ag.affine(h, reg["visual.msv.mlp.w2"], reg["visual.msv.mlp.b2"]),
                  x)


def roi_project(r_v: Tensor, reg: ParamRegistry) -> Tensor:
    """(n_r, d_r) -> (n_r, d): affine lift of region rows."""
    return ag.affine(r_v, reg["visual.roi.w"], reg["visual.roi.b"])
