"""Independent reference implementations used by the test suite.

Everything in this module is transcribed directly from the layer
definitions using plain numpy expressions and explicit Python loops --
no autograd tensors, no shared helpers with the package code, and no
canonical-order summation tricks.  Agreement between a package module
and its counterpart here is therefore meaningful evidence that both
encode the same math.

Oracles take raw numpy arrays plus a ``vals`` mapping of parameter name
to value array (as produced by ``{n: t.data for n, t in reg.tensors()}``).
"""
from __future__ import annotations

import numpy as np


def sig(x):
    return 1.0 / (1.0 + np.exp(-np.asarray(x, dtype=np.float64)))


def softmax_rows(x):
    x = np.asarray(x, dtype=np.float64)
    shifted = x - x.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def two_layer(x, vals, prefix, terminal):
    h = np.maximum(x @ vals[f"{prefix}.w1"] + vals[f"{prefix}.b1"], 0.0)
    y = h @ vals[f"{prefix}.w2"] + vals[f"{prefix}.b2"]
    return sig(y) if terminal == "sigmoid" else y


# ----------------------------------------------------------------- recurrent

def gru_direction(e, vals, prefix, reverse):
    """Standard-gate GRU scan; one hidden row per input row."""
    n = e.shape[0]
    d = vals[f"{prefix}.b_z"].shape[0]
    h = np.zeros(d)
    out = np.zeros((n, d))
    order = range(n - 1, -1, -1) if reverse else range(n)
    for t in order:
        z = sig(e[t] @ vals[f"{prefix}.w_z"] + h @ vals[f"{prefix}.u_z"]
                + vals[f"{prefix}.b_z"])
        r = sig(e[t] @ vals[f"{prefix}.w_r"] + h @ vals[f"{prefix}.u_r"]
                + vals[f"{prefix}.b_r"])
        c = np.tanh(e[t] @ vals[f"{prefix}.w_h"] + (r * h) @ vals[f"{prefix}.u_h"]
                    + vals[f"{prefix}.b_h"])
        h = (1.0 - z) * h + z * c
        out[t] = h
    return out


def bigru(e, vals, prefix="text.gru"):
    return (gru_direction(e, vals, f"{prefix}.fwd", reverse=False),
            gru_direction(e, vals, f"{prefix}.bwd", reverse=True))


# ----------------------------------------------------------------- attention

def gated_attention(x, vals, prefix, heads):
    d = x.shape[1]
    d_h = d // heads
    outs = []
    for k in range(heads):
        p = f"{prefix}.h{k}"
        q = x @ vals[f"{p}.w_q"] + vals[f"{p}.b_q"]
        key = x @ vals[f"{p}.w_k"] + vals[f"{p}.b_k"]
        v = x @ vals[f"{p}.w_v"] + vals[f"{p}.b_v"]
        gate = sig((q * key) @ vals[f"{p}.w_a"] + vals[f"{p}.b_a"])
        scores = (gate * q) @ (gate * key).T / np.sqrt(d_h)
        outs.append(softmax_rows(scores) @ v)
    return np.concatenate(outs, axis=1)


def dtga(a, b, vals, heads, prefix="dtga"):
    """Dual-branch enhancement; returns the final output rows."""
    enh_a = gated_attention(a, vals, f"{prefix}.fwd.self_attn", heads) + a
    prob_b = two_layer(gated_attention(b, vals, f"{prefix}.fwd.probe_attn", heads),
                       vals, f"{prefix}.fwd.prob", terminal="sigmoid")
    enh_b = gated_attention(b, vals, f"{prefix}.bwd.self_attn", heads) + b
    prob_a = two_layer(gated_attention(a, vals, f"{prefix}.bwd.probe_attn", heads),
                       vals, f"{prefix}.bwd.prob", terminal="sigmoid")
    combined = enh_a * prob_b + enh_b * prob_a
    return two_layer(combined, vals, f"{prefix}.decode", terminal="none") + combined


# -------------------------------------------------------------------- fusion

def head_map(x, vals, prefix, head):
    if head == "linear":
        return x @ vals[f"{prefix}.w"] + vals[f"{prefix}.b"]
    h = np.maximum(x @ vals[f"{prefix}.w1"] + vals[f"{prefix}.b1"], 0.0)
    return h @ vals[f"{prefix}.w2"] + vals[f"{prefix}.b2"] + x


def ifa(f_m, f_r, vals, head="linear"):
    fm = f_m @ vals["ifa.w_m"] + vals["ifa.b_m"]
    fr = f_r @ vals["ifa.w_r"] + vals["ifa.b_r"]
    rel = sig(fm @ fr.T)
    rows = np.concatenate([rel @ fr + fm, rel.T @ fm + fr], axis=0)
    return head_map(rows, vals, "ifa.head", head)


def iga(e_r, e_g, vals, head="nonlinear"):
    """Guided text embedding for one pooled (region, text) vector pair."""
    f_r = e_r @ vals["iga.w_r"] + vals["iga.b_r"]
    f_g = e_g @ vals["iga.w_g"] + vals["iga.b_g"]
    gate = sig(float(f_r @ f_g))
    u = (1.0 + gate) * f_g
    return head_map(u[None, :], vals, "iga.head", head)[0]


# ----------------------------------------------------------------- optimizer

def adam_run(param0, grads, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    """Replay Adam over a gradient sequence; returns the final value."""
    theta = np.asarray(param0, dtype=np.float64).copy()
    m = np.zeros_like(theta)
    v = np.zeros_like(theta)
    for t, g in enumerate(grads, start=1):
        g = np.asarray(g, dtype=np.float64)
        m = beta1 * m + (1.0 - beta1) * g
        v = beta2 * v + (1.0 - beta2) * g * g
        m_hat = m / (1.0 - beta1 ** t)
        v_hat = v / (1.0 - beta2 ** t)
        theta = theta - lr * m_hat / (np.sqrt(v_hat) + eps)
    return theta


# ----------------------------------------------------------------- objective

def triplet(s, alpha):
    """Bidirectional sum-over-negatives hinge, written as explicit loops."""
    s = np.asarray(s, dtype=np.float64)
    b = s.shape[0]
    total = 0.0
    for i in range(b):
        for j in range(b):
            if i == j:
                continue
            total += max(0.0, alpha - s[i, i] + s[i, j])   # text j vs image i
            total += max(0.0, alpha - s[j, j] + s[i, j])   # image i vs text j
    return total


# ------------------------------------------------------------------- ranking

def rank_candidates(scores):
    """Candidate order: descending score, ascending index on ties."""
    return sorted(range(len(scores)), key=lambda j: (-scores[j], j))


def recall_i2t(scores, text_to_image, k):
    """Percentage of images with a matching caption in their top k."""
    n_images, n_texts = scores.shape
    hits = 0
    for i in range(n_images):
        top = rank_candidates(list(scores[i]))[:min(k, n_texts)]
        if any(text_to_image[j] == i for j in top):
            hits += 1
    return 100.0 * hits / n_images


def recall_t2i(scores, text_to_image, k):
    n_images, n_texts = scores.shape
    hits = 0
    for j in range(n_texts):
        top = rank_candidates(list(scores[:, j]))[:min(k, n_images)]
        if text_to_image[j] in top:
            hits += 1
    return 100.0 * hits / n_texts
