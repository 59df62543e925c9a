"""Dense float64 tensors with reverse-mode automatic differentiation.

Tensors hold rank 1..3 arrays.  Ops record a closure graph; ``backward()``
on a size-1 tensor accumulates gradients into every reachable tensor that
has ``requires_grad``.  ``grad_check`` is the verification oracle: every
analytic rule is compared against central finite differences.

Two reductions sum their terms in canonically sorted order (``mean_rows``
and ``attend_rows``).  Sorting makes the floating-point sum a function of
the *multiset* of terms, so permuting rows of the operands cannot change
a single output bit -- the engine's permutation-invariance guarantees
rest on this.
"""
from __future__ import annotations

import contextlib

import numpy as np

__all__ = [
    "Tensor", "DimensionError", "DegenerateVectorError", "no_grad",
    "constant", "matmul", "transpose", "reshape", "row", "add", "sub",
    "mul", "scale", "add_scalar", "add_bias", "scale_rows", "affine",
    "sigmoid", "tanh", "relu", "softmax_rows", "mean_rows", "reduce_sum",
    "concat_rows", "concat_cols", "normalize_rows", "take_diag",
    "attend_rows", "grad_check",
]


class DimensionError(ValueError):
    """Operand shapes are incompatible with the requested operation."""


class DegenerateVectorError(ValueError):
    """A vector that must have nonzero length is numerically zero."""


_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Disable graph construction inside the block (evaluation fast path)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    """Rank 1..3 float64 array with an optional gradient slot."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_bw")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(1)
        if not 1 <= arr.ndim <= 3:
            raise DimensionError(f"rank {arr.ndim} outside supported range 1..3")
        if not np.all(np.isfinite(arr)):
            raise ValueError("tensor constructed from non-finite data")
        self.data = arr
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = ()
        self._bw = None

    @property
    def shape(self):
        return self.data.shape

    def item(self) -> float:
        if self.data.size != 1:
            raise DimensionError("item() requires a size-1 tensor")
        return float(self.data.reshape(-1)[0])

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def backward(self):
        """Accumulate d(self)/d(leaf) into .grad for every reachable leaf."""
        if self.data.size != 1:
            raise DimensionError("backward() requires a size-1 tensor")
        order = []
        visited = set()
        stack = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in visited:
                    stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._bw is not None:
                node._bw(node.grad)


def constant(data) -> Tensor:
    """Tensor wrapping external data; never tracked by the graph."""
    return Tensor(data, requires_grad=False)


def _result(data: np.ndarray, parents: tuple) -> Tensor:
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    out._bw = None
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
    else:
        out.requires_grad = False
        out._parents = ()
    return out


def _acc(t: Tensor, g: np.ndarray):
    if t.grad is None:
        t.grad = np.array(g)  # copy: g may be shared with another operand
    else:
        t.grad += g


def _canonical_sum(terms: np.ndarray, axis: int) -> np.ndarray:
    # Sorting first makes the sum depend only on the multiset of addends,
    # so row permutations of the inputs reproduce identical bits.
    return np.sort(terms, axis=axis).sum(axis=axis)


# ---------------------------------------------------------------- structure

def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise DimensionError("matmul expects rank-2 operands")
    if a.data.shape[1] != b.data.shape[0]:
        raise DimensionError(
            f"matmul inner extents differ: {a.data.shape} x {b.data.shape}")
    out = _result(a.data @ b.data, (a, b))
    if out.requires_grad:
        def bw(g):
            if a.requires_grad:
                _acc(a, g @ b.data.T)
            if b.requires_grad:
                _acc(b, a.data.T @ g)
        out._bw = bw
    return out


def attend_rows(s: Tensor, f: Tensor) -> Tensor:
    """matmul(s, f) with each contraction summed in canonical order.

    Used where the contracted axis enumerates an unordered row set
    (attention over regions/scales), so permuting that set leaves the
    output bit-identical.
    """
    if s.data.ndim != 2 or f.data.ndim != 2 or s.data.shape[1] != f.data.shape[0]:
        raise DimensionError(
            f"attend_rows expects (m,k) x (k,n); got {s.data.shape} x {f.data.shape}")
    terms = s.data[:, :, None] * f.data[None, :, :]
    out = _result(_canonical_sum(terms, axis=1), (s, f))
    if out.requires_grad:
        def bw(g):
            if s.requires_grad:
                _acc(s, g @ f.data.T)
            if f.requires_grad:
                _acc(f, s.data.T @ g)
        out._bw = bw
    return out


def transpose(a: Tensor) -> Tensor:
    if a.data.ndim != 2:
        raise DimensionError("transpose expects a rank-2 tensor")
    out = _result(a.data.T.copy(), (a,))
    if out.requires_grad:
        def bw(g):
            _acc(a, g.T)
        out._bw = bw
    return out


def reshape(a: Tensor, shape: tuple) -> Tensor:
    if int(np.prod(shape)) != a.data.size:
        raise DimensionError(f"cannot reshape {a.data.shape} to {shape}")
    out = _result(a.data.reshape(shape), (a,))
    if out.requires_grad:
        def bw(g):
            _acc(a, g.reshape(a.data.shape))
        out._bw = bw
    return out


def row(a: Tensor, i: int) -> Tensor:
    """Row ``i`` of a rank-2 tensor, kept rank-2 with shape (1, n)."""
    if a.data.ndim != 2:
        raise DimensionError("row expects a rank-2 tensor")
    if not 0 <= i < a.data.shape[0]:
        raise DimensionError(f"row {i} outside 0..{a.data.shape[0] - 1}")
    out = _result(a.data[i:i + 1].copy(), (a,))
    if out.requires_grad:
        def bw(g):
            full = np.zeros_like(a.data)
            full[i] = g[0]
            _acc(a, full)
        out._bw = bw
    return out


def concat_rows(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[1]:
        raise DimensionError(
            f"concat_rows width mismatch: {a.data.shape} vs {b.data.shape}")
    out = _result(np.concatenate([a.data, b.data], axis=0), (a, b))
    if out.requires_grad:
        m = a.data.shape[0]
        def bw(g):
            if a.requires_grad:
                _acc(a, g[:m])
            if b.requires_grad:
                _acc(b, g[m:])
        out._bw = bw
    return out


def concat_cols(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[0] != b.data.shape[0]:
        raise DimensionError(
            f"concat_cols height mismatch: {a.data.shape} vs {b.data.shape}")
    out = _result(np.concatenate([a.data, b.data], axis=1), (a, b))
    if out.requires_grad:
        n = a.data.shape[1]
        def bw(g):
            if a.requires_grad:
                _acc(a, g[:, :n])
            if b.requires_grad:
                _acc(b, g[:, n:])
        out._bw = bw
    return out


def take_diag(s: Tensor) -> Tensor:
    if s.data.ndim != 2 or s.data.shape[0] != s.data.shape[1]:
        raise DimensionError("take_diag expects a square rank-2 tensor")
    out = _result(np.diag(s.data).copy(), (s,))
    if out.requires_grad:
        def bw(g):
            full = np.zeros_like(s.data)
            np.fill_diagonal(full, g)
            _acc(s, full)
        out._bw = bw
    return out


# -------------------------------------------------------------- elementwise

def _same_shape(a: Tensor, b: Tensor, name: str):
    if a.data.shape != b.data.shape:
        raise DimensionError(
            f"{name} requires equal shapes: {a.data.shape} vs {b.data.shape}")


def add(a: Tensor, b: Tensor) -> Tensor:
    _same_shape(a, b, "add")
    out = _result(a.data + b.data, (a, b))
    if out.requires_grad:
        def bw(g):
            if a.requires_grad:
                _acc(a, g)
            if b.requires_grad:
                _acc(b, g)
        out._bw = bw
    return out


def sub(a: Tensor, b: Tensor) -> Tensor:
    _same_shape(a, b, "sub")
    out = _result(a.data - b.data, (a, b))
    if out.requires_grad:
        def bw(g):
            if a.requires_grad:
                _acc(a, g)
            if b.requires_grad:
                _acc(b, -g)
        out._bw = bw
    return out


def mul(a: Tensor, b: Tensor) -> Tensor:
    _same_shape(a, b, "mul")
    out = _result(a.data * b.data, (a, b))
    if out.requires_grad:
        def bw(g):
            if a.requires_grad:
                _acc(a, g * b.data)
            if b.requires_grad:
                _acc(b, g * a.data)
        out._bw = bw
    return out


def scale(a: Tensor, c: float) -> Tensor:
    out = _result(a.data * c, (a,))
    if out.requires_grad:
        def bw(g):
            _acc(a, g * c)
        out._bw = bw
    return out


def add_scalar(a: Tensor, c: float) -> Tensor:
    out = _result(a.data + c, (a,))
    if out.requires_grad:
        def bw(g):
            _acc(a, g)
        out._bw = bw
    return out


def add_bias(x: Tensor, b: Tensor) -> Tensor:
    """x[m,n] + b[n] broadcast over rows."""
    if x.data.ndim != 2 or b.data.ndim != 1 or x.data.shape[1] != b.data.shape[0]:
        raise DimensionError(
            f"add_bias expects (m,n) and (n,); got {x.data.shape}, {b.data.shape}")
    out = _result(x.data + b.data[None, :], (x, b))
    if out.requires_grad:
        def bw(g):
            if x.requires_grad:
                _acc(x, g)
            if b.requires_grad:
                _acc(b, g.sum(axis=0))
        out._bw = bw
    return out


def affine(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """x @ w + b, the fused workhorse behind every learned projection."""
    if x.data.ndim != 2 or w.data.ndim != 2 or b.data.ndim != 1:
        raise DimensionError("affine expects x:(m,k) w:(k,n) b:(n,)")
    if x.data.shape[1] != w.data.shape[0] or w.data.shape[1] != b.data.shape[0]:
        raise DimensionError(
            f"affine extents differ: {x.data.shape} @ {w.data.shape} + {b.data.shape}")
    out = _result(x.data @ w.data + b.data[None, :], (x, w, b))
    if out.requires_grad:
        def bw(g):
            if x.requires_grad:
                _acc(x, g @ w.data.T)
            if w.requires_grad:
                _acc(w, x.data.T @ g)
            if b.requires_grad:
                _acc(b, g.sum(axis=0))
        out._bw = bw
    return out


def scale_rows(x: Tensor, s: Tensor) -> Tensor:
    """Row i of x scaled by s[i]."""
    if x.data.ndim != 2 or s.data.ndim != 1 or x.data.shape[0] != s.data.shape[0]:
        raise DimensionError(
            f"scale_rows expects (m,n) and (m,); got {x.data.shape}, {s.data.shape}")
    out = _result(x.data * s.data[:, None], (x, s))
    if out.requires_grad:
        def bw(g):
            if x.requires_grad:
                _acc(x, g * s.data[:, None])
            if s.requires_grad:
                _acc(s, (g * x.data).sum(axis=1))
        out._bw = bw
    return out


# -------------------------------------------------------------- activations

def sigmoid(x: Tensor) -> Tensor:
    # Split by sign so exp never overflows.
    d = x.data
    y = np.where(d >= 0, 1.0 / (1.0 + np.exp(-np.abs(d))),
                 np.exp(-np.abs(d)) / (1.0 + np.exp(-np.abs(d))))
    out = _result(y, (x,))
    if out.requires_grad:
        def bw(g):
            _acc(x, g * y * (1.0 - y))
        out._bw = bw
    return out


def tanh(x: Tensor) -> Tensor:
    y = np.tanh(x.data)
    out = _result(y, (x,))
    if out.requires_grad:
        def bw(g):
            _acc(x, g * (1.0 - y * y))
        out._bw = bw
    return out


def relu(x: Tensor) -> Tensor:
    y = np.maximum(x.data, 0.0)
    out = _result(y, (x,))
    if out.requires_grad:
        def bw(g):
            _acc(x, g * (x.data > 0.0))
        out._bw = bw
    return out


def softmax_rows(x: Tensor) -> Tensor:
    """Row-wise softmax of a rank-2 tensor, with row-max subtraction."""
    if x.data.ndim != 2:
        raise DimensionError("softmax_rows expects a rank-2 tensor")
    shifted = x.data - x.data.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=1, keepdims=True)
    out = _result(y, (x,))
    if out.requires_grad:
        def bw(g):
            inner = (g * y).sum(axis=1, keepdims=True)
            _acc(x, (g - inner) * y)
        out._bw = bw
    return out


def normalize_rows(x: Tensor) -> Tensor:
    """Each row divided by its Euclidean norm; rejects near-zero rows."""
    if x.data.ndim != 2:
        raise DimensionError("normalize_rows expects a rank-2 tensor")
    norms = np.sqrt((x.data * x.data).sum(axis=1, keepdims=True))
    if np.any(norms < 1e-12):
        bad = int(np.argmin(norms))
        raise DegenerateVectorError(f"row {bad} has near-zero norm")
    y = x.data / norms
    out = _result(y, (x,))
    if out.requires_grad:
        def bw(g):
            inner = (g * y).sum(axis=1, keepdims=True)
            _acc(x, (g - inner * y) / norms)
        out._bw = bw
    return out


# --------------------------------------------------------------- reductions

def mean_rows(x: Tensor) -> Tensor:
    """Column-wise mean of a rank-2 tensor, summed in canonical order."""
    if x.data.ndim != 2:
        raise DimensionError("mean_rows expects a rank-2 tensor")
    m = x.data.shape[0]
    out = _result(_canonical_sum(x.data, axis=0) / m, (x,))
    if out.requires_grad:
        def bw(g):
            _acc(x, np.broadcast_to(g[None, :] / m, x.data.shape))
        out._bw = bw
    return out


def reduce_sum(x: Tensor) -> Tensor:
    """Sum of all entries, as a shape-(1,) tensor."""
    out = _result(np.array([x.data.sum()]), (x,))
    if out.requires_grad:
        def bw(g):
            _acc(x, np.full_like(x.data, g[0]))
        out._bw = bw
    return out


# ------------------------------------------------------------- verification

def grad_check(loss_fn, params, eps: float = 1e-5,
               max_coords: int | None = None, seed: int = 0):
    """Max relative error between analytic and central-difference gradients.

    ``loss_fn`` maps () to a size-1 Tensor built from the tensors in
    ``params`` (a name -> Tensor mapping).  Relative error per coordinate
    is |a - f| / max(1, |a|, |f|).  When a parameter has more coordinates
    than ``max_coords``, a deterministic splitmix64 sample of coordinates
    is checked instead of all of them.
    """
    from .rng import RngStream, derive_seed

    for t in params.values():
        t.grad = None
    loss = loss_fn()
    if loss.data.size != 1:
        raise DimensionError("grad_check loss must be size-1")
    if not np.isfinite(loss.data[0]):
        raise ValueError("grad_check loss is non-finite")
    loss.backward()
    analytic = {name: (np.zeros_like(t.data) if t.grad is None else t.grad.copy())
                for name, t in params.items()}

    worst = 0.0
    for name, t in params.items():
        flat = t.data.reshape(-1)
        n = flat.size
        if max_coords is not None and n > max_coords:
            stream = RngStream(derive_seed(seed, "gradcheck", name))
            coords = sorted(set(int(c) for c in stream.integers(max_coords, n)))
        else:
            coords = range(n)
        ana = analytic[name].reshape(-1)
        for c in coords:
            orig = flat[c]
            with no_grad():
                flat[c] = orig + eps
                hi = loss_fn().item()
                flat[c] = orig - eps
                lo = loss_fn().item()
            flat[c] = orig
            fd = (hi - lo) / (2.0 * eps)
            err = abs(ana[c] - fd) / max(1.0, abs(ana[c]), abs(fd))
            if err > worst:
                worst = err
    return worst
