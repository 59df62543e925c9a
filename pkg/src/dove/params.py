"""Named registry for every learned matrix and bias.

Initial values are a pure function of (init spec, seed, name): each entry
draws from its own splitmix64 stream keyed by the parameter name, so the
order in which modules register parameters can never shift another
entry's initialization.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autograd import Tensor
from .rng import RngStream, derive_seed


@dataclass
class ParamEntry:
    name: str
    tensor: Tensor
    init_spec: str  # "uniform_glorot" | "zeros"


def _glorot_bound(shape: tuple[int, ...]) -> float:
    # uniform bound sqrt(6 / (fan_in + fan_out)); vectors count both fans as len
    if len(shape) == 2:
        fan_in, fan_out = shape
    else:
        fan_in = fan_out = shape[0]
    return float(np.sqrt(6.0 / (fan_in + fan_out)))


def init_values(name: str, shape: tuple[int, ...], init_spec: str, seed: int) -> np.ndarray:
    """Initial array for a parameter; independent of registration order."""
    if init_spec == "zeros":
        return np.zeros(shape, dtype=np.float64)
    if init_spec == "uniform_glorot":
        a = _glorot_bound(shape)
        stream = RngStream(derive_seed(seed, "init", name))
        return stream.uniform(int(np.prod(shape)), -a, a).reshape(shape)
    raise ValueError(f"unknown init spec {init_spec!r}")


class ParamRegistry:
    """Insertion-ordered mapping of parameter names to tensors."""

    def __init__(self, seed: int):
        self.seed = seed
        self._entries: dict[str, ParamEntry] = {}

    def register(self, name: str, shape: tuple[int, ...], init_spec: str) -> Tensor:
        if name in self._entries:
            raise ValueError(f"duplicate parameter name {name!r}")
        t = Tensor(init_values(name, shape, init_spec, self.seed), requires_grad=True)
        self._entries[name] = ParamEntry(name, t, init_spec)
        return t

    def matrix(self, name: str, rows: int, cols: int) -> Tensor:
        return self.register(name, (rows, cols), "uniform_glorot")

    def bias(self, name: str, width: int) -> Tensor:
        return self.register(name, (width,), "zeros")

    def __getitem__(self, name: str) -> Tensor:
        return self._entries[name].tensor

    def __contains__(self, name: str) -> bool:
        return name in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def names(self) -> list[str]:
        return list(self._entries)

    def entries(self) -> list[ParamEntry]:
        return list(self._entries.values())

    def tensors(self) -> dict[str, Tensor]:
        return {name: e.tensor for name, e in self._entries.items()}

    def zero_grad(self):
        for e in self._entries.values():
            e.tensor.grad = None

    def load_values(self, values: dict[str, np.ndarray]):
        """Overwrite entry data in place (checkpoint restore)."""
        missing = set(self._entries) - set(values)
        extra = set(values) - set(self._entries)
        if missing or extra:
            raise ValueError(f"parameter set mismatch: missing={sorted(missing)} "
                             f"extra={sorted(extra)}")
        for name, arr in values.items():
            t = self._entries[name].tensor
            if t.data.shape != arr.shape:
                raise ValueError(f"shape mismatch for {name}: "
                                 f"{t.data.shape} vs {arr.shape}")
            t.data = np.asarray(arr, dtype=np.float64).copy()
