"""
===============================================================================
PARAMETER REGISTRY - ParamBlock / ModelParams
===============================================================================

Purpose:
    Holds every learnable tensor of the predictor under a unique dotted path
    ("blocks.0.agent_xattn.q.W") together with a same-shaped gradient buffer.

Key behaviors:
    - Insertion order is the canonical order: flat views, checkpoints and the
      optimizer all iterate blocks in registration order.
    - flat_view()/set_flat() expose the whole model as one vector for the
      optimizer tests and the gradient checker.
    - astype() re-casts tensors and grads between precision modes.

===============================================================================
"""

from collections import OrderedDict
from dataclasses import dataclass
from typing import Dict, Iterator, Tuple

import numpy as np

from util.errors_util import ConfigError, DimensionError


@dataclass
class ParamBlock:
    name: str
    tensor: np.ndarray
    grad: np.ndarray

    def __post_init__(self):
        if self.grad.shape != self.tensor.shape:
            raise DimensionError(
                f"grad shape {self.grad.shape} != tensor shape {self.tensor.shape} for '{self.name}'"
            )

    @property
    def size(self) -> int:
        return int(self.tensor.size)


class ModelParams:
    """Ordered name -> ParamBlock registry."""

    def __init__(self, dtype=np.float64):
        self.dtype = np.dtype(dtype)
        self._blocks: "OrderedDict[str, ParamBlock]" = OrderedDict()

    # -------------------------------------------------------------------------
    # registration / lookup
    # -------------------------------------------------------------------------
    def add(self, name: str, value) -> ParamBlock:
        if name in self._blocks:
            raise ConfigError(f"duplicate parameter path '{name}'")
        tensor = np.array(value, dtype=self.dtype, copy=True)
        block = ParamBlock(name=name, tensor=tensor, grad=np.zeros_like(tensor))
        self._blocks[name] = block
        return block

    def __getitem__(self, name: str) -> ParamBlock:
        try:
            return self._blocks[name]
        except KeyError:
            raise KeyError(f"unknown parameter path '{name}'")

    def __contains__(self, name: str) -> bool:
        return name in self._blocks

    def __iter__(self) -> Iterator[ParamBlock]:
        return iter(self._blocks.values())

    def __len__(self) -> int:
        return len(self._blocks)

    def names(self):
        return list(self._blocks.keys())

    def items(self) -> Iterator[Tuple[str, ParamBlock]]:
        return iter(self._blocks.items())

    @property
    def total_size(self) -> int:
        return sum(b.size for b in self)

    # -------------------------------------------------------------------------
    # gradients
    # -------------------------------------------------------------------------
    def zero_grad(self) -> None:
        for block in self:
            block.grad.fill(0.0)

    # -------------------------------------------------------------------------
    # flat views
    # -------------------------------------------------------------------------
    def flat_view(self) -> np.ndarray:
        if not self._blocks:
            return np.zeros(0, dtype=self.dtype)
        return np.concatenate([b.tensor.reshape(-1) for b in self])

    def flat_grad(self) -> np.ndarray:
        if not self._blocks:
            return np.zeros(0, dtype=self.dtype)
        return np.concatenate([b.grad.reshape(-1) for b in self])

    def set_flat(self, vector: np.ndarray) -> None:
        vector = np.asarray(vector)
        if vector.shape != (self.total_size,):
            raise DimensionError(f"flat vector shape {vector.shape} != ({self.total_size},)")
        offset = 0
        for block in self:
            n = block.size
            block.tensor[...] = vector[offset:offset + n].reshape(block.tensor.shape)
            offset += n

    def locate(self, flat_index: int) -> Tuple[ParamBlock, int]:
        """Map a flat index to (block, index within block.tensor.reshape(-1))."""
        offset = 0
        for block in self:
            if flat_index < offset + block.size:
                return block, flat_index - offset
            offset += block.size
        raise IndexError(f"flat index {flat_index} outside {self.total_size} parameters")

    # -------------------------------------------------------------------------
    # copies / precision
    # -------------------------------------------------------------------------
    def astype(self, dtype) -> "ModelParams":
        out = ModelParams(dtype=dtype)
        for block in self:
            out.add(block.name, block.tensor)
        return out

    def copy(self) -> "ModelParams":
        return self.astype(self.dtype)

    def shapes(self) -> Dict[str, Tuple[int, ...]]:
        return OrderedDict((b.name, tuple(b.tensor.shape)) for b in self)
