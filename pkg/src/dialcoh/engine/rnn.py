"""Gated recurrent unit cell and sequence runner.

Standard reset-before-candidate formulation:

    r = sigmoid(W_r x + U_r h + b_r)
    z = sigmoid(W_z x + U_z h + b_z)
    c = tanh(W_h x + U_h (r * h) + b_h)
    h' = (1 - z) * h + z * c

Weight matrices are stored (hidden, input) and (hidden, hidden). The cell is
shape-agnostic: x may be a single (input,) vector or a (batch, input) matrix.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

GATES = ("r", "z", "h")


@dataclass
class GruCellParams:
    """Input weights w_*, recurrent weights u_*, biases b_* for the three gates."""

    w_r: Tensor
    u_r: Tensor
    b_r: Tensor
    w_z: Tensor
    u_z: Tensor
    b_z: Tensor
    w_h: Tensor
    u_h: Tensor
    b_h: Tensor

    @property
    def hidden_size(self) -> int:
        return self.w_r.shape[0]

    @property
    def input_size(self) -> int:
        return self.w_r.shape[1]

    @classmethod
    def init(
        cls,
        input_size: int,
        hidden_size: int,
        rng: np.random.Generator,
        dtype=np.float32,
        requires_grad: bool = True,
    ) -> "GruCellParams":
        """Uniform [-1/sqrt(hidden), 1/sqrt(hidden)] weights, zero biases."""
        bound = 1.0 / math.sqrt(hidden_size)
        fields = {}
        for gate in GATES:
            fields[f"w_{gate}"] = Tensor(
                rng.uniform(-bound, bound, (hidden_size, input_size)).astype(dtype),
                requires_grad=requires_grad,
            )
            fields[f"u_{gate}"] = Tensor(
                rng.uniform(-bound, bound, (hidden_size, hidden_size)).astype(dtype),
                requires_grad=requires_grad,
            )
            fields[f"b_{gate}"] = Tensor(
                np.zeros(hidden_size, dtype=dtype), requires_grad=requires_grad
            )
        return cls(**fields)

    def named(self, prefix: str) -> dict[str, Tensor]:
        return {
            f"{prefix}.{name}": getattr(self, name)
            for gate in GATES
            for name in (f"w_{gate}", f"u_{gate}", f"b_{gate}")
        }

    @classmethod
    def from_named(cls, prefix: str, tensors: dict[str, Tensor]) -> "GruCellParams":
        return cls(
            **{
                name: tensors[f"{prefix}.{name}"]
                for gate in GATES
                for name in (f"w_{gate}", f"u_{gate}", f"b_{gate}")
            }
        )


def gru_cell_step(x: Tensor, h_prev: Tensor, p: GruCellParams) -> Tensor:
    """One recurrence step; output lies in (-1, 1) componentwise whenever
    h_prev does (convex mix of h_prev and a tanh candidate)."""
    if x.shape[-1] != p.input_size:
        raise ValueError(f"input size {x.shape[-1]} != cell input size {p.input_size}")
    if h_prev.shape[-1] != p.hidden_size:
        raise ValueError(f"hidden size {h_prev.shape[-1]} != cell hidden size {p.hidden_size}")
    r = ad.sigmoid(ad.linear(x, p.w_r) + ad.linear(h_prev, p.u_r) + p.b_r)
    z = ad.sigmoid(ad.linear(x, p.w_z) + ad.linear(h_prev, p.u_z) + p.b_z)
    c = ad.tanh(ad.linear(x, p.w_h) + ad.linear(ad.mul(r, h_prev), p.u_h) + p.b_h)
    return (1.0 - z) * h_prev + z * c


def run_gru(
    xs: Sequence[Tensor], p: GruCellParams, reverse: bool = False
) -> list[Tensor]:
    """Run the cell over a position sequence from a zero initial state.

    Outputs are returned aligned with input positions; reverse=True scans the
    sequence right to left (the backward direction of a biGRU).
    """
    if not xs:
        return []
    lead = xs[0].data.shape[:-1]
    h = Tensor(np.zeros(lead + (p.hidden_size,), dtype=xs[0].data.dtype))
    order = range(len(xs) - 1, -1, -1) if reverse else range(len(xs))
    out: list[Tensor | None] = [None] * len(xs)
    for t in order:
        h = gru_cell_step(xs[t], h, p)
        out[t] = h
    return out  # type: ignore[return-value]
