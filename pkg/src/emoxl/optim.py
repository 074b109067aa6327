"""Adam optimizer with bias correction."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .tensor import ShapeError, Tensor


@dataclass
class AdamState:
    """Moment estimates and step counter for one parameter list.

    Defaults match the training recipe used throughout the package:
    beta1=0.9, beta2=0.98, eps=1e-9, lr=0.001.
    """

    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.98
    eps: float = 1e-9
    t: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)


def adam_step(params: Sequence[Tensor], state: AdamState,
              grads: Sequence[np.ndarray] | None = None) -> None:
    """One Adam update, in place on the parameter data.

    m <- b1*m + (1-b1)*g;  v <- b2*v + (1-b2)*g^2
    m_hat = m/(1-b1^t);    v_hat = v/(1-b2^t)
    theta <- theta - lr * m_hat / (sqrt(v_hat) + eps)

    Gradients default to each parameter's ``.grad``.  With lr == 0 the
    parameters are left untouched bit for bit (moments still advance).
    """
    if grads is None:
        grads = [p.grad if p.grad is not None else np.zeros_like(p.data) for p in params]
    if len(grads) != len(params):
        raise ShapeError(f"{len(grads)} gradients for {len(params)} parameters")
    if not state.m:
        state.m = [np.zeros_like(p.data) for p in params]
        state.v = [np.zeros_like(p.data) for p in params]
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1 ** state.t
    bc2 = 1.0 - b2 ** state.t
    for i, (p, g) in enumerate(zip(params, grads)):
        if g.shape != p.data.shape:
            raise ShapeError(f"gradient shape {g.shape} vs parameter {p.data.shape}")
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * (g * g)
        if state.lr != 0.0:
            m_hat = state.m[i] / bc1
            v_hat = state.v[i] / bc2
            p.data -= (state.lr * m_hat / (np.sqrt(v_hat) + state.eps)).astype(p.data.dtype)
