"""AdamW with decoupled weight decay.

The functional core (adamw_step) operates on plain ndarrays and a state
dataclass so checkpoints can serialize it; the AdamW class wires it to
named parameters. A step with any non-finite gradient is rejected
before any state mutates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import Array, Tensor


class NonFiniteGradError(RuntimeError):
    """Raised when a gradient contains NaN/Inf; no state was modified."""


@dataclass
class AdamWConfig:
    lr: float = 2e-4
    beta1: float = 0.8
    beta2: float = 0.99
    eps: float = 1e-8
    weight_decay: float = 0.01


@dataclass
class AdamWState:
    """First/second moment estimates keyed by parameter name, plus the
    shared step count (used for bias correction)."""
    step: int = 0
    m: dict[str, Array] = field(default_factory=dict)
    v: dict[str, Array] = field(default_factory=dict)


def adamw_step(params: dict[str, Array], grads: dict[str, Array],
               state: AdamWState, config: AdamWConfig,
               lr: float | None = None) -> None:
    """One update, in place on `params` and `state`.

    p <- p - lr * (mhat / (sqrt(vhat) + eps) + weight_decay * p)
    with bias-corrected moments. `lr` overrides config.lr (schedules).
    """
    for name, g in grads.items():
        if not np.isfinite(g).all():
            raise NonFiniteGradError(f"non-finite gradient for parameter '{name}'")
    lr = config.lr if lr is None else lr
    state.step += 1
    t = state.step
    bc1 = 1.0 - config.beta1 ** t
    bc2 = 1.0 - config.beta2 ** t
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            continue
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(p)
        v = state.v.get(name)
        if v is None:
            v = state.v[name] = np.zeros_like(p)
        m *= config.beta1
        m += (1.0 - config.beta1) * g
        v *= config.beta2
        v += (1.0 - config.beta2) * (g * g)
        mhat = m / bc1
        vhat = v / bc2
        p -= lr * (mhat / (np.sqrt(vhat) + config.eps) + config.weight_decay * p)


class AdamW:
    """Binds named parameter Tensors to the functional step."""

    def __init__(self, named_params: list[tuple[str, Tensor]],
                 config: AdamWConfig | None = None):
        self.named_params = list(named_params)
        names = [n for n, _ in self.named_params]
        if len(set(names)) != len(names):
            raise ValueError("duplicate parameter names")
        self.config = config or AdamWConfig()
        self.state = AdamWState()

    def step(self, lr: float | None = None) -> None:
        params = {n: p.data for n, p in self.named_params}
        grads = {n: p.grad for n, p in self.named_params if p.grad is not None}
        adamw_step(params, grads, self.state, self.config, lr=lr)

    def zero_grad(self) -> None:
        for _, p in self.named_params:
            p.grad = None

    def state_arrays(self) -> dict[str, Array]:
        """Flatten moments for checkpointing (names prefixed m./v.)."""
        out: dict[str, Array] = {}
        for k, a in self.state.m.items():
            out[f"m.{k}"] = a
        for k, a in self.state.v.items():
            out[f"v.{k}"] = a
        return out

    def load_state_arrays(self, arrays: dict[str, Array], step: int) -> None:
        self.state = AdamWState(step=step)
        for k, a in arrays.items():
            kind, name = k.split(".", 1)
            if kind == "m":
                self.state.m[name] = np.array(a)
            elif kind == "v":
                self.state.v[name] = np.array(a)
            else:
                raise ValueError(f"unknown optimizer state entry '{k}'")
