"""AdamW with decoupled weight decay and cosine annealing with warm restarts."""
from __future__ import annotations

import math
from typing import Iterable

import numpy as np

from ..errors import TrainingError
from .autograd import Tensor


def lr_schedule(step_epoch: float, cfg) -> float:
    """Learning rate at a (fractional) epoch position.

    Cycle ``i`` lasts ``t0_epochs * t_mult**i`` epochs; within a cycle the
    rate follows half a cosine from ``lr_max`` down towards zero.
    """
    t_cur, period = float(step_epoch), float(cfg.t0_epochs)
    if t_cur < 0:
        raise ValueError("step_epoch must be non-negative")
    if cfg.t_mult == 1:
        t_cur = math.fmod(t_cur, period)
    else:
        while t_cur >= period:
            t_cur -= period
            period *= cfg.t_mult
    return 0.5 * cfg.lr_max * (1.0 + math.cos(math.pi * t_cur / period))


class AdamW:
    def __init__(self, params: dict[str, Tensor], weight_decay: float = 0.01,
                 betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8,
                 names: Iterable[str] | None = None):
        self.params = params
        self.names = list(names) if names is not None else list(params)
        self.weight_decay = weight_decay
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(params[k].data) for k in self.names}
        self.v = {k: np.zeros_like(params[k].data) for k in self.names}

    @staticmethod
    def decays(name: str) -> bool:
        return not name.endswith(".b")

    def step(self, lr: float) -> None:
        bad = [k for k in self.names
               if self.params[k].grad is not None and not np.all(np.isfinite(self.params[k].grad))]
        if bad:
            raise TrainingError(f"non-finite gradient in {bad}")
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for k in self.names:
            p = self.params[k]
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            m, v = self.m[k], self.v[k]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            if self.decays(k) and self.weight_decay:
                p.data *= 1.0 - lr * self.weight_decay
            p.data -= (lr / c1) * m / (np.sqrt(v / c2) + self.eps)
