"""Adamax optimizer (infinity-norm Adam variant)."""

from __future__ import annotations

import numpy as np

from .errors import ConfigError


class Adamax:
    """Per-parameter update:

        m' = b1*m + (1-b1)*g
        u' = max(b2*u, |g|)
        theta' = theta - (lr / (1 - b1^t)) * m' / (u' + eps)
    """

    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        if lr < 0.0:
            raise ConfigError("learning rate must be >= 0")
        if not (0.0 <= beta1 < 1.0 and 0.0 <= beta2 < 1.0):
            raise ConfigError("betas must be in [0, 1)")
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = [np.zeros_like(p) for p in params]
        self.u = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads):
        if len(grads) != len(self.params):
            raise ConfigError("gradient count does not match parameter count")
        self.t += 1
        scale = self.lr / (1.0 - self.beta1 ** self.t)
        for p, m, u, g in zip(self.params, self.m, self.u, grads):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            np.maximum(self.beta2 * u, np.abs(g), out=u)
            p -= scale * m / (u + self.eps)
