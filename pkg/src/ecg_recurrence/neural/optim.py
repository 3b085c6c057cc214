from __future__ import annotations

import numpy as np


class Adam:
    """Adam over a list of ``(layer, param_name)`` slots."""

    def __init__(self, slots, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.slots = list(slots)
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m = [np.zeros_like(layer.params[name], dtype=np.float64) for layer, name in self.slots]
        self.v = [np.zeros_like(m) for m in self.m]

    def step(self):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        corr1 = 1.0 - b1 ** self.t
        corr2 = 1.0 - b2 ** self.t
        for i, (layer, name) in enumerate(self.slots):
            g = np.asarray(layer.grads[name], dtype=np.float64)
            self.m[i] = b1 * self.m[i] + (1 - b1) * g
            self.v[i] = b2 * self.v[i] + (1 - b2) * g * g
            update = self.lr * (self.m[i] / corr1) / (np.sqrt(self.v[i] / corr2) + self.eps)
            p = layer.params[name]
            layer.params[name] = (p - update).astype(p.dtype)
