"""Adam optimizer with bias correction."""
from __future__ import annotations

import numpy as np

from .tensor import Tensor


class Adam:
    """Standard Adam over a list of (name, Tensor) parameters.

    Hyperparameters are cast to the parameter dtype so that a state
    round-trip through a 32-bit checkpoint reproduces updates bit-exactly.
    """

    def __init__(self, named_params: list[tuple[str, Tensor]], lr: float = 5e-4,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.named_params = list(named_params)
        if not self.named_params:
            raise ValueError("Adam needs at least one parameter")
        dtype = self.named_params[0][1].dtype
        self.lr = dtype.type(lr)
        self.beta1 = dtype.type(beta1)
        self.beta2 = dtype.type(beta2)
        self.eps = dtype.type(eps)
        self.step_count = 0
        self.m = {name: np.zeros_like(p.data) for name, p in self.named_params}
        self.v = {name: np.zeros_like(p.data) for name, p in self.named_params}

    def step(self):
        self.step_count += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1 - b1 ** self.step_count
        c2 = 1 - b2 ** self.step_count
        for name, p in self.named_params:
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            m = self.m[name]
            v = self.v[name]
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * (g * g)
            p.data -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)

    def state_dict(self) -> dict[str, np.ndarray]:
        state = {"step": np.asarray(float(self.step_count), dtype=np.float32)}
        for name in self.m:
            state[f"m/{name}"] = self.m[name]
            state[f"v/{name}"] = self.v[name]
        return state

    def load_state_dict(self, state: dict[str, np.ndarray]):
        self.step_count = int(state["step"])
        for name in self.m:
            self.m[name] = np.array(state[f"m/{name}"], dtype=self.m[name].dtype).reshape(self.m[name].shape)
            self.v[name] = np.array(state[f"v/{name}"], dtype=self.v[name].dtype).reshape(self.v[name].shape)
