"""Layer classes: the trainable building blocks of the reconstruction network."""
from __future__ import annotations

import math

import numpy as np

from ..exceptions import ConfigurationError
from .tensor import Tensor, batch_norm_eval, batch_norm_train, conv1d, prelu


class Module:
    """Base class providing parameter discovery and train/eval switching.

    Parameters are discovered by walking instance attributes in definition
    order (dicts preserve insertion order), so parameter names and layout
    are deterministic for a given architecture.
    """

    training = True

    def named_parameters(self):
        for name, value in vars(self).items():
            if isinstance(value, Tensor) and value.requires_grad:
                yield name, value
            elif isinstance(value, Module):
                for sub, p in value.named_parameters():
                    yield f"{name}.{sub}", p
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        for sub, p in item.named_parameters():
                            yield f"{name}.{i}.{sub}", p

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def modules(self):
        for _, m in self.named_modules():
            yield m

    def named_modules(self, prefix: str = ""):
        yield prefix, self
        for name, value in vars(self).items():
            sub = f"{prefix}.{name}" if prefix else name
            if isinstance(value, Module):
                yield from value.named_modules(sub)
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_modules(f"{sub}.{i}")

    def train(self, mode: bool = True):
        for m in self.modules():
            m.training = mode
        return self

    def eval(self):
        return self.train(False)

    def zero_grad(self):
        for p in self.parameters():
            p.zero_grad()

    def astype(self, dtype):
        """Cast all parameters (and buffers) in place; returns self."""
        for m in self.modules():
            m._cast(dtype)
        return self

    def _cast(self, dtype):
        pass  # overridden by layers that own arrays

    def count_params(self) -> int:
        return sum(p.size for p in self.parameters())

    def __call__(self, x: Tensor) -> Tensor:
        return self.forward(x)


class Conv1d(Module):
    """1-D cross-correlation layer.

    Weights are uniform in +-sqrt(6 / fan_in); bias starts at zero. A
    full-width instance (kernel_size == input length, no padding, no bias)
    is a dense map whose filters are the rows of a matrix.
    """

    def __init__(self, in_channels: int, out_channels: int, kernel_size: int,
                 stride: int = 1, padding: int = 0, bias: bool = True,
                 rng: np.random.Generator | None = None, dtype=np.float32):
        if stride < 1:
            raise ConfigurationError(f"stride must be >= 1, got {stride}")
        if padding < 0:
            raise ConfigurationError(f"padding must be >= 0, got {padding}")
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        self.stride = stride
        self.padding = padding
        rng = rng or np.random.default_rng()
        bound = math.sqrt(6.0 / (in_channels * kernel_size))
        w = rng.uniform(-bound, bound, (out_channels, in_channels, kernel_size))
        self.weight = Tensor(w.astype(dtype), requires_grad=True)
        self.bias = Tensor(np.zeros(out_channels, dtype=dtype), requires_grad=True) if bias else None

    def _cast(self, dtype):
        self.weight.data = self.weight.data.astype(dtype)
        if self.bias is not None:
            self.bias.data = self.bias.data.astype(dtype)

    def forward(self, x: Tensor) -> Tensor:
        if x.data.shape[1] != self.in_channels:
            raise ConfigurationError(
                f"conv1d expects {self.in_channels} channels, "
                f"got input shape {x.data.shape}"
            )
        return conv1d(x, self.weight, self.bias, self.stride, self.padding)


class BatchNorm1d(Module):
    """Per-channel batch normalization over the (batch, length) axes.

    Training uses batch statistics and updates running statistics as
    running = momentum * running + (1 - momentum) * batch; the very first
    update assigns the batch statistics directly. Eval mode before any
    update is an error because the running statistics do not exist yet.
    """

    def __init__(self, num_channels: int, momentum: float = 0.9, eps: float = 1e-5,
                 dtype=np.float32):
        if not 0.0 < momentum < 1.0:
            raise ConfigurationError(f"momentum must be in (0, 1), got {momentum}")
        self.num_channels = num_channels
        self.momentum = momentum
        self.eps = eps
        self.gamma = Tensor(np.ones(num_channels, dtype=dtype), requires_grad=True)
        self.beta = Tensor(np.zeros(num_channels, dtype=dtype), requires_grad=True)
        self.running_mean: np.ndarray | None = None
        self.running_var: np.ndarray | None = None

    def _cast(self, dtype):
        self.gamma.data = self.gamma.data.astype(dtype)
        self.beta.data = self.beta.data.astype(dtype)
        if self.running_mean is not None:
            self.running_mean = self.running_mean.astype(dtype)
            self.running_var = self.running_var.astype(dtype)

    def forward(self, x: Tensor) -> Tensor:
        if x.data.shape[1] != self.num_channels:
            raise ConfigurationError(
                f"batchnorm expects {self.num_channels} channels, "
                f"got input shape {x.data.shape}"
            )
        if self.training:
            if x.data.shape[0] * x.data.shape[2] < 2:
                raise ConfigurationError(
                    "batchnorm training mode needs batch*length >= 2, "
                    f"got input shape {x.data.shape}"
                )
            out, mean, var = batch_norm_train(x, self.gamma, self.beta, self.eps)
            if self.running_mean is None:
                self.running_mean = mean.copy()
                self.running_var = var.copy()
            else:
                m = x.dtype.type(self.momentum)
                self.running_mean = m * self.running_mean + (1 - m) * mean
                self.running_var = m * self.running_var + (1 - m) * var
            return out
        if self.running_mean is None:
            raise ConfigurationError(
                "batchnorm eval mode before any training update: running statistics uninitialized"
            )
        return batch_norm_eval(x, self.gamma, self.beta,
                               self.running_mean, self.running_var, self.eps)


class PReLU(Module):
    """Parametric ReLU with one learnable slope per channel (init 0.25)."""

    def __init__(self, num_channels: int, init: float = 0.25, dtype=np.float32):
        self.num_channels = num_channels
        self.slope = Tensor(np.full(num_channels, init, dtype=dtype), requires_grad=True)

    def _cast(self, dtype):
        self.slope.data = self.slope.data.astype(dtype)

    def forward(self, x: Tensor) -> Tensor:
        return prelu(x, self.slope)
