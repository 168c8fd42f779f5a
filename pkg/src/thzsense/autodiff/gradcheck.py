"""Finite-difference verification of tape gradients."""
from __future__ import annotations

import numpy as np

from .tensor import Tensor, no_grad


def analytic_gradients(loss_fn, named_params) -> tuple[float, dict[str, np.ndarray]]:
    """Run loss_fn once, backprop, and return (loss value, grads by name)."""
    for _, p in named_params:
        p.zero_grad()
    loss = loss_fn()
    if not np.isfinite(loss.data):
        raise ArithmeticError(f"non-finite loss in gradient check: {loss.data}")
    loss.backward()
    return loss.item(), {name: p.grad.copy() for name, p in named_params}


def max_relative_error(loss_fn, named_params, grads: dict[str, np.ndarray], *,
                       eps: float = 1e-5, rng: np.random.Generator | None = None,
                       num_coords: int = 120) -> float:
    """Compare analytic grads against central differences on sampled coordinates.

    Relative error per coordinate is |analytic - cd| / max(|analytic|, |cd|, 1e-12);
    the max over min(num_coords, total) uniformly sampled coordinates is returned.
    """
    if not 1e-6 <= eps <= 1e-2:
        raise ValueError(f"eps must lie in [1e-6, 1e-2], got {eps}")
    rng = rng or np.random.default_rng(0)
    coords = []
    for name, p in named_params:
        coords.extend((name, p, i) for i in range(p.size))
    if len(coords) > num_coords:
        idx = rng.choice(len(coords), size=num_coords, replace=False)
        coords = [coords[i] for i in idx]

    worst = 0.0
    with no_grad():
        for name, p, i in coords:
            orig = p.data.flat[i]
            p.data.flat[i] = orig + eps
            loss_plus = loss_fn().item()
            p.data.flat[i] = orig - eps
            loss_minus = loss_fn().item()
            p.data.flat[i] = orig
            if not (np.isfinite(loss_plus) and np.isfinite(loss_minus)):
                raise ArithmeticError("non-finite loss while perturbing parameters")
            cd = (loss_plus - loss_minus) / (2 * eps)
            a = float(grads[name].flat[i])
            worst = max(worst, abs(a - cd) / max(abs(a), abs(cd), 1e-12))
    return worst


def grad_check(model, x: np.ndarray, *, eps: float = 1e-5,
               rng: np.random.Generator | None = None,
               num_coords: int = 120) -> float:
    """End-to-end check of a model's gradients against finite differences.

    The loss is the MSE between the model output on x and a fixed random
    target, so every parameter sees a generic nonzero gradient. Run this
    on a float64 model; float32 rounding swamps the comparison otherwise.
    """
    from .tensor import mse_loss

    rng = rng or np.random.default_rng(0)
    params = list(model.named_parameters())
    dtype = params[0][1].dtype
    x_t = Tensor(np.asarray(x, dtype=dtype))
    probe = model(x_t)
    target = Tensor(rng.standard_normal(probe.shape).astype(dtype))

    def loss_fn():
        return mse_loss(model(x_t), target)

    _, grads = analytic_gradients(loss_fn, params)
    return max_relative_error(loss_fn, params, grads, eps=eps, rng=rng,
                              num_coords=num_coords)
