"""Finite-difference verification of the analytic gradients."""
from __future__ import annotations

import numpy as np

from .model import Batch, MvaeModel


def finite_difference(model: MvaeModel, batch: Batch, beta: float, eps, key: str, index,
                      h: float = 1e-5) -> float:
    p = model.params[key]
    old = p[index]
    p[index] = old + h
    up = model.loss_and_grads(batch, beta, eps, need_grad=False)[0].parts
    p[index] = old - h
    down = model.loss_and_grads(batch, beta, eps, need_grad=False)[0].parts
    p[index] = old
    # difference term by term: the pose weight makes the total large, and
    # subtracting two large totals would lose the small gradients
    return float(np.sum(up - down)) / (2.0 * h)


def sample_coordinates(model: MvaeModel, n: int, seed: int = 0) -> list[tuple[str, tuple]]:
    """``n`` distinct (parameter, index) coordinates drawn uniformly over all scalars."""
    keys = list(model.params)
    sizes = np.array([model.params[k].size for k in keys])
    total = int(sizes.sum())
    flat = np.random.default_rng(seed).choice(total, size=min(n, total), replace=False)
    bounds = np.cumsum(sizes)
    out = []
    for f in np.sort(flat):
        i = int(np.searchsorted(bounds, f, side="right"))
        local = int(f - (bounds[i - 1] if i else 0))
        out.append((keys[i], np.unravel_index(local, model.params[keys[i]].shape)))
    return out


def gradient_check(model: MvaeModel, batch: Batch, beta: float = 1.0, n_params: int = 200,
                   h: float = 1e-5, seed: int = 0, floor: float = 1e-6) -> dict:
    """Compare analytic and central-difference gradients of the subset loss.

    The noise ``eps`` is frozen.  Relative error is
    ``|a - n| / max(|a|, |n|, floor)``.
    """
    rng = np.random.default_rng(seed)
    eps = rng.standard_normal((batch.size, model.latent_dim))
    _, grads = model.loss_and_grads(batch, beta, eps)
    errors, worst = [], None
    for key, idx in sample_coordinates(model, n_params, seed + 1):
        a = float(grads[key][idx])
        num = finite_difference(model, batch, beta, eps, key, idx, h)
        err = abs(a - num) / max(abs(a), abs(num), floor)
        errors.append(err)
        if worst is None or err > worst[0]:
            worst = (err, key, tuple(int(i) for i in idx), a, num)
    return {"max_rel_error": max(errors), "checked": len(errors), "worst": worst,
            "n_params": model.n_params}
