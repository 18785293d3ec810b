"""Finite-difference verification of reverse-mode gradients."""

from __future__ import annotations

import numpy as np

from .tensor import Tensor


def grad_check(fn, inputs: dict[str, np.ndarray], h: float = 1e-5) -> float:
    """Compare analytic and central-difference gradients of a scalar function.

    fn takes a dict name -> Tensor (float64 leaves) and returns a scalar
    Tensor. Returns max over all coordinates of
    |ga - gn| / max(1, |ga|, |gn|).
    """
    leaves = {k: Tensor(np.asarray(v, dtype=np.float64)) for k, v in inputs.items()}
    out = fn(leaves)
    if not np.isfinite(out.data).all():
        raise FloatingPointError("grad_check: non-finite forward value")
    out.backward()
    analytic = {
        k: (t.grad if t.grad is not None else np.zeros_like(t.data))
        for k, t in leaves.items()
    }

    worst = 0.0
    for k, base in inputs.items():
        base = np.asarray(base, dtype=np.float64)
        flat = base.reshape(-1)
        gn = np.zeros_like(flat)
        for i in range(flat.size):
            for sign, slot in ((1.0, 0), (-1.0, 1)):
                pert = flat.copy()
                pert[i] += sign * h
                trial = dict(inputs)
                trial[k] = pert.reshape(base.shape)
                val = fn({n: Tensor(np.asarray(v, dtype=np.float64))
                          for n, v in trial.items()}).data
                if not np.isfinite(val):
                    raise FloatingPointError("grad_check: non-finite perturbed value")
                if slot == 0:
                    plus = float(val)
                else:
                    gn[i] = (plus - float(val)) / (2 * h)
        ga = analytic[k].reshape(-1)
        denom = np.maximum(1.0, np.maximum(np.abs(ga), np.abs(gn)))
        worst = max(worst, float(np.max(np.abs(ga - gn) / denom)))
    return worst
