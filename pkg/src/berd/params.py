"""Named trainable parameters, the Adam optimizer, and checkpoint I/O."""

from __future__ import annotations

import json

import numpy as np

from .tensor import Tensor

CHECKPOINT_VERSION = 1


class ParameterStore:
    """Map name -> (value tensor, Adam state). Values are graph leaves."""

    def __init__(self, dtype=np.float32):
        self.dtype = np.dtype(dtype)
        self._params: dict[str, Tensor] = {}
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}
        self.step_count = 0

    def add(self, name: str, value) -> Tensor:
        if name in self._params:
            raise ValueError(f"duplicate parameter name: {name}")
        t = Tensor(np.asarray(value, dtype=self.dtype))
        self._params[name] = t
        self._m[name] = np.zeros_like(t.data)
        self._v[name] = np.zeros_like(t.data)
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def names(self) -> list[str]:
        return list(self._params)

    def items(self):
        return self._params.items()

    def zero_grad(self):
        for t in self._params.values():
            t.grad = None

    def num_parameters(self) -> int:
        return sum(t.data.size for t in self._params.values())

    def clone(self) -> "ParameterStore":
        out = ParameterStore(self.dtype)
        for name, t in self._params.items():
            out.add(name, t.data.copy())
            out._m[name] = self._m[name].copy()
            out._v[name] = self._v[name].copy()
        out.step_count = self.step_count
        return out

    def load_values(self, other: "ParameterStore"):
        for name, t in self._params.items():
            t.data[...] = other._params[name].data


def adam_step(
    store: ParameterStore,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
    weight_decay: float = 0.0,
    warmup_steps: int = 0,
):
    """One Adam update with bias correction and decoupled weight decay.

    Linear warmup: the effective lr ramps from 0 to lr over the first
    `warmup_steps` steps, then stays constant.
    """
    store.step_count += 1
    t = store.step_count
    if warmup_steps > 0 and t <= warmup_steps:
        lr = lr * t / warmup_steps
    for name, p in store._params.items():
        g = p.grad
        if g is None:
            continue
        m = store._m[name]
        v = store._v[name]
        m *= beta1
        m += (1 - beta1) * g
        v *= beta2
        v += (1 - beta2) * (g * g)
        m_hat = m / (1 - beta1 ** t)
        v_hat = v / (1 - beta2 ** t)
        p.data -= lr * m_hat / (np.sqrt(v_hat) + eps)
        if weight_decay > 0.0:
            p.data -= lr * weight_decay * p.data


def save_checkpoint(path, store: ParameterStore, config: dict, seed: int):
    """Versioned npz container: little-endian arrays plus a JSON meta entry."""
    meta = {
        "version": CHECKPOINT_VERSION,
        "config": config,
        "seed": seed,
        "step_count": store.step_count,
        "dtype": store.dtype.name,
    }
    arrays = {
        f"param/{name}": np.ascontiguousarray(t.data.astype(f"<{t.data.dtype.str[1:]}"))
        for name, t in store.items()
    }
    arrays["__meta__"] = np.frombuffer(
        json.dumps(meta, sort_keys=True).encode("utf-8"), dtype=np.uint8
    )
    with open(path, "wb") as f:
        np.savez(f, **arrays)


def load_checkpoint(path):
    """Returns (name -> array dict, meta dict)."""
    with np.load(path) as z:
        meta = json.loads(bytes(z["__meta__"]).decode("utf-8"))
        if meta.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version: {meta.get('version')}")
        values = {
            k[len("param/"):]: z[k] for k in z.files if k.startswith("param/")
        }
    return values, meta
