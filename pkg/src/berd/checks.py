"""Gradient verification suites: per-kernel-op checks and the end-to-end
training loss on a toy event."""

from __future__ import annotations

import numpy as np

from . import tensor as T
from .data import build_corpus, EntityMention, EventInstance, Sentence, SentenceRecord
from .gradcheck import grad_check
from .model import Model, ModelConfig

TOLERANCE = 1e-4


def _spread(vals, axis=0, gap=1e-3):
    """Push values apart along `axis` so finite differences cannot cross a
    max tie; preserves ordering."""
    ranks = np.argsort(np.argsort(vals, axis=axis), axis=axis)
    return vals + gap * ranks


def kernel_suite(num_instances: int = 100, seed: int = 0) -> dict:
    """Max relative gradient error per kernel op over random instantiations."""
    rng = np.random.default_rng(seed)
    results = {}

    def run(name, builder):
        worst = 0.0
        for _ in range(num_instances):
            fn, inputs = builder()
            worst = max(worst, grad_check(fn, inputs))
        results[name] = worst

    def scalarize(out, w):
        return (out * T.Tensor(w)).sum()

    def b_segment_max():
        n = int(rng.integers(3, 9))
        d = int(rng.integers(1, 5))
        a = int(rng.integers(1, n))
        b = int(rng.integers(a + 1, n + 1))
        w = rng.normal(size=3 * d)
        h = _spread(rng.normal(size=(n, d)), axis=0)
        return (lambda leaves: scalarize(T.segment_max(leaves["h"], a, b), w),
                {"h": h})

    def b_conv1d():
        n = int(rng.integers(1, 7))
        c_in = int(rng.integers(1, 4))
        c_out = int(rng.integers(1, 5))
        w = rng.normal(size=(n, c_out))
        return (
            lambda leaves: scalarize(
                T.conv1d_same(leaves["x"], leaves["k"], leaves["b"]), w),
            {"x": rng.normal(size=(n, c_in)),
             "k": rng.normal(size=(3 * c_in, c_out)),
             "b": rng.normal(size=c_out)},
        )

    def b_max_over_time():
        n = int(rng.integers(1, 8))
        c = int(rng.integers(1, 5))
        w = rng.normal(size=c)
        return (lambda leaves: scalarize(T.max_over_time(leaves["x"]), w),
                {"x": _spread(rng.normal(size=(n, c)), axis=0)})

    def b_dense():
        d_in = int(rng.integers(1, 6))
        d_out = int(rng.integers(1, 5))
        w = rng.normal(size=d_out)
        return (
            lambda leaves: scalarize(
                T.dense(leaves["x"], leaves["w"], leaves["b"], activation=True), w),
            {"x": rng.normal(size=d_in),
             "w": rng.normal(size=(d_in, d_out)),
             "b": rng.normal(size=d_out)},
        )

    def b_softmax():
        d = int(rng.integers(2, 7))
        w = rng.normal(size=d)
        return (lambda leaves: scalarize(T.softmax_tensor(leaves["p"]), w),
                {"p": rng.normal(size=d)})

    def b_cross_entropy():
        d = int(rng.integers(2, 7))
        gold = np.array([int(rng.integers(d))])
        return (
            lambda leaves: T.softmax_cross_entropy(
                T.reshape(leaves["p"], (1, d)), gold)[0],
            {"p": rng.normal(size=d)},
        )

    def b_masked_max():
        n = int(rng.integers(2, 8))
        c = int(rng.integers(1, 4))
        mask = rng.random(n) < 0.7
        w = rng.normal(size=c)
        return (lambda leaves: scalarize(T.masked_max(leaves["x"], mask), w),
                {"x": _spread(rng.normal(size=(n, c)), axis=0)})

    def b_embedding():
        rows = int(rng.integers(2, 6))
        d = int(rng.integers(1, 4))
        ids = rng.integers(rows, size=int(rng.integers(1, 6)))
        w = rng.normal(size=(len(ids), d))
        return (lambda leaves: scalarize(T.embedding(leaves["t"], ids), w),
                {"t": rng.normal(size=(rows, d))})

    run("segment_max", b_segment_max)
    run("conv1d_same", b_conv1d)
    run("max_over_time", b_max_over_time)
    run("dense", b_dense)
    run("softmax", b_softmax)
    run("cross_entropy", b_cross_entropy)
    run("masked_max", b_masked_max)
    run("embedding", b_embedding)
    return results


def toy_event_corpus():
    """A 6-token sentence with two entities, for end-to-end checks."""
    sent = Sentence(id="toy0", tokens=("alpha", "beta", "gamma", "delta",
                                       "epsilon", "zeta"))
    entities = (
        EntityMention(id="a", start=1, end=2),
        EntityMention(id="b", start=4, end=6),
    )
    event = EventInstance(trigger_start=2, trigger_end=3, event_type="Attack",
                          roles={"a": "Place", "b": "Target"})
    rec = SentenceRecord(sentence=sent, entities=entities, events=(event,))
    return build_corpus([rec])


TOY_MODEL_CONFIG = ModelConfig(
    d_h=5, word_dim=7, pos_dim=3, evt_dim=2, role_dim=3,
    conv_channels=8, layers=2, clip=5,
)


def end_to_end_check(seed: int = 0, variant: str = "berd",
                     alpha: float = 1.0, weights=(0.5, 0.5)) -> float:
    """grad_check of the full weighted training loss on the toy event,
    over every model parameter (64-bit)."""
    corpus = toy_event_corpus()
    config = ModelConfig(**{**TOY_MODEL_CONFIG.__dict__, "variant": variant})
    model = Model(corpus, config, seed=seed, dtype=np.float64)
    rng = np.random.default_rng(seed + 100)
    # re-jitter all parameters away from zero and from max ties
    for _, t in model.store.items():
        t.data[...] = rng.uniform(-0.4, 0.4, size=t.data.shape)
    batch = list(corpus.events())
    weights = weights[: len(model.decoders)]

    def fn(leaves):
        saved = model.store._params
        model.store._params = leaves
        try:
            loss, _ = model.batch_loss(batch, alpha, weights)
        finally:
            model.store._params = saved
        return loss

    inputs = {name: t.data.copy() for name, t in model.store.items()}
    return grad_check(fn, inputs)


def run_all(num_instances: int = 100, seed: int = 0):
    """(results dict, ok flag) for the CLI and acceptance suite."""
    results = kernel_suite(num_instances=num_instances, seed=seed)
    results["end_to_end_loss"] = end_to_end_check(seed=seed)
    ok = all(v < TOLERANCE for v in results.values())
    return results, ok
