"""The per-entity scoring unit: argument state, dynamic multi-pooled instance
features, role-aware convolutional argument features, and the unit classifier."""

from __future__ import annotations

import numpy as np

from . import tensor as T
from .data import NO_ROLE
from .encoder import UNK_EVENT, clip_positions
from .tensor import Tensor


class RoleSpace:
    """Label ids: roles as listed (N/A last), plus the To-Predict marker."""

    def __init__(self, role_vocab):
        if role_vocab[-1] != NO_ROLE:
            raise ValueError("role vocabulary must end with N/A")
        self.roles = list(role_vocab)
        self.index = {r: i for i, r in enumerate(self.roles)}
        self.na_id = len(self.roles) - 1
        self.to_predict_id = len(self.roles)

    @property
    def num_labels(self):
        return len(self.roles)  # classifier output size (roles incl. N/A)

    @property
    def num_state_labels(self):
        return len(self.roles) + 1  # embedding rows incl. To-Predict

    def id_of(self, role):
        return self.index[role]

    def role_of(self, label_id):
        return self.roles[label_id]


def build_argument_state(entities, assignments, target_index, n_prime, space):
    """Per-token role-label ids over the marker-extended sentence.

    assignments: sequence of (entity_index, role_id) in assignment order;
    on overlap the later assignment wins. Target tokens always end up
    To-Predict; everything else defaults to N/A.
    """
    if not 0 <= target_index < len(entities):
        raise IndexError(f"target index {target_index} out of range")
    state = np.full(n_prime, space.na_id, dtype=np.int64)
    for idx, role_id in assignments:
        if idx == target_index:
            continue
        e = entities[idx]
        state[e.start:e.end] = role_id
    target = entities[target_index]
    state[target.start:target.end] = space.to_predict_id
    return state


def split_positions(p_t: int, p_e: int, n_prime: int):
    """1-based segment ends for dynamic multi-pooling.

    p_t/p_e are 0-based last-token indices of trigger and entity; the split
    order follows surface order. A trigger nested inside the entity span
    (p_t == p_e) degenerates to adjacent splits.
    """
    if p_t == p_e:
        a, b = p_t + 1, p_t + 2
    else:
        a, b = min(p_t, p_e) + 1, max(p_t, p_e) + 1
    if b > n_prime:
        raise ValueError(f"split {b} beyond sentence length {n_prime}")
    return a, b


def instance_feature(encoded, p_t: int, p_e: int) -> Tensor:
    a, b = split_positions(p_t, p_e, encoded.length)
    return T.segment_max(encoded.h, a, b)


class ArgumentExtractor:
    """Direction-owned CNN over word/position/event-type/role embeddings."""

    def __init__(self, store, prefix, config, space):
        self.store = store
        self.prefix = prefix
        self.config = config
        self.space = space

    @staticmethod
    def init_params(store, prefix, config, space, rng):
        def u(shape, scale=0.01):
            return rng.uniform(-scale, scale, size=shape)

        cfg = config
        store.add(f"{prefix}/pos_t", u((cfg.num_positions, cfg.pos_dim)))
        store.add(f"{prefix}/pos_e", u((cfg.num_positions, cfg.pos_dim)))
        store.add(f"{prefix}/evt", u((len(cfg.event_vocab), cfg.evt_dim)))
        store.add(f"{prefix}/role", u((space.num_state_labels, cfg.role_dim)))
        in_dim = cfg.word_dim + 2 * cfg.pos_dim + cfg.evt_dim + cfg.role_dim
        store.add(f"{prefix}/conv_w", u((3 * in_dim, cfg.conv_channels), 0.1))
        store.add(f"{prefix}/conv_b", np.zeros(cfg.conv_channels))

    def inputs(self, word_ids, p_t, p_e, evt_id, state):
        """Embedded token matrix; works on (L,) or batched (N, L) id arrays."""
        st, pre, cfg = self.store, self.prefix, self.config
        length = word_ids.shape[-1]
        offsets = np.arange(length)
        pos_t = clip_positions(offsets - np.asarray(p_t)[..., None], cfg.clip)
        pos_e = clip_positions(offsets - np.asarray(p_e)[..., None], cfg.clip)
        evt = np.broadcast_to(np.asarray(evt_id)[..., None], word_ids.shape)
        return T.concat([
            T.embedding(st["embed/word"], word_ids),
            T.embedding(st[f"{pre}/pos_t"], pos_t),
            T.embedding(st[f"{pre}/pos_e"], pos_e),
            T.embedding(st[f"{pre}/evt"], evt),
            T.embedding(st[f"{pre}/role"], state),
        ], axis=-1)

    def features(self, word_ids, p_t, p_e, evt_id, state) -> Tensor:
        """x_a for one instance: conv + tanh + max over time."""
        x = self.inputs(word_ids, p_t, p_e, evt_id, state)
        h = T.tanh(T.conv1d_same(
            x, self.store[f"{self.prefix}/conv_w"], self.store[f"{self.prefix}/conv_b"]
        ))
        return T.max_over_time(h)

    def features_batch(self, word_ids, p_t, p_e, evt_id, state, mask) -> Tensor:
        """Batched x_a: (N, L) id arrays with a validity mask -> (N, c_out)."""
        x = self.inputs(word_ids, p_t, p_e, evt_id, state)
        x = x * T.constant(mask[..., None].astype(x.data.dtype))
        h = T.tanh(T.conv1d_same(
            x, self.store[f"{self.prefix}/conv_w"], self.store[f"{self.prefix}/conv_b"]
        ))
        return T.masked_max(h, mask)


def init_unit_classifier(store, prefix, in_dim, num_labels, rng):
    store.add(f"{prefix}/unit_w", rng.uniform(-0.1, 0.1, size=(in_dim, num_labels)))
    store.add(f"{prefix}/unit_b", np.zeros(num_labels))


def unit_logits(store, prefix, x, x_a, dropout_rate=0.0, rng=None) -> Tensor:
    feats = T.dropout(T.concat([x, x_a], axis=-1), dropout_rate, rng)
    return T.dense(feats, store[f"{prefix}/unit_w"], store[f"{prefix}/unit_b"])


def event_id_of(config, event_type):
    return config.event_vocab.get(event_type, config.event_vocab[UNK_EVENT])
