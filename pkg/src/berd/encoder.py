"""Sentence encoders: event-type marker, trainable reference encoder, and a
precomputed-embedding adapter."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .params import ParameterStore
from .tensor import Tensor

logger = logging.getLogger(__name__)

UNK = "<UNK>"
UNK_EVENT = "UNK_EVENT"
MARKER = "#"
MARKER_LEN = 3


@dataclass
class EncoderConfig:
    d_h: int = 64
    word_dim: int = 100
    pos_dim: int = 5
    evt_dim: int = 5
    layers: int = 2
    clip: int = 30  # relative positions clipped to [-clip, clip]
    word_vocab: dict = field(default_factory=dict)
    event_vocab: dict = field(default_factory=dict)

    def __post_init__(self):
        if min(self.d_h, self.word_dim, self.pos_dim, self.evt_dim) <= 0:
            raise ValueError("encoder dimensions must be positive")

    @property
    def num_positions(self):
        return 2 * self.clip + 1


def build_vocabs(corpus, config: EncoderConfig):
    """Close word/event vocabularies over the corpus plus marker tokens."""
    words = {UNK: 0, MARKER: 1}
    events = {UNK_EVENT: 0}
    for rec in corpus.records:
        for tok in rec.sentence.tokens:
            words.setdefault(tok, len(words))
        for ev in rec.events:
            events.setdefault(ev.event_type, len(events))
    for et in corpus.event_type_vocab:
        events.setdefault(et, len(events))
        words.setdefault(et, len(words))  # marker phrase embeds the type token
    config.word_vocab = words
    config.event_vocab = events


def append_event_marker(tokens, event_type, event_vocab=None):
    """Append the 3-token event-type phrase `# TYPE #` at the sentence end."""
    if event_vocab is not None and event_type not in event_vocab:
        logger.warning("unknown event type %r; using %s", event_type, UNK_EVENT)
        event_type = UNK_EVENT
    return list(tokens) + [MARKER, event_type, MARKER]


@dataclass(frozen=True)
class EncodedSentence:
    h: Tensor           # (n', d_h)
    marker_start: int   # marker tokens occupy [marker_start, n')

    @property
    def length(self):
        return self.h.data.shape[0]


def clip_positions(offsets, clip):
    return np.clip(offsets, -clip, clip) + clip


def init_encoder_params(store: ParameterStore, config: EncoderConfig, rng):
    def u(shape, scale=0.01):
        return rng.uniform(-scale, scale, size=shape)

    in_dim = config.word_dim + 2 * config.pos_dim + config.evt_dim
    store.add("embed/word", u((len(config.word_vocab), config.word_dim)))
    store.add("enc/pos_a", u((config.num_positions, config.pos_dim)))
    store.add("enc/pos_b", u((config.num_positions, config.pos_dim)))
    store.add("enc/evt", u((len(config.event_vocab), config.evt_dim)))
    store.add("enc/proj_w", u((in_dim, config.d_h), 0.1))
    store.add("enc/proj_b", np.zeros(config.d_h))
    for layer in range(config.layers):
        store.add(f"enc/conv{layer}_w", u((3 * config.d_h, config.d_h), 0.1))
        store.add(f"enc/conv{layer}_b", np.zeros(config.d_h))


def load_pretrained_words(store: ParameterStore, config: EncoderConfig, path):
    """Optional text-format vector file: `token v1 v2 ...` per line."""
    table = store["embed/word"].data
    loaded = 0
    with open(path, encoding="utf-8") as f:
        for line in f:
            parts = line.rstrip("\n").split(" ")
            if len(parts) != config.word_dim + 1:
                continue
            idx = config.word_vocab.get(parts[0])
            if idx is not None:
                table[idx] = np.asarray(parts[1:], dtype=table.dtype)
                loaded += 1
    return loaded


class ReferenceEncoder:
    """Trainable encoder: embedding concat, projection, residual conv blocks."""

    def __init__(self, config: EncoderConfig, store: ParameterStore):
        self.config = config
        self.store = store

    def token_ids(self, tokens_with_marker):
        wv = self.config.word_vocab
        return np.array([wv.get(t, wv[UNK]) for t in tokens_with_marker])

    def encode(self, sentence, event) -> EncodedSentence:
        cfg = self.config
        tokens = append_event_marker(sentence.tokens, event.event_type, cfg.event_vocab)
        n_prime = len(tokens)
        ids = self.token_ids(tokens)
        p_t = event.trigger_end - 1
        offsets = np.arange(n_prime) - p_t
        pos = clip_positions(offsets, cfg.clip)
        evt_id = cfg.event_vocab.get(event.event_type, cfg.event_vocab[UNK_EVENT])
        st = self.store
        x = T.concat([
            T.embedding(st["embed/word"], ids),
            T.embedding(st["enc/pos_a"], pos),
            T.embedding(st["enc/pos_b"], pos),
            T.embedding(st["enc/evt"], np.full(n_prime, evt_id)),
        ], axis=-1)
        h = T.dense(x, st["enc/proj_w"], st["enc/proj_b"])
        for layer in range(cfg.layers):
            h = h + T.tanh(
                T.conv1d_same(h, st[f"enc/conv{layer}_w"], st[f"enc/conv{layer}_b"])
            )
        return EncodedSentence(h=h, marker_start=n_prime - MARKER_LEN)

    def encode_batch(self, pairs):
        """Encode (sentence, event) pairs into one padded (B, L, d_h) tensor.

        Returns (h, n_primes, mask); padded rows are forced to zero after
        every stage so boundary convolutions match the per-sentence path.
        """
        cfg = self.config
        wv = cfg.word_vocab
        ids_list, pos_list, evt_list, n_primes = [], [], [], []
        for sentence, event in pairs:
            tokens = append_event_marker(sentence.tokens, event.event_type,
                                         cfg.event_vocab)
            n_primes.append(len(tokens))
            ids_list.append(np.array([wv.get(t, wv[UNK]) for t in tokens]))
            p_t = event.trigger_end - 1
            pos_list.append(clip_positions(np.arange(len(tokens)) - p_t, cfg.clip))
            evt_list.append(cfg.event_vocab.get(event.event_type,
                                                cfg.event_vocab[UNK_EVENT]))
        max_len = max(n_primes)
        b = len(pairs)
        ids = np.zeros((b, max_len), dtype=np.int64)
        pos = np.zeros((b, max_len), dtype=np.int64)
        mask = np.zeros((b, max_len), dtype=bool)
        for i, n in enumerate(n_primes):
            ids[i, :n] = ids_list[i]
            pos[i, :n] = pos_list[i]
            mask[i, :n] = True
        evt = np.broadcast_to(np.array(evt_list)[:, None], (b, max_len))

        st = self.store
        keep = T.constant(mask[..., None].astype(st.dtype))
        x = T.concat([
            T.embedding(st["embed/word"], ids),
            T.embedding(st["enc/pos_a"], pos),
            T.embedding(st["enc/pos_b"], pos),
            T.embedding(st["enc/evt"], evt),
        ], axis=-1) * keep
        h = T.dense(x, st["enc/proj_w"], st["enc/proj_b"]) * keep
        for layer in range(cfg.layers):
            h = (h + T.tanh(T.conv1d_same(
                h, st[f"enc/conv{layer}_w"], st[f"enc/conv{layer}_b"]))) * keep
        return h, n_primes, mask


class PrecomputedEncoder:
    """Looks up stored hidden matrices by sentence id (npz container)."""

    def __init__(self, path, d_h: int):
        self.d_h = d_h
        self._table = {}
        with np.load(path) as z:
            for key in z.files:
                arr = np.asarray(z[key], dtype=np.float32)
                if arr.ndim != 2 or arr.shape[1] != d_h:
                    raise ValueError(
                        f"precomputed entry {key!r} has shape {arr.shape}, "
                        f"expected (n', {d_h})"
                    )
                self._table[key] = arr

    def encode(self, sentence, event) -> EncodedSentence:
        if sentence.id not in self._table:
            raise KeyError(f"no precomputed encoding for sentence id {sentence.id!r}")
        h = self._table[sentence.id]
        return EncodedSentence(h=Tensor(h), marker_start=h.shape[0] - MARKER_LEN)

    def encode_batch(self, pairs):
        arrays = []
        for sentence, _ in pairs:
            if sentence.id not in self._table:
                raise KeyError(
                    f"no precomputed encoding for sentence id {sentence.id!r}")
            arrays.append(self._table[sentence.id])
        n_primes = [a.shape[0] for a in arrays]
        max_len = max(n_primes)
        h = np.zeros((len(arrays), max_len, self.d_h), dtype=np.float32)
        mask = np.zeros((len(arrays), max_len), dtype=bool)
        for i, a in enumerate(arrays):
            h[i, :a.shape[0]] = a
            mask[i, :a.shape[0]] = True
        return Tensor(h), n_primes, mask


def save_precomputed(path, mapping):
    """Write a sentence-id -> (n', d_h) array container."""
    np.savez(path, **{k: np.asarray(v, dtype="<f4") for k, v in mapping.items()})
