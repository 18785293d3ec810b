"""Model assembly: parameter construction, bidirectional greedy decoding,
the fusing final classifier, teacher-forced passes, and the ablation variants."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .encoder import (
    EncoderConfig,
    ReferenceEncoder,
    append_event_marker,
    build_vocabs,
    init_encoder_params,
)
from .params import ParameterStore, load_checkpoint, save_checkpoint
from .unit import (
    ArgumentExtractor,
    RoleSpace,
    build_argument_state,
    event_id_of,
    init_unit_classifier,
    instance_feature,
    split_positions,
    unit_logits,
)

logger = logging.getLogger(__name__)

# variant -> list of (parameter prefix, direction); +1 decodes left-to-right
VARIANT_DECODERS = {
    "berd": (("fwd", +1), ("bwd", -1)),
    "forward": (("fwd", +1),),
    "backward": (("bwd", -1),),
    "forward-x2": (("fwd", +1), ("fwd2", +1)),
    "backward-x2": (("bwd", -1), ("bwd2", -1)),
    "no-recurrence": (("fwd", +1), ("bwd", -1)),
}


def argmax_label(distribution) -> int:
    """Index of the highest probability; ties go to the lowest index."""
    return int(np.argmax(np.asarray(distribution)))


@dataclass
class ModelConfig:
    d_h: int = 64
    word_dim: int = 100
    pos_dim: int = 5
    evt_dim: int = 5
    role_dim: int = 10
    conv_channels: int = 300
    layers: int = 2
    clip: int = 30
    variant: str = "berd"
    classifier_activation: str = "tanh"  # "tanh" or "none"

    def __post_init__(self):
        if self.variant not in VARIANT_DECODERS:
            raise ValueError(
                f"unknown variant {self.variant!r}; known: {sorted(VARIANT_DECODERS)}"
            )
        if self.classifier_activation not in ("tanh", "none"):
            raise ValueError("classifier_activation must be 'tanh' or 'none'")

    def encoder_config(self) -> EncoderConfig:
        return EncoderConfig(
            d_h=self.d_h, word_dim=self.word_dim, pos_dim=self.pos_dim,
            evt_dim=self.evt_dim, layers=self.layers, clip=self.clip,
        )


@dataclass
class PredictionRecord:
    entity_id: str
    x: np.ndarray
    dists: dict            # decoder prefix -> probability vector
    features: dict         # decoder prefix -> argument feature vector
    p_final: np.ndarray
    chosen: str


class Model:
    def __init__(self, corpus=None, config: ModelConfig = None, seed: int = 0,
                 dtype=np.float32, encoder=None, vocabs=None):
        self.config = config or ModelConfig()
        config = self.config
        self.enc_config = config.encoder_config()
        if vocabs is not None:
            self.enc_config.word_vocab = dict(vocabs["word"])
            self.enc_config.event_vocab = dict(vocabs["event"])
            self.space = RoleSpace(list(vocabs["roles"]))
        elif corpus is not None:
            build_vocabs(corpus, self.enc_config)
            self.space = RoleSpace(corpus.role_vocab)
        else:
            raise ValueError("need a corpus or explicit vocabularies")
        self.store = ParameterStore(dtype=dtype)
        self.decoders = VARIANT_DECODERS[config.variant]
        self.recurrent = config.variant != "no-recurrence"
        self.skipped_empty_events = 0
        self._init_params(np.random.default_rng(seed))
        self.encoder = encoder or ReferenceEncoder(self.enc_config, self.store)
        self._activation = config.classifier_activation == "tanh"

    # -- construction -----------------------------------------------------

    def _init_params(self, rng):
        cfg = self.config
        ecfg = self.enc_config
        init_encoder_params(self.store, ecfg, rng)
        unit_in = 3 * cfg.d_h + cfg.conv_channels
        for prefix, _ in self.decoders:
            ext_cfg = _ExtractorConfig(ecfg, cfg)
            ArgumentExtractor.init_params(self.store, prefix, ext_cfg, self.space, rng)
            init_unit_classifier(self.store, prefix, unit_in,
                                 self.space.num_labels, rng)
        final_in = 3 * cfg.d_h + len(self.decoders) * cfg.conv_channels
        self.store.add("final/w",
                       rng.uniform(-0.1, 0.1, size=(final_in, self.space.num_labels)))
        self.store.add("final/b", np.zeros(self.space.num_labels))

    def extractor(self, prefix) -> ArgumentExtractor:
        return ArgumentExtractor(self.store, prefix,
                                 _ExtractorConfig(self.enc_config, self.config),
                                 self.space)

    def num_parameters(self) -> int:
        return self.store.num_parameters()

    # -- per-event bookkeeping -------------------------------------------

    def event_context(self, rec, ev):
        tokens = append_event_marker(rec.sentence.tokens, ev.event_type,
                                     self.enc_config.event_vocab)
        wv = self.enc_config.word_vocab
        return _EventContext(
            rec=rec,
            ev=ev,
            word_ids=np.array([wv.get(t, wv["<UNK>"]) for t in tokens]),
            n_prime=len(tokens),
            p_t=ev.trigger_end - 1,
            evt_id=event_id_of(self.enc_config, ev.event_type),
            entities=rec.entities,
        )

    def gold_ids(self, rec, ev):
        return np.array([self.space.id_of(ev.role_of(e.id)) for e in rec.entities])

    def _instance_features(self, ctx, encoded):
        return [
            instance_feature(encoded, ctx.p_t, e.end - 1)
            for e in ctx.entities
        ]

    # -- decoding ---------------------------------------------------------

    def _decode_direction(self, ctx, xs, prefix, direction, context_mode,
                          gold=None):
        """One greedy pass; returns (dists, features, states) indexed by entity.

        context_mode: 'predicted' feeds this decoder's own argmax labels,
        'gold' feeds gold role ids, 'none' feeds nothing.
        """
        k = len(ctx.entities)
        ext = self.extractor(prefix)
        order = range(k) if direction > 0 else range(k - 1, -1, -1)
        assignments = []
        dists = [None] * k
        feats = [None] * k
        states = [None] * k
        for idx in order:
            state = build_argument_state(ctx.entities, assignments, idx,
                                         ctx.n_prime, self.space)
            states[idx] = state
            x_a = ext.features(ctx.word_ids, ctx.p_t, ctx.entities[idx].end - 1,
                               ctx.evt_id, state)
            logits = unit_logits(self.store, prefix, xs[idx], x_a)
            if self._activation:
                logits = T.tanh(logits)
            dists[idx] = T.softmax(logits.data)
            feats[idx] = x_a
            if context_mode == "predicted":
                assignments.append((idx, argmax_label(dists[idx])))
            elif context_mode == "gold":
                assignments.append((idx, int(gold[idx])))
        return dists, feats, states

    def classify_final(self, x, feats) -> np.ndarray:
        logits = T.dense(T.concat([x] + list(feats), axis=-1),
                         self.store["final/w"], self.store["final/b"])
        if self._activation:
            logits = T.tanh(logits)
        return T.softmax(logits.data)

    def predict(self, rec, ev, context: str = "predicted"):
        """Greedy bidirectional inference for one event.

        Returns (role_sequence, records): role_sequence is a list of
        (entity_id, role) in canonical entity order.
        """
        if len(rec.entities) == 0:
            self.skipped_empty_events += 1
            return [], []
        ctx = self.event_context(rec, ev)
        encoded = self.encoder.encode(rec.sentence, ev)
        xs = self._instance_features(ctx, encoded)
        gold = self.gold_ids(rec, ev) if context == "gold" else None
        mode = "none" if not self.recurrent else context
        per_decoder = [
            self._decode_direction(ctx, xs, prefix, direction, mode, gold)
            for prefix, direction in self.decoders
        ]
        roles = []
        records = []
        for i, ent in enumerate(ctx.entities):
            final = self.classify_final(xs[i], [pd[1][i] for pd in per_decoder])
            chosen = self.space.role_of(argmax_label(final))
            roles.append((ent.id, chosen))
            records.append(PredictionRecord(
                entity_id=ent.id,
                x=np.array(xs[i].data),
                dists={p: np.array(pd[0][i]) for (p, _), pd in
                       zip(self.decoders, per_decoder)},
                features={p: np.array(pd[1][i].data) for (p, _), pd in
                          zip(self.decoders, per_decoder)},
                p_final=final,
                chosen=chosen,
            ))
        return roles, records

    # -- teacher forcing --------------------------------------------------

    def teacher_states(self, ctx, gold, prefix_direction):
        """Gold-context argument states for every entity of one event."""
        _, direction = prefix_direction
        k = len(ctx.entities)
        states = []
        for i in range(k):
            if not self.recurrent:
                assignments = []
            elif direction > 0:
                assignments = [(j, int(gold[j])) for j in range(i)]
            else:
                assignments = [(j, int(gold[j])) for j in range(k - 1, i, -1)]
            states.append(build_argument_state(ctx.entities, assignments, i,
                                               ctx.n_prime, self.space))
        return states

    def teacher_forced_pass(self, rec, ev):
        """Per-entity distributions under gold context (single-instance path)."""
        ctx = self.event_context(rec, ev)
        gold = self.gold_ids(rec, ev)
        encoded = self.encoder.encode(rec.sentence, ev)
        xs = self._instance_features(ctx, encoded)
        out = []
        all_feats = []
        for prefix_direction in self.decoders:
            prefix, _ = prefix_direction
            ext = self.extractor(prefix)
            states = self.teacher_states(ctx, gold, prefix_direction)
            dists, feats = [], []
            for i, ent in enumerate(ctx.entities):
                x_a = ext.features(ctx.word_ids, ctx.p_t, ent.end - 1,
                                   ctx.evt_id, states[i])
                logits = unit_logits(self.store, prefix, xs[i], x_a)
                if self._activation:
                    logits = T.tanh(logits)
                dists.append(T.softmax(logits.data))
                feats.append(x_a)
            out.append(dists)
            all_feats.append(feats)
        finals = [
            self.classify_final(xs[i], [feats[i] for feats in all_feats])
            for i in range(len(ctx.entities))
        ]
        return out, finals

    # -- batched training loss -------------------------------------------

    def batch_loss(self, batch, alpha, direction_weights, dropout_rate=0.0,
                   rng=None):
        """Teacher-forced loss over a batch of (record, event) pairs.

        direction_weights has one weight per decoder (beta, gamma order).
        Returns (loss tensor, number of entity terms).
        """
        if len(direction_weights) != len(self.decoders):
            raise ValueError("one loss weight per decoder required")
        ctxs = []
        for rec, ev in batch:
            if len(rec.entities) == 0:
                self.skipped_empty_events += 1
                continue
            ctxs.append((self.event_context(rec, ev), rec, ev))
        if not ctxs:
            raise ValueError("batch contains no events with entities")

        h_batch, n_primes, _ = self.encoder.encode_batch(
            [(rec.sentence, ev) for _, rec, ev in ctxs])
        max_len = h_batch.data.shape[1]

        golds = []
        event_of_entity = []
        word_ids, p_t, p_e, evt, mask = [], [], [], [], []
        splits = []
        per_decoder_states = [[] for _ in self.decoders]
        for b_idx, (ctx, rec, ev) in enumerate(ctxs):
            gold = self.gold_ids(rec, ev)
            golds.extend(int(g) for g in gold)
            pad = max_len - ctx.n_prime
            w = np.pad(ctx.word_ids, (0, pad))
            m = np.zeros(max_len, dtype=bool)
            m[:ctx.n_prime] = True
            for d, prefix_direction in enumerate(self.decoders):
                for state in self.teacher_states(ctx, gold, prefix_direction):
                    per_decoder_states[d].append(
                        np.pad(state, (0, pad), constant_values=self.space.na_id))
            for ent in ctx.entities:
                event_of_entity.append(b_idx)
                word_ids.append(w)
                mask.append(m)
                p_t.append(ctx.p_t)
                p_e.append(ent.end - 1)
                evt.append(ctx.evt_id)
                splits.append(split_positions(ctx.p_t, ent.end - 1, ctx.n_prime)
                              + (ctx.n_prime,))

        word_ids = np.stack(word_ids)
        mask = np.stack(mask)
        p_t = np.array(p_t)
        p_e = np.array(p_e)
        evt = np.array(evt)
        golds = np.array(golds)

        # dynamic multi-pooling, vectorized over all entities in the batch
        h_ent = T.take(h_batch, np.array(event_of_entity))
        positions = np.arange(max_len)
        splits = np.array(splits)  # (N, 3): split_a, split_b, n_prime
        seg1 = positions < splits[:, :1]
        seg2 = (positions >= splits[:, :1]) & (positions < splits[:, 1:2])
        seg3 = (positions >= splits[:, 1:2]) & (positions < splits[:, 2:3])
        x_inst = T.concat([
            T.masked_max(h_ent, seg1),
            T.masked_max(h_ent, seg2),
            T.masked_max(h_ent, seg3),
        ], axis=-1)
        loss = None
        final_inputs = [x_inst]
        for d, ((prefix, _), weight) in enumerate(zip(self.decoders,
                                                      direction_weights)):
            ext = self.extractor(prefix)
            states = np.stack(per_decoder_states[d])
            x_a = ext.features_batch(word_ids, p_t, p_e, evt, states, mask)
            final_inputs.append(x_a)
            logits = unit_logits(self.store, prefix, x_inst, x_a,
                                 dropout_rate, rng)
            if self._activation:
                logits = T.tanh(logits)
            ce, _ = T.softmax_cross_entropy(logits, golds)
            term = ce * float(weight)
            loss = term if loss is None else loss + term

        feats = T.dropout(T.concat(final_inputs, axis=-1), dropout_rate, rng)
        final_logits = T.dense(feats, self.store["final/w"], self.store["final/b"])
        if self._activation:
            final_logits = T.tanh(final_logits)
        ce_final, _ = T.softmax_cross_entropy(final_logits, golds)
        loss = loss + ce_final * float(alpha)
        return loss, len(golds)

    def vocabs(self) -> dict:
        return {
            "word": self.enc_config.word_vocab,
            "event": self.enc_config.event_vocab,
            "roles": self.space.roles,
        }

    # -- persistence ------------------------------------------------------

    def save(self, path, config_echo: dict, seed: int):
        save_checkpoint(path, self.store, config_echo, seed)

    def load_values(self, path):
        values, meta = load_checkpoint(path)
        names = set(self.store.names())
        if names != set(values):
            missing = names - set(values)
            extra = set(values) - names
            raise ValueError(
                f"checkpoint/config mismatch: missing {sorted(missing)}, "
                f"unexpected {sorted(extra)}"
            )
        for name, arr in values.items():
            t = self.store[name]
            if t.data.shape != arr.shape:
                raise ValueError(
                    f"checkpoint/config mismatch: {name} has shape {arr.shape}, "
                    f"expected {t.data.shape}"
                )
            t.data[...] = arr.astype(t.data.dtype)
        return meta


class _ExtractorConfig:
    """Dimension view shared by the argument extractors."""

    def __init__(self, enc_config, model_config):
        self.word_dim = enc_config.word_dim
        self.pos_dim = enc_config.pos_dim
        self.evt_dim = enc_config.evt_dim
        self.role_dim = model_config.role_dim
        self.conv_channels = model_config.conv_channels
        self.clip = enc_config.clip
        self.num_positions = enc_config.num_positions
        self.event_vocab = enc_config.event_vocab


class _EventContext:
    __slots__ = ("rec", "ev", "word_ids", "n_prime", "p_t", "evt_id", "entities")

    def __init__(self, rec, ev, word_ids, n_prime, p_t, evt_id, entities):
        self.rec = rec
        self.ev = ev
        self.word_ids = word_ids
        self.n_prime = n_prime
        self.p_t = p_t
        self.evt_id = evt_id
        self.entities = entities


def predict_variant(model: Model, rec, ev, variant: str):
    """Greedy inference constrained to a named ablation variant."""
    if variant not in VARIANT_DECODERS:
        raise ValueError(f"unknown variant {variant!r}")
    if variant != model.config.variant:
        raise ValueError(
            f"model was built as {model.config.variant!r}, not {variant!r}"
        )
    roles, _ = model.predict(rec, ev)
    return roles
