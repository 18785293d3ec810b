"""Teacher-forced joint training of encoder, decoders, and final classifier."""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from .evaluation import predict_corpus, score
from .model import Model, ModelConfig
from .params import adam_step

logger = logging.getLogger(__name__)


class TrainingDiverged(RuntimeError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


@dataclass
class TrainingConfig:
    # loss weights for final / forward / backward classifier terms
    alpha: float = 1.0
    beta: float = 0.5
    gamma: float = 0.5
    epochs: int = 40
    batch_size: int = 30
    # reference-encoder default; 6e-5 suits a pretrained encoder instead
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.01
    warmup_frac: float = 0.1
    dropout: float = 0.5
    seed: int = 0
    variant: str = "berd"
    dev_every: int = 1
    # model dimensions
    d_h: int = 64
    word_dim: int = 100
    pos_dim: int = 5
    evt_dim: int = 5
    role_dim: int = 10
    conv_channels: int = 300
    layers: int = 2
    clip: int = 30
    classifier_activation: str = "tanh"

    def __post_init__(self):
        if min(self.alpha, self.beta, self.gamma) < 0:
            raise ValueError("loss weights must be non-negative")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")

    def model_config(self) -> ModelConfig:
        return ModelConfig(
            d_h=self.d_h, word_dim=self.word_dim, pos_dim=self.pos_dim,
            evt_dim=self.evt_dim, role_dim=self.role_dim,
            conv_channels=self.conv_channels, layers=self.layers,
            clip=self.clip, variant=self.variant,
            classifier_activation=self.classifier_activation,
        )

    def direction_weights(self, num_decoders: int):
        return ([self.beta], [self.beta, self.gamma])[num_decoders - 1]

    @classmethod
    def from_dict(cls, data: dict) -> "TrainingConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_json(cls, path) -> "TrainingConfig":
        with open(path, encoding="utf-8") as f:
            return cls.from_dict(json.load(f))


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    dev_p: float
    dev_r: float
    dev_f1: float


HISTORY_HEADER = ("epoch", "train_loss", "dev_P", "dev_R", "dev_F1")


def write_history(history, path):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(HISTORY_HEADER)
        for row in history:
            w.writerow([
                row.epoch, f"{row.train_loss:.6f}", f"{row.dev_p:.6f}",
                f"{row.dev_r:.6f}", f"{row.dev_f1:.6f}",
            ])


def train(train_corpus, dev_corpus, config: TrainingConfig):
    """Epoch loop with shuffled batches, teacher forcing, and Adam.

    Returns (model, history); the model carries the best-dev parameters
    (final parameters when no dev corpus is given).
    """
    model = Model(train_corpus, config.model_config(), seed=config.seed)
    rng = np.random.default_rng(config.seed + 1)
    events = [(rec, ev) for rec, ev in train_corpus.events() if rec.entities]
    skipped = train_corpus.num_events() - len(events)
    if skipped:
        logger.info("skipping %d events with zero entities", skipped)
    if not events:
        raise ValueError("training corpus has no events with entities")

    batches_per_epoch = math.ceil(len(events) / config.batch_size)
    total_steps = config.epochs * batches_per_epoch
    warmup_steps = int(config.warmup_frac * total_steps)
    weights = config.direction_weights(len(model.decoders))

    history = []
    best_f1 = -1.0
    best_store = None
    order = np.arange(len(events))
    for epoch in range(1, config.epochs + 1):
        rng.shuffle(order)
        epoch_loss = 0.0
        n_terms = 0
        for b in range(batches_per_epoch):
            idx = order[b * config.batch_size:(b + 1) * config.batch_size]
            batch = [events[i] for i in idx]
            model.store.zero_grad()
            loss, n = model.batch_loss(
                batch, config.alpha, weights,
                dropout_rate=config.dropout, rng=rng,
            )
            loss_val = float(loss.data)
            if not np.isfinite(loss_val):
                raise TrainingDiverged(
                    f"non-finite loss at epoch {epoch} batch {b}",
                    diagnostics=_diagnostics(model, batch, epoch, b),
                )
            loss.backward()
            adam_step(
                model.store, lr=config.lr, beta1=config.beta1,
                beta2=config.beta2, eps=config.eps,
                weight_decay=config.weight_decay, warmup_steps=warmup_steps,
            )
            epoch_loss += loss_val * n
            n_terms += n

        stats = EpochStats(epoch, epoch_loss / n_terms, 0.0, 0.0, 0.0)
        if dev_corpus is not None and epoch % config.dev_every == 0:
            preds = predict_corpus(model, dev_corpus)
            report = score(preds, dev_corpus)
            stats.dev_p, stats.dev_r, stats.dev_f1 = (
                report.precision, report.recall, report.f1)
            if report.f1 > best_f1:
                best_f1 = report.f1
                best_store = model.store.clone()
        history.append(stats)

    if best_store is not None:
        model.store.load_values(best_store)
    return model, history


def save_model(model: Model, config: TrainingConfig, path):
    echo = {"training": asdict(config), "vocabs": model.vocabs()}
    model.save(path, echo, config.seed)


def load_model(path) -> tuple[Model, TrainingConfig]:
    from .params import load_checkpoint

    _, meta = load_checkpoint(path)
    config = TrainingConfig.from_dict(meta["config"]["training"])
    model = Model(config=config.model_config(), vocabs=meta["config"]["vocabs"])
    model.load_values(path)
    return model, config


def _diagnostics(model, batch, epoch, b):
    grad_norms = {}
    for name, t in model.store.items():
        if t.grad is not None:
            grad_norms[name] = float(np.linalg.norm(t.grad))
    return {
        "epoch": epoch,
        "batch": b,
        "sentence_ids": [rec.sentence.id for rec, _ in batch],
        "grad_norms": grad_norms,
    }
