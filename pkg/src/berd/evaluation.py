"""Scoring, analysis slices, constraint diagnostics, and the oracle-role
comparison."""

from __future__ import annotations

import json
from dataclasses import dataclass

from .data import NO_ROLE, bucket_by_entity_count, split_by_overlap


class ScoringError(ValueError):
    pass


@dataclass(frozen=True)
class ScoreReport:
    tp: int
    fp: int
    fn: int

    @property
    def precision(self):
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    @property
    def recall(self):
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    @property
    def f1(self):
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r else 0.0

    def as_dict(self):
        return {
            "TP": self.tp, "FP": self.fp, "FN": self.fn,
            "P": self.precision, "R": self.recall, "F1": self.f1,
        }


def event_key(rec, event_index):
    return (rec.sentence.id, event_index)


def predict_corpus(model, corpus, context="predicted"):
    """Run inference over every event; returns {event key: {entity id: role}}."""
    preds = {}
    for rec in corpus.records:
        for i, ev in enumerate(rec.events):
            roles, _ = model.predict(rec, ev, context=context)
            preds[event_key(rec, i)] = dict(roles)
    return preds


def _score_pairs(pairs, predictions):
    """pairs: iterable of (rec, event_index, event)."""
    tp = fp = fn = 0
    for rec, i, ev in pairs:
        pred = predictions.get(event_key(rec, i), {})
        known = {e.id for e in rec.entities}
        unknown = set(pred) - known
        if unknown:
            raise ScoringError(
                f"prediction for unknown entity ids {sorted(unknown)} "
                f"in event {event_key(rec, i)}"
            )
        for ent in rec.entities:
            gold = ev.role_of(ent.id)
            guess = pred.get(ent.id, NO_ROLE)
            if guess != NO_ROLE and guess == gold:
                tp += 1
            else:
                if guess != NO_ROLE:
                    fp += 1
                if gold != NO_ROLE:
                    fn += 1
    return ScoreReport(tp=tp, fp=fp, fn=fn)


def _all_pairs(corpus):
    for rec in corpus.records:
        for i, ev in enumerate(rec.events):
            yield rec, i, ev


def score(predictions, corpus) -> ScoreReport:
    """Argument-classification P/R/F1 with exact span (entity) matching."""
    return _score_pairs(_all_pairs(corpus), predictions)


def sliced_eval(model, corpus, predictions=None):
    """Overall report plus entity-count buckets and the overlap split."""
    if predictions is None:
        predictions = predict_corpus(model, corpus)

    def indexed(subset):
        # subset holds (rec, ev); recover event indices within each record
        out = []
        for rec, ev in subset:
            for i, candidate in enumerate(rec.events):
                if candidate is ev:
                    out.append((rec, i, ev))
                    break
        return out

    buckets, skipped = bucket_by_entity_count(corpus)
    subset_o, subset_n = split_by_overlap(corpus)
    return {
        "overall": score(predictions, corpus),
        "buckets": [_score_pairs(indexed(b), predictions) for b in buckets],
        "overlap": _score_pairs(indexed(subset_o), predictions),
        "no_overlap": _score_pairs(indexed(subset_n), predictions),
        "skipped_empty": skipped,
    }


def load_constraints(path):
    with open(path, encoding="utf-8") as f:
        data = json.load(f)
    if not isinstance(data, list):
        raise ValueError("constraint set must be a JSON list")
    return data


def constraint_violation_rate(predictions, constraints, corpus) -> float:
    """Fraction of events (with >= 1 entity) predicting a unique role twice."""
    unique_by_type = {}
    for c in constraints:
        unique_by_type.setdefault(c["event_type"], set()).update(c["unique_roles"])
    total = violated = 0
    for rec, i, ev in _all_pairs(corpus):
        if not rec.entities:
            continue
        total += 1
        uniques = unique_by_type.get(ev.event_type, set())
        if not uniques:
            continue
        counts = {}
        for role in predictions.get(event_key(rec, i), {}).values():
            if role in uniques:
                counts[role] = counts.get(role, 0) + 1
        if any(v > 1 for v in counts.values()):
            violated += 1
    return violated / total if total else 0.0


def oracle_role_eval(model, corpus):
    """Score normal inference against inference with gold contextual roles."""
    predicted = score(predict_corpus(model, corpus, context="predicted"), corpus)
    gold_ctx = score(predict_corpus(model, corpus, context="gold"), corpus)
    return predicted, gold_ctx


def gold_predictions(corpus):
    """Gold labels in prediction form (for diagnostics on generated data)."""
    return {
        event_key(rec, i): {e.id: ev.role_of(e.id) for e in rec.entities
                            if ev.role_of(e.id) != NO_ROLE}
        for rec, i, ev in _all_pairs(corpus)
    }


def write_predictions(model, corpus, path):
    """Prediction JSONL: one line per event with per-entity role probabilities.

    p_forward / p_backward are the chosen role's probability under the first
    and second decoder respectively (null when the variant lacks one).
    """
    with open(path, "w", encoding="utf-8") as f:
        for rec in corpus.records:
            for i, ev in enumerate(rec.events):
                _, records = model.predict(rec, ev)
                roles = []
                for r in records:
                    chosen_id = model.space.id_of(r.chosen)
                    dists = list(r.dists.values())
                    roles.append({
                        "entity_id": r.entity_id,
                        "role": r.chosen,
                        "p_forward": float(dists[0][chosen_id]) if dists else None,
                        "p_backward": (float(dists[1][chosen_id])
                                       if len(dists) > 1 else None),
                        "p_final": float(r.p_final[chosen_id]),
                    })
                f.write(json.dumps({
                    "sentence_id": rec.sentence.id,
                    "event_index": i,
                    "roles": roles,
                }) + "\n")


def format_report(report: ScoreReport, label="overall") -> str:
    d = report.as_dict()
    return (f"{label:>12}  P={d['P']:.4f} R={d['R']:.4f} F1={d['F1']:.4f}  "
            f"TP={d['TP']} FP={d['FP']} FN={d['FN']}")
