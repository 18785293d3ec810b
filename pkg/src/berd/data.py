"""Corpus schema, JSONL ingestion, entity ordering, and analysis splits."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

logger = logging.getLogger(__name__)

NO_ROLE = "N/A"

_SENTENCE_KEYS = {"id", "tokens", "entities", "events"}
_ENTITY_KEYS = {"id", "start", "end", "type"}
_EVENT_KEYS = {"trigger_start", "trigger_end", "type", "roles"}


class CorpusError(ValueError):
    pass


@dataclass(frozen=True)
class EntityMention:
    id: str
    start: int  # inclusive, 0-based
    end: int    # exclusive
    entity_type: str = "ENT"


@dataclass(frozen=True)
class EventInstance:
    trigger_start: int
    trigger_end: int
    event_type: str
    roles: dict = field(default_factory=dict)  # entity id -> role; absent => N/A

    def role_of(self, entity_id: str) -> str:
        return self.roles.get(entity_id, NO_ROLE)


@dataclass(frozen=True)
class Sentence:
    id: str
    tokens: tuple

    def __len__(self):
        return len(self.tokens)


@dataclass(frozen=True)
class SentenceRecord:
    sentence: Sentence
    entities: tuple  # of EntityMention, in canonical order
    events: tuple    # of EventInstance


@dataclass
class Corpus:
    records: list
    role_vocab: list
    event_type_vocab: list
    entity_type_vocab: list

    def events(self):
        """Yield (record, event) pairs in corpus order."""
        for rec in self.records:
            for ev in rec.events:
                yield rec, ev

    def num_events(self):
        return sum(len(r.events) for r in self.records)


def order_entities(sentence: Sentence, entities) -> list:
    """Canonical order: (start, end, id), all ascending. Total and stable."""
    ents = list(entities)
    for e in ents:
        if not (0 <= e.start < e.end <= len(sentence)):
            raise CorpusError(
                f"entity {e.id!r} span [{e.start},{e.end}) outside sentence "
                f"{sentence.id!r} of length {len(sentence)}"
            )
    return sorted(ents, key=lambda e: (e.start, e.end, e.id))


def _validate_record(rec: SentenceRecord):
    n = len(rec.sentence)
    ids = set()
    for e in rec.entities:
        if not (0 <= e.start < e.end <= n):
            raise CorpusError(
                f"record {rec.sentence.id!r}: entity {e.id!r} span "
                f"[{e.start},{e.end}) out of range for length {n}"
            )
        if e.id in ids:
            raise CorpusError(f"record {rec.sentence.id!r}: duplicate entity id {e.id!r}")
        ids.add(e.id)
    for ev in rec.events:
        if not (0 <= ev.trigger_start < ev.trigger_end <= n):
            raise CorpusError(
                f"record {rec.sentence.id!r}: trigger span "
                f"[{ev.trigger_start},{ev.trigger_end}) out of range"
            )
        for eid in ev.roles:
            if eid not in ids:
                raise CorpusError(
                    f"record {rec.sentence.id!r}: role references unknown entity {eid!r}"
                )


def _parse_sentence(obj: dict, line_no: int, strict: bool) -> SentenceRecord:
    def check_keys(d, allowed, what):
        extra = set(d) - allowed
        if extra:
            msg = f"line {line_no}: unknown {what} fields {sorted(extra)}"
            if strict:
                raise CorpusError(msg)
            logger.warning("%s (ignored)", msg)

    check_keys(obj, _SENTENCE_KEYS, "sentence")
    tokens = obj.get("tokens")
    if not tokens or not all(isinstance(t, str) for t in tokens):
        raise CorpusError(f"line {line_no}: tokens must be a non-empty list of strings")
    sent = Sentence(id=str(obj["id"]), tokens=tuple(tokens))
    entities = []
    for ent in obj.get("entities", []):
        check_keys(ent, _ENTITY_KEYS, "entity")
        entities.append(EntityMention(
            id=str(ent["id"]), start=int(ent["start"]), end=int(ent["end"]),
            entity_type=str(ent.get("type", "ENT")),
        ))
    events = []
    for ev in obj.get("events", []):
        check_keys(ev, _EVENT_KEYS, "event")
        events.append(EventInstance(
            trigger_start=int(ev["trigger_start"]),
            trigger_end=int(ev["trigger_end"]),
            event_type=str(ev["type"]),
            roles={str(k): str(v) for k, v in ev.get("roles", {}).items()},
        ))
    rec = SentenceRecord(
        sentence=sent,
        entities=tuple(order_entities(sent, entities)),
        events=tuple(events),
    )
    _validate_record(rec)
    return rec


def build_corpus(records) -> Corpus:
    """Close vocabularies over the given records; N/A is always a role."""
    roles, event_types, entity_types = set(), set(), set()
    for rec in records:
        for e in rec.entities:
            entity_types.add(e.entity_type)
        for ev in rec.events:
            event_types.add(ev.event_type)
            roles.update(ev.roles.values())
    roles.discard(NO_ROLE)
    return Corpus(
        records=list(records),
        role_vocab=sorted(roles) + [NO_ROLE],
        event_type_vocab=sorted(event_types),
        entity_type_vocab=sorted(entity_types),
    )


def load_corpus(path, strict: bool = True) -> Corpus:
    records = []
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"line {line_no}: malformed JSON: {exc}") from exc
            records.append(_parse_sentence(obj, line_no, strict))
    return build_corpus(records)


def save_corpus(corpus: Corpus, path):
    with open(path, "w", encoding="utf-8") as f:
        for rec in corpus.records:
            obj = {
                "id": rec.sentence.id,
                "tokens": list(rec.sentence.tokens),
                "entities": [
                    {"id": e.id, "start": e.start, "end": e.end, "type": e.entity_type}
                    for e in rec.entities
                ],
                "events": [
                    {
                        "trigger_start": ev.trigger_start,
                        "trigger_end": ev.trigger_end,
                        "type": ev.event_type,
                        "roles": dict(ev.roles),
                    }
                    for ev in rec.events
                ],
            }
            f.write(json.dumps(obj, ensure_ascii=False) + "\n")


ENTITY_COUNT_BUCKETS = ((1, 3), (4, 6), (7, 9), (10, None))


def bucket_by_entity_count(corpus: Corpus):
    """Partition events into the four entity-count buckets.

    Returns (buckets, skipped) where buckets is a list of four lists of
    (record, event) pairs and skipped counts zero-entity events.
    """
    buckets = [[] for _ in ENTITY_COUNT_BUCKETS]
    skipped = 0
    for rec, ev in corpus.events():
        k = len(rec.entities)
        if k == 0:
            skipped += 1
            continue
        for i, (lo, hi) in enumerate(ENTITY_COUNT_BUCKETS):
            if k >= lo and (hi is None or k <= hi):
                buckets[i].append((rec, ev))
                break
    return buckets, skipped


def has_overlapping_entities(rec: SentenceRecord) -> bool:
    spans = sorted((e.start, e.end) for e in rec.entities)
    for (s1, e1), (s2, _) in zip(spans, spans[1:]):
        if s2 < e1:  # share at least one token index (ends are exclusive)
            return True
    return False


def split_by_overlap(corpus: Corpus):
    """(subset_O, subset_N): events whose sentence has intersecting spans vs not."""
    subset_o, subset_n = [], []
    for rec, ev in corpus.events():
        (subset_o if has_overlapping_entities(rec) else subset_n).append((rec, ev))
    return subset_o, subset_n


def corpora_equal(a: Corpus, b: Corpus) -> bool:
    return (
        a.records == b.records
        and a.role_vocab == b.role_vocab
        and a.event_type_vocab == b.event_type_vocab
        and a.entity_type_vocab == b.entity_type_vocab
    )
