from collections import Counter
from dataclasses import replace

import pytest

from berd.data import NO_ROLE, corpora_equal, save_corpus
from berd.synthetic import (
    GenerationError,
    GeneratorProfile,
    PROFILES,
    bayes_context_gap,
    compose_slots,
    constraint_set,
    generate_synthetic,
    get_profile,
    role_templates,
    trigger_token,
)


class TestProfiles:
    def test_presets_resolve(self):
        for name in PROFILES:
            assert isinstance(get_profile(name), GeneratorProfile)

    def test_unknown_profile(self):
        with pytest.raises(GenerationError, match="unknown profile"):
            get_profile("nope")

    def test_overrides(self):
        prof = get_profile("patterns", num_sentences=7)
        assert prof.num_sentences == 7

    def test_unsatisfiable_entity_count(self):
        with pytest.raises(GenerationError):
            generate_synthetic(replace(get_profile("patterns"),
                                       entity_count=(0, 4)), 0)

    def test_too_many_entities_for_max_tokens(self):
        with pytest.raises(GenerationError, match="max_tokens"):
            generate_synthetic(replace(get_profile("patterns"),
                                       entity_count=(30, 40)), 0)

    def test_unknown_unique_role(self):
        with pytest.raises(GenerationError, match="unique_roles"):
            generate_synthetic(replace(get_profile("patterns"),
                                       unique_roles=("Nonesuch",)), 0)


class TestDeterminism:
    def test_same_seed_byte_identical(self, tmp_path):
        prof = get_profile("patterns", num_sentences=40)
        a = generate_synthetic(prof, 7)
        b = generate_synthetic(prof, 7)
        assert corpora_equal(a, b)
        pa, pb = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        save_corpus(a, pa)
        save_corpus(b, pb)
        assert pa.read_bytes() == pb.read_bytes()

    def test_different_seeds_differ(self):
        prof = get_profile("patterns", num_sentences=40)
        assert not corpora_equal(generate_synthetic(prof, 1),
                                 generate_synthetic(prof, 2))


@pytest.fixture(scope="module")
def corpus():
    return generate_synthetic(get_profile("patterns", num_sentences=150), 11)


class TestStructure:
    def test_entity_counts_in_range(self, corpus):
        lo, hi = get_profile("patterns").entity_count
        for rec, _ in corpus.events():
            core = sum(e.end - e.start == 1 for e in rec.entities)
            assert lo <= core <= hi + 1  # overlap adds one wide mention

    def test_trigger_token_matches_event_type(self, corpus):
        for rec, ev in corpus.events():
            tok = rec.sentence.tokens[ev.trigger_start]
            assert tok == trigger_token(ev.event_type)

    def test_unique_role_never_repeats(self, corpus):
        for rec, ev in corpus.events():
            counts = Counter(ev.role_of(e.id) for e in rec.entities)
            assert counts.get("Destination", 0) <= 1

    def test_entities_on_both_sides_of_trigger(self, corpus):
        for rec, ev in corpus.events():
            if len(rec.entities) < 2:
                continue
            left = sum(e.start < ev.trigger_start for e in rec.entities)
            right = sum(e.start > ev.trigger_start for e in rec.entities)
            assert left >= 1 and right >= 1

    def test_roles_follow_side_templates(self, corpus):
        prof = get_profile("patterns")
        templates = role_templates(prof)
        for rec, ev in corpus.events():
            cores = [e for e in rec.entities if e.end - e.start == 1]
            wides = {e.start: e for e in rec.entities if e.end - e.start == 2}
            golds = []
            for e in cores:
                role = ev.role_of(e.id)
                if role == NO_ROLE and e.start in wides:
                    role = ev.role_of(wides[e.start].id)
                golds.append(role)
            g = sum(e.start < ev.trigger_start for e in cores)
            ok = False
            for zl in (0, 1):
                for zr in (0, 1):
                    slots = compose_slots(templates, prof, ev.event_type,
                                          zl, zr, g, len(golds))
                    if all(slots[i] == golds[i] for i in range(len(golds))):
                        ok = True
            assert ok, rec.sentence.id

    def test_overlap_rate_zero_means_no_overlaps(self):
        prof = get_profile("patterns", num_sentences=60, overlap_rate=0.0)
        corpus = generate_synthetic(prof, 3)
        for rec, _ in corpus.events():
            assert all(e.end - e.start == 1 for e in rec.entities)

    def test_overlap_clusters_have_single_role_holder(self, corpus):
        for rec, ev in corpus.events():
            for wide in rec.entities:
                if wide.end - wide.start != 2:
                    continue
                nested = [e for e in rec.entities
                          if e is not wide and e.start >= wide.start
                          and e.end <= wide.end]
                assert len(nested) == 1
                holders = [e for e in (wide, nested[0])
                           if ev.role_of(e.id) != NO_ROLE]
                assert len(holders) <= 1

    def test_vocab_derived_from_records(self, corpus):
        prof = get_profile("patterns")
        assert corpus.role_vocab[-1] == NO_ROLE
        assert set(corpus.role_vocab[:-1]) <= set(prof.roles)
        assert set(corpus.event_type_vocab) <= set(prof.event_types)


class TestValidationSweep:
    def test_many_seeds_generate_cleanly(self):
        prof = get_profile("patterns", num_sentences=5)
        for seed in range(100):
            corpus = generate_synthetic(prof, seed)
            assert corpus.num_events() == 5


class TestConstraints:
    def test_constraint_set_covers_event_types(self):
        prof = get_profile("patterns")
        cs = constraint_set(prof)
        assert {c["event_type"] for c in cs} == set(prof.event_types)
        assert all(c["unique_roles"] == ["Destination"] for c in cs)

    def test_gold_labels_never_violate(self):
        from berd.evaluation import constraint_violation_rate, gold_predictions

        prof = get_profile("patterns", num_sentences=80)
        corpus = generate_synthetic(prof, 5)
        rate = constraint_violation_rate(
            gold_predictions(corpus), constraint_set(prof), corpus)
        assert rate == 0.0


class TestBayesOracle:
    def test_context_beats_lexical(self):
        prof = get_profile("patterns", num_sentences=200, overlap_rate=0.0)
        corpus = generate_synthetic(prof, 9)
        lex, ctx = bayes_context_gap(corpus, prof)
        assert 0.0 < lex < ctx <= 1.0

    def test_full_cues_close_the_gap(self):
        prof = get_profile("patterns", num_sentences=100, overlap_rate=0.0,
                           cue_strength=1.0, distractor_rate=0.0)
        corpus = generate_synthetic(prof, 9)
        lex, ctx = bayes_context_gap(corpus, prof)
        assert lex == pytest.approx(1.0)
        assert ctx == pytest.approx(1.0)
