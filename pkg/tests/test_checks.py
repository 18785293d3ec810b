import pytest

from berd.checks import (
    TOLERANCE,
    end_to_end_check,
    kernel_suite,
    run_all,
    toy_event_corpus,
)

KERNEL_OPS = {
    "segment_max", "conv1d_same", "max_over_time", "dense",
    "softmax", "cross_entropy", "masked_max", "embedding",
}


class TestKernelSuite:
    def test_all_ops_under_tolerance(self):
        results = kernel_suite(num_instances=20, seed=0)
        assert set(results) == KERNEL_OPS
        for name, err in results.items():
            assert err < TOLERANCE, name

    def test_deterministic_given_seed(self):
        assert kernel_suite(num_instances=5, seed=3) == \
            kernel_suite(num_instances=5, seed=3)


class TestEndToEnd:
    def test_toy_corpus_shape(self):
        corpus = toy_event_corpus()
        assert corpus.num_events() == 1
        rec = corpus.records[0]
        assert len(rec.entities) == 2
        assert rec.events[0].role_of("a") == "Place"

    @pytest.mark.parametrize("variant", ["berd", "forward", "no-recurrence"])
    def test_full_loss_gradients(self, variant):
        assert end_to_end_check(variant=variant) < TOLERANCE


class TestRunAll:
    def test_reports_and_flag(self):
        results, ok = run_all(num_instances=5, seed=0)
        assert ok
        assert "end_to_end_loss" in results
        assert set(results) == KERNEL_OPS | {"end_to_end_loss"}
