import json
import random

import pytest

from cdensemble.averaging import EnsembleCounts
from cdensemble.experts import (
    EXISTENCE,
    ORIENTATION,
    AnswerCache,
    AnswerParseError,
    CachedExpert,
    CacheError,
    ConsistencyWrapper,
    Expert,
    ExpertQuery,
    ExpertTransportError,
    KeyedTranscriptExpert,
    PROV_CACHE,
    PROV_FALLBACK,
    PROV_LLM,
    PROV_SIMULATED,
    ReplayError,
    ScriptedExpert,
    SimulatedExpert,
    existence_answer,
    orientation_answer,
    record_from_answer,
)
from cdensemble.graphs import GroundTruth

from helpers import make_vars, mg


def q(kind, variables, x_name, y_name):
    return ExpertQuery(kind, variables.id_of(x_name), variables.id_of(y_name), variables)


@pytest.fixture
def chain_truth():
    vs = make_vars("a b c d")
    return GroundTruth(mg(vs, "a->b", "b->c"))


class TestSimulatedExpert:
    def test_perfect_accepts_chain(self, chain_truth):
        expert = SimulatedExpert(chain_truth, 1.0, seed=1)
        vs = chain_truth.variables
        answer = expert.answer(q(EXISTENCE, vs, "a", "c"))
        assert answer.accept is True
        assert answer.provenance == PROV_SIMULATED

    def test_perfect_rejects_unrelated(self, chain_truth):
        expert = SimulatedExpert(chain_truth, 1.0, seed=1)
        vs = chain_truth.variables
        assert expert.answer(q(EXISTENCE, vs, "a", "d")).accept is False

    def test_zero_correctness_inverts(self, chain_truth):
        expert = SimulatedExpert(chain_truth, 0.0, seed=1)
        vs = chain_truth.variables
        assert expert.answer(q(EXISTENCE, vs, "a", "b")).accept is False
        answer = expert.answer(q(ORIENTATION, vs, "a", "b"))
        assert answer.oriented_pair() == (vs.id_of("b"), vs.id_of("a"))

    def test_orientation_follows_chain_either_order(self, chain_truth):
        expert = SimulatedExpert(chain_truth, 1.0, seed=5)
        vs = chain_truth.variables
        a, c = vs.id_of("a"), vs.id_of("c")
        assert expert.answer(q(ORIENTATION, vs, "c", "a")).oriented_pair() == (a, c)
        assert expert.answer(q(ORIENTATION, vs, "a", "c")).oriented_pair() == (a, c)

    def test_noise_is_order_symmetric(self, chain_truth):
        # Same (seed, kind, pair) derivation regardless of argument order
        # and correctness level once an error fires.
        vs = chain_truth.variables
        for seed in range(50):
            expert = SimulatedExpert(chain_truth, 0.5, seed=seed)
            one = expert.answer(q(ORIENTATION, vs, "a", "b")).oriented_pair()
            two = expert.answer(q(ORIENTATION, vs, "b", "a")).oriented_pair()
            assert one == two

    def test_unrelated_orientation_is_arbitrary_and_stable(self, chain_truth):
        vs = chain_truth.variables
        hits = 0
        draws = 10_000
        for seed in range(draws):
            expert = SimulatedExpert(chain_truth, 0.8, seed=seed)
            answer = expert.answer(q(ORIENTATION, vs, "a", "d"))
            again = expert.answer(q(ORIENTATION, vs, "d", "a"))
            assert answer.oriented_pair() == again.oriented_pair()
            if answer.parent == vs.id_of("a"):
                hits += 1
        assert abs(hits / draws - 0.5) < 0.02

    def test_unrelated_orientation_ignores_correctness(self, chain_truth):
        vs = chain_truth.variables
        low = SimulatedExpert(chain_truth, 0.0, seed=3)
        high = SimulatedExpert(chain_truth, 1.0, seed=3)
        query = q(ORIENTATION, vs, "a", "d")
        assert low.answer(query).oriented_pair() == high.answer(query).oriented_pair()

    def test_correctness_bounds_checked(self, chain_truth):
        with pytest.raises(ValueError):
            SimulatedExpert(chain_truth, 1.5)

    @pytest.mark.parametrize("p", [0.3, 0.7, 0.9])
    def test_calibration_rough(self, chain_truth, p):
        vs = chain_truth.variables
        correct = 0
        draws = 2_000
        for seed in range(draws):
            expert = SimulatedExpert(chain_truth, p, seed=seed)
            if expert.answer(q(EXISTENCE, vs, "a", "c")).accept:
                correct += 1
        assert abs(correct / draws - p) < 0.04


def transcript_records():
    return [
        {"kind": "existence", "pair": ["a", "b"], "accept": True},
        {"kind": "orientation", "pair": ["a", "b"], "parent": "b", "child": "a"},
    ]


class TestScriptedExpert:
    def test_replays_in_order(self):
        vs = make_vars("a b")
        expert = ScriptedExpert(transcript_records())
        first = expert.answer(q(EXISTENCE, vs, "a", "b"))
        assert first.accept is True
        second = expert.answer(q(ORIENTATION, vs, "a", "b"))
        assert second.oriented_pair() == (vs.id_of("b"), vs.id_of("a"))

    def test_mismatched_kind_rejected(self):
        vs = make_vars("a b")
        expert = ScriptedExpert(transcript_records())
        with pytest.raises(ReplayError, match="asked"):
            expert.answer(q(ORIENTATION, vs, "a", "b"))

    def test_mismatched_pair_rejected(self):
        vs = make_vars("a b c")
        expert = ScriptedExpert(transcript_records())
        with pytest.raises(ReplayError, match="pair"):
            expert.answer(q(EXISTENCE, vs, "a", "c"))

    def test_exhaustion_rejected(self):
        vs = make_vars("a b")
        expert = ScriptedExpert([])
        with pytest.raises(ReplayError, match="exhausted"):
            expert.answer(q(EXISTENCE, vs, "a", "b"))

    def test_keyed_replay_ignores_order(self):
        vs = make_vars("a b")
        expert = KeyedTranscriptExpert(transcript_records())
        assert expert.answer(q(ORIENTATION, vs, "b", "a")).oriented_pair() == \
               (vs.id_of("b"), vs.id_of("a"))
        assert expert.answer(q(EXISTENCE, vs, "a", "b")).accept is True


class FixedExpert(Expert):
    """Returns scripted per-(kind, ordered pair) answers; counts calls."""

    def __init__(self, behavior):
        self.behavior = behavior
        self.calls = 0

    def answer(self, query):
        self.calls += 1
        result = self.behavior[(query.kind, query.x_name, query.y_name)]
        if isinstance(result, Exception):
            raise result
        if query.kind == EXISTENCE:
            return existence_answer(result, PROV_LLM)
        parent, child = result
        return orientation_answer(
            query.variables.id_of(parent), query.variables.id_of(child), PROV_LLM)


def counts_for(vs, **kwargs) -> EnsembleCounts:
    return EnsembleCounts(
        vs, kwargs.get("n", 4),
        kwargs.get("connection", {}),
        kwargs.get("oriented", {}))


class TestConsistencyWrapper:
    def test_consistent_orientation_passes_through(self):
        vs = make_vars("a b")
        inner = FixedExpert({
            (ORIENTATION, "a", "b"): ("a", "b"),
            (ORIENTATION, "b", "a"): ("a", "b"),
        })
        wrapper = ConsistencyWrapper(inner, counts_for(vs))
        answer = wrapper.answer(q(ORIENTATION, vs, "a", "b"))
        assert answer.oriented_pair() == (0, 1)
        assert answer.provenance == PROV_LLM
        assert inner.calls == 2

    def test_inconsistent_orientation_falls_back_to_counts(self):
        vs = make_vars("a b")
        inner = FixedExpert({
            (ORIENTATION, "a", "b"): ("a", "b"),
            (ORIENTATION, "b", "a"): ("b", "a"),
        })
        counts = counts_for(vs, oriented={(0, 1): 3, (1, 0): 1})
        answer = ConsistencyWrapper(inner, counts).answer(q(ORIENTATION, vs, "a", "b"))
        assert answer.oriented_pair() == (0, 1)
        assert answer.provenance == PROV_FALLBACK

    def test_orientation_tie_falls_back_lexicographic(self):
        vs = make_vars("b a")  # ids: b=0, a=1; lexicographic first is 'a'
        inner = FixedExpert({
            (ORIENTATION, "b", "a"): ("b", "a"),
            (ORIENTATION, "a", "b"): ("a", "b"),
        })
        answer = ConsistencyWrapper(inner, counts_for(vs)).answer(q(ORIENTATION, vs, "b", "a"))
        assert answer.oriented_pair() == (vs.id_of("a"), vs.id_of("b"))

    def test_existence_inconsistency_uses_majority(self):
        vs = make_vars("a b")
        inner = FixedExpert({
            (EXISTENCE, "a", "b"): True,
            (EXISTENCE, "b", "a"): False,
        })
        below = counts_for(vs, n=10, connection={(0, 1): 4})
        answer = ConsistencyWrapper(inner, below).answer(q(EXISTENCE, vs, "a", "b"))
        assert answer.accept is False
        assert answer.provenance == PROV_FALLBACK

        above = counts_for(vs, n=10, connection={(0, 1): 6})
        answer = ConsistencyWrapper(inner, above).answer(q(EXISTENCE, vs, "a", "b"))
        assert answer.accept is True

    def test_parse_error_triggers_fallback(self):
        vs = make_vars("a b")
        inner = FixedExpert({
            (EXISTENCE, "a", "b"): AnswerParseError("no verdict"),
            (EXISTENCE, "b", "a"): True,
        })
        counts = counts_for(vs, n=4, connection={(0, 1): 3})
        answer = ConsistencyWrapper(inner, counts).answer(q(EXISTENCE, vs, "a", "b"))
        assert answer.provenance == PROV_FALLBACK
        assert answer.accept is True  # 3/4 > 1/2

    def test_transport_error_retried_once_then_raised(self):
        vs = make_vars("a b")

        class Flaky(Expert):
            def __init__(self, failures):
                self.failures = failures
                self.calls = 0

            def answer(self, query):
                self.calls += 1
                if self.calls <= self.failures:
                    raise ExpertTransportError("down")
                return existence_answer(True, PROV_LLM)

        # One failure: the retry succeeds, both orders answered.
        flaky = Flaky(1)
        answer = ConsistencyWrapper(flaky, counts_for(vs)).answer(q(EXISTENCE, vs, "a", "b"))
        assert answer.accept is True and flaky.calls == 3

        # Persistent failure: one retry then propagate.
        dead = Flaky(99)
        with pytest.raises(ExpertTransportError):
            ConsistencyWrapper(dead, counts_for(vs)).answer(q(EXISTENCE, vs, "a", "b"))
        assert dead.calls == 2

    def test_never_orients_outside_pair(self, tmp_path):
        vs = make_vars("a b c")
        rng = random.Random(0)
        for _ in range(50):
            x, y = rng.sample(["a", "b", "c"], 2)
            inner = FixedExpert({
                (ORIENTATION, x, y): (x, y),
                (ORIENTATION, y, x): (y, x),
            })
            counts = counts_for(vs, oriented={})
            answer = ConsistencyWrapper(inner, counts).answer(q(ORIENTATION, vs, x, y))
            assert {answer.parent, answer.child} == {vs.id_of(x), vs.id_of(y)}


class TestAnswerCache:
    def test_second_query_hits_cache(self, tmp_path):
        vs = make_vars("a b")
        inner = FixedExpert({(EXISTENCE, "a", "b"): True, (EXISTENCE, "b", "a"): True})
        expert = CachedExpert(inner, AnswerCache(tmp_path / "cache.jsonl"), "test")
        first = expert.answer(q(EXISTENCE, vs, "a", "b"))
        second = expert.answer(q(EXISTENCE, vs, "a", "b"))
        assert inner.calls == 1
        assert first.provenance == PROV_LLM
        assert second.provenance == PROV_CACHE
        assert second.accept is True

    def test_orientation_key_ignores_argument_order(self, tmp_path):
        vs = make_vars("a b")
        inner = FixedExpert({(ORIENTATION, "a", "b"): ("b", "a")})
        expert = CachedExpert(inner, AnswerCache(tmp_path / "cache.jsonl"), "test")
        first = expert.answer(q(ORIENTATION, vs, "a", "b"))
        second = expert.answer(q(ORIENTATION, vs, "b", "a"))
        assert inner.calls == 1
        assert first.oriented_pair() == second.oriented_pair() == (1, 0)

    def test_cache_survives_restart(self, tmp_path):
        vs = make_vars("a b")
        path = tmp_path / "cache.jsonl"
        inner = FixedExpert({(EXISTENCE, "a", "b"): False})
        CachedExpert(inner, AnswerCache(path), "test").answer(q(EXISTENCE, vs, "a", "b"))

        fresh_inner = FixedExpert({})
        revived = CachedExpert(fresh_inner, AnswerCache(path), "test")
        answer = revived.answer(q(EXISTENCE, vs, "a", "b"))
        assert answer.accept is False
        assert answer.provenance == PROV_CACHE
        assert fresh_inner.calls == 0

    def test_distinct_expert_ids_do_not_share(self, tmp_path):
        vs = make_vars("a b")
        cache = AnswerCache(tmp_path / "cache.jsonl")
        yes = FixedExpert({(EXISTENCE, "a", "b"): True})
        no = FixedExpert({(EXISTENCE, "a", "b"): False})
        assert CachedExpert(yes, cache, "one").answer(q(EXISTENCE, vs, "a", "b")).accept
        assert not CachedExpert(no, cache, "two").answer(q(EXISTENCE, vs, "a", "b")).accept

    def test_corrupt_record_reported(self, tmp_path):
        path = tmp_path / "cache.jsonl"
        path.write_text('{"kind": "existence"\n', encoding="utf-8")
        with pytest.raises(CacheError, match="cache.jsonl:1"):
            AnswerCache(path)

    def test_transparent_over_deterministic_inner(self, tmp_path):
        vs = make_vars("a b c")
        truth = GroundTruth(mg(vs, "a->b", "b->c"))
        plain = SimulatedExpert(truth, 0.7, seed=11)
        cached = CachedExpert(SimulatedExpert(truth, 0.7, seed=11),
                              AnswerCache(tmp_path / "cache.jsonl"), "sim")
        for x, y in [("a", "b"), ("b", "a"), ("a", "c"), ("b", "c")]:
            for kind in (EXISTENCE, ORIENTATION):
                direct = plain.answer(q(kind, vs, x, y))
                via_cache = cached.answer(q(kind, vs, x, y))
                assert (direct.accept, direct.parent, direct.child) == \
                       (via_cache.accept, via_cache.parent, via_cache.child)

    def test_record_round_trip(self):
        vs = make_vars("a b")
        query = q(ORIENTATION, vs, "b", "a")
        answer = orientation_answer(0, 1, PROV_LLM)
        record = record_from_answer(query, answer)
        assert record == {"kind": "orientation", "pair": ["a", "b"],
                          "provenance": PROV_LLM, "parent": "a", "child": "b"}

    def test_on_disk_record_shape(self, tmp_path):
        vs = make_vars("b a")
        path = tmp_path / "cache.jsonl"
        inner = FixedExpert({(ORIENTATION, "b", "a"): ("a", "b")})
        CachedExpert(inner, AnswerCache(path), "probe").answer(q(ORIENTATION, vs, "b", "a"))
        record = json.loads(path.read_text(encoding="utf-8").strip())
        assert record["kind"] == "orientation"
        assert record["pair"] == ["a", "b"]  # sorted names
        assert record["answer"] == {"parent": "a", "child": "b"}
        assert record["provenance"] == PROV_LLM
        assert record["expertId"] == "probe"
        assert isinstance(record["timestamp"], float)
