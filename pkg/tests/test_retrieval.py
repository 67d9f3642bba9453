import math
import random
from collections import deque

import numpy as np
import pytest

import corpusfix
from regqa.bundle import Bundle
from regqa.errors import EmptyDecomposition, NoCandidates, RetrievalStageError
from regqa.ingest import SectionNode
from regqa.llm import build_gateway, write_fixture
from regqa.navgraph import NavGraph, build_hierarchy
from regqa.refiner import LocalSchema, export_embeddings
from regqa.retrieval import (
    NO_PROVISIONS_SUMMARY,
    QueryDecomposition,
    RetrievalConfig,
    RetrievalEngine,
    RetrievalTrace,
    symmetrize,
)
from regqa.sections import parse_section_id


def sid(text):
    return parse_section_id(text)


def basis(dim, index, scale=1.0):
    vec = np.zeros(dim)
    vec[index] = scale
    return vec


def mix(dim, cos, unique_index):
    """Unit vector with exactly ``cos`` similarity against basis(dim, 0)."""
    vec = np.zeros(dim)
    vec[0] = cos
    vec[unique_index] = math.sqrt(1.0 - cos * cos)
    return vec


class TestSymmetrize:
    def test_swap_doubles(self):
        decomp = QueryDecomposition(
            ["a", "b"], [("a", "protect_from", "b")])
        out = symmetrize(decomp)
        assert out.symmetrized
        assert ("a", "protect_from", "b") in out.triples
        assert ("b", "protect_from", "a") in out.triples
        assert len(out.triples) == 2

    def test_self_symmetric_not_duplicated(self):
        decomp = QueryDecomposition(["a"], [("a", "relates_to", "a")])
        assert symmetrize(decomp).triples == [("a", "relates_to", "a")]

    def test_count_doubles_modulo_self_symmetric(self):
        decomp = QueryDecomposition(
            ["a", "b", "c"],
            [("a", "r", "b"), ("b", "s", "c"), ("c", "t", "c")])
        out = symmetrize(decomp)
        assert len(out.triples) == 2 * 2 + 1


class TestSelectSeeds:
    @pytest.fixture
    def engine(self, fixture_engine):
        return fixture_engine

    def test_intersection(self, engine):
        a = {sid("900.10"), sid("900.20")}
        b = {sid("900.20"), sid("900.30")}
        seeds, fallback = engine.select_seeds(a, b)
        assert seeds == {sid("900.20")}
        assert not fallback

    def test_union_fallback_flagged(self, engine):
        a, b = {sid("900.10")}, {sid("900.30")}
        seeds, fallback = engine.select_seeds(a, b)
        assert seeds == a | b
        assert fallback

    def test_both_empty(self, engine):
        seeds, fallback = engine.select_seeds(set(), set())
        assert seeds == set()
        assert not fallback

    def test_fallback_disabled_gives_exact_intersection(self, fixture_bundle):
        bundle, _, gateway = fixture_bundle
        engine = RetrievalEngine(bundle, gateway,
                                 RetrievalConfig(fallback_to_union=False))
        rng = random.Random(4)
        universe = [sid(f"900.{i + 1}") for i in range(30)]
        for _ in range(200):
            a = set(rng.sample(universe, rng.randint(0, 10)))
            b = set(rng.sample(universe, rng.randint(0, 10)))
            seeds, fallback = engine.select_seeds(a, b)
            assert seeds == a & b
            assert not fallback


class TestExpand:
    def case_study_engine(self):
        """The excavation case: (h)(3) references (h)(1) and (h)(2)."""
        nodes = [
            SectionNode(sid("1926.651(h)(1)"), None, "water removal", None, 0),
            SectionNode(sid("1926.651(h)(2)"), None, "diversion equipment", None, 1),
            SectionNode(sid("1926.651(h)(3)"), None,
                        "inspections per 1926.651(h)(1) and (h)(2)", None, 2),
            SectionNode(sid("1926.651(k)(1)"), None, "daily inspections", None, 3),
        ]
        graph = build_hierarchy(nodes)
        graph.add_cross_references([
            (sid("1926.651(h)(3)"), sid("1926.651(h)(1)"), "pattern"),
            (sid("1926.651(h)(3)"), sid("1926.651(h)(2)"), "pattern"),
        ])
        gateway = build_gateway("mock", dim=16)
        schema = LocalSchema(lambda t: gateway.embed([t])[0], 16)
        entity_vectors, triple_vectors = export_embeddings(schema)
        bundle = Bundle(nodes, graph, schema, entity_vectors, triple_vectors, {})
        return RetrievalEngine(bundle, gateway)

    def test_case_study_expansion(self):
        engine = self.case_study_engine()
        expanded = engine.expand({sid("1926.651(h)(3)"), sid("1926.651(k)(1)")})
        assert expanded == {
            sid("1926.651(h)(1)"), sid("1926.651(h)(2)"),
            sid("1926.651(h)(3)"), sid("1926.651(k)(1)")}

    def test_seeds_without_edges_unchanged(self):
        engine = self.case_study_engine()
        assert engine.expand({sid("1926.651(k)(1)")}) == {sid("1926.651(k)(1)")}

    def test_unknown_seeds_dropped(self):
        engine = self.case_study_engine()
        assert engine.expand({sid("1926.9999")}) == set()

    def test_cycles_terminate_and_match_bfs_oracle(self, fixture_bundle):
        bundle, _, gateway = fixture_bundle
        rng = random.Random(77)
        for _ in range(30):
            count = rng.randint(3, 60)
            ids = [sid(f"901.{i + 1}") for i in range(count)]
            graph = NavGraph()
            for section_id in ids:
                graph.ensure_node(section_id, has_text=True)
            refs = {}
            for _ in range(count * 2):
                a, b = rng.choice(ids), rng.choice(ids)
                if a != b:
                    graph.add_cross_references([(a, b, "pattern")])
                    refs.setdefault(a, set()).add(b)
            test_bundle = Bundle(bundle.corpus, graph, bundle.schema,
                                 bundle.entity_vectors, bundle.triple_vectors, {})
            engine = RetrievalEngine(test_bundle, gateway)
            seeds = set(rng.sample(ids, rng.randint(1, 3)))
            # oracle: plain BFS over refers_to (no has edges in this graph)
            visited = set(seeds)
            queue = deque(seeds)
            while queue:
                current = queue.popleft()
                for neighbor in refs.get(current, ()):
                    if neighbor not in visited:
                        visited.add(neighbor)
                        queue.append(neighbor)
            assert engine.expand(seeds) == visited

    def test_follow_incoming_config(self):
        nodes = [
            SectionNode(sid("902.1"), None, "see 902.2", None, 0),
            SectionNode(sid("902.2"), None, "target", None, 1),
        ]
        graph = build_hierarchy(nodes)
        graph.add_cross_references([(sid("902.1"), sid("902.2"), "pattern")])
        gateway = build_gateway("mock", dim=16)
        schema = LocalSchema(lambda t: gateway.embed([t])[0], 16)
        ev, tv = export_embeddings(schema)
        bundle = Bundle(nodes, graph, schema, ev, tv, {})
        default_engine = RetrievalEngine(bundle, gateway)
        assert default_engine.expand({sid("902.2")}) == {sid("902.2")}
        incoming_engine = RetrievalEngine(
            bundle, gateway, RetrievalConfig(follow_incoming=True))
        assert incoming_engine.expand({sid("902.2")}) == {
            sid("902.1"), sid("902.2")}

    def test_include_parents_config(self):
        nodes = [
            SectionNode(sid("902.3"), None, "umbrella", None, 0),
            SectionNode(sid("902.3(a)"), None, "detail", None, 1),
        ]
        graph = build_hierarchy(nodes)
        gateway = build_gateway("mock", dim=16)
        schema = LocalSchema(lambda t: gateway.embed([t])[0], 16)
        ev, tv = export_embeddings(schema)
        bundle = Bundle(nodes, graph, schema, ev, tv, {})
        engine = RetrievalEngine(
            bundle, gateway,
            RetrievalConfig(include_parents=True, include_children=False))
        assert engine.expand({sid("902.3(a)")}) == {
            sid("902.3"), sid("902.3(a)")}

    def test_children_of_referenced_nodes_included(self):
        # seed -> refers_to -> target with children: children come along,
        # but children of children (via has only) do not
        nodes = [
            SectionNode(sid("902.1(a)"), None, "see 902.2", None, 0),
            SectionNode(sid("902.2"), None, "umbrella", None, 1),
            SectionNode(sid("902.2(a)"), None, "detail", None, 2),
            SectionNode(sid("902.2(a)(1)"), None, "fine detail", None, 3),
        ]
        graph = build_hierarchy(nodes)
        graph.add_cross_references([(sid("902.1(a)"), sid("902.2"), "pattern")])
        gateway = build_gateway("mock", dim=16)
        schema = LocalSchema(lambda t: gateway.embed([t])[0], 16)
        ev, tv = export_embeddings(schema)
        engine = RetrievalEngine(Bundle(nodes, graph, schema, ev, tv, {}), gateway)
        expanded = engine.expand({sid("902.1(a)")})
        assert sid("902.2(a)") in expanded  # one level under the ref target
        assert sid("902.2(a)(1)") not in expanded  # two levels down


class TestMatching:
    def test_exact_entity_included(self, fixture_engine):
        decomp = symmetrize(QueryDecomposition(["defective ladder"], []))
        trace = RetrievalTrace()
        candidates = fixture_engine.match_entities(decomp, trace)
        assert {sid("900.10(b)"), sid("900.10(b)(1)")} <= candidates
        top = trace.entity_hits["defective ladder"][0]
        assert top[1] == pytest.approx(1.0, abs=1e-12)

    def test_all_below_threshold_gives_empty(self, fixture_engine):
        decomp = symmetrize(QueryDecomposition(["zzqx unrelated phrase"], []))
        assert fixture_engine.match_entities(decomp) == set()

    def test_exact_triple_included(self, fixture_engine):
        decomp = symmetrize(QueryDecomposition(
            ["ladder"], [("ladder", "inspected_by", "competent person")]))
        candidates = fixture_engine.match_triples(decomp)
        assert sid("900.10(a)") in candidates
        # shared relation+tail with the excavation triple pulls it in too
        assert sid("900.40(a)") in candidates

    def test_no_triples_empty_b(self, fixture_engine):
        decomp = symmetrize(QueryDecomposition(["ladder"], []))
        assert fixture_engine.match_triples(decomp) == set()

    def test_raising_min_sim_never_grows_candidates(self, fixture_bundle):
        bundle, _, gateway = fixture_bundle
        decomp = symmetrize(QueryDecomposition(
            ["ladder", "competent person"],
            [("ladder", "inspected_by", "competent person")]))
        previous_a = previous_b = None
        for min_sim in (0.1, 0.3, 0.5, 0.7, 0.9):
            engine = RetrievalEngine(bundle, gateway,
                                     RetrievalConfig(min_sim=min_sim))
            a = engine.match_entities(decomp)
            b = engine.match_triples(decomp)
            if previous_a is not None:
                assert a <= previous_a
                assert b <= previous_b
            previous_a, previous_b = a, b


class TestScoreReplay:
    """Similarity lists replayed through embedding fixtures."""

    DIM = 32

    def replay_engine(self):
        # stored entities with planned cosine scores against the query
        planned = [
            ("excavation work", 1.0),
            ("excavation", 0.8977),
            ("excavation activity", 0.8977),
            ("excavation operation", 0.8859),
        ]
        fixture_vectors = {"excavation work": basis(self.DIM, 0)}
        for index, (name, cos) in enumerate(planned[1:], start=2):
            fixture_vectors[name] = mix(self.DIM, cos, index)
        # triple replay: the stored triple head is the "excavation" entity
        # vector (0.8977 against the query head), so the relation and tail
        # components split the remainder for an overall score of 0.6343:
        # (0.8977 + 0.5026 + 0.5026) / 3 = 0.6343
        component = 0.5026
        for index, name in enumerate(
                ["protect_from", "rainstorm hazard"], start=10):
            fixture_vectors[name] = basis(self.DIM, index)
        fixture_vectors["subject_to"] = (
            component * fixture_vectors["protect_from"]
            + math.sqrt(1 - component ** 2) * basis(self.DIM, 20))
        fixture_vectors["heavy rain"] = (
            component * fixture_vectors["rainstorm hazard"]
            + math.sqrt(1 - component ** 2) * basis(self.DIM, 21))

        gateway = build_gateway("mock", dim=self.DIM,
                                fixture_vectors=fixture_vectors)
        schema = LocalSchema(lambda t: gateway.embed([t])[0], self.DIM)
        section = sid("1926.651(h)")
        for name, _ in planned:
            schema.refine(name, "activity", section, tau=1.0)
        head = schema.entities["excavation"]
        tail, _ = schema.refine("heavy rain", "hazard", sid("1926.651(h)(1)"),
                                tau=1.0)
        schema.add_triple(head, "subject_to", tail, sid("1926.651(h)(1)"))
        nodes = [SectionNode(section, "Water hazards", "", None, 0),
                 SectionNode(sid("1926.651(h)(1)"), None, "water removal",
                             None, 1)]
        bundle = Bundle(nodes, build_hierarchy(nodes), schema,
                        *export_embeddings(schema), {})
        return RetrievalEngine(bundle, gateway)

    def test_entity_similarity_list(self):
        engine = self.replay_engine()
        trace = RetrievalTrace()
        decomp = symmetrize(QueryDecomposition(["excavation work"], []))
        engine.match_entities(decomp, trace)
        hits = trace.entity_hits["excavation work"]
        sims = [round(sim, 4) for _, sim in hits]
        assert sims == [1.0, 0.8977, 0.8977, 0.8859]
        # the 0.8977 tie resolves by insertion order (ascending row id)
        assert [row for row, _ in hits] == [1, 2, 3, 4]

    def test_triple_similarity_replayed(self):
        engine = self.replay_engine()
        trace = RetrievalTrace()
        decomp = QueryDecomposition(
            ["excavation work"],
            [("excavation work", "protect_from", "rainstorm hazard")])
        engine.match_triples(symmetrize(decomp), trace)
        key = "excavation work|protect_from|rainstorm hazard"
        hits = trace.triple_hits[key]
        assert len(hits) == 1
        assert hits[0][1] == pytest.approx(0.6343, abs=1e-9)


class TestAnswerQuestion:
    @pytest.mark.parametrize("entry", corpusfix.QUESTIONS,
                             ids=[q["path"] for q in corpusfix.QUESTIONS])
    def test_designed_questions_hit_ground_truth(self, fixture_engine, entry):
        answer = fixture_engine.answer_question(entry["question"])
        got = sorted(r.section_id.canonical_text for r in answer.references)
        assert got == sorted(entry["truth"])
        assert answer.summary == entry["summary"]

    def test_fallback_flag_set_on_designed_question(self, fixture_engine):
        entry = corpusfix.QUESTIONS[4]
        assert entry["path"] == "empty-intersection-fallback"
        answer = fixture_engine.answer_question(entry["question"])
        assert answer.trace.fallback_used
        assert answer.trace.intersection == set()

    def test_references_subset_of_expanded(self, fixture_engine):
        for entry in corpusfix.QUESTIONS:
            answer = fixture_engine.answer_question(entry["question"])
            cited = {r.section_id for r in answer.references}
            assert cited <= answer.trace.expanded
            assert answer.trace.seeds <= (answer.trace.entity_candidates
                                          | answer.trace.triple_candidates)

    def test_deterministic_across_calls(self, fixture_engine):
        question = corpusfix.QUESTIONS[0]["question"]
        first = fixture_engine.answer_question(question)
        second = fixture_engine.answer_question(question)
        assert first.to_dict(include_trace=True) == second.to_dict(include_trace=True)

    def test_empty_decomposition_answer(self, fixture_bundle, tmp_path):
        bundle, _, _ = fixture_bundle
        fixtures = tmp_path / "fx"
        gateway = build_gateway("mock", dim=corpusfix.DIM, fixtures_dir=fixtures)
        question = "???"
        write_fixture(fixtures, "query_decompose",
                      gateway.render_user("query_decompose",
                                          {"question": question}),
                      {"entities": [], "triples": []})
        engine = RetrievalEngine(bundle, gateway)
        answer = engine.answer_question(question)
        assert answer.summary == NO_PROVISIONS_SUMMARY
        assert answer.references == []
        assert answer.trace.reason == "empty_decomposition"

    def test_no_candidates_answer(self, fixture_bundle, fixture_corpus_dir):
        bundle, _, _ = fixture_bundle
        gateway = corpusfix.make_fixture_gateway(fixture_corpus_dir,
                                                 strict=False)
        engine = RetrievalEngine(bundle, gateway)
        answer = engine.answer_question(
            "Completely unrelated zzqx terminology question?")
        assert answer.summary == NO_PROVISIONS_SUMMARY
        assert answer.trace.reason == "no_candidates"

    def test_provider_failure_wrapped_with_stage(self, fixture_bundle):
        bundle, _, _ = fixture_bundle
        gateway = build_gateway("failing", dim=corpusfix.DIM)
        engine = RetrievalEngine(bundle, gateway)
        with pytest.raises(RetrievalStageError) as err:
            engine.answer_question("What must be done with a defective ladder?")
        assert err.value.stage == "decompose"

    def test_empty_question_rejected_as_empty_decomposition(self, fixture_engine):
        answer = fixture_engine.answer_question("   ")
        assert answer.trace.reason == "empty_decomposition"


class TestSynthesize:
    def test_no_candidates_raises(self, fixture_engine):
        with pytest.raises(NoCandidates):
            fixture_engine.synthesize("question", [])

    def test_budget_drops_lowest_similarity_non_seed(self, fixture_bundle,
                                                     fixture_corpus_dir):
        bundle, _, _ = fixture_bundle
        gateway = corpusfix.make_fixture_gateway(fixture_corpus_dir, strict=False)
        # budget fits roughly two short sections plus the question
        engine = RetrievalEngine(bundle, gateway,
                                 RetrievalConfig(max_context_tokens=50))
        trace = RetrievalTrace()
        trace.seeds = {sid("900.10(b)")}
        sections = [n for n in bundle.corpus
                    if n.id.canonical_text in
                    ("900.10(b)", "900.10(b)(1)", "900.10(b)(2)")]
        best_sim = {sid("900.10(b)(1)"): 0.9, sid("900.10(b)(2)"): 0.2}
        answer = engine.synthesize("What happens?", sections, trace, best_sim)
        assert "900.10(b)(2)" in trace.dropped_for_budget
        cited = {r.section_id.canonical_text for r in answer.references}
        assert "900.10(b)" in cited  # the seed always survives

    def test_synthesizer_citations_filtered_to_inputs(self, fixture_bundle,
                                                      tmp_path):
        bundle, _, _ = fixture_bundle
        fixtures = tmp_path / "fx"
        gateway = build_gateway("mock", dim=corpusfix.DIM, fixtures_dir=fixtures)
        engine = RetrievalEngine(bundle, gateway)
        sections = [n for n in bundle.corpus
                    if n.id.canonical_text == "900.10(b)"]
        from regqa.extraction import sentences_slot
        payload = sentences_slot(
            [{"id": "900.10(b)", "text": sections[0].text}])
        write_fixture(fixtures, "answer_synthesize",
                      gateway.render_user("answer_synthesize",
                                          {"question": "q",
                                           "sections": payload}),
                      {"summary": "cites a stranger",
                       "kept_section_ids": ["900.10(b)", "900.99"]})
        answer = engine.synthesize("q", sections)
        assert [r.section_id.canonical_text for r in answer.references] == [
            "900.10(b)"]
