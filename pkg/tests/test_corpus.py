import numpy as np
import pytest

from simplicomm import corpus as cps


@pytest.fixture(scope="module")
def small_corpus():
    return cps.generate_corpus(n_papers=200, n_authors=60, rng=42)


class TestGenerateCorpus:
    def test_single_paper_exact_team_size(self):
        c = cps.generate_corpus(1, 10, authors_per_paper=(2, 2), rng=0)
        (p,) = c.papers.values()
        assert len(p.authors) == 2

    def test_citation_range_honored(self, small_corpus):
        assert all(1 <= p.citations <= 10 for p in small_corpus.papers.values())

    def test_same_seed_byte_identical(self, tmp_path):
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        cps.save_corpus(cps.generate_corpus(50, 20, rng=9), a)
        cps.save_corpus(cps.generate_corpus(50, 20, rng=9), b)
        assert a.read_bytes() == b.read_bytes()

    def test_team_size_exceeding_pool_rejected(self):
        with pytest.raises(ValueError):
            cps.generate_corpus(5, 3, authors_per_paper=(2, 4), rng=0)

    def test_references_resolve(self, small_corpus):
        assert small_corpus.dropped_references == 0
        for p in small_corpus.papers.values():
            for r in p.references:
                assert r in small_corpus.papers


class TestLoadCorpus:
    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.jsonl"
        path.write_text("")
        assert len(cps.load_corpus(path)) == 0

    def test_malformed_line_names_line_number(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text(
            '{"id":"p1","authors":["a"],"citations":1,"references":[]}\n'
            '{"id":"p2","authors":["b"],"citations":2,"references":[]}\n'
            "{not json\n"
        )
        with pytest.raises(cps.CorpusParseError, match="line 3"):
            cps.load_corpus(path)

    def test_missing_field_is_schema_error(self, tmp_path):
        path = tmp_path / "schema.jsonl"
        path.write_text('{"id":"p1","citations":1}\n')
        with pytest.raises(cps.CorpusSchemaError, match="authors"):
            cps.load_corpus(path)

    def test_dangling_reference_dropped_and_counted(self, tmp_path):
        path = tmp_path / "dangling.jsonl"
        path.write_text(
            '{"id":"p1","authors":["a"],"citations":1,"references":["nope"]}\n'
        )
        c = cps.load_corpus(path)
        assert c.dropped_references == 1
        assert c.papers["p1"].references == ()

    def test_round_trip(self, small_corpus, tmp_path):
        path = tmp_path / "c.jsonl"
        cps.save_corpus(small_corpus, path)
        again = cps.load_corpus(path)
        assert again.papers == small_corpus.papers


class TestSampleWalk:
    def test_single_eligible_paper_flagged_short(self):
        c = cps.Corpus([cps.Paper("p1", ("a",), 5)])
        s = cps.sample_walk(c, n_papers=10, rng=0)
        assert len(s.papers) == 1
        assert s.short

    def test_walk_of_80_distinct_in_range(self, small_corpus):
        s = cps.sample_walk(small_corpus, n_papers=80, citation_range=(1, 10), rng=1)
        assert len(s.papers) == 80
        assert len({p.id for p in s.papers}) == 80
        assert all(1 <= p.citations <= 10 for p in s.papers)

    def test_determinism(self, small_corpus):
        s1 = cps.sample_walk(small_corpus, n_papers=40, seed=7)
        s2 = cps.sample_walk(small_corpus, n_papers=40, seed=7)
        assert [p.id for p in s1.papers] == [p.id for p in s2.papers]

    def test_no_eligible_start(self):
        c = cps.Corpus([cps.Paper("p1", ("a",), 99)])
        with pytest.raises(cps.NoEligiblePaperError):
            cps.sample_walk(c, citation_range=(1, 10), rng=0)

    def test_reference_links_can_be_disabled(self):
        # two papers linked only by reference, disjoint authors
        c = cps.Corpus([
            cps.Paper("p1", ("a",), 5, ("p2",)),
            cps.Paper("p2", ("b",), 5),
        ])
        with_refs = cps.sample_walk(c, n_papers=2, rng=0, use_references=True)
        without = cps.sample_walk(c, n_papers=2, rng=0, use_references=False)
        assert len(with_refs.papers) == 2
        assert len(without.papers) == 1 and without.short


class TestCoauthorshipComplex:
    def test_single_pair_paper(self):
        s = cps.WalkSample((cps.Paper("p1", ("A", "B"), 5),), "p1")
        cx, co = cps.build_coauthorship_complex(s)
        assert cx.counts() == (2, 1)
        assert co[1].tolist() == [[5.0]]
        assert co[0].tolist() == [[5.0], [5.0]]

    def test_repeated_team_sums_citations(self):
        s = cps.WalkSample((cps.Paper("p1", ("A", "B"), 3),
                            cps.Paper("p2", ("A", "B"), 4)), "p1")
        cx, co = cps.build_coauthorship_complex(s)
        assert cx.counts() == (2, 1)
        assert co[1].tolist() == [[7.0]]

    def test_triangle_closure(self):
        s = cps.WalkSample((cps.Paper("p1", ("A", "B", "C"), 2),), "p1")
        cx, co = cps.build_coauthorship_complex(s)
        assert cx.counts() == (3, 3, 1)
        assert co[2].tolist() == [[2.0]]
        assert co[1].tolist() == [[2.0]] * 3

    def test_k_max_truncates_large_teams(self):
        s = cps.WalkSample((cps.Paper("p1", ("A", "B", "C", "D"), 1),), "p1")
        cx, co = cps.build_coauthorship_complex(s, k_max=2)
        assert cx.counts() == (4, 6, 4)
        assert all(v == 1.0 for v in co[2].ravel())

    def test_face_cochain_superset_rule(self):
        # edge (A,B) collects citations from both the pair paper and the triangle paper
        s = cps.WalkSample((cps.Paper("p1", ("A", "B"), 5),
                            cps.Paper("p2", ("A", "B", "C"), 2)), "p1")
        cx, co = cps.build_coauthorship_complex(s)
        ab = cx.index_of((0, 1))
        assert co[1][ab, 0] == 7.0

    def test_invariants_on_walks(self, small_corpus):
        total = 0
        for seed in range(8):
            s = cps.sample_walk(small_corpus, n_papers=30, rng=seed)
            cx, co = cps.build_coauthorship_complex(s)
            n_authors = len({a for p in s.papers for a in p.authors})
            assert cx.num_simplices(0) == n_authors
            sample_total = sum(p.citations for p in s.papers)
            for k, x in co.items():
                assert (x >= 0).all()
                assert x.max(initial=0) <= sample_total
            total += cx.counts()[0]
        assert total > 0

    def test_bit_identical_for_same_seed(self, small_corpus):
        out = []
        for _ in range(2):
            s = cps.sample_walk(small_corpus, n_papers=30, seed=11)
            cx, co = cps.build_coauthorship_complex(s)
            out.append((cx.simplices, {k: x.tobytes() for k, x in co.items()}))
        assert out[0] == out[1]
