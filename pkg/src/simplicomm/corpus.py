"""Citation corpora and their projection onto co-authorship complexes.

A corpus is a set of papers (authors, citation count, references).  A
seeded random walk over the collaboration/reference graph selects a
desk-scale sample, which maps each paper's author set to a simplex; the
cochain of a simplex sums the citations of every sampled paper whose
author set contains it.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

import numpy as np

from .complexes import SimplicialComplex, build_complex

# collaborator-affinity used by the synthetic generator: probability that
# the next co-author is drawn from existing collaborators of the team
COLLAB_BIAS = 0.7
MAX_REFERENCES = 3


class CorpusParseError(ValueError):
    """A corpus line is not a valid record."""


class CorpusSchemaError(CorpusParseError):
    """A corpus record is missing a required field or has a bad type."""


class NoEligiblePaperError(RuntimeError):
    """No paper satisfies the walk's citation filter."""


@dataclass(frozen=True)
class Paper:
    id: str
    authors: tuple[str, ...]
    citations: int
    references: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.authors:
            raise ValueError(f"paper {self.id!r} has no authors")
        if self.citations < 0:
            raise ValueError(f"paper {self.id!r} has negative citations")


class Corpus:
    """Immutable paper collection with author and reference indexes.

    References that do not resolve to a paper in the collection are
    dropped at construction and counted in ``dropped_references``.
    """

    def __init__(self, papers):
        papers = list(papers)
        ids = {p.id for p in papers}
        if len(ids) != len(papers):
            raise ValueError("duplicate paper ids in corpus")
        dropped = 0
        resolved = []
        for p in papers:
            kept = tuple(r for r in p.references if r in ids)
            dropped += len(p.references) - len(kept)
            resolved.append(Paper(p.id, p.authors, p.citations, kept))
        self.papers: dict[str, Paper] = {p.id: p for p in resolved}
        self.dropped_references = dropped
        by_author: dict[str, list[str]] = {}
        cited_by: dict[str, list[str]] = {}
        for p in resolved:
            for a in p.authors:
                by_author.setdefault(a, []).append(p.id)
            for r in p.references:
                cited_by.setdefault(r, []).append(p.id)
        self.by_author = {a: tuple(v) for a, v in by_author.items()}
        self._cited_by = {r: tuple(v) for r, v in cited_by.items()}

    def __len__(self):
        return len(self.papers)

    def neighbors(self, paper_id: str, use_references: bool = True) -> tuple[str, ...]:
        """Papers sharing an author, plus reference-linked ones; sorted, no self."""
        p = self.papers[paper_id]
        nbrs = set()
        for a in p.authors:
            nbrs.update(self.by_author[a])
        if use_references:
            nbrs.update(p.references)
            nbrs.update(self._cited_by.get(paper_id, ()))
        nbrs.discard(paper_id)
        return tuple(sorted(nbrs))


@dataclass(frozen=True)
class WalkSample:
    papers: tuple[Paper, ...]
    start_id: str
    seed: int | None = None
    short: bool = False


def _rng_of(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def generate_corpus(n_papers: int, n_authors: int,
                    authors_per_paper: tuple[int, int] = (2, 3),
                    citation_range: tuple[int, int] = (1, 10),
                    rng=None) -> Corpus:
    """Synthetic corpus with preferential-attachment author teams.

    Teams grow by drawing either a collaborator of an already-chosen
    member or a globally popular author, so collaboration clusters form
    over time.  Citations are uniform in ``citation_range``; references
    point to earlier papers sharing an author where possible.
    """
    amin, amax = authors_per_paper
    cmin, cmax = citation_range
    if n_papers <= 0 or n_authors <= 0:
        raise ValueError("paper and author counts must be positive")
    if not (1 <= amin <= amax):
        raise ValueError(f"bad authors_per_paper range {authors_per_paper}")
    if amax > n_authors:
        raise ValueError(f"authors_per_paper max {amax} exceeds author pool {n_authors}")
    if not (0 <= cmin <= cmax):
        raise ValueError(f"bad citation_range {citation_range}")
    rng = _rng_of(rng)

    paper_count = np.ones(n_authors)  # +1 smoothing so fresh authors stay reachable
    collaborators: list[set[int]] = [set() for _ in range(n_authors)]
    author_papers: list[list[int]] = [[] for _ in range(n_authors)]
    papers: list[Paper] = []

    for i in range(n_papers):
        size = int(rng.integers(amin, amax + 1))
        team: list[int] = []
        while len(team) < size:
            pool = sorted(set().union(*(collaborators[a] for a in team)) - set(team)) if team else []
            if pool and rng.random() < COLLAB_BIAS:
                team.append(int(rng.choice(pool)))
            else:
                w = paper_count.copy()
                w[team] = 0.0
                team.append(int(rng.choice(n_authors, p=w / w.sum())))
        team.sort()
        for a in team:
            paper_count[a] += 1
            collaborators[a].update(t for t in team if t != a)

        shared_earlier = sorted({j for a in team for j in author_papers[a]})
        n_refs = min(int(rng.integers(0, MAX_REFERENCES + 1)), i)
        if shared_earlier:
            take = min(n_refs, len(shared_earlier))
            refs = sorted(int(j) for j in rng.choice(shared_earlier, size=take, replace=False))
        elif n_refs > 0:
            refs = sorted(int(j) for j in rng.choice(i, size=n_refs, replace=False))
        else:
            refs = []

        for a in team:
            author_papers[a].append(i)
        papers.append(Paper(
            id=f"p{i:06d}",
            authors=tuple(f"a{a:05d}" for a in team),
            citations=int(rng.integers(cmin, cmax + 1)),
            references=tuple(f"p{j:06d}" for j in refs),
        ))
    return Corpus(papers)


def save_corpus(corpus: Corpus, path) -> None:
    """One JSON record per line, stable field order; byte-reproducible."""
    with open(path, "w", encoding="utf-8") as fh:
        for p in corpus.papers.values():
            rec = {"id": p.id, "authors": list(p.authors),
                   "citations": p.citations, "references": list(p.references)}
            fh.write(json.dumps(rec, separators=(",", ":")) + "\n")


def _field(rec, name, lineno):
    if name not in rec:
        raise CorpusSchemaError(f"line {lineno}: missing required field {name!r}")
    return rec[name]


def load_corpus(path) -> Corpus:
    """Parse a line-delimited corpus file; dangling references are dropped."""
    papers = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusParseError(f"line {lineno}: {exc.msg}") from exc
            if not isinstance(rec, dict):
                raise CorpusParseError(f"line {lineno}: record is not an object")
            pid = _field(rec, "id", lineno)
            authors = _field(rec, "authors", lineno)
            citations = _field(rec, "citations", lineno)
            references = rec.get("references", [])
            if not isinstance(pid, str) or not isinstance(authors, list) or not authors:
                raise CorpusSchemaError(f"line {lineno}: bad id or authors")
            if not isinstance(citations, int) or citations < 0:
                raise CorpusSchemaError(f"line {lineno}: citations must be a non-negative integer")
            papers.append(Paper(pid, tuple(str(a) for a in authors),
                                citations, tuple(str(r) for r in references)))
    return Corpus(papers)


def sample_walk(corpus: Corpus, n_papers: int = 80,
                citation_range: tuple[int, int] = (1, 10),
                rng=None, seed: int | None = None,
                use_references: bool = True) -> WalkSample:
    """Random walk collecting distinct eligible papers.

    The walk starts at a uniform eligible paper and prefers an unvisited
    eligible neighbor of the current paper; when the current paper has
    none, it jumps to a uniform paper on the frontier of everything
    visited so far.  An exhausted frontier ends the walk early (sample
    flagged short).
    """
    if rng is None:
        rng = np.random.default_rng(seed)
    rng = _rng_of(rng)
    cmin, cmax = citation_range

    def eligible(pid):
        return cmin <= corpus.papers[pid].citations <= cmax

    candidates = sorted(pid for pid in corpus.papers if eligible(pid))
    if not candidates:
        raise NoEligiblePaperError(f"no paper with citations in [{cmin}, {cmax}]")

    start = str(rng.choice(candidates))
    visited = [start]
    visited_set = {start}
    frontier = {q for q in corpus.neighbors(start, use_references) if eligible(q)}
    current = start
    while len(visited) < n_papers:
        local = [q for q in corpus.neighbors(current, use_references)
                 if eligible(q) and q not in visited_set]
        if local:
            nxt = str(rng.choice(local))
        elif frontier:
            nxt = str(rng.choice(sorted(frontier)))
        else:
            break
        visited.append(nxt)
        visited_set.add(nxt)
        frontier.discard(nxt)
        frontier.update(q for q in corpus.neighbors(nxt, use_references)
                        if eligible(q) and q not in visited_set)
        current = nxt
    return WalkSample(papers=tuple(corpus.papers[pid] for pid in visited),
                      start_id=start, seed=seed, short=len(visited) < n_papers)


def build_coauthorship_complex(sample: WalkSample, k_max: int = 2
                               ) -> tuple[SimplicialComplex, dict[int, np.ndarray]]:
    """Author sets to simplices; cochains sum citations over containing papers.

    Authors are re-indexed densely (sorted by author id) so cochain rows
    align with simplex indices.  A paper with more than ``k_max + 1``
    authors contributes its k_max-faces.
    """
    if not sample.papers:
        raise ValueError("empty walk sample")
    authors = sorted({a for p in sample.papers for a in p.authors})
    aidx = {a: i for i, a in enumerate(authors)}
    tops = [tuple(aidx[a] for a in p.authors) for p in sample.papers]
    cx = build_complex(tops, k_max=k_max)
    cochains = {k: np.zeros((cx.num_simplices(k), 1))
                for k in range(cx.dimension + 1)}
    for p in sample.papers:
        verts = sorted(aidx[a] for a in p.authors)
        top_size = min(len(verts), k_max + 1)
        for r in range(1, top_size + 1):
            idx = cx.index[r - 1]
            for face in itertools.combinations(verts, r):
                cochains[r - 1][idx[face], 0] += p.citations
    return cx, cochains
