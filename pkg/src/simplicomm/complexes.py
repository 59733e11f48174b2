"""Simplicial complexes, boundary matrices and Hodge Laplacians.

Simplices are tuples of strictly ascending non-negative vertex ids; a
complex stores, per dimension, a lexicographically ordered simplex list
together with an index map, and is closed under taking faces.  Orientation
follows ascending vertex order: deleting the m-th vertex carries sign
(-1)**m.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass

import numpy as np
from scipy import sparse

POWER_ITERATION_STEPS = 100
NORMALIZE_EPS = 1e-9
KERNEL_TOL = 1e-8


class MalformedSimplexError(ValueError):
    """Raised when an input vertex list is not a valid simplex."""


def _as_simplex(vertices) -> tuple[int, ...]:
    verts = tuple(sorted(int(v) for v in vertices))
    if not verts:
        raise MalformedSimplexError("a simplex needs at least one vertex")
    if len(set(verts)) != len(verts):
        raise MalformedSimplexError(f"duplicate vertex in simplex {verts}")
    if verts[0] < 0:
        raise MalformedSimplexError(f"negative vertex id in simplex {verts}")
    return verts


@dataclass(frozen=True)
class SimplicialComplex:
    """Per-dimension simplex lists, closed under faces.

    ``simplices[k]`` is the lexicographically sorted tuple of k-simplices;
    ``index[k]`` maps a simplex to its dense position within dimension k.
    Instances are immutable after construction.
    """

    simplices: tuple[tuple[tuple[int, ...], ...], ...]
    index: tuple[dict[tuple[int, ...], int], ...]

    @property
    def dimension(self) -> int:
        return len(self.simplices) - 1

    def num_simplices(self, k: int) -> int:
        if 0 <= k <= self.dimension:
            return len(self.simplices[k])
        return 0

    def counts(self) -> tuple[int, ...]:
        return tuple(len(s) for s in self.simplices)

    def index_of(self, simplex) -> int:
        s = _as_simplex(simplex)
        return self.index[len(s) - 1][s]

    def maximal_simplices(self) -> list[tuple[int, ...]]:
        """Simplices that are not a face of any stored coface."""
        tops = []
        for k in range(self.dimension + 1):
            above = self.index[k + 1] if k + 1 <= self.dimension else {}
            covered = set()
            for s in above:
                for m in range(len(s)):
                    covered.add(s[:m] + s[m + 1:])
            tops.extend(s for s in self.simplices[k] if s not in covered)
        return tops


def build_complex(top_simplices, k_max: int | None = None) -> SimplicialComplex:
    """Close the given vertex sets under faces and index the result.

    Faces of dimension above ``k_max`` are dropped, so an input set with
    more than ``k_max + 1`` vertices contributes only its ``k_max``-faces
    (and everything below).
    """
    by_dim: list[set[tuple[int, ...]]] = []
    for vertices in top_simplices:
        s = _as_simplex(vertices)
        top_size = len(s) if k_max is None else min(len(s), k_max + 1)
        for r in range(1, top_size + 1):
            while len(by_dim) < r:
                by_dim.append(set())
            by_dim[r - 1].update(itertools.combinations(s, r))
    ordered = tuple(tuple(sorted(dim)) for dim in by_dim)
    index = tuple({s: i for i, s in enumerate(dim)} for dim in ordered)
    return SimplicialComplex(simplices=ordered, index=index)


def boundary_matrix(cx: SimplicialComplex, k: int) -> sparse.csr_matrix:
    """Signed incidence matrix from k-simplices to their (k-1)-faces.

    Entry (i, j) is (-1)**m when the i-th (k-1)-simplex is the j-th
    k-simplex with its m-th vertex deleted.  Integer dtype so that the
    composition identity B_k @ B_{k+1} == 0 holds exactly.
    """
    if k < 1:
        raise ValueError("boundary matrices exist for degree k >= 1 only")
    if cx.num_simplices(k) == 0 or cx.num_simplices(k - 1) == 0:
        raise ValueError(f"complex has no simplices at degree {k}")
    rows, cols, data = [], [], []
    faces = cx.index[k - 1]
    for j, s in enumerate(cx.simplices[k]):
        for m in range(k + 1):
            rows.append(faces[s[:m] + s[m + 1:]])
            cols.append(j)
            data.append(-1 if m % 2 else 1)
    shape = (cx.num_simplices(k - 1), cx.num_simplices(k))
    return sparse.coo_matrix((data, (rows, cols)), shape=shape, dtype=np.int64).tocsr()


def hodge_laplacian(cx: SimplicialComplex, k: int) -> np.ndarray:
    """Dense Hodge Laplacian at degree k: down-term plus up-term.

    Degree 0 has only the up-term (the classic graph Laplacian); the top
    degree has only the down-term.
    """
    n = cx.num_simplices(k)
    if k < 0 or n == 0:
        raise ValueError(f"complex has no simplices at degree {k}")
    lap = np.zeros((n, n))
    if k >= 1:
        b = boundary_matrix(cx, k)
        lap += (b.T @ b).toarray().astype(float)
    if cx.num_simplices(k + 1) > 0:
        b_up = boundary_matrix(cx, k + 1)
        lap += (b_up @ b_up.T).toarray().astype(float)
    return lap


def betti(cx: SimplicialComplex, k: int) -> int:
    """Kernel dimension of the degree-k Laplacian (tolerance relative to its norm)."""
    lap = hodge_laplacian(cx, k)
    evals = np.linalg.eigvalsh(lap)
    scale = float(np.max(np.abs(evals)))
    if scale == 0.0:
        return len(evals)
    return int(np.sum(np.abs(evals) < KERNEL_TOL * scale))


def power_iteration_norm(a: np.ndarray, steps: int = POWER_ITERATION_STEPS,
                         trace: bool = False):
    """Spectral-norm estimate by power iteration from a fixed seeded start.

    With ``trace`` set, also returns the unit iterates and their pre-
    normalization norms (used for exact reverse-mode differentiation of
    the estimate).
    """
    n = a.shape[0]
    start = np.random.default_rng(0).standard_normal(n)
    v = start / np.linalg.norm(start)
    iterates = [v]
    norms: list[float] = []
    sigma = 0.0
    for _ in range(steps):
        w = a @ v
        nw = float(np.linalg.norm(w))
        if nw == 0.0:
            sigma = 0.0
            break
        v = w / nw
        sigma = nw
        iterates.append(v)
        norms.append(nw)
    if trace:
        return sigma, iterates, norms
    return sigma


def normalize_laplacian(lap: np.ndarray) -> np.ndarray:
    """Scale a symmetric operator to unit spectral norm: L / (sigma + eps).

    A zero matrix is returned unchanged.
    """
    sigma = power_iteration_norm(lap)
    if sigma == 0.0:
        return lap.copy()
    return lap / (sigma + NORMALIZE_EPS)


def to_json_dict(cx: SimplicialComplex, cochains: dict[int, np.ndarray] | None = None) -> dict:
    """Serializable form: per-dimension vertex arrays plus cochain rows."""
    out: dict = {"simplices": {str(k): [list(s) for s in cx.simplices[k]]
                               for k in range(cx.dimension + 1)}}
    if cochains is not None:
        out["cochains"] = {str(k): np.asarray(x, dtype=float).tolist()
                           for k, x in sorted(cochains.items())}
    return out


def from_json_dict(doc: dict) -> tuple[SimplicialComplex, dict[int, np.ndarray]]:
    dims = doc.get("simplices", {})
    tops = [s for k in sorted(dims, key=int) for s in dims[k]]
    cx = build_complex(tops)
    for k in range(cx.dimension + 1):
        stored = tuple(tuple(s) for s in sorted(dims.get(str(k), [])))
        if stored != cx.simplices[k]:
            raise ValueError(f"dimension {k} is not closed under faces")
    cochains = {}
    for k, rows in doc.get("cochains", {}).items():
        x = np.asarray(rows, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if x.shape[0] != cx.num_simplices(int(k)):
            raise ValueError(f"cochain rows at degree {k} do not match simplex count")
        cochains[int(k)] = x
    return cx, cochains


def save_complex(path, cx: SimplicialComplex, cochains: dict[int, np.ndarray] | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(to_json_dict(cx, cochains), fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_complex(path) -> tuple[SimplicialComplex, dict[int, np.ndarray]]:
    with open(path, "r", encoding="utf-8") as fh:
        return from_json_dict(json.load(fh))
