"""Views, voters, samples and the two-level prior/posterior hierarchy.

A multiview sample keeps one CSR matrix per view (rows are examples), which is
what every estimator consumes. ``MultiviewExample`` is the per-example view of
the same data and is what the brute-force oracle walks through.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import EmptySample, NotADistribution, ShapeMismatch

SUM_TOL = 1e-9


@dataclass(frozen=True)
class SparseVector:
    indices: tuple[int, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.indices) != len(self.values):
            raise ShapeMismatch("indices and values differ in length")
        if any(b <= a for a, b in zip(self.indices, self.indices[1:])):
            raise ValueError("feature indices must be strictly increasing")
        if self.indices and self.indices[0] < 0:
            raise ValueError("feature indices must be non-negative")
        if not all(math.isfinite(v) for v in self.values):
            raise ValueError("feature values must be finite")

    def get(self, j: int) -> float:
        """Value of feature ``j``; absent features are 0."""
        k = bisect.bisect_left(self.indices, j)
        if k < len(self.indices) and self.indices[k] == j:
            return self.values[k]
        return 0.0


@dataclass(frozen=True)
class MultiviewExample:
    views: tuple[SparseVector, ...]
    label: int

    def __post_init__(self):
        if len(self.views) < 1:
            raise ShapeMismatch("an example needs at least one view")
        if self.label not in (-1, 1):
            raise ValueError(f"label must be -1 or +1, got {self.label!r}")

    @property
    def n_views(self) -> int:
        return len(self.views)


def _as_csr(matrix, dim: int) -> sp.csr_matrix:
    X = sp.csr_matrix(matrix, dtype=np.float64)
    if X.shape[1] != dim:
        raise ShapeMismatch(f"view matrix has {X.shape[1]} columns, expected {dim}")
    if not X.has_canonical_format:
        # duplicates or unsorted indices cannot come out of a valid example
        X.sum_duplicates()
        X.sort_indices()
    if not np.all(np.isfinite(X.data)):
        raise ValueError("feature values must be finite")
    return X


@dataclass(frozen=True, eq=False)
class MultiviewSample:
    """``m`` labeled examples described by ``V`` sparse views."""

    views: tuple[sp.csr_matrix, ...]
    labels: np.ndarray
    view_dims: tuple[int, ...] = field(default=())

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        if labels.ndim != 1:
            raise ShapeMismatch("labels must be one-dimensional")
        if labels.size == 0:
            raise EmptySample("a sample needs at least one example")
        if not np.all((labels == 1) | (labels == -1)):
            raise ValueError("labels must be in {-1, +1}")
        if len(self.views) < 1:
            raise ShapeMismatch("a sample needs at least one view")
        dims = tuple(self.view_dims) or tuple(int(X.shape[1]) for X in self.views)
        if len(dims) != len(self.views):
            raise ShapeMismatch("view_dims length differs from the number of views")
        views = tuple(_as_csr(X, d) for X, d in zip(self.views, dims))
        for X in views:
            if X.shape[0] != labels.size:
                raise ShapeMismatch("every view must have one row per label")
        labels.setflags(write=False)
        object.__setattr__(self, "views", views)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "view_dims", dims)

    @classmethod
    def from_examples(cls, examples: Sequence[MultiviewExample], view_dims: Sequence[int]) -> "MultiviewSample":
        if not examples:
            raise EmptySample("a sample needs at least one example")
        V = len(view_dims)
        mats = []
        for v in range(V):
            indptr = [0]
            indices: list[int] = []
            data: list[float] = []
            for ex in examples:
                if ex.n_views != V:
                    raise ShapeMismatch(f"example has {ex.n_views} views, expected {V}")
                vec = ex.views[v]
                if vec.indices and vec.indices[-1] >= view_dims[v]:
                    raise ShapeMismatch(f"feature index {vec.indices[-1]} outside view {v} of dim {view_dims[v]}")
                indices.extend(vec.indices)
                data.extend(vec.values)
                indptr.append(len(indices))
            mats.append(
                sp.csr_matrix(
                    (np.array(data, dtype=np.float64), np.array(indices, dtype=np.int64), np.array(indptr)),
                    shape=(len(examples), view_dims[v]),
                )
            )
        return cls(tuple(mats), np.array([ex.label for ex in examples]), tuple(view_dims))

    @classmethod
    def from_dense(cls, views: Sequence[np.ndarray], labels) -> "MultiviewSample":
        return cls(tuple(sp.csr_matrix(np.asarray(X, dtype=np.float64)) for X in views), np.asarray(labels))

    @property
    def m(self) -> int:
        return int(self.labels.size)

    def __len__(self) -> int:
        return self.m

    @property
    def n_views(self) -> int:
        return len(self.views)

    def example(self, i: int) -> MultiviewExample:
        vecs = []
        for X in self.views:
            lo, hi = X.indptr[i], X.indptr[i + 1]
            vecs.append(SparseVector(tuple(int(j) for j in X.indices[lo:hi]), tuple(float(x) for x in X.data[lo:hi])))
        return MultiviewExample(tuple(vecs), int(self.labels[i]))

    @cached_property
    def examples(self) -> list[MultiviewExample]:
        return [self.example(i) for i in range(self.m)]

    def __iter__(self) -> Iterator[MultiviewExample]:
        return iter(self.examples)

    def take(self, idx) -> "MultiviewSample":
        idx = np.asarray(idx, dtype=np.int64)
        return MultiviewSample(tuple(X[idx] for X in self.views), self.labels[idx], self.view_dims)

    def column(self, view: int, feature: int) -> np.ndarray:
        """Dense values of one feature over all examples."""
        return self.views[view][:, [feature]].toarray().ravel()


@dataclass(frozen=True)
class Stump:
    """``polarity`` if ``x[feature] > threshold`` else ``-polarity``, on one view."""

    view: int
    feature: int
    threshold: float
    polarity: int = 1

    def __post_init__(self):
        if self.polarity not in (-1, 1):
            raise ValueError("polarity must be -1 or +1")
        if self.view < 0 or self.feature < 0:
            raise ValueError("view and feature indices must be non-negative")

    def __call__(self, x) -> int:
        """Evaluate on a ``MultiviewExample`` or directly on its view vector."""
        vec = x.views[self.view] if isinstance(x, MultiviewExample) else x
        return self.polarity if vec.get(self.feature) > self.threshold else -self.polarity

    def predict(self, S: MultiviewSample) -> np.ndarray:
        col = S.column(self.view, self.feature)
        return np.where(col > self.threshold, self.polarity, -self.polarity).astype(np.float64)

    def negate(self) -> "Stump":
        return Stump(self.view, self.feature, self.threshold, -self.polarity)


@dataclass(frozen=True)
class VoterPool:
    """Per-view voter sets; ``per_view[v]`` plays the role of H_v."""

    per_view: tuple[tuple[Stump, ...], ...]
    degenerate_views: tuple[int, ...] = ()

    def __post_init__(self):
        per_view = tuple(tuple(hs) for hs in self.per_view)
        if not per_view:
            raise ShapeMismatch("a pool needs at least one view")
        for v, hs in enumerate(per_view):
            if not hs:
                raise ShapeMismatch(f"view {v} has no voters")
            for h in hs:
                if h.view != v:
                    raise ShapeMismatch(f"voter {h} listed under view {v}")
        object.__setattr__(self, "per_view", per_view)

    @property
    def n_views(self) -> int:
        return len(self.per_view)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(len(hs) for hs in self.per_view)

    def __iter__(self):
        for hs in self.per_view:
            yield from hs

    def votes(self, S: MultiviewSample) -> list[np.ndarray]:
        """One ``(m, n_v)`` array of +-1 predictions per view."""
        if S.n_views != self.n_views:
            raise ShapeMismatch(f"sample has {S.n_views} views, pool has {self.n_views}")
        out = []
        for v, hs in enumerate(self.per_view):
            feats = np.array([h.feature for h in hs], dtype=np.int64)
            if feats.max() >= S.view_dims[v]:
                raise ShapeMismatch(f"voter feature outside view {v} of dim {S.view_dims[v]}")
            uniq, pos = np.unique(feats, return_inverse=True)
            cols = S.views[v][:, uniq].toarray()[:, pos]
            thr = np.array([h.threshold for h in hs])
            pol = np.array([h.polarity for h in hs], dtype=np.float64)
            out.append(np.where(cols > thr, pol, -pol))
        return out


@dataclass(frozen=True, eq=False)
class Categorical:
    """Finite distribution; weights are checked on construction."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64)
        if w.ndim != 1 or w.size == 0:
            raise ShapeMismatch("weights must be a non-empty vector")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise NotADistribution(f"weights must be finite and non-negative: {w}")
        if abs(w.sum() - 1.0) > SUM_TOL:
            raise NotADistribution(f"weights sum to {w.sum()!r}, not 1")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, n: int) -> "Categorical":
        return cls(np.full(n, 1.0 / n))

    @classmethod
    def point_mass(cls, n: int, i: int) -> "Categorical":
        w = np.zeros(n)
        w[i] = 1.0
        return cls(w)

    @classmethod
    def normalized(cls, w) -> "Categorical":
        w = np.asarray(w, dtype=np.float64)
        return cls(w / w.sum())

    def __len__(self) -> int:
        return self.weights.size

    def __eq__(self, other):
        return isinstance(other, Categorical) and np.array_equal(self.weights, other.weights)


@dataclass(frozen=True, eq=False)
class HierarchicalDistribution:
    """Hyper-level weights over views plus one distribution per view."""

    hyper: Categorical
    per_view: tuple[Categorical, ...]

    def __post_init__(self):
        per_view = tuple(self.per_view)
        if len(self.hyper) != len(per_view):
            raise ShapeMismatch(f"hyper has {len(self.hyper)} entries for {len(per_view)} views")
        object.__setattr__(self, "per_view", per_view)

    @property
    def n_views(self) -> int:
        return len(self.per_view)

    def joint(self) -> np.ndarray:
        """Flattened weights rho(v) * Q_v(h), views in order."""
        return np.concatenate([r * q.weights for r, q in zip(self.hyper.weights, self.per_view)])

    def __eq__(self, other):
        return (
            isinstance(other, HierarchicalDistribution)
            and self.hyper == other.hyper
            and self.per_view == other.per_view
        )


def validate_hierarchy(dist: HierarchicalDistribution, pool: VoterPool) -> None:
    """Raise ShapeMismatch or NotADistribution unless ``dist`` fits ``pool``."""
    if len(dist.hyper) != pool.n_views or dist.n_views != pool.n_views:
        raise ShapeMismatch(f"distribution covers {len(dist.hyper)} views, pool has {pool.n_views}")
    for v, (q, n) in enumerate(zip(dist.per_view, pool.sizes)):
        if len(q) != n:
            raise ShapeMismatch(f"view {v}: {len(q)} weights for {n} voters")
    for cat in (dist.hyper, *dist.per_view):
        w = cat.weights
        if np.any(w < 0) or abs(w.sum() - 1.0) > SUM_TOL:
            raise NotADistribution(f"invalid weights {w}")


def uniform_hierarchy(pool: VoterPool) -> HierarchicalDistribution:
    return HierarchicalDistribution(
        Categorical.uniform(pool.n_views), tuple(Categorical.uniform(n) for n in pool.sizes)
    )
