"""Sparse multiview files, one-vs-all labeling, synthetic populations, subsampling.

On-disk format: one file per view, one example per line, space-separated
``index:value`` tokens with 0-based strictly increasing indices (an empty line
is an all-zero example). Labels live in their own file, one per line.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError, LabelDomainError, LineCountMismatch, ParseError, RequestTooLarge, UnknownClass
from .hierarchy import MultiviewSample
from .rng import Xoshiro256, box_muller, words_to_unit

FLOAT_FMT = "%.17g"


def _read_lines(path) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    return lines


def _parse_view(path, lines: list[str]):
    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    for lineno, line in enumerate(lines, start=1):
        prev = -1
        col = 1
        for tok in line.split(" "):
            if tok == "":
                col += 1
                continue
            idx_s, sep, val_s = tok.partition(":")
            if not sep:
                raise ParseError(path, lineno, col, f"expected index:value, got {tok!r}")
            try:
                idx = int(idx_s)
            except ValueError:
                raise ParseError(path, lineno, col, f"bad feature index {idx_s!r}") from None
            try:
                val = float(val_s)
            except ValueError:
                raise ParseError(path, lineno, col + len(idx_s) + 1, f"bad feature value {val_s!r}") from None
            if idx <= prev:
                raise ParseError(path, lineno, col, f"feature index {idx} not strictly increasing")
            if not math.isfinite(val):
                raise ParseError(path, lineno, col + len(idx_s) + 1, f"non-finite value {val_s!r}")
            prev = idx
            indices.append(idx)
            data.append(val)
            col += len(tok) + 1
        indptr.append(len(indices))
    return np.array(data, dtype=np.float64), np.array(indices, dtype=np.int64), np.array(indptr, dtype=np.int64)


def one_vs_all(labels: Sequence, positive_class) -> list[int]:
    labels = list(labels)
    if positive_class not in labels:
        raise UnknownClass(f"class {positive_class!r} does not occur in the labels")
    return [1 if lab == positive_class else -1 for lab in labels]


def _parse_labels(path, lines, positive_class):
    tokens = [ln.strip() for ln in lines]
    if positive_class is not None:
        return np.array(one_vs_all(tokens, str(positive_class)), dtype=np.int64)
    out = []
    for lineno, tok in enumerate(tokens, start=1):
        try:
            lab = int(tok)
        except ValueError:
            raise ParseError(path, lineno, 1, f"bad label {tok!r}") from None
        if lab not in (-1, 1):
            raise LabelDomainError(f"{path}:{lineno}: label {lab} is not -1 or +1 (use a positive class)")
        out.append(lab)
    return np.array(out, dtype=np.int64)


def load_multiview(view_paths: Sequence, label_path, view_dims: Sequence[int] | None = None,
                   positive_class=None) -> MultiviewSample:
    """Assemble example i from line i of every view file and of the label file.

    ``view_dims`` defaults to one past the largest index seen in each view.
    """
    label_lines = _read_lines(label_path)
    view_lines = [_read_lines(p) for p in view_paths]
    counts = {str(label_path): len(label_lines), **{str(p): len(ls) for p, ls in zip(view_paths, view_lines)}}
    if len(set(counts.values())) != 1:
        raise LineCountMismatch(f"line counts differ: {counts}")
    labels = _parse_labels(label_path, label_lines, positive_class)
    mats = []
    for v, (path, lines) in enumerate(zip(view_paths, view_lines)):
        data, indices, indptr = _parse_view(path, lines)
        seen = int(indices.max()) + 1 if indices.size else 1
        dim = seen if view_dims is None else int(view_dims[v])
        if dim < seen:
            raise ParseError(path, 0, 0, f"feature index {seen - 1} outside declared dimension {dim}")
        mats.append(sp.csr_matrix((data, indices, indptr), shape=(len(lines), dim)))
    return MultiviewSample(tuple(mats), labels, tuple(X.shape[1] for X in mats))


def save_multiview(S: MultiviewSample, view_paths: Sequence, label_path) -> None:
    """Inverse of ``load_multiview``; values carry 17 significant digits."""
    if len(view_paths) != S.n_views:
        raise ValueError(f"need {S.n_views} view paths, got {len(view_paths)}")
    for X, path in zip(S.views, view_paths):
        with open(path, "w", encoding="utf-8") as fh:
            for i in range(S.m):
                lo, hi = X.indptr[i], X.indptr[i + 1]
                fh.write(" ".join(f"{j}:{FLOAT_FMT % x}" for j, x in zip(X.indices[lo:hi], X.data[lo:hi])))
                fh.write("\n")
    with open(label_path, "w", encoding="utf-8") as fh:
        fh.writelines(f"{int(y)}\n" for y in S.labels)


@dataclass(frozen=True)
class SynthConfig:
    """Two Gaussian classes per view, centers at +-separation/2 along a unit direction.

    ``redundancy`` mixes a direction and a noise vector shared by every view
    with view-specific ones: 1.0 makes equal-dimension views identical, 0.0
    makes them conditionally independent given the label.
    """

    views: int = 3
    dims: tuple[int, ...] = (10, 10, 10)
    separation: float = 2.0
    noise: float = 1.0
    redundancy: float = 0.5
    flip_noise: float = 0.0
    size: int = 1000
    seed: int = 0

    def __post_init__(self):
        dims = (self.dims,) * self.views if isinstance(self.dims, int) else tuple(int(d) for d in self.dims)
        object.__setattr__(self, "dims", dims)
        if self.views < 2:
            raise ConfigError("synthetic data needs at least 2 views")
        if len(dims) != self.views or min(dims) < 1:
            raise ConfigError(f"need {self.views} positive view dimensions, got {dims}")
        if not self.separation > 0 or not self.noise > 0:
            raise ConfigError("separation and noise must be positive")
        if not 0.0 <= self.redundancy <= 1.0:
            raise ConfigError(f"redundancy must lie in [0, 1], got {self.redundancy}")
        if not 0.0 <= self.flip_noise < 0.5:
            raise ConfigError(f"flip_noise must lie in [0, 0.5), got {self.flip_noise}")
        if self.size < 1:
            raise ConfigError("population size must be >= 1")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["dims"] = list(self.dims)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SynthConfig":
        d = dict(d)
        if "dims" in d and not isinstance(d["dims"], int):
            d["dims"] = tuple(d["dims"])
        return cls(**d)


def synth_population(cfg: SynthConfig) -> MultiviewSample:
    """Draw ``cfg.size`` examples; the PRNG call order is part of the contract.

    1. ``normals(d_max)`` shared direction, then ``normals(d_v)`` per view.
    2. Per example: ``uniform()`` for the class (+1 if < 1/2),
       ``normals(d_max + sum(d_v))`` (shared noise then each view's own),
       ``uniform()`` for the label flip (flipped if < flip_noise).
    """
    rng = Xoshiro256(cfg.seed)
    dims = cfg.dims
    d_max = max(dims)
    a, b = math.sqrt(cfg.redundancy), math.sqrt(1.0 - cfg.redundancy)
    shared_dir = rng.normals(d_max)
    directions = []
    for d in dims:
        u = a * shared_dir[:d] + b * rng.normals(d)
        norm = np.linalg.norm(u)
        directions.append(u / norm if norm > 0 else np.eye(d)[0])

    n_norm = d_max + sum(dims)
    n_pairs = (n_norm + 1) // 2
    width = 2 + 2 * n_pairs
    raw = rng.raw(cfg.size * width).reshape(cfg.size, width)
    y = np.where(words_to_unit(raw[:, 0]) < 0.5, 1, -1)
    z = box_muller(raw[:, 1:1 + 2 * n_pairs].ravel()).reshape(cfg.size, 2 * n_pairs)[:, :n_norm]
    flip = words_to_unit(raw[:, -1]) < cfg.flip_noise

    shared_noise = z[:, :d_max]
    offset = d_max
    views = []
    for d, u in zip(dims, directions):
        own = z[:, offset:offset + d]
        offset += d
        X = (0.5 * cfg.separation) * y[:, None] * u[None, :] + cfg.noise * (a * shared_noise[:, :d] + b * own)
        views.append(sp.csr_matrix(X))
    labels = np.where(flip, -y, y)
    return MultiviewSample(tuple(views), labels, dims)


def stratified_counts(class_sizes: Sequence[int], total: int) -> list[int]:
    """Split ``total`` across classes proportionally (largest remainder, ties to the first class)."""
    n = sum(class_sizes)
    exact = [total * c / n for c in class_sizes]
    counts = [math.floor(x) for x in exact]
    order = sorted(range(len(exact)), key=lambda k: (-(exact[k] - counts[k]), k))
    for k in order[: total - sum(counts)]:
        counts[k] += 1
    return counts


def subsample(S: MultiviewSample, m: int, seed: int, stratified: bool = True) -> MultiviewSample:
    """``m`` examples drawn without replacement, in shuffled order."""
    if m > S.m:
        raise RequestTooLarge(f"requested {m} examples from a sample of {S.m}")
    if m < 1:
        raise RequestTooLarge("requested an empty subsample")
    rng = Xoshiro256(seed)
    perm = rng.permutation(S.m)
    if not stratified:
        return S.take(perm[:m])
    classes = (1, -1)
    members = [perm[S.labels[perm] == c] for c in classes]
    counts = stratified_counts([len(x) for x in members], m)
    chosen = np.concatenate([x[:k] for x, k in zip(members, counts)])
    chosen = chosen[rng.permutation(chosen.size)]
    return S.take(chosen)
