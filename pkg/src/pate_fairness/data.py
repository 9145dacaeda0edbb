"""Dataset ingestion, standardization, splitting, and synthetic generation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import pandas as pd

from . import rng
from .errors import ParseError, SchemaError, SizingError


class Sample(NamedTuple):
    features: np.ndarray
    label: int
    group: int


@dataclass(frozen=True)
class Dataset:
    """Feature matrix plus class labels and protected-group indices.

    Immutable after construction; the arrays are marked read-only so the
    same dataset can be shared across threads.
    """

    X: np.ndarray  # (n, d) float64
    y: np.ndarray  # (n,) int64
    group: np.ndarray  # (n,) int64
    num_classes: int
    num_groups: int

    def __post_init__(self):
        X = np.ascontiguousarray(self.X, dtype=np.float64)
        y = np.ascontiguousarray(self.y, dtype=np.int64)
        g = np.ascontiguousarray(self.group, dtype=np.int64)
        if X.ndim != 2:
            raise ValueError("feature matrix must be 2-D")
        if len(y) != len(X) or len(g) != len(X):
            raise ValueError("feature/label/group lengths disagree")
        if not np.all(np.isfinite(X)):
            raise ValueError("features contain NaN or Inf")
        if len(y) and (y.min() < 0 or y.max() >= self.num_classes):
            raise ValueError("label index out of range")
        if len(g) and (g.min() < 0 or g.max() >= self.num_groups):
            raise ValueError("group index out of range")
        for arr in (X, y, g):
            arr.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "group", g)

    @property
    def n(self) -> int:
        return len(self.X)

    @property
    def feature_dim(self) -> int:
        return self.X.shape[1]

    def sample(self, i: int) -> Sample:
        return Sample(self.X[i], int(self.y[i]), int(self.group[i]))

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        return Dataset(self.X[idx], self.y[idx], self.group[idx],
                       self.num_classes, self.num_groups)

    def group_subset(self, a: int) -> "Dataset":
        return self.subset(np.flatnonzero(self.group == a))

    def groups(self):
        return range(self.num_groups)


@dataclass(frozen=True)
class SplitSpec:
    private_fraction: float
    num_teachers: int
    student_public_size: int
    seed: int
    stratify_by_group: bool = False

    def __post_init__(self):
        if not 0 < self.private_fraction <= 1:
            raise ValueError("private_fraction must be in (0, 1]")
        if self.num_teachers < 1:
            raise ValueError("num_teachers must be >= 1")
        if self.student_public_size < 1:
            raise ValueError("student_public_size must be >= 1")


def _first_appearance_codes(values) -> tuple[np.ndarray, list]:
    """Integer codes assigned in order of first appearance."""
    mapping: dict = {}
    codes = np.empty(len(values), dtype=np.int64)
    for i, v in enumerate(values):
        if v not in mapping:
            mapping[v] = len(mapping)
        codes[i] = mapping[v]
    return codes, list(mapping)


def load_csv(path, label_col: str, group_col: str) -> Dataset:
    """Parse a headered CSV into a Dataset.

    Label and group values are coded by first appearance in file order.
    Non-numeric feature columns are one-hot encoded (categories also in
    first-appearance order); a non-numeric cell inside an otherwise numeric
    column is a parse error reported with its row index.
    """
    frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    for col in (label_col, group_col):
        if col not in frame.columns:
            raise SchemaError(f"column {col!r} not found in {path}")
    feature_cols = [c for c in frame.columns if c not in (label_col, group_col)]
    if not feature_cols:
        raise SchemaError("no feature columns besides label and group")

    columns = []
    for col in feature_cols:
        raw = frame[col].to_numpy()
        numeric = pd.to_numeric(frame[col], errors="coerce").to_numpy(dtype=np.float64)
        bad = ~np.isfinite(numeric)
        if not bad.any():
            columns.append(numeric[:, None])
        elif bad.all():
            codes, cats = _first_appearance_codes(raw)
            onehot = np.zeros((len(raw), len(cats)))
            onehot[np.arange(len(raw)), codes] = 1.0
            columns.append(onehot)
        else:
            row = int(np.flatnonzero(bad)[0])
            raise ParseError(
                f"non-numeric value {raw[row]!r} in column {col!r} at row {row}",
                row=row, column=col)

    X = np.hstack(columns)
    y, y_cats = _first_appearance_codes(frame[label_col].to_numpy())
    g, g_cats = _first_appearance_codes(frame[group_col].to_numpy())
    return Dataset(X, y, g, num_classes=len(y_cats), num_groups=len(g_cats))


def standardize(d: Dataset) -> tuple[Dataset, tuple[np.ndarray, np.ndarray]]:
    """Rescale every feature column to zero mean and unit std.

    Constant columns are mapped to all-zeros. Returns the transformed
    dataset together with the (mean, std) arrays used.
    """
    mean = d.X.mean(axis=0)
    std = d.X.std(axis=0)
    safe = np.where(std > 0, std, 1.0)
    X = (d.X - mean) / safe
    X[:, std == 0] = 0.0
    return Dataset(X, d.y, d.group, d.num_classes, d.num_groups), (mean, std)


def apply_standardization(d: Dataset, stats) -> Dataset:
    mean, std = stats
    safe = np.where(std > 0, std, 1.0)
    X = (d.X - mean) / safe
    X[:, std == 0] = 0.0
    return Dataset(X, d.y, d.group, d.num_classes, d.num_groups)


def split(d: Dataset, spec: SplitSpec) -> tuple[list[Dataset], Dataset, Dataset]:
    """Deterministic split into teacher partitions, public student set, test set.

    The student set's labels stay on the Dataset for excess-risk evaluation
    only; the voting layer never reads them.
    """
    n_private = int(round(spec.private_fraction * d.n))
    if n_private < spec.num_teachers:
        raise SizingError(
            f"private set of {n_private} rows cannot feed {spec.num_teachers} teachers")
    if d.n - n_private < spec.student_public_size:
        raise SizingError(
            f"only {d.n - n_private} public rows available, "
            f"need {spec.student_public_size} for the student")

    gen = rng.substream(spec.seed, rng.SPLIT)
    perm = gen.permutation(d.n)
    private_idx = perm[:n_private]
    student_idx = perm[n_private:n_private + spec.student_public_size]
    test_idx = perm[n_private + spec.student_public_size:]

    if spec.stratify_by_group:
        # Round-robin within each group keeps per-partition group shares even.
        order = np.concatenate([
            private_idx[d.group[private_idx] == a] for a in d.groups()])
        parts_idx = [order[j::spec.num_teachers] for j in range(spec.num_teachers)]
    else:
        parts_idx = np.array_split(private_idx, spec.num_teachers)

    partitions = [d.subset(idx) for idx in parts_idx]
    return partitions, d.subset(student_idx), d.subset(test_idx)


def synth_two_group(n: int, d: int, boundary_margin, norm_scale, seed: int) -> Dataset:
    """Two-group, two-class Gaussian data with a linear true boundary.

    Each group's class clusters sit at +-margin along the first axis; labels
    come from the sign of that axis, so the boundary is exactly linear.
    Group g is then scaled by norm_scale[g], which leaves the boundary
    (through the origin) unchanged.
    """
    margins = np.asarray(boundary_margin, dtype=np.float64)
    scales = np.asarray(norm_scale, dtype=np.float64)
    if margins.shape != (2,) or scales.shape != (2,):
        raise ValueError("boundary_margin and norm_scale must each have two entries")
    if (margins < 0).any():
        raise ValueError("margins must be >= 0")
    if (scales <= 0).any():
        raise ValueError("scales must be > 0")

    gen = rng.substream(seed, rng.SYNTH)
    group = gen.integers(0, 2, size=n)
    cluster = gen.integers(0, 2, size=n)
    X = gen.standard_normal((n, d))
    X[:, 0] += (2 * cluster - 1) * margins[group]
    y = (X[:, 0] > 0).astype(np.int64)
    X *= scales[group][:, None]
    return Dataset(X, y, group, num_classes=2, num_groups=2)
