"""Teacher ensembles and the (noisy) voting layer."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import models, rng
from .data import Dataset
from .errors import ConvergenceError
from .models import ModelParams, TrainConfig


@dataclass(frozen=True)
class EnsembleModel:
    teachers: tuple[ModelParams, ...]
    arch: str

    def __post_init__(self):
        if not self.teachers:
            raise ValueError("ensemble needs at least one teacher")
        dims = {(t.arch, t.feature_dim, t.num_classes) for t in self.teachers}
        if len(dims) != 1:
            raise ValueError("teachers must share architecture and dimensions")
        object.__setattr__(self, "teachers", tuple(self.teachers))

    @property
    def k(self) -> int:
        return len(self.teachers)

    @property
    def num_classes(self) -> int:
        return self.teachers[0].num_classes


def train_teachers(partitions: list[Dataset], cfg: TrainConfig,
                   arch: str = "logreg", hidden=(16, 16)) -> EnsembleModel:
    """Train one teacher per partition; deterministic given cfg.seed."""
    if not partitions:
        raise ValueError("no teacher partitions")
    teachers = []
    for j, part in enumerate(partitions):
        init = models.init_params(arch, part.feature_dim, part.num_classes,
                                  hidden=hidden,
                                  rng=rng.substream(cfg.seed, rng.TEACHER, j))
        try:
            teachers.append(models.train_erm(part.X, part.y, cfg, init))
        except ConvergenceError as exc:
            raise ConvergenceError(f"teacher {j}: {exc}", grad_norm=exc.grad_norm) from exc
    return EnsembleModel(tuple(teachers), arch)


def vote_counts(e: EnsembleModel, x) -> np.ndarray:
    """Per-class vote tally for one sample; entries sum to k."""
    preds = np.array([models.predict(t, x)[0] for t in e.teachers])
    return np.bincount(preds, minlength=e.num_classes).astype(np.int64)


def vote_count_matrix(e: EnsembleModel, X) -> np.ndarray:
    """(n, C) vote tallies for a batch."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    counts = np.zeros((len(X), e.num_classes), dtype=np.int64)
    idx = np.arange(len(X))
    for t in e.teachers:
        counts[idx, models.predict(t, X)] += 1
    return counts


def clean_vote(counts) -> int:
    """Plurality vote; ties go to the lowest class index."""
    return int(np.argmax(counts))


def noisy_vote(counts, sigma: float, gen: np.random.Generator) -> int:
    """Argmax over Gaussian-perturbed counts; sigma=0 is the clean vote."""
    counts = np.asarray(counts, dtype=np.float64)
    if sigma == 0:
        return clean_vote(counts)
    return int(np.argmax(counts + gen.normal(0.0, sigma, size=counts.shape)))


def soft_label(counts) -> np.ndarray:
    """Vote fractions counts / k."""
    counts = np.asarray(counts, dtype=np.float64)
    return counts / counts.sum()


def noisy_soft_label(counts, sigma: float, gen: np.random.Generator) -> np.ndarray:
    """Vote fractions from Gaussian-perturbed counts.

    Negative noisy counts are clamped to zero and the rest renormalized
    (uniform if everything clamps); sigma=0 returns the exact fractions.
    """
    counts = np.asarray(counts, dtype=np.float64)
    if sigma == 0:
        return soft_label(counts)
    noisy = counts + gen.normal(0.0, sigma, size=counts.shape)
    return sanitize_soft(noisy)


def sanitize_soft(noisy_counts) -> np.ndarray:
    clipped = np.maximum(np.asarray(noisy_counts, dtype=np.float64), 0.0)
    total = clipped.sum(axis=-1, keepdims=True)
    uniform = np.ones_like(clipped) / clipped.shape[-1]
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(total > 0, clipped / np.where(total > 0, total, 1.0), uniform)
    return out


def flip_prob_unanimous(k: int, sigma: float) -> float:
    """Probability a unanimous k-vote flips under Gaussian noise.

    Equals 1 - Phi(k / (sqrt(2) * sigma)): the two perturbed counts differ
    by a N(0, 2 sigma^2) variable that must overcome the margin k.
    """
    if sigma == 0:
        return 0.0
    return 0.5 * math.erfc(k / (2.0 * sigma))


def flip_prob_mc(counts, sigma: float, trials: int,
                 gen: np.random.Generator) -> tuple[float, float]:
    """Monte Carlo flip probability for arbitrary counts, with standard error."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    counts = np.asarray(counts, dtype=np.float64)
    clean = clean_vote(counts)
    if sigma == 0:
        return 0.0, 0.0
    noise = gen.normal(0.0, sigma, size=(trials, len(counts)))
    flips = np.argmax(counts + noise, axis=1) != clean
    p = float(flips.mean())
    return p, math.sqrt(p * (1.0 - p) / trials)


def flip_prob_batch(counts_matrix, sigma: float, trials: int,
                    gen: np.random.Generator) -> np.ndarray:
    """Per-sample flip probabilities for a (n, C) count matrix.

    Unanimous rows use the closed form; the rest share one vectorized
    Monte Carlo pass.
    """
    counts = np.asarray(counts_matrix, dtype=np.float64)
    n, c = counts.shape
    k = counts[0].sum()
    out = np.empty(n)
    unanimous = counts.max(axis=1) == counts.sum(axis=1)
    out[unanimous] = flip_prob_unanimous(int(k), sigma)
    rest = np.flatnonzero(~unanimous)
    if rest.size:
        if sigma == 0:
            out[rest] = 0.0
        else:
            noise = gen.normal(0.0, sigma, size=(trials, rest.size, c))
            winners = np.argmax(counts[rest] + noise, axis=2)
            clean = np.argmax(counts[rest], axis=1)
            out[rest] = (winners != clean).mean(axis=0)
    return out


def export_vote_transcript(path, counts_matrix, votes, soft_labels) -> None:
    """Audit CSV: one row per sample with counts, hard vote, and soft label."""
    counts = np.asarray(counts_matrix)
    soft = np.asarray(soft_labels)
    c = counts.shape[1]
    header = (["idx"] + [f"count_{j}" for j in range(c)] + ["vote"]
              + [f"soft_{j}" for j in range(c)])
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for i in range(len(counts)):
            row = ([str(i)] + [str(int(v)) for v in counts[i]]
                   + [str(int(votes[i]))] + [repr(float(v)) for v in soft[i]])
            fh.write(",".join(row) + "\n")
