"""Fairness-audit core: deviation moments, per-group excess risk, bounds.

The audit compares a student trained on clean ensemble votes (theta*)
against repetitions trained on noisy votes (theta~). Group excess risks,
their gap, and the theoretical upper bounds are all evaluated against the
clean votes, which act as the labels of record for the student task.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import models
from .errors import GroupCoverageError
from .models import ModelParams


@dataclass(frozen=True)
class DeviationStats:
    """Moments of ||theta~ - theta*|| across noisy repetitions."""

    first_moment: float
    second_moment: float
    repetitions: int
    values: tuple[float, ...] = field(repr=False, default=())


@dataclass(frozen=True)
class GroupStats:
    group: int
    size: int
    gradient_norm: float
    smoothness: float
    mean_input_norm: float
    mean_closeness: float
    excess_risk_01: float
    excess_risk_ce: float


@dataclass(frozen=True)
class FairnessReport:
    groups: tuple[GroupStats, ...]
    gap_01: float
    gap_ce: float
    deviation: DeviationStats
    bounds: dict
    diagnostics: dict  # per-sample arrays: norm, closeness, flip_prob, ...
    accuracy: dict
    privacy: dict
    config: dict


def model_deviation(clean: ModelParams, noisy_runs) -> DeviationStats:
    """Empirical first/second moments of the parameter deviation."""
    if not noisy_runs:
        raise ValueError("need at least one noisy run")
    for run in noisy_runs:
        if run.arch != clean.arch or run.values.size != clean.values.size:
            raise ValueError("noisy run architecture does not match the clean model")
    dists = tuple(float(np.linalg.norm(run.values - clean.values)) for run in noisy_runs)
    arr = np.array(dists)
    return DeviationStats(first_moment=float(arr.mean()),
                          second_moment=float((arr ** 2).mean()),
                          repetitions=len(dists), values=dists)


def _eval_loss(p: ModelParams, X, targets, kind: str) -> float:
    if kind == "zero_one":
        return models.zero_one_loss(p, X, targets)
    if kind == "cross_entropy":
        return models.loss(p, X, targets)
    raise ValueError(f"unknown loss kind {kind!r}")


def excess_risk(X, targets, clean: ModelParams, noisy_runs,
                loss: str = "zero_one", group: int | None = None) -> float:
    """Mean noisy-run loss minus clean loss on a subset.

    Targets are the clean ensemble votes. The empirical value may be
    negative in finite samples and is reported as-is.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if len(X) == 0:
        raise GroupCoverageError(group if group is not None else "<subset>")
    base = _eval_loss(clean, X, targets, loss)
    noisy = np.mean([_eval_loss(p, X, targets, loss) for p in noisy_runs])
    return float(noisy - base)


def per_sample_excess_01(X, targets, clean: ModelParams, noisy_runs) -> np.ndarray:
    """Per-sample mean 0/1 excess over the noisy runs (against clean votes)."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    t = np.asarray(targets)
    labels = t if t.ndim == 1 else np.argmax(t, axis=1)
    base = (models.predict(clean, X) != labels).astype(float)
    noisy = np.mean([(models.predict(p, X) != labels).astype(float)
                     for p in noisy_runs], axis=0)
    return noisy - base


def fairness_gap(group_risks) -> float:
    """Largest pairwise excess-risk difference: max - min."""
    risks = np.asarray(list(group_risks), dtype=np.float64)
    if risks.size < 2:
        raise ValueError("fairness gap needs at least two groups")
    return float(risks.max() - risks.min())


def group_gradient(clean: ModelParams, X, targets) -> np.ndarray:
    """Mean per-sample loss gradient over a group, evaluated at theta*."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if len(X) == 0:
        raise GroupCoverageError("<group>")
    return models.gradient(clean, X, targets, lam=0.0)


def group_smoothness(X, num_classes: int = 2, arch: str = "logreg") -> float:
    """Smoothness constant of the group loss: 0.25 * max ||x||^2 for logreg.

    Non-logreg architectures get a numeric Hessian-probe estimate and are
    the caller's responsibility to flag.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if arch == "logreg":
        scale = 0.25 if num_classes == 2 else 0.5
        if len(X) == 0:
            return 0.0
        return float(scale * (X * X).sum(axis=1).max())
    raise NotImplementedError("numeric smoothness probes are only wired for logreg")


def closeness_to_boundary(reference: ModelParams, X) -> np.ndarray:
    """s(x) = 1 - sum_c p_c(x)^2 under a true-label-trained reference model."""
    probs = np.atleast_2d(models.forward(reference, np.atleast_2d(X)))
    return 1.0 - (probs ** 2).sum(axis=1)


def bound_thm2(max_grad_norm: float, max_smoothness: float,
               dev: DeviationStats) -> float:
    """Fairness-gap bound: 2 max||G_a|| E[d] + 1/2 max(beta_a) E[d^2]."""
    return 2.0 * max_grad_norm * dev.first_moment \
        + 0.5 * max_smoothness * dev.second_moment


def bound_lemma_b1(grad_norm: float, smoothness: float,
                   dev: DeviationStats) -> float:
    """Per-group excess-risk bound: ||G_a|| E[d] + 1/2 beta_a E[d^2]."""
    return grad_norm * dev.first_moment + 0.5 * smoothness * dev.second_moment


def bound_cor1(flip_probs, grad_norms, m: int, lam: float,
               c_abs: float = 1.0) -> float:
    """First-moment deviation bound: (|c| / (m lam)) sum p_x ||G_x^max||.

    For logistic regression ||G_x^max|| is the input norm ||x||.
    """
    p = np.asarray(flip_probs, dtype=np.float64)
    g = np.asarray(grad_norms, dtype=np.float64)
    return float(c_abs / (m * lam) * (p * g).sum())


def bound_cor2(flip_probs, grad_norms, m: int, lam: float,
               c_abs: float = 1.0) -> float:
    """Second-moment deviation bound: (|c|^2 / (m lam^2)) sum p_x^2 ||G_x^max||^2."""
    p = np.asarray(flip_probs, dtype=np.float64)
    g = np.asarray(grad_norms, dtype=np.float64)
    return float(c_abs ** 2 / (m * lam ** 2) * (p ** 2 * g ** 2).sum())


def _average_ranks(v: np.ndarray) -> np.ndarray:
    order = np.argsort(v, kind="mergesort")
    sv = v[order]
    ranks = np.empty(len(v))
    i = 0
    while i < len(v):
        j = i
        while j + 1 < len(v) and sv[j + 1] == sv[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def spearman(xs, ys) -> float:
    """Rank correlation with average ranks for ties; NaN if an input is constant."""
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("inputs must be 1-D and the same length")
    if len(x) < 2:
        raise ValueError("need at least two points")
    rx, ry = _average_ranks(x), _average_ranks(y)
    sx, sy = rx.std(), ry.std()
    if sx == 0 or sy == 0:
        return float("nan")
    return float(((rx - rx.mean()) * (ry - ry.mean())).mean() / (sx * sy))
