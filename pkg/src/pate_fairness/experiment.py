"""End-to-end experiment runs, parameter sweeps, and report emission."""

from __future__ import annotations

import copy
import dataclasses
import json
import math
from dataclasses import dataclass

import numpy as np

from . import data, ensemble, fairness, models, privacy, rng
from .data import Dataset, SplitSpec
from .errors import ConfigError, GroupCoverageError
from .fairness import DeviationStats, FairnessReport, GroupStats
from .models import ModelParams, TrainConfig

DEFAULTS = {
    "dataset": {"type": "synth", "n": 4000, "d": 10,
                "margins": [2.0, 2.0], "scales": [1.0, 1.0],
                "standardize": False},
    "split": {"private_fraction": 0.75, "num_teachers": 150,
              "student_public_size": 200, "stratify_by_group": False},
    "teacher": {"arch": "logreg", "lam": 1.0, "optimizer": "gd", "lr": None,
                "batch_size": 32, "max_iter": 200_000, "tol": 1e-6},
    "student": {"arch": "logreg", "lam": 100.0, "optimizer": "gd", "lr": None,
                "batch_size": 32, "max_iter": 200_000, "tol": 1e-8},
    # True-label reference for closeness-to-boundary; lightly regularized so
    # its probabilities actually spread away from uniform.
    "reference": {"arch": "logreg", "lam": 0.1, "optimizer": "gd", "lr": None,
                  "batch_size": 32, "max_iter": 200_000, "tol": 1e-6},
    "mlp_hidden": [16, 16],
    "sigma": 50.0,
    "variant": "hard",
    "repetitions": 100,
    "delta": 1e-5,
    "flip_trials": 10_000,
    "seed": 0,
}


class PipelineError(RuntimeError):
    """A stage of the experiment pipeline failed."""

    def __init__(self, stage, cause):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause


def _merge_defaults(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge_defaults(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: dict
    split: dict
    teacher: dict
    student: dict
    reference: dict
    mlp_hidden: tuple
    sigma: float
    variant: str
    repetitions: int
    delta: float
    flip_trials: int
    seed: int

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        unknown = set(raw) - set(DEFAULTS)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg = _merge_defaults(DEFAULTS, raw)
        if cfg["variant"] not in ("hard", "soft"):
            raise ConfigError(f"variant must be 'hard' or 'soft', got {cfg['variant']!r}")
        if cfg["repetitions"] < 1:
            raise ConfigError("repetitions must be >= 1")
        if cfg["sigma"] < 0:
            raise ConfigError("sigma must be >= 0")
        if not 0 < cfg["delta"] < 1:
            raise ConfigError("delta must be in (0, 1)")
        if cfg["dataset"].get("type") not in ("synth", "csv"):
            raise ConfigError("dataset.type must be 'synth' or 'csv'")
        try:
            cls._train_config(cfg["teacher"], seed=0)
            cls._train_config(cfg["student"], seed=0)
            cls._train_config(cfg["reference"], seed=0)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        return cls(dataset=cfg["dataset"], split=cfg["split"],
                   teacher=cfg["teacher"], student=cfg["student"],
                   reference=cfg["reference"],
                   mlp_hidden=tuple(cfg["mlp_hidden"]), sigma=float(cfg["sigma"]),
                   variant=cfg["variant"], repetitions=int(cfg["repetitions"]),
                   delta=float(cfg["delta"]), flip_trials=int(cfg["flip_trials"]),
                   seed=int(cfg["seed"]))

    @staticmethod
    def _train_config(section: dict, seed: int) -> TrainConfig:
        extra = set(section) - {"arch", "lam", "optimizer", "lr", "batch_size",
                                "max_iter", "tol"}
        if extra:
            raise ConfigError(f"unknown training keys: {sorted(extra)}")
        if section.get("arch", "logreg") not in models.ARCHS:
            raise ConfigError(f"unknown architecture {section.get('arch')!r}")
        return TrainConfig(lam=float(section["lam"]), optimizer=section["optimizer"],
                           lr=section["lr"], batch_size=int(section["batch_size"]),
                           max_iter=int(section["max_iter"]), tol=float(section["tol"]),
                           seed=seed)

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["mlp_hidden"] = list(self.mlp_hidden)
        return out

    def replacing(self, **paths) -> "ExperimentConfig":
        """New config with dotted-path overrides, e.g. replacing(**{'student.lam': 5})."""
        raw = self.to_dict()
        for path, value in paths.items():
            node = raw
            parts = path.split(".")
            for part in parts[:-1]:
                node = node[part]
            node[parts[-1]] = value
        return ExperimentConfig.from_dict(raw)


def _load_dataset(cfg: ExperimentConfig):
    ds_cfg = cfg.dataset
    if ds_cfg["type"] == "synth":
        ds = data.synth_two_group(int(ds_cfg["n"]), int(ds_cfg["d"]),
                                  ds_cfg["margins"], ds_cfg["scales"],
                                  seed=cfg.seed)
        stats = None
        if ds_cfg.get("standardize"):
            ds, stats = data.standardize(ds)
        return ds, stats
    ds = data.load_csv(ds_cfg["path"], ds_cfg["label_col"], ds_cfg["group_col"])
    if ds_cfg.get("standardize", True):
        ds, stats = data.standardize(ds)
    else:
        stats = None
    return ds, stats


def _train_student(X, targets, cfg: ExperimentConfig, init: ModelParams) -> ModelParams:
    train_cfg = ExperimentConfig._train_config(
        cfg.student, seed=rng.derive_seed(cfg.seed, rng.STUDENT))
    return models.train_erm(X, targets, train_cfg, init)


def _per_sample_grad_norms(p: ModelParams, X, targets) -> np.ndarray:
    if p.arch == "logreg" and p.num_classes == 2:
        t = np.asarray(targets)
        t1 = t if t.ndim == 1 else t[:, 1]
        resid = models.forward(p, X)[:, 1] - t1
        return np.abs(resid) * np.linalg.norm(X, axis=1)
    return np.array([np.linalg.norm(models.gradient(p, X[i:i + 1], targets[i:i + 1]))
                     for i in range(len(X))])


def run_experiment(cfg: ExperimentConfig) -> FairnessReport:
    """Full pipeline: split, teach, vote, train clean/noisy students, audit."""
    try:
        ds, std_stats = _load_dataset(cfg)
    except Exception as exc:
        raise PipelineError("dataset", exc) from exc

    try:
        spec = SplitSpec(private_fraction=float(cfg.split["private_fraction"]),
                         num_teachers=int(cfg.split["num_teachers"]),
                         student_public_size=int(cfg.split["student_public_size"]),
                         seed=cfg.seed,
                         stratify_by_group=bool(cfg.split.get("stratify_by_group", False)))
        partitions, public, test = data.split(ds, spec)
    except Exception as exc:
        raise PipelineError("split", exc) from exc

    try:
        teacher_cfg = ExperimentConfig._train_config(cfg.teacher, seed=cfg.seed)
        ens = ensemble.train_teachers(partitions, teacher_cfg,
                                      arch=cfg.teacher["arch"],
                                      hidden=cfg.mlp_hidden)
    except Exception as exc:
        raise PipelineError("teachers", exc) from exc

    try:
        counts = ensemble.vote_count_matrix(ens, public.X)
        clean_votes = np.argmax(counts, axis=1)
        soft_labels = counts / spec.num_teachers
        clean_targets = clean_votes if cfg.variant == "hard" else soft_labels
    except Exception as exc:
        raise PipelineError("voting", exc) from exc

    try:
        init = models.init_params(cfg.student["arch"], public.feature_dim,
                                  public.num_classes, hidden=cfg.mlp_hidden,
                                  rng=rng.substream(cfg.seed, rng.STUDENT, 0))
        theta_star = _train_student(public.X, clean_targets, cfg, init)
        ref_cfg = ExperimentConfig._train_config(
            cfg.reference, seed=rng.derive_seed(cfg.seed, rng.STUDENT, 1))
        ref_init = models.init_params(cfg.reference["arch"], public.feature_dim,
                                      public.num_classes, hidden=cfg.mlp_hidden,
                                      rng=rng.substream(cfg.seed, rng.STUDENT, 1))
        reference = models.train_erm(public.X, public.y, ref_cfg, ref_init)
        noisy_runs = []
        for r in range(cfg.repetitions):
            if cfg.sigma == 0:
                targets_r = clean_targets
            else:
                noise = rng.substream(cfg.seed, rng.VOTE, r).normal(
                    0.0, cfg.sigma, size=counts.shape)
                if cfg.variant == "hard":
                    targets_r = np.argmax(counts + noise, axis=1)
                else:
                    targets_r = ensemble.sanitize_soft(counts + noise)
            noisy_runs.append(_train_student(public.X, targets_r, cfg, init))
    except Exception as exc:
        raise PipelineError("students", exc) from exc

    try:
        dev = fairness.model_deviation(theta_star, noisy_runs)
        flip = ensemble.flip_prob_batch(counts, cfg.sigma, cfg.flip_trials,
                                        rng.substream(cfg.seed, rng.FLIP))
        closeness = fairness.closeness_to_boundary(reference, public.X)
        norms = np.linalg.norm(public.X, axis=1)
        excess01 = fairness.per_sample_excess_01(public.X, clean_votes,
                                                 theta_star, noisy_runs)
        grad_norms = _per_sample_grad_norms(theta_star, public.X, clean_votes)

        groups = []
        for a in public.groups():
            idx = np.flatnonzero(public.group == a)
            if idx.size == 0:
                raise GroupCoverageError(a)
            Xa, va = public.X[idx], clean_votes[idx]
            grad = fairness.group_gradient(theta_star, Xa, va)
            groups.append(GroupStats(
                group=a, size=int(idx.size),
                gradient_norm=float(np.linalg.norm(grad)),
                smoothness=fairness.group_smoothness(
                    Xa, public.num_classes, cfg.student["arch"])
                if cfg.student["arch"] == "logreg" else float("nan"),
                mean_input_norm=float(norms[idx].mean()),
                mean_closeness=float(closeness[idx].mean()),
                excess_risk_01=fairness.excess_risk(Xa, va, theta_star, noisy_runs,
                                                    "zero_one", group=a),
                excess_risk_ce=fairness.excess_risk(Xa, va, theta_star, noisy_runs,
                                                    "cross_entropy", group=a)))

        gap_01 = fairness.fairness_gap([g.excess_risk_01 for g in groups])
        gap_ce = fairness.fairness_gap([g.excess_risk_ce for g in groups])

        bounds = {
            "thm2": fairness.bound_thm2(max(g.gradient_norm for g in groups),
                                        max(g.smoothness for g in groups), dev)
            if cfg.student["arch"] == "logreg" else None,
            "lemma_b1": {str(g.group): fairness.bound_lemma_b1(
                g.gradient_norm, g.smoothness, dev) for g in groups}
            if cfg.student["arch"] == "logreg" else None,
        }
        if cfg.student["arch"] == "logreg" and public.num_classes == 2:
            m, lam = public.n, float(cfg.student["lam"])
            bounds["cor1"] = fairness.bound_cor1(flip, norms, m, lam)
            bounds["cor2"] = fairness.bound_cor2(flip, norms, m, lam)
        else:
            bounds["cor1"] = bounds["cor2"] = None
    except Exception as exc:
        raise PipelineError("fairness", exc) from exc

    try:
        acc_clean = 1.0 - models.zero_one_loss(theta_star, test.X, test.y)
        acc_noisy = float(np.mean([1.0 - models.zero_one_loss(p, test.X, test.y)
                                   for p in noisy_runs]))
        if cfg.sigma > 0:
            ledger = privacy.record_queries(privacy.RdpLedger(), public.n, cfg.sigma)
            eps, gamma = privacy.rdp_to_dp(ledger, cfg.delta)
            priv = {"non_private": False, "epsilon": eps, "gamma_star": gamma,
                    "coeff": ledger.coeff, "delta": cfg.delta,
                    "m": public.n, "sigma": cfg.sigma}
        else:
            priv = {"non_private": True, "epsilon": None, "gamma_star": None,
                    "coeff": None, "delta": cfg.delta, "m": public.n, "sigma": 0.0}
    except Exception as exc:
        raise PipelineError("privacy", exc) from exc

    diagnostics = {
        "idx": np.arange(public.n),
        "group": public.group.copy(),
        "norm": norms,
        "closeness": closeness,
        "flip_prob": flip,
        "excess01": excess01,
        "grad_norm": grad_norms,
    }
    config = cfg.to_dict()
    if std_stats is not None:
        config["standardization"] = {"mean": std_stats[0].tolist(),
                                     "std": std_stats[1].tolist()}
    return FairnessReport(groups=tuple(groups), gap_01=gap_01, gap_ce=gap_ce,
                          deviation=dev, bounds=bounds, diagnostics=diagnostics,
                          accuracy={"clean_student": acc_clean,
                                    "noisy_student_mean": acc_noisy},
                          privacy=priv, config=config)


_SWEEP_PARAMS = {
    "lambda": "student.lam",
    "k": "split.num_teachers",
    "sigma": "sigma",
}


def run_sweep(base: ExperimentConfig, param: str, values) -> list[dict]:
    """One run per value, each with a seed derived from (root seed, index).

    Per-value failures are recorded in the row and the sweep continues.
    """
    if param not in _SWEEP_PARAMS:
        raise ConfigError(f"sweep parameter must be one of {sorted(_SWEEP_PARAMS)}")
    if not values:
        raise ConfigError("sweep needs at least one value")
    rows = []
    for i, value in enumerate(values):
        seed = rng.derive_seed(base.seed, rng.SWEEP, i)
        row = {"param": param, "value": value, "seed": seed}
        try:
            cfg = base.replacing(**{_SWEEP_PARAMS[param]: value, "seed": seed})
            rep = run_experiment(cfg)
            k = int(cfg.split["num_teachers"])
            row.update({
                "gap_01": rep.gap_01,
                "gap_ce": rep.gap_ce,
                "deviation_mean": rep.deviation.first_moment,
                "deviation_second_moment": rep.deviation.second_moment,
                "mean_flip_prob": float(np.mean(rep.diagnostics["flip_prob"])),
                "unanimous_flip_prob": ensemble.flip_prob_unanimous(k, cfg.sigma),
                "accuracy_clean": rep.accuracy["clean_student"],
                "accuracy_noisy": rep.accuracy["noisy_student_mean"],
                "epsilon": rep.privacy["epsilon"],
            })
            for g in rep.groups:
                row[f"excess01_group{g.group}"] = g.excess_risk_01
            row["error"] = ""
        except Exception as exc:  # per-value failures must not kill the sweep
            row["error"] = f"{type(exc).__name__}: {exc}"
        rows.append(row)
    return rows


def _round_sig(x, digits=12):
    if isinstance(x, float):
        if not math.isfinite(x):
            return x
        return float(f"{x:.{digits}g}")
    if isinstance(x, dict):
        return {k: _round_sig(v, digits) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_round_sig(v, digits) for v in x]
    return x


def report_to_dict(report: FairnessReport) -> dict:
    out = {
        "config": report.config,
        "privacy": report.privacy,
        "accuracy": report.accuracy,
        "gap": {"zero_one": report.gap_01, "cross_entropy": report.gap_ce},
        "deviation": {"first_moment": report.deviation.first_moment,
                      "second_moment": report.deviation.second_moment,
                      "repetitions": report.deviation.repetitions,
                      "values": list(report.deviation.values)},
        "bounds": report.bounds,
        "groups": [dataclasses.asdict(g) for g in report.groups],
        "diagnostics": {k: np.asarray(v).tolist()
                        for k, v in report.diagnostics.items()},
    }
    return _round_sig(out)


def emit_report(report: FairnessReport, fmt: str, path) -> None:
    """Write a report as JSON (full) or CSV (per-sample diagnostics)."""
    if fmt == "json":
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(report_to_dict(report), fh, indent=2, sort_keys=True)
            fh.write("\n")
    elif fmt == "csv":
        d = report.diagnostics
        cols = ["idx", "group", "norm", "closeness", "flip_prob", "excess01"]
        rounded = {c: _round_sig(np.asarray(d[c]).tolist()) for c in cols}
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(",".join(cols) + "\n")
            for i in range(len(rounded["idx"])):
                fh.write(",".join(str(rounded[c][i]) for c in cols) + "\n")
    else:
        raise ConfigError(f"unknown report format {fmt!r} (expected json or csv)")


def emit_sweep_csv(rows: list[dict], path) -> None:
    cols = sorted({k for row in rows for k in row})
    lead = ["param", "value", "seed"]
    cols = lead + [c for c in cols if c not in lead]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(cols) + "\n")
        for row in rows:
            fh.write(",".join(str(_round_sig(row.get(c, ""))) for c in cols) + "\n")


def norm_contrast_config(seed: int, **overrides) -> ExperimentConfig:
    """Two-group benchmark where the larger-norm group also sits closer to
    the boundary, mirroring tail samples in tabular data."""
    raw = {"dataset": {"type": "synth", "n": 4000, "d": 10,
                       "margins": [2.0, 0.5], "scales": [1.0, 3.0]},
           "seed": seed}
    return ExperimentConfig.from_dict(_merge_defaults(raw, overrides))


def boundary_contrast_config(seed: int, **overrides) -> ExperimentConfig:
    """Two-group benchmark differing only in distance to the true boundary.

    The ensemble is kept small (50 teachers) and the student lightly
    regularized so that vote flips on the near-boundary group leave a
    visible footprint in the student; this is the regime where soft-label
    transfer has room to help.
    """
    raw = {"dataset": {"type": "synth", "n": 4000, "d": 10,
                       "margins": [2.0, 0.5], "scales": [1.0, 1.0]},
           "split": {"num_teachers": 50},
           "student": {"lam": 20.0},
           "seed": seed}
    return ExperimentConfig.from_dict(_merge_defaults(raw, overrides))
