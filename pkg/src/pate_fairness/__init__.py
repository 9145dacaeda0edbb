"""Private teacher-ensemble learning with a per-group excess-risk fairness audit."""

from .data import Dataset, SplitSpec, load_csv, split, standardize, synth_two_group
from .ensemble import (EnsembleModel, clean_vote, flip_prob_mc, flip_prob_unanimous,
                       noisy_soft_label, noisy_vote, soft_label, train_teachers,
                       vote_counts)
from .experiment import (ExperimentConfig, boundary_contrast_config, emit_report,
                         norm_contrast_config, run_experiment, run_sweep)
from .fairness import (DeviationStats, FairnessReport, GroupStats, bound_cor1,
                       bound_cor2, bound_lemma_b1, bound_thm2,
                       closeness_to_boundary, excess_risk, fairness_gap,
                       group_gradient, group_smoothness, model_deviation, spearman)
from .models import (DecomposableLoss, ModelParams, TrainConfig, forward, gradient,
                     init_params, logistic_decomposition, loss, train_erm)
from .privacy import (PrivacyParams, RdpLedger, budget_for_target,
                      gaussian_mechanism_delta, rdp_to_dp, record_queries)

__all__ = [name for name in dir() if not name.startswith("_")]
