"""Parameter search: samplers, the study loop and study persistence."""
from ..space import ParameterBoundsError, SearchSpace
from .samplers import (ParzenEstimator, RandomSampler, TPEConfig, TPESampler, make_sampler,
                       sample_uniform, split_history, suggest_tpe)
from .storage import (StudyFormatError, append_trial, load_study, save_study, write_header)
from .study import (Evaluation, RolloutObjective, Study, Trial, best, best_so_far, check_compatible,
                    evaluate_on, run_study, run_trials, trial_seed)

__all__ = [
    "ParameterBoundsError", "SearchSpace", "ParzenEstimator", "RandomSampler", "TPEConfig",
    "TPESampler", "make_sampler", "sample_uniform", "split_history", "suggest_tpe",
    "StudyFormatError", "append_trial", "load_study", "save_study", "write_header", "Evaluation",
    "RolloutObjective", "Study", "Trial", "best", "best_so_far", "check_compatible", "evaluate_on",
    "run_study", "run_trials", "trial_seed",
]
