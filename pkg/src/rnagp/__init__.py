"""Recursive multi-fidelity Gaussian-process emulation.

A hierarchy of computer-model fidelities is emulated by chaining GPs: the
cheapest level gets an ordinary GP, and each level above conditions on the
previous level's output as an extra input coordinate.  Posterior moments
of the top level are available in closed form, the predictive variance
splits into per-level contributions, and four cost-aware acquisition
strategies grow the nested designs under a simulation budget.
"""

from .active_learning import (STRATEGIES, AcquisitionResult, AlOptions,
                              AlRecord, AlTrace, CostModel, al_loop,
                              alc_criterion, ald_criterion, alm_criterion,
                              almc_select, optimize_acquisition,
                              select_acquisition)
from .adapters import (AdapterError, BuiltinAdapter, CachedSimulator,
                       SubprocessAdapter, resolve_adapter)
from .benchmarks import (PROBLEMS, SyntheticProblem, get_problem,
                         make_dataset, run_experiment)
from .data import MATCH_TOL, DatasetError, MultiFidelityDataset
from .design import (NestedDesign, Violation, lhs, maximin_lhs,
                     nested_design, validate_nested)
from .emulator import PosteriorMoments, RnaEmulator, VarianceDecomposition
from .gp import (FitError, FitOptions, LevelGP, conditional_moments,
                 fit_level, neg_log_likelihood, rebuild_level)
from .kernels import (JITTER_DEFAULT, ConditioningError, KernelKind,
                      Lengthscales)
from .metrics import crps, rmse
from .moments import (expected_psi, expected_psi_cross, expected_psi_elem,
                      expected_psi_pair)
from .serialize import (RunConfig, SerializationError, StaleModelError,
                        dataset_fingerprint, load_dataset, load_emulator,
                        load_run_config, save_dataset, save_emulator)

__version__ = "0.1.0"

__all__ = [
    "AcquisitionResult",
    "AdapterError",
    "AlOptions",
    "AlRecord",
    "AlTrace",
    "BuiltinAdapter",
    "CachedSimulator",
    "ConditioningError",
    "CostModel",
    "DatasetError",
    "FitError",
    "FitOptions",
    "JITTER_DEFAULT",
    "KernelKind",
    "Lengthscales",
    "LevelGP",
    "MATCH_TOL",
    "MultiFidelityDataset",
    "NestedDesign",
    "PROBLEMS",
    "PosteriorMoments",
    "RnaEmulator",
    "RunConfig",
    "STRATEGIES",
    "SerializationError",
    "StaleModelError",
    "SubprocessAdapter",
    "SyntheticProblem",
    "VarianceDecomposition",
    "Violation",
    "al_loop",
    "alc_criterion",
    "ald_criterion",
    "alm_criterion",
    "almc_select",
    "conditional_moments",
    "crps",
    "dataset_fingerprint",
    "expected_psi",
    "expected_psi_cross",
    "expected_psi_elem",
    "expected_psi_pair",
    "fit_level",
    "get_problem",
    "lhs",
    "load_dataset",
    "load_emulator",
    "load_run_config",
    "make_dataset",
    "maximin_lhs",
    "neg_log_likelihood",
    "nested_design",
    "optimize_acquisition",
    "rebuild_level",
    "resolve_adapter",
    "rmse",
    "run_experiment",
    "save_dataset",
    "save_emulator",
    "select_acquisition",
    "validate_nested",
]
