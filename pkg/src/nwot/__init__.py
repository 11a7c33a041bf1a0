"""nwot: normalized Wasserstein tooling for mixture distributions.

Exact discrete optimal transport (network simplex with dual certificates),
the normalized Wasserstein measure with learned mode proportions, mixture
fitting, mode-count estimation, clustering, and a Wasserstein-vs-normalized
comparative test, all on weighted point clouds.
"""

from nwot.core import (
    CostMatrix,
    DiscreteDistribution,
    GaussianComponent,
    MixtureComponent,
    MixtureModel,
    SimplexVector,
    cost_matrix,
    flatten,
)
from nwot.exact_ot import (
    SolverError,
    TransportPlan,
    wasserstein,
    wasserstein_bruteforce,
)
from nwot.nw import NwConfig, NwResult, nw_fixed_components, nw_measure
from nwot.fitting import (
    FitConfig,
    FitResult,
    RecoveryMetrics,
    fit_mixture,
    pi_error,
    recovery_metrics,
)
from nwot.mode_count import ModeSweepReport, nw_sweep
from nwot.clustering import ClusterAssignment, ClusterScores, assign, score
from nwot.applications import (
    ComparativeVerdict,
    DaReport,
    Verdict,
    comparative_test,
    da_reweight,
    split_by_label,
)
from nwot.datagen import MogSpec, preset, preset_names, sample_mog

__version__ = "0.1.0"

__all__ = [
    "CostMatrix",
    "DiscreteDistribution",
    "GaussianComponent",
    "MixtureComponent",
    "MixtureModel",
    "SimplexVector",
    "cost_matrix",
    "flatten",
    "SolverError",
    "TransportPlan",
    "wasserstein",
    "wasserstein_bruteforce",
    "NwConfig",
    "NwResult",
    "nw_fixed_components",
    "nw_measure",
    "FitConfig",
    "FitResult",
    "RecoveryMetrics",
    "fit_mixture",
    "pi_error",
    "recovery_metrics",
    "ModeSweepReport",
    "nw_sweep",
    "ClusterAssignment",
    "ClusterScores",
    "assign",
    "score",
    "ComparativeVerdict",
    "DaReport",
    "Verdict",
    "comparative_test",
    "da_reweight",
    "split_by_label",
    "MogSpec",
    "preset",
    "preset_names",
    "sample_mog",
    "__version__",
]
