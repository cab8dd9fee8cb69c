"""Shapley credit allocation for model outputs and losses over discrete
causal Bayesian networks.

Natures of interpretation (observational conditioning, model-specific
marginal pinning, causal do-interventions) cross with measures (expected
value, variance, Shannon entropy, cumulative paired Shannon entropy) to
define coalition games; the engine allocates each game's grand value
exactly or by kernel-weighted regression.
"""

__version__ = "0.1.0"

from .engine import (
    AttributionReport,
    RegressionPlan,
    kernel_weight,
    marginal_contribution,
    shapley_exact,
    shapley_regression,
)
from .games import (
    Game,
    Nature,
    TargetKind,
    TargetRv,
    build_empirical_game,
    build_global_game,
    build_local_game,
    build_loss_game,
    build_mean_prediction_loss_game,
)
from .harness import (
    ClusteringResult,
    SensitivityCurve,
    clustering_sweep,
    loss_clustering,
    sensitivity_sweep,
    supervised_clustering,
)
from .measures import (
    Measure,
    MeasureKind,
    conditional_measure,
    cumulative_paired_entropy,
    cumulative_paired_entropy_riemann,
    cumulative_paired_mutual_information,
    expectation,
    mutual_information,
    shannon_entropy,
    variance,
)
from .models import (
    Dataset,
    ExternalModel,
    ExternalModelClient,
    KnnModel,
    LinearModel,
    LossSpec,
    ModelHandle,
    TableModel,
    attach_loss_node,
    attach_model_node,
    evaluate,
    external_evaluate_batch,
    load_dataset,
    loss_value,
)
from .network import (
    Cpt,
    Distribution,
    Network,
    Variable,
    condition,
    forward_sample,
    intervene,
    joint_marginal,
    joint_probability,
    load_network,
    parse_assignment,
    pin_marginal,
    topological_order,
)

from .cli import bundled_network_path  # noqa: E402  (depends on the above)

__all__ = [name for name in dir() if not name.startswith("_")]
