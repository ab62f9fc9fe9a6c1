"""Deterministic federated-learning simulation engine (FedAWA and baselines)."""

from fedawa._core import (
    AggWeights,
    ClientPartition,
    ClientVector,
    Dataset,
    FedawaConfigError,
    FedawaError,
    LabelHistogram,
    LayerLayout,
    ParamVector,
    absdiff_cost,
    aggregate,
    awa_cos_weights,
    awa_objective,
    axpy,
    canonical_config,
    client_vector,
    config_hash,
    config_schema,
    cosine_similarity,
    dataset_vector,
    dirichlet_partition,
    disco_weights,
    dot,
    extreme_groups,
    fedavg_weights,
    full_histogram,
    gen_blobs,
    l2_norm,
    label_histogram,
    ldawa_weights,
    load_csv,
    load_idx,
    merge_vectors,
    optimize_weights,
    ot_distance,
    run_experiment,
    uniform_cost,
    vector_distance_matrix,
    weight_trajectory_similarity,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
