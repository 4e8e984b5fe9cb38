"""Synthetic net-load traces from a small observed corpus."""

from lvmc.synthesis.mapdp import ClusterModel, MapDpPrior, cluster_customers, objective
from lvmc.synthesis.markov import (
    DEFAULT_STATES,
    TransitionMatrixSet,
    build_transition_matrices,
    initial_distribution,
    kernel_sum,
    sample_initial_state,
    silverman_bandwidth,
    smooth_row,
)
from lvmc.synthesis.model import (
    NetLoadTrace,
    SynthesisModel,
    decompose,
    fit_model,
    sample_cluster_assignments,
    state_distribution,
    synthesize_pool,
    synthesize_trace,
    total_variation,
)
from lvmc.synthesis.profiles import CustomerProfile, extract_features
