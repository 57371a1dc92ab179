"""Phase-domain training and hardware-aware magnitude pruning of SVD-based
coherent photonic neural networks."""

from .mesh import (
    MziNode,
    NotUnitaryError,
    UnitaryMesh,
    clements_decompose,
    mesh_forward,
    mesh_matrix,
    mzi_transfer,
    wrap_phase,
)
from .svd_layer import SvdLayer, layer_forward, layer_from_weights, layer_to_weights, ps_census
from .network import ScIpnn, TrainConfig, evaluate, forward, init_network, loss, phase_gradients, train
from .pruning import (
    ItConfig,
    NoQualifyingCandidate,
    OsConfig,
    PruneReport,
    ThresholdRule,
    apply_magnitude_prune,
    champ,
    iterative_prune,
    mean_phase,
    one_shot_prune,
    sparsity,
    threshold_for_mesh,
)
from .uncertainty import McResult, UncertaintyConfig, monte_carlo_accuracy, perturb
from .data import BmaConfig, Dataset, bma_experiment, fft_features, load_mnist_idx, random_sparse_matrix, synth_dataset

__version__ = "0.1.0"
