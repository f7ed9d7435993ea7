"""Spiking-reservoir classification of multivariate temporal data.

Signals are spike-encoded, their variables placed onto input neurons of a
3D leaky integrate-and-fire cube by graph matching, the cube is trained
with STDP, and a rank-order output layer classifies samples (also from
truncated prefixes). The trained cube can be clustered by information
propagation, and the whole pipeline tuned by a genetic search.
"""

from .analysis import ClusterAssignment, PropagationConfig, cluster_cube, closed_form, propagate
from .dataset import DataError, SampleSet, SyntheticConfig, generate_synthetic, load_samples, truncate, write_samples
from .encoding import EncodingConfig, SpikeRaster, SpikeTrain, atb_encode, atb_threshold, encode_set
from .mapping import Mapping, MappingConfig, build_nsg, build_ssg, qap_objective, solve_mapping
from .optimizer import SEARCH_SPACE, GaConfig, evaluate_fitness, ga_optimize
from .pipeline import NeuCube, PipelineConfig, stratified_folds
from .readout import DesnnParams, baseline_wknn, classify, train_desnn
from .reservoir import Cube, CubeConfig, LIFParams, build_cube, recall, simulate, train_unsupervised
from .similarity import COINCIDENCE, DENSITY, density_correlation, max_coincidence, similarity_matrix

__version__ = "0.1.0"

__all__ = [
    "COINCIDENCE",
    "DENSITY",
    "SEARCH_SPACE",
    "ClusterAssignment",
    "Cube",
    "CubeConfig",
    "DataError",
    "DesnnParams",
    "EncodingConfig",
    "GaConfig",
    "LIFParams",
    "Mapping",
    "MappingConfig",
    "NeuCube",
    "PipelineConfig",
    "PropagationConfig",
    "SampleSet",
    "SpikeRaster",
    "SpikeTrain",
    "SyntheticConfig",
    "atb_encode",
    "atb_threshold",
    "baseline_wknn",
    "build_cube",
    "build_nsg",
    "build_ssg",
    "classify",
    "closed_form",
    "cluster_cube",
    "density_correlation",
    "encode_set",
    "evaluate_fitness",
    "ga_optimize",
    "generate_synthetic",
    "load_samples",
    "max_coincidence",
    "propagate",
    "qap_objective",
    "recall",
    "similarity_matrix",
    "simulate",
    "solve_mapping",
    "stratified_folds",
    "train_desnn",
    "train_unsupervised",
    "truncate",
    "write_samples",
]
