"""Evidence-stance detection of out-of-context image-caption pairs."""

from .clustering import ClusterAssignment, agglomerate, assign_clusters, cosine_distance
from .config import AblationConfig, ClusterConfig, ModelDims, RunConfig, TrainConfig
from .data import ClaimInstance, ingest, synth_generate, write_dataset
from .detector import build_model, evaluate, forward, load_checkpoint, predict, save_checkpoint, train
from .entitymatch import (
    EntitySet,
    RankedEntityIndex,
    build_frequency_index,
    entities_match,
    fuzzy_difference,
    fuzzy_intersection,
    normalize_entity,
)
from .srs import SrsConfig, SrsScore, g_weight, srs_score, srs_vector, zeta
from .stats import export_heatmap, summarize_srs, ztest

__version__ = "0.1.0"
