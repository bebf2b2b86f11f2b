"""Pixel clustering feature extraction (Pedacos-por-Valor) for face recognition."""

__version__ = "0.1.0"

from .baseline import EigenModel, eigen_fit, eigen_project
from .clustering import KMeansConfig, Partition, kmeans, wcss
from .dataset import HoldoutSplit, LabeledDataset, load_dataset, resize_image, stratified_holdout
from .evaluation import (
    ExperimentConfig,
    accuracy_stats,
    evaluate_split,
    nn1_classify,
    run_experiment,
    run_few_classes,
    run_k_sweep,
    run_overcluster,
)
from .pixelspace import (
    PixelVectorSet,
    devectorize,
    pixel_vectors_by_position,
    pixel_vectors_by_value,
    vectorize,
)
from .projection import (
    ProjectionMatrix,
    SelectionPlan,
    build_projection,
    feature_variances,
    fit_pedacos_por_valor,
    project,
    reconstruct,
    region_map,
    representation_error,
    select_top_variance,
)
