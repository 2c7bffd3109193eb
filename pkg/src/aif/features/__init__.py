from .backbone import (
    PROJECTION_CHANNELS,
    STAGE_CHANNELS,
    FeatureBackbone,
    FeaturePyramid,
    extract_feature_pyramid,
)
from .descriptors import (
    GlcmConfig,
    PatchConfig,
    SentimentConfig,
    color_histogram,
    glcm_features,
    glcm_matrix,
    glcm_properties,
    gram_matrix,
    patch_features,
    quantize_gray,
    sentiment_vector,
    sentiment_vectors_from_levels,
)
from .ensemble import (
    PERSPECTIVES,
    EmotionEnsemble,
    EnsembleWeights,
    PerspectiveClassifier,
    ensemble_distribution,
)

__all__ = [
    "PROJECTION_CHANNELS",
    "STAGE_CHANNELS",
    "FeatureBackbone",
    "FeaturePyramid",
    "extract_feature_pyramid",
    "GlcmConfig",
    "PatchConfig",
    "SentimentConfig",
    "color_histogram",
    "glcm_features",
    "glcm_matrix",
    "glcm_properties",
    "gram_matrix",
    "patch_features",
    "quantize_gray",
    "sentiment_vector",
    "sentiment_vectors_from_levels",
    "PERSPECTIVES",
    "EmotionEnsemble",
    "EnsembleWeights",
    "PerspectiveClassifier",
    "ensemble_distribution",
]
