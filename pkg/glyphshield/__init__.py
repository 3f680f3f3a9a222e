"""
glyphshield - homoglyph attacks and vision-based defenses

Build character embedding spaces from glyph images, use them to swap
characters for look-alikes, and train text classifiers that read characters
as pictures so the swaps stop working.

## Pipeline

1. **Raster** - render centered glyph bitmaps from TrueType fonts
2. **Spaces** - ICES (pixel), I2CES (glyph-classifier features) and DCES
   (Unicode names) neighbor relations
3. **Attack** - the visual perturbation operator over curated h_sets
4. **Defense** - Char-CNN, vision-based and adversarially trained models
5. **Experiments** - degradation curves and the fair split protocol

Plain meaning: Fool text classifiers with look-alike letters, then fix them.
"""

__version__ = "0.1.0"

from glyphshield.attack import (
    AttackSpec,
    HSet,
    SplitResult,
    curate_hset,
    intersection_split,
    load_hset,
    perturb_dataset,
    save_hset,
    vp_perturb,
)
from glyphshield.classifier import (
    GlyphClassifierCheckpoint,
    GlyphTrainConfig,
    build_glyph_dataset,
    extract_embedding,
    glyph_cnn_network,
    train_glyph_classifier,
)
from glyphshield.config import ConfigLoader, ExperimentConfig, load_config
from glyphshield.errors import GlyphShieldError
from glyphshield.experiments import (
    MetricsTable,
    adversarial_train,
    compare_extraction,
    degradation_curve,
    load_dataset,
    run_experiment,
)
from glyphshield.raster import (
    AugmentationSpec,
    FontFace,
    FontSet,
    GlyphBitmap,
    augment_char,
    load_font,
    load_font_set,
    rasterize_centered,
)
from glyphshield.runtime import get_runtime, set_runtime
from glyphshield.spaces import (
    EmbeddingSpace,
    NeighborSet,
    build_i2ces,
    build_ices,
    cosine,
    dces_neighbors,
    parse_names_list,
    top_k,
)
from glyphshield.text import (
    Dataset,
    TextModelCheckpoint,
    evaluate,
    load_csv,
    train_text_classifier,
)

__all__ = [
    "AttackSpec",
    "AugmentationSpec",
    "ConfigLoader",
    "Dataset",
    "EmbeddingSpace",
    "ExperimentConfig",
    "FontFace",
    "FontSet",
    "GlyphBitmap",
    "GlyphClassifierCheckpoint",
    "GlyphShieldError",
    "GlyphTrainConfig",
    "HSet",
    "MetricsTable",
    "NeighborSet",
    "SplitResult",
    "TextModelCheckpoint",
    "__version__",
    "adversarial_train",
    "augment_char",
    "build_glyph_dataset",
    "build_i2ces",
    "build_ices",
    "compare_extraction",
    "cosine",
    "curate_hset",
    "dces_neighbors",
    "degradation_curve",
    "evaluate",
    "extract_embedding",
    "get_runtime",
    "intersection_split",
    "load_config",
    "load_csv",
    "load_dataset",
    "load_font",
    "load_font_set",
    "load_hset",
    "parse_names_list",
    "perturb_dataset",
    "rasterize_centered",
    "run_experiment",
    "save_hset",
    "set_runtime",
    "glyph_cnn_network",
    "top_k",
    "train_glyph_classifier",
    "train_text_classifier",
    "vp_perturb",
]
