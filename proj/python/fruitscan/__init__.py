"""Fruit disease recognition from color and texture descriptors."""

from ._core import (  # noqa: F401
    ClbpThreshold,
    DescriptorConfig,
    Error,
    KMeansConfig,
    build_id_matrix,
    classify,
    decode,
    descriptor_length,
    descriptor_names,
    evaluate,
    extract,
    load_image,
    rgb_to_lab,
    save_png,
    segment,
    synthesize_apple,
    train,
    write_synthetic_corpus,
)

__version__ = "0.1.0"
