"""Mineral classification from Raman, VNIR and LIBS spectra."""

from ._core import (
    Dataset,
    GridSpec,
    LineTable,
    Model,
    Prediction,
    Spectrum,
    SpectraminRuntimeError,
    SpectrumKind,
    ValidationError,
    accuracy_ci,
    augment,
    build_dataset,
    complementary,
    composition_mae,
    cosine_similarity,
    estimate_composition,
    fuse,
    load_dataset,
    load_model,
    match_mineral,
    model_from_bytes,
    outlier_inliers,
    parse_formula,
    preprocess,
    raman_library,
    read_spectrum,
    run_experiment,
    split,
    synth_libs,
    train,
)

__all__ = [name for name in dir() if not name.startswith("_")]
