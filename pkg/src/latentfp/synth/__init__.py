"""Synthetic master prints, latent degradation and dataset manifests."""
from .dataset import (
    MANIFEST_NAME,
    SynthConfig,
    background_bank,
    derive_seed,
    load_training_pairs,
    make_dataset,
    make_identity,
    read_manifest,
    write_manifest,
)
from .degrade import DegradeParams, aligned_target, degrade, procedural_background
from .master import SingularityModel, gabor_kernel, orientation_model, random_singularities, synth_master, vignette

__all__ = [
    "MANIFEST_NAME", "SynthConfig", "background_bank", "derive_seed", "load_training_pairs", "make_dataset",
    "make_identity", "read_manifest", "write_manifest",
    "DegradeParams", "aligned_target", "degrade", "procedural_background",
    "SingularityModel", "gabor_kernel", "orientation_model", "random_singularities",
    "synth_master", "vignette",
]
