"""Skeleton gait recognition with spatio-temporal graph convolutions."""

from ._gaitgcn import (
    CheckpointError,
    EmbeddingRecord,
    FormatError,
    JOINT_NAMES,
    Model,
    Sequence,
    ShapeError,
    TrainingDivergedError,
    default_config_json,
    derive_bone,
    derive_motion,
    evaluate_rank1,
    full_adjacency,
    fuse_two_branch,
    generate_synthetic,
    gradcheck,
    hop_distances,
    k_adjacency,
    lambda_sweep,
    load_sequence,
    natural_adjacency,
    normalize_aggregator,
    normalize_coords,
    read_embeddings,
    resample_to_length,
    resolve_config,
    run_cli,
    save_sequence,
    select_joints,
    selftest,
    split_by_protocol,
    write_embeddings,
)

__version__ = "0.1.0"
