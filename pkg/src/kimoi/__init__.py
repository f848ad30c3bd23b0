"""Kinematic-inconsistency pseudo-fake synthesis for face videos.

Trains a transformer autoencoder over facial landmark sequences,
perturbs its latent basis weights with Gaussian noise to break natural
motion correlations, and re-renders pristine frames onto the perturbed
landmarks with piecewise-affine morphing.
"""

from .affine import AffineTransform2D, solve_affine
from .analysis import (
    CorrelationMatrix,
    artifact_series,
    block_structure_score,
    correlation_heatmap_png,
    correlation_matrix,
    correlation_to_csv,
    iid_noise_baseline,
    multivariate_noise_baseline,
    region_l1_breakdown,
    rigid_region_fixture,
    step_covariance,
)
from .delaunay import TriangleMesh, convex_hull_area, delaunay, triangle_signed_area
from .errors import (
    ConfigError,
    CorpusNotFoundError,
    CorruptCheckpointError,
    InvalidInputError,
    KimoiError,
    SequenceMismatchError,
    SingularGeometryError,
    TrainingFailureError,
)
from .frames import FrameSequence, load_frames, save_frames
from .geometry import (
    LandmarkSequence,
    MotionField,
    TemporalArtifact,
    align_sequence,
    artifact_l1,
    cumulative_reconstruction,
    motion,
    temporal_artifacts,
)
from .landmark_io import (
    LandmarkDocument,
    document_from_sequence,
    load_landmark_sequence,
    read_landmark_file,
    save_landmark_sequence,
    write_landmark_file,
)
from .model import (
    LpnConfig,
    LpnModel,
    SequenceCorpus,
    TrainingOptions,
    WeightMatrix,
    checkpoint_hash,
    decode,
    encode,
    gradient_check,
    load_checkpoint,
    loss_rec,
    loss_reg,
    save_checkpoint,
    total_loss,
    train,
)
from .morph import TriangleMask, morph_frame, morph_sequence, rasterize_mask, warp_affine
from .perturb import (
    ClipSampler,
    PerturbationSpec,
    compose_landmarks,
    generate_pseudofake_landmarks,
    max_nonrigid_timestep,
    perturb_weights,
    sample_clip,
    sample_clip_start,
    sample_regions,
)
from .pipeline import ProjectConfig, load_project_config, run_pipeline, train_from_config
from .regions import (
    ALL_REGIONS,
    INNER_REGION_GROUPS,
    N_LANDMARKS,
    NONRIGID_INDICES,
    FaceRegion,
    inner_group_indices,
    region_indices,
)
from .synth import SyntheticFaceCorpus, render_face_frames, synth_corpus, synth_sequence, write_corpus
from .template import mean_face_template

__version__ = "0.1.0"
