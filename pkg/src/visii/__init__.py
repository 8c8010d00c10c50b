"""visii: learn an image edit from one before/after pair, then reuse it.

The library optimizes a soft text-instruction embedding against a frozen
instruction-conditioned latent-diffusion editor so that the embedding turns
the "before" image into the "after" image. The learned instruction can then
be applied to new images, optionally concatenated with fresh user text.
"""

from .backend import BackendConfig, EditorBackend, load_backend, resolve_config
from .editor import ApplyResult, GuidanceConfig, apply_instruction, step_schedule
from .errors import (
    BackendError,
    BackendUnavailableError,
    CaptionerError,
    DataError,
    DegenerateDirectionError,
    GeometryError,
    InversionDivergedError,
    SerializationError,
    TokenOverflowError,
    UsageError,
    VisiiError,
)
from .instruction import (
    Captioner,
    InstructionEmbedding,
    StaticCaptioner,
    concat_user_text,
    init_from_captioner,
    init_from_text,
)
from .inversion import (
    EditDirection,
    ImagePair,
    InversionConfig,
    LossBreakdown,
    NoisePlan,
    checkpoint,
    clip_alignment_loss,
    compute_edit_direction,
    invert,
    reconstruction_loss,
)
from .metrics import (
    directional_clip_similarity,
    evaluate_dataset,
    image_clip_similarity,
    visual_clip_similarity,
)
from .samples import sample_images, synthetic_scene
from .types import MAX_CONTENT_TOKENS, SEQUENCE_WIDTH, ClipVector, LatentImage, NoiseEstimate

__version__ = "0.1.0"

__all__ = [
    "ApplyResult",
    "BackendConfig",
    "BackendError",
    "BackendUnavailableError",
    "Captioner",
    "CaptionerError",
    "ClipVector",
    "DataError",
    "DegenerateDirectionError",
    "EditDirection",
    "EditorBackend",
    "GeometryError",
    "GuidanceConfig",
    "ImagePair",
    "InstructionEmbedding",
    "InversionConfig",
    "InversionDivergedError",
    "LatentImage",
    "LossBreakdown",
    "MAX_CONTENT_TOKENS",
    "NoiseEstimate",
    "NoisePlan",
    "SEQUENCE_WIDTH",
    "SerializationError",
    "StaticCaptioner",
    "TokenOverflowError",
    "UsageError",
    "VisiiError",
    "apply_instruction",
    "checkpoint",
    "clip_alignment_loss",
    "compute_edit_direction",
    "concat_user_text",
    "directional_clip_similarity",
    "evaluate_dataset",
    "image_clip_similarity",
    "init_from_captioner",
    "init_from_text",
    "sample_images",
    "invert",
    "load_backend",
    "reconstruction_loss",
    "resolve_config",
    "step_schedule",
    "synthetic_scene",
    "visual_clip_similarity",
    "__version__",
]
