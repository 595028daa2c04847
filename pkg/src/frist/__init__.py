"""FRIST: flipping and rotation invariant sparsifying transform learning,
with patch-based denoising, inpainting, and blind-CS MRI reconstruction."""

from .operators import (
    FROperator,
    apply,
    apply_transpose,
    build_operator,
    child_transform,
    enumerate_candidates,
    identity_operator,
)
from .transforms import (
    SingularTransformError,
    dct_matrix,
    global_threshold,
    hard_threshold,
    objective,
    project_sparse,
    regularizer,
    sparsification_error,
)
from .learning import (
    FristModel,
    LearnConfig,
    LearnTrace,
    SparseCodeSet,
    eliminate_clusters,
    learn,
    reconstruct_patch,
    sparse_code_and_cluster,
    transform_update,
)
from .model_io import load_model, save_model
from .patches import PatchSet, aggregate, clamp_intensity, extract, psnr
from .denoising import DenoiseConfig, denoise, denoise_pass, patch_restore, sparsity_search
from .inpainting import (
    InpaintConfig,
    inpaint,
    inpaint_patch_noiseless,
    inpaint_patch_robust,
    penalty_cluster,
)
from .mri import (
    KSpaceData,
    MriConfig,
    approximate_cluster,
    dft2,
    idft2,
    image_update,
    make_mask,
    mri_sparse_code,
    reconstruct,
    unitary_update,
    zero_filled,
)

__version__ = "0.1.0"
