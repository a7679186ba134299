"""floodbench: evaluation toolkit for mask-conditioned flood-image generation.

The package provides, independent of any trained network:

- mask-quality metrics (error rate, F05, edge coherence) against
  ternary {cannot, may, must}-be-flooded labels,
- the training-loss formulas as verifiable numerical kernels with a
  finite-difference gradient checker,
- the percentile-bootstrap machinery of the paired ablation
  methodology (20 % trimmed means, confidence intervals, p-values),
- a CLI and an HTTP service for pairwise human preference studies.
"""

from .bootstrap import (
    BootstrapResult,
    BootstrapSettings,
    ModelConfig,
    PreferenceEstimate,
    TECHNIQUES,
    ablation_study,
    bootstrap_ci,
    paired_differences,
    preference_ci,
    standard_ablation_grid,
    technique_pairs,
    trimmed_mean,
)
from .gradcheck import GradCheckReport, grad_check
from .losses import (
    CombinedLosses,
    SpadeParams,
    WganLosses,
    align_disparity,
    bce_loss,
    ce_loss,
    combined_losses,
    composite_flood,
    dada_fuse,
    em_loss,
    gi_loss,
    gradient_matching_loss,
    self_information,
    spade_denorm,
    ssimse_loss,
    tv_loss,
    wgan_losses,
)
from .metrics import (
    MetricRecord,
    edge_coherence,
    error_rate,
    evaluate_dataset,
    evaluate_image,
    f05_score,
)
from .rasters import (
    CANNOT,
    MAY,
    MUST,
    BinaryMask,
    BoundarySet,
    ChannelField,
    LossWeights,
    SoftMask,
    TernaryLabelMap,
    confusion_counts,
    load_image,
    load_label_map,
    load_mask,
    read_raster,
    sobel_boundary,
    write_raster,
)

__version__ = "0.1.0"
