"""RED gradient descent stabilized by a data-driven spectral-radius monitor.

The solver iterates x <- x - gamma * (grad_f(x) + lambda * (x - D(x))) and,
in skoop mode, fits a linear operator to low-dimensional features of the
recent iterate trajectory; when that operator's spectral radius exceeds 1,
the step size is shrunk by exp(-beta * (rho - 1)) at checkpointed
iterations. See the README for the CLI and file formats.
"""

from .bridge import BridgeError, DenoiserBridge, serve_denoiser
from .denoisers import (
    BoxBlur,
    Denoiser,
    EquivariantDenoiser,
    ExternalDenoiser,
    GaussianSmooth,
    Identity,
    Median,
    UnsharpExpansive,
    denoise,
    denoiser_residual,
    equivariant_wrap,
    make_denoiser,
)
from .features import FEATURES_PER_CHANNEL, channel_stats, dct_lowfreq, extract_features, grid_pool_means
from .forward import (
    Deblur,
    ForwardModel,
    Kernel,
    Measurement,
    Superresolve,
    apply_adjoint,
    apply_forward,
    bicubic_upsample,
    box_kernel,
    convolve_circular,
    correlate_circular,
    data_gradient,
    estimate_gradient_lipschitz,
    gaussian_kernel,
    identity_kernel,
    load_kernel,
    parse_kernel,
    simulate_measurement,
)
from .image import (
    Image,
    Metrics,
    NonFiniteImageError,
    PSNR_EXACT_DB,
    ShapeMismatchError,
    l2_distance,
    mse,
    psnr,
)
from .koopman import EigenvalueError, KoopmanEstimate, SnapshotWindow, estimate_koopman, spectral_radius
from .scheduler import CheckpointEvent, CheckpointRule, StepSchedule, is_checkpoint, shrink_factor
from .solver import (
    IterationRow,
    OverheadReport,
    RunConfig,
    RunResult,
    RunStatus,
    TrajectoryRecord,
    overhead_report,
    red_step,
    run,
)

__version__ = "0.1.0"
