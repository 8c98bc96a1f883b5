"""Growing data-reuploading quantum circuits, simulated with numpy statevectors."""

from .errors import (
    AliasingError,
    LayoutError,
    NonIntegerFrequencyError,
    NumericError,
    SaturatedError,
    ShapeError,
    SpectrumError,
)
from .gradients import DerivativeRequest, input_derivative, parameter_shift_gradient
from .growth import GrowthEvent, GrowthSchedule, GrowthStrategy, Trigger, grow, should_grow
from .model import (
    InitSpec,
    ReuploaderModel,
    accessible_spectrum,
    ansatz_block,
    build_reuploader,
    feature_map_block,
    forward,
    fourier_coefficients,
    predict,
    reuploader_layout,
)
from .training import (
    Dataset,
    LaplaceProblem,
    TrainConfig,
    TrainReport,
    make_teacher_dataset,
    seed_sweep,
    summarize,
    train_laplace,
    train_regression,
)

__version__ = "0.1.0"
