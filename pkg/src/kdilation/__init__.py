"""Volume growth, k-dilation and Lyapunov exponents of smooth maps."""

__version__ = "0.1.0"

from .estimators import CocycleGrowth, DilationEstimator, LyapunovSpectrum, TheoremVerifier
from .exterior import (
    LogNorm,
    cocycle_log_norm,
    exterior_log_norm,
    minor_matrix_log_norm,
)
from .lyapunov import (
    Spectrum,
    StageError,
    TheoremConfig,
    TheoremReport,
    chi_partial_sum,
    limit_diagnostic,
    lyapunov_spectrum,
    verify_theorem,
)
from .measures import (
    EmpiricalMeasure,
    SpreadReport,
    WitnessResult,
    integrate_log_norm,
    invariance_residual,
    spread_in_time,
    witness_point,
)
from .systems import SystemDef, evaluate, iterate, jacobian, lipschitz_bound, make_system
from .volume import (
    DilationEstimate,
    Disk,
    DiskFamily,
    QuadratureGrid,
    default_disk_family,
    default_grid,
    estimate_dilation,
    log_iterated_volume,
    log_volume,
)
