"""Quantum Fisher information, sub-QFI and auxiliary-system information transfer."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ArgumentError,
    ConfigurationError,
    NumericPrecisionError,
    QfiError,
    RankChangeError,
    ResourceError,
    SingularDistributionError,
    StateError,
    ValidationError,
)
from .families import (  # noqa: E402
    HermitianGenerator,
    ParamStateFamily,
    bell_family,
    collective_spin,
    derivative,
    probability_curve,
    unitary_family,
)
from .measurement import ProjectiveMeasurement  # noqa: E402
from .metrics import (  # noqa: E402
    MetricReport,
    classical_fisher,
    eig_pair_product_sum,
    purity,
    qfi,
    qfi_spectral,
    sub_qfi,
    sub_qfi_general,
    sub_qfi_limit,
    sub_qfi_unitary,
    superfidelity,
    uhlmann_fidelity,
)
from .states import (  # noqa: E402
    AuxiliaryState,
    DensityOperator,
    PureState,
    hermitian_eig,
    matrix_sqrt_psd,
    partial_trace,
    random_density,
    tensor_product,
)
from .tolerances import DEFAULT, Tolerances  # noqa: E402
