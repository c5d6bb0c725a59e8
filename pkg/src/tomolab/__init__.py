"""tomolab: a desk-scale workbench for quantum state tomography.

Builds measurement strategies (standard basis, MUB, Gell-Mann bases, SIC,
PSI), simulates tomographic data under systematic map errors and detection
noise, reconstructs states by constrained maximum likelihood, and orchestrates
accuracy/efficiency comparisons across strategies.
"""

from ._kernel import BACKEND as KERNEL_BACKEND
from .bench import (
    ExperimentConfig,
    FailureProbeReport,
    SweepResult,
    TrialResult,
    failure_set_probe,
    run_basis_sweep,
    run_table,
)
from .errors import NumericalError, ValidationError
from .estimate import EstimatorResult, lsq_estimate, mle_estimate, project_psd_simplex
from .povm import (
    ICClass,
    Povm,
    PovmSetting,
    build_gmb_4,
    build_gmb_5,
    build_gmb_full,
    build_mub,
    build_named,
    build_psi,
    build_sic,
    build_standard_basis,
    certify_ic,
    load_povm,
    measurement_map,
    neumark_embed,
    save_povm,
)
from .qcore import (
    DensityMatrix,
    HermitianOperator,
    PureState,
    UnitaryMap,
    basis_state,
    eig_hermitian,
    fidelity_pure,
    haar_random_state,
    random_perturbation_unitary,
    rng_stream,
)
from .simulate import (
    ErrorModel,
    MeasurementRecord,
    TofSignal,
    born_probabilities,
    calibrated_epsilon,
    fit_tof,
    load_record,
    measure,
    prepare_state,
    save_record,
    synthesize_tof,
)

__version__ = "0.1.0"
