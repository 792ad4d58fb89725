"""Numerical simulator for biphoton wave functions of parametric
down-conversion light propagated through composable optical systems."""

from .analysis import (
    CorrelationMap,
    MapKind,
    SchmidtInputs,
    difference_correlation,
    envelope_mask,
    epr_degree,
    idler_intensity,
    joint_probability,
    line_anisotropy,
    local_speckle_contrast,
    pairs_ratio,
    peak_std,
    schmidt_number,
    signal_intensity,
    speckle_contrast,
    sum_correlation,
)
from .elements import (
    Aperture,
    FreeSpace,
    LensFourier,
    OpticalElement,
    OpticalSystem,
    Phase,
    PhaseMask,
    Relay,
    apply_element,
    impulse_response,
    propagate,
    random_phase_mask,
    response_bank,
)
from .engine import (
    BiphotonWavefunction,
    CrystalSpec,
    PhaseMatching,
    Photon,
    PumpSpec,
    accumulate_pair_products,
    pump_field,
    slice_transfer,
    thick_crystal_wavefunction,
    thin_crystal_wavefunction,
)
from .errors import (
    AssemblyError,
    BiphotonError,
    ConfigError,
    GridMismatchError,
    NumericalError,
    SizeGuardError,
)
from .grid import (
    ComplexField,
    GridSpec,
    PlaneKind,
    dft2,
    dirac_field,
    idft2,
    parseval_residual,
)

__version__ = "0.1.0"
