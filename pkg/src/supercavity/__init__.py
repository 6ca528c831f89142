"""Single-photon scattering through a super cavity in a coupled-cavity array."""
from .analysis import DetuningRow, Peak, PeakReport, Valley, compare_scans, detuning_sweep, find_peaks, measure_splitting
from .errors import (
    DegeneracyError,
    DomainError,
    NumericError,
    PoleError,
    ResolutionWarning,
    SplittingNotResolved,
    SupercavityError,
    WeakCouplingWarning,
)
from .exact import (
    ScatteringSolution,
    SpectrumScan,
    resonance_grid,
    scan,
    scan_grid,
    scatter_direct,
    transmission_closed_form,
)
from .model import (
    ModeSet,
    SystemParams,
    build_hamiltonian,
    diagonalize_sc,
    dispersion,
    empty_mode,
    mode_coupling,
    rabi_splitting,
    wave_vector,
)
from .numerics import SolverSystem, assemble_system, det_A, solve_scattering_system, symmetric_eigen, tridiag_det
from .tla import (
    TlaSolution,
    TwoLevelModel,
    build_tla,
    dark_state_residual,
    dressed_state_analytic,
    localized_state,
    single_channel_scatter,
    tla_scan,
    tla_scatter,
)

__version__ = "0.1.0"
