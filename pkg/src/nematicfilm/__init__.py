"""Thin-film nematic liquid-crystal simulator.

Minimizes the planar tensor energy over discretized domains with
degree-k/2 boundary data, locates half-degree disclinations, and checks
the asymptotic laws the model obeys as the coherence length shrinks:
defect quantization, logarithmic energy growth, renormalized-energy
placement, and the disk virial inequality.
"""

from .defects import (
    ChargeMismatchError,
    DefectRecord,
    DefectSet,
    WellMetrics,
    detect_defects,
    director_angles,
    well_metrics,
    winding_on_loop,
)
from .diagnostics import (
    AsymptoticsFit,
    InsufficientSamplesError,
    NotADiskError,
    PohozaevReport,
    ShiftReport,
    bulk_bound_monitor,
    corollary_shift_check,
    fit_energy_asymptotics,
    pohozaev_check,
)
from .domain import (
    BoundaryData,
    Disk,
    Ellipse,
    Grid,
    PhaseJumpTooLargeError,
    ResolutionTooCoarseError,
    RoundedRect,
    Shape,
    boundary_degree,
    build_grid,
    make_boundary_data,
)
from .energy import (
    ClassicBulk,
    CustomBulk,
    EnergyBreakdown,
    ModelParams,
    NegativePsqError,
    gradient_G,
    total_CSH,
    total_F,
    total_G,
    total_GL,
)
from .harness import VERSION as __version__
from .harness import ConfigInvalidError, RunConfig, execute, parse_config, run, sweep, wmap
from .qtensor import (
    EigenSystem,
    NotInS0Error,
    Phase,
    PRPoint,
    QTensor,
    ZeroPError,
    eigensystem_pr,
    from_pr,
    to_pr,
)
from .renorm import (
    CellProblemResult,
    Configuration,
    DefectTooCloseToBoundaryError,
    argmin_W,
    cell_problem_L,
    harmonic_h,
    limit_field,
    renormalized_W,
    scan_W,
)
from .solver import (
    DivergedError,
    PRField,
    SolveReport,
    SolveSchedule,
    VectorField,
    el_residual,
    init_field,
    minimize,
    minimize_csh,
    minimize_gl,
    solve_lcd,
)

__all__ = [name for name in dir() if not name.startswith("_")]
