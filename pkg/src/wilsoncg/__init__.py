"""wilsoncg: streaming nearest-neighbor fermion operator with mixed-precision CG.

The package is organized by responsibility:

* :mod:`wilsoncg.lattice` -- geometry, gamma algebra, SU(3), field containers
* :mod:`wilsoncg.wilson`  -- the operator, its adjoint/normal forms, flop counts
* :mod:`wilsoncg.stream`  -- cyclic-buffer streaming pass and pipeline model
* :mod:`wilsoncg.solver`  -- CG / CGNR / mixed-precision defect correction
* :mod:`wilsoncg.io`      -- config text, binary field files, trace files
* :mod:`wilsoncg.cli`     -- the ``wilsoncg`` command

Hot kernels are jitted with numba when available; set
``WILSONCG_BACKEND=numpy`` to force the pure-numpy twin (bit-identical
results, slower).
"""

from .errors import (
    BadMagicError,
    BreakdownError,
    ConfigError,
    DomainError,
    FieldFormatError,
    HeaderMismatchError,
    StagnationError,
    TruncatedPayloadError,
    WilsonCGError,
)
from .lattice import (
    GAMMA,
    GAMMA5,
    HIGH,
    LOW,
    GaugeField,
    LatticeGeometry,
    SpinorField,
    gamma_apply,
    neighbor_table,
    random_su3,
    su3_mulvec,
)
from .wilson import (
    FlopReport,
    WilsonParams,
    apply_normal,
    apply_wilson,
    apply_wilson_dagger,
    count_flops,
    to_dense,
)
from .stream import (
    PipelineSpec,
    TraceEvent,
    buffer_capacity,
    model_throughput,
    simulate_trace,
    stencil_kernel,
    stream_apply,
)
from .solver import (
    ResidualValue,
    SolveReport,
    SolverConfig,
    axpy,
    cg,
    cgnr_solve,
    dot,
    mixed_cg,
    true_residual,
)
from .io import (
    RunConfig,
    generate_gauge,
    parse_config,
    read_gauge,
    read_spinor,
    render_config,
    write_gauge,
    write_spinor,
    write_trace,
)
from . import backend

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
