"""Graph dimension of Weierstrass-type functions ``W(x) = sum lam^n phi(b^n x)``."""

from .boxdim import DimensionReport, ReportOptions, ResourceGuardError, box_count, box_counts, estimate_box_dimension, full_report
from .core import (
    ConfigError,
    InvalidKernelError,
    KernelConfig,
    KernelFunction,
    Params,
    SymbolStream,
    TruncationBudget,
    Word,
    eval_Gamma,
    eval_W,
    eval_Y,
    flatten_graph,
    format_kernel_config,
    parse_kernel_config,
)
from .criterion import compute_q, predicted_dimension, reconstruct_psi, scan_degenerate
from .entropy import DigitProductMeasure, EmpiricalMeasure, entropy_dimension

__version__ = "0.1.0"
