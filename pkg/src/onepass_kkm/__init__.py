"""Memory-frugal kernel K-means via a one-pass randomized kernel linearization."""
from .approx import (
    LowRankFactor,
    SketchConfig,
    approx_error,
    exact_truncated,
    factor_from_sketch,
    linearize,
    nystrom,
    one_pass_sketch,
)
from .cluster import (
    ClusterAssignment,
    brute_force_optimal,
    indicator_matrix,
    kernel_kmeans_full,
    kmeans,
    sum_form_objective,
    trace_objective,
)
from .data import LabeledDataset, generate_rings, load_csv, normalize_rows_unit_l2, write_csv
from .kernel import KernelSpec, KernelStream, kernel_column_block, kernel_entry, kernel_matrix
from .linalg import fwht, orthonormal_basis, solve_small, sym_eig
from .metrics import clustering_accuracy, error_functionals

__version__ = "0.1.0"
