"""Layer-adapted meshes and a 1D Galerkin FEM convergence harness."""

from .meshes import (
    AssumptionViolated,
    GeneratingFunction,
    LayerCells,
    Mesh,
    MeshParams,
    STypeReport,
    bakhvalov_s_function,
    decay_at_transition,
    exp_graded_function,
    exp_graded_function_for,
    generate_exp_graded_mesh,
    generate_s_type_mesh,
    grading_constant,
    max_abs_psi_derivative,
    phi_bakhvalov_s,
    phi_bakhvalov_s_deriv,
    phi_exp_graded,
    phi_exp_mapped,
    phi_exp_mapped_deriv,
    psi_derivative_max_bakhvalov,
    psi_derivative_max_exp,
    shishkin_type_function,
    transition_exp_graded,
    transition_s_type,
    validate_s_type,
)
from .problems import PROBLEMS, ExactSolution, TwoPointBVP, benchmark_problem
from .fem import (
    BandedSystem,
    DiscreteSolution,
    EnergyError,
    ReferenceElement,
    SingularMatrix,
    apply_dirichlet,
    assemble,
    dof_positions,
    energy_error,
    gauss_rule,
    lagrange_basis,
    lobatto_points,
    reference_element,
    shape_functions,
    solve_banded,
    solve_bvp,
)
from .study import (
    FAMILIES,
    ComparisonReport,
    ConvergenceTable,
    MeshReportData,
    StudyConfig,
    StudyRow,
    compare_reference,
    family_mesh,
    family_phi,
    mesh_report,
    reference_table_path,
    run_study,
)

__version__ = "0.1.0"
