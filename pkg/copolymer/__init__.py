# Import the public names of each submodule so that they can be accessed
# via copolymer, e.g. instead of `from copolymer.entropy import kappa`,
# users can simply use `from copolymer import kappa`.
__version__ = "0.2.0"

from copolymer.config import ModelParams, RunConfig, load_config, model_params
from copolymer.entropy import chi_inverse, kappa, kappa_derivative, kappa_finite
from copolymer.errors import CopolymerException, ValidationError
from copolymer.interface import InterfaceTable, build_interface_table
from copolymer.column import ColumnMenu, ColumnSolver, ColumnType
from copolymer.varform import (
    ColumnMeasure,
    SlopeMeasure,
    SpeedProfile,
    VariationalSolver,
    lift_measure,
    rho_hor,
)
from copolymer.strategies import measure_family_from_disorder
from copolymer.phases import alpha_star, beta_c, classify, f_delocalized, f_full

__all__ = (
    "__version__",
    "ModelParams",
    "RunConfig",
    "load_config",
    "model_params",
    "chi_inverse",
    "kappa",
    "kappa_derivative",
    "kappa_finite",
    "CopolymerException",
    "ValidationError",
    "InterfaceTable",
    "build_interface_table",
    "ColumnMenu",
    "ColumnSolver",
    "ColumnType",
    "ColumnMeasure",
    "SlopeMeasure",
    "SpeedProfile",
    "VariationalSolver",
    "lift_measure",
    "rho_hor",
    "measure_family_from_disorder",
    "alpha_star",
    "beta_c",
    "classify",
    "f_delocalized",
    "f_full",
)
