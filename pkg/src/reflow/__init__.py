"""Twisted loop-group connections, their frames, and checks on the projected immersions."""
from .liecore import (Family, NotInAlgebraError, SymmetricPairSpec, build_lagrangian_pair,
                      build_space_form_pair, decompose, rank_oracle, trace_form)
from .loops import ConnectionField, GridChart, LaurentMatrixPoly, load_connection, r_lambda, save_connection
from .zerocurv import (RankObstruction, commuting_vacuum, integrate_frame, local_solution, mc_residual,
                       vacuum_solution)

__all__ = [
    "Family", "NotInAlgebraError", "SymmetricPairSpec", "build_lagrangian_pair", "build_space_form_pair",
    "decompose", "rank_oracle", "trace_form", "ConnectionField", "GridChart", "LaurentMatrixPoly",
    "load_connection", "r_lambda", "save_connection", "RankObstruction", "commuting_vacuum",
    "integrate_frame", "local_solution", "mc_residual", "vacuum_solution",
]
