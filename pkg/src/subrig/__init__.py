"""Numerical toolkit for hypersurfaces in vertically rigid sub-Riemannian spaces."""

__version__ = "0.1.0"

from .catalog import carnot, catalog, engel, heisenberg, heisenberg1, hxr, make_carnot_data, martinet
from .expr import Jet2, eval_jet2, evaluate, parse, unparse
from .hypersurface import Hypersurface, Patch, horizontal_frame_at, perimeter
from .shape import divergence_oracle, mean_curvature, second_fundamental_form
from .structure import VRStructure, check_vertical_rigidity, load_structure

__all__ = [
    "Hypersurface",
    "Jet2",
    "Patch",
    "VRStructure",
    "carnot",
    "catalog",
    "check_vertical_rigidity",
    "divergence_oracle",
    "engel",
    "eval_jet2",
    "evaluate",
    "heisenberg",
    "heisenberg1",
    "horizontal_frame_at",
    "hxr",
    "load_structure",
    "make_carnot_data",
    "martinet",
    "mean_curvature",
    "parse",
    "perimeter",
    "second_fundamental_form",
    "unparse",
]
