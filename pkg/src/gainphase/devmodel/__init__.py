"""Parametric and tabulated device admittance models."""

from .base import (
    TABULATED_COLUMNS, DeviceAdmittance, DeviceModelError, EquilibriumError,
    OperatingPoint, RangeError, StateSpace, linearize, load_tabulated,
    read_tabulated_csv, rescale_device, rotate_to_global, solve_equilibrium,
    write_tabulated_csv,
)
from .gfl import GFLParams, GFLModel, gfl_admittance, pll_natural_frequency
from .gfm import GFMParams, GFMModel, gfm_admittance
from .sg import SGParams, SGModel, sg_admittance
from .simple import inductor_admittance, pi_source_admittance

__all__ = [
    "TABULATED_COLUMNS", "DeviceAdmittance", "DeviceModelError", "EquilibriumError",
    "OperatingPoint", "RangeError", "StateSpace", "linearize", "load_tabulated",
    "read_tabulated_csv", "rescale_device", "rotate_to_global", "solve_equilibrium",
    "write_tabulated_csv", "GFLParams", "GFLModel", "gfl_admittance",
    "pll_natural_frequency", "GFMParams", "GFMModel", "gfm_admittance", "SGParams",
    "SGModel", "sg_admittance", "inductor_admittance", "pi_source_admittance",
]
