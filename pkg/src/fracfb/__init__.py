"""Numerical laboratory for the fractional Alt-Phillips free boundary problem.

Minimizers of

    J(u) = 1/2 int_{B+} y^a |grad u|^2 dx dy + int_Gamma u^gamma dx,   a = 1 - 2 sigma,

are computed on tensor grids graded toward the thin space {y = 0}, and the
regularity, nondegeneracy and barrier statements about them are probed
numerically.
"""

from fracfb.params import EnergyParams, ParameterDomainError, scaling_exponent

__version__ = "0.1.0"

__all__ = ["EnergyParams", "ParameterDomainError", "scaling_exponent", "__version__"]
