"""Numerical toolkit for modular linear q-difference equations.

Submodules:
    core       scalar special functions (theta, Appell-Lerch, Mordell, ...)
    quadrature contour integration and residue extraction
    qweyl      operators, Newton polygons, Frobenius, q-Borel/q-Laplace
    modular    SL2(Z) slash action, cocycles, monodromy, word decomposition
    heine      generalized q-hypergeometric bases and closed-form monodromy
    knots41    worked example modules (Pochhammer, Appell-Lerch, 4_1 family)
    cli        command-line front end
"""

from .core import (
    ModularPoint,
    ParameterSet,
    PrecisionPolicy,
    SeriesValue,
    e,
    qpoch,
    theta,
    theta_S_transform_check,
    theta_logd,
    eisenstein,
    appell_lerch,
    mordell,
    weierstrass_p,
    faddeev_phi,
)

__version__ = "0.1.0"
