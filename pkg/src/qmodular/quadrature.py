"""Contour integration: lines for state integrals, circles for residues.

The shipped integrands are analytic with Gaussian or exponential decay
along the contour, so the trapezoid rule converges spectrally; refinement
doubles the node count and the error estimate is the last refinement delta.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

from .core import DEFAULT_POLICY, PrecisionPolicy


class DivergenceError(ValueError):
    """Integrand does not decay at the contour endpoints."""


class AccuracyError(ValueError):
    """Target tolerance not reached after the allowed refinements."""


class ContourError(ValueError):
    """Pole on (or too close to) the contour."""


@dataclass(frozen=True)
class ContourSpec:
    kind: str                 # "line" | "circle"
    center: complex = 0.0
    direction: complex = 1.0  # unit complex, line only
    halflen: float = 6.0      # line only
    radius: float = 0.1       # circle only
    eps: float = 0.0          # pole-separating offset (added to center)


def integrate_line(f, spec: ContourSpec, policy: PrecisionPolicy = DEFAULT_POLICY,
                   tol: float | None = None):
    """Trapezoid integral of f along center + direction*[-halflen, halflen].

    Returns (value, err) where err is the last refinement delta.  Raises
    DivergenceError when the integrand fails to decay at the endpoints and
    AccuracyError when refinement stalls above the tolerance.
    """
    if spec.kind != "line":
        raise ValueError("integrate_line needs a line ContourSpec")
    c = complex(spec.center) + complex(spec.eps)
    d = complex(spec.direction)
    d = d / abs(d)
    L = float(spec.halflen)
    n = max(64, policy.quad_nodes)

    # endpoint decay check against the contour peak
    probes = [f(c + d * (L * s)) for s in (-1.0, -0.5, 0.0, 0.5, 1.0)]
    peak = max(abs(p) for p in probes)
    if peak > 0 and max(abs(probes[0]), abs(probes[-1])) > 1e-10 * peak:
        raise DivergenceError("integrand not decayed at contour endpoints")

    def trap(m):
        h = 2.0 * L / m
        s = 0.5 * (f(c - d * L) + f(c + d * L))
        for j in range(1, m):
            s += f(c - d * L + d * (h * j))
        return s * h * d

    val = trap(n)
    err = math.inf
    for _ in range(policy.quad_refinements):
        n *= 2
        new = trap(n)
        err = abs(new - val)
        val = new
        if err < (tol if tol is not None else policy.rel_tol) * max(1.0, abs(val)):
            break
    if tol is not None and err > tol * max(1.0, abs(val)):
        raise AccuracyError(f"quadrature error {err:.2e} above tolerance")
    return val, err


def residue_circle(f, center, radius, policy: PrecisionPolicy = DEFAULT_POLICY,
                   n: int | None = None) -> complex:
    """(1/2 pi i) closed-contour integral of f around the circle.

    Equals the residue of f at the enclosed pole.  Trapezoid on the circle
    is spectrally accurate for integrands meromorphic off the center region.
    """
    center = complex(center)
    radius = float(radius)
    if radius <= 0:
        raise ContourError("radius must be positive")
    m = n if n is not None else max(128, policy.quad_nodes)
    total = 0.0 + 0j
    for j in range(m):
        w = cmath.exp(2j * math.pi * j / m)
        xi = center + radius * w
        fv = f(xi)
        if not (abs(fv) < 1e300):
            raise ContourError("pole on the residue contour")
        total += fv * w
    return total * radius / m
