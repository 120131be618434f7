"""Linear q-difference operators: Newton polygons, Frobenius expansion,
q-Borel/q-Laplace resummation, companion systems, duals, gauge transforms.

An operator is a sum of monomial terms

    c * q^(e_q) * t^(e_t) * (prod_p p^(e_p)) * s^(shift)

where s is the shift t -> q^shift t.  Exponents are exact Fractions, so
rational powers (q^(1/4), half shifts) stay exact; numerical evaluation
always goes through exponent coordinates (tau, z, parameter coordinates).
"""

from __future__ import annotations

import cmath
import math
import re
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .core import (DEFAULT_POLICY, DomainError, PoleError, PrecisionPolicy, e,
                   theta_val)

Frac = Fraction


class ResonanceError(ValueError):
    """Frobenius recursion hit a zero divisor not covered by the jet order."""


class ContinuationError(ValueError):
    """Functional-equation ladder failed (pole on path or no progress)."""


class UnsupportedError(ValueError):
    pass


def _frac(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        return Fraction(x).limit_denominator(64)
    if isinstance(x, str):
        return Fraction(x)
    raise TypeError(f"cannot coerce {x!r} to Fraction")


@dataclass(frozen=True)
class QMonomialTerm:
    coeff: complex
    e_q: Fraction = Fraction(0)
    e_t: Fraction = Fraction(0)
    e_param: tuple = ()          # sorted tuple of (name, Fraction)
    shift: Fraction = Fraction(0)

    def key(self):
        return (self.e_q, self.e_t, self.e_param, self.shift)

    def coeff_value(self, ctx: "EvalContext") -> complex:
        """Numeric value of c * q^e_q * prod p^e_p (the t-free part)."""
        expo = self.e_q * ctx.tau
        for name, ep in self.e_param:
            expo += ep * ctx.params[name]
        return self.coeff * e(expo)


@dataclass(frozen=True)
class EvalContext:
    """Exponent coordinates for numerical evaluation: tau, z, and parameter
    coordinates (so that a parameter p has value e(params[p]))."""
    tau: complex
    z: complex = 0.0
    params: dict = field(default_factory=dict)

    @property
    def q(self):
        return e(self.tau)

    @property
    def t(self):
        return e(self.z)


class QOperator:
    """sum_j a_j(t, q, params) s^j with rational exponents; optional
    inhomogeneous right-hand side (a list of t-monomial terms)."""

    def __init__(self, terms, rhs=(), params=()):
        merged = {}
        for tm in terms:
            if tm.coeff == 0:
                continue
            k = tm.key()
            if k in merged:
                merged[k] = QMonomialTerm(merged[k].coeff + tm.coeff, *k)
            else:
                merged[k] = tm
        self.terms = tuple(tm for tm in merged.values() if tm.coeff != 0)
        self.rhs = tuple(rhs)
        self.params = tuple(params)
        if not self.terms:
            raise DomainError("empty operator")

    # -- basic structure ---------------------------------------------------

    @property
    def shifts(self):
        return sorted({tm.shift for tm in self.terms})

    @property
    def order(self) -> Fraction:
        s = self.shifts
        return s[-1] - s[0]

    def shift_denominator(self) -> int:
        d = 1
        for tm in self.terms:
            d = _lcm(d, tm.shift.denominator)
        return d

    def rebased(self) -> tuple["QOperator", int]:
        """Clear rational shifts by rebasing q -> q^(1/d): shifts and e_q are
        scaled by d so all shifts are integers.  Returns (op', d); op' is an
        operator in the variable q' with q = q'^d."""
        d = self.shift_denominator()
        if d == 1:
            return self, 1
        terms = [QMonomialTerm(tm.coeff, tm.e_q * d, tm.e_t, tm.e_param,
                               tm.shift * d) for tm in self.terms]
        rhs = [QMonomialTerm(tm.coeff, tm.e_q * d, tm.e_t, tm.e_param,
                             tm.shift * d) for tm in self.rhs]
        return QOperator(terms, rhs, self.params), d

    def scaled(self, c, e_q=Frac(0), e_t=Frac(0)) -> "QOperator":
        terms = [QMonomialTerm(tm.coeff * c, tm.e_q + e_q, tm.e_t + e_t,
                               tm.e_param, tm.shift) for tm in self.terms]
        rhs = [QMonomialTerm(tm.coeff * c, tm.e_q + e_q, tm.e_t + e_t,
                             tm.e_param, tm.shift) for tm in self.rhs]
        return QOperator(terms, rhs, self.params)

    def sigma_compose(self, s=Frac(1)) -> "QOperator":
        """sigma^s o L: each c q^e t^m sigma^j becomes c q^(e+s*m) t^m sigma^(j+s)."""
        s = _frac(s)
        terms = [QMonomialTerm(tm.coeff, tm.e_q + s * tm.e_t, tm.e_t,
                               tm.e_param, tm.shift + s) for tm in self.terms]
        rhs = [QMonomialTerm(tm.coeff, tm.e_q + s * tm.e_t, tm.e_t,
                             tm.e_param, tm.shift + s) for tm in self.rhs]
        return QOperator(terms, rhs, self.params)

    # -- numeric action ----------------------------------------------------

    def apply(self, f, ctx: EvalContext, z=None) -> complex:
        """(L f)(t) at t = e(z) (z defaults to ctx.z); f is a callable of the
        exponent coordinate zz, i.e. f(zz) ~ f(e(zz))."""
        zz = ctx.z if z is None else z
        total = 0.0 + 0j
        for tm in self.terms:
            c = tm.coeff_value(ctx) * e(tm.e_t * zz)
            total += c * f(zz + tm.shift * ctx.tau)
        return total

    def rhs_value(self, ctx: EvalContext, z=None) -> complex:
        zz = ctx.z if z is None else z
        total = 0.0 + 0j
        for tm in self.rhs:
            total += tm.coeff_value(ctx) * e(tm.e_t * zz)
        return total

    def residual(self, f, ctx: EvalContext, z=None) -> complex:
        return self.apply(f, ctx, z) - self.rhs_value(ctx, z)

    def __repr__(self):
        return "QOperator(" + " + ".join(
            f"{tm.coeff}*q^({tm.e_q})*t^({tm.e_t})"
            + "".join(f"*{n}^({p})" for n, p in tm.e_param)
            + f"*s^({tm.shift})" for tm in self.terms) + ")"


def _lcm(a, b):
    return a * b // math.gcd(a, b)


def _frac_gcd(fracs):
    g = None
    for s in fracs:
        s = abs(s)
        g = s if g is None else Fraction(
            math.gcd(g.numerator * s.denominator, s.numerator * g.denominator),
            g.denominator * s.denominator)
    return g


# ---------------------------------------------------------------------------
# operator text format
# ---------------------------------------------------------------------------

def _split_terms(text):
    """Split a sum into (sign, body) pairs at top-level +/- only."""
    out = []
    sign, body, depth = 1, "", 0
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch in "+-" and depth == 0:
            if body.strip():
                out.append((sign, body))
            sign, body = (1 if ch == "+" else -1), ""
        else:
            body += ch
    if body.strip():
        out.append((sign, body))
    return out


_FACT_RE = re.compile(r"""
    ^(?:
        (?P<num>\(?-?\d+(?:/\d+)?\)?|\(?-?\d*\.\d+\)?)
      | (?P<var>[A-Za-z_][A-Za-z_0-9]*)\s*(?:\^\s*\(?(?P<exp>-?\d+(?:/\d+)?)\)?)?
    )$
""", re.X)


def parse_operator(text: str, params=()) -> QOperator:
    """Parse `c * q^(p/r) * t^(m) * x^(k) * s^(j/r)` sums into a QOperator.

    `s` is the shift symbol; any other variable name must be declared in
    params.  Example: "t*q*s^(1) + 1 - 2*t + t*q^(-1)*s^(-1)".
    """
    text = text.replace("**", "^")
    terms = []
    for sign, body in _split_terms(text):
        coeff = complex(sign)
        e_q = Frac(0)
        e_t = Frac(0)
        shift = Frac(0)
        e_param = {}
        for fact in body.split("*"):
            fact = fact.strip()
            if not fact:
                continue
            fm = _FACT_RE.match(fact)
            if not fm:
                raise ValueError(f"cannot parse factor {fact!r}")
            if fm.group("num") is not None:
                s = fm.group("num").strip("()")
                coeff *= complex(Fraction(s)) if "/" in s or "." not in s \
                    else complex(float(s))
                continue
            var = fm.group("var")
            expo = Frac(fm.group("exp")) if fm.group("exp") else Frac(1)
            if var == "q":
                e_q += expo
            elif var == "t":
                e_t += expo
            elif var == "s":
                shift += expo
            elif var in params:
                e_param[var] = e_param.get(var, Frac(0)) + expo
            else:
                raise ValueError(f"undeclared variable {var!r}")
        terms.append(QMonomialTerm(coeff, e_q, e_t,
                                   tuple(sorted(e_param.items())), shift))
    return QOperator(terms, params=params)


# ---------------------------------------------------------------------------
# Newton polygon
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NewtonEdge:
    slope: Fraction
    j_start: Fraction
    j_end: Fraction
    height_start: Fraction   # t-valuation at j_start

    def height_at(self, j) -> Fraction:
        return self.height_start + self.slope * (Fraction(j) - self.j_start)


@dataclass(frozen=True)
class NewtonPolygon:
    side: str                      # "lower" | "upper"
    vertices: tuple                # ((j, v), ...)
    edges: tuple                   # (NewtonEdge, ...)
    op: QOperator = None

    def indicial_terms(self, edge: NewtonEdge):
        """Map j -> list of terms of a_j sitting exactly on the edge line."""
        out = {}
        for tm in self.op.terms:
            j = tm.shift
            if not (edge.j_start <= j <= edge.j_end):
                continue
            if tm.e_t == edge.height_at(j):
                out.setdefault(j, []).append(tm)
        return out

    def indicial_poly(self, edge: NewtonEdge, ctx: EvalContext):
        """Coefficients c_j (as a dict j -> complex) of the indicial
        polynomial sum_j c_j rho^j for the given edge."""
        return {j: sum(tm.coeff_value(ctx) for tm in tms)
                for j, tms in self.indicial_terms(edge).items()}

    def indicial_roots(self, edge: NewtonEdge, ctx: EvalContext):
        """Roots rho of the indicial polynomial (rebased so powers of rho are
        integers), with multiplicity grouping left to the caller."""
        cj = self.indicial_poly(edge, ctx)
        js = sorted(cj)
        d = 1
        for j in js:
            d = _lcm(d, Fraction(j).denominator)
        degs = [int((j - js[0]) * d) for j in js]
        coeffs = np.zeros(max(degs) + 1, dtype=complex)
        for j, deg in zip(js, degs):
            coeffs[deg] = cj[j]
        # numpy wants highest-degree first
        return np.roots(coeffs[::-1])


def newton_polygon(op: QOperator, side: str = "lower") -> NewtonPolygon:
    """Lower (t=0) or upper (t=infinity) Newton polygon of the operator.

    Points are (j, v(a_j)) with v the min (lower) or max (upper) t-exponent
    of the sigma^j coefficient; the polygon is the lower (resp. upper)
    convex hull and lower slopes increase left to right.
    """
    if side not in ("lower", "upper"):
        raise ValueError("side must be 'lower' or 'upper'")
    vals = {}
    for tm in op.terms:
        j = tm.shift
        v = tm.e_t
        if j not in vals:
            vals[j] = v
        else:
            vals[j] = min(vals[j], v) if side == "lower" else max(vals[j], v)
    pts = sorted(vals.items())
    hull = _hull(pts, lower=(side == "lower"))
    edges = []
    for (j1, v1), (j2, v2) in zip(hull, hull[1:]):
        edges.append(NewtonEdge(Fraction(v2 - v1) / Fraction(j2 - j1),
                                j1, j2, v1))
    return NewtonPolygon(side, tuple(hull), tuple(edges), op)


def _hull(pts, lower=True):
    """Monotone-chain convex hull (lower or upper chain) of sorted points."""
    out = []
    for p in pts:
        while len(out) >= 2:
            (x1, y1), (x2, y2) = out[-2], out[-1]
            cross = (x2 - x1) * (p[1] - y1) - (y2 - y1) * (p[0] - x1)
            keep = cross > 0 if lower else cross < 0
            if keep:
                break
            out.pop()
        out.append(p)
    return out


# ---------------------------------------------------------------------------
# edge normalization
# ---------------------------------------------------------------------------

def normalize_edge(op: QOperator, edge: NewtonEdge, root=None) -> QOperator:
    """Gauge the operator so the selected edge has slope 0 (and, when a root
    spec is given, indicial root 1).

    Substituting f = theta(t; q)^kappa * g and using the theta shift
    equation theta(q^j t) = (-1)^j q^(-j(j+1)/2) t^(-j) theta(t) gives

        a_j -> a_j * (-1)^(kappa j) q^(-kappa j(j+1)/2) t^(-kappa j)

    which flattens a slope-kappa edge to slope 0; the rho-twist
    a_j -> a_j rho^j then moves the chosen indicial root to 1.  root is
    None or a QMonomialTerm whose value is rho (coeff * q^e_q * prod
    p^e_p).  kappa denominators up to 2 are supported; (-1)^(kappa j) for
    half-integer kappa j is taken as e(kappa j / 2) (principal).
    """
    kappa = edge.slope
    if kappa.denominator > 2:
        raise UnsupportedError("edge slope denominator > 2")
    terms = []
    for tm in op.terms:
        j = tm.shift
        kj = kappa * j
        phase = e(kj / 2)  # (-1)^(kappa j)
        if kj.denominator == 1:
            phase = (-1.0) ** (kj.numerator % 2)
        c = tm.coeff * phase
        e_q = tm.e_q - kappa * j * (j + 1) / 2
        e_t = tm.e_t - kj
        e_param = dict(tm.e_param)
        if root is not None:
            c *= root.coeff ** _fracpow(j)
            e_q += root.e_q * j
            for name, ep in root.e_param:
                e_param[name] = e_param.get(name, Frac(0)) + ep * j
        terms.append(QMonomialTerm(c, e_q, e_t,
                                   tuple(sorted(e_param.items())), tm.shift))
    rhs = list(op.rhs)
    return QOperator(terms, rhs, op.params)


def _fracpow(j: Fraction):
    if j.denominator == 1:
        return j.numerator
    return float(j)


# ---------------------------------------------------------------------------
# jets (truncated power series in the Frobenius deformation epsilon)
# ---------------------------------------------------------------------------

def jet_mul(a, b):
    n = len(a)
    out = np.zeros(n, dtype=complex)
    for i in range(n):
        out[i] = np.dot(a[: i + 1], b[i::-1])
    return out


def jet_inv(a):
    n = len(a)
    if a[0] == 0:
        raise ZeroDivisionError("jet not invertible")
    out = np.zeros(n, dtype=complex)
    out[0] = 1.0 / a[0]
    for i in range(1, n):
        out[i] = -np.dot(a[1: i + 1], out[i - 1::-1]) / a[0]
    return out


def jet_exp_scale(y0, j, n):
    """Jet of y0^j * e^(j eps): coefficients y0^j j^i / i!."""
    out = np.zeros(n, dtype=complex)
    yj = y0 ** j if isinstance(j, int) else cmath.exp(complex(j) * cmath.log(y0))
    f = 1.0
    for i in range(n):
        out[i] = yj * f
        f = f * complex(j) / (i + 1)
    return out


# ---------------------------------------------------------------------------
# Frobenius expansion
# ---------------------------------------------------------------------------

@dataclass
class FrobeniusSeries:
    slope: Fraction
    direction: int                 # +1 (series in t) or -1 (series in 1/t)
    root: complex                  # the indicial root that was twisted to 1
    coeffs: np.ndarray             # shape (N, jet_order); coeffs[0] = (1,0,..)
    convergence: str               # "convergent" | "q-gevrey"
    gevrey_order: float
    op: QOperator = None
    ctx: EvalContext = None

    def eval_jet(self, w: complex, kmax=None) -> np.ndarray:
        """sum_k coeffs[k] w^k as a jet; w is t^direction (numeric)."""
        n = self.coeffs.shape[0] if kmax is None else min(kmax, self.coeffs.shape[0])
        out = np.zeros(self.coeffs.shape[1], dtype=complex)
        wk = 1.0 + 0j
        for k in range(n):
            out += self.coeffs[k] * wk
            wk *= w
        return out


def frobenius_expand(op: QOperator, edge: NewtonEdge, ctx: EvalContext,
                     N: int = 40, jet_order: int = 1,
                     direction: int = 1) -> FrobeniusSeries:
    """Power-series coefficients of the edge solution of a slope-0 edge.

    The operator must already be normalized (edge slope 0, indicial root
    twisted to 1: the caller applies normalize_edge first).  direction=+1
    expands in powers of t (the t=0 side), direction=-1 in powers of 1/t.
    Coefficients are epsilon-jets of length jet_order; jets above 1 cover
    multiple indicial roots (the epsilon-coefficients of the deformed
    solution are the extra solutions).
    """
    if edge.slope != 0:
        raise ValueError("frobenius_expand needs a slope-0 (normalized) edge")
    if jet_order < 1 or jet_order > 3:
        raise UnsupportedError("jet_order must be 1..3")
    # group terms by relative t-offset m >= 0 along the direction
    v0 = edge.height_start
    groups = {}
    for tm in op.terms:
        m = (tm.e_t - v0) * direction
        if m.denominator != 1:
            raise UnsupportedError("non-integral t-offset in normalized operator")
        m = int(m)
        if m < 0:
            raise ValueError("operator has terms below the edge: wrong edge/side")
        groups.setdefault(m, []).append((tm.coeff_value(ctx), tm.shift))
    q = ctx.q

    def P_jet(m, k):
        """Jet of P_m(e^eps q^(direction*k)) = sum c (e^eps q^(dir k))^j,
        plus the termwise magnitude scale (to detect genuine cancellation)."""
        out = np.zeros(jet_order, dtype=complex)
        scale = 0.0
        for c, j in groups.get(m, []):
            jf = float(j)
            # exponent coordinate form avoids branch trouble for half shifts
            y0 = e(ctx.tau * direction * k * j)
            out += c * jet_exp_scale(1.0, jf, jet_order) * y0
            scale += abs(c * y0)
        return out, scale

    alphas = np.zeros((N, jet_order), dtype=complex)
    alphas[0, 0] = 1.0
    mmax = max(groups)
    for n in range(1, N):
        acc = np.zeros(jet_order, dtype=complex)
        for m in range(1, min(n, mmax) + 1):
            if m in groups:
                acc += jet_mul(P_jet(m, n - m)[0], alphas[n - m])
        p0, scale = P_jet(0, n)
        if abs(p0[0]) < 1e-10 * scale:
            raise ResonanceError(f"resonant zero divisor at k={n}")
        alphas[n] = jet_mul(-acc, jet_inv(p0))
    conv, gev = _classify(alphas[:, 0], q)
    return FrobeniusSeries(edge.slope, direction, 1.0 + 0j, alphas, conv, gev,
                           op, ctx)


def _classify(a, q):
    """Least-squares slope of log|a_k| against k^2/2 decides divergence."""
    mags = np.abs(a)
    mask = mags > 0
    ks = np.arange(len(a))[mask]
    if len(ks) < 6:
        return "convergent", 0.0
    x = ks.astype(float) ** 2 / 2.0
    y = np.log(mags[mask])
    slope = np.polyfit(x, y, 1)[0]
    lq = abs(math.log(abs(q)))
    if slope > 0.05 * lq:
        return "q-gevrey", slope / lq
    return "convergent", 0.0


# ---------------------------------------------------------------------------
# q-Borel / q-Laplace
# ---------------------------------------------------------------------------

def q_borel_coeffs(a, kappa, tau):
    """a_l -> (-1)^l q^(kappa l(l+1)/2) a_l (through exponent coordinates)."""
    kappa = _frac(kappa)
    a = np.asarray(a, dtype=complex)
    out = np.empty_like(a)
    for l in range(len(a)):
        out[l] = (-1) ** (l % 2) * e(tau * kappa * l * (l + 1) / 2) * a[l]
    return out


def q_laplace_inv_coeffs(a, kappa, tau):
    """The kappa<0 (coefficientwise) q-Laplace: a_l -> (-1)^l q^(-kappa l(l+1)/2) a_l."""
    return q_borel_coeffs(a, -_frac(kappa), tau)


def q_borel_op(op: QOperator, kappa) -> QOperator:
    """Operator transform under B_kappa: t^m s^j -> (-1)^m q^(kappa m(m+1)/2) t^m s^(j+kappa m)."""
    kappa = _frac(kappa)
    terms = []
    for tm in op.terms:
        m = tm.e_t
        if m.denominator != 1:
            raise UnsupportedError("q_borel_op needs integral t-exponents")
        mi = int(m)
        terms.append(QMonomialTerm(tm.coeff * (-1) ** (mi % 2),
                                   tm.e_q + kappa * mi * (mi + 1) / 2,
                                   tm.e_t, tm.e_param,
                                   tm.shift + kappa * mi))
    rhs = []
    for tm in op.rhs:
        m = int(tm.e_t)
        rhs.append(QMonomialTerm(tm.coeff * (-1) ** (m % 2),
                                 tm.e_q + kappa * m * (m + 1) / 2,
                                 tm.e_t, tm.e_param, tm.shift + kappa * m))
    return QOperator(terms, rhs, op.params)


def q_laplace(borel_eval, kappa, u_lam, z, tau,
              policy: PrecisionPolicy = DEFAULT_POLICY, lmax: int = 40) -> complex:
    """L_kappa for kappa > 0:

        1/theta(lam; q^kappa) * sum_l (-1)^l q^(kappa l(l+1)/2) lam^l
                                 * B(q^(kappa l) lam t)

    borel_eval is a callable of the multiplicative argument xi; lam = e(u_lam),
    t = e(z).  Truncated at |l| <= lmax (theta weights kill the tails for
    |q| <= 0.6).
    """
    kappa = _frac(kappa)
    if kappa <= 0:
        raise UnsupportedError("q_laplace sum form needs kappa > 0; use "
                               "q_laplace_inv_coeffs for kappa < 0")
    kt = kappa * tau
    th = theta_val(u_lam, kt, policy)
    if abs(th) < 1e-12:
        from .core import DegenerateLambdaError
        raise DegenerateLambdaError("q_laplace: theta(lambda; q^kappa) ~ 0")
    total = 0.0 + 0j
    peak = 0.0
    for direction in (1, -1):
        small = 0
        for step in range(lmax + 1):
            l = direction * step
            if direction < 0 and step == 0:
                continue
            w = (-1) ** (l % 2) * e(kt * l * (l + 1) / 2 + u_lam * l)
            xi = e(kt * l + u_lam + z)
            term = w * borel_eval(xi)
            total += term
            peak = max(peak, abs(term))
            # terms rise then fall along each direction; stop once they
            # are negligible against the largest one seen so far
            small = small + 1 if abs(term) < 1e-17 * max(peak, 1e-300) else 0
            if small >= 3 and step > 4:
                break
    return total / th


# ---------------------------------------------------------------------------
# Borel-plane continuation ladder
# ---------------------------------------------------------------------------

class BorelContinuation:
    """Analytic continuation of a Borel-plane series via its functional
    equation.

    The relation must have shifts that are non-negative multiples of a step
    h (sigma: xi -> q^h xi), with invertible sigma^0 coefficient away from
    the pole set; inside the base disk the power series is summed directly,
    outside the relation is solved for the sigma^0 term and walked inward
    along the ray xi, q^h xi, q^(2h) xi, ...
    """

    def __init__(self, op: QOperator, coeffs, radius, ctx: EvalContext,
                 policy: PrecisionPolicy = DEFAULT_POLICY):
        self.op = op
        self.coeffs = np.asarray(coeffs, dtype=complex)
        self.radius = float(radius)
        self.ctx = ctx
        self.policy = policy
        shifts = op.shifts
        if shifts[0] != 0:
            raise UnsupportedError("relation must include a sigma^0 term")
        if any(s < 0 for s in shifts):
            raise UnsupportedError("relation shifts must be non-negative")
        self.step = _frac_gcd(shifts[1:]) if shifts[1:] else Fraction(1)
        self.qh = e(ctx.tau * self.step)
        self.max_mult = max(int(s / self.step) for s in shifts)

    def _series(self, xi):
        tot = 0.0 + 0j
        w = 1.0 + 0j
        for c in self.coeffs:
            tot += c * w
            w *= xi
        return tot

    def _coeff_groups(self, xi):
        """a_k(xi) for sigma^(k*step), k = 0..max_mult, at the given xi."""
        out = [0.0 + 0j] * (self.max_mult + 1)
        for tm in self.op.terms:
            k = int(tm.shift / self.step) if self.step else 0
            val = tm.coeff_value(self.ctx)
            if tm.e_t:
                val *= _cpow_frac(xi, tm.e_t)
            out[k] += val
        return out

    def _rhs(self, xi):
        tot = 0.0 + 0j
        for tm in self.op.rhs:
            val = tm.coeff_value(self.ctx)
            if tm.e_t:
                val *= _cpow_frac(xi, tm.e_t)
            tot += val
        return tot

    def __call__(self, xi) -> complex:
        xi = complex(xi)
        if abs(xi) <= 0.9 * self.radius:
            return self._series(xi)
        # walk inward: find J with |q^(J step) xi| small enough
        aq = abs(self.qh)
        J = max(0, int(math.ceil(math.log(0.8 * self.radius / abs(xi))
                                 / math.log(aq))))
        vals = {}
        for j in range(J, J + self.max_mult + 1):
            vals[j] = self._series(xi * self.qh ** j)
        for j in range(J - 1, -1, -1):
            xij = xi * self.qh ** j
            a = self._coeff_groups(xij)
            if abs(a[0]) < 1e-3 * max(abs(v) for v in a[1:]):
                raise ContinuationError(
                    f"pole on ladder path at xi={xij:.6g}")
            acc = self._rhs(xij)
            for k in range(1, self.max_mult + 1):
                acc -= a[k] * vals[j + k]
            vals[j] = acc / a[0]
        return vals[0]

    def resubstitution_residual(self, xi) -> float:
        xi = complex(xi)
        a = self._coeff_groups(xi)
        acc = -self._rhs(xi)
        for k in range(self.max_mult + 1):
            acc += a[k] * self(xi * self.qh ** k)
        return abs(acc)


def _cpow_frac(x, p: Fraction):
    if p.denominator == 1:
        return x ** p.numerator
    return cmath.exp(float(p) * cmath.log(x))


# ---------------------------------------------------------------------------
# companion matrices, duals, gauge, inhomogeneous embedding
# ---------------------------------------------------------------------------

@dataclass
class CompanionSystem:
    op: QOperator
    r: int

    def matrix(self, ctx: EvalContext, z=None) -> np.ndarray:
        """A(t) with X(qt) = A(t) X(t), X = (f(t), ..., f(q^(r-1) t))."""
        zz = ctx.z if z is None else z
        r = self.r
        a = [0.0 + 0j] * (r + 1)
        for tm in self.op.terms:
            j = int(tm.shift)
            a[j] += tm.coeff_value(ctx) * e(tm.e_t * zz)
        if a[r] == 0:
            raise PoleError("companion: leading coefficient vanishes here")
        A = np.zeros((r, r), dtype=complex)
        for i in range(r - 1):
            A[i, i + 1] = 1.0
        for j in range(r):
            A[r - 1, j] = -a[j] / a[r]
        return A


def companion(op: QOperator) -> CompanionSystem:
    shifts = op.shifts
    if any(s.denominator != 1 for s in shifts):
        raise UnsupportedError("companion needs integer shifts (rebase first)")
    if shifts[0] != 0:
        op = op.sigma_compose(-shifts[0])
    r = int(op.shifts[-1])
    return CompanionSystem(op, r)


def dual_wedge(A, tau):
    """A^wedge(t, q) = A(qt, 1/q)^(-1) as a callable of the exponent coord z.

    A is a callable (z, tau) -> matrix; the dual inverts q, which in
    exponent coordinates is tau -> -tau, and shifts z -> z + tau... with the
    original tau (the shift by q happens before inverting q): the argument
    pair is (z + tau, -tau) evaluated with the new modular variable.
    """
    def Aw(z):
        return np.linalg.inv(A(z + tau, -tau))
    return Aw


def dual_vee(A):
    """A^vee(t,q) = (A(t,q)^(-1))^T as a callable of z (A already bound to tau)."""
    def Av(z):
        return np.linalg.inv(A(z)).T
    return Av


def gauge(P, A, tau):
    """B = (sigma P) A P^(-1): B(z) = P(z + tau) A(z) P(z)^(-1)."""
    def B(z):
        return P(z + tau) @ A(z) @ np.linalg.inv(P(z))
    return B


def inhom_embed(op: QOperator) -> QOperator:
    """Homogenize L f = r: returns (r(t) sigma - r(qt)) o L of order r+1.

    Requires a single-monomial right-hand side (covers rhs = 1 and all
    shipped examples); the result has empty rhs.
    """
    if len(op.rhs) != 1:
        raise UnsupportedError("inhom_embed needs a monomial right-hand side")
    r = op.rhs[0]
    left = op.sigma_compose(Frac(1)).scaled(r.coeff, r.e_q, r.e_t)
    # r(qt) = coeff q^(e_q + e_t) t^(e_t)
    right = op.scaled(r.coeff, r.e_q + r.e_t, r.e_t)
    terms = list(left.terms) + [QMonomialTerm(-tm.coeff, tm.e_q, tm.e_t,
                                              tm.e_param, tm.shift)
                                for tm in right.terms]
    return QOperator(terms, (), op.params)
