"""Scalar special functions: theta, Pochhammer, Appell-Lerch, Mordell, wp.

Conventions. e(x) = exp(2*pi*i*x) throughout.  A point on the modular side
is a pair (z, tau) with t = e(z), q = e(tau), ttil = e(z/tau),
qtil = e(-1/tau).  Every fractional power of t, q or of a parameter is
computed through the exponent coordinate (e.g. q**(1/4) is e(tau/4)); we
never raise the multiplicative variables themselves to fractional powers,
which would be branch-ambiguous.

The theta function used everywhere is

    theta(t; q) = sum_k (-1)^k q^(k(k+1)/2) t^k
                = (qt; q)_inf (1/t; q)_inf (q; q)_inf .

All functions are pure: identical inputs and policy give identical output.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from fractions import Fraction

TWO_PI = 2.0 * math.pi
TWO_PI_I = 2j * math.pi


def e(x) -> complex:
    """e(x) = exp(2*pi*i*x)."""
    return cmath.exp(TWO_PI_I * x)


class DomainError(ValueError):
    """Argument outside the admissible domain (|q| >= 1 and no convention)."""


class PoleError(ValueError):
    """Evaluation requested at (or numerically on top of) a pole."""


class DegenerateLambdaError(ValueError):
    """theta(lambda; q^kappa) = 0: the q-Laplace prefactor blows up."""


@dataclass(frozen=True)
class PrecisionPolicy:
    rel_tol: float = 1e-12
    max_terms: int = 4000
    consecutive_small: int = 5
    quad_nodes: int = 256
    quad_halflen: float = 6.0
    quad_refinements: int = 4
    ladder_tol: float = 1e-9

    def __post_init__(self):
        if self.rel_tol <= 0:
            raise ValueError("rel_tol must be positive")
        if self.max_terms < 16:
            raise ValueError("max_terms must be >= 16")


DEFAULT_POLICY = PrecisionPolicy()


@dataclass(frozen=True)
class SeriesValue:
    value: complex
    err_estimate: float
    terms_used: int

    def __complex__(self) -> complex:
        return complex(self.value)


class ModularPoint:
    """The coordinate pair (z, tau); single source of truth for exponentials.

    tpow(s) = e(s z) and qpow(s) = e(s tau) accept rational s, so q^(1/4),
    t^(1/2) etc. are all well defined through the exponent coordinates.
    """

    __slots__ = ("z", "tau", "t", "q", "ttil", "qtil", "boundary_probe")

    def __init__(self, z, tau, boundary_probe: bool = False):
        z = complex(z)
        tau = complex(tau)
        if tau.imag == 0 and not boundary_probe:
            raise DomainError("Im tau = 0 (|q| = 1); flag boundary_probe to allow")
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "t", e(z))
        object.__setattr__(self, "q", e(tau))
        object.__setattr__(self, "ttil", e(z / tau) if tau != 0 else complex("nan"))
        object.__setattr__(self, "qtil", e(-1.0 / tau) if tau != 0 else complex("nan"))
        object.__setattr__(self, "boundary_probe", boundary_probe)

    def __setattr__(self, *a):  # immutable
        raise AttributeError("ModularPoint is immutable")

    def qpow(self, s) -> complex:
        return e(self.tau * _as_number(s))

    def tpow(self, s) -> complex:
        return e(self.z * _as_number(s))

    @property
    def b(self) -> complex:
        """b = sqrt(tau), principal branch."""
        return cmath.sqrt(self.tau)

    def S(self) -> "ModularPoint":
        """The S-transformed point (z/tau, -1/tau)."""
        return ModularPoint(self.z / self.tau, -1.0 / self.tau)

    def T(self, n: int = 1) -> "ModularPoint":
        return ModularPoint(self.z, self.tau + n)

    def __repr__(self):
        return f"ModularPoint(z={self.z!r}, tau={self.tau!r})"


def _as_number(s):
    if isinstance(s, Fraction):
        return s.numerator / s.denominator
    return s


@dataclass(frozen=True)
class ParameterSet:
    """Jacobi parameters stored as exponent coordinates.

    u[i] are the Laplace parameters (lambda_i = e(u_i)), v[i] the dual ones
    (mu_i = e(v_i)), w the deformation coordinate (x = e(w)), alpha/beta the
    hypergeometric ones (a_i = e(alpha_i), b_i = e(beta_i)).  A shift
    lambda -> q^s lambda is the exponent addition u -> u + s*tau.
    """

    u: tuple = ()
    v: tuple = ()
    w: complex | None = None
    alpha: tuple = ()
    beta: tuple = ()

    def lam(self, i=0):
        return e(self.u[i])

    def mu(self, i=0):
        return e(self.v[i])

    @property
    def x(self):
        return e(self.w)

    def a(self, i):
        return e(self.alpha[i])

    def b(self, i):
        return e(self.beta[i])

    def shifted_u(self, i, s, tau) -> "ParameterSet":
        u = list(self.u)
        u[i] = u[i] + s * tau
        return ParameterSet(tuple(u), self.v, self.w, self.alpha, self.beta)


# ---------------------------------------------------------------------------
# q-Pochhammer
# ---------------------------------------------------------------------------

def qpoch(t, q, n=None, policy: PrecisionPolicy = DEFAULT_POLICY) -> SeriesValue:
    """(t; q)_n = prod_{k=0}^{n-1} (1 - q^k t); n=None means n = infinity.

    For the infinite product |q| < 1 is required; |q| > 1 is routed through
    (x; q)_inf = (x/q; 1/q)_inf^{-1} (equivalently (x; 1/Q)_inf = (Qx; Q)_inf^{-1}).
    """
    t = complex(t)
    q = complex(q)
    if n is not None and n != math.inf:
        n = int(n)
        val = 1.0 + 0j
        p = 1.0 + 0j
        for k in range(n):
            val *= 1.0 - p * t
            p *= q
        return SeriesValue(val, abs(val) * policy.rel_tol, n)
    aq = abs(q)
    if aq >= 1.0:
        if aq == 1.0:
            raise DomainError("qpoch: |q| = 1 with n = infinity")
        # (x; q)_inf with |q|>1: let Q = 1/q, then (x; q)_inf = (Q x; Q)_inf^{-1}
        if abs(t - q) < 1e-14 * abs(q):
            # Euler-function case (q; q)_inf: reciprocal of the |q|<1 value
            inner = qpoch(1.0 / q, 1.0 / q, None, policy)
            return SeriesValue(1.0 / inner.value,
                               abs(1.0 / inner.value) * policy.rel_tol,
                               inner.terms_used)
        inner = qpoch(t / q, 1.0 / q, None, policy)
        return SeriesValue(1.0 / inner.value,
                           abs(1.0 / inner.value) * policy.rel_tol,
                           inner.terms_used)
    val = 1.0 + 0j
    p = 1.0 + 0j
    small = 0
    k = 0
    while k < policy.max_terms:
        f = 1.0 - p * t
        if f == 0:
            return SeriesValue(0.0 + 0j, 0.0, k + 1)
        val *= f
        p *= q
        k += 1
        if abs(p * t) < policy.rel_tol:
            small += 1
            if small >= policy.consecutive_small:
                break
        else:
            small = 0
    return SeriesValue(val, abs(val) * abs(p * t), k)


def qpoch_val(t, q, n=None, policy: PrecisionPolicy = DEFAULT_POLICY) -> complex:
    return qpoch(t, q, n, policy).value


# ---------------------------------------------------------------------------
# theta
# ---------------------------------------------------------------------------

def theta(z, tau, policy: PrecisionPolicy = DEFAULT_POLICY,
          method: str = "lattice") -> SeriesValue:
    """theta(t; q) = sum_k (-1)^k q^(k(k+1)/2) t^k  with t=e(z), q=e(tau).

    method "lattice" sums the bilateral series; "product" evaluates the
    triple product (qt;q)_inf (1/t;q)_inf (q;q)_inf.  The two agree to
    ~1e-12 relative for |q| <= 0.8.

    For Im tau < 0 (|q| > 1) the value is defined by the reciprocal-base
    convention theta(t; Q) = 1/theta(Q t; 1/Q) for |Q| > 1, consistent with
    the (x; 1/p)_inf = (px; p)_inf^(-1) convention used by qpoch.
    """
    z = complex(z)
    tau = complex(tau)
    if tau.imag < 0:
        inner = theta(z + tau, -tau, policy, method)
        if abs(inner.value) == 0:
            raise PoleError("theta: reciprocal-base pole")
        val = 1.0 / inner.value
        return SeriesValue(val, abs(val) ** 2 * inner.err_estimate,
                           inner.terms_used)
    q = e(tau)
    if abs(q) >= 1.0:
        raise DomainError("theta: |q| = 1")
    if method == "product":
        t = e(z)
        a = qpoch(q * t, q, None, policy)
        b = qpoch(1.0 / t, q, None, policy)
        c = qpoch(q, q, None, policy)
        val = a.value * b.value * c.value
        return SeriesValue(val, abs(val) * 3 * policy.rel_tol,
                           a.terms_used + b.terms_used + c.terms_used)
    t = e(z)
    ti = 1.0 / t
    total = 1.0 + 0j  # k = 0 term
    kmax = 0
    # positive k: (-1)^k q^(k(k+1)/2) t^k ; negative k=-m: (-1)^m q^(m(m-1)/2) t^-m
    qp = 1.0 + 0j   # q^(k(k+1)/2) running for k>=1
    qm = 1.0 + 0j   # q^(m(m-1)/2) running for m>=1
    tp = 1.0 + 0j
    tm = 1.0 + 0j
    sign = 1.0
    small = 0
    for k in range(1, policy.max_terms):
        qp *= q ** k          # q^(k(k+1)/2) = prod q^k
        qm *= q ** (k - 1)    # q^(k(k-1)/2)
        tp *= t
        tm *= ti
        sign = -sign
        term = sign * (qp * tp + qm * tm)
        total += term
        kmax = k
        if abs(term) < policy.rel_tol * max(1.0, abs(total)):
            small += 1
            if small >= policy.consecutive_small:
                break
        else:
            small = 0
    err = abs(qp * tp) + abs(qm * tm)
    return SeriesValue(total, err, 2 * kmax + 1)


def theta_val(z, tau, policy: PrecisionPolicy = DEFAULT_POLICY) -> complex:
    return theta(z, tau, policy).value


def theta_S_transform_check(z, tau, policy: PrecisionPolicy = DEFAULT_POLICY) -> float:
    """Relative residual of the S modular transformation of theta.

    theta(ttil; qtil) = e(-3/8) e(z^2/(2 tau)) t^(1/2) ttil^(-1/2)
                        q^(1/8) qtil^(-1/8) sqrt(tau) theta(t; q)
    with sqrt(tau) on the principal branch and all fractional powers taken
    in exponent coordinates.
    """
    z = complex(z)
    tau = complex(tau)
    lhs = theta_val(z / tau, -1.0 / tau, policy)
    pref = (e(-0.375) * e(z * z / (2 * tau)) * e(z / 2) * e(-z / (2 * tau))
            * e(tau / 8) * e(1.0 / (8 * tau)) * cmath.sqrt(tau))
    rhs = pref * theta_val(z, tau, policy)
    scale = max(abs(lhs), abs(rhs))
    if scale < 1e-8:
        # both sides vanish (t on the theta zero lattice): absolute residual
        return abs(lhs - rhs)
    return abs(lhs - rhs) / scale


def theta_logd(z, tau, order: int = 1,
               policy: PrecisionPolicy = DEFAULT_POLICY) -> complex:
    """theta'/theta (order 1) or theta''/theta (order 2), ' = t d/dt.

    Evaluated from the termwise-differentiated lattice sum.  Raises
    PoleError on the zero lattice t in q^Z.
    """
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    z = complex(z)
    tau = complex(tau)
    q = e(tau)
    if abs(q) >= 1.0:
        raise DomainError("theta_logd: |q| >= 1")
    t = e(z)
    ti = 1.0 / t
    s0 = 1.0 + 0j
    s1 = 0.0 + 0j
    s2 = 0.0 + 0j
    qp = qm = tp = tm = 1.0 + 0j
    sign = 1.0
    small = 0
    for k in range(1, policy.max_terms):
        qp *= q ** k
        qm *= q ** (k - 1)
        tp *= t
        tm *= ti
        sign = -sign
        a = sign * qp * tp
        b = sign * qm * tm
        s0 += a + b
        s1 += k * a - k * b
        s2 += k * k * (a + b)
        if abs(a) + abs(b) < policy.rel_tol * max(1.0, abs(s0)):
            small += 1
            if small >= policy.consecutive_small:
                break
        else:
            small = 0
    if abs(s0) < 1e-13 * (abs(s1) + 1.0):
        raise PoleError("theta_logd: t on the zero lattice q^Z")
    return (s1 if order == 1 else s2) / s0


# ---------------------------------------------------------------------------
# Eisenstein-type sums
# ---------------------------------------------------------------------------

def eisenstein(q, which: str = "E1",
               policy: PrecisionPolicy = DEFAULT_POLICY) -> complex:
    """E1(q) = 1 - 4 sum q^j/(1-q^j);  E2(q) = 1 - 24 sum q^k/(1-q^k)^2."""
    q = complex(q)
    if abs(q) >= 1.0:
        raise DomainError("eisenstein: |q| >= 1")
    s = 0.0 + 0j
    p = 1.0 + 0j
    for j in range(1, policy.max_terms):
        p *= q
        term = p / (1.0 - p) if which == "E1" else p / (1.0 - p) ** 2
        s += term
        if abs(term) < policy.rel_tol * max(1.0, abs(s)):
            break
    if which == "E1":
        return 1.0 - 4.0 * s
    if which == "E2":
        return 1.0 - 24.0 * s
    raise ValueError("which must be 'E1' or 'E2'")


def eisenstein_partial_E1(q, k, policy: PrecisionPolicy = DEFAULT_POLICY) -> complex:
    """E1^{(k)}(q) = sum_{j=1}^{k} q^j/(1-q^j) (partial harmonic-type sum)."""
    q = complex(q)
    s = 0.0 + 0j
    p = 1.0 + 0j
    for j in range(1, k + 1):
        p *= q
        s += p / (1.0 - p)
    return s


# ---------------------------------------------------------------------------
# Appell-Lerch sum
# ---------------------------------------------------------------------------

def appell_lerch(t, lam, q, policy: PrecisionPolicy = DEFAULT_POLICY) -> SeriesValue:
    """L(t, lambda, q) = theta(lam;q)^{-1} sum_k (-1)^k q^(k(k+1)/2) lam^k / (1 - q^k lam t).

    Bilateral sum with symmetric truncation from the theta tail bound.
    Raises PoleError when lam*t hits q^Z, DegenerateLambdaError when
    theta(lam; q) = 0 (lam in q^Z).
    """
    t = complex(t)
    lam = complex(lam)
    q = complex(q)
    if abs(q) >= 1.0:
        raise DomainError("appell_lerch: |q| >= 1")
    th = _theta_m(lam, q, policy)
    if abs(th) < 1e-12:
        raise DegenerateLambdaError("appell_lerch: theta(lambda; q) ~ 0")
    lt = lam * t
    total = _al_term(1.0, lt)  # k = 0
    qp = qm = 1.0 + 0j
    lp = lm = 1.0 + 0j
    li = 1.0 / lam
    qkp = qkm = 1.0 + 0j
    sign = 1.0
    small = 0
    n = 1
    tail = 0.0
    for k in range(1, policy.max_terms):
        qp *= q ** k
        qm *= q ** (k - 1)
        qkp *= q
        qkm /= q
        lp *= lam
        lm *= li
        sign = -sign
        a = sign * qp * lp * _al_term(qkp, lt)
        b = sign * qm * lm * _al_term(qkm, lt)
        total += a + b
        n = k
        tail = abs(a) + abs(b)
        if tail < policy.rel_tol * max(1.0, abs(total)):
            small += 1
            if small >= policy.consecutive_small:
                break
        else:
            small = 0
    return SeriesValue(total / th, tail / abs(th), 2 * n + 1)


def _al_term(qk, lt):
    den = 1.0 - qk * lt
    if abs(den) < 1e-12:
        raise PoleError("appell_lerch: lambda*t on the pole lattice q^Z")
    return 1.0 / den


def _theta_m(t, q, policy: PrecisionPolicy = DEFAULT_POLICY) -> complex:
    """theta with multiplicative arguments (integer-power call sites only)."""
    total = 1.0 + 0j
    ti = 1.0 / t
    qp = qm = tp = tm = 1.0 + 0j
    sign = 1.0
    small = 0
    for k in range(1, policy.max_terms):
        qp *= q ** k
        qm *= q ** (k - 1)
        tp *= t
        tm *= ti
        sign = -sign
        term = sign * (qp * tp + qm * tm)
        total += term
        if abs(term) < policy.rel_tol * max(1.0, abs(total)):
            small += 1
            if small >= policy.consecutive_small:
                break
        else:
            small = 0
    return total


# ---------------------------------------------------------------------------
# Mordell integral
# ---------------------------------------------------------------------------

def mordell(z, tau, policy: PrecisionPolicy = DEFAULT_POLICY) -> complex:
    """The Mordell integral

        h(z, tau) = int_C e^{pi i (tau x^2 + 2 i z x)} / (2 cosh(pi x)) dx

    over the rotated line C = zeta*R (|zeta| = 1, zeta != +-i) with
    Im(tau zeta^2) > 0 so the Gaussian factor decays; for tau in the upper
    half plane zeta = 1 gives the real-line contour.
    """
    from .quadrature import integrate_line, ContourSpec

    z = complex(z)
    tau = complex(tau)
    if tau.imag > 0:
        zeta = 1.0 + 0j
    else:
        if tau.real <= 0 and abs(tau.imag) < 1e-14:
            raise DomainError("mordell: tau on the cut (-inf, 0]")
        # rotate so that arg(tau * zeta^2) = pi/2
        phi = (math.pi / 2 - cmath.phase(tau)) / 2.0
        if abs(phi) >= math.pi / 4:
            phi = math.copysign(math.pi / 4 - 1e-3, phi)
        zeta = cmath.exp(1j * phi)

    def integrand(x):
        return cmath.exp(1j * math.pi * (tau * x * x + 2j * z * x)) / \
            (2.0 * cmath.cosh(math.pi * x))

    decay = (tau * zeta * zeta).imag
    halflen = max(policy.quad_halflen, 6.0 / math.sqrt(max(decay, 1e-3)))
    spec = ContourSpec(kind="line", center=0.0, direction=zeta, halflen=halflen)
    val, _err = integrate_line(integrand, spec, policy)
    return val


# ---------------------------------------------------------------------------
# Weierstrass elliptic function
# ---------------------------------------------------------------------------

def weierstrass_p(z, tau, order: int = 0,
                  policy: PrecisionPolicy = DEFAULT_POLICY) -> complex:
    """wp (order 0) or wp' = d wp/dz (order 1) on the lattice Z + tau Z.

    Normalization: z^2 * wp(z) -> 1 as z -> 0 (the standard Weierstrass
    normalization), via the q-expansion

        wp/(2 pi i)^2 = 1/12 + t/(1-t)^2
              + sum_{n>=1} [ q^n t/(1-q^n t)^2 + q^n/t/(1-q^n/t)^2
                             - 2 q^n/(1-q^n)^2 ].
    """
    z = complex(z)
    tau = complex(tau)
    q = e(tau)
    if abs(q) >= 1.0:
        raise DomainError("weierstrass_p: |q| >= 1")
    t = e(z)
    ti = 1.0 / t

    def pterm(u):
        d = 1.0 - u
        if abs(d) < 1e-12:
            raise PoleError("weierstrass_p: z on the lattice Z + tau Z")
        if order == 0:
            return u / d ** 2
        return u * (1.0 + u) / d ** 3

    total = pterm(t)
    if order == 0:
        total += 1.0 / 12.0
    qn = 1.0 + 0j
    small = 0
    for n in range(1, policy.max_terms):
        qn *= q
        if order == 0:
            term = pterm(qn * t) + pterm(qn * ti) - 2.0 * qn / (1.0 - qn) ** 2
        else:
            term = pterm(qn * t) - pterm(qn * ti)
        total += term
        if abs(term) < policy.rel_tol * max(1.0, abs(total)):
            small += 1
            if small >= policy.consecutive_small:
                break
        else:
            small = 0
    if order == 0:
        return TWO_PI_I ** 2 * total
    return TWO_PI_I ** 3 * total


# ---------------------------------------------------------------------------
# Faddeev-type Pochhammer ratio
# ---------------------------------------------------------------------------

def faddeev_phi(z, tau, policy: PrecisionPolicy = DEFAULT_POLICY) -> complex:
    """The ratio (qtil*ttil; qtil)_inf / (q*t; q)_inf at the point (z, tau).

    This is the S-cocycle of the Pochhammer equation (the inverse of the
    quantum dilogarithm at the shifted argument).  Works on both sides of
    the real axis: for Im tau < 0 both Pochhammers are routed through the
    (x; 1/q) convention.
    """
    z = complex(z)
    tau = complex(tau)
    if tau.imag == 0:
        raise DomainError("faddeev_phi: Im tau = 0")
    q = e(tau)
    t = e(z)
    qtil = e(-1.0 / tau)
    ttil = e(z / tau)
    num = qpoch(qtil * ttil, qtil, None, policy).value
    den = qpoch(q * t, q, None, policy).value
    if den == 0:
        raise PoleError("faddeev_phi: argument on the pole lattice")
    return num / den
