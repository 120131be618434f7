"""SL2(Z) structure: slash action, cocycles, monodromy, word decomposition.

Matrix-valued functions of (z, tau) carry a weight vector kappa; the slash
action is (F|_kappa gamma)(z, tau) = F(gamma(z, tau)) diag((c tau + d)^(-kappa))
with gamma(z, tau) = (z/(c tau + d), (a tau + b)/(c tau + d)).  Cocycles
Omega_{U,gamma} = (U|gamma) U^(-1) are lazy closures; identities are checked
pointwise.  Half-integer weights use principal branches, with identities
asserted up to one fitted unimodular constant.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .core import DomainError, PoleError


class SingularityError(ValueError):
    """Matrix not invertible (or pole) at the evaluation point."""


# ---------------------------------------------------------------------------
# group elements and words
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SL2Element:
    a: int
    b: int
    c: int
    d: int

    def __post_init__(self):
        if self.a * self.d - self.b * self.c != 1:
            raise DomainError("determinant must be 1")

    def __mul__(self, other):
        return SL2Element(self.a * other.a + self.b * other.c,
                          self.a * other.b + self.b * other.d,
                          self.c * other.a + self.d * other.c,
                          self.c * other.b + self.d * other.d)

    def inverse(self):
        return SL2Element(self.d, -self.b, -self.c, self.a)

    def neg(self):
        return SL2Element(-self.a, -self.b, -self.c, -self.d)

    def act(self, z, tau):
        den = self.c * tau + self.d
        if abs(den) < 1e-14:
            raise PoleError("gamma acts singularly at this tau")
        return z / den, (self.a * tau + self.b) / den

    def jacobian(self, tau):
        """c tau + d."""
        return self.c * tau + self.d

    def as_tuple(self):
        return (self.a, self.b, self.c, self.d)


I2 = SL2Element(1, 0, 0, 1)
S = SL2Element(0, -1, 1, 0)
T = SL2Element(1, 1, 0, 1)


def T_pow(n: int) -> SL2Element:
    return SL2Element(1, n, 0, 1)


@dataclass(frozen=True)
class SL2Word:
    """Exponents (a_0, ..., a_{r+1}) of gamma = T^{a_0} S T^{a_1} ... S T^{a_{r+1}}.

    A length-1 tuple means a pure T-power (no S factors)."""
    exponents: tuple

    @property
    def r(self):
        return len(self.exponents) - 1

    def matrix(self) -> SL2Element:
        g = T_pow(self.exponents[0])
        for a in self.exponents[1:]:
            g = g * S * T_pow(a)
        return g

    def generators(self):
        """Flat list of (element, tag) pairs, tag in {"T","S"}; T entries carry
        their exponent."""
        out = [(T_pow(self.exponents[0]), ("T", self.exponents[0]))]
        for a in self.exponents[1:]:
            out.append((S, ("S", None)))
            out.append((T_pow(a), ("T", a)))
        return out


def neg_cont_frac(p: int, q: int):
    """Negative (ceiling) continued fraction p/q = a_0 - 1/(a_1 - 1/(...)),
    q > 0; the a_i for i >= 1 are >= 1 for 0 < q."""
    out = []
    while True:
        a0 = -((-p) // q)    # ceil(p/q)
        out.append(a0)
        r = a0 * q - p       # 0 <= r < q
        if r == 0:
            return out
        p, q = q, r


def word_of(gamma: SL2Element) -> SL2Word:
    """Exact word gamma = T^{a_0} S T^{a_1} ... S T^{a_{r+1}}.

    c = 0 gives a pure T-power word (with a leading S S pair encoding -I when
    needed, since S^2 = -I); c != 0 reduces the first column by the ceiling
    continued fraction of a/c and fixes the leftover T-power (or -T-power)
    exactly.
    """
    if gamma.c == 0:
        if gamma.a == 1:
            return SL2Word((gamma.b,))
        # gamma = -T^{-b}: -I = (S T^0)(S T^0)
        return SL2Word((0, 0, -gamma.b))
    g = gamma
    pre_neg = False
    if g.c < 0:
        g = g.neg()
        pre_neg = True
    cf = neg_cont_frac(g.a, g.c)
    w = T_pow(cf[0])
    for a in cf[1:]:
        w = w * S * T_pow(a)
    w = w * S
    rest = w.inverse() * g          # T^k or -T^k
    exps = list(cf)
    if rest.a == 1:
        exps.append(rest.b)
    else:                           # rest = -T^{-b}
        exps.extend([0, 0, -rest.b])
    if pre_neg:
        exps = [0, 0] + exps        # prefix -I = (S T^0)(S T^0)... as T^0 S T^0 S
    word = SL2Word(tuple(exps))
    assert word.matrix() == gamma
    return word


def cut_ray(gamma: SL2Element):
    """Cut ray of the cut plane attached to gamma: (-inf, -d/c] for c > 0,
    [-d/c, inf) for c < 0, all of R for c = 0.  Returned as
    (kind, endpoint) with kind in {"left", "right", "full"}."""
    if gamma.c == 0:
        return ("full", None)
    x = Fraction(-gamma.d, gamma.c)
    return ("left", x) if gamma.c > 0 else ("right", x)


# ---------------------------------------------------------------------------
# weights and matrix functions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WeightVector:
    kappa: tuple     # Fractions; integers or all-half-integers

    def __post_init__(self):
        ks = [Fraction(k) for k in self.kappa]
        object.__setattr__(self, "kappa", tuple(ks))
        for k in ks[1:]:
            if (k - ks[0]).denominator != 1:
                raise DomainError("relative weights must be integers")

    def __len__(self):
        return len(self.kappa)

    def autfactor(self, j, sign=-1):
        """diag(j^(sign * kappa)) with principal branch for half-integers."""
        return np.diag([_cpow(j, sign * float(k)) for k in self.kappa])


def _cpow(w, p):
    if p == 0:
        return 1.0 + 0j
    if float(p).is_integer():
        return complex(w) ** int(p)
    return cmath.exp(p * cmath.log(w))


class MatrixFunction:
    """Callable (z, tau) -> r x r complex matrix with a weight vector."""

    def __init__(self, fn, weight: WeightVector, side="cocycle"):
        self.fn = fn
        self.weight = weight
        self.side = side

    def __call__(self, z, tau) -> np.ndarray:
        return np.asarray(self.fn(z, tau), dtype=complex)


def slash(F: MatrixFunction, gamma: SL2Element) -> MatrixFunction:
    """(F|_kappa gamma)(z,tau) = F(gamma(z,tau)) diag((c tau + d)^(-kappa))."""
    def fn(z, tau):
        zz, tt = gamma.act(z, tau)
        return F(zz, tt) @ F.weight.autfactor(gamma.jacobian(tau), -1)
    return MatrixFunction(fn, F.weight, F.side)


def delta_factor(weight: WeightVector, gamma: SL2Element, tau):
    """Delta_gamma(tau) = diag((c tau + d)^kappa)."""
    return weight.autfactor(gamma.jacobian(tau), +1)


def cocycle_from(U: MatrixFunction, gamma: SL2Element) -> MatrixFunction:
    """Omega_{U,gamma} = (U|_kappa gamma) U^(-1), as a lazy closure."""
    Ug = slash(U, gamma)

    def fn(z, tau):
        M = U(z, tau)
        if abs(np.linalg.det(M)) < 1e-250:
            raise SingularityError("fundamental matrix singular at this point")
        return Ug(z, tau) @ np.linalg.inv(M)
    return MatrixFunction(fn, U.weight, "cocycle")


def monodromy(U: MatrixFunction, V: MatrixFunction) -> MatrixFunction:
    """M = V^(-1) U (elliptic in z)."""
    def fn(z, tau):
        Vm = V(z, tau)
        if abs(np.linalg.det(Vm)) < 1e-250:
            raise SingularityError("V singular at this point")
        return np.linalg.inv(Vm) @ U(z, tau)
    return MatrixFunction(fn, U.weight, "cocycle")


def check_modular_monodromy(M, kappa_U: WeightVector, kappa_V: WeightVector,
                            gamma: SL2Element, grid, fit_constant=False):
    """Max normalized residual of M = Delta_{kappa_V,gamma} (M|_{kappa_U} gamma)
    over the grid of (z, tau) points.

    With fit_constant=True a single unimodular scalar (principal-branch
    ambiguity of half-integer powers) is fitted on the first grid point and
    frozen; returns (residual, constant), else just the residual.
    """
    const = 1.0 + 0j
    worst = 0.0
    first = True
    for (z, tau) in grid:
        lhs = M(z, tau)
        zz, tt = gamma.act(z, tau)
        j = gamma.jacobian(tau)
        rhs = delta_factor(kappa_V, gamma, tau) @ M(zz, tt) \
            @ kappa_U.autfactor(j, -1)
        if fit_constant and first:
            num = np.vdot(rhs, lhs)
            if abs(num) > 0:
                const = num / abs(num)
            first = False
        scale = max(np.max(np.abs(lhs)), np.max(np.abs(rhs)), 1e-30)
        worst = max(worst, float(np.max(np.abs(lhs - const * rhs))) / scale)
    if fit_constant:
        return worst, const
    return worst


def cocycle_word_eval(Omega_S, Omega_T, word: SL2Word, z, tau) -> np.ndarray:
    """Evaluate Omega_gamma by the cocycle product over the word's generators:
    Omega_{g h}(z,tau) = Omega_g(h(z,tau)) Omega_h(z,tau).

    Omega_S and Omega_T are callables (z, tau) -> matrix; Omega_T = None
    declares Omega_T = I (and likewise for pure T-powers)."""
    gens = word.generators()
    # fold right-to-left: suffix product acting first
    result = None
    suffix = I2
    dim = None
    for g, (tag, expo) in reversed(gens):
        zz, tt = suffix.act(z, tau)
        if tag == "S":
            Om = np.asarray(Omega_S(zz, tt), dtype=complex)
        else:
            if Omega_T is None or expo == 0:
                Om = None
            else:
                Om = np.asarray(_omega_T_power(Omega_T, expo, zz, tt),
                                dtype=complex)
        if Om is not None:
            dim = Om.shape[0]
            result = Om if result is None else Om @ result
        suffix = g * suffix
    if result is None:
        return np.eye(1, dtype=complex) if dim is None else np.eye(dim)
    return result


def _omega_T_power(Omega_T, n, z, tau):
    """Omega_{T^n} from Omega_T by the cocycle property."""
    out = None
    g = I2
    step = T if n > 0 else T.inverse()
    if n < 0:
        # Omega_{T^-1}(z,tau) = Omega_T(T^-1(z,tau))^(-1)
        def om(zz, tt):
            zz2, tt2 = T.inverse().act(zz, tt)
            return np.linalg.inv(np.asarray(Omega_T(zz2, tt2), dtype=complex))
    else:
        om = Omega_T
    for _ in range(abs(n)):
        zz, tt = g.act(z, tau)
        Om = np.asarray(om(zz, tt), dtype=complex)
        out = Om if out is None else Om @ out
        g = step * g
    return out


def cocycle_relations_check(Omega_S, z, tau):
    """Residuals of the 4-term and 3-term functional equations of Omega_S
    (valid for any cocycle with Omega_T = I):

        I = Om(-z/tau, -1/tau) Om(-z, tau) Om(z/tau, -1/tau) Om(z, tau)
        Om(z, tau) = Om(z/(tau+1), tau/(tau+1)) Om(z, tau+1)
    """
    Om = lambda zz, tt: np.asarray(Omega_S(zz, tt), dtype=complex)
    A = Om(-z / tau, -1 / tau) @ Om(-z, tau) @ Om(z / tau, -1 / tau) \
        @ Om(z, tau)
    r1 = float(np.max(np.abs(A - np.eye(A.shape[0]))))
    B = Om(z / (tau + 1), tau / (tau + 1)) @ Om(z, tau + 1)
    C = Om(z, tau)
    r2 = float(np.max(np.abs(B - C))) / max(float(np.max(np.abs(C))), 1e-30)
    return r1, r2


def cross_cut_check(Omega, xs, z, eps_list=(1e-2, 5e-3, 2.5e-3),
                    ratio_slack=0.30):
    """Boundary-limit probe across the real tau axis.

    For each real x in xs and eps in eps_list computes
    max |Omega(z, x + i eps) - Omega(z, x - i eps)|; the mismatch of a
    meromorphic extension shrinks linearly in eps, an obstruction plateaus.
    Returns dict x -> (mismatches, verdict) with verdict "extends" when
    successive mismatch ratios track the eps ratios within ratio_slack.
    """
    report = {}
    for x in xs:
        ms = []
        for ep in eps_list:
            up = np.asarray(Omega(z, x + 1j * ep), dtype=complex)
            dn = np.asarray(Omega(z, x - 1j * ep), dtype=complex)
            ms.append(float(np.max(np.abs(up - dn))))
        ok = True
        for (e1, e2, m1, m2) in zip(eps_list, eps_list[1:], ms, ms[1:]):
            if m1 == 0 and m2 == 0:
                continue
            if m2 == 0:
                continue
            ratio = m2 / m1
            target = e2 / e1
            if abs(ratio - target) > ratio_slack * target:
                ok = False
        report[x] = (ms, "extends" if ok else "obstructed")
    return report


def average_monodromy(M: MatrixFunction, kappa: WeightVector) -> MatrixFunction:
    """Av(M) = (M + Delta_{kappa,T} M|_kappa T + Delta_{kappa,S} M|_kappa S)/3."""
    def fn(z, tau):
        out = M(z, tau).astype(complex)
        for g in (T, S):
            zz, tt = g.act(z, tau)
            j = g.jacobian(tau)
            out = out + kappa.autfactor(j, +1) @ M(zz, tt) \
                @ kappa.autfactor(j, -1)
        return out / 3.0
    return MatrixFunction(fn, kappa, "cocycle")
