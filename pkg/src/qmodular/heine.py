"""Generalized q-hypergeometric module: solution bases at t=0 and t=infinity,
closed-form monodromy, self-duality, state-integral factorization, resonance.

The t-equation is

    (prod_{j=0}^{r-1}(1 - q^(-1) b_j sigma) - t prod_{j=1}^{r}(1 - a_j sigma)) f = 0

with b_0 = q, a_i = e(alpha_i), b_i = e(beta_i).  Expanded through elementary
symmetric polynomials the sigma^k coefficient is (-1)^k (e_k(b/q) - t e_k(a)).
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .core import (DEFAULT_POLICY, DomainError, PoleError, PrecisionPolicy,
                   SeriesValue, e, faddeev_phi, qpoch_val, theta_val)
from .modular import MatrixFunction, WeightVector
from .quadrature import ContourSpec, integrate_line


class ResonanceError(ValueError):
    """Parameters sit on a resonant locus (ratio in q^Z) without a resonance
    mode requested."""


class UnsupportedResonance(ValueError):
    pass


# ---------------------------------------------------------------------------
# parameters
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HeineParams:
    """alpha_1..alpha_r and beta_1..beta_{r-1} are exponent coordinates
    (a_i = e(alpha_i), b_i = e(beta_i)); b_0 = q is implicit."""
    alpha: tuple
    beta: tuple
    tau: complex
    resonant_ok: bool = False

    def __post_init__(self):
        object.__setattr__(self, "alpha", tuple(complex(x) for x in self.alpha))
        object.__setattr__(self, "beta", tuple(complex(x) for x in self.beta))
        object.__setattr__(self, "tau", complex(self.tau))
        if len(self.beta) != len(self.alpha) - 1:
            raise DomainError("need r alphas and r-1 betas")
        if not self.resonant_ok:
            self._generic_check()

    @property
    def r(self):
        return len(self.alpha)

    def _generic_check(self):
        tau = self.tau
        coords = list(self.alpha) + [tau] + list(self.beta)
        ratios = [x - y for x, y in combinations(coords, 2)]
        ratios += [x - y for x in self.alpha for y in [tau] + list(self.beta)]
        for d in ratios:
            # d in Z + tau Z would be a resonance; probe a few lattice shifts
            for m in range(-3, 4):
                w = d - m * tau
                if abs(w - round(w.real)) < 1e-9 and abs(w.imag) < 1e-9:
                    raise ResonanceError(
                        "parameters on a resonant locus; set resonant_ok")

    def shifted(self, dalpha=0.0, dbeta=0.0, tau=None):
        return HeineParams(tuple(x + dalpha for x in self.alpha),
                           tuple(x + dbeta for x in self.beta),
                           self.tau if tau is None else tau,
                           resonant_ok=True)


def _esym(vals, k):
    """Elementary symmetric polynomial e_k."""
    if k == 0:
        return 1.0 + 0j
    out = 0.0 + 0j
    for comb in combinations(vals, k):
        p = 1.0 + 0j
        for v in comb:
            p *= v
        out += p
    return out


def operator_coeffs(t, params: HeineParams):
    """sigma^k coefficients (-1)^k (e_k(b/q) - t e_k(a)), k = 0..r."""
    q = e(params.tau)
    a = [e(al) for al in params.alpha]
    bq = [1.0 + 0j] + [e(be) / q for be in params.beta]   # b_0/q = 1
    return [(-1) ** k * (_esym(bq, k) - t * _esym(a, k))
            for k in range(params.r + 1)]


def operator_residual(f, z, params: HeineParams) -> complex:
    """Residual of the t-equation on a callable f of the exponent coordinate."""
    cs = operator_coeffs(e(z), params)
    return sum(c * f(z + k * params.tau) for k, c in enumerate(cs))


# ---------------------------------------------------------------------------
# q-hypergeometric series
# ---------------------------------------------------------------------------

def phi_rs(a, b, q, t, policy: PrecisionPolicy = DEFAULT_POLICY) -> SeriesValue:
    """sum_k prod(a_i;q)_k / (prod(b_i;q)_k (q;q)_k) t^k (Heine series).

    Converges for |t| < 1 when len(a) = len(b) + 1 (for either |q| < 1 or
    |q| > 1, where the Pochhammer growth cancels between numerator and
    denominator).
    """
    a = [complex(x) for x in a]
    b = [complex(x) for x in b]
    q = complex(q)
    t = complex(t)
    total = 1.0 + 0j
    term = 1.0 + 0j
    qk = 1.0 + 0j
    small = 0
    k = 0
    for k in range(policy.max_terms):
        den = 1.0 + 0j
        for bi in b:
            den *= 1.0 - bi * qk
        den *= 1.0 - q * qk
        if den == 0:
            raise ResonanceError(f"vanishing Pochhammer factor at k={k + 1}")
        num = 1.0 + 0j
        for ai in a:
            num *= 1.0 - ai * qk
        term *= num / den * t
        if abs(term) > 1e200:
            raise DomainError("phi_rs: series diverges at this argument")
        total += term
        qk *= q
        if abs(term) < policy.rel_tol * max(1.0, abs(total)):
            small += 1
            if small >= policy.consecutive_small:
                break
        else:
            small = 0
    return SeriesValue(total, abs(term), k + 1)


# ---------------------------------------------------------------------------
# solution bases
# ---------------------------------------------------------------------------

def _beta_full(params: HeineParams):
    """(beta_0, ..., beta_{r-1}) with beta_0 = tau (b_0 = q)."""
    return (params.tau,) + params.beta


def B_norm(j: int, params: HeineParams,
           policy: PrecisionPolicy = DEFAULT_POLICY) -> complex:
    """Normalization B_j of the t=0 solutions (B_0 = 1)."""
    if j == 0:
        return 1.0 + 0j
    tau = params.tau
    q = e(tau)
    betas = _beta_full(params)
    bj = e(betas[j])
    out = 1.0 + 0j
    for al in params.alpha:
        ai = e(al)
        out *= qpoch_val(ai, q, None, policy)
        out /= qpoch_val(q * ai / bj, q, None, policy)
    for be in betas:
        bi = e(be)
        out *= qpoch_val(q * bi / bj, q, None, policy)
        out /= qpoch_val(bi, q, None, policy)
    out *= qpoch_val(q, q, None, policy) ** 3
    out /= theta_val(betas[j] - tau, tau, policy)
    return out


def A_norm(j: int, params: HeineParams,
           policy: PrecisionPolicy = DEFAULT_POLICY) -> complex:
    """Normalization A_j of the t=infinity solutions (j = 1..r)."""
    tau = params.tau
    q = e(tau)
    aj = e(params.alpha[j - 1])
    out = qpoch_val(q, q, None, policy) ** 2
    out /= theta_val(params.alpha[j - 1] - tau, tau, policy)
    for i, al in enumerate(params.alpha, start=1):
        ai = e(al)
        if i != j:
            out /= qpoch_val(ai / aj, q, None, policy)
        out *= qpoch_val(ai, q, None, policy)
    for be in _beta_full(params):
        bi = e(be)
        out *= qpoch_val(bi / aj, q, None, policy)
        out /= qpoch_val(bi, q, None, policy)
    return out


def f_solution(j: int, z, params: HeineParams,
               policy: PrecisionPolicy = DEFAULT_POLICY) -> complex:
    """The t=0 solution attached to the indicial root q b_j^(-1), j = 0..r-1:

        B_j theta(q^(-1) b_j t; q)/theta(t; q) * phi(q a/b_j; q b/b_j; q, t).
    """
    tau = params.tau
    q = e(tau)
    betas = _beta_full(params)
    bj = e(betas[j])
    upper = [q * e(al) / bj for al in params.alpha]
    lower = [q * e(be) / bj for i, be in enumerate(betas) if i != j]
    val = phi_rs(upper, lower, q, e(z), policy).value
    val *= B_norm(j, params, policy)
    if j != 0:
        val *= theta_val(z + betas[j] - tau, tau, policy) \
            / theta_val(z, tau, policy)
    return val


def g_solution(j: int, z, params: HeineParams,
               policy: PrecisionPolicy = DEFAULT_POLICY) -> complex:
    """The t=infinity solution attached to the root a_j^(-1), j = 1..r:

        A_j theta(q^(-1) a_j t; q)/theta(q^(-1) t; q)
            * phi(q a_j/b; q a_j/a; q, q b_1...b_{r-1} / (a_1...a_r t)).
    """
    tau = params.tau
    q = e(tau)
    aj = e(params.alpha[j - 1])
    upper = [q * aj / e(be) for be in _beta_full(params)]
    lower = [q * aj / e(al) for i, al in enumerate(params.alpha, start=1)
             if i != j]
    warg = tau + sum(params.beta) - sum(params.alpha) - z
    val = phi_rs(upper, lower, q, e(warg), policy).value
    val *= A_norm(j, params, policy)
    val *= theta_val(z + params.alpha[j - 1] - tau, tau, policy) \
        / theta_val(z - tau, tau, policy)
    return val


@dataclass
class HeineBasis:
    params: HeineParams
    U: MatrixFunction
    V: MatrixFunction

    @property
    def kappa_U(self):
        return self.U.weight

    @property
    def kappa_V(self):
        return self.V.weight


def heine_U(z, tau, params: HeineParams,
            policy: PrecisionPolicy = DEFAULT_POLICY) -> np.ndarray:
    """Wronskian U_{ij} = f_{j-1}(q^{i-1} t) of the t=0 solutions at (z, tau).

    tau overrides params.tau (the self-duality checks evaluate U at inverse
    and shifted bases)."""
    p = HeineParams(params.alpha, params.beta, tau, resonant_ok=True)
    r = p.r
    return np.array([[f_solution(j, z + i * tau, p, policy)
                      for j in range(r)] for i in range(r)], dtype=complex)


def heine_V(z, tau, params: HeineParams,
            policy: PrecisionPolicy = DEFAULT_POLICY) -> np.ndarray:
    p = HeineParams(params.alpha, params.beta, tau, resonant_ok=True)
    r = p.r
    return np.array([[g_solution(j, z + i * tau, p, policy)
                      for j in range(1, r + 1)] for i in range(r)],
                    dtype=complex)


def heine_basis(params: HeineParams,
                policy: PrecisionPolicy = DEFAULT_POLICY) -> HeineBasis:
    r = params.r
    U = MatrixFunction(lambda z, tau: heine_U(z, tau, params, policy),
                       WeightVector((0,) + (1,) * (r - 1)), side=0)
    V = MatrixFunction(lambda z, tau: heine_V(z, tau, params, policy),
                       WeightVector((0,) * r), side="inf")
    return HeineBasis(params, U, V)


def heine_monodromy_closed(z, params: HeineParams,
                           policy: PrecisionPolicy = DEFAULT_POLICY,
                           tau=None) -> np.ndarray:
    """The closed-form monodromy matrix: first column all 1's, and

        M_{i, j+1} = (q;q)_inf^3 theta(b_j t) theta((a_i/b_j) t) theta(a_i)
                     / (theta(t) theta(a_i t) theta(b_j) theta(a_i/b_j))

    for j = 1..r-1 (all thetas at base q); this grouping of the second
    numerator theta is the one that makes every entry t-elliptic, as it
    must be since U(qt) and V(qt) share the same companion factor."""
    tau = params.tau if tau is None else tau
    th = lambda zz: theta_val(zz, tau, policy)
    qp3 = qpoch_val(e(tau), e(tau), None, policy) ** 3
    r = params.r
    M = np.ones((r, r), dtype=complex)
    for i in range(r):
        ai = params.alpha[i]
        for j in range(1, r):
            bj = params.beta[j - 1]
            M[i, j] = qp3 * th(bj + z) * th(ai - bj + z) * th(ai) \
                / (th(z) * th(ai + z) * th(bj) * th(ai - bj))
    return M


def monodromy_modularity_residual(z, params: HeineParams, gamma,
                                  policy: PrecisionPolicy = DEFAULT_POLICY) -> float:
    """Residual of the modular transformation law of the closed monodromy.

    Under gamma = (a b; c d) the point and all parameter exponents divide
    by j = c tau + d, and with weights kappa_U = (0,1,...,1), kappa_V = 0:

        M(z, alpha, beta, tau) = M(z/j, alpha/j, beta/j, gamma tau) diag(j^-kappa_U)
    """
    tau = params.tau
    j = gamma.c * tau + gamma.d
    lhs = heine_monodromy_closed(z, params, policy)
    pg = HeineParams(tuple(al / j for al in params.alpha),
                     tuple(be / j for be in params.beta),
                     (gamma.a * tau + gamma.b) / j, resonant_ok=True)
    scale = np.diag([1.0] + [1.0 / j] * (params.r - 1)).astype(complex)
    rhs = heine_monodromy_closed(z / j, pg, policy) @ scale
    return float(np.max(np.abs(lhs - rhs)) / max(np.max(np.abs(lhs)), 1e-30))


# ---------------------------------------------------------------------------
# companion matrix and self-duality
# ---------------------------------------------------------------------------

def heine_companion(t, params: HeineParams) -> np.ndarray:
    """Companion matrix A(t, a, b, q) of the t-equation."""
    cs = operator_coeffs(t, params)
    r = params.r
    if abs(cs[r]) < 1e-250:
        raise PoleError("leading coefficient vanishes")
    A = np.zeros((r, r), dtype=complex)
    for i in range(r - 1):
        A[i, i + 1] = 1.0
    for j in range(r):
        A[r - 1, j] = -cs[j] / cs[r]
    return A


def selfdual_P(t, params: HeineParams) -> np.ndarray:
    """The elementary-symmetric pairing matrix P(t, a, b, q):

    row 1 = (1-t, 0, ..., 0); for i, j >= 2 the (i, j) entry (1-indexed) is
    (-1)^(k-1) (e_k(b/q) - q^(-(j-1)) t e_k(a)) with k = i+j-2 <= r, else 0;
    the whole matrix is divided by (1 - q^(-1)b_1)...(1 - q^(-1)b_{r-1}).
    """
    r = params.r
    q = e(params.tau)
    a = [e(al) for al in params.alpha]
    bq = [1.0 + 0j] + [e(be) / q for be in params.beta]
    den = 1.0 + 0j
    for be in params.beta:
        den *= 1.0 - e(be) / q
    P = np.zeros((r, r), dtype=complex)
    P[0, 0] = 1.0 - t
    for i in range(2, r + 1):
        for j in range(2, r + 1):
            k = i + j - 2
            if k <= r:
                P[i - 1, j - 1] = (-1) ** (k - 1) * \
                    (_esym(bq, k) - q ** (-(j - 1)) * t * _esym(a, k))
    return P / den


def selfdual_matrices(params: HeineParams,
                      policy: PrecisionPolicy = DEFAULT_POLICY):
    """(P, Q) with P the elementary-symmetric pairing and Q the induced
    gauge P(t,a,b,q) U(t, a/q, b/q^2, 1/q) U(t, a, b, 1/q)^(-1) relating the
    inverse-base fundamental matrix to U^(-T)."""
    P = lambda z: selfdual_P(e(z), params)

    def Q(z):
        tau = params.tau
        ps = params.shifted(dalpha=-tau, dbeta=-2 * tau)
        Us = heine_U(z, -tau, ps, policy)
        Ui = heine_U(z, -tau, params, policy)
        return P(z) @ Us @ np.linalg.inv(Ui)
    return P, Q


def selfdual_check(params: HeineParams, z,
                   policy: PrecisionPolicy = DEFAULT_POLICY):
    """Residuals of the two self-duality identities at the point z:

    Peq: P(qt) A(qt, a/q, b/q^2, 1/q)^(-1) = A(t, a, b, q)^(-T) P(t)
    Ueq: U(t, a, b, q)^(-T) = P(t) U(t, a/q, b/q^2, 1/q) diag(1, -1, ..., -1)
    """
    tau = params.tau
    ps = params.shifted(dalpha=-tau, dbeta=-2 * tau, tau=-tau)
    lhsP = selfdual_P(e(z + tau), params) @ \
        np.linalg.inv(heine_companion(e(z + tau), ps))
    rhsP = np.linalg.inv(heine_companion(e(z), params)).T @ \
        selfdual_P(e(z), params)
    resP = np.max(np.abs(lhsP - rhsP)) / max(np.max(np.abs(rhsP)), 1e-30)
    D = np.diag([1.0] + [-1.0] * (params.r - 1))
    lhsU = np.linalg.inv(heine_U(z, tau, params, policy)).T
    ps2 = params.shifted(dalpha=-tau, dbeta=-2 * tau)
    rhsU = selfdual_P(e(z), params) @ heine_U(z, -tau, ps2, policy) @ D
    resU = np.max(np.abs(lhsU - rhsU)) / max(np.max(np.abs(rhsU)), 1e-30)
    return {"Peq": float(resP), "Ueq": float(resU)}


# ---------------------------------------------------------------------------
# state integral
# ---------------------------------------------------------------------------

def phi_b(x, tau, policy: PrecisionPolicy = DEFAULT_POLICY) -> complex:
    """Faddeev quantum dilogarithm Phi_b(x), b = sqrt(tau), through the
    Pochhammer-ratio kernel: Phi_b(x) = 1/faddeev_phi(-i b x + (1-tau)/2, tau).

    Satisfies both shift equations
    Phi_b(x - ib/2) = (1 + e^(2 pi b x)) Phi_b(x + ib/2) (and b -> 1/b) and
    the inversion relation Phi_b(x)Phi_b(-x) = e(x^2/2) e((tau + 1/tau)/24).
    """
    b = cmath.sqrt(tau)
    return 1.0 / faddeev_phi(-1j * b * x + (1 - tau) / 2.0, tau, policy)


def state_integrand(params: HeineParams):
    """Integrand of the state integral: callable of (x, z)."""
    tau = params.tau
    b = cmath.sqrt(tau)
    shift = 1j / b - 1j * b

    def f(x, z):
        num = phi_b(x, tau)
        for be in params.beta:
            num *= phi_b(x + 1j * be / b + shift, tau)
        den = 1.0 + 0j
        for al in params.alpha:
            den *= phi_b(x + 1j * al / b + shift, tau)
        return num / den * cmath.exp(-2 * math.pi * z * x / b)
    return f


def state_integral_domain(z, params: HeineParams) -> dict:
    """Horizontal-contour requirements for the state integral at (z, params).

    left/right are the endpoint decay rates of the integrand along R + i*eps
    (both must be positive); sep_j > 0 keeps the topmost pole of the j-th
    denominator family below the contour, num_i > 0 keeps the numerator
    poles above it."""
    tau = params.tau
    b = cmath.sqrt(tau)
    gamma = tau + sum(params.beta) - sum(params.alpha)
    out = {
        "left": -(z / b).real,
        "right": ((gamma - 1 + z) / b).real,
        "sep": [((2 * al + 3 - tau) / b).real for al in params.alpha],
        "num": [((3 * tau - 2 * be - 1) / b).real for be in params.beta],
    }
    return out


def heine_state_integral(z, params: HeineParams, eps: float = 0.03,
                         halflen: float = 18.0,
                         policy: PrecisionPolicy = DEFAULT_POLICY):
    """Quadrature value of the state integral over R + i*eps.

    Both endpoint decay rates and the pole-separation margins from
    state_integral_domain must be positive; otherwise the straight contour
    either diverges or crosses a pole family."""
    dom = state_integral_domain(z, params)
    if dom["left"] <= 0 or dom["right"] <= 0:
        raise DomainError(f"state integral: no endpoint decay ({dom})")
    if any(s <= 0 for s in dom["sep"]) or any(s <= 0 for s in dom["num"]):
        raise DomainError(f"state integral: pole on contour side ({dom})")
    f = state_integrand(params)
    spec = ContourSpec("line", center=1j * eps, direction=1.0,
                       halflen=halflen)
    val, err = integrate_line(lambda x: f(x, z), spec, policy)
    return val, err


def state_integral_factorization(z, params: HeineParams,
                                 policy: PrecisionPolicy = DEFAULT_POLICY) -> complex:
    """Closed form of the state integral by summing its r pole families.

    Closing the contour downwards, the poles of the integrand sit below the
    contour in r two-dimensional lattices, one per denominator factor.  The
    residues of the j-th family sum to an elementary prefactor times a
    product of two hypergeometric series, one in t at base q with argument
    e(gamma + z) and one in ttil at base qtil:

        I(z) = sum_j P_j * rphi_{r-1}(a_j, q a_j/b; q a_j/a'; q, e(gamma)t)
                       * rphi_{r-1}(qtil^2/atil_j, qtil btil/atil_j;
                                    qtil atil'/atil_j; qtil, ttil)

    (primes range over the other alphas).  Each factor is verifiable
    against direct residue quadrature; the total matches the contour
    integral whenever the domain conditions of state_integral_domain hold.
    """
    tau = params.tau
    b = cmath.sqrt(tau)
    q = e(tau)
    qt = e(-1.0 / tau)
    gamma = tau + sum(params.beta) - sum(params.alpha)
    a = [e(al) for al in params.alpha]
    at = [e(al / tau) for al in params.alpha]
    bb = [e(be) for be in params.beta]
    bt = [e(be / tau) for be in params.beta]
    r = params.r
    qp = lambda x, base: qpoch_val(x, base, None, policy)
    total = 0.0 + 0j
    for j in range(r):
        P = (1j / b) * e(z * (1 - tau) / (2 * tau)) \
            * e(z * params.alpha[j] / tau) * e(z / tau)
        P *= qp(q / a[j], q) / qp(q, q)
        for bi in bb:
            P *= qp(bi / a[j], q)
        for jp in range(r):
            if jp != j:
                P /= qp(a[jp] / a[j], q)
        P *= qp(qt, qt)
        for jp in range(r):
            if jp != j:
                P *= qp(qt * at[jp] / at[j], qt)
        P /= qp(qt ** 2 / at[j], qt)
        for bti in bt:
            P /= qp(qt * bti / at[j], qt)
        upper_q = [a[j]] + [q * a[j] / bi for bi in bb]
        lower_q = [q * a[j] / a[jp] for jp in range(r) if jp != j]
        Sq = phi_rs(upper_q, lower_q, q, e(gamma + z), policy).value
        upper_qt = [qt ** 2 / at[j]] + [qt * bti / at[j] for bti in bt]
        lower_qt = [qt * at[jp] / at[j] for jp in range(r) if jp != j]
        Sqt = phi_rs(upper_qt, lower_qt, qt, e(z / tau), policy).value
        total += P * Sq * Sqt
    return total


# ---------------------------------------------------------------------------
# resonance (r = 2)
# ---------------------------------------------------------------------------

def resonance_bases(mode: str, alpha, tau,
                    policy: PrecisionPolicy = DEFAULT_POLICY):
    """Resonant r=2 bases.

    mode "b_equals_c" (parameters (a, b; b)): returns dict with
      f1:  the q-binomial submodule solution (at;q)_inf/(t;q)_inf
      fqb: the second solution (callable of z), plus "inhom_rhs", the
           right-hand side of its inhomogeneous two-term relation
           (1-t) f(t) - (1-at) f(qt) = rhs(t).

    mode "c_equals_q" (lower parameter c = q): returns dict with jet
    solutions f10, f11 (coefficients of eps^0, eps^1 of the deformed
    Frobenius family), both annihilated by the specialized operator.
    """
    q = e(tau)
    if mode == "b_equals_c":
        al, be = alpha           # exponent coords of a and b (= c)
        a = e(al)
        b = e(be)

        def f1(z):
            return qpoch_val(a * e(z), q, None, policy) \
                / qpoch_val(e(z), q, None, policy)

        pref_const = (qpoch_val(a, q, None, policy)
                      * qpoch_val(q * q / b, q, None, policy)
                      * qpoch_val(q, q, None, policy) ** 2
                      / (qpoch_val(q * a / b, q, None, policy)
                         * theta_val(be - tau, tau, policy)))

        def fqb(z):
            # plain Pochhammer-ratio series, no (q;q)_k factor
            t = e(z)
            ser = 0.0 + 0j
            term = 1.0 + 0j
            qk = 1.0 + 0j
            for k in range(policy.max_terms):
                ser += term
                if abs(term) < policy.rel_tol * max(1.0, abs(ser)) and k > 8:
                    break
                term *= (1 - q * a / b * qk) / (1 - q * q / b * qk) * t
                qk *= q
            return pref_const * theta_val(z + be - tau, tau, policy) \
                / theta_val(z, tau, policy) * ser

        def inhom_rhs(z):
            # the constant (1 - q/b) is forced by the k=0 term of the series
            return (1 - q / b) * pref_const \
                * theta_val(z + be - tau, tau, policy) \
                / theta_val(z, tau, policy)
        return {"f1": f1, "fqb": fqb, "inhom_rhs": inhom_rhs,
                "a": a, "b": b}
    if mode == "c_equals_q":
        al, be = alpha
        a = e(al)
        b = e(be)

        def jets(z, n=2):
            """2-jet of the deformed solution family in eps."""
            t = e(z)
            # prefactor (q e^eps;q)_inf^2 / ((a e^eps;q)_inf (b e^eps;q)_inf)
            pref = _jet_qpoch_inf(q, q, n, policy) ** 2 \
                / (_jet_qpoch_inf(a, q, n, policy)
                   * _jet_qpoch_inf(b, q, n, policy))
            # theta(e^-eps t;q)/theta(t;q) jet:
            # d/deps log theta(e^-eps t) = -(t d/dt log theta)(t)
            from .core import theta_logd
            th = _Jet(np.array([1.0, -theta_logd(z, tau, 1, policy)],
                               dtype=complex))
            total = _Jet(np.zeros(n, dtype=complex))
            term = _Jet(np.array([1.0, 0.0], dtype=complex))
            tk = 1.0 + 0j
            qk = 1.0 + 0j
            for k in range(policy.max_terms):
                total = total + term * tk
                if abs(tk) * max(abs(term.c[0]), abs(term.c[1])) \
                        < policy.rel_tol and k > 8:
                    break
                term = term * (_jet_lin(a, qk) * _jet_lin(b, qk)
                               / (_jet_lin(q, qk) * _jet_lin(q, qk)))
                tk *= t
                qk *= q
            out = pref * th * total
            return out.c

        def f10(z):
            return jets(z)[0]

        def f11(z):
            return jets(z)[1]
        return {"f10": f10, "f11": f11, "a": a, "b": b}
    raise UnsupportedResonance(f"unknown resonance mode {mode!r}")


class _Jet:
    """Tiny 2-jet (value, eps-derivative) arithmetic helper."""

    def __init__(self, c):
        self.c = np.asarray(c, dtype=complex)

    def __add__(self, o):
        return _Jet(self.c + (o.c if isinstance(o, _Jet) else
                              np.array([o, 0.0])))

    def __mul__(self, o):
        if not isinstance(o, _Jet):
            return _Jet(self.c * o)
        return _Jet(np.array([self.c[0] * o.c[0],
                              self.c[0] * o.c[1] + self.c[1] * o.c[0]]))

    def __truediv__(self, o):
        if not isinstance(o, _Jet):
            return _Jet(self.c / o)
        inv = _Jet(np.array([1.0 / o.c[0], -o.c[1] / o.c[0] ** 2]))
        return self * inv

    def __pow__(self, n):
        out = _Jet(np.array([1.0, 0.0]))
        for _ in range(n):
            out = out * self
        return out


def _jet_lin(x, qk):
    """2-jet of (1 - x e^eps q^k): value 1 - x q^k, derivative -x q^k."""
    return _Jet(np.array([1.0 - x * qk, -x * qk]))


def _jet_qpoch_inf(x, q, n, policy):
    """2-jet of (x e^eps; q)_inf."""
    val = qpoch_val(x, q, None, policy)
    # d/deps log (x e^eps;q)_inf = -sum_k x q^k/(1 - x q^k)
    s = 0.0 + 0j
    qk = 1.0 + 0j
    for k in range(policy.max_terms):
        term = x * qk / (1.0 - x * qk)
        s += term
        qk *= q
        if abs(term) < policy.rel_tol:
            break
    return _Jet(np.array([val, -val * s]))
