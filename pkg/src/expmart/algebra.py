"""Exact algebra of polynomial-times-exponential functionals of a Gaussian.

At a fixed time, a continuous martingale with deterministic quadratic
variation q has value X ~ N(0, q).  The elements handled here are finite
sums

    f(X) = sum_k p_k(X) * E(c_k),        E(c) = exp(c*X - c^2*q/2),

with complex exponents c_k and complex polynomial factors p_k.  This family
is closed under products (E(c)E(d) = exp(c*d*q) E(c+d)), complex
conjugation, multiplication by X, the lowering/raising pair

    D = q * d/dx,        D* = X - D,

and the unitary transform G determined by G E(c) = E(-i c).  Expectations
under N(0, q) are evaluated by an exact moment recursion, so every routine
in this module is closed-form; nothing is sampled.

Canonical form
--------------
Every operation returns a normalized element: terms sorted by exponent
(real part, then imaginary part), exponents equal to within 1e-12 per
component merged, trailing zero coefficients trimmed, zero polynomials
dropped.  Operations that can cancel (addition, subtraction, products with
colliding exponents, commutator residuals) also drop coefficients smaller
than 1e-12 relative to the pre-cancellation coefficient scale, so that
f - f collapses to the literal zero element (no terms).  Exact unary maps
(conjugation, X, D, D*, G, scalar multiples) never drop small coefficients:
a legitimate element may mix coefficient magnitudes across many orders.
"""

from __future__ import annotations

import cmath
import math
import threading

import mpmath as mp
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterable, Sequence

__all__ = [
    "CANONICAL_TOL",
    "PolyExpElement",
    "HermiteExpansion",
    "VarianceMismatchError",
    "NonPolynomialElementError",
    "make_element",
    "make_exponential",
    "zero_element",
    "one_element",
    "monomial",
    "add",
    "sub",
    "scale",
    "mul",
    "conjugate",
    "gaussian_expectation",
    "expectation",
    "inner_product",
    "norm",
    "cross_time_inner_product",
    "apply_X",
    "apply_D",
    "apply_D_star",
    "apply_G",
    "hermite_coefficients",
    "hermite_element",
    "to_hermite",
    "from_hermite",
    "commutator_residual",
    "element_to_text",
    "element_from_text",
]

# Relative tolerance of the canonical form: exponent components closer than
# this merge, and cancelling operations drop coefficients below this fraction
# of the pre-cancellation scale.
CANONICAL_TOL = 1e-12

Term = tuple[complex, tuple[complex, ...]]


class VarianceMismatchError(ValueError):
    """Raised when two elements with different variance parameters are combined."""


class NonPolynomialElementError(ValueError):
    """Raised when a Hermite conversion is applied to an element with exponentials."""


def _require_finite_complex(z: complex, what: str) -> complex:
    z = complex(z)
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise ValueError(f"{what} must be finite, got {z!r}")
    return z


def _require_variance(q: float) -> float:
    q = float(q)
    if not math.isfinite(q) or q < 0.0:
        raise ValueError(f"variance parameter must be finite and >= 0, got {q!r}")
    return q


def _check_same_q(f: "PolyExpElement", g: "PolyExpElement") -> float:
    if f.q != g.q:
        raise VarianceMismatchError(
            f"elements live at different variance parameters: {f.q!r} vs {g.q!r}"
        )
    return f.q


# ---------------------------------------------------------------------------
# polynomial helpers (coefficient tuples, low degree first)

def _poly_trim(coeffs: Sequence[complex]) -> tuple[complex, ...]:
    n = len(coeffs)
    while n > 0 and coeffs[n - 1] == 0:
        n -= 1
    return tuple(coeffs[:n])


def _poly_add(a: Sequence[complex], b: Sequence[complex]) -> tuple[complex, ...]:
    if len(a) < len(b):
        a, b = b, a
    out = list(a)
    for i, v in enumerate(b):
        out[i] += v
    return tuple(out)


def _poly_scale(a: Sequence[complex], s: complex) -> tuple[complex, ...]:
    return tuple(s * v for v in a)


def _poly_mul(a: Sequence[complex], b: Sequence[complex]) -> tuple[complex, ...]:
    if not a or not b:
        return ()
    out = [0j] * (len(a) + len(b) - 1)
    for i, u in enumerate(a):
        if u == 0:
            continue
        for j, v in enumerate(b):
            out[i + j] += u * v
    return tuple(out)


def _poly_diff(a: Sequence[complex]) -> tuple[complex, ...]:
    return tuple(k * a[k] for k in range(1, len(a)))


def _poly_shift(a: Sequence[complex]) -> tuple[complex, ...]:
    # multiply by x
    return (0j, *a) if a else ()


def _max_abs(coeffs: Iterable[complex]) -> float:
    m = 0.0
    for v in coeffs:
        av = abs(v)
        if av > m:
            m = av
    return m


# ---------------------------------------------------------------------------
# canonicalization

def _clean_zero(z: complex) -> complex:
    # -0.0 components break nothing but make reprs and golden files unstable
    return complex(z.real + 0.0, z.imag + 0.0)


def _canonical_terms(raw: Iterable[Term], scale: float) -> tuple[Term, ...]:
    """Sort, merge near-equal exponents, drop sub-scale coefficients.

    ``scale`` is the pre-cancellation coefficient magnitude of the operation
    that produced ``raw``; coefficients below CANONICAL_TOL * scale are set
    to zero.  Pass 0.0 to disable dropping (exact unary operations).
    """
    items = sorted(
        ((_clean_zero(c), tuple(_clean_zero(v) for v in p)) for c, p in raw),
        key=lambda t: (t[0].real, t[0].imag),
    )
    merged: list[tuple[complex, list[complex]]] = []
    for c, p in items:
        if merged:
            rep = merged[-1][0]
            if abs(c.real - rep.real) <= CANONICAL_TOL and abs(c.imag - rep.imag) <= CANONICAL_TOL:
                merged[-1] = (rep, list(_poly_add(merged[-1][1], p)))
                continue
        merged.append((c, list(p)))

    drop = CANONICAL_TOL * scale
    out: list[Term] = []
    for c, p in merged:
        cleaned = tuple(0j if abs(v) <= drop else v for v in p)
        cleaned = _poly_trim(cleaned)
        if cleaned:
            out.append((c, cleaned))
    return tuple(out)


@dataclass(frozen=True)
class PolyExpElement:
    """A finite sum  sum_k p_k(X) * exp(c_k X - c_k^2 q / 2)  at fixed q.

    ``terms`` maps each exponent c_k to the coefficient tuple of p_k (low
    degree first).  The zero element has an empty ``terms``.  Instances are
    immutable; build them with :func:`make_element` / :func:`make_exponential`
    or by arithmetic on existing elements.
    """

    q: float
    terms: tuple[Term, ...] = ()

    def __post_init__(self) -> None:
        _require_variance(self.q)
        last_key = None
        for c, p in self.terms:
            _require_finite_complex(c, "exponent")
            if not p or p[-1] == 0:
                raise ValueError("canonical terms must have trimmed, nonzero polynomials")
            for v in p:
                _require_finite_complex(v, "coefficient")
            key = (c.real, c.imag)
            if last_key is not None and key <= last_key:
                raise ValueError("canonical terms must be strictly ordered by exponent")
            last_key = key

    # -- convenience ------------------------------------------------------
    @property
    def is_zero(self) -> bool:
        return not self.terms

    def degree(self) -> int:
        """Max polynomial degree across terms (-1 for the zero element)."""
        return max((len(p) - 1 for _, p in self.terms), default=-1)

    def max_abs_coeff(self) -> float:
        return max((_max_abs(p) for _, p in self.terms), default=0.0)

    # -- operator sugar ----------------------------------------------------
    def __add__(self, other: "PolyExpElement") -> "PolyExpElement":
        return add(self, other)

    def __sub__(self, other: "PolyExpElement") -> "PolyExpElement":
        return sub(self, other)

    def __neg__(self) -> "PolyExpElement":
        return scale(self, -1.0)

    def __mul__(self, other):
        if isinstance(other, PolyExpElement):
            return mul(self, other)
        return scale(self, other)

    def __rmul__(self, other):
        return scale(self, other)

    def __truediv__(self, other):
        return scale(self, 1.0 / complex(other))


# ---------------------------------------------------------------------------
# constructors

def make_element(q: float, terms: Iterable[tuple[complex, Sequence[complex]]]) -> PolyExpElement:
    """Build a canonical element from (exponent, coefficient-tuple) pairs."""
    raw = [(complex(c), tuple(complex(v) for v in p)) for c, p in terms]
    for c, p in raw:
        _require_finite_complex(c, "exponent")
        for v in p:
            _require_finite_complex(v, "coefficient")
    scale_ = max((_max_abs(p) for _, p in raw), default=0.0)
    return PolyExpElement(_require_variance(q), _canonical_terms(raw, scale_))


def make_exponential(c: complex, q: float) -> PolyExpElement:
    """The exponential element E(c) = exp(c*X - c^2 q/2), unit coefficient."""
    c = _require_finite_complex(c, "exponent")
    return PolyExpElement(_require_variance(q), (((c), (1 + 0j,)),))


def zero_element(q: float) -> PolyExpElement:
    return PolyExpElement(_require_variance(q), ())


def one_element(q: float) -> PolyExpElement:
    return make_exponential(0.0, q)


def monomial(n: int, q: float) -> PolyExpElement:
    """The element X^n (exponent zero)."""
    if n < 0:
        raise ValueError("monomial degree must be >= 0")
    return PolyExpElement(_require_variance(q), ((0j, (0j,) * n + (1 + 0j,)),))


# ---------------------------------------------------------------------------
# linear structure and products

def add(f: PolyExpElement, g: PolyExpElement) -> PolyExpElement:
    q = _check_same_q(f, g)
    raw = list(f.terms) + list(g.terms)
    scale_ = max(f.max_abs_coeff(), g.max_abs_coeff())
    return PolyExpElement(q, _canonical_terms(raw, scale_))


def sub(f: PolyExpElement, g: PolyExpElement) -> PolyExpElement:
    return add(f, scale(g, -1.0))


def scale(f: PolyExpElement, s: complex) -> PolyExpElement:
    s = _require_finite_complex(s, "scalar")
    if s == 0:
        return zero_element(f.q)
    raw = [(c, _poly_scale(p, s)) for c, p in f.terms]
    return PolyExpElement(f.q, _canonical_terms(raw, 0.0))


def mul(f: PolyExpElement, g: PolyExpElement) -> PolyExpElement:
    """Pointwise product.

    Exponential parts combine as E(c)E(d) = exp(c*d*q) E(c+d); polynomial
    parts multiply by convolution.
    """
    q = _check_same_q(f, g)
    raw: list[Term] = []
    for c, p in f.terms:
        for d, r in g.terms:
            factor = cmath.exp(c * d * q)
            raw.append((c + d, _poly_scale(_poly_mul(p, r), factor)))
    scale_ = max((_max_abs(p) for _, p in raw), default=0.0)
    return PolyExpElement(q, _canonical_terms(raw, scale_))


def conjugate(f: PolyExpElement) -> PolyExpElement:
    """Complex conjugation: exponents and coefficients conjugate."""
    raw = [(c.conjugate(), tuple(v.conjugate() for v in p)) for c, p in f.terms]
    return PolyExpElement(f.q, _canonical_terms(raw, 0.0))


# ---------------------------------------------------------------------------
# expectations
#
# Moment sums can cancel catastrophically: a G-image at q = 4 carries
# coefficients ~1e11 while its norm stays O(1)-relative, so the float64 sum
# can lose every digit.  All scalar reductions therefore fall back to mpmath
# at a cancellation-adapted precision whenever more than _ESCALATE_DIGITS
# decimal digits cancel; coefficients stay exact float64 inputs either way.

_ESCALATE_DIGITS = 2
_MAX_DPS = 70

# mpmath's working precision is process-global state; every escalated block
# holds this lock so concurrent evaluations cannot observe each other's dps.
_MP_LOCK = threading.Lock()


def _csum(values: Iterable[complex]) -> complex:
    vals = [complex(v) for v in values]
    return complex(
        math.fsum(v.real for v in vals),
        math.fsum(v.imag for v in vals),
    )


def _moment_addends(p: Sequence[complex], a: complex, q: float) -> list[complex]:
    """Addends p[k] * m_k with m_k = E[X^k exp(aX - a^2 q/2)], X ~ N(0, q).

    The tilted moments follow m_0 = 1, m_1 = a q,
    m_k = a q m_{k-1} + (k-1) q m_{k-2}.
    """
    if not p:
        return []
    addends = [complex(p[0])]
    m_prev2 = 1 + 0j
    m_prev1 = a * q
    for k in range(1, len(p)):
        addends.append(complex(p[k]) * m_prev1)
        m_prev2, m_prev1 = m_prev1, a * q * m_prev1 + k * q * m_prev2
    return addends


def _needs_escalation(addends: Sequence[complex], total: complex) -> tuple[bool, int]:
    amax = _max_abs(addends)
    if amax == 0.0:
        return False, 0
    if not (math.isfinite(amax) and math.isfinite(total.real) and math.isfinite(total.imag)):
        return True, _MAX_DPS
    ratio = amax / max(abs(total), amax * 1e-45)
    if ratio < 10.0**_ESCALATE_DIGITS:
        return False, 0
    return True, min(_MAX_DPS, 25 + int(math.log10(ratio)))


def _mp_moment_sum(p, a, q):
    """sum_k p[k] m_k in the current mpmath context (p entries mpc-able)."""
    if not len(p):
        return mp.mpc(0)
    a = mp.mpmathify(a)
    q = mp.mpf(q)
    total = mp.mpc(p[0])
    m_prev2 = mp.mpc(1)
    m_prev1 = a * q
    for k in range(1, len(p)):
        total += mp.mpc(p[k]) * m_prev1
        m_prev2, m_prev1 = m_prev1, a * q * m_prev1 + k * q * m_prev2
    return total


def gaussian_expectation(p: Sequence[complex], a: complex, q: float) -> complex:
    """E[p(X) exp(a X - a^2 q/2)] for X ~ N(0, q), exactly.

    Uses the tilted moment recursion with compensated summation, escalating
    to mpmath when cancellation would dominate the float64 result.
    """
    a = _require_finite_complex(a, "tilt")
    q = _require_variance(q)
    coeffs = [complex(v) for v in p]
    addends = _moment_addends(coeffs, a, q)
    if not addends:
        return 0j
    total = _csum(addends)
    escalate, dps = _needs_escalation(addends, total)
    if not escalate:
        return total
    with _MP_LOCK, mp.workdps(dps):
        return complex(_mp_moment_sum(coeffs, a, q))


def expectation(f: PolyExpElement) -> complex:
    """E[f(X)] for X ~ N(0, q); each exponential term has expectation one."""
    addends: list[complex] = []
    for c, p in f.terms:
        addends.extend(_moment_addends(p, c, f.q))
    if not addends:
        return 0j
    total = _csum(addends)
    escalate, dps = _needs_escalation(addends, total)
    if not escalate:
        return total
    with _MP_LOCK, mp.workdps(dps):
        acc = mp.mpc(0)
        for c, p in f.terms:
            acc += _mp_moment_sum(p, c, f.q)
        return complex(acc)


def _pair_addends(
    c: complex, p: Sequence[complex], d: complex, r: Sequence[complex], q: float
) -> list[complex]:
    """Addends of exp(c conj(d) q) E[p(X) conj(r)(X) E(c + conj(d))]."""
    dd = d.conjugate()
    factor = cmath.exp(c * dd * q)
    conv = _poly_mul(p, tuple(v.conjugate() for v in r))
    return [factor * v for v in _moment_addends(conv, c + dd, q)]


def inner_product(f: PolyExpElement, g: PolyExpElement) -> complex:
    """<f, g> = E[f(X) * conj(g(X))].

    For pure exponentials this reduces to exp(c * conj(d) * q).  Terms are
    paired directly (no intermediate canonicalized product), so the adaptive
    precision sees the complete cancellation structure.
    """
    q = _check_same_q(f, g)
    addends: list[complex] = []
    for c, p in f.terms:
        for d, r in g.terms:
            addends.extend(_pair_addends(c, p, d, r, q))
    if not addends:
        return 0j
    total = _csum(addends)
    escalate, dps = _needs_escalation(addends, total)
    if not escalate:
        return total
    with _MP_LOCK, mp.workdps(dps):
        acc = mp.mpc(0)
        for c, p in f.terms:
            for d, r in g.terms:
                cc = mp.mpmathify(c)
                dd = mp.mpmathify(d).conjugate()
                conv = [mp.mpc(0)] * (len(p) + len(r) - 1)
                for i, u in enumerate(p):
                    for j, v in enumerate(r):
                        conv[i + j] += mp.mpmathify(u) * mp.mpmathify(v).conjugate()
                acc += mp.e ** (cc * dd * mp.mpf(q)) * _mp_moment_sum(conv, cc + dd, q)
        return complex(acc)


def norm(f: PolyExpElement) -> float:
    v = inner_product(f, f).real
    return math.sqrt(v) if v > 0.0 else 0.0


def cross_time_inner_product(
    c: complex, s: float, d: complex, t: float, h: Callable[[float], float]
) -> complex:
    """<E(c) at time s, E(d) at time t> = exp(c * conj(d) * h(min(s, t))).

    ``h`` is any callable time change (nondecreasing, h(0) = 0).  Exposed for
    exponential pairs only; no closed joint law is used for polynomial parts.
    """
    c = _require_finite_complex(c, "exponent")
    d = _require_finite_complex(d, "exponent")
    if s < 0 or t < 0:
        raise ValueError("times must be >= 0")
    q = float(h(min(s, t)))
    if q < 0:
        raise ValueError("time change must be nonnegative")
    return cmath.exp(c * d.conjugate() * q)


# ---------------------------------------------------------------------------
# operators

def apply_X(f: PolyExpElement) -> PolyExpElement:
    """Multiplication by X: shifts every polynomial factor up one degree."""
    raw = [(c, _poly_shift(p)) for c, p in f.terms]
    return PolyExpElement(f.q, _canonical_terms(raw, 0.0))


def apply_D(f: PolyExpElement) -> PolyExpElement:
    """Lowering operator D = q * d/dx.

    On a term p(x) E(c) the derivative acts as q (p' + c p) E(c); in
    particular D E(c) = c q E(c).
    """
    q = f.q
    raw = []
    for c, p in f.terms:
        raw.append((c, _poly_add(_poly_scale(_poly_diff(p), q), _poly_scale(p, c * q))))
    return PolyExpElement(q, _canonical_terms(raw, 0.0))


def apply_D_star(f: PolyExpElement) -> PolyExpElement:
    """Raising operator D* = X - D, the adjoint of D.

    On exponentials: D* E(c) = (x - c q) E(c).
    """
    q = f.q
    raw = []
    for c, p in f.terms:
        lowered = _poly_add(_poly_scale(_poly_diff(p), q), _poly_scale(p, c * q))
        raw.append((c, _poly_add(_poly_shift(p), _poly_scale(lowered, -1.0))))
    return PolyExpElement(q, _canonical_terms(raw, 0.0))


def apply_G(f: PolyExpElement) -> PolyExpElement:
    """The unitary transform G with G E(c) = E(-i c).

    The action on polynomial factors follows from differentiating the
    exponential family in the exponent: with beta(x) = 2 c q - i x,

        G(x^n E(c)) = P_n(x) E(-i c),
        P_0 = 1,  P_1 = beta,  P_{n+1} = beta P_n + 2 q n P_{n-1},

    which reproduces G H_n = (-i)^n H_n on the variance-q Hermite basis.
    """
    q = f.q
    raw: list[Term] = []
    for c, p in f.terms:
        beta = (2.0 * c * q, -1j)  # constant and x coefficient
        out: tuple[complex, ...] = ()
        p_nm1: tuple[complex, ...] = ()  # P_{n-1}
        p_n: tuple[complex, ...] = (1 + 0j,)  # P_0
        for n, coeff in enumerate(p):
            if coeff != 0:
                out = _poly_add(out, _poly_scale(p_n, coeff))
            # advance P_{n} -> P_{n+1} = beta P_n + 2 q n P_{n-1}
            nxt = _poly_add(
                _poly_add(_poly_scale(p_n, beta[0]), _poly_scale(_poly_shift(p_n), beta[1])),
                _poly_scale(p_nm1, 2.0 * q * n),
            )
            p_nm1, p_n = p_n, nxt
        raw.append((-1j * c, out))
    return PolyExpElement(q, _canonical_terms(raw, 0.0))


# ---------------------------------------------------------------------------
# Hermite bridge

@lru_cache(maxsize=None)
def hermite_coefficients(n: int, q: float) -> tuple[complex, ...]:
    """Monomial coefficients of the variance-q Hermite polynomial H_n(x; q).

    H_0 = 1, H_1 = x, H_{n+1} = x H_n - n q H_{n-1}; orthogonal under
    N(0, q) with <H_m, H_n> = delta_mn n! q^n.
    """
    if n < 0:
        raise ValueError("Hermite order must be >= 0")
    h_prev: tuple[complex, ...] = (1 + 0j,)
    if n == 0:
        return h_prev
    h_cur: tuple[complex, ...] = (0j, 1 + 0j)
    for k in range(1, n):
        h_nxt = _poly_add(_poly_shift(h_cur), _poly_scale(h_prev, -k * q))
        h_prev, h_cur = h_cur, h_nxt
    return h_cur


def hermite_element(n: int, q: float) -> PolyExpElement:
    """H_n(X; q) as an element (single term, exponent zero)."""
    return make_element(q, [(0.0, hermite_coefficients(n, _require_variance(q)))])


@dataclass(frozen=True)
class HermiteExpansion:
    """Coefficients of a pure polynomial element in the H_n(x; q) basis."""

    q: float
    coeffs: tuple[complex, ...]

    def __post_init__(self) -> None:
        _require_variance(self.q)
        for v in self.coeffs:
            _require_finite_complex(v, "Hermite coefficient")


def to_hermite(f: PolyExpElement) -> HermiteExpansion:
    """Expand a pure polynomial element over the Hermite basis.

    Only elements with a single exponent-zero term (or the zero element)
    qualify; anything carrying a genuine exponential raises.
    """
    if f.is_zero:
        return HermiteExpansion(f.q, ())
    if len(f.terms) != 1 or f.terms[0][0] != 0:
        raise NonPolynomialElementError(
            "Hermite expansion requires a pure polynomial element (exponent zero)"
        )
    residual = list(f.terms[0][1])
    out = [0j] * len(residual)
    # peel from the top: H_d is monic of degree d
    for d in range(len(residual) - 1, -1, -1):
        a = residual[d]
        out[d] = a
        if a != 0:
            for k, v in enumerate(hermite_coefficients(d, f.q)):
                residual[k] -= a * v
    return HermiteExpansion(f.q, _poly_trim(out))


def from_hermite(h: HermiteExpansion) -> PolyExpElement:
    """Rebuild the polynomial element sum_n coeffs[n] H_n(X; q)."""
    poly: tuple[complex, ...] = ()
    for n, a in enumerate(h.coeffs):
        if a != 0:
            poly = _poly_add(poly, _poly_scale(hermite_coefficients(n, h.q), a))
    return make_element(h.q, [(0.0, poly)] if poly else [])


# ---------------------------------------------------------------------------
# commutators

_COMMUTATORS = ("DX", "DDstar", "DG", "DstarG")


def commutator_residual(which: str, f: PolyExpElement) -> PolyExpElement:
    """Residual (LHS - RHS) of one of the four operator identities.

    DX:     D(X f) - X(D f) - q f            ([D, X] = q)
    DDstar: D(D* f) - D*(D f) - q f          ([D, D*] = q)
    DG:     D(G f) + i G(D f)                (D G = -i G D)
    DstarG: D*(G f) - i G(D* f)              (D* G = i G D*)

    For every element the residual canonicalizes to the zero element; the
    subtraction drops coefficients below 1e-12 of the composed images' scale.
    """
    if which == "DX":
        lhs = apply_D(apply_X(f))
        rhs = add(apply_X(apply_D(f)), scale(f, f.q))
    elif which == "DDstar":
        lhs = apply_D(apply_D_star(f))
        rhs = add(apply_D_star(apply_D(f)), scale(f, f.q))
    elif which == "DG":
        lhs = apply_D(apply_G(f))
        rhs = scale(apply_G(apply_D(f)), -1j)
    elif which == "DstarG":
        lhs = apply_D_star(apply_G(f))
        rhs = scale(apply_G(apply_D_star(f)), 1j)
    else:
        raise ValueError(f"unknown commutator {which!r}; expected one of {_COMMUTATORS}")
    return sub(lhs, rhs)


# ---------------------------------------------------------------------------
# plain-text serialization (reports, golden files)

def element_to_text(f: PolyExpElement) -> str:
    """Serialize: header line with q, then one line per term.

    Term lines hold the exponent's real and imaginary part followed by the
    coefficients as alternating real/imaginary parts.  repr() round-trips
    doubles exactly.
    """
    lines = [f"q {f.q!r}"]
    for c, p in f.terms:
        parts = [repr(c.real), repr(c.imag)]
        for v in p:
            parts.append(repr(v.real))
            parts.append(repr(v.imag))
        lines.append(" ".join(parts))
    return "\n".join(lines) + "\n"


def element_from_text(text: str) -> PolyExpElement:
    lines = [ln for ln in text.strip().splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("q "):
        raise ValueError("element text must start with a 'q <value>' header")
    q = float(lines[0][2:])
    terms: list[tuple[complex, tuple[complex, ...]]] = []
    for ln in lines[1:]:
        vals = [float(tok) for tok in ln.split()]
        if len(vals) < 2 or len(vals) % 2 != 0:
            raise ValueError(f"malformed term line: {ln!r}")
        c = complex(vals[0], vals[1])
        coeffs = tuple(complex(vals[k], vals[k + 1]) for k in range(2, len(vals), 2))
        terms.append((c, coeffs))
    return make_element(q, terms)
