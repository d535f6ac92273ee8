"""Continuous-time SISO transfer functions, dead time and the process test bench.

Polynomial coefficients are real and ordered highest power first, so
``(1.0, 3.0, 3.0, 1.0)`` is ``s^3 + 3 s^2 + 3 s + 1``.  Dead time is carried
symbolically on :class:`DelayedTF` and only turned into a rational all-pass
factor when a caller asks for it (:func:`pade3_delay`).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
import scipy.integrate
import scipy.linalg


class ParameterError(ValueError):
    """A constructor argument is outside its documented domain."""


class EvaluationError(ArithmeticError):
    """A response evaluation hit a pole or otherwise cannot be computed."""


class DomainError(ValueError):
    """The operation is undefined for this system (improper, unstable, ...)."""


def _trim(coeffs) -> tuple[float, ...]:
    """Drop exact leading zeros; always keep at least one coefficient."""
    vals = [float(c) for c in coeffs]
    if not vals:
        raise ParameterError("empty coefficient sequence")
    head = 0
    while head < len(vals) - 1 and vals[head] == 0.0:
        head += 1
    return tuple(vals[head:])


def polymul(a, b) -> tuple[float, ...]:
    return _trim(np.polymul(np.asarray(a, float), np.asarray(b, float)))


def polyadd(a, b) -> tuple[float, ...]:
    return _trim(np.polyadd(np.asarray(a, float), np.asarray(b, float)))


def polysub(a, b) -> tuple[float, ...]:
    return _trim(np.polysub(np.asarray(a, float), np.asarray(b, float)))


@dataclass(frozen=True)
class RationalTF:
    """Ratio of two real polynomials in ``s``, highest power first."""

    num: tuple[float, ...]
    den: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "num", _trim(self.num))
        object.__setattr__(self, "den", _trim(self.den))
        if not all(math.isfinite(c) for c in self.num + self.den):
            raise ParameterError("non-finite coefficient")
        if self.den[0] == 0.0:
            raise ParameterError("denominator is identically zero")

    @property
    def num_degree(self) -> int:
        return len(self.num) - 1

    @property
    def den_degree(self) -> int:
        return len(self.den) - 1

    @property
    def is_proper(self) -> bool:
        return self.num_degree <= self.den_degree

    @property
    def is_strictly_proper(self) -> bool:
        return self.num_degree < self.den_degree or self.is_zero

    @property
    def is_zero(self) -> bool:
        return all(c == 0.0 for c in self.num)

    def dc_gain(self) -> float:
        if self.den[-1] == 0.0:
            return math.inf if self.num[-1] != 0.0 else math.nan
        return self.num[-1] / self.den[-1]

    def eval_at(self, s):
        """Evaluate ``num(s)/den(s)``; ``s`` may be scalar or ndarray."""
        sv = np.asarray(s, dtype=complex)
        dv = np.polyval(self.den, sv)
        if np.any(dv == 0.0):
            raise EvaluationError("evaluation at a pole")
        out = np.polyval(self.num, sv) / dv
        return complex(out) if np.isscalar(s) or sv.ndim == 0 else out

    def __mul__(self, other: "RationalTF") -> "RationalTF":
        return RationalTF(polymul(self.num, other.num), polymul(self.den, other.den))

    def __add__(self, other: "RationalTF") -> "RationalTF":
        num = polyadd(polymul(self.num, other.den), polymul(other.num, self.den))
        return RationalTF(num, polymul(self.den, other.den))

    def __sub__(self, other: "RationalTF") -> "RationalTF":
        num = polysub(polymul(self.num, other.den), polymul(other.num, self.den))
        return RationalTF(num, polymul(self.den, other.den))


UNITY_TF = RationalTF((1.0,), (1.0,))


@dataclass(frozen=True)
class DelayedTF:
    """Rational part plus an input dead time ``exp(-L s)``, ``L >= 0``."""

    tf: RationalTF
    delay_L: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.delay_L) and self.delay_L >= 0.0):
            raise ParameterError(f"delay must be finite and >= 0, got {self.delay_L}")


@dataclass(frozen=True)
class FreqSample:
    omega: float
    re: float
    im: float

    def __post_init__(self):
        if not self.omega > 0.0:
            raise ParameterError("omega must be positive")


class DelayMode(str, enum.Enum):
    """How dead time enters a frequency response."""

    EXACT = "exact"
    PADE3 = "pade3"


class TestBenchFamily(str, enum.Enum):
    P1 = "P1"  # repeated-pole chain 1/(1+s)^n
    P2 = "P2"  # geometrically spread lags, ratio alpha
    P3 = "P3"  # one unit lag plus a repeated lag T
    P4 = "P4"  # right-half-plane zero, 1 - alpha s over (1+s)^3


@dataclass(frozen=True)
class TestBenchSpec:
    family: TestBenchFamily
    param: float

    def __post_init__(self):
        fam = TestBenchFamily(self.family)
        object.__setattr__(self, "family", fam)
        if fam is TestBenchFamily.P1:
            n = self.param
            if not (float(n).is_integer() and n >= 1):
                raise ParameterError("P1 order must be an integer >= 1")
            object.__setattr__(self, "param", float(int(n)))
        else:
            if not (math.isfinite(self.param) and self.param > 0.0):
                raise ParameterError("family parameter must be positive")

    def label(self) -> str:
        if self.family is TestBenchFamily.P1:
            return f"P1_n{int(self.param)}"
        name = "T" if self.family is TestBenchFamily.P3 else "alpha"
        return f"{self.family.value}_{name}{self.param:g}"


def make_testbench(spec: TestBenchSpec) -> DelayedTF:
    """Build one member of the benchmark process set (all delay free)."""
    fam, p = spec.family, spec.param
    if fam is TestBenchFamily.P1:
        den = (1.0,)
        for _ in range(int(p)):
            den = polymul(den, (1.0, 1.0))
        return DelayedTF(RationalTF((1.0,), den))
    if fam is TestBenchFamily.P2:
        den = (1.0,)
        for k in range(4):
            den = polymul(den, (p**k, 1.0))
        return DelayedTF(RationalTF((1.0,), den))
    if fam is TestBenchFamily.P3:
        den = polymul((1.0, 1.0), polymul((p, 1.0), (p, 1.0)))
        return DelayedTF(RationalTF((1.0,), den))
    # P4: one right-half-plane zero over a triple pole
    den = polymul((1.0, 1.0), polymul((1.0, 1.0), (1.0, 1.0)))
    return DelayedTF(RationalTF((-p, 1.0), den))


def make_foptd(K: float, tau: float, L: float) -> DelayedTF:
    """First-order-plus-dead-time template ``K e^{-Ls} / (tau s + 1)``."""
    if not (math.isfinite(K) and math.isfinite(tau) and tau > 0.0):
        raise ParameterError(f"need finite K and tau > 0, got K={K}, tau={tau}")
    return DelayedTF(RationalTF((K,), (tau, 1.0)), L)


def make_soptd(K: float, tau_max: float, tau_min: float, L: float) -> DelayedTF:
    """Second-order-plus-dead-time template with two real lags.

    ``K e^{-Ls} / ((tau_max s + 1)(tau_min s + 1))`` with
    ``tau_max >= tau_min > 0``.
    """
    if not (math.isfinite(K) and math.isfinite(tau_max) and math.isfinite(tau_min)):
        raise ParameterError("non-finite template parameter")
    if not (tau_max >= tau_min > 0.0):
        raise ParameterError(
            f"need tau_max >= tau_min > 0, got {tau_max}, {tau_min}"
        )
    den = (tau_max * tau_min, tau_max + tau_min, 1.0)
    return DelayedTF(RationalTF((K,), den), L)


def pade3_delay(L: float) -> RationalTF:
    """Third-order all-pass rational approximation of ``exp(-L s)``."""
    if not (math.isfinite(L) and L >= 0.0):
        raise ParameterError(f"delay must be finite and >= 0, got {L}")
    num = (-(L**3), 12.0 * L**2, -60.0 * L, 120.0)
    den = (L**3, 12.0 * L**2, 60.0 * L, 120.0)
    return RationalTF(num, den)


def freq_response_array(
    p: DelayedTF, omegas, delay_mode: DelayMode = DelayMode.EXACT
) -> np.ndarray:
    """Complex response ``P(j omega)`` on an array of positive frequencies."""
    w = np.asarray(omegas, dtype=float)
    if np.any(w <= 0.0):
        raise ParameterError("frequencies must be positive")
    s = 1j * w
    h = p.tf.eval_at(s)
    h = np.atleast_1d(np.asarray(h, dtype=complex))
    if p.delay_L > 0.0:
        if DelayMode(delay_mode) is DelayMode.EXACT:
            h = h * np.exp(-1j * w * p.delay_L)
        else:
            h = h * pade3_delay(p.delay_L).eval_at(s)
    return h


def freq_response(
    p: DelayedTF, omegas, delay_mode: DelayMode = DelayMode.EXACT
) -> list[FreqSample]:
    w = np.atleast_1d(np.asarray(omegas, dtype=float))
    h = freq_response_array(p, w, delay_mode)
    return [FreqSample(float(wi), float(hi.real), float(hi.imag)) for wi, hi in zip(w, h)]


def is_hurwitz(den) -> bool:
    """Routh-Hurwitz test: True iff every root of ``den`` has Re < 0.

    Degree-zero denominators count as stable (no poles).  Zero or sign-flipped
    coefficients fail the necessary condition and return False immediately;
    a vanishing pivot in the table is treated as not-Hurwitz.
    """
    c = np.asarray(_trim(den), dtype=float)
    if c[0] < 0:
        c = -c
    n = len(c) - 1
    if n == 0:
        return True
    if np.any(c <= 0.0):
        return False
    rows = [c[0::2].copy(), c[1::2].copy()]
    width = len(rows[0])
    rows[1] = np.pad(rows[1], (0, width - len(rows[1])))
    for _ in range(n - 1):
        top, bot = rows[-2], rows[-1]
        if bot[0] == 0.0:
            return False
        nxt = np.zeros(width)
        for j in range(width - 1):
            nxt[j] = (bot[0] * top[j + 1] - top[0] * bot[j + 1]) / bot[0]
        rows.append(nxt)
    return all(r[0] > 0.0 for r in rows)


def _companion_ss(p: RationalTF):
    """Controllable-canonical (A, B, C) for a strictly proper rational."""
    den = np.asarray(p.den, float)
    num = np.asarray(p.num, float) / den[0]
    den = den / den[0]
    n = len(den) - 1
    A = np.zeros((n, n))
    A[0, :] = -den[1:]
    if n > 1:
        A[1:, :-1] = np.eye(n - 1)
    B = np.zeros(n)
    B[0] = 1.0
    C = np.zeros(n)
    C[n - len(num):] = num
    return A, B, C


def h2_norm(p: RationalTF) -> float:
    """H2 norm by controllability-gramian solve of the Lyapunov equation."""
    if p.is_zero:
        return 0.0
    if not p.is_strictly_proper:
        raise DomainError("H2 norm needs a strictly proper system")
    if not is_hurwitz(p.den):
        raise DomainError("H2 norm needs a Hurwitz denominator")
    A, B, C = _companion_ss(p)
    W = scipy.linalg.solve_continuous_lyapunov(A, -np.outer(B, B))
    val = float(C @ W @ C)
    return math.sqrt(max(val, 0.0))


def h2_norm_quadrature(p: RationalTF) -> float:
    """H2 norm by adaptive quadrature of the squared magnitude response.

    Independent route used to cross-check :func:`h2_norm`; same domain
    restrictions.
    """
    if p.is_zero:
        return 0.0
    if not p.is_strictly_proper:
        raise DomainError("H2 norm needs a strictly proper system")
    if not is_hurwitz(p.den):
        raise DomainError("H2 norm needs a Hurwitz denominator")

    def integrand(w: float) -> float:
        h = p.eval_at(1j * w)
        return h.real**2 + h.imag**2

    scale = max(abs(r) for r in np.roots(p.den))
    cut = 10.0 * scale
    head, _ = scipy.integrate.quad(
        integrand, 0.0, cut, limit=400, points=[scale / 10.0, scale]
    )
    tail, _ = scipy.integrate.quad(integrand, cut, np.inf, limit=200)
    return math.sqrt((head + tail) / math.pi)
