"""Integrals with algebraic/exponential endpoint singularities on sub-intervals of [0, 1].

The integrands handled here have the shape::

    poly(z) * z**alpha * (1 - z)**beta * |z - c|**delta * exp(<one of four forms>)

Every singular point is known in closed form, so instead of letting an
adaptive rule discover the singularity we split the interval there and
substitute ``x = s +/- w**p`` with ``p = 1/(lambda + 1)``, which cancels the
``|x - s|**lambda`` factor against the Jacobian.  The smooth remainder goes to
QUADPACK (``scipy.integrate.quad``).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, special

from .errors import (
    DenominatorVanishes,
    Divergent,
    DomainError,
    NoConvergence,
    NotConverged,
)

__all__ = [
    "IntegrandSpec",
    "QuadratureResult",
    "LimitResult",
    "integrate_singular",
    "limit_ratio_eps_to_zero",
    "geometric_eps",
    "gamma_ratio_asymptotic",
    "log_gamma_ratio",
]

EXP_KINDS = ("none", "inv_z", "lin", "inv_zm1")


@dataclass(frozen=True)
class IntegrandSpec:
    """``exp(log_const) * poly(z) * z^alpha (1-z)^beta |z-c|^delta * E(z)``.

    ``exp_kind`` selects ``E``: ``"inv_z"`` is ``exp(exp_coef/z)``, ``"lin"`` is
    ``exp(exp_coef*z)``, ``"inv_zm1"`` is ``exp(exp_coef/(z-1))`` and ``"none"``
    is 1.  ``poly`` holds coefficients in increasing powers of ``z``.
    """

    alpha: float = 0.0
    beta: float = 0.0
    delta: float = 0.0
    c: float | None = None
    exp_kind: str = "none"
    exp_coef: float = 0.0
    poly: tuple[float, ...] = (1.0,)
    log_const: float = 0.0

    def __post_init__(self):
        if self.exp_kind not in EXP_KINDS:
            raise ValueError(f"exp_kind must be one of {EXP_KINDS}")
        for name in ("alpha", "beta", "delta", "exp_coef", "log_const"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        object.__setattr__(self, "poly", tuple(float(a) for a in self.poly))
        # fold a third singular point that coincides with 0 or 1
        if self.c is not None and self.delta != 0:
            if self.c == 0.0:
                object.__setattr__(self, "alpha", self.alpha + self.delta)
                object.__setattr__(self, "delta", 0.0)
            elif self.c == 1.0:
                object.__setattr__(self, "beta", self.beta + self.delta)
                object.__setattr__(self, "delta", 0.0)
        if self.delta == 0:
            object.__setattr__(self, "c", None)

    def log_abs(self, z, skip: str | None = None):
        """Log of the non-polynomial factors; ``skip`` omits one power factor."""
        z = np.asarray(z, dtype=float)
        out = np.full(z.shape, self.log_const)
        with np.errstate(divide="ignore", invalid="ignore"):
            if self.alpha and skip != "zero":
                out = out + self.alpha * np.log(z)
            if self.beta and skip != "one":
                out = out + self.beta * np.log1p(-z)
            if self.delta and skip != "c":
                out = out + self.delta * np.log(np.abs(z - self.c))
            if self.exp_kind == "inv_z":
                out = out + self.exp_coef / z
            elif self.exp_kind == "lin":
                out = out + self.exp_coef * z
            elif self.exp_kind == "inv_zm1":
                out = out + self.exp_coef / (z - 1.0)
        return out

    def poly_value(self, z):
        return np.polynomial.polynomial.polyval(z, self.poly)

    def __call__(self, z):
        """Plain pointwise evaluation (no singularity handling)."""
        val = self.poly_value(z) * np.exp(self.log_abs(z))
        return float(val) if np.ndim(val) == 0 else val


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    abs_error_estimate: float
    converged: bool
    evaluations: int


@dataclass(frozen=True)
class _Point:
    loc: float
    key: str  # which factor lives here: "zero", "one" or "c"
    exponent: float
    vanishing: bool  # an exponential factor drives the integrand to 0 here
    blowup: bool  # an exponential factor drives the integrand to infinity here

    @property
    def needs_anchor(self) -> bool:
        # exponents <= -1 only occur outside the interval (else Divergent)
        return not self.vanishing and -1.0 < self.exponent < 0.0


def _singular_points(spec: IntegrandSpec) -> list[_Point]:
    k, s = spec.exp_kind, spec.exp_coef
    pts = [
        _Point(0.0, "zero", spec.alpha, k == "inv_z" and s < 0, k == "inv_z" and s > 0),
        # z -> 1 from below: s/(z-1) -> -inf * sign(s)
        _Point(1.0, "one", spec.beta, k == "inv_zm1" and s > 0, k == "inv_zm1" and s < 0),
    ]
    if spec.c is not None:
        pts.append(_Point(float(spec.c), "c", spec.delta, False, False))
    return pts


def _check_integrable(points, lo, hi):
    for pt in points:
        if not lo <= pt.loc <= hi:
            continue
        if pt.blowup:
            raise Divergent(f"exponential blow-up at z={pt.loc}")
        if not pt.vanishing and pt.exponent <= -1:
            raise Divergent(f"non-integrable exponent {pt.exponent} at z={pt.loc}")


def _peak_breaks(spec: IntegrandSpec, lo, hi):
    """Breakpoints around the maximum of z^alpha (1-z)^beta when it is sharp."""
    a, b = max(spec.alpha, 0.0), max(spec.beta, 0.0)
    if a + b < 20:
        return []
    mode = a / (a + b)
    width = max(math.sqrt(a * b / (a + b) ** 3), 1.0 / (a + b))
    out = []
    for sign in (-1, 1):
        step = width
        while True:
            x = mode + sign * step
            if not lo < x < hi:
                break
            out.append(x)
            step *= 2
    if lo < mode < hi:
        out.append(mode)
    return out


def _near_breaks(points, lo, hi):
    """Geometric breakpoints toward a singular point just outside [lo, hi]."""
    out = []
    span = hi - lo
    for pt in points:
        if pt.vanishing or pt.exponent >= 0:
            continue
        if pt.loc > hi and pt.loc - hi < 0.1 * span:
            d = pt.loc - hi
            x = hi - d
            while x > lo + 0.25 * span:
                out.append(x)
                d *= 2
                x = hi - d
        elif pt.loc < lo and lo - pt.loc < 0.1 * span and pt.loc != 0.0:
            d = lo - pt.loc
            x = lo + d
            while x < hi - 0.25 * span:
                out.append(x)
                d *= 2
                x = lo + d
    return out


def _anchor(points, a, b, side):
    """Closest singular point at/beyond one end of [a, b] worth substituting."""
    best = None
    for pt in points:
        if not pt.needs_anchor:
            continue
        if side == "left" and pt.loc <= a and a - pt.loc <= b - a:
            if best is None or pt.loc > best.loc:
                best = pt
        if side == "right" and pt.loc >= b and pt.loc - b <= b - a:
            if best is None or pt.loc < best.loc:
                best = pt
    return best


def _pieces(points, lo, hi, extra):
    """Split [lo, hi] into (a, b, anchor, side) pieces with at most one anchor each."""
    cuts = {lo, hi}
    cuts.update(pt.loc for pt in points if lo < pt.loc < hi)
    cuts.update(x for x in extra if lo < x < hi)
    cuts = sorted(cuts)
    out = []
    for a, b in zip(cuts[:-1], cuts[1:]):
        if b <= a:
            continue
        left, right = _anchor(points, a, b, "left"), _anchor(points, a, b, "right")
        if left is not None and right is not None:
            mid = 0.5 * (a + b)
            out.append((a, mid, left, "left"))
            out.append((mid, b, right, "right"))
        elif left is not None:
            out.append((a, b, left, "left"))
        elif right is not None:
            out.append((a, b, right, "right"))
        else:
            out.append((a, b, None, None))
    return out


def _piece_integrand(spec: IntegrandSpec, a, b, anchor, side):
    """Return (f, w0, w1) with the piece integral equal to the integral of f over [w0, w1]."""
    if anchor is None:
        def log_f(w):
            return spec.log_abs(w)

        def poly(w):
            return spec.poly_value(w)

        return log_f, poly, a, b
    p = 1.0 / (anchor.exponent + 1.0)
    s = anchor.loc
    log_p = math.log(p)
    if side == "left":
        w0, w1 = (a - s) ** (1.0 / p), (b - s) ** (1.0 / p)

        def x_of(w):
            return s + np.power(w, p)
    else:
        w0, w1 = (s - b) ** (1.0 / p), (s - a) ** (1.0 / p)

        def x_of(w):
            return s - np.power(w, p)

    def log_f(w):
        return log_p + spec.log_abs(x_of(w), skip=anchor.key)

    def poly(w):
        return spec.poly_value(x_of(w))

    return log_f, poly, w0, w1


def integrate_singular(
    spec: IntegrandSpec,
    lo: float,
    hi: float,
    tol: float = 1e-12,
    rtol: float = 1e-11,
    limit: int = 400,
) -> QuadratureResult:
    """Integrate ``spec`` over ``(lo, hi)`` with ``0 <= lo < hi <= 1``.

    The reported tolerance is ``max(tol, rtol*|value|)``; ``converged`` means
    the summed QUADPACK error estimate is within it.  Raises
    :class:`Divergent` for non-integrable endpoint behaviour and
    :class:`NotConverged` when the subdivision budget is exhausted.
    """
    if not 0.0 <= lo < hi <= 1.0:
        raise DomainError(f"need 0 <= lo < hi <= 1, got ({lo}, {hi})")
    points = _singular_points(spec)
    _check_integrable(points, lo, hi)
    extra = _peak_breaks(spec, lo, hi) + _near_breaks(points, lo, hi)
    pieces = _pieces(points, lo, hi, extra)

    prepared = []
    for a, b, anchor, side in pieces:
        log_f, poly, w0, w1 = _piece_integrand(spec, a, b, anchor, side)
        if not w1 > w0:
            continue
        grid = np.linspace(w0, w1, 33)[1:-1]
        logs = log_f(grid)
        finite = logs[np.isfinite(logs)]
        shift = float(finite.max()) if finite.size else 0.0
        prepared.append((log_f, poly, w0, w1, shift))
    if not prepared:
        return QuadratureResult(0.0, 0.0, True, 0)

    top = max(item[4] for item in prepared)
    total, err, nev = 0.0, 0.0, 0
    n = len(prepared)
    for log_f, poly, w0, w1, shift in prepared:
        def f(w, log_f=log_f, poly=poly, shift=shift):
            lv = log_f(w) - shift
            if not np.isfinite(lv):
                return 0.0 if lv < 0 else math.inf
            return float(poly(w)) * math.exp(lv)

        # piece values are in units of exp(shift)
        epsabs = tol / n * math.exp(min(-shift, 700.0))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            val, e, info = integrate.quad(
                f, w0, w1, epsabs=epsabs, epsrel=rtol, limit=limit, full_output=1
            )[:3]
        if not math.isfinite(val):
            raise Divergent("integrand overflowed")
        scale = math.exp(shift - top)
        total += val * scale
        err += e * scale
        nev += info["neval"]
    try:
        factor = math.exp(top)
    except OverflowError:
        raise DomainError("integral magnitude exceeds double range") from None
    value, err = total * factor, err * factor
    target = max(tol, rtol * abs(value))
    if err > target:
        raise NotConverged(f"quadrature error {err:.3g} above tolerance {target:.3g}")
    return QuadratureResult(value=value, abs_error_estimate=err, converged=True, evaluations=nev)


@dataclass(frozen=True)
class LimitResult:
    value: float
    error_estimate: float
    terms: int


def geometric_eps(eps0: float = 1e-2, n: int = 16) -> list[float]:
    """``eps_j = eps0 * 2**-j`` for ``j = 0..n-1``."""
    return [eps0 * 2.0 ** (-j) for j in range(n)]


def _aitken(x0, x1, x2):
    d1, d2 = x1 - x0, x2 - x1
    denom = d2 - d1
    if denom == 0 or abs(denom) <= 1e-15 * (abs(d1) + abs(d2)):
        return x2
    return x2 - d2 * d2 / denom


def limit_ratio_eps_to_zero(
    num: Callable[[float], float],
    den: Callable[[float], float],
    eps_sequence: Sequence[float] | None = None,
    rtol: float = 1e-9,
    atol: float = 1e-12,
) -> LimitResult:
    """Extrapolate ``num(eps)/den(eps)`` to ``eps -> 0``.

    The ratios along a geometric ``eps`` sequence are accelerated with
    iterated Aitken differences, which removes error terms ``c*eps**p`` with
    unknown (possibly fractional) ``p``.  The two best extrapolants must agree
    within ``max(atol, rtol*|value|)``.
    """
    eps = list(geometric_eps() if eps_sequence is None else eps_sequence)
    if len(eps) < 3:
        raise ValueError("need at least three eps values")
    if any(e1 >= e0 for e0, e1 in zip(eps, eps[1:])):
        raise ValueError("eps sequence must be strictly decreasing")
    seq = []
    for e in eps:
        d = den(e)
        n = num(e)
        if not (math.isfinite(d) and math.isfinite(n)):
            raise NoConvergence(f"non-finite ratio terms at eps={e:g}")
        if abs(d) <= 1e-300 or abs(d) <= 1e-14 * abs(n):
            raise DenominatorVanishes(f"denominator {d:g} at eps={e:g}")
        seq.append(n / d)

    table = [seq]
    while len(table[-1]) >= 3 and len(table) < 6:
        prev = table[-1]
        table.append([_aitken(prev[j], prev[j + 1], prev[j + 2]) for j in range(len(prev) - 2)])
    # best column: the deepest with at least two entries
    best = table[-1] if len(table[-1]) >= 2 else table[-2]
    value = best[-1]
    error = abs(best[-1] - best[-2])
    # the un-accelerated tail must also be heading to the same place
    raw_gap = abs(seq[-1] - value)
    if raw_gap > 0.5 * max(abs(value), atol) and raw_gap > 10 * abs(seq[-2] - seq[-1]):
        raise NoConvergence("raw sequence is not approaching the extrapolated limit")
    if error > max(atol, rtol * abs(value)):
        raise NoConvergence(f"extrapolants disagree by {error:.3g} (value {value:.12g})")
    return LimitResult(value=value, error_estimate=error, terms=len(seq))


def log_gamma_ratio(x: float, a: float) -> float:
    """``log(Gamma(x + a) / Gamma(x))`` without cancellation for large ``x``."""
    if x <= 0 or x + a <= 0:
        raise DomainError("gamma arguments must be positive")
    if x < 50:
        return float(special.gammaln(x + a) - special.gammaln(x))
    # Stirling: (x+a-1/2)log(x+a) - (x-1/2)log(x) - a + series(x+a) - series(x)
    y = x + a
    head = (x - 0.5) * math.log1p(a / x) + a * math.log(y) - a
    # Bernoulli terms B_{2n} / (2n(2n-1) z^{2n-1})
    coeffs = (1 / 12, -1 / 360, 1 / 1260, -1 / 1680, 1 / 1188)
    series = 0.0
    for n, cf in enumerate(coeffs, start=1):
        series += cf * (y ** (1 - 2 * n) - x ** (1 - 2 * n))
    return head + series


def gamma_ratio_asymptotic(k: float, k0: float, gamma: float) -> float:
    """``k**gamma * Gamma(k + k0) / Gamma(k + k0 + gamma)``; tends to 1 as k grows."""
    if k < 1 or gamma < 0:
        raise DomainError("need k >= 1 and gamma >= 0")
    if k + k0 <= 0:
        raise DomainError("k + k0 must be positive")
    if gamma == 0:
        return 1.0
    return math.exp(gamma * math.log(k) - log_gamma_ratio(k + k0, gamma))
