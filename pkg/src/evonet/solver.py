"""Exact steady degree distribution for affine kernels.

The steady law ``P(k)`` solves the three-term balance

    b_k P(k) = a_k P(k-1) + c_k P(k+1) + d_k,           k >= 1
    (1 + B) P(0) = (Abar + Bbar) P(1) + d_0

with ``a_k = A(k-1) + B``, ``b_k = (A+Abar)k + 1 + B + Bbar`` and
``c_k = Abar(k+1) + Bbar``.  Above the support of the newborn law the
solution is the minimal (decaying) solution of the homogeneous recurrence,
written as ``P(k) = C g_k`` with ``g_k`` a singular integral.  ``P(0)``
comes from the generating-function boundary condition; the head
``P(1..M-1)`` and ``C`` then follow from a lower-banded linear system.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Real
from typing import Sequence

import numpy as np
from scipy import linalg, special

from .errors import (
    ConfigError,
    DenominatorVanishes,
    Divergent,
    DomainError,
    NoConvergence,
    NumericalError,
    RequiresLinearRoute,
    SeamMismatch,
    SingularSystem,
)
from .kernels import InitialDegreeLaw, KernelParams
from .quadrature import (
    IntegrandSpec,
    geometric_eps,
    integrate_singular,
    limit_ratio_eps_to_zero,
)

__all__ = [
    "Classification",
    "TailKernel",
    "P0Integrands",
    "HeadSystem",
    "DegreeDistribution",
    "classify",
    "closed_form_tail_integrand",
    "select_tail",
    "minimal_ratios",
    "p0_integrands",
    "solve_p0",
    "build_head_system",
    "solve_head_system",
    "determinant_solution",
    "solve_distribution",
    "tail_value",
    "tail_values",
    "asymptotic_prefactor",
    "normalization_check",
    "recurrence_residuals",
]

QUAD_TOL = 1e-13
QUAD_RTOL = 1e-12
SEAM_TOL = 1e-8
AUTO_SEAM_TOL = 1e-12
PIVOT_TOL = 1e-12


def _coeffs(params: KernelParams, k):
    A, B, Ab, Bb = params.as_floats()
    a = A * (k - 1) + B
    b = (A + Ab) * k + 1 + B + Bb
    c = Ab * (k + 1) + Bb
    return a, b, c


# ---------------------------------------------------------------------------
# classification


@dataclass(frozen=True)
class Classification:
    scale_free: bool
    gamma: Real | None = None

    @property
    def label(self) -> str:
        return "scale_free" if self.scale_free else "not_scale_free"

    def __str__(self):
        if self.scale_free:
            return f"scale_free(gamma={float(self.gamma):.12g})"
        return "not_scale_free"


def classify(params: KernelParams) -> Classification:
    """Scale-free with exponent ``1 + 1/(A - Abar)`` iff ``A > Abar``."""
    A, Ab = params.A, params.Abar
    if A > Ab:
        diff = A - Ab
        gamma = 1 + (Fraction(1) / diff if isinstance(diff, Fraction) else 1.0 / float(diff))
        return Classification(True, gamma)
    return Classification(False, None)


# ---------------------------------------------------------------------------
# tail kernels


def closed_form_tail_integrand(params: KernelParams, k: int) -> tuple[IntegrandSpec, str]:
    """The four-case tail integrand on (0, 1), exactly as in the closed form.

    Only the ``Abar_zero``, ``A_equals_Abar`` and ``general`` cases with
    ``A > Abar`` give the decaying solution; :func:`select_tail` handles the
    rest.
    """
    A, B, Ab, Bb = params.as_floats()
    if A == 0:
        spec = IntegrandSpec(
            alpha=k - 1 + (1 + Bb) / Ab, beta=-1 / Ab, exp_kind="inv_z", exp_coef=B / Ab
        )
        return spec, "A_zero"
    if Ab == 0:
        spec = IntegrandSpec(alpha=k - 1 + B / A, beta=1 / A, exp_kind="lin", exp_coef=-Bb / A)
        return spec, "Abar_zero"
    if A == Ab:
        spec = IntegrandSpec(
            alpha=k - 1 + B / A, beta=(Bb - B) / A, exp_kind="inv_zm1", exp_coef=1 / A
        )
        return spec, "A_equals_Abar"
    spec = IntegrandSpec(
        alpha=k - 1 + B / A,
        beta=1 / (A - Ab),
        delta=Bb / Ab - 1 / (A - Ab) - B / A,
        c=A / Ab,
    )
    return spec, "general"


def minimal_ratios(params: KernelParams, k_from: int, k_to: int, tol: float = 1e-15) -> np.ndarray:
    """Ratios ``P(k)/P(k-1)`` of the minimal solution for ``k_from <= k <= k_to``.

    Backward continued fraction ``rho_k = a_k / (b_k - c_k rho_{k+1})``
    started far beyond ``k_to`` and pushed further until ``rho_{k_from}``
    stops moving.
    """
    if k_from < 1 or k_to < k_from:
        raise ValueError("need 1 <= k_from <= k_to")
    A, B, Ab, Bb = params.as_floats()

    def sweep(start):
        ks = np.arange(k_from, start + 1)
        a = A * (ks - 1) + B
        b = (A + Ab) * ks + 1 + B + Bb
        c = Ab * (ks + 1) + Bb
        out = np.empty(len(ks))
        rho = 0.0
        for i in range(len(ks) - 1, -1, -1):
            rho = a[i] / (b[i] - c[i] * rho)
            out[i] = rho
        return out

    start = max(2 * k_to, k_to + 200)
    prev = sweep(start)
    for _ in range(12):
        start *= 2
        cur = sweep(start)
        n = k_to - k_from + 1
        if np.all(np.abs(cur[:n] - prev[:n]) <= tol * np.abs(cur[:n]) + 1e-300):
            return cur[:n]
        prev = cur
    raise NoConvergence("continued fraction for the tail ratios did not settle")


@dataclass(frozen=True)
class TailKernel:
    """Representation ``P(k) = C * g(k)`` for ``k >= M``.

    ``branch`` is one of the closed-form cases (``Abar_zero``,
    ``A_equals_Abar``, ``general``), ``general_contour`` (``A < Abar``: same
    integrand taken over ``(0, A/Abar)``) or ``recurrence`` (no convergent
    integral; ``g`` is the normalised minimal solution with ``g(M) = 1``).
    """

    params: KernelParams
    M: int
    branch: str
    hi: float = 1.0

    def spec(self, k: int) -> IntegrandSpec:
        if self.branch == "recurrence":
            raise ValueError("recurrence tail has no integrand")
        return closed_form_tail_integrand(self.params, k)[0]

    def g(self, k: int) -> float:
        if k < self.M:
            raise ValueError(f"tail is defined for k >= M = {self.M}")
        if self.branch == "recurrence":
            if k == self.M:
                return 1.0
            return float(np.prod(minimal_ratios(self.params, self.M + 1, k)))
        return integrate_singular(self.spec(k), 0.0, self.hi, tol=0.0, rtol=QUAD_RTOL).value

    def total(self) -> float:
        """``sum_{k >= M} g(k)``."""
        if self.branch == "recurrence":
            return 1.0 + _ratio_tail_sum(self.params, self.M)
        spec = self.spec(self.M)
        spec = IntegrandSpec(
            alpha=spec.alpha, beta=spec.beta - 1, delta=spec.delta, c=spec.c,
            exp_kind=spec.exp_kind, exp_coef=spec.exp_coef,
        )
        return integrate_singular(spec, 0.0, self.hi, tol=0.0, rtol=QUAD_RTOL).value


def _ratio_tail_sum(params: KernelParams, M: int, rel: float = 1e-17) -> float:
    """``sum_{k > M} prod_{j=M+1}^k rho_j`` for tails that decay at least geometrically."""
    total, term, k_to = 0.0, 1.0, M + 64
    k_from = M + 1
    while True:
        rhos = minimal_ratios(params, k_from, k_to)
        for r in rhos:
            term *= r
            total += term
        if term <= rel * max(total, 1.0) or term == 0.0:
            return total
        if k_to > 10**7:
            raise NoConvergence("tail sum does not converge geometrically")
        k_from, k_to = k_to + 1, 2 * k_to


def select_tail(params: KernelParams, M: int) -> TailKernel:
    A, B, Ab, Bb = params.as_floats()
    alpha_M = M - 1 + (B / A if A > 0 else 0.0)
    if A == 0 or alpha_M <= -1:
        return TailKernel(params, M, "recurrence")
    if A > Ab or A == Ab:
        branch = closed_form_tail_integrand(params, M)[1]
        return TailKernel(params, M, branch)
    # A < Abar: decaying solution lives on (0, A/Abar)
    delta = Bb / Ab - 1 / (A - Ab) - B / A
    if delta > -1:
        return TailKernel(params, M, "general_contour", hi=A / Ab)
    return TailKernel(params, M, "recurrence")


# ---------------------------------------------------------------------------
# P(0)


@dataclass(frozen=True)
class P0Integrands:
    """Weighted integrands ``b1*W`` and ``b2*W`` with ``W = exp(-int a)``.

    ``case`` is ``"one"`` (upper limit 1), ``"ratio"`` (upper limit
    ``Abar/A``) or ``"eps_squared"`` (range collapses to ``(eps, eps^2)``).
    """

    params: KernelParams
    law: InitialDegreeLaw
    case: str
    h: float | None
    weight: IntegrandSpec
    b1w: IntegrandSpec
    b2w: IntegrandSpec

    def a(self, z):
        A, B, Ab, Bb = self.params.as_floats()
        r = Ab / A
        return -(B * z * z - (1 + B + Bb) * z + Bb) / (A * z * (1 - z) * (r - z))

    def b1(self, z):
        A, _, Ab, _ = self.params.as_floats()
        return 1.0 / (A * z * (Ab / A - z))

    def b2(self, z):
        A, _, Ab, _ = self.params.as_floats()
        poly = sum(float(p) * z ** (k + 1) for k, p in self.law.probs.items())
        return -poly / (A * z * (1 - z) * (Ab / A - z))

    def upper(self, eps: float) -> float:
        return eps * eps if self.case == "eps_squared" else self.h

    def num(self, eps: float) -> float:
        """``-int_eps^h b2 W``."""
        return -_signed_integral(self.b2w, eps, self.upper(eps))

    def den(self, eps: float) -> float:
        """``W(eps) + Bbar int_eps^h b1 W``; the ratio num/den is the P(0) estimate."""
        Bb = float(self.params.Bbar)
        w = self.weight(eps)
        if Bb == 0:
            return w
        return w + Bb * _signed_integral(self.b1w, eps, self.upper(eps))


def _signed_integral(spec, lo, hi):
    if hi == lo:
        return 0.0
    if hi < lo:
        return -integrate_singular(spec, hi, lo, tol=QUAD_TOL, rtol=QUAD_RTOL).value
    return integrate_singular(spec, lo, hi, tol=QUAD_TOL, rtol=QUAD_RTOL).value


def p0_integrands(params: KernelParams, law: InitialDegreeLaw) -> P0Integrands:
    """Build ``W``, ``b1 W`` and ``b2 W`` in closed form (partial fractions of ``a``)."""
    A, B, Ab, Bb = params.as_floats()
    if A == 0:
        raise RequiresLinearRoute("A = 0: the P(0) integrals divide by A")
    dense = law.as_array()
    if A == Ab:
        alpha, beta = Bb / A, (B - Bb) / A
        kw = dict(exp_kind="inv_zm1", exp_coef=1 / A)
        weight = IntegrandSpec(alpha=alpha, beta=beta, **kw)
        b1w = IntegrandSpec(alpha=alpha - 1, beta=beta - 1, log_const=-math.log(A), **kw)
        b2w = IntegrandSpec(alpha=alpha, beta=beta - 2, poly=[-x / A for x in dense], **kw)
        return P0Integrands(params, law, "one", 1.0, weight, b1w, b2w)
    if Ab == 0:
        # exp(Bbar/(A z)) z^{(1+B)/A} (1-z)^{-1/A}; no finite upper limit
        alpha, beta = (1 + B) / A, -1 / A
        kw = dict(exp_kind="inv_z", exp_coef=Bb / A)
        weight = IntegrandSpec(alpha=alpha, beta=beta, **kw)
        b1w = IntegrandSpec(alpha=alpha - 2, beta=beta, log_const=-math.log(A), poly=[-1.0], **kw)
        b2w = IntegrandSpec(alpha=alpha - 1, beta=beta - 1, poly=[x / A for x in dense], **kw)
        return P0Integrands(params, law, "eps_squared", None, weight, b1w, b2w)
    r = Ab / A
    expo = B / A + 1 / (A - Ab) - Bb / Ab
    alpha, beta = Bb / Ab, -1 / (A - Ab)
    # |z - r|^E normalised to |1 - z/r|^E
    norm = -expo * math.log(r)
    weight = IntegrandSpec(alpha=alpha, beta=beta, delta=expo, c=r, log_const=norm)
    b1w = IntegrandSpec(
        alpha=alpha - 1, beta=beta, delta=expo - 1, c=r, log_const=norm - math.log(A)
    )
    b2w = IntegrandSpec(
        alpha=alpha, beta=beta - 1, delta=expo - 1, c=r, log_const=norm, poly=[-x / A for x in dense]
    )
    if A < Ab:
        case, h = "one", 1.0
    elif expo > 0:
        case, h = "ratio", r
    else:
        case, h = "eps_squared", None
    return P0Integrands(params, law, case, h, weight, b1w, b2w)


def solve_p0(
    params: KernelParams,
    law: InitialDegreeLaw,
    eps_sequence: Sequence[float] | None = None,
) -> float:
    """``P(0)`` as the ``eps -> 0`` limit of the ratio of weighted integrals.

    Raises :class:`RequiresLinearRoute` where the integral form does not pin
    ``P(0)``: ``A = 0``, ``Bbar < 0``, and the collapsing-range case unless
    ``Abar = Bbar = 0`` (where it reduces to ``d_0/(1+B)``).
    """
    A, B, Ab, Bb = params.as_floats()
    if A == 0:
        raise RequiresLinearRoute("A = 0: the P(0) integrals divide by A")
    if Bb < 0:
        raise RequiresLinearRoute("Bbar < 0: weight is not integrable at 0")
    ints = p0_integrands(params, law)
    if ints.case == "eps_squared":
        if Ab != 0 or Bb != 0:
            raise RequiresLinearRoute(
                "collapsing integration range is indeterminate unless Abar = Bbar = 0"
            )
        warnings.warn(
            "P(0) from the collapsing range (eps, eps^2); only the decoupled case is supported",
            RuntimeWarning,
            stacklevel=2,
        )
        # with no loss terms the k = 0 balance closes on its own
        return law.as_array()[0] / (1 + B)
    eps = list(geometric_eps() if eps_sequence is None else eps_sequence)
    try:
        res = limit_ratio_eps_to_zero(ints.num, ints.den, eps, rtol=1e-11, atol=1e-14)
    except DenominatorVanishes:
        raise
    value = res.value
    if not 0.0 < value < 1.0:
        raise NoConvergence(f"P(0) limit {value!r} is not a probability")
    return value


# ---------------------------------------------------------------------------
# head system


@dataclass(frozen=True)
class HeadSystem:
    """Lower-banded system for ``x = (P(0), ..., P(M-1), C)``.

    Row 0 pins ``P(0)``; row 1 is the ``k = 0`` balance; row ``k + 1`` is
    the ``k``-th balance divided by ``b_k``.  The last row carries
    ``e_M * g`` because ``P(M) = C g``.  Diagonals: ``lower2[i]`` sits at
    ``(i, i-2)``, ``lower1[i]`` at ``(i, i-1)``, ``diag[i]`` at ``(i, i)``.
    """

    M: int
    diag: np.ndarray
    lower1: np.ndarray
    lower2: np.ndarray
    rhs: np.ndarray
    e: np.ndarray  # e_1..e_M (e_M without the g factor)
    f: np.ndarray  # f_1..f_{M-1}
    g: float

    @property
    def size(self) -> int:
        return len(self.rhs)

    def dense(self) -> np.ndarray:
        n = self.size
        D = np.diag(self.diag)
        for i in range(1, n):
            D[i, i - 1] = self.lower1[i]
        for i in range(2, n):
            D[i, i - 2] = self.lower2[i]
        return D

    def banded(self) -> np.ndarray:
        """Storage for ``scipy.linalg.solve_banded((2, 0), ...)``."""
        n = self.size
        ab = np.zeros((3, n))
        ab[0] = self.diag
        ab[1, : n - 1] = self.lower1[1:]
        ab[2, : n - 2] = self.lower2[2:]
        return ab


def build_head_system(params: KernelParams, law: InitialDegreeLaw, p0: float, g: float) -> HeadSystem:
    if not 0.0 <= p0 <= 1.0:
        raise ConfigError("p0 must lie in [0, 1]")
    A, B, Ab, Bb = params.as_floats()
    M = law.M
    d = law.as_array()
    if M == 0:
        # P(0) = C g is the whole head
        one = np.array([g])
        zero = np.zeros(1)
        return HeadSystem(0, one, zero, zero, np.array([p0]), np.zeros(0), np.zeros(0), g)
    n = M + 1
    diag, lower1, lower2, rhs = np.zeros(n), np.zeros(n), np.zeros(n), np.zeros(n)
    e = np.array([-(i * Ab + Bb) / ((i - 1) * (A + Ab) + 1 + B + Bb) for i in range(1, M + 1)])
    # k = 0 row has no loss term at degree 0
    e[0] = -(Ab + Bb) / (1 + B)
    f = np.array([-((i - 1) * A + B) / (i * (A + Ab) + 1 + B + Bb) for i in range(1, M)])
    diag[0], rhs[0] = 1.0, p0
    lower1[1], diag[1], rhs[1] = 1.0, e[0], d[0] / (1 + B)
    for k in range(1, M):
        row = k + 1
        b = (A + Ab) * k + 1 + B + Bb
        lower2[row] = f[k - 1]
        lower1[row] = 1.0
        diag[row] = e[k]
        rhs[row] = d[k] / b
    diag[M] *= g
    return HeadSystem(M, diag, lower1, lower2, rhs, e, f, g)


def solve_head_system(system: HeadSystem) -> np.ndarray:
    """Banded solve plus one step of iterative refinement."""
    if np.any(system.diag == 0):
        raise SingularSystem("head system has a zero pivot (no downward moves)")
    ab = system.banded()
    try:
        x = linalg.solve_banded((2, 0), ab, system.rhs)
        resid = system.rhs - system.dense() @ x
        x = x + linalg.solve_banded((2, 0), ab, resid)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(str(exc)) from None
    if not np.all(np.isfinite(x)):
        raise SingularSystem("non-finite head solution")
    return x


def determinant_solution(system: HeadSystem) -> np.ndarray:
    """Cramer's rule: unknown ``j`` is ``det(D_j) / det(D)``.

    ``D`` is lower triangular, so ``det(D) = g * prod(e_i)``.
    """
    D = system.dense()
    det_d = system.g * float(np.prod(system.e)) if system.M > 0 else system.g
    out = np.empty(system.size)
    for j in range(system.size):
        Dj = D.copy()
        Dj[:, j] = system.rhs
        out[j] = np.linalg.det(Dj) / det_d
    return out


# ---------------------------------------------------------------------------
# distribution


@dataclass(frozen=True)
class DegreeDistribution:
    """Head ``P(0..M)``, tail constant ``C`` and tail kernel.

    ``P(k) = C * tail.g(k)`` for ``k >= M``; ``head[M]`` repeats ``P(M)``.
    """

    params: KernelParams
    law: InitialDegreeLaw
    head: tuple[float, ...]
    tail_constant: float
    tail_g: float
    tail: TailKernel = field(repr=False)
    classification: Classification
    asymptotic_prefactor: float | None
    p0_route: str

    @property
    def M(self) -> int:
        return self.law.M

    @property
    def tail_branch(self) -> str:
        return self.tail.branch

    @property
    def C(self) -> float:
        return self.tail_constant

    def pmf(self, k_max: int) -> np.ndarray:
        """``P(0..k_max)``."""
        M = self.M
        out = np.zeros(k_max + 1)
        n = min(k_max, M) + 1
        out[:n] = self.head[:n]
        if k_max > M:
            out[M:] = tail_values(self, k_max)
        return out


def _normalization_route(params, law, tail: TailKernel):
    """Head and ``C`` from the balances k < M plus total mass 1."""
    A, B, Ab, Bb = params.as_floats()
    M = law.M
    d = law.as_array()
    gM = tail.g(M)
    S = tail.total()
    n = M + 1
    mat = np.zeros((n, n))
    rhs = np.zeros(n)
    # unknowns: P(0..M-1), C
    def put(row, k, coef):
        if k < M:
            mat[row, k] += coef
        else:
            mat[row, M] += coef * (gM if k == M else tail.g(k))

    for k in range(M):
        if k == 0:
            put(0, 0, 1 + B)
            put(0, 1, -(Ab + Bb))
            rhs[0] = d[0]
        else:
            a, b, c = _coeffs(params, k)
            put(k, k - 1, -a)
            put(k, k, b)
            put(k, k + 1, -c)
            rhs[k] = d[k]
    mat[M, :M] = 1.0
    mat[M, M] = S
    rhs[M] = 1.0
    try:
        x = np.linalg.solve(mat, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(str(exc)) from None
    return x


def _seam_residual(params, law, head, C, tail: TailKernel) -> float:
    """Balance at k = M with P(M+1) taken from the tail."""
    M = law.M
    d = law.as_array()
    pM = head[M]
    if tail.branch == "recurrence":
        pM1 = pM * minimal_ratios(params, M + 1, M + 1)[0]
    else:
        pM1 = C * tail.g(M + 1)
    if M == 0:
        _, B, Ab, Bb = params.as_floats()
        return (pM - ((Ab + Bb) * pM1 + d[0]) / (1 + B))
    a, b, c = _coeffs(params, M)
    return pM - (a * head[M - 1] + c * pM1 + d[M]) / b


def solve_distribution(params: KernelParams, law: InitialDegreeLaw, route: str = "auto") -> DegreeDistribution:
    """Solve for the steady distribution.

    ``route="auto"`` uses the integral formula for ``P(0)`` with the banded
    head system wherever that formula applies, and otherwise closes the head
    with total mass 1.  ``"integral"`` and ``"normalization"`` force a route.
    """
    if route not in ("auto", "integral", "normalization"):
        raise ValueError("route must be 'auto', 'integral' or 'normalization'")
    M = law.M
    tail = select_tail(params, M)
    cls = classify(params)
    used = route
    x = None
    _, _, Ab, Bb = params.as_floats()
    # a vanishing (or underflowing) downward rate makes the pinned head singular
    zero_pivot = any(i * Ab + Bb <= PIVOT_TOL for i in range(1, M + 1))
    if route == "auto" and zero_pivot:
        route = "normalization"
    if route in ("auto", "integral") and tail.branch != "recurrence":
        try:
            p0 = solve_p0(params, law)
            system = build_head_system(params, law, p0, tail.g(M))
            x = solve_head_system(system)
            used = "integral"
        except (RequiresLinearRoute, SingularSystem, NumericalError):
            if route == "integral":
                raise
        if route == "auto" and x is not None:
            # the eps -> 0 extrapolation can lose digits near degenerate corners;
            # keep the pinned solution only if it closes the seam tightly
            C = float(x[-1])
            head = tuple(float(v) for v in x[:-1]) + (C * tail.g(M),)
            if abs(_seam_residual(params, law, head, C, tail)) > AUTO_SEAM_TOL:
                x = None
    elif route == "integral":
        raise RequiresLinearRoute(f"tail branch {tail.branch!r} has no integral constant")
    if x is None:
        x = _normalization_route(params, law, tail)
        used = "normalization"
    C = float(x[-1])
    gM = tail.g(M)
    head = tuple(float(v) for v in x[:-1]) + (C * gM,)
    if M == 0:
        head = (C * gM,)
    resid = _seam_residual(params, law, head, C, tail)
    if abs(resid) > SEAM_TOL:
        raise SeamMismatch(f"balance at k = M = {M} off by {resid:.3g}")
    if any(p < -1e-12 for p in head) or C < -1e-12:
        raise SeamMismatch("negative probabilities in the solved head")
    pref = None
    if cls.scale_free and tail.branch != "recurrence":
        try:
            pref = asymptotic_prefactor(params, C)
        except DomainError:
            pref = None
    return DegreeDistribution(
        params=params,
        law=law,
        head=head,
        tail_constant=C,
        tail_g=gM,
        tail=tail,
        classification=cls,
        asymptotic_prefactor=pref,
        p0_route=used,
    )


def tail_value(dist: DegreeDistribution, params: KernelParams, k: int) -> float:
    """``P(k)`` for ``k >= M`` from the tail kernel."""
    if k < dist.M:
        raise ValueError(f"tail starts at M = {dist.M}")
    if dist.tail_constant == 0:
        return 0.0
    if dist.tail.branch == "recurrence":
        return dist.tail_constant * dist.tail.g(k)
    tail = select_tail(params, dist.M) if params != dist.params else dist.tail
    return dist.tail_constant * tail.g(k)


def tail_values(dist: DegreeDistribution, k_max: int) -> np.ndarray:
    """``P(M..k_max)`` by stable ratio propagation from ``P(M)``."""
    M = dist.M
    pM = dist.head[M]
    if k_max == M:
        return np.array([pM])
    rhos = minimal_ratios(dist.params, M + 1, k_max)
    return pM * np.concatenate(([1.0], np.cumprod(rhos)))


def asymptotic_prefactor(params: KernelParams, C: float) -> float:
    """``lim k^gamma P(k)`` for ``A > Abar``."""
    A, B, Ab, Bb = params.as_floats()
    if not A > Ab:
        raise DomainError("asymptotic prefactor needs A > Abar")
    if C == 0:
        return 0.0
    if Ab == 0:
        log_pref = math.log(C) + math.lgamma(1 + 1 / A) - Bb / A
    else:
        inv = 1 / (A - Ab)
        expo = Bb / Ab - inv - B / A
        log_pref = math.log(C) + math.lgamma(1 + inv) + expo * math.log(A / Ab - 1)
    if log_pref > 709.0:
        raise DomainError("asymptotic prefactor exceeds double range")
    return math.exp(log_pref)


def normalization_check(dist: DegreeDistribution, params: KernelParams, K: int) -> float:
    """``sum_{k <= K} P(k)`` plus the tail remainder beyond ``K``."""
    M = dist.M
    if K < M:
        raise ValueError("K must be >= M")
    head = math.fsum(dist.head[:M])
    body = tail_values(dist, K)
    partial = head + math.fsum(body)
    if dist.classification.scale_free and dist.asymptotic_prefactor is not None:
        gamma = float(dist.classification.gamma)
        remainder = dist.asymptotic_prefactor * float(special.zeta(gamma, K + 1))
    else:
        # geometric or faster decay: keep summing the minimal solution
        remainder = body[-1] * _ratio_tail_sum(dist.params, K)
    return partial + remainder


def recurrence_residuals(dist: DegreeDistribution, k_max: int) -> np.ndarray:
    """Balance residuals ``P(k) - rhs_k`` for ``k = 0..k_max``."""
    p = dist.pmf(k_max + 1)
    A, B, Ab, Bb = dist.params.as_floats()
    d = dist.law.as_array()
    out = np.empty(k_max + 1)
    out[0] = p[0] - ((Ab + Bb) * p[1] + (d[0] if d else 0.0)) / (1 + B)
    for k in range(1, k_max + 1):
        a, b, c = _coeffs(dist.params, k)
        dk = d[k] if k < len(d) else 0.0
        out[k] = p[k] - (a * p[k - 1] + c * p[k + 1] + dk) / b
    return out
