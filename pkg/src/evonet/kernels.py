"""Degree-transition kernels, their affine limits and the three model presets.

A node of degree ``k`` at time ``t`` gains an edge with probability
``f_t^+(k)`` and loses one with probability ``f_t^-(k)``.  Only the limits
``F^+(k) = lim t f_t^+(k) = A k + B`` and ``F^-(k) = lim t f_t^-(k) = Abar k + Bbar``
enter the steady-state solution; :class:`KernelParams` holds those four
constants.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational, Real
from typing import Mapping

from .errors import ConfigError, RateOverflow

__all__ = [
    "KernelParams",
    "InitialDegreeLaw",
    "TransitionRates",
    "ModelPreset",
    "VARIANTS",
    "eval_limit_kernels",
    "transition_rates",
    "preset_to_kernels",
    "preset_rates",
]

VARIANTS = ("BA_with_deletion", "group_pref_with_deletion", "add_rewire")

# short names accepted on the command line and in JSON configs
VARIANT_ALIASES = {
    "ba-del": "BA_with_deletion",
    "ba_del": "BA_with_deletion",
    "model1": "BA_with_deletion",
    "1": "BA_with_deletion",
    "group-del": "group_pref_with_deletion",
    "group_del": "group_pref_with_deletion",
    "model2": "group_pref_with_deletion",
    "2": "group_pref_with_deletion",
    "add-rewire": "add_rewire",
    "add_rewire_model": "add_rewire",
    "model3": "add_rewire",
    "3": "add_rewire",
}


def _exact(x):
    """Keep integers and fractions exact; decimal floats become their decimal fraction."""
    if isinstance(x, bool):
        raise ConfigError("boolean is not a number")
    if isinstance(x, Rational):
        return Fraction(x)
    if isinstance(x, float):
        if not math.isfinite(x):
            raise ConfigError(f"non-finite value {x!r}")
        return Fraction(repr(x))
    if isinstance(x, str):
        return Fraction(x)
    raise ConfigError(f"not a real number: {x!r}")


def _check_real(name, x):
    if isinstance(x, bool) or not isinstance(x, Real):
        raise ConfigError(f"{name} must be a real number, got {x!r}")
    if not math.isfinite(float(x)):
        raise ConfigError(f"{name} must be finite, got {x!r}")


@dataclass(frozen=True)
class KernelParams:
    """Affine limit kernels ``F+(k) = A k + B`` and ``F-(k) = Abar k + Bbar``.

    ``Bbar`` may be negative as long as ``F-(1) = Abar + Bbar >= 0``; ``F-(0)``
    is always 0 regardless of ``Bbar``.
    """

    A: Real
    B: Real
    Abar: Real
    Bbar: Real = 0

    def __post_init__(self):
        for name in ("A", "B", "Abar", "Bbar"):
            _check_real(name, getattr(self, name))
        if self.A < 0 or self.Abar < 0:
            raise ConfigError("A and Abar must be non-negative")
        if self.A == 0 and self.Abar == 0:
            raise ConfigError("A and Abar cannot both be zero")
        if self.B < 0:
            raise ConfigError("B must be non-negative")
        if self.Abar + self.Bbar < 0:
            raise ConfigError("Abar + Bbar must be non-negative (F-(1) >= 0)")

    def as_floats(self) -> tuple[float, float, float, float]:
        return float(self.A), float(self.B), float(self.Abar), float(self.Bbar)

    def f_plus(self, k):
        return self.A * k + self.B

    def f_minus(self, k):
        if k == 0:
            return 0 * self.Abar
        return self.Abar * k + self.Bbar

    def to_dict(self) -> dict:
        return {"A": float(self.A), "B": float(self.B), "Abar": float(self.Abar), "Bbar": float(self.Bbar)}

    @classmethod
    def from_dict(cls, data: Mapping) -> "KernelParams":
        try:
            return cls(A=data["A"], B=data.get("B", 0), Abar=data["Abar"], Bbar=data.get("Bbar", 0))
        except KeyError as exc:
            raise ConfigError(f"kernel parameters missing {exc.args[0]!r}") from None


@dataclass(frozen=True)
class InitialDegreeLaw:
    """Degree law of a newborn node, supported on ``[support_min, support_max]``."""

    probs: Mapping[int, Real]
    support_min: int = field(init=False)
    support_max: int = field(init=False)

    def __post_init__(self):
        cleaned = {}
        for k, p in dict(self.probs).items():
            k = int(k)
            _check_real(f"d[{k}]", p)
            if k < 0:
                raise ConfigError(f"negative degree {k} in initial law")
            if p < 0:
                raise ConfigError(f"negative probability d[{k}] = {p}")
            if p > 0:
                cleaned[k] = p
        if not cleaned:
            raise ConfigError("initial degree law has no mass")
        total = math.fsum(float(p) for p in cleaned.values())
        if abs(total - 1.0) > 1e-12:
            raise ConfigError(f"initial degree law sums to {total!r}, not 1")
        cleaned = dict(sorted(cleaned.items()))
        object.__setattr__(self, "probs", cleaned)
        object.__setattr__(self, "support_min", min(cleaned))
        object.__setattr__(self, "support_max", max(cleaned))

    @property
    def m(self) -> int:
        return self.support_min

    @property
    def M(self) -> int:
        return self.support_max

    def __getitem__(self, k: int):
        return self.probs.get(k, 0)

    def as_array(self):
        """Dense float list ``[d_0, ..., d_M]``."""
        return [float(self.probs.get(k, 0)) for k in range(self.M + 1)]

    @classmethod
    def point_mass(cls, k: int) -> "InitialDegreeLaw":
        return cls({k: 1})

    def to_dict(self) -> dict:
        return {"d": {str(k): float(p) for k, p in self.probs.items()}}

    @classmethod
    def from_dict(cls, data: Mapping) -> "InitialDegreeLaw":
        d = data.get("d", data)
        if not isinstance(d, Mapping):
            raise ConfigError("initial degree law must be a mapping k -> probability")
        try:
            return cls({int(k): v for k, v in d.items()})
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad initial degree law: {exc}") from None


@dataclass(frozen=True)
class TransitionRates:
    up: Real
    down: Real
    stay: Real


@dataclass(frozen=True)
class ModelPreset:
    """One of the three generative models with its concrete parameters.

    Variants 1 and 2 start from ``m0`` nodes of total degree ``N0``; variant 3
    starts from ``m0`` isolated nodes and uses ``p`` (add edges) and ``q``
    (rewire edges).  ``m0`` defaults to ``m + 1`` and ``N0`` to the degree sum
    of the complete graph on ``m0`` nodes.
    """

    variant: str
    m: int
    m0: int | None = None
    N0: int | None = None
    p: Real = 0
    q: Real = 0

    def __post_init__(self):
        variant = VARIANT_ALIASES.get(str(self.variant), self.variant)
        if variant not in VARIANTS:
            raise ConfigError(f"unknown model variant {self.variant!r}")
        object.__setattr__(self, "variant", variant)
        if isinstance(self.m, bool) or not isinstance(self.m, int):
            raise ConfigError("m must be an integer")
        if self.m <= 1:
            raise ConfigError("m must be > 1")
        m0 = self.m + 1 if self.m0 is None else self.m0
        if isinstance(m0, bool) or not isinstance(m0, int) or m0 < self.m:
            raise ConfigError("m0 must be an integer >= m")
        object.__setattr__(self, "m0", m0)
        if variant == "add_rewire":
            object.__setattr__(self, "N0", 0 if self.N0 is None else self.N0)
            for name in ("p", "q"):
                _check_real(name, getattr(self, name))
            if self.p < 0 or self.q < 0 or self.p + self.q >= 1:
                raise ConfigError("need p >= 0, q >= 0 and p + q < 1")
        else:
            n0 = m0 * (m0 - 1) if self.N0 is None else self.N0
            if isinstance(n0, bool) or not isinstance(n0, int) or n0 <= 0:
                raise ConfigError("N0 must be a positive integer")
            object.__setattr__(self, "N0", n0)

    @property
    def index(self) -> int:
        return VARIANTS.index(self.variant) + 1

    def to_dict(self) -> dict:
        out = {"variant": self.variant, "m": self.m, "m0": self.m0, "N0": self.N0}
        if self.variant == "add_rewire":
            out.update(p=float(self.p), q=float(self.q))
        return out

    @classmethod
    def from_dict(cls, data: Mapping) -> "ModelPreset":
        if "variant" not in data or "m" not in data:
            raise ConfigError("preset needs 'variant' and 'm'")
        return cls(
            variant=data["variant"],
            m=data["m"],
            m0=data.get("m0"),
            N0=data.get("N0"),
            p=data.get("p", 0),
            q=data.get("q", 0),
        )


def eval_limit_kernels(params: KernelParams, k: int):
    """Return ``(F+(k), F-(k))`` with ``F-(0) = 0``."""
    if k < 0:
        raise ConfigError("degree must be non-negative")
    return params.f_plus(k), params.f_minus(k)


def _rates(up, down, k, t):
    if up < 0 or down < 0:
        raise ConfigError(f"negative rate at k={k}, t={t}")
    if up + down > 1:
        raise RateOverflow(f"f+ + f- = {float(up + down):.6g} > 1 at k={k}, t={t}")
    return TransitionRates(up=up, down=down, stay=1 - up - down)


def transition_rates(params: KernelParams, k: int, t: int) -> TransitionRates:
    """First-order rates ``F+(k)/t`` and ``F-(k)/t``.

    Exact (``Fraction``) when the parameters are rational.
    """
    if t < 1:
        raise ConfigError("t must be >= 1")
    fp, fm = eval_limit_kernels(params, k)
    if isinstance(fp, Rational) and isinstance(fm, Rational):
        up, down = Fraction(fp) / t, Fraction(fm) / t
    else:
        up, down = float(fp) / t, float(fm) / t
    return _rates(up, down, k, t)


def preset_to_kernels(preset: ModelPreset) -> tuple[KernelParams, InitialDegreeLaw]:
    """Limit kernels and newborn degree law of a model preset."""
    m = preset.m
    if preset.variant == "BA_with_deletion":
        params = KernelParams(A=Fraction(m, 2 * (m - 1)), B=0, Abar=Fraction(1, m - 1), Bbar=0)
        return params, InitialDegreeLaw({m: 1})
    if preset.variant == "group_pref_with_deletion":
        params = KernelParams(A=Fraction(1, 2 * (m - 1)), B=m - 1, Abar=Fraction(1, m - 1), Bbar=0)
        return params, InitialDegreeLaw({m: 1})
    p, q = _exact(preset.p), _exact(preset.q)
    A = Fraction(m) / ((1 - q) * 2 * m + 1)
    params = KernelParams(A=A, B=A + p * m, Abar=0, Bbar=q * m)
    law = {m: 1 - p - q}
    if p + q > 0:
        law[0] = p + q
    return params, InitialDegreeLaw(law)


def preset_rates(preset: ModelPreset, k: int, t: int) -> TransitionRates:
    """Finite-time rates ``f_t^+(k)``, ``f_t^-(k)`` derived for each model.

    These are the mean-field step probabilities whose ``t``-scaled limits are
    the affine kernels returned by :func:`preset_to_kernels`.
    """
    if t < 2:
        raise ConfigError("finite-time rates need t >= 2")
    m = preset.m
    t = Fraction(t)
    if preset.variant == "BA_with_deletion":
        gain = Fraction(m * k) / (2 * (m - 1) * t)
        loss = Fraction(k) / ((m - 1) * t)
        up, down = gain * (1 - loss), loss * (1 - gain)
    elif preset.variant == "group_pref_with_deletion":
        gain = (t - m) / (t - 1) * Fraction(k) / (2 * (m - 1) * t) + Fraction(m - 1) / (t - 1)
        loss = Fraction(k) / ((m - 1) * t)
        up, down = gain * (1 - loss), loss * (1 - gain)
    else:
        p, q = _exact(preset.p), _exact(preset.q)
        denom = 1 + (1 - q) * 2 * m
        up = m * (k + 1) / (t * denom) + p * m / t + q * m * (k + 1) / (t * t * denom)
        down = q * m / t - q * m * (k + 1) / (t * t * denom) if k > 0 else Fraction(0)
    return _rates(up, down, k, int(t))
