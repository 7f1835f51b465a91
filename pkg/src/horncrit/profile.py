"""
Boundary profiles
=================

A profile ``H`` describes the domain ``{(x, z) : |z| < H(|x|)}``.  Every
profile carries ``H`` together with its first three derivatives, plus the
derived quantities ``L = log H`` and ``Q = H**2`` (and their derivatives)
that the Lyapunov construction is written in.

Built-in families
-----------------
``power``      H(s) = (1 + s)**gamma
``logpower``   H(s) = log(2 + s)**gamma
``constant``   H(s) = a
``custom``     user supplied callables for H, H', H'', H'''

All callables accept floats or numpy arrays.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .integrals import improper_integral

__all__ = [
    "ProfileH",
    "AssumptionReport",
    "ConditionResult",
    "make_profile",
    "parse_profile",
    "check_assumption_H",
    "check_derivatives",
]

FAMILIES = ("power", "logpower", "constant", "custom")


@dataclass(frozen=True)
class ProfileH:
    """Immutable boundary profile with derivatives up to third order."""

    family: str
    params: tuple
    H: Callable = field(repr=False, compare=False)
    dH: Callable = field(repr=False, compare=False)
    d2H: Callable = field(repr=False, compare=False)
    d3H: Callable = field(repr=False, compare=False)

    def __call__(self, s):
        return self.H(s)

    @property
    def gamma(self) -> float | None:
        if self.family in ("power", "logpower"):
            return self.params[0]
        return None

    def derivatives(self, s):
        """Return ``(H, H', H'', H''')`` evaluated at ``s``."""
        return self.H(s), self.dH(s), self.d2H(s), self.d3H(s)

    # L = log H
    def L1(self, s):
        h, h1 = self.H(s), self.dH(s)
        return h1 / h

    def L2(self, s):
        h, h1, h2 = self.H(s), self.dH(s), self.d2H(s)
        return h2 / h - (h1 / h) ** 2

    def L3(self, s):
        h, h1, h2, h3 = self.derivatives(s)
        return h3 / h - 3.0 * h1 * h2 / h**2 + 2.0 * (h1 / h) ** 3

    # Q = H**2
    def Q1(self, s):
        return 2.0 * self.H(s) * self.dH(s)

    def Q2(self, s):
        h, h1, h2 = self.H(s), self.dH(s), self.d2H(s)
        return 2.0 * h1**2 + 2.0 * h * h2

    def Q3(self, s):
        h, h1, h2, h3 = self.derivatives(s)
        return 6.0 * h1 * h2 + 2.0 * h * h3

    def describe(self) -> str:
        if self.family == "constant":
            return f"profile=constant a={self.params[0]!r}"
        if self.family in ("power", "logpower"):
            return f"profile={self.family} gamma={self.params[0]!r}"
        return "profile=custom"


def _power(gamma: float) -> ProfileH:
    g = float(gamma)

    def H(s):
        return (1.0 + np.asarray(s, dtype=float)) ** g

    def dH(s):
        return g * (1.0 + np.asarray(s, dtype=float)) ** (g - 1.0)

    def d2H(s):
        return g * (g - 1.0) * (1.0 + np.asarray(s, dtype=float)) ** (g - 2.0)

    def d3H(s):
        return g * (g - 1.0) * (g - 2.0) * (1.0 + np.asarray(s, dtype=float)) ** (g - 3.0)

    return ProfileH("power", (g,), H, dH, d2H, d3H)


def _logpower(gamma: float) -> ProfileH:
    g = float(gamma)

    def H(s):
        return np.log(2.0 + np.asarray(s, dtype=float)) ** g

    def dH(s):
        s = np.asarray(s, dtype=float)
        w = np.log(2.0 + s)
        return g * w ** (g - 1.0) / (2.0 + s)

    def d2H(s):
        s = np.asarray(s, dtype=float)
        w = np.log(2.0 + s)
        return (g * (g - 1.0) * w ** (g - 2.0) - g * w ** (g - 1.0)) / (2.0 + s) ** 2

    def d3H(s):
        s = np.asarray(s, dtype=float)
        w = np.log(2.0 + s)
        num = (g * (g - 1.0) * (g - 2.0) * w ** (g - 3.0)
               - 3.0 * g * (g - 1.0) * w ** (g - 2.0)
               + 2.0 * g * w ** (g - 1.0))
        return num / (2.0 + s) ** 3

    return ProfileH("logpower", (g,), H, dH, d2H, d3H)


def _constant(a: float) -> ProfileH:
    a = float(a)
    if not a > 0:
        raise ValueError(f"constant profile needs a > 0, got a={a}")

    def H(s):
        return np.full_like(np.asarray(s, dtype=float), a)[()]

    def zero(s):
        return np.zeros_like(np.asarray(s, dtype=float))[()]

    return ProfileH("constant", (a,), H, zero, zero, zero)


def make_profile(family: str, *, gamma: float | None = None, a: float | None = None,
                 H=None, dH=None, d2H=None, d3H=None) -> ProfileH:
    """Build a profile from a family descriptor.

    Parameters
    ----------
    family : {'power', 'logpower', 'constant', 'custom'}
    gamma : float
        Exponent for the ``power`` and ``logpower`` families.
    a : float
        Height of the ``constant`` family, must be positive.
    H, dH, d2H, d3H : callable
        Required (all four) for the ``custom`` family.

    Examples
    --------
    >>> float(make_profile('power', gamma=0.5)(1.0))
    1.4142135623730951
    """
    family = family.lower()
    if family == "power":
        if gamma is None:
            raise ValueError("power profile needs gamma")
        return _power(gamma)
    if family == "logpower":
        if gamma is None:
            raise ValueError("logpower profile needs gamma")
        return _logpower(gamma)
    if family == "constant":
        if a is None:
            raise ValueError("constant profile needs a")
        return _constant(a)
    if family == "custom":
        missing = [n for n, f in (("H", H), ("dH", dH), ("d2H", d2H), ("d3H", d3H)) if f is None]
        if missing:
            raise ValueError(f"custom profile missing callables: {', '.join(missing)}")
        return ProfileH("custom", (), H, dH, d2H, d3H)
    raise ValueError(f"unknown profile family {family!r}; expected one of {FAMILIES}")


def parse_profile(text: str) -> ProfileH:
    """Parse ``'profile=power gamma=0.5'`` style descriptors."""
    kv = {}
    for tok in text.split():
        key, sep, val = tok.partition("=")
        if not sep:
            raise ValueError(f"malformed profile token {tok!r}")
        kv[key.strip().lower()] = val.strip()
    fam = kv.pop("profile", None)
    if fam is None:
        raise ValueError("profile descriptor needs 'profile=<family>'")
    kwargs = {k: float(v) for k, v in kv.items() if k in ("gamma", "a")}
    unknown = set(kv) - {"gamma", "a"}
    if unknown:
        raise ValueError(f"unknown profile parameters: {sorted(unknown)}")
    return make_profile(fam, **kwargs)


def _ridders(f, x, h0, ntab=10, con=1.4):
    # Ridders' extrapolated central difference; returns (estimate, error)
    a = np.zeros((ntab, ntab))
    hh = h0
    a[0, 0] = (f(x + hh) - f(x - hh)) / (2.0 * hh)
    best, err = a[0, 0], np.inf
    for i in range(1, ntab):
        hh /= con
        a[0, i] = (f(x + hh) - f(x - hh)) / (2.0 * hh)
        fac = con * con
        for j in range(1, i + 1):
            a[j, i] = (a[j - 1, i] * fac - a[j - 1, i - 1]) / (fac - 1.0)
            fac *= con * con
            e = max(abs(a[j, i] - a[j - 1, i]), abs(a[j, i] - a[j - 1, i - 1]))
            if e <= err:
                err, best = e, a[j, i]
        if abs(a[i, i] - a[i - 1, i - 1]) >= 2.0 * err:
            break
    return best, err


def check_derivatives(p: ProfileH, points, rtol: float = 1e-6) -> float:
    """Largest scaled mismatch between supplied and finite-difference derivatives.

    Each derivative is compared with an extrapolated centred difference of the
    derivative one order below.  The mismatch is scaled by
    ``rtol * (|exact| + |lower| / (1 + s))`` so a return value ``<= 1`` means
    every check passed.
    """
    chain = [(p.H, p.dH), (p.dH, p.d2H), (p.d2H, p.d3H)]
    worst = 0.0
    for s in np.atleast_1d(points).astype(float):
        step = 0.1 * (1.0 + s)
        if s - step < 0:
            step = 0.5 * s if s > 0 else 0.0
        for lower, exact in chain:
            ex = float(exact(s))
            if step == 0.0:
                # one-sided at s = 0
                fd = _ridders(lambda t: float(lower(t + 1e-3)), 0.0, 1e-3)[0]
                ex = float(exact(1e-3))
                scale = rtol * (abs(ex) + abs(float(lower(1e-3))))
            else:
                fd, _ = _ridders(lambda t: float(lower(t)), s, step)
                scale = rtol * (abs(ex) + abs(float(lower(s))) / (1.0 + s))
            if scale == 0.0:
                mismatch = 0.0 if fd == ex else np.inf
            else:
                mismatch = abs(fd - ex) / scale
            worst = max(worst, mismatch)
    return worst


@dataclass
class ConditionResult:
    name: str
    evidence: dict
    verdict: str  # 'pass' | 'fail' | 'inconclusive'


@dataclass
class AssumptionReport:
    conditions: list

    @property
    def verdict(self) -> str:
        verdicts = [c.verdict for c in self.conditions]
        if all(v == "pass" for v in verdicts):
            return "pass"
        if any(v == "fail" for v in verdicts):
            return "fail"
        return "inconclusive"

    def __getitem__(self, name) -> ConditionResult:
        for c in self.conditions:
            if c.name == name:
                return c
        raise KeyError(name)


def _limit_zero(values, tol, n_tail=4):
    """Decide ``lim value = 0`` from samples at geometrically growing s."""
    v = np.abs(np.asarray(values, dtype=float))
    tail = v[-n_tail:]
    if np.all(tail == 0.0):
        return "pass"
    decreasing = np.all(np.diff(tail) < 0)
    if decreasing and tail[-1] < tol:
        return "pass"
    non_decreasing = np.all(np.diff(tail) >= -1e-12 * tail[:-1])
    if non_decreasing and tail[-1] >= tol:
        return "fail"
    return "inconclusive"


def check_assumption_H(p: ProfileH, s_max: float = 1e6, tol: float = 1e-3) -> AssumptionReport:
    """Numerically certify the five regularity/decay conditions on ``H``.

    The three limit conditions are sampled at dyadic ``s`` up to ``s_max``;
    the two integral conditions go through :func:`improper_integral`.
    Never raises on slow decay; such conditions come back ``inconclusive``.
    """
    if s_max < 1e4:
        raise ValueError("s_max must be at least 1e4")
    if tol <= 0:
        raise ValueError("tol must be positive")
    k_max = int(np.floor(np.log2(s_max)))
    s = 2.0 ** np.arange(1, k_max + 1)
    h, h1, h2, _ = (np.asarray(v, dtype=float) for v in p.derivatives(s))

    conds = []
    for name, vals in (("lim H*H'' = 0", h * h2),
                       ("lim H' = 0", h1),
                       ("H*H' = o(s)", h * h1 / s)):
        conds.append(ConditionResult(name, {"s": s[-6:].tolist(), "values": vals[-6:].tolist()},
                                     _limit_zero(vals, tol)))

    integrands = (
        ("int |H'|^3/H < inf", lambda t: np.abs(p.dH(t)) ** 3 / p.H(t)),
        ("int H'^2/s < inf", lambda t: p.dH(t) ** 2 / t),
    )
    for name, g in integrands:
        res = improper_integral(g, 1.0, k_max)
        verdict = {"convergent": "pass", "divergent": "fail"}.get(res.status, "inconclusive")
        conds.append(ConditionResult(name, {"result": res}, verdict))
    return AssumptionReport(conds)
