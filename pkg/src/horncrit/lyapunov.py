"""
Level-set Lyapunov functions for reflected Brownian motion in ``{|z| < H(|x|)}``.

For a positive increasing ``f`` the function ``u(rho, r)`` is defined by::

    u(s + Q'(s)/4 - L'(s) r**2 / 2, r) = f(s),    0 <= r <= H(s)

with ``L = log H`` and ``Q = H**2``.  Its level sets are paraboloids that meet
the boundary ``r = H(rho)`` orthogonally, so ``grad u . n = 0`` there, and::

    1/2 Lap u = 1/2 A(r, s) f''(s) + 1/2 B(r, s) f'(s)

Choosing ``f' = exp(-int Gamma)`` with ``Gamma >= B/A`` (resp. ``<= B/A``)
gives ``Lap u <= 0`` (resp. ``>= 0``).  The envelopes ``Gamma+`` and ``Gamma-``
are assembled from r-independent terms, endpoint extrema of three ratio
functions and two remainder bounds with constants ``C0`` and ``C1``.

Notes
-----
``B`` is computed by solving the implicit-differentiation chain for
``u_rho, u_r, u_rhorho, u_rhor, u_rr`` and substituting into the radial
Laplacian; :func:`B_closed_form` keeps the closed form for comparison.  The
exact decomposition of ``B/A`` (:func:`ratio_terms`) has coefficient
``(4 - m)/4`` on the E-ratio and remainder
``-(l-1) G r^2 L'^2 / (1 + r^2 L'^2)``; :func:`ratio_variant` keeps the
``(5 - m)/2`` and ``-(l-1)/2 G r^2 L'^2`` variant, which is not an identity.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .classify import DomainSpec
from .integrals import tail_verdict

logger = logging.getLogger(__name__)

__all__ = [
    "AdmissibilityError",
    "CoefficientEval",
    "LyapunovFunction",
    "SignReport",
    "admissible_s0",
    "eval_ABC",
    "B_closed_form",
    "ratio_terms",
    "ratio_variant",
    "identity_check",
    "remainder_constants",
    "gamma_bounds",
    "build_f",
    "eval_u",
    "half_laplacian_fd",
    "level_shift",
    "u_increment",
    "verify_neumann",
    "verify_delta_u_sign",
    "verify_sandwich",
    "endpoint_extremum_violation",
    "antiderivative_check",
]

C_MIN = 0.5           # lower bound on C used to pick s0
INTC_MIN = 0.5        # lower bound on intC / s used to pick s0
DENOM_FLOOR = 0.1     # envelope denominators below this mean s0 is too small
SAFETY = 1.05         # factor on the empirical remainder constants

_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)


class AdmissibilityError(ValueError):
    """Raised when ``(r, s)`` lies outside the region where the construction is valid."""


@dataclass
class CoefficientEval:
    r: np.ndarray
    s: np.ndarray
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    intC: np.ndarray
    L1: np.ndarray
    L2: np.ndarray
    L3: np.ndarray
    Q1: np.ndarray
    Q2: np.ndarray
    Q3: np.ndarray

    @property
    def ratio(self):
        return self.B / self.A


def _derivs(p, s):
    s = np.asarray(s, dtype=float)
    return p.L1(s), p.L2(s), p.L3(s), p.Q1(s), p.Q2(s), p.Q3(s)


def _C(p, r, s):
    L1, L2, L3, Q1, Q2, Q3 = _derivs(p, s)
    return 1.0 + 0.25 * Q2 - 0.5 * r**2 * L2


def _intC(p, r, s):
    s = np.asarray(s, dtype=float)
    return s + 0.25 * p.Q1(s) - 0.5 * r**2 * p.L1(s)


def forward_map(p, s, r):
    """``rho`` on the level set through the boundary point at ``s``."""
    return _intC(p, r, s)


def _chain(dom: DomainSpec, r, s, f1, f2):
    """Half Laplacian of ``u`` from the implicit-differentiation chain."""
    l, m = dom.l, dom.m
    L1, L2, L3, Q1, Q2, Q3 = _derivs(dom.profile, s)
    r = np.asarray(r, dtype=float)
    C = 1.0 + 0.25 * Q2 - 0.5 * r**2 * L2
    Cs = 0.25 * Q3 - 0.5 * r**2 * L3
    rho = np.asarray(s, dtype=float) + 0.25 * Q1 - 0.5 * r**2 * L1

    u_p = f1 / C                                     # d/ds:  C u_rho = f'
    u_pp = (f2 - Cs * u_p) / C**2                    # d2/ds2: C^2 u_rhorho + Cs u_rho = f''
    u_r = r * L1 * u_p                               # d/dr:  -r L' u_rho + u_r = 0
    u_pr = r * L1 * u_pp + r * L2 * u_p / C          # d/ds of the previous line
    u_rr = L1 * u_p - r**2 * L1**2 * u_pp + 2.0 * r * L1 * u_pr   # d2/dr2
    with np.errstate(divide="ignore", invalid="ignore"):
        radial = np.where(r > 0, (m - 1) * u_r / np.where(r > 0, r, 1.0), (m - 1) * L1 * u_p)
    lap = u_pp + (l - 1) / rho * u_p + u_rr + radial
    return 0.5 * lap


def _coefficients(dom, r, s):
    r = np.asarray(r, dtype=float)
    s = np.asarray(s, dtype=float)
    A = 2.0 * _chain(dom, r, s, 0.0, 1.0)
    B = 2.0 * _chain(dom, r, s, 1.0, 0.0)
    L1, L2, L3, Q1, Q2, Q3 = _derivs(dom.profile, s)
    C = 1.0 + 0.25 * Q2 - 0.5 * r**2 * L2
    intC = s + 0.25 * Q1 - 0.5 * r**2 * L1
    return CoefficientEval(r, s, A, B, C, intC, L1, L2, L3, Q1, Q2, Q3)


def admissible_s0(dom: DomainSpec, s_max: float = 1e10) -> float:
    """Smallest ``s0`` on a ``2**(k/4)`` grid past which the construction is valid.

    Valid means, for every ``r <= H(s)``: ``C >= 0.5``, ``intC >= 0.5 s``
    (both are affine in ``r**2``, so the endpoints suffice) and hence a
    strictly increasing forward map.
    """
    s = 2.0 ** (np.arange(0, int(4 * np.log2(s_max)) + 1) / 4.0)
    h = dom.profile(s)
    ok = np.ones_like(s, dtype=bool)
    for r in (np.zeros_like(s), h):
        ok &= _C(dom.profile, r, s) >= C_MIN
        ok &= _intC(dom.profile, r, s) >= INTC_MIN * s
    ok &= np.isfinite(h) & (h > 0)
    bad = np.nonzero(~ok)[0]
    if len(bad) == 0:
        return float(s[0])
    if bad[-1] == len(s) - 1:
        raise AdmissibilityError("no admissible s0 below s_max; the level-set map is not monotone")
    return float(s[bad[-1] + 1])


def eval_ABC(dom: DomainSpec, r: float, s: float, s0: float | None = None) -> CoefficientEval:
    """Coefficients of ``1/2 Lap u = 1/2 A f'' + 1/2 B f'`` at ``(r, s)``."""
    thr = admissible_s0(dom) if s0 is None else s0
    if s < thr:
        raise AdmissibilityError(f"s={s} is below the admissibility threshold s0={thr}")
    h = float(dom.profile(s))
    if r < 0 or r > h * (1 + 1e-14):
        raise AdmissibilityError(f"r={r} outside [0, H(s)] = [0, {h}]")
    return _coefficients(dom, r, s)


def B_closed_form(dom: DomainSpec, r, s):
    """Closed form ``m L'/C + (l-1)/(C intC) + 2 r^2 L' L''/C^2 - (1 + r^2 L'^2) C_s / C^3``."""
    L1, L2, L3, Q1, Q2, Q3 = _derivs(dom.profile, s)
    r = np.asarray(r, dtype=float)
    C = 1.0 + 0.25 * Q2 - 0.5 * r**2 * L2
    Cs = 0.25 * Q3 - 0.5 * r**2 * L3
    intC = np.asarray(s, dtype=float) + 0.25 * Q1 - 0.5 * r**2 * L1
    return (dom.m * L1 / C + (dom.l - 1) / (C * intC) + 2 * r**2 * L1 * L2 / C**2
            - (1 + r**2 * L1**2) * Cs / C**3)


def _ratio_pieces(dom, r, s):
    L1, L2, L3, Q1, Q2, Q3 = _derivs(dom.profile, s)
    r = np.asarray(r, dtype=float)
    s = np.asarray(s, dtype=float)
    w = r**2 * L1**2
    C = 1.0 + 0.25 * Q2 - 0.5 * r**2 * L2
    intC = s + 0.25 * Q1 - 0.5 * r**2 * L1
    E = 2.0 * r**2 * L1 * L2 / (1.0 + w)
    F = -(0.25 * Q3 - 0.5 * r**2 * L3) / C
    G = C / intC
    base = dom.m * L1 + 0.25 * dom.m * L1 * Q2
    T4 = -dom.m * L1 * w * (1.0 + 0.25 * Q2) / (1.0 + w)
    return dict(base=base, E=E, F=F, G=G, T4=T4, w=w, C=C, intC=intC)


def ratio_terms(dom: DomainSpec, r, s) -> dict:
    """Exact seven-term decomposition of ``B/A``; the terms sum to ``B/A``."""
    p = _ratio_pieces(dom, r, s)
    l, m = dom.l, dom.m
    return {
        "mL'": dom.m * dom.profile.L1(s) + 0 * p["E"],
        "(l-1)G": (l - 1) * p["G"],
        "mL'Q''/4": p["base"] - m * dom.profile.L1(s),
        "T4": p["T4"],
        "E": (4.0 - m) / 4.0 * p["E"],
        "F": p["F"],
        "T7": -(l - 1) * p["G"] * p["w"] / (1.0 + p["w"]),
    }


def ratio_variant(dom: DomainSpec, r, s):
    """``B/A`` as the seven-term expression with coefficients ``(5-m)/2`` and ``(l-1)/2``."""
    p = _ratio_pieces(dom, r, s)
    l, m = dom.l, dom.m
    return (p["base"] + (l - 1) * p["G"] + p["T4"] + (5.0 - m) / 2.0 * p["E"] + p["F"]
            - (l - 1) / 2.0 * p["w"] * p["G"])


def identity_check(dom: DomainSpec, n_points: int = 1000, seed: int = 0,
                   s0: float | None = None, s_max: float = 1e10) -> dict:
    """Largest relative mismatch of the ``B/A`` expressions at random admissible points.

    Points have ``log s`` uniform on ``[log s0, log s_max]`` and ``r/H(s)``
    uniform on ``[0, 1]``.  Keys: ``'terms'`` (sum of :func:`ratio_terms`),
    ``'variant'`` (:func:`ratio_variant`) and ``'B_closed'`` (closed-form
    ``B``), each against the chain-rule value.
    """
    base = admissible_s0(dom, s_max) if s0 is None else s0
    rng = np.random.default_rng(seed)
    s = np.exp(rng.uniform(np.log(base), np.log(s_max), n_points))
    r = rng.uniform(0.0, 1.0, n_points) * dom.profile(s)
    co = _coefficients(dom, r, s)
    exact = co.B / co.A
    scale = np.abs(exact) + np.abs(dom.m * dom.profile.L1(s)) + 1e-300
    terms = sum(ratio_terms(dom, r, s).values())
    return {
        "terms": float(np.max(np.abs(terms - exact) / scale)),
        "variant": float(np.max(np.abs(ratio_variant(dom, r, s) - exact) / scale)),
        "B_closed": float(np.max(np.abs(B_closed_form(dom, r, s) - co.B)
                                  / (np.abs(co.B) + np.abs(co.A * dom.m * dom.profile.L1(s))
                                     + 1e-300))),
    }


def _remainder_scales(dom, s):
    h1 = np.abs(dom.profile.dH(s))
    return h1**3 / dom.profile(s), h1**2 / s


def remainder_constants(dom: DomainSpec, s0: float, s_max: float, n_s: int = 400,
                        n_r: int = 13) -> tuple[float, float]:
    """Empirical ``(C0, C1)``: suprema of the two remainder ratios, times 1.05.

    ``C0`` bounds ``|T4| / (|H'|^3 / H)`` and ``C1`` bounds
    ``|T7| / (H'^2 / s)`` over ``s in [s0, s_max]`` and an r-grid that
    includes both endpoints.
    """
    s = np.geomspace(s0, s_max, n_s)
    frac = np.linspace(0.0, 1.0, n_r)
    S, Fr = np.meshgrid(s, frac, indexing="ij")
    R = Fr * dom.profile(S)
    terms = ratio_terms(dom, R, S)
    sc0, sc1 = _remainder_scales(dom, S)
    with np.errstate(divide="ignore", invalid="ignore"):
        q0 = np.where(sc0 > 0, np.abs(terms["T4"]) / sc0, 0.0)
        q1 = np.where(sc1 > 0, np.abs(terms["T7"]) / sc1, 0.0)
    return SAFETY * float(np.max(q0)), SAFETY * float(np.max(q1))


def _envelope(values, sign):
    return np.maximum(*values) if sign > 0 else np.minimum(*values)


def _gamma(dom, s, C0, C1, sign, check_endpoints=False):
    s = np.asarray(s, dtype=float)
    h = dom.profile(s)
    ends = [_ratio_pieces(dom, np.zeros_like(s), s), _ratio_pieces(dom, h, s)]
    for e in ends:
        if np.any(e["C"] < DENOM_FLOOR) or np.any(e["intC"] < DENOM_FLOOR):
            raise AdmissibilityError("envelope denominator below 0.1; s0 is too small")
    kappa = (4.0 - dom.m) / 4.0
    E = _envelope([kappa * e["E"] for e in ends], sign)
    F = _envelope([e["F"] for e in ends], sign)
    G = _envelope([(dom.l - 1) * e["G"] for e in ends], sign)
    sc0, sc1 = _remainder_scales(dom, s)
    gam = ends[0]["base"] + E + F + G + sign * (C0 * sc0 + C1 * sc1)
    if check_endpoints:
        viol = endpoint_extremum_violation(dom, np.atleast_1d(s))
        if viol > 0:
            logger.warning("interior r exceeds endpoint envelope by %.3g", viol)
    return gam


def gamma_bounds(dom: DomainSpec, s, C0: float | None = None, C1: float | None = None,
                 s0: float | None = None, s_max: float = 1e10, check_endpoints: bool = True):
    """Envelopes ``(Gamma+, Gamma-)`` with ``Gamma- <= B/A <= Gamma+`` for ``r <= H(s)``.

    When ``C0``/``C1`` are not given they come from :func:`remainder_constants`
    over ``[s0, s_max]`` (``s0`` defaulting to :func:`admissible_s0`).
    """
    if C0 is None or C1 is None:
        base = admissible_s0(dom, s_max) if s0 is None else s0
        c0, c1 = remainder_constants(dom, base, s_max)
        C0 = c0 if C0 is None else C0
        C1 = c1 if C1 is None else C1
    return (_gamma(dom, s, C0, C1, +1, check_endpoints),
            _gamma(dom, s, C0, C1, -1, check_endpoints))


def endpoint_extremum_violation(dom: DomainSpec, s, n_interior: int = 11, tol: float = 1e-12):
    """How far interior r-values of the E, F, G ratios escape the endpoint range.

    Returns the largest excess beyond ``tol * (1 + |value|)``; 0 when the
    endpoint extremum property holds.
    """
    s = np.atleast_1d(np.asarray(s, dtype=float))
    h = dom.profile(s)
    frac = np.linspace(0.0, 1.0, n_interior + 2)[1:-1]
    ends = [_ratio_pieces(dom, np.zeros_like(s), s), _ratio_pieces(dom, h, s)]
    worst = 0.0
    for key in ("E", "F", "G"):
        lo = np.minimum(ends[0][key], ends[1][key])
        hi = np.maximum(ends[0][key], ends[1][key])
        for fr in frac:
            v = _ratio_pieces(dom, fr * h, s)[key]
            slack = tol * (1.0 + np.abs(v))
            excess = np.maximum(v - hi - slack, lo - v - slack)
            worst = max(worst, float(np.max(np.maximum(excess, 0.0))))
    return worst


@dataclass
class LyapunovFunction:
    """Tabulated ``f`` with ``f' = exp(-int_{s0}^{s} Gamma)`` and ``f(s0) = 0``.

    Values between grid nodes come from 8-point Gauss-Legendre quadrature
    anchored at the node to the left, so ``f`` is monotone and twice
    continuously differentiable to rounding error.
    """

    dom: DomainSpec
    sign: str
    s0: float
    s_max: float
    C0: float
    C1: float
    s: np.ndarray = field(repr=False)
    gamma: np.ndarray = field(repr=False)
    int_gamma: np.ndarray = field(repr=False)
    fprime: np.ndarray = field(repr=False)
    f: np.ndarray = field(repr=False)
    growth: str = ""
    growth_reason: str = ""

    @property
    def sgn(self) -> int:
        return 1 if self.sign == "plus" else -1

    def Gamma(self, s):
        return _gamma(self.dom, s, self.C0, self.C1, self.sgn)

    def evaluate(self, s):
        """Return ``(f, f', f'')`` at ``s`` (scalar or array) inside ``[s0, s_max]``."""
        s = np.asarray(s, dtype=float)
        scalar = s.ndim == 0
        s = np.atleast_1d(s)
        if np.any(s < self.s0 * (1 - 1e-12)) or np.any(s > self.s_max * (1 + 1e-12)):
            raise AdmissibilityError(f"s outside tabulated range [{self.s0}, {self.s_max}]")
        i = np.clip(np.searchsorted(self.s, s, side="right") - 1, 0, len(self.s) - 2)
        a = self.s[i]
        f, phi_end = _local_integrals(self, a, s - a)
        fv = self.f[i] + self.fprime[i] * f
        fp = self.fprime[i] * phi_end
        fpp = -self.Gamma(s) * fp
        if scalar:
            return float(fv[0]), float(fp[0]), float(fpp[0])
        return fv, fp, fpp

    def table(self):
        """Rows ``(s, Gamma, f, f')`` on the tabulation grid."""
        return np.column_stack([self.s, self.gamma, self.f, self.fprime])


def _local_integrals(lyap, a, delta):
    """For each ``a`` and signed step ``delta``, with ``b = a + delta``:
    ``int_a^b exp(-int_a^t Gamma) dt`` and ``exp(-int_a^b Gamma)``.

    ``delta`` is kept separate from ``a`` so steps far below ``eps * a`` are
    still resolved.
    """
    a = np.asarray(a, dtype=float)[:, None]
    half = 0.5 * np.asarray(delta, dtype=float)[:, None]
    t = a + half * (_GL_X[None, :] + 1.0)                       # outer nodes (n, 8)
    th = 0.5 * half * (_GL_X[None, :] + 1.0)                    # half-lengths of [a, t]
    tau = a[:, :, None] + th[:, :, None] * (_GL_X[None, None, :] + 1.0)
    g_in = lyap.Gamma(tau.reshape(-1)).reshape(tau.shape)
    inner = th * np.einsum("ijk,k->ij", g_in, _GL_W)
    outer = half[:, 0] * np.einsum("ij,j->i", np.exp(-inner), _GL_W)
    g_end = lyap.Gamma(t.reshape(-1)).reshape(t.shape)
    total = half[:, 0] * np.einsum("ij,j->i", g_end, _GL_W)
    return outer, np.exp(-total)


def _tabulate(dom, sign, s0, s_max, C0, C1, per_decade):
    n = max(16, int(np.ceil(per_decade * np.log10(s_max / s0))))
    s = np.geomspace(s0, s_max, n + 1)
    stub = LyapunovFunction(dom, sign, s0, s_max, C0, C1, s, None, None, None, None)
    a, b = s[:-1], s[1:]
    seg_f, seg_phi = _local_integrals(stub, a, b - a)
    log_phi = np.concatenate([[0.0], np.cumsum(-np.log(seg_phi))])
    fprime = np.exp(-log_phi)
    f = np.concatenate([[0.0], np.cumsum(fprime[:-1] * seg_f)])
    stub.gamma = stub.Gamma(s)
    stub.int_gamma = log_phi
    stub.fprime = fprime
    stub.f = f
    return stub


def build_f(dom: DomainSpec, sign: str = "plus", s0: float | str = "auto",
            s_max: float = 1e10, rtol: float = 1e-6) -> LyapunovFunction:
    """Tabulate ``f+`` or ``f-`` on a geometric grid over ``[s0, s_max]``.

    The grid is refined by doubling until ``f(s_max)`` changes by less than
    ``rtol`` relative.  The growth diagnosis applies the dyadic-block detector
    of :mod:`horncrit.integrals` to the increments of ``f`` over the last six
    dyadic blocks below ``s_max``: ``'diverging'``, ``'bounded'`` or
    ``'inconclusive'``.
    """
    if sign not in ("plus", "minus"):
        raise ValueError("sign must be 'plus' or 'minus'")
    if s0 == "auto":
        s0 = admissible_s0(dom, s_max)
    s0 = float(s0)
    if s_max < 100 * s0:
        raise ValueError("s_max must be at least 100 * s0")
    C0, C1 = remainder_constants(dom, s0, s_max)

    per_decade = 16
    lyap = _tabulate(dom, sign, s0, s_max, C0, C1, per_decade)
    for _ in range(8):
        per_decade *= 2
        finer = _tabulate(dom, sign, s0, s_max, C0, C1, per_decade)
        done = abs(finer.f[-1] - lyap.f[-1]) <= rtol * abs(finer.f[-1])
        lyap = finer
        if done:
            break

    edges = s_max / 2.0 ** np.arange(6, -1, -1)
    fv = lyap.evaluate(edges)[0]
    status, *_, reason = tail_verdict(np.diff(fv), np.log2(edges[:-1]))
    lyap.growth = {"divergent": "diverging", "convergent": "bounded"}.get(status, "inconclusive")
    lyap.growth_reason = reason
    return lyap


def _invert_level(lyap, rho, r):
    """Solve ``forward_map(s, r) = rho`` for ``s``; vectorised bisection plus Newton polish."""
    p = lyap.dom.profile
    rho = np.asarray(rho, dtype=float)
    r = np.asarray(r, dtype=float)
    lo = np.full(np.broadcast(rho, r).shape, np.log(lyap.s0))
    hi = np.full_like(lo, np.log(lyap.s_max))
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        too_big = forward_map(p, np.exp(mid), r) > rho
        hi = np.where(too_big, mid, hi)
        lo = np.where(too_big, lo, mid)
    s = np.exp(0.5 * (lo + hi))
    for _ in range(2):
        s = s - (forward_map(p, s, r) - rho) / _C(p, r, s)
    return np.clip(s, lyap.s0, lyap.s_max)


def eval_u(lyap: LyapunovFunction, rho, r, strict: bool = True):
    """``u(rho, r) = f(s*)`` with ``s*`` the level through ``(rho, r)``.

    With ``strict`` the point must lie in the image of the level-set map,
    ``rho`` between the levels ``s0`` and ``s_max`` and ``r <= H(s*)``.
    """
    p = lyap.dom.profile
    rho_a = np.asarray(rho, dtype=float)
    r_a = np.asarray(r, dtype=float)
    lo = forward_map(p, lyap.s0, r_a)
    hi = forward_map(p, lyap.s_max, r_a)
    if strict and (np.any(rho_a < lo * (1 - 1e-13)) or np.any(rho_a > hi * (1 + 1e-13))):
        raise AdmissibilityError(f"rho outside the image of the level-set map "
                                 f"[{np.min(lo)}, {np.max(hi)}]")
    s = _invert_level(lyap, rho_a, r_a)
    if strict and np.any(r_a > p(s) * (1 + 1e-10)):
        raise AdmissibilityError("r exceeds H(s*): point lies outside the domain")
    val = lyap.evaluate(s)[0]
    return float(val) if np.ndim(val) == 0 else val


def level_s(lyap: LyapunovFunction, rho, r):
    """Level ``s*`` through ``(rho, r)``; clipped to the tabulated range."""
    return _invert_level(lyap, rho, r)


def _dQ1_dL1(p, s, delta):
    # Q'(s + delta) - Q'(s) and L'(s + delta) - L'(s) without cancellation
    small = np.abs(delta) < 1e-6 * s
    sd = s + np.where(small, 0.0, delta)
    dq = np.where(small, p.Q2(s) * delta + 0.5 * p.Q3(s) * delta**2, p.Q1(sd) - p.Q1(s))
    dl = np.where(small, p.L2(s) * delta + 0.5 * p.L3(s) * delta**2, p.L1(sd) - p.L1(s))
    return dq, dl


def level_shift(p, s, r0, drho, r):
    """Signed ``delta`` with ``forward_map(s + delta, r) = forward_map(s, r0) + drho``.

    Solved by Newton iteration on the difference of the two forward maps, so
    shifts far below ``eps * s`` are resolved.
    """
    s, r0, drho, r = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (s, r0, drho, r)))
    target = drho + 0.5 * (r**2 - r0**2) * p.L1(s)
    delta = target / _C(p, r, s)
    for _ in range(30):
        dq, dl = _dQ1_dL1(p, s, delta)
        resid = delta + 0.25 * dq - 0.5 * r**2 * dl - target
        step = resid / _C(p, r, s + delta)
        delta = delta - step
        if np.all(np.abs(step) <= 1e-15 * (np.abs(delta) + 1e-300)):
            break
    return delta


def u_increment(lyap: LyapunovFunction, s, r0, drho, r):
    """``u(rho0 + drho, r) - u(rho0, r0)`` where ``rho0 = forward_map(s, r0)``."""
    delta = level_shift(lyap.dom.profile, s, r0, drho, r)
    s_b = np.broadcast_to(np.asarray(s, dtype=float), delta.shape)
    _, fp, _ = lyap.evaluate(s_b.ravel())
    outer, _ = _local_integrals(lyap, s_b.ravel(), delta.ravel())
    return (np.asarray(fp) * outer).reshape(delta.shape)


# fourth-order central stencils
_D1 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
_D2 = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0


def half_laplacian_fd(lyap: LyapunovFunction, s: float, r: float, h_rho: float, h_r: float):
    """Finite-difference ``1/2 (u_rhorho + (l-1)/rho u_rho + u_rr + (m-1)/r u_r)``.

    The point is ``(forward_map(s, r), r)``.  Differences of ``u`` are taken
    from :func:`u_increment`, i.e. relative to the centre, which avoids the
    cancellation of subtracting nearby values of ``f``.
    """
    off = np.arange(-2, 3, dtype=float)
    rho = float(forward_map(lyap.dom.profile, s, r))
    u_rho = u_increment(lyap, s, r, off * h_rho, r)
    u_r = u_increment(lyap, s, r, 0.0, r + off * h_r)
    d1p = _D1 @ u_rho / h_rho
    d2p = _D2 @ u_rho / h_rho**2
    d1r = _D1 @ u_r / h_r
    d2r = _D2 @ u_r / h_r**2
    l, m = lyap.dom.l, lyap.dom.m
    return 0.5 * (d2p + (l - 1) / rho * d1p + d2r + (m - 1) / r * d1r)


def verify_neumann(lyap: LyapunovFunction, n_samples: int = 20) -> float:
    """Largest ``|grad u . n|`` over boundary points ``r = H(s)``.

    ``u_rho`` is a centred difference with step ``1e-5 s``; ``u_r`` a
    one-sided second-order difference into the domain.  The boundary level
    through ``(s, H(s))`` is ``s`` itself.
    """
    p = lyap.dom.profile
    s = np.geomspace(2 * lyap.s0, lyap.s_max / 2, n_samples)
    h = p(s)
    hp = p.dH(s)
    d = 1e-5 * s
    dr = np.minimum(d, 0.25 * h)
    up = u_increment(lyap, s, h, d, h) - u_increment(lyap, s, h, -d, h)
    u_rho = up / (2 * d)
    u1 = u_increment(lyap, s, h, 0.0, h - dr)
    u2 = u_increment(lyap, s, h, 0.0, h - 2 * dr)
    u_r = (-4 * u1 + u2) / (2 * dr)
    normal = (hp * u_rho - u_r) / np.sqrt(1.0 + hp * hp)
    return float(np.max(np.abs(normal)))


@dataclass
class SignReport:
    sign: str
    max_violation: float          # largest wrong-signed value of 1/2 Lap u on the grid
    fd_max_rel_error: float       # finite-difference cross-check, scaled by term size
    n_points: int
    fd_points: int


def verify_delta_u_sign(lyap: LyapunovFunction, s_grid=None, n_r: int = 11,
                        n_fd: int = 20, seed: int = 0) -> SignReport:
    """Check ``1/2 Lap u <= 0`` for ``f+`` (``>= 0`` for ``f-``) on an ``(s, r)`` mesh.

    The analytic value is ``1/2 f' (B - A Gamma)``.  At ``n_fd`` random mesh
    points it is compared with :func:`half_laplacian_fd`; the error is scaled
    by ``1/2 (|A f''| + |B f'|)``.
    """
    if s_grid is None:
        s_grid = np.geomspace(lyap.s0 * 1.01, lyap.s_max / 4, 60)
    s_grid = np.asarray(s_grid, dtype=float)
    frac = np.linspace(0.0, 1.0, n_r)
    S, Fr = np.meshgrid(s_grid, frac, indexing="ij")
    R = Fr * lyap.dom.profile(S)
    co = _coefficients(lyap.dom, R, S)
    _, fp, fpp = lyap.evaluate(S.ravel())
    fp = fp.reshape(S.shape)
    fpp = fpp.reshape(S.shape)
    half_lap = 0.5 * (co.A * fpp + co.B * fp)
    violation = float(np.max(lyap.sgn * half_lap))
    violation = max(violation, 0.0) + 0.0

    rng = np.random.default_rng(seed)
    worst = 0.0
    count = 0
    inner = (S > 3 * lyap.s0) & (S < lyap.s_max / 8) & (Fr >= 0.2) & (Fr <= 0.6)
    idx = np.argwhere(inner)
    if len(idx):
        pick = idx[rng.choice(len(idx), size=min(n_fd, len(idx)), replace=False)]
        for i, j in pick:
            s_, r_ = S[i, j], R[i, j]
            h = float(lyap.dom.profile(s_))
            fd = half_laplacian_fd(lyap, s_, r_, 0.02 * s_, 0.05 * h)
            scale = 0.5 * (abs(co.A[i, j] * fpp[i, j]) + abs(co.B[i, j] * fp[i, j]))
            # exactly harmonic cases (cylinder) have nothing to be relative to
            scale = max(scale, 1e-6 * abs(fp[i, j]) / s_)
            worst = max(worst, abs(fd - half_lap[i, j]) / scale)
            count += 1
    return SignReport(lyap.sign, violation, worst, S.size, count)


def verify_sandwich(dom: DomainSpec, s0: float, t_grid=None, s_max: float = 1e10,
                    factor: float = 10.0) -> dict:
    """Compare ``exp(-int_{s0}^t Gamma)`` with ``(t/s0)^(1-l) (H(t)/H(s0))^-m``.

    Returns, per sign, the empirical ``c(s0)`` (largest relative deviation
    over ``t_grid``) and ``c(factor * s0)``, plus whether ``c`` decreased.
    """
    out = {}
    for sign in ("plus", "minus"):
        cs = []
        for base in (s0, factor * s0):
            lyap = build_f(dom, sign, base, s_max)
            t = (np.geomspace(base, s_max, 200) if t_grid is None
                 else np.asarray([x for x in t_grid if base <= x <= s_max]))
            _, fp, _ = lyap.evaluate(t)
            h = dom.profile
            ref = (t / base) ** (1 - dom.l) * (h(t) / h(base)) ** (-dom.m)
            cs.append(float(np.max(np.abs(fp / ref - 1.0))))
        out[sign] = {"c": cs[0], "c_shifted": cs[1], "decreasing": cs[1] <= cs[0]}
    return out


def _ridders_derivative(fun, x, h0):
    from .profile import _ridders
    return _ridders(fun, x, h0)[0]


def antiderivative_check(dom: DomainSpec, s_grid) -> dict:
    """Differentiate the closed-form logarithms for the E, F, G integrals numerically.

    For each endpoint ``r in {0, H(s)}`` three variants are tested:

    ``frozen``     r held fixed while differentiating in t (exact)
    ``moving``     r = H(t) varies with t inside the logarithm
    ``squared``    the F logarithm with ``(L'')**2`` in place of ``L''``

    Returns the largest mismatch, scaled by ``1 + |integrand|``, per
    (variant, ratio) pair.
    """
    p = dom.profile
    L1, L2 = p.L1, p.L2

    def logs(t, r):
        return {
            "E": np.log(1.0 + r**2 * L1(t) ** 2),
            "F": -np.log(1.0 + 0.25 * p.Q2(t) - 0.5 * r**2 * L2(t)),
            "G": np.log(t + 0.25 * p.Q1(t) - 0.5 * r**2 * L1(t)),
        }

    def log_F_squared(t, r):
        return -np.log(1.0 + 0.25 * p.Q2(t) - 0.5 * r**2 * L2(t) ** 2)

    out = {}
    for s in np.atleast_1d(s_grid):
        s = float(s)
        step = 0.05 * s
        for end in ("0", "H"):
            r = 0.0 if end == "0" else float(p(s))
            pieces = _ratio_pieces(dom, np.asarray(r), np.asarray(s))
            target = {"E": float(pieces["E"]), "F": float(pieces["F"]), "G": float(pieces["G"])}
            for key in ("E", "F", "G"):
                frozen = _ridders_derivative(lambda t: float(logs(t, r)[key]), s, step)
                if end == "H":
                    moving = _ridders_derivative(lambda t: float(logs(t, float(p(t)))[key]), s, step)
                else:
                    moving = frozen
                for variant, val in (("frozen", frozen), ("moving", moving)):
                    err = abs(val - target[key]) / (1.0 + abs(target[key]))
                    k = (variant, key)
                    out[k] = max(out.get(k, 0.0), err)
            sq = _ridders_derivative(lambda t: float(log_F_squared(t, r)), s, step)
            err = abs(sq - target["F"]) / (1.0 + abs(target["F"]))
            out[("squared", "F")] = max(out.get(("squared", "F"), 0.0), err)
    for (variant, key), err in out.items():
        if variant != "frozen" and err > 1e-8:
            logger.info("antiderivative variant %s for %s mismatches by %.3g", variant, key, err)
    return out
