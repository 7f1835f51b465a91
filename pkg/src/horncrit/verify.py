"""
Invariant suite for a single domain, reported as a pass/fail matrix.

Each check returns a :class:`Check`; ``passed`` is ``None`` when the check
does not apply (for instance the Lyapunov checks on a profile that fails
the regularity conditions).
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from . import lyapunov as lyap_mod
from .classify import (INCONCLUSIVE, RECURRENT, TRANSIENT, DomainSpec, classify_positive_recurrence,
                       classify_transience, hitting_prob_1d)
from .profile import check_assumption_H, check_derivatives
from .simulate import simulate_paths

__all__ = ["Check", "verify_all", "format_matrix"]

SIGN_TOL = 1e-9
NEUMANN_TOL = 1e-6
IDENTITY_TOL = 1e-8
FD_TOL = 1e-4
ANTIDERIV_TOL = 1e-6


@dataclass
class Check:
    name: str
    passed: bool | None
    value: float = math.nan
    threshold: float = math.nan
    detail: str = ""

    @property
    def status(self) -> str:
        return {True: "pass", False: "FAIL", None: "skip"}[self.passed]


def _le(name, value, tol, detail=""):
    return Check(name, bool(value <= tol), float(value), tol, detail)


def _lyapunov_checks(dom, verdict, s_max, seed):
    out = []
    s0 = lyap_mod.admissible_s0(dom, s_max)
    fs = {sign: lyap_mod.build_f(dom, sign, s0, s_max) for sign in ("plus", "minus")}
    growth = f"f+ {fs['plus'].growth}, f- {fs['minus'].growth}"
    if verdict == INCONCLUSIVE or "inconclusive" in (fs["plus"].growth, fs["minus"].growth):
        out.append(Check("lyapunov linkage", None, detail=growth + ", not decidable"))
    else:
        agree = ((fs["plus"].growth == "diverging") == (verdict == RECURRENT)
                 and (fs["minus"].growth == "bounded") == (verdict == TRANSIENT))
        out.append(Check("lyapunov linkage", agree, detail=f"{growth}; classifier {verdict}"))
    for sign, f in fs.items():
        rep = lyap_mod.verify_delta_u_sign(f, seed=seed)
        out.append(_le(f"half-Laplacian sign ({sign})", rep.max_violation, SIGN_TOL,
                       f"{rep.n_points} mesh points"))
        out.append(_le(f"finite-difference Laplacian ({sign})", rep.fd_max_rel_error, FD_TOL,
                       f"{rep.fd_points} points"))
        out.append(_le(f"Neumann condition ({sign})", lyap_mod.verify_neumann(f), NEUMANN_TOL))
    ident = lyap_mod.identity_check(dom, 1000, seed, s0, s_max)
    out.append(_le("B/A term decomposition", ident["terms"], IDENTITY_TOL,
                   f"alternative coefficients mismatch by {ident['variant']:.3g}"))
    out.append(_le("closed-form B", ident["B_closed"], IDENTITY_TOL))
    grid = np.geomspace(s0, s_max / 8, 40)
    out.append(_le("endpoint extremum", lyap_mod.endpoint_extremum_violation(dom, grid), 0.0))
    anti = lyap_mod.antiderivative_check(dom, np.geomspace(4 * s0, s_max / 100, 5))
    worst = max(v for (variant, _), v in anti.items() if variant == "frozen")
    out.append(_le("antiderivatives (frozen r)", worst, ANTIDERIV_TOL))
    sand = lyap_mod.verify_sandwich(dom, s0, s_max=s_max)
    ok = all(v["decreasing"] for v in sand.values())
    out.append(Check("sandwich constant decreases", ok, sand["plus"]["c_shifted"], math.nan,
                     f"c+ {sand['plus']['c']:.3g} -> {sand['plus']['c_shifted']:.3g}"))
    return out


def _simulation_checks(dom, seed, n_paths=20, h=1e-3, T=0.5):
    out = []
    rho = 2.0
    res = {}
    for mode in ("reduced", "full"):
        b = simulate_paths(dom, mode, rho, h, n_paths, seed, T=T)
        res[mode] = b
        H = dom.profile(b.rho)
        excess = float(np.max(np.maximum(b.r - H, 0.0) / np.maximum(H, 1.0)))
        out.append(_le(f"paths stay in domain ({mode})", excess, 1e-9))
    again = simulate_paths(dom, "reduced", rho, h, n_paths, seed, T=T)
    same = (np.array_equal(again.rho, res["reduced"].rho) and np.array_equal(again.L, res["reduced"].L))
    out.append(Check("seeded replay is identical", same))
    return out


def verify_all(dom: DomainSpec, seed: int = 0, s_max: float = 1e10,
               simulate: bool = True) -> list:
    """Run every invariant check that applies to ``dom``."""
    checks = []
    p = dom.profile
    checks.append(_le("profile derivatives", check_derivatives(p, np.geomspace(1.0, 1e6, 20)), 1.0,
                      "scaled mismatch, <= 1 passes"))
    assumption = check_assumption_H(p, s_max=s_max)
    checks.append(Check("regularity conditions on H", assumption.verdict == "pass",
                        detail=assumption.verdict))
    cls = classify_transience(dom)
    checks.append(Check("transience verdict produced", cls.verdict != INCONCLUSIVE,
                        detail=cls.verdict))
    vol = classify_positive_recurrence(dom)
    checks.append(Check("volume verdict produced", vol.verdict != INCONCLUSIVE, detail=vol.verdict))
    probs = [hitting_prob_1d(dom, 1.0, 2.0, R) for R in (4.0, 8.0, 16.0, 32.0)]
    checks.append(Check("hitting probability increases with R",
                        bool(np.all(np.diff(probs) >= -1e-12)),
                        detail=", ".join(f"{q:.4f}" for q in probs)))

    if assumption.verdict == "pass":
        try:
            checks.extend(_lyapunov_checks(dom, cls.verdict, s_max, seed))
        except lyap_mod.AdmissibilityError as exc:
            checks.append(Check("lyapunov construction", False, detail=str(exc)))
    else:
        checks.append(Check("lyapunov checks", None, detail="profile fails regularity conditions"))
    if simulate:
        checks.extend(_simulation_checks(dom, seed))
    logging.getLogger(__name__).debug("verify_all: %d checks", len(checks))
    return checks


def format_matrix(checks) -> str:
    """One line per check: status, name, value/threshold and detail."""
    width = max(len(c.name) for c in checks)
    lines = []
    for c in checks:
        val = "" if math.isnan(c.value) else f"{c.value:.3g}"
        if not math.isnan(c.threshold):
            val += f" (<= {c.threshold:.0e})"
        lines.append(f"{c.status:4s}  {c.name:<{width}s}  {val:<20s} {c.detail}".rstrip())
    return "\n".join(lines)
