"""Dyadic-block detector for convergence of improper integrals of positive functions."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

__all__ = ["IntegralResult", "improper_integral", "tail_verdict", "dyadic_blocks",
           "DELTA", "WINDOW"]

DELTA = 0.02       # ratio margin below 1 required for geometric convergence
WINDOW = 6         # number of trailing blocks inspected
FLAT_EPS = 1e-6    # ratios within this of 1 count as non-decaying
Q_MARGIN = 0.25    # log-power exponent margin around the critical value 1
TREND_EPS = 1e-8   # minimal ratio drift that counts as a trend


@dataclass
class IntegralResult:
    """Outcome of :func:`improper_integral`.

    ``status`` is one of ``'divergent'``, ``'convergent'``, ``'inconclusive'``.
    ``value`` and ``error`` are only meaningful for convergent integrals.
    """

    status: str
    value: float = np.nan
    error: float = np.nan
    reason: str = ""
    edges: np.ndarray = field(default=None, repr=False)
    blocks: np.ndarray = field(default=None, repr=False)
    ratios: np.ndarray = field(default=None, repr=False)
    exponent: float = np.nan    # equivalent power-law exponent p, g ~ s**-p
    tail: float = np.nan        # extrapolated mass beyond the last block

    @property
    def divergent(self) -> bool:
        return self.status == "divergent"

    @property
    def convergent(self) -> bool:
        return self.status == "convergent"

    def evidence_rows(self):
        """Rows ``(k, I_k, ratio)`` with ``k`` the log2 of the block's left edge."""
        rows = []
        for i, (a, I) in enumerate(zip(self.edges[:-1], self.blocks)):
            ratio = self.blocks[i] / self.blocks[i - 1] if i > 0 and self.blocks[i - 1] > 0 else np.nan
            rows.append((float(np.log2(a)), float(I), float(ratio)))
        return rows


def dyadic_blocks(s0: float, k_max: int) -> np.ndarray:
    """Edges ``s0 < 2**k0 < ... < 2**k_max`` (``s0`` merged if it is a power of two)."""
    k0 = int(np.ceil(np.log2(s0)))
    edges = [float(s0)]
    if 2.0**k0 > s0:
        edges.append(2.0**k0)
    edges.extend(2.0 ** np.arange(k0 + 1, k_max + 1))
    return np.asarray(edges)


def _block(g, a, b):
    # substitution s = a*exp(u) keeps every block O(1) long
    def h(u):
        s = a * np.exp(u)
        return float(g(s)) * s
    val, err = integrate.quad(h, 0.0, np.log(b / a), epsabs=1e-12, epsrel=1e-12, limit=200)
    return val, err


def tail_verdict(blocks, ks, delta: float = DELTA):
    """Classify the trailing behaviour of dyadic block masses.

    Parameters
    ----------
    blocks : array
        Non-negative masses of consecutive dyadic blocks.
    ks : array
        ``log2`` of the left edge of each block.

    Returns
    -------
    status, tail, tail_error, exponent, reason
    """
    I = np.asarray(blocks, dtype=float)[-WINDOW:]
    k = np.asarray(ks, dtype=float)[-WINDOW:]
    if len(I) < WINDOW:
        raise ValueError(f"need at least {WINDOW} dyadic blocks, got {len(I)}")
    if np.all(I == 0.0):
        return "convergent", 0.0, 0.0, np.inf, "integrand vanishes on the tail"
    if np.any(I <= 0.0) or not np.all(np.isfinite(I)):
        return "inconclusive", np.nan, np.nan, np.nan, "non-positive or non-finite block"

    r = I[1:] / I[:-1]
    slope = np.polyfit(k, np.log(I), 1)[0]
    rho_fit = float(np.exp(slope))
    exponent = 1.0 - slope / np.log(2.0)
    trend = r[-1] - r[0]

    if r.min() >= 1.0 - FLAT_EPS:
        return "divergent", np.inf, np.nan, exponent, "blocks do not decay"

    # log-power tails, I_k ~ c k**-q, show ratios creeping up towards 1
    kk = k + 0.5
    q = -np.polyfit(np.log(kk), np.log(I), 1)[0]
    r_pred = (kk[:-1] / kk[1:]) ** q
    log_power = (trend > TREND_EPS and np.all(np.diff(r) > -TREND_EPS)
                 and np.max(np.abs(r_pred - r)) < 1e-3)

    if log_power:
        if q <= 1.0 - Q_MARGIN:
            return "divergent", np.inf, np.nan, exponent, f"log-power tail, q={q:.3g}"
        if q < 1.0 + Q_MARGIN:
            return "inconclusive", np.nan, np.nan, exponent, f"near-critical log-power tail, q={q:.3g}"
        tail = I[-1] * kk[-1] ** q * (kk[-1] + 0.5) ** (1.0 - q) / (q - 1.0)
        q3 = -np.polyfit(np.log(kk[-3:]), np.log(I[-3:]), 1)[0]
        tail3 = I[-1] * kk[-1] ** q3 * (kk[-1] + 0.5) ** (1.0 - q3) / (q3 - 1.0)
        return "convergent", tail, abs(tail3 - tail), exponent, f"log-power tail, q={q:.3g}"

    if r.max() <= 1.0 - delta:
        rho_max = float(r.max())
        tail = I[-1] * rho_fit / (1.0 - rho_fit)
        tail_hi = I[-1] * rho_max / (1.0 - rho_max)
        return "convergent", tail, abs(tail_hi - tail), exponent, f"geometric tail, ratio={rho_fit:.4g}"
    if r.min() < 1.0 - delta:
        return "inconclusive", np.nan, np.nan, exponent, "ratios straddle the decay threshold"
    return "inconclusive", np.nan, np.nan, exponent, f"slow geometric decay, ratio={rho_fit:.4g}"


def improper_integral(g, s0: float, k_max: int = 40) -> IntegralResult:
    """Decide whether ``int_{s0}^inf g(s) ds`` is finite, for ``g >= 0``.

    The integral is cut into dyadic blocks ``[2**k, 2**(k+1)]`` up to
    ``2**k_max``; each block is integrated adaptively and the last six
    block masses decide the verdict.  Geometric decay with ratio at most
    ``1 - 0.02`` is convergent, and the tail is extrapolated geometrically.
    Non-decaying blocks are divergent.  Anything in between, including
    integrands like ``1/(s log s)``, is reported as inconclusive.

    Examples
    --------
    >>> improper_integral(lambda s: 1 / s, 1.0).status
    'divergent'
    >>> round(improper_integral(lambda s: s**-2, 1.0).value, 9)
    1.0
    """
    if s0 <= 0:
        raise ValueError("s0 must be positive")
    edges = dyadic_blocks(s0, k_max)
    vals, errs = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        v, e = _block(g, a, b)
        vals.append(v)
        errs.append(e)
    vals = np.asarray(vals)
    ratios = np.full_like(vals, np.nan)
    ratios[1:] = vals[1:] / np.where(vals[:-1] > 0, vals[:-1], np.nan)

    # the left-over piece [s0, 2**k0] is not a full dyadic block
    full = slice(1, None) if edges[1] != 2 * edges[0] else slice(None)
    status, tail, tail_err, expo, reason = tail_verdict(vals[full], np.log2(edges[:-1][full]))
    res = IntegralResult(status, reason=reason, edges=edges, blocks=vals, ratios=ratios,
                         exponent=float(expo), tail=float(tail))
    if status == "convergent":
        res.value = float(vals.sum() + tail)
        res.error = float(tail_err + np.sum(errs))
    elif status == "divergent":
        res.value = np.inf
    return res
