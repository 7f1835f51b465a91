"""
Monte Carlo studies of reflected Brownian motion.

Each study returns an :class:`ExperimentTable`.  Oracle values come from
closed forms or quadrature and are computed before any simulation.

* :func:`local_time_rate`   ``E L_a(t) / t`` in the m-ball against ``m/(2a)``
* :func:`cycle_identity`    excursions ``a/2 -> a -> a/2`` in the m-ball
* :func:`two_sphere`        hitting ``{rho <= rho0}`` before ``{rho >= R}``
* :func:`supermartingale_check`  ``t -> E u(B(t ^ tau))`` along paths
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .classify import DomainSpec, hitting_prob_1d
from .io import line_plot_svg, write_csv
from .lyapunov import LyapunovFunction, eval_u, forward_map
from .simulate import HIT_INNER, BallPath, _Path, simulate_paths, start_state

__all__ = [
    "ExperimentTable",
    "local_time_rate",
    "cycle_identity",
    "cycle_oracles",
    "two_sphere",
    "supermartingale_check",
    "mean_stderr",
]

COLUMNS = ("experiment", "parameter", "quantity", "estimate", "stderr", "oracle",
           "n_paths", "h", "seed")


def mean_stderr(x) -> tuple[float, float]:
    """Sample mean and ``std(ddof=1)/sqrt(n)``."""
    x = np.asarray(x, dtype=float)
    if len(x) < 2:
        return float(np.mean(x)), math.nan
    return float(np.mean(x)), float(np.std(x, ddof=1) / math.sqrt(len(x)))


@dataclass
class ExperimentTable:
    """Rows of ``{parameter, quantity, estimate, stderr, oracle, n_paths, h, seed}``."""

    name: str
    rows: list = field(default_factory=list)
    notes: dict = field(default_factory=dict)

    def add(self, parameter, quantity, estimate, stderr, oracle=math.nan, n_paths=0,
            h=math.nan, seed=-1):
        self.rows.append(dict(experiment=self.name, parameter=parameter, quantity=quantity,
                              estimate=float(estimate), stderr=float(stderr),
                              oracle=float(oracle), n_paths=int(n_paths), h=float(h),
                              seed=int(seed)))

    def select(self, quantity=None, parameter=None) -> list:
        return [r for r in self.rows
                if (quantity is None or r["quantity"] == quantity)
                and (parameter is None or r["parameter"] == parameter)]

    def get(self, quantity, parameter=None) -> dict:
        rows = self.select(quantity, parameter)
        if not rows:
            raise KeyError((quantity, parameter))
        return rows[0]

    def write_csv(self, path):
        write_csv(path, COLUMNS, [[r[c] for c in COLUMNS] for r in self.rows])

    def plot_svg(self, path, quantity=None):
        """Line plot of estimate (with 1-stderr bars) and oracle against row index/parameter."""
        rows = self.select(quantity)
        labels = [str(r["parameter"]) for r in rows]
        line_plot_svg(path, labels, [r["estimate"] for r in rows], [r["stderr"] for r in rows],
                      [r["oracle"] for r in rows], title=f"{self.name} {quantity or ''}".strip())



# ----------------------------------------------------------------------------
# m-ball studies

def local_time_rate(a: float, m: int, t_end: float = 50.0, n_paths: int = 5000,
                    h: float = 1e-3, seed: int = 0, convergence: bool = False) -> ExperimentTable:
    """Estimate ``E L_a(t_end) / t_end`` for reflected motion in the ball of radius ``a``.

    Paths start at the centre.  With ``convergence`` a second row at ``h/2``
    is added.
    """
    if a <= 0 or m < 1:
        raise ValueError("need a > 0 and m >= 1")
    oracle = m / (2.0 * a)
    tab = ExperimentTable("localtime")
    for hh in ((h, h / 2) if convergence else (h,)):
        rate = np.empty(n_paths)
        for i in range(n_paths):
            p = BallPath(m, a, hh, seed, i)
            p.run(T=t_end)
            rate[i] = p.L / t_end
        est, se = mean_stderr(rate)
        tab.add(f"m={m},a={a:g}", "rate", est, se, oracle, n_paths, hh, seed)
    return tab


def cycle_oracles(a: float, m: int) -> dict:
    """Closed forms for the excursion cycle ``a/2 -> a -> a/2``.

    ``E sigma_a`` from ``|z| = a/2`` is ``3 a^2 / (4m)``.  The mean return
    time ``u(a)`` solves ``u'' / 2 + (m-1)/(2r) u' = -1``, ``u(a/2) = 0``,
    ``u'(a) = 0``, giving ``u' = (2/m)(a^m r^(1-m) - r)``.  Ito's formula for
    ``|Z|^2`` then gives ``E L = (m u(a) + 3a^2/4) / (2a)``.
    """
    if m == 2:
        integral = a**2 * math.log(2.0)
    else:
        integral = a**m * (a ** (2 - m) - (a / 2) ** (2 - m)) / (2 - m)
    ret = (2.0 / m) * (integral - 0.5 * (a**2 - a**2 / 4))
    up = 3 * a**2 / (4 * m)
    L = (m * ret + 0.75 * a**2) / (2 * a)
    return {"E_sigma_a": up, "E_sigma_half": ret, "E_L": L, "ratio": L / (up + ret)}


def _cycles(a, m, n, h, seed, first_id=0):
    up, down, L = np.empty(n), np.empty(n), np.empty(n)
    for i in range(n):
        p = BallPath(m, a, h, seed, first_id + i, radius=a / 2)
        p.run(r_out=a)
        up[i] = p.t
        # the excursion phase starts exactly on the sphere; discard overshoot local time
        p.place_on_sphere(a)
        t0, L0 = p.t, p.L
        p.run(r_in=a / 2)
        down[i] = p.t - t0
        L[i] = p.L - L0
    return up, down, L


def _ratio_stats(L, dur):
    mL, mD = L.mean(), dur.mean()
    r = mL / mD
    n = len(L)
    # delta method for a ratio of means
    var = (np.var(L, ddof=1) - 2 * r * np.cov(L, dur)[0, 1] + r * r * np.var(dur, ddof=1)) / (n * mD**2)
    return r, math.sqrt(max(var, 0.0))


def cycle_identity(a: float = 1.0, m: int = 2, n_cycles: int = 20000, h: float = 1e-3,
                   seed: int = 0, richardson: bool = True) -> ExperimentTable:
    """Excursion cycle ``|z| = a/2 -> a -> a/2`` of reflected motion in the m-ball.

    Reports ``E sigma_a`` (from ``a/2``), ``E sigma_{a/2}`` (from ``a``),
    ``E L`` over the return leg and the cycle ratio ``E L / E(duration)``.
    Endpoint monitoring biases hitting times by ``O(sqrt(h))``; with
    ``richardson`` the run is repeated at ``h/4`` and rows with parameter
    ``extrapolated`` hold ``2 E(h/4) - E(h)``, which removes that term.  The
    ``h/4`` run uses path ids ``n_cycles ... 2 n_cycles - 1``.
    """
    orc = cycle_oracles(a, m)
    tab = ExperimentTable("cycle")
    hs = (h, h / 4) if richardson else (h,)
    stats = {}
    for j, hh in enumerate(hs):
        # disjoint stream ids keep the two step sizes independent
        up, down, L = _cycles(a, m, n_cycles, hh, seed, j * n_cycles)
        st = {
            "E_sigma_a": mean_stderr(up),
            "E_sigma_half": mean_stderr(down),
            "E_L": mean_stderr(L),
            "ratio": _ratio_stats(L, up + down),
        }
        stats[hh] = st
        for q, (est, se) in st.items():
            tab.add(f"h={hh:g}", q, est, se, orc[q], n_cycles, hh, seed)
    if richardson:
        coarse, fine = stats[h], stats[h / 4]
        for q in orc:
            est = 2 * fine[q][0] - coarse[q][0]
            se = math.sqrt(4 * fine[q][1] ** 2 + coarse[q][1] ** 2)
            tab.add("extrapolated", q, est, se, orc[q], n_cycles, h, seed)
    return tab


# ----------------------------------------------------------------------------
# domain studies

def two_sphere(dom: DomainSpec, rho0: float, rho1: float, R_list, n_paths: int = 10000,
               h: float = 1e-3, seed: int = 0, mode: str = "reduced",
               convergence: bool = False) -> ExperimentTable:
    """Frequency of reaching ``{rho <= rho0}`` before ``{rho >= R}`` from ``rho = rho1``.

    Every path runs once to ``max(R_list)``; its running maximum of ``rho``
    decides the outcome for each smaller ``R``.  The oracle column is the
    comparison-diffusion probability :func:`hitting_prob_1d`, and a final
    row holds its ``R = inf`` value.  ``notes['trend']`` is ``'increasing'``
    when the last doubling of ``R`` still raises the estimate by more than
    two standard errors of the paired difference, else ``'plateau'``.
    ``notes['limit_gap']`` is ``(p_inf - p_Rmax) / p_inf`` with ``p_inf`` the
    ``R = inf`` oracle.  Over ``R <= 32`` logarithmic and power-law
    approaches to the limit look alike, so the oracle column carries more
    weight than the trend flag.
    """
    R_list = sorted(float(R) for R in R_list)
    if not (0 < rho0 < rho1 < R_list[0]):
        raise ValueError("need 0 < rho0 < rho1 < min(R_list)")
    oracles = [hitting_prob_1d(dom, rho0, rho1, R) for R in R_list]
    with warnings.catch_warnings():
        # the R = inf limit of a recurrent domain is 1 by design
        warnings.simplefilter("ignore", UserWarning)
        p_inf = hitting_prob_1d(dom, rho0, rho1, math.inf)
    tab = ExperimentTable("twosphere")
    for hh in ((h, h / 2) if convergence else (h,)):
        b = simulate_paths(dom, mode, rho1, hh, n_paths, seed, inner=rho0, outer=R_list[-1])
        hits = [(b.cause == HIT_INNER) & (b.max_rho < R) for R in R_list]
        for R, hit, orc in zip(R_list, hits, oracles):
            est, se = mean_stderr(hit.astype(float))
            tab.add(f"R={R:g}", "p_inner_first", est, se, orc, n_paths, hh, seed)
        if hh == h:
            if len(hits) >= 2:
                d_est, d_se = mean_stderr(hits[-1].astype(float) - hits[-2].astype(float))
                tab.notes["trend"] = "increasing" if d_est > 2 * d_se else "plateau"
            tab.notes["batch"] = b
    tab.add("R=inf", "p_inner_first_limit", math.nan, math.nan, p_inf, 0, h, seed)
    last = tab.select("p_inner_first")[len(R_list) - 1]["estimate"]
    tab.notes["limit_gap"] = (p_inf - last) / p_inf
    return tab


def supermartingale_check(lyap: LyapunovFunction, start_rho: float, t_grid,
                          n_paths: int = 2000, h: float = 1e-3, seed: int = 0,
                          start_r: float = 0.0, mode: str = "reduced") -> ExperimentTable:
    """Estimate ``t -> E u(B(t ^ tau))`` where ``tau`` is the exit below level ``s0``.

    For ``lyap.sign == 'plus'`` the sequence should be non-increasing, for
    ``'minus'`` non-decreasing.  Rows ``E_u`` hold the means; rows
    ``increment`` hold paired differences between consecutive times, whose
    sign is checked against three standard errors (``notes['ok']``).
    """
    dom = lyap.dom
    t_grid = sorted(float(t) for t in t_grid)
    p = dom.profile
    s0 = lyap.s0
    # {level <= s0} = {rho <= c0 - c2 r^2}
    c0 = s0 + 0.25 * float(p.Q1(s0))
    c2 = 0.5 * float(p.L1(s0))
    start = start_state(dom, mode, start_rho, start_r)
    if start_rho <= c0 - c2 * start_r**2:
        raise ValueError("start point lies below the level s0")
    u0 = eval_u(lyap, start_rho, start_r)
    n_t = len(t_grid)
    RHO = np.full((n_paths, n_t), float(start_rho))
    R = np.full((n_paths, n_t), float(start_r))
    stopped = np.zeros((n_paths, n_t), dtype=bool)
    for i in range(n_paths):
        path = _Path(dom, start, h, seed, i, level_stop=(c0, c2))
        for k, t in enumerate(t_grid):
            if t <= 0:
                continue
            if path.run(T=t) == 1:
                stopped[i, k:] = True
                break
            RHO[i, k], R[i, k] = path.state.rho, path.state.r
    U = np.zeros((n_paths, n_t))
    live = ~stopped
    U[live] = _u_at(lyap, RHO[live], R[live])
    U[:, [k for k, t in enumerate(t_grid) if t <= 0]] = u0
    tab = ExperimentTable("supermartingale")
    sign = 1.0 if lyap.sign == "plus" else -1.0
    ok = True
    for k, t in enumerate(t_grid):
        est, se = mean_stderr(U[:, k])
        tab.add(f"t={t:g}", "E_u", est, 0.0 if t <= 0 else se,
                u0 if t <= 0 else math.nan, n_paths, h, seed)
        if k:
            d_est, d_se = mean_stderr(U[:, k] - U[:, k - 1])
            tab.add(f"t={t_grid[k - 1]:g}->{t:g}", "increment", d_est, d_se, math.nan,
                    n_paths, h, seed)
            ok &= sign * d_est <= 3 * d_se
    tab.notes["ok"] = bool(ok)
    tab.notes["u_start"] = u0
    return tab


def _u_at(lyap, rho, r):
    # points that slipped below level s0 within the final step count as stopped
    u = np.asarray(eval_u(lyap, rho, r, strict=False), dtype=float)
    below = rho <= forward_map(lyap.dom.profile, lyap.s0, r)
    return np.where(below, 0.0, u)
