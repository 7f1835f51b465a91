"""
Normally reflected Brownian motion in ``D = {|z| < H(|x|)}``.

Two discretisations are provided:

``full``     Euler steps of ``y = (x, z)`` in ``R^(l+m)``
``reduced``  steps of the radial pair ``(rho, r) = (|x|, |z|)``

The reduced free step is exact by default: ``rho' = |rho e_1 + sqrt(h) xi|``
with ``xi`` standard normal in ``R^l`` (likewise for ``r`` in ``R^m``), which is
the radial part of the full step.  ``scheme='euler'`` uses the Euler step
with Bessel drifts ``(l-1)/(2 rho)``, ``(m-1)/(2 r)`` capped at
``rho, r >= 1e-2 sqrt(h)`` and reflection at 0 by absolute value; its drift
error near the axis biases hitting frequencies in curved domains.

Whenever a step leaves the domain the endpoint is projected onto the
nearest boundary point and the boundary local time ``L`` grows by the
projection distance.  In both modes the nearest point is found in the
meridian ``(rho, r)`` plane by Newton's method on::

    phi(p) = (p - rho) + (H(p) - r) H'(p)

whose root ``(p, H(p))`` is the foot of the normal through ``(rho, r)``.

Random numbers
--------------
Path ``i`` of a run with seed ``s`` draws from its own Philox stream keyed by
``SeedSequence([s, i])``, so a path is reproducible in isolation and a batch
does not depend on the order in which paths are run.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from numba import njit

from .classify import DomainSpec

__all__ = [
    "SimState",
    "PathSummary",
    "PathBatch",
    "ProjectionError",
    "path_rng",
    "start_state",
    "project_meridian",
    "step_full",
    "step_reduced",
    "run_until",
    "simulate_paths",
    "run_ball",
]

HIT_INNER, HIT_OUTER, TIME_BUDGET = "hit_inner", "hit_outer", "time_budget"
_CAUSES = {1: HIT_INNER, 2: HIT_OUTER, 3: TIME_BUDGET}
_FAMILY_CODE = {"power": 0, "logpower": 1, "constant": 2}
MAX_HALVINGS = 20
SCHEMES = ("exact", "euler")
BLOCK = 1024


class ProjectionError(RuntimeError):
    """Raised when the boundary projection fails even after step halving."""


def path_rng(seed: int, path_id: int) -> np.random.Generator:
    """Independent Philox stream for one path."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(path_id)])))


@dataclass
class SimState:
    """Position, elapsed time and boundary local time.

    Full mode stores ``x`` and ``z``; reduced mode stores ``rho`` and ``r``.
    ``rho`` and ``r`` are kept in sync in both modes.
    """

    mode: str
    rho: float
    r: float
    t: float = 0.0
    L: float = 0.0
    steps: int = 0
    x: np.ndarray | None = field(default=None, repr=False)
    z: np.ndarray | None = field(default=None, repr=False)

    def copy(self) -> "SimState":
        return replace(self, x=None if self.x is None else self.x.copy(),
                       z=None if self.z is None else self.z.copy())


@dataclass
class PathSummary:
    cause: str
    state: SimState
    t: float
    L: float
    steps: int
    max_rho: float


@dataclass
class PathBatch:
    """Per-path outcome arrays of :func:`simulate_paths`, indexed by path id."""

    cause: np.ndarray
    t: np.ndarray
    L: np.ndarray
    steps: np.ndarray
    max_rho: np.ndarray
    rho: np.ndarray
    r: np.ndarray
    h: float
    seed: int

    @property
    def n(self) -> int:
        return len(self.cause)

    def frequency(self, cause: str) -> tuple[float, float]:
        """Frequency of an exit cause and its binomial standard error."""
        p = float(np.mean(self.cause == cause))
        return p, math.sqrt(p * (1 - p) / self.n)


def start_state(dom: DomainSpec, mode: str, rho: float, r: float = 0.0) -> SimState:
    """State at ``|x| = rho``, ``|z| = r`` (first coordinate axes in full mode)."""
    if mode not in ("full", "reduced"):
        raise ValueError("mode must be 'full' or 'reduced'")
    if rho < 0 or r < 0:
        raise ValueError("rho and r must be non-negative")
    if r > float(dom.profile(rho)):
        raise ValueError(f"start point outside the domain: r={r} > H(rho)={float(dom.profile(rho))}")
    if mode == "reduced":
        return SimState("reduced", float(rho), float(r))
    x = np.zeros(dom.l)
    z = np.zeros(dom.m)
    x[0] = rho
    z[0] = r
    return SimState("full", float(rho), float(r), x=x, z=z)


# ----------------------------------------------------------------------------
# projection

def project_meridian(dom: DomainSpec, rho: float, r: float, max_iter: int = 60):
    """Nearest point ``(p, H(p))`` with ``p >= 0`` to ``(rho, r)``; ``None`` if Newton fails."""
    prof = dom.profile
    p = rho
    for _ in range(max_iter):
        H, H1, H2 = float(prof(p)), float(prof.dH(p)), float(prof.d2H(p))
        phi = (p - rho) + (H - r) * H1
        dphi = 1.0 + H1 * H1 + (H - r) * H2
        if dphi <= 0:
            dphi = 1.0 + H1 * H1
        if p == 0.0 and phi > 0:
            return 0.0, float(prof(0.0))
        step = phi / dphi
        p = max(p - step, 0.0)
        if abs(step) <= 1e-14 * (1.0 + abs(p)):
            return p, float(prof(p))
    return None


@njit(cache=True)
def _prof(fam, g, s):
    if fam == 0:
        b = 1.0 + s
        H = b ** g
        return H, g * H / b, g * (g - 1.0) * H / (b * b)
    if fam == 1:
        b = 2.0 + s
        w = math.log(b)
        H = w ** g
        return H, g * H / (w * b), (g * (g - 1.0) * H / (w * w) - g * H / w) / (b * b)
    return g, 0.0, 0.0


@njit(cache=True)
def _project_nb(fam, g, rho, r):
    p = rho
    for _ in range(60):
        H, H1, H2 = _prof(fam, g, p)
        phi = (p - rho) + (H - r) * H1
        dphi = 1.0 + H1 * H1 + (H - r) * H2
        if dphi <= 0.0:
            dphi = 1.0 + H1 * H1
        if p == 0.0 and phi > 0.0:
            return 0.0, _prof(fam, g, 0.0)[0], True
        step = phi / dphi
        p = p - step
        if p < 0.0:
            p = 0.0
        if abs(step) <= 1e-14 * (1.0 + abs(p)):
            return p, _prof(fam, g, p)[0], True
    return p, 0.0, False


# ----------------------------------------------------------------------------
# kernels; st = [rho, r, t, L, steps, max_rho]; return (code, normals used)
# codes: 0 block exhausted, 1 inner, 2 outer, 3 time, 4 projection failure

@njit(cache=True)
def _reduced_kernel(st, xi, h, l, m, fam, g, c0, c2, outer, T, exact):
    sq = math.sqrt(h)
    cap = 1e-2 * sq
    for i in range(xi.shape[0]):
        rho = st[0]
        r = st[1]
        if exact:
            a = rho + sq * xi[i, 0]
            b = r + sq * xi[i, l]
            sa = a * a
            for j in range(1, l):
                sa += h * xi[i, j] * xi[i, j]
            sb = b * b
            for j in range(l + 1, l + m):
                sb += h * xi[i, j] * xi[i, j]
            rho = math.sqrt(sa)
            r = math.sqrt(sb)
        else:
            rho = abs(rho + (l - 1) / (2.0 * max(rho, cap)) * h + sq * xi[i, 0])
            r = abs(r + (m - 1) / (2.0 * max(r, cap)) * h + sq * xi[i, l])
        H = _prof(fam, g, rho)[0]
        if r > H:
            p, Hp, ok = _project_nb(fam, g, rho, r)
            if not ok:
                return 4, i
            st[3] += math.sqrt((p - rho) ** 2 + (Hp - r) ** 2)
            rho = p
            r = Hp
        st[0] = rho
        st[1] = r
        st[4] += 1.0
        st[2] = st[4] * h
        if rho > st[5]:
            st[5] = rho
        if rho <= c0 - c2 * r * r:
            return 1, i + 1
        if rho >= outer:
            return 2, i + 1
        if st[2] >= T * (1.0 - 1e-12):
            return 3, i + 1
    return 0, xi.shape[0]


@njit(cache=True)
def _full_kernel(st, x, z, xi, h, fam, g, c0, c2, outer, T):
    sq = math.sqrt(h)
    l = x.shape[0]
    m = z.shape[0]
    for i in range(xi.shape[0]):
        for j in range(l):
            x[j] += sq * xi[i, j]
        for j in range(m):
            z[j] += sq * xi[i, l + j]
        rho = math.sqrt(np.sum(x * x))
        r = math.sqrt(np.sum(z * z))
        H = _prof(fam, g, rho)[0]
        if r > H:
            p, Hp, ok = _project_nb(fam, g, rho, r)
            if not ok:
                # undo the increment so the caller can retry with halving
                for j in range(l):
                    x[j] -= sq * xi[i, j]
                for j in range(m):
                    z[j] -= sq * xi[i, l + j]
                return 4, i
            st[3] += math.sqrt((p - rho) ** 2 + (Hp - r) ** 2)
            if rho > 0.0:
                for j in range(l):
                    x[j] *= p / rho
            for j in range(m):
                z[j] *= Hp / r
            rho = p
            r = Hp
        st[0] = rho
        st[1] = r
        st[4] += 1.0
        st[2] = st[4] * h
        if rho > st[5]:
            st[5] = rho
        if rho <= c0 - c2 * r * r:
            return 1, i + 1
        if rho >= outer:
            return 2, i + 1
        if st[2] >= T * (1.0 - 1e-12):
            return 3, i + 1
    return 0, xi.shape[0]


@njit(cache=True)
def _ball_kernel(st, z, xi, h, a, r_in, r_out, T):
    # st = [t, L, steps]; reflected at |z| = a, stops at |z| <= r_in or |z| >= r_out
    sq = math.sqrt(h)
    m = z.shape[0]
    for i in range(xi.shape[0]):
        for j in range(m):
            z[j] += sq * xi[i, j]
        r = math.sqrt(np.sum(z * z))
        if r > a:
            st[1] += r - a
            for j in range(m):
                z[j] *= a / r
            r = a
        st[2] += 1.0
        st[0] = st[2] * h
        if r <= r_in:
            return 1, i + 1
        if r >= r_out:
            return 2, i + 1
        if st[0] >= T * (1.0 - 1e-12):
            return 3, i + 1
    return 0, xi.shape[0]


# ----------------------------------------------------------------------------
# single steps (pure Python, any profile)

def _reflect_reduced(dom, rho, r):
    H = float(dom.profile(rho))
    if r <= H:
        return rho, r, 0.0
    res = project_meridian(dom, rho, r)
    if res is None:
        return None
    p, Hp = res
    return p, Hp, math.hypot(p - rho, Hp - r)


def _reduced_increment(dom, rho, r, h, noise, scheme="exact"):
    sq = math.sqrt(h)
    l = dom.l
    if scheme == "exact":
        rho = math.sqrt((rho + sq * noise[0]) ** 2 + h * float(np.sum(noise[1:l] ** 2)))
        r = math.sqrt((r + sq * noise[l]) ** 2 + h * float(np.sum(noise[l + 1:] ** 2)))
    else:
        cap = 1e-2 * sq
        rho = abs(rho + (l - 1) / (2.0 * max(rho, cap)) * h + sq * noise[0])
        r = abs(r + (dom.m - 1) / (2.0 * max(r, cap)) * h + sq * noise[l])
    return _reflect_reduced(dom, rho, r)


def _full_increment(dom, x, z, h, noise):
    sq = math.sqrt(h)
    x = x + sq * noise[:dom.l]
    z = z + sq * noise[dom.l:]
    rho = float(np.linalg.norm(x))
    r = float(np.linalg.norm(z))
    if r <= float(dom.profile(rho)):
        return x, z, 0.0
    res = project_meridian(dom, rho, r)
    if res is None:
        return None
    p, Hp = res
    if rho > 0:
        x = x * (p / rho)
    z = z * (Hp / r)
    return x, z, math.hypot(p - rho, Hp - r)


def step_reduced(dom: DomainSpec, s: SimState, h: float, rng, noise=None,
                 scheme: str = "exact") -> SimState:
    """One step of ``(rho, r)`` with reflection at ``r = H(rho)``.

    ``noise`` is a standard normal vector in ``R^(l+m)``; ``scheme`` is
    ``'exact'`` (radial part of a Gaussian step) or ``'euler'`` (Bessel
    drifts, only components ``0`` and ``l`` of the noise are used).
    If the projection fails the step is split into two half steps (each using
    the increment scaled by ``1/sqrt(2)``), recursively up to 20 times.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    if scheme not in SCHEMES:
        raise ValueError(f"scheme must be one of {SCHEMES}")
    if noise is None:
        noise = rng.standard_normal(dom.l + dom.m)
    rho, r, L = s.rho, s.r, s.L

    def go(rho, r, hh, nn, depth):
        res = _reduced_increment(dom, rho, r, hh, nn, scheme)
        if res is not None:
            return res
        if depth >= MAX_HALVINGS:
            raise ProjectionError("boundary projection failed after 20 step halvings")
        nn = nn / math.sqrt(2.0)
        rho1, r1, dl1 = go(rho, r, hh / 2, nn, depth + 1)
        rho2, r2, dl2 = go(rho1, r1, hh / 2, nn, depth + 1)
        return rho2, r2, dl1 + dl2

    rho, r, dl = go(rho, r, h, np.asarray(noise, dtype=float), 0)
    return SimState("reduced", rho, r, s.t + h, L + dl, s.steps + 1)


def step_full(dom: DomainSpec, s: SimState, h: float, rng, noise=None) -> SimState:
    """One Euler step of ``(x, z)`` with projection onto ``|z| = H(|x|)`` when it leaves ``D``."""
    if h <= 0:
        raise ValueError("h must be positive")
    if noise is None:
        noise = rng.standard_normal(dom.l + dom.m)

    def go(x, z, hh, nn, depth):
        res = _full_increment(dom, x, z, hh, nn)
        if res is not None:
            return res
        if depth >= MAX_HALVINGS:
            raise ProjectionError("boundary projection failed after 20 step halvings")
        nn = nn / math.sqrt(2.0)
        x1, z1, dl1 = go(x, z, hh / 2, nn, depth + 1)
        x2, z2, dl2 = go(x1, z1, hh / 2, nn, depth + 1)
        return x2, z2, dl1 + dl2

    x, z, dl = go(s.x, s.z, h, np.asarray(noise, dtype=float), 0)
    return SimState("full", float(np.linalg.norm(x)), float(np.linalg.norm(z)), s.t + h,
                    s.L + dl, s.steps + 1, x=x, z=z)


# ----------------------------------------------------------------------------
# path driver

class _Stream:
    """Buffered standard normals of one path's stream, consumed row by row."""

    def __init__(self, seed, path_id, dim, block=BLOCK):
        self.rng = path_rng(seed, path_id)
        self.dim = dim
        self.block = block
        self.buf = np.empty((0, dim))
        self.pos = 0

    def take(self):
        if self.pos >= len(self.buf):
            self.buf = self.rng.standard_normal((self.block, self.dim))
            self.pos = 0
        return self.buf[self.pos:]

    def advance(self, n):
        self.pos += n


class _Path:
    """Resumable path: repeated :meth:`run` calls continue the same stream."""

    def __init__(self, dom, start: SimState, h, seed, path_id, inner=0.0, outer=math.inf,
                 level_stop=None, scheme="exact"):
        if scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")
        self.dom = dom
        self.h = float(h)
        self.mode = start.mode
        self.scheme = scheme
        self.state = start.copy()
        self.stream = _Stream(seed, path_id, dom.l + dom.m)
        # stop inside when rho <= c0 - c2 r^2
        self.c0, self.c2 = (float(inner), 0.0) if level_stop is None else map(float, level_stop)
        self.outer = float(outer)
        fam = dom.profile.family
        self.fam = _FAMILY_CODE.get(fam, -1)
        self.g = float(dom.profile.params[0]) if self.fam >= 0 else 0.0
        self.max_rho = start.rho
        self.cause = None

    def _stopped(self, st: SimState, T):
        if st.rho <= self.c0 - self.c2 * st.r**2:
            return 1
        if st.rho >= self.outer:
            return 2
        if st.t >= T * (1 - 1e-12):
            return 3
        return 0

    def _python_step(self, noise):
        if self.mode == "reduced":
            self.state = step_reduced(self.dom, self.state, self.h, None, noise, self.scheme)
        else:
            self.state = step_full(self.dom, self.state, self.h, None, noise)
        self.state.t = self.state.steps * self.h
        self.max_rho = max(self.max_rho, self.state.rho)

    def run(self, T=math.inf) -> int:
        code = self._stopped(self.state, T)
        if code:
            return code
        s = self.state
        st = np.array([s.rho, s.r, s.t, s.L, float(s.steps), self.max_rho])
        while True:
            xi = self.stream.take()
            if self.fam < 0:
                code, used = 4, 0
            elif self.mode == "reduced":
                code, used = _reduced_kernel(st, xi, self.h, self.dom.l, self.dom.m, self.fam,
                                             self.g, self.c0, self.c2, self.outer, T,
                                             self.scheme == "exact")
            else:
                code, used = _full_kernel(st, s.x, s.z, xi, self.h, self.fam, self.g,
                                          self.c0, self.c2, self.outer, T)
            self.stream.advance(used)
            s.rho, s.r, s.t, s.L, s.steps = st[0], st[1], st[2], st[3], int(st[4])
            self.max_rho = st[5]
            if code == 4:
                # generic profile or projection trouble: one Python step with halving
                self._python_step(self.stream.take()[0].copy())
                self.stream.advance(1)
                s = self.state
                st[:] = [s.rho, s.r, s.t, s.L, float(s.steps), self.max_rho]
                code = self._stopped(s, T)
            if code:
                self.state = s
                return code


def run_until(dom: DomainSpec, start: SimState, h: float, seed: int, inner: float = 0.0,
              outer: float = math.inf, T: float = math.inf, path_id: int = 0,
              level_stop=None, scheme: str = "exact") -> PathSummary:
    """Run one path until ``rho <= inner``, ``rho >= outer`` or ``t >= T``.

    Stops are detected at step endpoints; the first endpoint across a
    threshold ends the path.  ``level_stop = (c0, c2)`` replaces the inner
    ball by ``{rho <= c0 - c2 r^2}``.  ``scheme`` selects the reduced-mode
    free step (see :func:`step_reduced`).
    """
    if h <= 0:
        raise ValueError("h must be positive")
    if not (inner < outer):
        raise ValueError("need inner < outer")
    if start.rho > outer:
        raise ValueError("start lies beyond the outer radius")
    if math.isinf(outer) and math.isinf(T) and inner <= 0 and level_stop is None:
        raise ValueError("no stopping condition given")
    path = _Path(dom, start, h, seed, path_id, inner, outer, level_stop, scheme)
    code = path.run(T)
    s = path.state
    return PathSummary(_CAUSES[code], s, s.t, s.L, s.steps, float(path.max_rho))


def simulate_paths(dom: DomainSpec, mode: str, start_rho: float, h: float, n_paths: int,
                   seed: int, inner: float = 0.0, outer: float = math.inf, T: float = math.inf,
                   start_r: float = 0.0, scheme: str = "exact") -> PathBatch:
    """Run ``n_paths`` independent paths; path ``i`` uses stream ``(seed, i)``."""
    start = start_state(dom, mode, start_rho, start_r)
    out = {k: np.empty(n_paths) for k in ("t", "L", "steps", "max_rho", "rho", "r")}
    cause = np.empty(n_paths, dtype=object)
    for i in range(n_paths):
        res = run_until(dom, start, h, seed, inner, outer, T, path_id=i, scheme=scheme)
        cause[i] = res.cause
        out["t"][i], out["L"][i], out["steps"][i] = res.t, res.L, res.steps
        out["max_rho"][i], out["rho"][i], out["r"][i] = res.max_rho, res.state.rho, res.state.r
    return PathBatch(cause, out["t"], out["L"], out["steps"].astype(int), out["max_rho"],
                     out["rho"], out["r"], float(h), int(seed))


class BallPath:
    """Reflected Brownian motion in the ``m``-ball of radius ``a``, resumable."""

    def __init__(self, m: int, a: float, h: float, seed: int, path_id: int, radius: float = 0.0):
        if a <= 0 or m < 1:
            raise ValueError("need a > 0 and m >= 1")
        if not 0 <= radius <= a:
            raise ValueError("start radius must lie in [0, a]")
        self.a, self.h = float(a), float(h)
        self.z = np.zeros(m)
        self.z[0] = radius
        self.st = np.zeros(3)          # t, L, steps
        self.stream = _Stream(seed, path_id, m)

    @property
    def t(self):
        return self.st[0]

    @property
    def L(self):
        return self.st[1]

    @property
    def radius(self):
        return float(np.linalg.norm(self.z))

    def run(self, r_in=-1.0, r_out=math.inf, T=math.inf) -> int:
        while True:
            code, used = _ball_kernel(self.st, self.z, self.stream.take(), self.h, self.a,
                                      r_in, r_out, T)
            self.stream.advance(used)
            if code:
                return code

    def place_on_sphere(self, radius):
        """Rescale ``z`` onto the sphere of the given radius (used after a crossing)."""
        self.z *= radius / np.linalg.norm(self.z)


def run_ball(m: int, a: float, h: float, seed: int, path_id: int = 0, radius: float = 0.0,
             r_in: float = -1.0, r_out: float = math.inf, T: float = math.inf):
    """One path of the ``m``-ball process; returns ``(cause, t, L, final radius)``."""
    p = BallPath(m, a, h, seed, path_id, radius)
    code = p.run(r_in, r_out, T)
    return _CAUSES[code], float(p.t), float(p.L), p.radius
