"""
Discrete Dirichlet energy of the annular region ``D_n = D ∩ {|y| >= rho_in, |x| <= n}``.

By rotational symmetry in ``x`` and in ``z`` the energy reduces to::

    ∬ (u_rho^2 + u_r^2) rho^(l-1) r^(m-1) drho dr

on ``{0 <= rho <= n, 0 <= r <= H(rho)}`` (up to the constant
``omega_l omega_m``).  The quarter plane is covered by square cells of side
``h`` with nodes at the cell centres.  A cell's weight is the weighted area
of its intersection with the domain (a stair-step boundary that keeps the
exact volume of each column), and the energy is::

    sum over neighbouring active cells a, b of  (w_a + w_b) / (2 h^2) * (u_a - u_b)^2

Missing neighbours give the natural (Neumann) condition on ``r = H``, on
the axis ``r = 0`` and at ``rho = 0``.  Nodes with ``rho^2 + r^2 < rho_in^2``
carry ``u = 1``, the column just beyond ``rho = n`` carries ``u = 0``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, sparse
from scipy.sparse import linalg as spla

from .classify import (INCONCLUSIVE, RECURRENT, TRANSIENT, DomainSpec, scale_function,
                       sphere_area)

__all__ = [
    "MeshedAnnulus",
    "QuadraticForm",
    "CapacityResult",
    "ConvergenceError",
    "default_rho_in",
    "auto_mesh_h",
    "assemble",
    "minimize",
    "radial_test_energy",
    "capacity_sequence",
    "fit_models",
]

MIN_CELLS = 8


class ConvergenceError(RuntimeError):
    """Raised when the conjugate-gradient iteration stalls; carries the residual history."""

    def __init__(self, msg, history):
        super().__init__(msg)
        self.history = history


@dataclass
class MeshedAnnulus:
    """Cell-centred grid of the reduced domain with weights and boundary tags.

    ``tag`` is 0 for free nodes, 1 for the inner Dirichlet set (``u = 1``),
    2 for the outer Dirichlet column (``u = 0``) and -1 for inactive cells.
    """

    h: float
    n: float
    rho_in: float
    rho: np.ndarray          # node abscissae, shape (N,)
    r: np.ndarray            # node ordinates, shape (M,)
    weight: np.ndarray       # (N, M) weighted cell areas, 0 outside the domain
    tag: np.ndarray          # (N, M)
    constant: float          # omega_l * omega_m, not included in the weights

    @property
    def active(self):
        return self.tag >= 0

    @property
    def cells(self) -> int:
        return int(np.count_nonzero(self.active))

    @property
    def diameter(self) -> int:
        return len(self.rho) + len(self.r)


@dataclass
class QuadraticForm:
    """``E(u) = sum_e c_e (u_a - u_b)^2`` over grid edges ``e = (a, b)`` (flat indices)."""

    mesh: MeshedAnnulus
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray

    def energy(self, u_flat) -> float:
        return float(np.sum(self.c * (u_flat[self.a] - u_flat[self.b]) ** 2))

    def laplacian(self):
        size = self.mesh.weight.size
        K = sparse.coo_matrix((np.concatenate([self.c, self.c, -self.c, -self.c]),
                               (np.concatenate([self.a, self.b, self.a, self.b]),
                                np.concatenate([self.a, self.b, self.b, self.a]))),
                              shape=(size, size))
        return K.tocsr()


def default_rho_in(dom: DomainSpec) -> float:
    """1 when ``H >= 1`` on ``[0, 1]``, else ``0.9 * min H`` there."""
    hmin = float(np.min(dom.profile(np.linspace(0.0, 1.0, 101))))
    return 1.0 if hmin >= 1.0 else 0.9 * hmin


def auto_mesh_h(dom: DomainSpec, n: float, cells: int = MIN_CELLS) -> float:
    """Largest ``1/2^k`` giving at least ``cells`` cells across ``min H`` on ``[0, n]``."""
    hmin = float(np.min(dom.profile(np.linspace(0.0, n, 2001))))
    return 2.0 ** -math.ceil(math.log2(cells / hmin))


def assemble(dom: DomainSpec, n: float, h_mesh: float, rho_in: float | None = None):
    """Mesh and quadratic form for ``D_n``; returns ``(mesh, form)``."""
    rho_in = default_rho_in(dom) if rho_in is None else float(rho_in)
    if not 0 < rho_in < n:
        raise ValueError(f"need 0 < rho_in < n, got rho_in={rho_in}, n={n}")
    hmin = float(np.min(dom.profile(np.linspace(0.0, n, 2001))))
    if hmin / h_mesh < MIN_CELLS - 1e-9:
        raise ValueError(f"mesh too coarse: {hmin / h_mesh:.3g} cells across the throat, "
                         f"need at least {MIN_CELLS}")
    h = float(h_mesh)
    n_free = int(math.ceil(n / h - 0.5))          # columns with rho_i < n
    N = n_free + 1                                 # plus the outer Dirichlet column
    rho = (np.arange(N) + 0.5) * h
    Hc = np.asarray(dom.profile(rho), dtype=float)
    M = int(math.ceil(Hc.max() / h))
    r = (np.arange(M) + 0.5) * h
    lo = np.arange(M) * h
    top = np.minimum(Hc[:, None], lo[None, :] + h)
    band = np.clip(top, lo[None, :], None) ** dom.m - lo[None, :] ** dom.m
    # column weight rho^(l-1) h times the exact r-integral of r^(m-1) over the band
    weight = (rho[:, None] ** (dom.l - 1)) * h * band / dom.m
    tag = np.where(weight > 0, 0, -1)
    R2 = rho[:, None] ** 2 + r[None, :] ** 2
    tag[(tag == 0) & (R2 < rho_in**2)] = 1
    tag[n_free:, :][tag[n_free:, :] == 0] = 2
    mesh = MeshedAnnulus(h, float(n), rho_in, rho, r, weight, tag,
                         sphere_area(dom.l) * sphere_area(dom.m))

    idx = np.arange(N * M).reshape(N, M)
    act = tag >= 0
    pairs = []
    for sl_a, sl_b in (((slice(0, -1), slice(None)), (slice(1, None), slice(None))),
                       ((slice(None), slice(0, -1)), (slice(None), slice(1, None)))):
        ok = act[sl_a] & act[sl_b]
        wa, wb = weight[sl_a][ok], weight[sl_b][ok]
        pairs.append((idx[sl_a][ok], idx[sl_b][ok], 0.5 * (wa + wb) / h**2))
    a = np.concatenate([p[0] for p in pairs])
    b = np.concatenate([p[1] for p in pairs])
    c = np.concatenate([p[2] for p in pairs])
    return mesh, QuadraticForm(mesh, a, b, c)


def minimize(form: QuadraticForm, tol: float = 1e-10, max_iter: int | None = None):
    """Minimise the energy subject to the Dirichlet tags.

    Preconditioned conjugate gradients (Jacobi) on the free nodes.  Returns
    ``(u, ell, info)`` with ``u`` on the ``(N, M)`` grid (NaN on inactive
    cells), ``ell`` the minimal energy and ``info`` holding the iteration
    count and final relative residual.
    """
    mesh = form.mesh
    tag = mesh.tag.ravel()
    free = np.nonzero(tag == 0)[0]
    fixed_val = np.where(tag == 1, 1.0, 0.0)
    K = form.laplacian()
    Kff = K[free][:, free]
    rhs = -(K[free] @ fixed_val)
    if max_iter is None:
        max_iter = 50 * mesh.diameter
    diag = Kff.diagonal()
    M = sparse.diags(1.0 / diag)
    history = []
    bnorm = np.linalg.norm(rhs)

    def cb(xk):
        history.append(float(np.linalg.norm(rhs - Kff @ xk) / bnorm))

    x0 = np.zeros(len(free))
    if bnorm == 0.0:
        x, status = x0, 0
    else:
        x, status = spla.cg(Kff, rhs, x0=x0, rtol=tol, atol=0.0, maxiter=max_iter, M=M,
                            callback=cb)
    resid = float(np.linalg.norm(rhs - Kff @ x) / bnorm) if bnorm else 0.0
    if status != 0 or resid > 10 * tol:
        raise ConvergenceError(f"CG did not reach relative residual {tol} in {max_iter} "
                               f"iterations (last {resid:.3g})", history)
    u = fixed_val.copy()
    u[free] = x
    ell = form.energy(u)
    u_grid = np.where(mesh.active, u.reshape(mesh.weight.shape), np.nan)
    return u_grid, ell, {"iterations": len(history), "residual": resid}


def radial_test_energy(dom: DomainSpec, form: QuadraticForm) -> tuple[float, float]:
    """Energy of ``u(rho) = (S(n) - S(rho)) / (S(n) - S(rho_in))`` on the mesh.

    Returns ``(discrete, continuum)``: the discrete energy of the nodal
    interpolant (clamped to 1 inside ``rho_in`` and 0 beyond ``n``), and the
    exact continuum value ``1 / (m (S(n) - S(rho_in)))``.
    """
    mesh = form.mesh
    Sn = scale_function(dom, mesh.rho_in, mesh.n)
    vals = np.empty(len(mesh.rho))
    for i, p in enumerate(mesh.rho):
        if p <= mesh.rho_in:
            vals[i] = 1.0
        elif p >= mesh.n:
            vals[i] = 0.0
        else:
            vals[i] = (Sn - scale_function(dom, mesh.rho_in, p)) / Sn
    u = np.repeat(vals[:, None], len(mesh.r), axis=1)
    u[mesh.tag == 1] = 1.0
    u[mesh.tag == 2] = 0.0
    return form.energy(u.ravel()), 1.0 / (dom.m * Sn)


@dataclass
class CapacityResult:
    n: np.ndarray
    ell: np.ndarray
    iterations: np.ndarray
    residual: np.ndarray
    cells: np.ndarray
    h_mesh: np.ndarray
    radial: np.ndarray
    fits: dict = field(default_factory=dict)
    best: str = ""
    verdict: str = INCONCLUSIVE
    constant: float = 1.0

    def rows(self):
        for i in range(len(self.n)):
            yield (float(self.n[i]), int(self.cells[i]), float(self.ell[i]),
                   int(self.iterations[i]), float(self.residual[i]), self.best)


def _rel_rms(y, yhat):
    return float(np.sqrt(np.mean(((yhat - y) / y) ** 2)))


def fit_models(n, ell, S) -> dict:
    """Least-squares fits (relative residuals) of the two decay models.

    ``recurrent``  ``ell = c / (S(n) + b)``, i.e. ``1/ell`` affine in ``S(n)``
    ``transient``  ``ell = c0 + c1 n^-kappa`` with ``c0 >= 0``, ``kappa > 0``

    ``S`` is only fixed up to its base point, hence the offset ``b``; it
    absorbs the resistance of the region near the inner ball.  Each entry
    holds the parameters and the relative RMS error.
    """
    n = np.asarray(n, dtype=float)
    ell = np.asarray(ell, dtype=float)
    S = np.asarray(S, dtype=float)

    alpha0, beta0 = np.polyfit(S, 1.0 / ell, 1)
    sol = optimize.least_squares(lambda p: 1.0 / ((p[0] * S + p[1]) * ell) - 1.0,
                                 [max(alpha0, 1e-12), beta0],
                                 bounds=([1e-12, -np.inf], [np.inf, np.inf]))
    alpha, beta = sol.x
    rec = {"params": {"c": float(1.0 / alpha), "b": float(beta / alpha)},
           "error": _rel_rms(ell, 1.0 / (alpha * S + beta))}

    def resid(p):
        c0, c1, k = p
        return (c0 + c1 * n ** -k) / ell - 1.0

    best = None
    for k0 in (0.25, 0.5, 1.0, 2.0):
        p0 = [0.5 * ell[-1], (ell[0] - 0.5 * ell[-1]) * n[0] ** k0, k0]
        sol = optimize.least_squares(resid, p0, bounds=([0.0, -np.inf, 1e-3], [np.inf, np.inf, 10.0]))
        if best is None or sol.cost < best.cost:
            best = sol
    c0, c1, k = best.x
    tra = {"params": {"c0": float(c0), "c1": float(c1), "kappa": float(k)},
           "error": _rel_rms(ell, c0 + c1 * n ** -k)}
    return {"recurrent": rec, "transient": tra}


def capacity_sequence(dom: DomainSpec, n_list, h_mesh="auto", rho_in: float | None = None,
                      tol: float = 1e-10, ratio: float = 1.5) -> CapacityResult:
    """``ell_n`` for each ``n`` and the model comparison.

    ``h_mesh='auto'`` uses one mesh size for all ``n`` (the one required by
    the largest ``n``), so the meshes are nested and ``ell_n`` is
    non-increasing exactly.  See :func:`fit_models` and :func:`_decide` for
    the model comparison.
    """
    n_list = [float(v) for v in n_list]
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ValueError("n_list must be strictly increasing")
    if len(n_list) < 4:
        # the three-parameter plateau model interpolates three points exactly
        raise ValueError("the model comparison needs at least four values of n")
    rho_in = default_rho_in(dom) if rho_in is None else rho_in
    h = auto_mesh_h(dom, n_list[-1]) if h_mesh == "auto" else float(h_mesh)
    out = {k: [] for k in ("ell", "it", "res", "cells", "radial")}
    for n in n_list:
        mesh, form = assemble(dom, n, h, rho_in)
        _, ell, info = minimize(form, tol)
        out["ell"].append(ell)
        out["it"].append(info["iterations"])
        out["res"].append(info["residual"])
        out["cells"].append(mesh.cells)
        out["radial"].append(radial_test_energy(dom, form)[0])
    n_arr = np.asarray(n_list)
    ell = np.asarray(out["ell"])
    S = np.asarray([scale_function(dom, rho_in, n) for n in n_list])
    fits = fit_models(n_arr, ell, S)
    res = CapacityResult(n_arr, ell, np.asarray(out["it"]), np.asarray(out["res"]),
                         np.asarray(out["cells"]), np.full(len(n_list), h),
                         np.asarray(out["radial"]), fits, constant=mesh.constant)
    _decide(res, ratio, scale_function(dom, rho_in, math.inf))
    return res


def _decide(res: CapacityResult, ratio: float, S_inf: float):
    """Pick the better model and derive the verdict from the implied limit of ``ell_n``.

    The recurrent model's limit is ``c / (S(inf) + b)``, zero iff ``S(inf)``
    is infinite; the transient model's limit is ``c0``, counted as positive
    when it exceeds 1% of the last ``ell_n``.  A fit-error ratio of at least
    ``ratio`` decides outright; otherwise the verdict stands only if both
    models imply the same (zero or positive) limit.
    """
    rec, tra = res.fits["recurrent"], res.fits["transient"]
    rec["limit"] = 0.0 if math.isinf(S_inf) else rec["params"]["c"] / (S_inf + rec["params"]["b"])
    tra["limit"] = tra["params"]["c0"]
    floor = 0.01 * res.ell[-1]
    zero_limit = {"recurrent": rec["limit"] <= floor, "transient": tra["limit"] <= floor}
    e_r, e_t = rec["error"], tra["error"]
    res.best = "recurrent" if e_r <= e_t else "transient"
    lo, hi = min(e_r, e_t), max(e_r, e_t)
    if hi >= ratio * lo:
        res.verdict = RECURRENT if zero_limit[res.best] else TRANSIENT
    elif zero_limit["recurrent"] == zero_limit["transient"]:
        res.verdict = RECURRENT if zero_limit["recurrent"] else TRANSIENT
    else:
        res.verdict = INCONCLUSIVE
    res.fits["error_ratio"] = hi / lo if lo > 0 else math.inf
