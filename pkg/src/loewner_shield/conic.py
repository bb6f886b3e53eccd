"""Small-scale convex optimization kernels.

All problems here are tiny (a handful of variables, at most a few dozen
rows), so the emphasis is on determinism and exactness rather than speed:

* ``solve_ls_lin``   -- inequality/equality constrained least distance,
  solved by a hand-rolled Lawson-Hanson NNLS core through the classical
  least-distance-programming (LDP) transformation.  This is the workhorse
  QP behind every safety filter step.
* ``solve_lp``       -- linear programming (scipy HiGHS behind the contract).
* ``solve_gtrs``     -- generalized trust-region subproblem: global
  minimization of ||u - u0|| under one possibly nonconvex quadratic,
  via eigendecomposition and a secular-equation root find.
* ``project_psd_affine_slice`` / ``solve_lmi_ls`` -- least-distance under a
  linear matrix inequality, via outer eigenvalue cutting planes over the
  same least-distance master.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq, linprog

from .symcone import SymmetricMatrix, _as_array


class Status(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    MAX_ITERATIONS = "max_iterations"
    NUMERICAL_FAILURE = "numerical_failure"
    EMPTY_SET = "empty_set"


@dataclass
class SolveReport:
    """Outcome of one solver call.  ``solution`` is present iff OPTIMAL."""

    status: Status
    solution: Optional[np.ndarray] = None
    iterations: int = 0
    residual: float = 0.0
    wall_time: float = 0.0

    @property
    def ok(self) -> bool:
        return self.status is Status.OPTIMAL


@dataclass
class LinearConstraintSet:
    """Rows G u <= h plus optional equalities E u = e."""

    G: np.ndarray
    h: np.ndarray
    E: Optional[np.ndarray] = None
    e: Optional[np.ndarray] = None

    def __post_init__(self):
        self.G = np.atleast_2d(np.asarray(self.G, dtype=float))
        self.h = np.atleast_1d(np.asarray(self.h, dtype=float))
        if self.G.size == 0:
            self.G = self.G.reshape(0, self.G.shape[1] if self.G.ndim == 2 else 0)
        if self.G.shape[0] != self.h.shape[0]:
            raise ValueError("G and h row counts differ")
        if not (np.all(np.isfinite(self.G)) and np.all(np.isfinite(self.h))):
            raise ValueError("constraint rows must be finite")
        if self.G.shape[0] and np.any(np.linalg.norm(self.G, axis=1) == 0.0):
            raise ValueError("G contains an identically zero row")
        if (self.E is None) != (self.e is None):
            raise ValueError("E and e must be given together")
        if self.E is not None:
            self.E = np.atleast_2d(np.asarray(self.E, dtype=float))
            self.e = np.atleast_1d(np.asarray(self.e, dtype=float))
            if self.E.shape[0] != self.e.shape[0]:
                raise ValueError("E and e row counts differ")
            if not (np.all(np.isfinite(self.E)) and np.all(np.isfinite(self.e))):
                raise ValueError("equality rows must be finite")

    @property
    def n_ineq(self) -> int:
        return self.G.shape[0]

    @property
    def dim(self) -> int:
        return self.G.shape[1]

    @staticmethod
    def empty(m: int) -> "LinearConstraintSet":
        return LinearConstraintSet(np.zeros((0, m)), np.zeros(0))

    @staticmethod
    def stack(parts: Sequence["LinearConstraintSet"]) -> "LinearConstraintSet":
        parts = [p for p in parts if p is not None]
        if not parts:
            raise ValueError("nothing to stack")
        m = parts[0].dim
        G = np.vstack([p.G for p in parts]) if parts else np.zeros((0, m))
        h = np.concatenate([p.h for p in parts])
        eqs = [(p.E, p.e) for p in parts if p.E is not None]
        if eqs:
            E = np.vstack([E for E, _ in eqs])
            e = np.concatenate([e for _, e in eqs])
            return LinearConstraintSet(G, h, E, e)
        return LinearConstraintSet(G, h)


def _dedup_rows(G: np.ndarray, h: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Drop duplicate (row, rhs) pairs agreeing within 1e-12, keeping lowest index."""
    keep = []
    for i in range(G.shape[0]):
        dup = False
        for j in keep:
            if abs(h[i] - h[j]) <= 1e-12 and np.max(np.abs(G[i] - G[j])) <= 1e-12:
                dup = True
                break
        if not dup:
            keep.append(i)
    return G[keep], h[keep]


def _nnls(E: np.ndarray, f: np.ndarray, max_iter: int) -> Tuple[np.ndarray, int, bool]:
    """Lawson-Hanson nonnegative least squares: min ||E q - f||, q >= 0.

    Ties in the entering-variable choice are broken by lowest column index.
    Returns (q, iterations, hit_cap).
    """
    m, n = E.shape
    q = np.zeros(n)
    passive = np.zeros(n, dtype=bool)
    resid = f.copy()
    w = E.T @ resid
    tol = 10.0 * np.finfo(float).eps * max(m, n) * max(1.0, float(np.max(np.abs(f), initial=0.0)))
    iters = 0
    while iters < max_iter:
        w_masked = np.where(passive, -np.inf, w)
        j = int(np.argmax(w_masked))
        if not np.any(~passive) or w_masked[j] <= tol:
            return q, iters, False
        passive[j] = True
        while True:
            iters += 1
            if iters >= max_iter:
                return q, iters, True
            z = np.zeros(n)
            sol, *_ = np.linalg.lstsq(E[:, passive], f, rcond=None)
            z[passive] = sol
            if np.all(z[passive] > tol):
                q = z
                break
            # Step back toward feasibility and shrink the passive set.
            mask = passive & (z <= tol) & (q - z > np.finfo(float).eps * np.abs(q))
            if not np.any(mask):
                q = np.where(passive, np.maximum(z, 0.0), 0.0)
                break
            alpha = np.min(q[mask] / (q[mask] - z[mask]))
            q = q + alpha * (z - q)
            passive = passive & (q > tol)
        resid = f - E @ q
        w = E.T @ resid
    return q, iters, True


def _ldp(C: np.ndarray, d: np.ndarray, max_iter: int):
    """Least distance programming: min ||x|| s.t. C x >= d (Lawson-Hanson 23.27).

    Returns (x or None, iterations, hit_cap, residual_norm); x is None when the
    NNLS residual vanishes, which certifies infeasibility.
    """
    k, m = C.shape
    E = np.vstack([C.T, d.reshape(1, -1)])
    f = np.zeros(m + 1)
    f[m] = 1.0
    q, iters, capped = _nnls(E, f, max_iter)
    r = E @ q - f
    rnorm = float(np.linalg.norm(r))
    if abs(r[m]) <= 1e-12 * (1.0 + float(np.linalg.norm(d))):
        return None, iters, capped, rnorm
    x = -r[:m] / r[m]
    return x, iters, capped, rnorm


def _phase1_feasible(G: np.ndarray, h: np.ndarray) -> Tuple[bool, float]:
    """Exact phase-I check: minimal total violation of G u <= h."""
    k, m = G.shape
    if k == 0:
        return True, 0.0
    # variables (u, s): minimize sum(s) s.t. G u - s <= h, s >= 0
    c = np.concatenate([np.zeros(m), np.ones(k)])
    A_ub = np.hstack([G, -np.eye(k)])
    res = linprog(c, A_ub=A_ub, b_ub=h, bounds=[(None, None)] * m + [(0, None)] * k,
                  method="highs")
    if res.status != 0:
        return False, np.inf
    return res.fun <= 1e-9, float(res.fun)


def _kkt_residual(u, u0, G, h, E, e) -> float:
    """Stationarity + feasibility residual at u with least-squares multipliers."""
    viol = 0.0
    if G.shape[0]:
        viol = max(viol, float(np.max(G @ u - h, initial=0.0)))
    if E is not None and E.shape[0]:
        viol = max(viol, float(np.max(np.abs(E @ u - e), initial=0.0)))
    grad = u - u0
    rows = []
    if G.shape[0]:
        active = (h - G @ u) <= 1e-7 * (1.0 + np.abs(h))
        rows.append(G[active])
    if E is not None and E.shape[0]:
        rows.append(E)
        rows.append(-E)
    if rows:
        At = np.vstack(rows).T
        if At.size:
            mult, *_ = np.linalg.lstsq(At, -grad, rcond=None)
            stat = float(np.linalg.norm(grad + At @ mult))
        else:
            stat = float(np.linalg.norm(grad))
    else:
        stat = float(np.linalg.norm(grad))
    return max(viol, stat)


def solve_ls_lin(u0, cons: Optional[LinearConstraintSet], warm=None) -> SolveReport:
    """Minimize ||u - u0||_2 subject to G u <= h and E u = e.

    Active-set method: equalities are eliminated through an orthonormal
    nullspace basis and the remaining least-distance problem is solved by the
    LDP/NNLS transformation.  A feasible u0 is returned unchanged; a warm
    start equal to the optimum is verified and returned within two
    iterations.  Infeasibility is certified by an exact phase-I pass.
    """
    t0 = time.perf_counter()
    u0 = np.asarray(u0, dtype=float).ravel()
    m = u0.size
    if cons is None:
        cons = LinearConstraintSet.empty(m)
    if cons.dim != m:
        raise ValueError(f"constraints have dim {cons.dim}, expected {m}")
    G, h = _dedup_rows(cons.G, cons.h)
    E, e = cons.E, cons.e
    k = G.shape[0]
    max_iter = 100 * (m + k + 1)

    def report(status, u=None, iters=0):
        resid = _kkt_residual(u, u0, G, h, E, e) if u is not None else 0.0
        return SolveReport(status, u, iters, resid, time.perf_counter() - t0)

    feas_tol = 1e-11

    def feasible(u, tol=feas_tol):
        ok = True
        if k:
            ok &= bool(np.all(G @ u - h <= tol * (1.0 + np.abs(h))))
        if E is not None and E.shape[0]:
            ok &= bool(np.max(np.abs(E @ u - e)) <= tol * (1.0 + float(np.max(np.abs(e)))))
        return ok

    if feasible(u0, tol=0.0):
        return report(Status.OPTIMAL, u0.copy(), 0)

    if warm is not None:
        warm = np.asarray(warm, dtype=float).ravel()
        if warm.size == m and feasible(warm, tol=1e-9) and _kkt_residual(
                warm, u0, G, h, E, e) <= 1e-8 * (1.0 + np.linalg.norm(u0)):
            return report(Status.OPTIMAL, warm.copy(), 1)

    # Eliminate equalities: u = u_p + Z y with Z an orthonormal nullspace basis.
    if E is not None and E.shape[0]:
        u_p, _, rank, _ = np.linalg.lstsq(E, e, rcond=None)
        if np.max(np.abs(E @ u_p - e), initial=0.0) > 1e-9 * (1.0 + float(np.max(np.abs(e)))):
            return report(Status.INFEASIBLE)
        _, s, Vt = np.linalg.svd(E)
        rank = int(np.sum(s > max(E.shape) * np.finfo(float).eps * (s[0] if s.size else 0.0)))
        Z = Vt[rank:].T
    else:
        u_p = np.zeros(m)
        Z = np.eye(m)

    if Z.shape[1] == 0:
        u = u_p
        if not feasible(u, tol=1e-9):
            return report(Status.INFEASIBLE)
        return report(Status.OPTIMAL, u, 1)

    y0 = Z.T @ (u0 - u_p)
    if k == 0:
        return report(Status.OPTIMAL, u_p + Z @ y0, 1)

    # min ||y - y0|| s.t. (G Z) y <= h - G u_p;  shift x = y - y0 -> LDP.
    Gz = G @ Z
    rhs = h - G @ u_p - Gz @ y0
    x, iters, capped, rnorm = _ldp(-Gz, -rhs, max_iter)
    if x is None:
        ok, violation = _phase1_feasible(G, h)
        if not ok:
            return report(Status.INFEASIBLE, iters=iters)
        if capped:
            return report(Status.MAX_ITERATIONS, iters=iters)
        return report(Status.NUMERICAL_FAILURE, iters=iters)
    u = u_p + Z @ (y0 + x)
    if capped:
        return report(Status.MAX_ITERATIONS, iters=iters)
    if not feasible(u, tol=1e-7):
        ok, violation = _phase1_feasible(G, h)
        if not ok:
            return report(Status.INFEASIBLE, iters=iters)
        return report(Status.NUMERICAL_FAILURE, iters=iters)
    return report(Status.OPTIMAL, u, max(iters, 1))


def solve_lp(c, cons: LinearConstraintSet) -> SolveReport:
    """Maximize c^T u over the constraint set; basic optimal solution."""
    t0 = time.perf_counter()
    c = np.asarray(c, dtype=float).ravel()
    res = linprog(-c, A_ub=cons.G if cons.n_ineq else None,
                  b_ub=cons.h if cons.n_ineq else None,
                  A_eq=cons.E, b_eq=cons.e,
                  bounds=[(None, None)] * cons.dim, method="highs")
    wall = time.perf_counter() - t0
    if res.status == 2:
        return SolveReport(Status.INFEASIBLE, wall_time=wall)
    if res.status == 3:
        return SolveReport(Status.UNBOUNDED, wall_time=wall)
    if res.status != 0:
        return SolveReport(Status.NUMERICAL_FAILURE, wall_time=wall)
    u = np.asarray(res.x, dtype=float)
    viol = float(np.max(cons.G @ u - cons.h, initial=0.0)) if cons.n_ineq else 0.0
    return SolveReport(Status.OPTIMAL, u, int(res.nit), max(viol, 0.0), wall)


def _gtrs_sigma(M, v, d, u):
    return float(u @ (M @ u) + 2.0 * (v @ u) + d)


def solve_gtrs(u0, M, v, d) -> SolveReport:
    """Global min of ||u - u0||^2 subject to u^T M u + 2 v^T u + d <= 0.

    The constraint may be nonconvex (indefinite or negative-definite M).
    Solution through the eigenbasis of M and a 1-D secular-equation root
    find on the Lagrange multiplier, including the hard case.
    """
    t0 = time.perf_counter()
    u0 = np.asarray(u0, dtype=float).ravel()
    Marr = _as_array(M) if isinstance(M, SymmetricMatrix) else _as_array(SymmetricMatrix(M))
    v = np.asarray(v, dtype=float).ravel()
    d = float(d)
    scale = 1.0 + abs(d) + float(np.linalg.norm(v)) + float(np.linalg.norm(Marr))

    def done(status, u=None, iters=0):
        resid = abs(max(0.0, _gtrs_sigma(Marr, v, d, u))) if u is not None else 0.0
        return SolveReport(status, u, iters, resid, time.perf_counter() - t0)

    if _gtrs_sigma(Marr, v, d, u0) <= 1e-12 * scale:
        return done(Status.OPTIMAL, u0.copy(), 0)

    w, Q = np.linalg.eigh(Marr)
    y0 = Q.T @ u0
    b = Q.T @ v
    lam_min = float(w[0])

    # Fully degenerate constraint: constant sigma(u) = d > 0.
    if np.max(np.abs(w)) <= 1e-14 * scale and np.linalg.norm(v) <= 1e-14 * scale:
        return done(Status.INFEASIBLE)

    # Convex case infeasibility: minimum of sigma over u is positive.
    if lam_min >= -1e-14 * scale:
        pos = w > 1e-14 * scale
        free = ~pos
        if np.all(np.abs(b[free]) <= 1e-13 * scale):
            sigma_min = d - float(np.sum(b[pos] ** 2 / w[pos]))
            if sigma_min > 1e-12 * scale:
                return done(Status.INFEASIBLE)

    mu_max = np.inf if lam_min >= 0.0 else -1.0 / lam_min

    def y_of(mu):
        with np.errstate(invalid="ignore", divide="ignore"):
            return (y0 - mu * b) / (1.0 + mu * w)

    def phi(mu):
        y = y_of(mu)
        with np.errstate(invalid="ignore"):
            return float(y @ (w * y) + 2.0 * (b @ y) + d)

    # Bracket the secular root: phi(0) > 0, find mu_hi with phi(mu_hi) < 0.
    mu_hi = None
    if np.isfinite(mu_max):
        for kexp in range(1, 200):
            cand = mu_max * (1.0 - 0.5 ** kexp)
            if cand <= 0.0:
                continue
            pv = phi(cand)
            if np.isfinite(pv) and pv < 0.0:
                mu_hi = cand
                break
            if not np.isfinite(pv):
                break
    else:
        cand = 1.0
        for _ in range(200):
            pv = phi(cand)
            if np.isfinite(pv) and pv < 0.0:
                mu_hi = cand
                break
            cand *= 2.0

    if mu_hi is not None:
        try:
            mu_star = brentq(phi, 0.0, mu_hi, xtol=1e-14, rtol=1e-14, maxiter=300)
        except (ValueError, RuntimeError):
            return done(Status.NUMERICAL_FAILURE)
        u = Q @ y_of(mu_star)
        return done(Status.OPTIMAL, u, 1)

    # Hard case: the secular function stays positive up to mu_max.  Fix the
    # non-degenerate components at mu_max and move along the most negative
    # eigendirection until the constraint boundary is reached.
    if not np.isfinite(mu_max):
        return done(Status.NUMERICAL_FAILURE)
    degen = np.abs(1.0 + mu_max * w) <= 1e-9
    if not np.any(degen):
        return done(Status.NUMERICAL_FAILURE)
    y = np.zeros_like(y0)
    nd = ~degen
    y[nd] = (y0[nd] - mu_max * b[nd]) / (1.0 + mu_max * w[nd])
    idx = int(np.argmax(degen))
    # sigma along y + t e_idx: w_i t^2 + 2 (w_i y_i + b_i) t + sigma(y)
    a_c = w[idx]
    b_c = 2.0 * (w[idx] * y[idx] + b[idx])
    c_c = float(y @ (w * y) + 2.0 * (b @ y) + d)
    disc = b_c * b_c - 4.0 * a_c * c_c
    if disc < 0.0:
        return done(Status.NUMERICAL_FAILURE)
    roots = [(-b_c + np.sqrt(disc)) / (2.0 * a_c), (-b_c - np.sqrt(disc)) / (2.0 * a_c)]
    t = min(roots, key=abs)
    y[idx] += t
    return done(Status.OPTIMAL, Q @ y, 1)


def _min_eig_vec(arr: np.ndarray):
    w, Q = np.linalg.eigh(arr)
    return float(w[0]), Q[:, 0]


def solve_lmi_ls(u0, F0, F: List, max_cuts: int = 500,
                 feas_tol: float = 5e-8, objective_trace: Optional[list] = None) -> SolveReport:
    """Minimize ||u - u0|| subject to F0 + sum_i u_i F_i >= 0.

    Outer eigenvalue cutting planes: at each iterate the most negative
    eigenvector q of F(u) yields the valid linear cut
    q^T F0 q + sum_i u_i q^T F_i q >= 0, and the least-distance master is
    re-solved.  Terminates once lambda_min(F(u)) >= -feas_tol * scale.
    ``objective_trace`` collects the master objective after each cut.
    """
    t0 = time.perf_counter()
    u0 = np.asarray(u0, dtype=float).ravel()
    m = u0.size
    F0a = _as_array(F0) if isinstance(F0, SymmetricMatrix) else _as_array(SymmetricMatrix(F0))
    Fa = [(_as_array(Fi) if isinstance(Fi, SymmetricMatrix) else _as_array(SymmetricMatrix(Fi)))
          for Fi in F]
    if len(Fa) != m:
        raise ValueError(f"expected {m} coefficient matrices, got {len(Fa)}")

    rows: List[np.ndarray] = []
    rhs: List[float] = []
    u = u0.copy()
    for it in range(max_cuts):
        Fu = F0a + sum(ui * Fi for ui, Fi in zip(u, Fa))
        lam, q = _min_eig_vec(Fu)
        scale = 1.0 + float(np.linalg.norm(Fu))
        if lam >= -feas_tol * scale:
            return SolveReport(Status.OPTIMAL, u, it, max(0.0, -lam),
                               time.perf_counter() - t0)
        coeff = np.array([q @ (Fi @ q) for Fi in Fa])
        const = float(q @ (F0a @ q))
        if np.linalg.norm(coeff) <= 1e-14 * (1.0 + abs(const)):
            # Constant negative cut: the LMI is infeasible along every u.
            return SolveReport(Status.INFEASIBLE, iterations=it,
                               wall_time=time.perf_counter() - t0)
        rows.append(-coeff)
        rhs.append(const)
        master = solve_ls_lin(u0, LinearConstraintSet(np.array(rows), np.array(rhs)))
        if master.status is not Status.OPTIMAL:
            status = Status.INFEASIBLE if master.status is Status.INFEASIBLE \
                else Status.NUMERICAL_FAILURE
            return SolveReport(status, iterations=it + 1,
                               wall_time=time.perf_counter() - t0)
        u = master.solution
        if objective_trace is not None:
            objective_trace.append(float(np.linalg.norm(u - u0)))
    return SolveReport(Status.MAX_ITERATIONS, iterations=max_cuts,
                       wall_time=time.perf_counter() - t0)


def project_psd_affine_slice(A0, A1, A2, z0, tol: float = 1e-8,
                             max_iter: int = 20000) -> Tuple[Optional[np.ndarray], Status]:
    """Euclidean projection of z0 onto {z : A0 + z1 A1 + z2 A2 >= 0}.

    Plane cutting over the least-distance master (same eigenvalue-cut
    machinery as ``solve_lmi_ls``): matrix-space alternating projections
    minimize the wrong (Frobenius-induced) metric on the slice whenever the
    coefficient matrices are not orthonormal, so cuts are used instead.
    Returns (z, status); z is None unless status is OPTIMAL.
    """
    z0 = np.asarray(z0, dtype=float).ravel()
    # Point accuracy goes like sqrt(feasibility gap) along the boundary, so
    # the gap must sit well below the documented 1e-3 point tolerance.
    feas_tol = max(0.1 * tol, 1e-9)
    report = solve_lmi_ls(z0, A0, [A1, A2], max_cuts=max_iter, feas_tol=feas_tol)
    if report.status is Status.OPTIMAL:
        return report.solution, Status.OPTIMAL
    if report.status is Status.INFEASIBLE:
        return None, Status.EMPTY_SET
    return None, report.status
