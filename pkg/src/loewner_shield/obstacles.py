"""Planar obstacle geometry: membership, Euclidean projection, depth, and
the per-obstacle safe-input constraint builders.

Four obstacle families are supported: circle, ellipse, convex polytope
(vertex-defined), and spectrahedron (PSD slice of an affine matrix pencil).
All positions are in meters in world coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import List, Tuple

import numpy as np
from scipy.optimize import brentq

from .conic import LinearConstraintSet, Status, project_psd_affine_slice, solve_ls_lin
from .errors import NoNormalAvailableError, NonFiniteError, NotInsideError, SolverFailure
from .symcone import SymmetricMatrix, symmetric

_MEMBERSHIP_TOL = 1e-10


class Located(Enum):
    EXTERIOR = "exterior"
    BOUNDARY = "boundary"
    INTERIOR = "interior"


@dataclass(frozen=True)
class ProjectionResult:
    point: np.ndarray
    distance: float
    located: Located


def _rot(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


class Circle:
    kind = "circle"

    def __init__(self, center, radius: float):
        self.center = np.asarray(center, dtype=float).ravel()
        self.radius = float(radius)
        if self.center.size != 2 or not np.all(np.isfinite(self.center)):
            raise ValueError("circle center must be a finite 2-vector")
        if not (self.radius > 0):
            raise ValueError("circle radius must be positive")


class Ellipse:
    """Center, unit semi-major direction, semi-axes l1 >= l2 > 0."""

    kind = "ellipse"

    def __init__(self, center, axis, l1: float, l2: float):
        self.center = np.asarray(center, dtype=float).ravel()
        self.axis = np.asarray(axis, dtype=float).ravel()
        self.l1 = float(l1)
        self.l2 = float(l2)
        if abs(np.linalg.norm(self.axis) - 1.0) > 1e-12:
            raise ValueError("ellipse axis must be unit length")
        if not (self.l1 >= self.l2 > 0):
            raise ValueError("need l1 >= l2 > 0")
        v = self.axis
        v_perp = np.array([-v[1], v[0]])
        self.Q = np.column_stack([v, v_perp])
        self.M = self.Q @ np.diag([self.l1 ** -2, self.l2 ** -2]) @ self.Q.T

    def inflated_matrix(self, eps: float) -> np.ndarray:
        return self.Q @ np.diag([(self.l1 + eps) ** -2, (self.l2 + eps) ** -2]) @ self.Q.T


class Polytope:
    """Convex polygon from vertices; faces are stored with unit outward
    normals a_i and offsets c_i so that the inside is a_i . p <= c_i."""

    kind = "polytope"

    def __init__(self, vertices):
        V = np.asarray(vertices, dtype=float)
        if V.ndim != 2:
            raise ValueError("vertices must be a 2-D array")
        if V.shape[0] == 2 and V.shape[1] != 2:
            V = V.T
        if V.shape[1] != 2 or V.shape[0] < 3:
            raise ValueError("need at least 3 planar vertices")
        # enforce counterclockwise order
        area2 = 0.0
        n = V.shape[0]
        for i in range(n):
            x1, y1 = V[i]
            x2, y2 = V[(i + 1) % n]
            area2 += x1 * y2 - x2 * y1
        if area2 < 0:
            V = V[::-1]
        self.vertices = V
        self.centroid = V.mean(axis=0)
        normals, offsets = [], []
        for i in range(n):
            e = V[(i + 1) % n] - V[i]
            en = np.linalg.norm(e)
            if en < 1e-14:
                raise ValueError("degenerate edge in polytope")
            a = np.array([e[1], -e[0]]) / en  # outward for CCW ordering
            c = float(a @ V[i])
            if a @ self.centroid > c:
                a, c = -a, -c
            normals.append(a)
            offsets.append(c)
        self.face_normals = np.array(normals)
        self.face_offsets = np.array(offsets)
        # convex position: every vertex satisfies every face inequality
        slack = self.face_normals @ V.T - self.face_offsets[:, None]
        if np.max(slack) > 1e-9 * (1.0 + np.max(np.abs(V))):
            raise ValueError("vertices are not in convex position")
        # sanity: the vertex centroid lies inside every derived row
        if np.max(self.face_normals @ self.centroid - self.face_offsets) > 0:
            raise ValueError("derived rows exclude the centroid")


def regular_polygon(center, circumradius: float, n: int, first_vertex_deg: float = 90.0) -> Polytope:
    """Regular n-gon; vertex 0 at the given angle, remaining ccw."""
    center = np.asarray(center, dtype=float)
    angles = np.deg2rad(first_vertex_deg) + 2 * np.pi * np.arange(n) / n
    V = center[None, :] + circumradius * np.column_stack([np.cos(angles), np.sin(angles)])
    return Polytope(V)


class Spectrahedron:
    """Points p with A0 + z1 A1 + z2 A2 >= 0 where z = R(theta) (p - center)."""

    kind = "spectrahedron"

    def __init__(self, center, A0, A1, A2, theta: float = 0.0):
        self.center = np.asarray(center, dtype=float).ravel()
        self.A0 = symmetric(A0)
        self.A1 = symmetric(A1)
        self.A2 = symmetric(A2)
        if not (self.A0.dim == self.A1.dim == self.A2.dim):
            raise ValueError("pencil matrices must share a dimension")
        self.size = self.A0.dim
        self.theta = float(theta)
        self.R = _rot(self.theta)
        if float(np.linalg.eigvalsh(self.A0.array)[0]) < -1e-10:
            raise ValueError("A0 must be PSD (the center must lie inside)")

    def local_coords(self, p) -> np.ndarray:
        return self.R @ (np.asarray(p, dtype=float) - self.center)

    def world_coords(self, z) -> np.ndarray:
        return self.center + self.R.T @ np.asarray(z, dtype=float)

    def slice_matrix(self, p, shrink: float = 0.0) -> np.ndarray:
        z = (1.0 - shrink) * self.local_coords(p)
        return self.A0.array + z[0] * self.A1.array + z[1] * self.A2.array

    def cbf_matrix(self, p, eps_ratio: float = 0.0) -> SymmetricMatrix:
        """Matrix CBF value H(p) = -(A0 + (1-eps) z1 A1 + (1-eps) z2 A2)."""
        return SymmetricMatrix(-self.slice_matrix(p, shrink=eps_ratio))

    def boundary_radius(self, phi: np.ndarray, r_hi: float = 1e3, iters: int = 60) -> np.ndarray:
        """Boundary distance from the center along each local direction."""
        phi = np.atleast_1d(np.asarray(phi, dtype=float))
        cx, sx = np.cos(phi), np.sin(phi)
        lo = np.zeros_like(phi)
        hi = np.full_like(phi, r_hi)
        A0, A1, A2 = self.A0.array, self.A1.array, self.A2.array
        for _ in range(iters):
            mid = 0.5 * (lo + hi)
            Ms = A0 + (mid * cx)[:, None, None] * A1 + (mid * sx)[:, None, None] * A2
            feas = np.linalg.eigvalsh(Ms)[:, 0] >= 0.0
            lo = np.where(feas, mid, lo)
            hi = np.where(feas, hi, mid)
        return lo


Obstacle = (Circle, Ellipse, Polytope, Spectrahedron)


# ------------------------------------------------------------------ membership

def inside_value(obs, p) -> float:
    """Defining-inequality value g(p); the closed obstacle is {g <= 0}."""
    p = np.asarray(p, dtype=float).ravel()
    if isinstance(obs, Circle):
        return float(np.linalg.norm(p - obs.center) - obs.radius)
    if isinstance(obs, Ellipse):
        q = p - obs.center
        return float(q @ obs.M @ q - 1.0)
    if isinstance(obs, Polytope):
        return float(np.max(obs.face_normals @ p - obs.face_offsets))
    if isinstance(obs, Spectrahedron):
        return float(-np.linalg.eigvalsh(obs.slice_matrix(p))[0])
    raise TypeError(f"unknown obstacle type {type(obs)!r}")


def contains(obs, p) -> bool:
    p = np.asarray(p, dtype=float).ravel()
    if not np.all(np.isfinite(p)):
        raise NonFiniteError("query point must be finite")
    return inside_value(obs, p) <= _MEMBERSHIP_TOL


# ------------------------------------------------------------------ projection

def _locate(obs, p) -> Located:
    g = inside_value(obs, p)
    if g > _MEMBERSHIP_TOL:
        return Located.EXTERIOR
    if g < -_MEMBERSHIP_TOL:
        return Located.INTERIOR
    return Located.BOUNDARY


def _project_ellipse_exterior(obs: Ellipse, p) -> np.ndarray:
    """Secular-equation projection in the axis-aligned frame: Newton on the
    Lagrange multiplier with a bisection-safe bracket, tolerance 1e-12."""
    q = obs.Q.T @ (p - obs.center)
    a2 = np.array([obs.l1 ** 2, obs.l2 ** 2])

    def f(t):
        return float(np.sum(a2 * q ** 2 / (a2 + t) ** 2) - 1.0)

    t_hi = 1.0
    while f(t_hi) > 0.0:
        t_hi *= 2.0
        if t_hi > 1e18:
            raise SolverFailure("ellipse secular bracket exhausted")
    t = brentq(f, 0.0, t_hi, xtol=1e-12, rtol=8.9e-16, maxiter=200)
    y = q * a2 / (a2 + t)
    return obs.center + obs.Q @ y


def project(obs, p) -> ProjectionResult:
    """Euclidean projection onto the closed obstacle."""
    p = np.asarray(p, dtype=float).ravel()
    loc = _locate(obs, p)
    if loc is not Located.EXTERIOR:
        return ProjectionResult(p.copy(), 0.0, loc)
    if isinstance(obs, Circle):
        delta = p - obs.center
        nd = np.linalg.norm(delta)
        point = obs.center + (min(obs.radius, nd) / nd) * delta
    elif isinstance(obs, Ellipse):
        point = _project_ellipse_exterior(obs, p)
    elif isinstance(obs, Polytope):
        rep = solve_ls_lin(p, LinearConstraintSet(obs.face_normals, obs.face_offsets))
        if rep.status is not Status.OPTIMAL:
            raise SolverFailure(f"polytope projection failed: {rep.status}")
        point = rep.solution
    elif isinstance(obs, Spectrahedron):
        z0 = obs.local_coords(p)
        z, status = project_psd_affine_slice(obs.A0.array, obs.A1.array, obs.A2.array, z0)
        if status is not Status.OPTIMAL:
            raise SolverFailure(f"spectrahedron projection failed: {status}")
        point = obs.world_coords(z)
    else:
        raise TypeError(f"unknown obstacle type {type(obs)!r}")
    return ProjectionResult(point, float(np.linalg.norm(p - point)), Located.EXTERIOR)


# ------------------------------------------------------------------ depth

def _max_quadratic_on_disk(M: np.ndarray, w: np.ndarray, R: float) -> float:
    """max over ||delta|| <= R of (w + delta)' M (w + delta) for M > 0.

    Trust-region style: in the eigenbasis the maximizer satisfies
    delta_i = lam_i w_i / (nu - lam_i) with nu > lam_max; the multiplier is
    found by a monotone 1-D root find.
    """
    lam, Q = np.linalg.eigh(M)
    wq = Q.T @ w
    lam_max = lam[-1]
    base = float(wq @ (lam * wq))
    if R == 0.0:
        return base

    def norm2(nu):
        return float(np.sum((lam * wq / (nu - lam)) ** 2)) - R * R

    # If w has no component on the top eigenspace the sup is attained in that
    # eigenspace directly (hard case).
    top = np.abs(lam - lam_max) <= 1e-14 * (1 + abs(lam_max))
    if np.all(np.abs(wq[top]) <= 1e-14 * (1 + np.linalg.norm(w))):
        nu_lo = lam_max * (1 + 1e-12) + 1e-18
        if norm2(nu_lo) <= 0.0:
            # remaining components never reach radius R: fill along top space
            rest = ~top
            d_rest = np.zeros_like(wq)
            d_rest[rest] = lam[rest] * wq[rest] / (lam_max - lam[rest])
            r2 = max(R * R - float(np.sum(d_rest ** 2)), 0.0)
            y = wq + d_rest
            y_val = float(y @ (lam * y)) + lam_max * r2
            return y_val
    nu_hi = lam_max + max(1.0, float(np.linalg.norm(lam * wq))) / max(R, 1e-300)
    while norm2(nu_hi) > 0.0:
        nu_hi *= 2.0
    nu_lo = lam_max * (1 + 1e-15) + 1e-300
    for _ in range(200):
        nu_mid = 0.5 * (nu_lo + nu_hi)
        if norm2(nu_mid) > 0.0:
            nu_lo = nu_mid
        else:
            nu_hi = nu_mid
    delta = lam * wq / (nu_hi - lam)
    y = wq + delta
    return float(y @ (lam * y))


def depth(obs, p) -> float:
    """Radius of the largest disk centered at p inside the obstacle."""
    p = np.asarray(p, dtype=float).ravel()
    if not contains(obs, p):
        raise NotInsideError("depth requires a point inside the obstacle")
    if isinstance(obs, Circle):
        return float(obs.radius - np.linalg.norm(p - obs.center))
    if isinstance(obs, Polytope):
        # value of the inscribed-disk LP max R s.t. a_i.p + R ||a_i|| <= c_i
        return float(max(np.min(obs.face_offsets - obs.face_normals @ p), 0.0))
    if isinstance(obs, Ellipse):
        # bisection on R; feasibility = the R-disk stays inside the ellipse,
        # checked exactly through the disk maximum of the quadratic form.
        w = p - obs.center
        lo, hi = 0.0, obs.l2
        if _max_quadratic_on_disk(obs.M, w, hi) <= 1.0:
            return float(hi)
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if _max_quadratic_on_disk(obs.M, w, mid) <= 1.0:
                lo = mid
            else:
                hi = mid
        return float(lo)
    if isinstance(obs, Spectrahedron):
        # direction-sampled bisection: documented accuracy about +/-2%,
        # used only for interior recovery.
        z = obs.local_coords(p)
        phis = np.linspace(0.0, 2 * np.pi, 64, endpoint=False)
        dirs = np.column_stack([np.cos(phis), np.sin(phis)])
        A0, A1, A2 = obs.A0.array, obs.A1.array, obs.A2.array
        lo = np.zeros(64)
        hi = np.full(64, 1e3)
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            pts = z[None, :] + mid[:, None] * dirs
            Ms = A0 + pts[:, 0, None, None] * A1 + pts[:, 1, None, None] * A2
            feas = np.linalg.eigvalsh(Ms)[:, 0] >= 0.0
            lo = np.where(feas, mid, lo)
            hi = np.where(feas, hi, mid)
        return float(np.min(lo))
    raise TypeError(f"unknown obstacle type {type(obs)!r}")


def signed_distance(obs, p) -> float:
    """Euclidean distance to the obstacle, negative of depth when inside."""
    p = np.asarray(p, dtype=float).ravel()
    if contains(obs, p):
        return -depth(obs, p)
    return project(obs, p).distance


# ------------------------------------------------------------------ normals

def outward_normal(obs, p) -> np.ndarray:
    """Unit outward normal-cone element at a point on (or near) the boundary."""
    p = np.asarray(p, dtype=float).ravel()
    if isinstance(obs, Circle):
        delta = p - obs.center
        nd = np.linalg.norm(delta)
        if nd < 1e-12:
            raise NoNormalAvailableError("normal undefined at the circle center")
        return delta / nd
    if isinstance(obs, Ellipse):
        g = 2.0 * obs.M @ (p - obs.center)
        ng = np.linalg.norm(g)
        if ng < 1e-12:
            raise NoNormalAvailableError("normal undefined at the ellipse center")
        return g / ng
    if isinstance(obs, Polytope):
        vals = obs.face_normals @ p - obs.face_offsets
        top = np.max(vals)
        active = vals >= top - 1e-9 * (1.0 + abs(top))
        n = obs.face_normals[active].sum(axis=0)
        nn = np.linalg.norm(n)
        if nn < 1e-12:
            raise NoNormalAvailableError("degenerate face-normal combination")
        return n / nn
    if isinstance(obs, Spectrahedron):
        Mz = obs.slice_matrix(p)
        w, Q = np.linalg.eigh(Mz)
        q1 = Q[:, 0]
        dz = -np.array([q1 @ obs.A1.array @ q1, q1 @ obs.A2.array @ q1])
        nd = np.linalg.norm(dz)
        if nd < 1e-12:
            raise NoNormalAvailableError("flat eigenvalue gradient on the pencil")
        return obs.R.T @ (dz / nd)
    raise TypeError(f"unknown obstacle type {type(obs)!r}")


# ------------------------------------------------------------------ sampling

def boundary_points(obs, n: int = 256) -> np.ndarray:
    """n points tracing the obstacle boundary (for rendering and sampling)."""
    if isinstance(obs, Circle):
        t = np.linspace(0.0, 2 * np.pi, n, endpoint=False)
        return obs.center + obs.radius * np.column_stack([np.cos(t), np.sin(t)])
    if isinstance(obs, Ellipse):
        t = np.linspace(0.0, 2 * np.pi, n, endpoint=False)
        local = np.column_stack([obs.l1 * np.cos(t), obs.l2 * np.sin(t)])
        return obs.center + local @ obs.Q.T
    if isinstance(obs, Polytope):
        V = obs.vertices
        nv = V.shape[0]
        per = max(n // nv, 1)
        pts = []
        for i in range(nv):
            a, b = V[i], V[(i + 1) % nv]
            for s in np.linspace(0.0, 1.0, per, endpoint=False):
                pts.append(a + s * (b - a))
        return np.array(pts)
    if isinstance(obs, Spectrahedron):
        phis = np.linspace(0.0, 2 * np.pi, n, endpoint=False)
        rs = obs.boundary_radius(phis)
        local = np.column_stack([rs * np.cos(phis), rs * np.sin(phis)])
        return local @ obs.R + obs.center  # (R^T local^T)^T = local R
    raise TypeError(f"unknown obstacle type {type(obs)!r}")


def sample_inside(obs, n: int, rng: np.random.Generator) -> np.ndarray:
    """n points of the closed obstacle (distribution is arbitrary)."""
    if isinstance(obs, Circle):
        r = obs.radius * np.sqrt(rng.uniform(size=n))
        t = rng.uniform(0.0, 2 * np.pi, size=n)
        return obs.center + np.column_stack([r * np.cos(t), r * np.sin(t)])
    if isinstance(obs, Ellipse):
        r = np.sqrt(rng.uniform(size=n))
        t = rng.uniform(0.0, 2 * np.pi, size=n)
        disk = np.column_stack([r * np.cos(t), r * np.sin(t)])
        return obs.center + (disk * np.array([obs.l1, obs.l2])) @ obs.Q.T
    if isinstance(obs, Polytope):
        wgt = rng.dirichlet(np.ones(obs.vertices.shape[0]), size=n)
        return wgt @ obs.vertices
    if isinstance(obs, Spectrahedron):
        phis = np.linspace(0.0, 2 * np.pi, 128, endpoint=False)
        rs = obs.boundary_radius(phis)
        u = rng.uniform(size=n)
        idx = rng.integers(0, 128, size=n)
        rad = np.sqrt(u) * rs[idx]
        local = np.column_stack([rad * np.cos(phis[idx]), rad * np.sin(phis[idx])])
        return local @ obs.R + obs.center
    raise TypeError(f"unknown obstacle type {type(obs)!r}")


# ------------------------------------------------------------------ CBF builders

def cbf_circle(obs: Circle, C_pos: np.ndarray, eps: float) -> Tuple[np.ndarray, np.ndarray, float]:
    """Quadratic coefficients (M, v, d) of the circle barrier

        h(x) = (r + eps)^2 - (C x - p_C)' (C x - p_C)
             = x' M x + 2 v' x + d.
    """
    C = np.asarray(C_pos, dtype=float)
    M = -C.T @ C
    v = C.T @ obs.center
    d = float((obs.radius + eps) ** 2 - obs.center @ obs.center)
    return M, v, d


def cbf_ellipse(obs: Ellipse, C_pos: np.ndarray, eps: float) -> Tuple[np.ndarray, np.ndarray, float]:
    """Quadratic coefficients of the ellipse barrier with inflated axes:

        h(x) = 1 - (C x - p)' M_eps (C x - p).
    """
    C = np.asarray(C_pos, dtype=float)
    Me = obs.inflated_matrix(eps)
    M = -C.T @ Me @ C
    v = C.T @ Me @ obs.center
    d = float(1.0 - obs.center @ Me @ obs.center)
    return M, v, d


def eval_quadratic(coeffs, x) -> float:
    M, v, d = coeffs
    x = np.asarray(x, dtype=float).ravel()
    return float(x @ M @ x + 2.0 * v @ x + d)


def polytope_face_values(obs: Polytope, pos: np.ndarray, eps: float) -> np.ndarray:
    """Per-face barrier values h_i(p) = a_i.p - c_i - eps (nonnegative on the
    far side of face i; the eps shift moves each face line outward)."""
    return obs.face_normals @ pos - obs.face_offsets - eps


def polytope_combinatorial_rows(obs: Polytope, x_k, dyn, C_pos, eps: float,
                                gamma: float) -> LinearConstraintSet:
    """Safe-input rows for the polytope: keep at least one face value large.

    Row i encodes  h_i(A x + B u) >= h_i(x_k) - gamma (h_max + |h_i - h_max|)
    with h_max = max_i h_i(x_k); equivalently the right side is
    (1 + gamma) h_i - 2 gamma h_max.
    """
    if not (0.0 <= gamma <= 1.0):
        raise ValueError("gamma must lie in [0, 1]")
    x_k = np.asarray(x_k, dtype=float).ravel()
    C = np.asarray(C_pos, dtype=float)
    A, B = np.asarray(dyn.A, dtype=float), np.asarray(dyn.B, dtype=float)
    pos = C @ x_k
    hvals = polytope_face_values(obs, pos, eps)
    h_max = float(np.max(hvals))
    drift = C @ A @ x_k
    gain = C @ B
    G_rows, h_rows = [], []
    for i in range(obs.face_normals.shape[0]):
        a = obs.face_normals[i]
        rhs = hvals[i] - gamma * (h_max + abs(hvals[i] - h_max))
        # a.(C A x + C B u) - c_i - eps >= rhs
        G_rows.append(-(a @ gain))
        h_rows.append(float(a @ drift - obs.face_offsets[i] - eps - rhs))
    return LinearConstraintSet(np.array(G_rows), np.array(h_rows))


def spectrahedron_indefinite_pair(obs: Spectrahedron, x_k, dyn, C_pos,
                                  eps_ratio: float, gamma: float,
                                  c_perp: float) -> Tuple[SymmetricMatrix, List[SymmetricMatrix]]:
    """LMI data (F0, [F_i]) for the spectrahedron safe-input constraint

        H(A x + B u) >= (1 + c_perp) H(x_k) - (gamma + c_perp) lam_max I,

    with H the shrunken-coordinate barrier and lam_max its top eigenvalue at
    x_k.  F(u) = F0 + sum u_i F_i is the constraint rearranged to F(u) >= 0;
    H is affine in position so the rearrangement is exact.
    """
    if not (0.0 <= gamma <= 1.0 and 0.0 <= c_perp <= 1.0 and 0.0 <= eps_ratio < 1.0):
        raise ValueError("parameter out of range")
    x_k = np.asarray(x_k, dtype=float).ravel()
    C = np.asarray(C_pos, dtype=float)
    A, B = np.asarray(dyn.A, dtype=float), np.asarray(dyn.B, dtype=float)

    def Hmat(pos):
        return obs.cbf_matrix(pos, eps_ratio).array

    Hk = Hmat(C @ x_k)
    lam_max = float(np.linalg.eigvalsh(Hk)[-1])
    drift_pos = C @ A @ x_k
    H_drift = Hmat(drift_pos)
    F0 = H_drift - (1.0 + c_perp) * Hk + (gamma + c_perp) * lam_max * np.eye(obs.size)
    Fs = []
    m = B.shape[1]
    for i in range(m):
        e = np.zeros(m)
        e[i] = 1.0
        Fs.append(SymmetricMatrix(Hmat(drift_pos + C @ B @ e) - H_drift))
    return SymmetricMatrix(F0), Fs
