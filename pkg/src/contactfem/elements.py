"""Quadrangle element kernel: shape functions, quadrature, plane-strain
force/stiffness/mass on a given (possibly deformed) nodal configuration.

Element kinds: "Q1" (4-node bilinear) and "Q2" (8-node serendipity).
Reference square is [-1,1]^2; node order is counterclockwise corners, then
mid-side nodes 4..7 between corners (0,1),(1,2),(2,3),(3,0) for Q2.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

Q1 = "Q1"
Q2 = "Q2"
NODES_PER_ELEMENT = {Q1: 4, Q2: 8}

# reference coordinates of element nodes
_NODES_Q1 = np.array([(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)])
_NODES_Q2 = np.array(
    [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0),
     (0.0, -1.0), (1.0, 0.0), (0.0, 1.0), (-1.0, 0.0)]
)
REFERENCE_NODES = {Q1: _NODES_Q1, Q2: _NODES_Q2}


class ElementGeometryError(ValueError):
    """Raised when an element has a non-positive Jacobian at a quadrature point."""


def shape_eval(kind: str, xi: float, eta: float):
    """Shape function values and parametric gradients at one point.

    Returns (values (n,), gradients (n, 2)) with n = 4 or 8.
    """
    if not (-1.0 - 1e-12 <= xi <= 1.0 + 1e-12 and -1.0 - 1e-12 <= eta <= 1.0 + 1e-12):
        raise ValueError(f"parametric point ({xi}, {eta}) outside reference square")
    if kind == Q1:
        vals = np.empty(4)
        grads = np.empty((4, 2))
        for a, (xa, ya) in enumerate(_NODES_Q1):
            vals[a] = 0.25 * (1 + xa * xi) * (1 + ya * eta)
            grads[a, 0] = 0.25 * xa * (1 + ya * eta)
            grads[a, 1] = 0.25 * ya * (1 + xa * xi)
        return vals, grads
    if kind == Q2:
        vals = np.empty(8)
        grads = np.empty((8, 2))
        for a in range(4):
            xa, ya = _NODES_Q2[a]
            vals[a] = 0.25 * (1 + xa * xi) * (1 + ya * eta) * (xa * xi + ya * eta - 1)
            grads[a, 0] = 0.25 * xa * (1 + ya * eta) * (2 * xa * xi + ya * eta)
            grads[a, 1] = 0.25 * ya * (1 + xa * xi) * (xa * xi + 2 * ya * eta)
        for a in range(4, 8):
            xa, ya = _NODES_Q2[a]
            if xa == 0.0:  # mid-side on an eta = const edge
                vals[a] = 0.5 * (1 - xi * xi) * (1 + ya * eta)
                grads[a, 0] = -xi * (1 + ya * eta)
                grads[a, 1] = 0.5 * ya * (1 - xi * xi)
            else:
                vals[a] = 0.5 * (1 + xa * xi) * (1 - eta * eta)
                grads[a, 0] = 0.5 * xa * (1 - eta * eta)
                grads[a, 1] = -eta * (1 + xa * xi)
        return vals, grads
    raise ValueError(f"unknown element kind {kind!r}")


def quadrature_rule(kind: str):
    """Gauss rule on the reference square: 2x2 for Q1, 3x3 for Q2.

    Returns (points (nq, 2), weights (nq,)); weights sum to 4.
    """
    if kind == Q1:
        g = 1.0 / np.sqrt(3.0)
        pts_1d, w_1d = np.array([-g, g]), np.array([1.0, 1.0])
    elif kind == Q2:
        g = np.sqrt(0.6)
        pts_1d, w_1d = np.array([-g, 0.0, g]), np.array([5.0, 8.0, 5.0]) / 9.0
    else:
        raise ValueError(f"unknown element kind {kind!r}")
    pts = np.array([(x, y) for y in pts_1d for x in pts_1d])
    wts = np.array([wy * wx for wy in w_1d for wx in w_1d])
    return pts, wts


@dataclass(frozen=True)
class ShapeSet:
    """Shape values/gradients tabulated at the element's quadrature points."""

    kind: str
    points: np.ndarray     # (nq, 2)
    weights: np.ndarray    # (nq,)
    values: np.ndarray     # (nq, n)
    gradients: np.ndarray  # (nq, n, 2) d(phi)/d(xi, eta)


_SHAPE_CACHE: dict[str, ShapeSet] = {}


def shape_set(kind: str) -> ShapeSet:
    if kind not in _SHAPE_CACHE:
        pts, wts = quadrature_rule(kind)
        vals = np.empty((len(pts), NODES_PER_ELEMENT[kind]))
        grads = np.empty((len(pts), NODES_PER_ELEMENT[kind], 2))
        for q, (xi, eta) in enumerate(pts):
            vals[q], grads[q] = shape_eval(kind, xi, eta)
        _SHAPE_CACHE[kind] = ShapeSet(kind, pts, wts, vals, grads)
    return _SHAPE_CACHE[kind]


# ---------------------------------------------------------------------------
# per-element geometry
# ---------------------------------------------------------------------------

def jacobians(kind: str, coords: np.ndarray):
    """Jacobian data at each quadrature point of one element.

    coords: (n, 2) current nodal positions.
    Returns (detJ (nq,), dN_dx (nq, n, 2)) where dN_dx are gradients with
    respect to the physical coordinates.
    """
    ss = shape_set(kind)
    # J[q, a, b] = d x_a / d xi_b
    J = np.einsum("na,qnb->qab", coords, ss.gradients)
    detJ = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
    invJ = np.empty_like(J)
    invJ[:, 0, 0] = J[:, 1, 1]
    invJ[:, 0, 1] = -J[:, 0, 1]
    invJ[:, 1, 0] = -J[:, 1, 0]
    invJ[:, 1, 1] = J[:, 0, 0]
    invJ /= detJ[:, None, None]
    dN_dx = np.einsum("qnb,qba->qna", ss.gradients, invJ)
    return detJ, dN_dx


def min_jacobian(kind: str, coords: np.ndarray) -> float:
    ss = shape_set(kind)
    J = np.einsum("na,qnb->qab", coords, ss.gradients)
    detJ = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
    return float(detJ.min())


def element_area(kind: str, coords: np.ndarray) -> float:
    ss = shape_set(kind)
    detJ, _ = jacobians(kind, coords)
    return float((ss.weights * detJ).sum())


def _check_positive(detJ, element_id=None):
    if np.any(detJ <= 0.0):
        tag = "" if element_id is None else f" in element {element_id}"
        raise ElementGeometryError(
            f"non-positive Jacobian{tag}: min detJ = {detJ.min():.3e}"
        )


# ---------------------------------------------------------------------------
# force / stiffness / mass
# ---------------------------------------------------------------------------

def strain_at_points(kind: str, coords: np.ndarray, u: np.ndarray):
    """Small-strain tensor of the displacement field u on configuration `coords`.

    Returns (nq, 3) rows [eps_xx, eps_yy, gamma_xy] (engineering shear).
    """
    _, dN_dx = jacobians(kind, coords)
    H = np.einsum("qna,nc->qca", dN_dx, u)  # H[q, c, a] = d u_c / d x_a
    eps = np.empty((len(H), 3))
    eps[:, 0] = H[:, 0, 0]
    eps[:, 1] = H[:, 1, 1]
    eps[:, 2] = H[:, 0, 1] + H[:, 1, 0]
    return eps


def element_internal_force(kind: str, coords: np.ndarray, sigma_qp: np.ndarray,
                           element_id=None) -> np.ndarray:
    """Nodal force vector of the Cauchy stress field integrated on `coords`.

    sigma_qp: (nq, >=3) rows [s_xx, s_yy, s_xy, ...]; extra columns (s_zz)
    are ignored by the in-plane integral. Returns (n, 2).
    """
    ss = shape_set(kind)
    detJ, dN_dx = jacobians(kind, coords)
    _check_positive(detJ, element_id)
    w = ss.weights * detJ
    f = np.empty((NODES_PER_ELEMENT[kind], 2))
    f[:, 0] = np.einsum("q,qn->n", w * sigma_qp[:, 0], dN_dx[:, :, 0]) \
        + np.einsum("q,qn->n", w * sigma_qp[:, 2], dN_dx[:, :, 1])
    f[:, 1] = np.einsum("q,qn->n", w * sigma_qp[:, 1], dN_dx[:, :, 1]) \
        + np.einsum("q,qn->n", w * sigma_qp[:, 2], dN_dx[:, :, 0])
    return f


def element_stiffness(kind: str, coords: np.ndarray, C: np.ndarray,
                      element_id=None) -> np.ndarray:
    """Linear-elastic stiffness matrix on the given configuration.

    C: (3, 3) plane-strain constitutive matrix acting on
    [eps_xx, eps_yy, gamma_xy]. Returns (2n, 2n), dof order
    (ux0, uy0, ux1, uy1, ...).
    """
    ss = shape_set(kind)
    detJ, dN_dx = jacobians(kind, coords)
    _check_positive(detJ, element_id)
    n = NODES_PER_ELEMENT[kind]
    K = np.zeros((2 * n, 2 * n))
    for q in range(len(ss.weights)):
        B = np.zeros((3, 2 * n))
        B[0, 0::2] = dN_dx[q, :, 0]
        B[1, 1::2] = dN_dx[q, :, 1]
        B[2, 0::2] = dN_dx[q, :, 1]
        B[2, 1::2] = dN_dx[q, :, 0]
        K += (ss.weights[q] * detJ[q]) * (B.T @ C @ B)
    return K


def lumped_mass(kind: str, coords: np.ndarray, rho: float) -> np.ndarray:
    """Diagonal nodal masses. Row-sum lumping for Q1; HRZ diagonal scaling
    for Q2 (row-sum on serendipity elements can go negative at corners).

    Returns (n,) with sum = rho * element area.
    """
    if rho <= 0:
        raise ValueError("density must be positive")
    ss = shape_set(kind)
    detJ, _ = jacobians(kind, coords)
    _check_positive(detJ)
    w = ss.weights * detJ
    area = w.sum()
    if kind == Q1:
        return rho * np.einsum("q,qn->n", w, ss.values)
    diag = np.einsum("q,qn->n", w, ss.values ** 2)
    return rho * area * diag / diag.sum()


# ---------------------------------------------------------------------------
# vectorized whole-group kernels (one element kind + material per group)
# ---------------------------------------------------------------------------

class ElementGroup:
    """Vectorized kernels over a block of same-kind elements.

    Holds the connectivity and tabulated reference data; per-call inputs are
    the current nodal coordinate array of the whole system.
    """

    def __init__(self, kind: str, conn: np.ndarray, element_ids: np.ndarray):
        self.kind = kind
        self.conn = np.asarray(conn, dtype=int)
        self.element_ids = np.asarray(element_ids, dtype=int)
        ss = shape_set(kind)
        self.weights = ss.weights
        self.values = ss.values
        self.ref_grads = ss.gradients
        self.n_elem = len(self.conn)
        self.n_nodes = NODES_PER_ELEMENT[kind]

    def geometry(self, coords: np.ndarray):
        """detJ (E, nq) and physical gradients (E, nq, n, 2) on `coords`."""
        xe = coords[self.conn]  # (E, n, 2)
        J = np.einsum("ena,qnb->eqab", xe, self.ref_grads)
        detJ = J[..., 0, 0] * J[..., 1, 1] - J[..., 0, 1] * J[..., 1, 0]
        if np.any(detJ <= 0.0):
            bad = self.element_ids[np.any(detJ <= 0.0, axis=1)]
            raise ElementGeometryError(
                f"non-positive Jacobian in elements {bad.tolist()[:8]}"
            )
        invJ = np.empty_like(J)
        invJ[..., 0, 0] = J[..., 1, 1]
        invJ[..., 0, 1] = -J[..., 0, 1]
        invJ[..., 1, 0] = -J[..., 1, 0]
        invJ[..., 1, 1] = J[..., 0, 0]
        invJ /= detJ[..., None, None]
        dN_dx = np.einsum("qnb,eqba->eqna", self.ref_grads, invJ)
        return detJ, dN_dx

    def strain_increment(self, dN_dx: np.ndarray, du: np.ndarray) -> np.ndarray:
        """(E, nq, 3) strain increments of the displacement increment du."""
        due = du[self.conn]  # (E, n, 2)
        H = np.einsum("eqna,enc->eqca", dN_dx, due)
        deps = np.empty(H.shape[:2] + (3,))
        deps[..., 0] = H[..., 0, 0]
        deps[..., 1] = H[..., 1, 1]
        deps[..., 2] = H[..., 0, 1] + H[..., 1, 0]
        return deps

    def internal_force(self, detJ, dN_dx, sigma: np.ndarray, out: np.ndarray):
        """Scatter-add nodal forces of stress field sigma (E, nq, >=3) into out."""
        w = self.weights[None, :] * detJ  # (E, nq)
        fx = np.einsum("eq,eqn->en", w * sigma[..., 0], dN_dx[..., 0]) \
            + np.einsum("eq,eqn->en", w * sigma[..., 2], dN_dx[..., 1])
        fy = np.einsum("eq,eqn->en", w * sigma[..., 1], dN_dx[..., 1]) \
            + np.einsum("eq,eqn->en", w * sigma[..., 2], dN_dx[..., 0])
        np.add.at(out[:, 0], self.conn, fx)
        np.add.at(out[:, 1], self.conn, fy)

    def lumped_mass(self, coords: np.ndarray, rho: float, out: np.ndarray):
        """Scatter-add lumped nodal masses into out (per element: see lumped_mass)."""
        xe = coords[self.conn]
        J = np.einsum("ena,qnb->eqab", xe, self.ref_grads)
        detJ = J[..., 0, 0] * J[..., 1, 1] - J[..., 0, 1] * J[..., 1, 0]
        w = self.weights[None, :] * detJ
        if self.kind == Q1:
            m = rho * np.einsum("eq,qn->en", w, self.values)
        else:
            area = w.sum(axis=1)
            diag = np.einsum("eq,qn->en", w, self.values ** 2)
            m = rho * area[:, None] * diag / diag.sum(axis=1)[:, None]
        np.add.at(out, self.conn, m)

    def areas(self, coords: np.ndarray) -> np.ndarray:
        xe = coords[self.conn]
        J = np.einsum("ena,qnb->eqab", xe, self.ref_grads)
        detJ = J[..., 0, 0] * J[..., 1, 1] - J[..., 0, 1] * J[..., 1, 0]
        return (self.weights[None, :] * detJ).sum(axis=1)
