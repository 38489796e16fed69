"""Contact surface tracking on deforming meshes.

A surface is an ordered node chain; traversal keeps the body material on the
left so the outward normal is the right-hand perpendicular of the tangent.
Slave/master pairing, node-to-segment projection and the common arc-length
parametrization used by the coupling matrices live here.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class SurfaceError(ValueError):
    pass


@dataclass
class ContactSurface:
    body_id: int
    node_ids: np.ndarray   # (m,) global node ids in chain order
    pos: np.ndarray        # (m, 2) current positions, mm
    tangents: np.ndarray   # (m, 2) unit node tangents (chain direction)
    normals: np.ndarray    # (m, 2) unit outward node normals
    seg_len: np.ndarray    # (m-1,) segment lengths, mm

    @property
    def n_nodes(self) -> int:
        return len(self.node_ids)

    @property
    def n_segments(self) -> int:
        return len(self.seg_len)

    def arc_coords(self) -> np.ndarray:
        """Cumulative arc length from the chain start, (m,)."""
        s = np.zeros(self.n_nodes)
        np.cumsum(self.seg_len, out=s[1:])
        return s


def _right_perp(v: np.ndarray) -> np.ndarray:
    out = np.empty_like(v)
    out[..., 0] = v[..., 1]
    out[..., 1] = -v[..., 0]
    return out


def build_surface(node_ids, coords: np.ndarray, body_id: int = 0) -> ContactSurface:
    """Surface geometry of a chain at the given nodal coordinates.

    Node tangents are arc-length-weighted averages of the adjacent segment
    directions (normals follow by right-hand perpendicular, so the pair
    stays orthonormal).
    """
    ids = np.asarray(node_ids, dtype=int)
    if len(ids) < 2:
        raise SurfaceError("a contact chain needs at least 2 nodes")
    pos = coords[ids]
    d = np.diff(pos, axis=0)
    seg_len = np.hypot(d[:, 0], d[:, 1])
    if np.any(seg_len < 1e-12):
        k = int(np.argmin(seg_len))
        raise SurfaceError(f"collapsed segment {k} (nodes {ids[k]}-{ids[k + 1]})")
    seg_tan = d / seg_len[:, None]
    tangents = np.empty_like(pos)
    tangents[0] = seg_tan[0]
    tangents[-1] = seg_tan[-1]
    if len(ids) > 2:
        w = seg_len[:-1, None] * seg_tan[:-1] + seg_len[1:, None] * seg_tan[1:]
        norm = np.hypot(w[:, 0], w[:, 1])
        if np.any(norm < 1e-12):
            raise SurfaceError("chain folds back on itself (opposite tangents)")
        tangents[1:-1] = w / norm[:, None]
    return ContactSurface(body_id, ids, pos, tangents, _right_perp(tangents), seg_len)


def update_surfaces(slave_ids, master_ids, coords: np.ndarray,
                    slave_body: int = 1, master_body: int = 2):
    """Rebuild the slave/master pair on the current coordinates."""
    return (build_surface(slave_ids, coords, slave_body),
            build_surface(master_ids, coords, master_body))


@dataclass
class Projection:
    segment: int      # master segment index
    local: float      # coordinate in [0, 1] along the segment
    gap: float        # signed distance along the master normal; > 0 separated
    normal: np.ndarray
    point: np.ndarray  # closest point on the master chain
    unprojected: bool  # beyond a chain end


def project_node_to_master(point, master: ContactSurface) -> Projection:
    """Closest-point projection onto the master polyline.

    Gap is the signed distance along the master segment normal (positive =
    separated, negative = penetration). Ties go to the lower segment id;
    points beyond the chain ends are flagged unprojected.
    """
    p = np.asarray(point, dtype=float)
    a = master.pos[:-1]
    t = np.diff(master.pos, axis=0)
    L2 = master.seg_len ** 2
    xi_raw = ((p - a) * t).sum(axis=1) / L2
    xi = np.clip(xi_raw, 0.0, 1.0)
    closest = a + xi[:, None] * t
    d2 = ((p - closest) ** 2).sum(axis=1)
    k = int(np.argmin(d2))  # argmin returns the first (lowest id) on ties
    n_seg = _right_perp(t[k] / master.seg_len[k])
    gap = float(np.dot(p - closest[k], n_seg))
    beyond = (k == 0 and xi_raw[0] < 0.0) or \
        (k == master.n_segments - 1 and xi_raw[-1] > 1.0)
    return Projection(k, float(xi[k]), gap, n_seg, closest[k], beyond)


@dataclass
class GapField:
    """Per-slave-node projection data. normal_jump is the displacement-jump
    convention: negative when separated, positive when penetrating."""

    normal_jump: np.ndarray      # (m,) = -gap
    slip_increment: np.ndarray   # (m,) filled by the contact solver
    segment: np.ndarray          # (m,) master segment id
    local: np.ndarray            # (m,) in [0, 1]
    unprojected: np.ndarray      # (m,) bool


def gap_field(slave: ContactSurface, master: ContactSurface) -> GapField:
    m = slave.n_nodes
    out = GapField(np.zeros(m), np.zeros(m), np.zeros(m, dtype=int),
                   np.zeros(m), np.zeros(m, dtype=bool))
    for k in range(m):
        pr = project_node_to_master(slave.pos[k], master)
        out.normal_jump[k] = -pr.gap
        out.segment[k] = pr.segment
        out.local[k] = pr.local
        out.unprojected[k] = pr.unprojected
    return out


@dataclass
class CurvilinearFrame:
    """Common arc-length parametrization of a slave/master chain pair.

    Slave abscissas are arc lengths along the slave chain (origin node at
    s = 0); master abscissas come from projecting master nodes onto the
    slave chain, extended linearly beyond the chain ends. dual_breaks are
    the midpoint boundaries carrying piecewise-constant multipliers.
    """

    origin: int               # index into the slave chain
    slave_s: np.ndarray       # (m,)
    master_s: np.ndarray      # (n,) in master chain order
    master_reversed: bool     # master abscissas decrease along the chain
    dual_breaks: np.ndarray   # (m+1,) P0 support boundaries on the slave chain


def build_curvilinear_frame(slave: ContactSurface, master: ContactSurface,
                            origin: int = 0) -> CurvilinearFrame:
    s = slave.arc_coords()
    s = s - s[origin]
    master_s = np.empty(master.n_nodes)
    for j in range(master.n_nodes):
        pr = project_node_to_master(master.pos[j], slave)
        a = slave.pos[pr.segment]
        t = slave.pos[pr.segment + 1] - a
        xi = float(np.dot(master.pos[j] - a, t) / np.dot(t, t))  # unclamped
        master_s[j] = s[pr.segment] + xi * slave.seg_len[pr.segment]
    d = np.diff(master_s)
    if np.all(d > 0):
        reversed_ = False
    elif np.all(d < 0):
        reversed_ = True
    else:
        bad = np.nonzero(d * d[0] <= 0)[0]
        ids = [(int(master.node_ids[j]), int(master.node_ids[j + 1])) for j in bad[:4]]
        raise SurfaceError(
            f"master projection onto the slave chain is not monotone "
            f"(folded surface?) at node pairs {ids}"
        )
    z = np.empty(slave.n_nodes + 1)
    z[0] = s[0]
    z[-1] = s[-1]
    z[1:-1] = 0.5 * (s[:-1] + s[1:])
    return CurvilinearFrame(origin, s, master_s, reversed_, z)
