"""Mesh representation, structured generators and the plain-text mesh format.

File format (coordinates in mm)::

    mesh2d v1 Q1
    nodes <count>
    <id> <x> <y>
    ...
    elements <count>
    <id> <body> <n1> <n2> <n3> <n4> [<n5> ... <n8>]
    ...
    set <dirichlet|neumann|contact> <body> <node ids...>

Contact sets are ordered chains; traversing a chain keeps the body material
on the left, so the outward normal is the right-hand perpendicular of the
tangent.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .elements import NODES_PER_ELEMENT, Q1, Q2, min_jacobian, shape_set


class MeshError(ValueError):
    pass


class MeshFormatError(MeshError):
    def __init__(self, path, line_no, message):
        super().__init__(f"{path}:{line_no}: {message}")
        self.line_no = line_no


@dataclass
class Mesh2D:
    nodes: np.ndarray      # (N, 2) float, mm
    elements: np.ndarray   # (E, 4 or 8) int
    kind: str              # Q1 | Q2
    body_id: np.ndarray    # (E,) int

    def __post_init__(self):
        self.nodes = np.asarray(self.nodes, dtype=float).reshape(-1, 2)
        self.elements = np.asarray(self.elements, dtype=int)
        self.body_id = np.asarray(self.body_id, dtype=int)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    def bodies(self):
        return sorted(set(self.body_id.tolist()))

    def node_body(self) -> np.ndarray:
        """Body id per node; raises if a node is shared between bodies or unused."""
        owner = np.full(self.n_nodes, -1, dtype=int)
        for e in range(self.n_elements):
            b = self.body_id[e]
            for n in self.elements[e]:
                if owner[n] == -1:
                    owner[n] = b
                elif owner[n] != b:
                    raise MeshError(f"node {n} belongs to bodies {owner[n]} and {b}")
        if np.any(owner == -1):
            orphan = int(np.nonzero(owner == -1)[0][0])
            raise MeshError(f"node {orphan} is not referenced by any element")
        return owner

    def validate(self):
        npe = NODES_PER_ELEMENT[self.kind]
        if self.elements.ndim != 2 or self.elements.shape[1] != npe:
            raise MeshError(
                f"{self.kind} elements need {npe} nodes per row, "
                f"got shape {self.elements.shape}"
            )
        if self.n_elements and (self.elements.min() < 0
                                or self.elements.max() >= self.n_nodes):
            bad = int(np.argmax(self.elements.max(axis=1) >= self.n_nodes))
            raise MeshError(f"element {bad} references an invalid node id")
        if len(self.body_id) != self.n_elements:
            raise MeshError("body_id length does not match element count")
        self.node_body()
        for e in range(self.n_elements):
            if min_jacobian(self.kind, self.nodes[self.elements[e]]) <= 0.0:
                raise MeshError(
                    f"element {e} has a non-positive Jacobian at a quadrature point"
                )
        return self


@dataclass
class BoundarySets:
    """Tagged boundary data. Components/motions on Dirichlet entries and
    tractions on Neumann segments are filled in by the scenario layer; the
    mesh file only carries node sets."""

    dirichlet: list = field(default_factory=list)  # (node, components, motion id)
    neumann: list = field(default_factory=list)    # ((n1, n2), (gx, gy) MPa)
    contact: dict = field(default_factory=dict)    # body -> ordered node chain

    def dirichlet_nodes(self):
        return {n for n, _, _ in self.dirichlet}

    def neumann_nodes(self):
        return {n for seg, _ in self.neumann for n in seg}

    def contact_nodes(self):
        return {n for chain in self.contact.values() for n in chain}

    def validate(self, mesh: Mesh2D):
        owner = mesh.node_body()
        d, g, c = self.dirichlet_nodes(), self.neumann_nodes(), self.contact_nodes()
        for a, b, name in ((d, g, "dirichlet/neumann"), (d, c, "dirichlet/contact"),
                           (g, c, "neumann/contact")):
            shared = a & b
            if shared:
                raise MeshError(f"{name} sets overlap at nodes {sorted(shared)[:8]}")
        for body, chain in self.contact.items():
            if len(chain) < 2:
                raise MeshError(f"contact chain of body {body} has < 2 nodes")
            for n in chain:
                if owner[n] != body:
                    raise MeshError(
                        f"contact chain of body {body} uses node {n} of body {owner[n]}"
                    )
            if not chain_is_simple(mesh.nodes[list(chain)]):
                raise MeshError(f"contact chain of body {body} self-intersects")
        return self


@dataclass(frozen=True)
class MeshSize:
    h_per_body: dict
    h_global: float


def element_diameter(mesh: Mesh2D, e: int) -> float:
    """Max inter-node distance within element e."""
    pts = mesh.nodes[mesh.elements[e]]
    d2 = ((pts[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2)
    return math.sqrt(float(d2.max()))


def mesh_size(mesh: Mesh2D) -> MeshSize:
    h = {}
    for e in range(mesh.n_elements):
        b = int(mesh.body_id[e])
        h[b] = max(h.get(b, 0.0), element_diameter(mesh, e))
    return MeshSize(h, max(h.values()))


def _segments_intersect(p1, p2, p3, p4) -> bool:
    """Proper intersection test for open segments p1-p2 and p3-p4."""
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1 = orient(p3, p4, p1)
    d2 = orient(p3, p4, p2)
    d3 = orient(p1, p2, p3)
    d4 = orient(p1, p2, p4)
    return ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0))


def chain_is_simple(points: np.ndarray) -> bool:
    """Brute-force check that the polyline does not self-intersect."""
    pts = np.asarray(points, dtype=float)
    nseg = len(pts) - 1
    for i in range(nseg):
        for j in range(i + 2, nseg):
            if _segments_intersect(pts[i], pts[i + 1], pts[j], pts[j + 1]):
                return False
    return True


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------

def structured_rect_mesh(width: float, height: float, nx: int, ny: int,
                         kind: str = Q1, origin=(0.0, 0.0), body: int = 1):
    """Structured quadrangle mesh of a rectangle.

    Returns (Mesh2D, chains) where chains maps 'bottom'/'right'/'top'/'left'
    to ordered node lists traversed counterclockwise around the body.
    """
    if nx < 1 or ny < 1:
        raise MeshError("nx and ny must be >= 1")
    if width <= 0 or height <= 0:
        raise MeshError("width and height must be positive")
    x0, y0 = origin
    if kind == Q1:
        ids = np.arange((nx + 1) * (ny + 1)).reshape(ny + 1, nx + 1)
        xs = x0 + width * np.arange(nx + 1) / nx
        ys = y0 + height * np.arange(ny + 1) / ny
        nodes = np.array([(x, y) for y in ys for x in xs])
        elems = []
        for j in range(ny):
            for i in range(nx):
                elems.append((ids[j, i], ids[j, i + 1], ids[j + 1, i + 1], ids[j + 1, i]))
        chains = {
            "bottom": ids[0, :].tolist(),
            "right": ids[:, nx].tolist(),
            "top": ids[ny, ::-1].tolist(),
            "left": ids[::-1, 0].tolist(),
        }
    elif kind == Q2:
        # serendipity lattice on the (2nx+1) x (2ny+1) grid, centres skipped
        idmap = {}
        coords = []
        for jj in range(2 * ny + 1):
            for ii in range(2 * nx + 1):
                if ii % 2 == 1 and jj % 2 == 1:
                    continue
                idmap[(ii, jj)] = len(coords)
                coords.append((x0 + width * ii / (2 * nx), y0 + height * jj / (2 * ny)))
        nodes = np.array(coords)
        elems = []
        for j in range(ny):
            for i in range(nx):
                ii, jj = 2 * i, 2 * j
                elems.append((
                    idmap[(ii, jj)], idmap[(ii + 2, jj)],
                    idmap[(ii + 2, jj + 2)], idmap[(ii, jj + 2)],
                    idmap[(ii + 1, jj)], idmap[(ii + 2, jj + 1)],
                    idmap[(ii + 1, jj + 2)], idmap[(ii, jj + 1)],
                ))
        chains = {
            "bottom": [idmap[(ii, 0)] for ii in range(2 * nx + 1)],
            "right": [idmap[(2 * nx, jj)] for jj in range(2 * ny + 1)],
            "top": [idmap[(ii, 2 * ny)] for ii in range(2 * nx, -1, -1)],
            "left": [idmap[(0, jj)] for jj in range(2 * ny, -1, -1)],
        }
    else:
        raise MeshError(f"unknown element kind {kind!r}")
    mesh = Mesh2D(nodes, np.array(elems), kind, np.full(len(elems), body))
    mesh.validate()
    return mesh, chains


def disc_sector_mesh(radius: float, span_deg: float, nr: int, na: int,
                     kind: str = Q1, center=(0.0, 0.0), theta0_deg: float = 0.0,
                     body: int = 1):
    """Polar fan mesh of a disc sector; the r=0 ring collapses onto one
    centre node (positive Jacobians at interior quadrature points).

    Returns (Mesh2D, chains) with chains 'arc' (r = radius, by increasing
    angle), 'ray_start' and 'ray_end' (centre to rim along the two straight
    edges, ordered so material stays on the left).
    """
    if radius <= 0:
        raise MeshError("radius must be positive")
    if nr < 1 or na < 1:
        raise MeshError("nr and na must be >= 1")
    if not 0 < span_deg <= 360:
        raise MeshError("angular span must be in (0, 360] degrees")
    cx, cy = center
    th0 = math.radians(theta0_deg)
    dth = math.radians(span_deg) / na

    def pt(r, j_half):  # j_half counts half-steps of the angular grid
        th = th0 + dth * j_half / 2.0
        return (cx + r * math.cos(th), cy + r * math.sin(th))

    coords = [(cx, cy)]
    idmap = {}  # (i_half, j_half) on doubled radial/angular lattice

    def node(i_half, j_half):
        if i_half == 0:
            return 0
        key = (i_half, j_half)
        if key not in idmap:
            idmap[key] = len(coords)
            coords.append(pt(radius * i_half / (2 * nr), j_half))
        return idmap[key]

    elems = []
    if kind == Q1:
        for i in range(nr):
            for j in range(na):
                elems.append((node(2 * i, 2 * j), node(2 * i + 2, 2 * j),
                              node(2 * i + 2, 2 * j + 2), node(2 * i, 2 * j + 2)))
    elif kind == Q2:
        for i in range(nr):
            for j in range(na):
                ii, jj = 2 * i, 2 * j
                elems.append((
                    node(ii, jj), node(ii + 2, jj),
                    node(ii + 2, jj + 2), node(ii, jj + 2),
                    node(ii + 1, jj), node(ii + 2, jj + 1),
                    node(ii + 1, jj + 2), node(ii, jj + 1),
                ))
    else:
        raise MeshError(f"unknown element kind {kind!r}")

    mesh = Mesh2D(np.array(coords), np.array(elems), kind, np.full(len(elems), body))
    mesh.validate()
    step = 1 if kind == Q2 else 2
    arc = [node(2 * nr, j) for j in range(0, 2 * na + 1, step)]
    ray_start = [node(i, 0) for i in range(0, 2 * nr + 1, step)]
    ray_end = [node(i, 2 * na) for i in range(2 * nr, -1, -step)]
    chains = {"arc": arc, "ray_start": ray_start, "ray_end": ray_end}
    return mesh, chains


def merge_meshes(parts):
    """Concatenate (mesh, chains) parts into one multi-body mesh.

    Chain names get prefixed per part index by the caller; here we just
    offset node ids. Returns (Mesh2D, list of per-part chain dicts).
    """
    nodes, elems, bodies, out_chains = [], [], [], []
    offset = 0
    kind = parts[0][0].kind
    for mesh, chains in parts:
        if mesh.kind != kind:
            raise MeshError("cannot merge meshes of different element kinds")
        nodes.append(mesh.nodes)
        elems.append(mesh.elements + offset)
        bodies.append(mesh.body_id)
        out_chains.append({k: [n + offset for n in v] for k, v in chains.items()})
        offset += mesh.n_nodes
    merged = Mesh2D(np.vstack(nodes), np.vstack(elems), kind, np.concatenate(bodies))
    return merged, out_chains


# ---------------------------------------------------------------------------
# file io
# ---------------------------------------------------------------------------

def load_mesh(path):
    """Parse a mesh file; returns (Mesh2D, BoundarySets), both validated."""
    with open(path) as fh:
        lines = fh.read().splitlines()

    def fail(i, msg):
        raise MeshFormatError(path, i + 1, msg)

    idx = 0
    rows = [(i, ln.split()) for i, ln in enumerate(lines)
            if ln.strip() and not ln.lstrip().startswith("#")]
    if not rows:
        raise MeshFormatError(path, 1, "empty mesh file")

    i, tok = rows[idx]
    if len(tok) != 3 or tok[0] != "mesh2d" or tok[1] != "v1":
        fail(i, "expected header 'mesh2d v1 <Q1|Q2>'")
    kind = tok[2]
    if kind not in NODES_PER_ELEMENT:
        fail(i, f"unknown element kind {kind!r}")
    idx += 1

    i, tok = rows[idx]
    if len(tok) != 2 or tok[0] != "nodes":
        fail(i, "expected 'nodes <count>'")
    n_nodes = int(tok[1])
    idx += 1
    nodes = np.empty((n_nodes, 2))
    seen = np.zeros(n_nodes, dtype=bool)
    for _ in range(n_nodes):
        i, tok = rows[idx]
        if len(tok) != 3:
            fail(i, "expected '<id> <x> <y>'")
        try:
            nid, x, y = int(tok[0]), float(tok[1]), float(tok[2])
        except ValueError:
            fail(i, f"bad node line {' '.join(tok)!r}")
        if not 0 <= nid < n_nodes or seen[nid]:
            fail(i, f"bad or duplicate node id {nid}")
        nodes[nid] = (x, y)
        seen[nid] = True
        idx += 1

    i, tok = rows[idx]
    if len(tok) != 2 or tok[0] != "elements":
        fail(i, "expected 'elements <count>'")
    n_elems = int(tok[1])
    idx += 1
    npe = NODES_PER_ELEMENT[kind]
    elems = np.empty((n_elems, npe), dtype=int)
    body = np.empty(n_elems, dtype=int)
    eseen = np.zeros(n_elems, dtype=bool)
    for _ in range(n_elems):
        i, tok = rows[idx]
        if len(tok) != 2 + npe:
            fail(i, f"{kind} element line needs {2 + npe} fields, got {len(tok)}")
        try:
            vals = [int(t) for t in tok]
        except ValueError:
            fail(i, f"bad element line {' '.join(tok)!r}")
        eid = vals[0]
        if not 0 <= eid < n_elems or eseen[eid]:
            fail(i, f"bad or duplicate element id {eid}")
        body[eid] = vals[1]
        elems[eid] = vals[2:]
        eseen[eid] = True
        idx += 1

    bsets = BoundarySets()
    while idx < len(rows):
        i, tok = rows[idx]
        if tok[0] != "set" or len(tok) < 4:
            fail(i, "expected 'set <dirichlet|neumann|contact> <body> <node ids...>'")
        what, b = tok[1], int(tok[2])
        try:
            ids = [int(t) for t in tok[3:]]
        except ValueError:
            fail(i, f"bad node id in set line")
        if any(not 0 <= n < n_nodes for n in ids):
            fail(i, "set references an invalid node id")
        if what == "dirichlet":
            bsets.dirichlet.extend((n, (0, 1), 0) for n in ids)
        elif what == "neumann":
            bsets.neumann.extend(((ids[k], ids[k + 1]), (0.0, 0.0))
                                 for k in range(len(ids) - 1))
        elif what == "contact":
            if b in bsets.contact:
                fail(i, f"duplicate contact chain for body {b}")
            bsets.contact[b] = list(ids)
        else:
            fail(i, f"unknown set kind {what!r}")
        idx += 1

    mesh = Mesh2D(nodes, elems, kind, body)
    try:
        mesh.validate()
        bsets.validate(mesh)
    except MeshError as err:
        raise MeshError(f"{path}: {err}") from err
    return mesh, bsets


def save_mesh(path, mesh: Mesh2D, bsets: BoundarySets | None = None):
    out = [f"mesh2d v1 {mesh.kind}", f"nodes {mesh.n_nodes}"]
    for n, (x, y) in enumerate(mesh.nodes):
        out.append(f"{n} {x!r} {y!r}")
    out.append(f"elements {mesh.n_elements}")
    for e in range(mesh.n_elements):
        conn = " ".join(str(n) for n in mesh.elements[e])
        out.append(f"{e} {mesh.body_id[e]} {conn}")
    if bsets is not None:
        owner = mesh.node_body()
        by_body = {}
        for n, _, _ in bsets.dirichlet:
            by_body.setdefault(int(owner[n]), []).append(n)
        for b, ids in sorted(by_body.items()):
            out.append(f"set dirichlet {b} " + " ".join(map(str, sorted(set(ids)))))
        for body, chain in sorted(bsets.contact.items()):
            out.append(f"set contact {body} " + " ".join(map(str, chain)))
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")
