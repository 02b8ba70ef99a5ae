"""Structured quadrilateral meshes of multi-story walls with rectangular openings."""

from dataclasses import dataclass, field

import numpy as np

from caerom.errors import GeometryError

_SNAP = 1e-9


@dataclass(frozen=True)
class Opening:
    """Axis-aligned rectangular hole with lower-left corner ``(x0, y0)``."""

    x0: float
    y0: float
    width: float
    height: float


@dataclass(frozen=True)
class WallGeometry:
    width: float = 6.0
    story_heights: tuple = (3.5, 3.5, 3.5)
    openings: tuple = field(
        default=(
            Opening(2.5, 0.0, 1.0, 2.5),
            Opening(2.5, 3.5, 1.0, 2.5),
            Opening(2.5, 7.0, 1.0, 2.5),
        )
    )
    element_size: float = 0.25

    @property
    def height(self):
        return float(sum(self.story_heights))

    def refined(self, factor):
        return WallGeometry(self.width, self.story_heights, self.openings, self.element_size / factor)

    def to_dict(self):
        return {
            "width": self.width,
            "story_heights": list(self.story_heights),
            "openings": [[o.x0, o.y0, o.width, o.height] for o in self.openings],
            "element_size": self.element_size,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            width=float(d["width"]),
            story_heights=tuple(float(h) for h in d["story_heights"]),
            openings=tuple(Opening(*map(float, o)) for o in d.get("openings", [])),
            element_size=float(d["element_size"]),
        )


def reduced_wall_geometry():
    """Coarse three-story coupled wall with about 200 free DOFs, for quick studies."""
    return WallGeometry(
        width=6.0,
        story_heights=(3.0, 3.0, 3.0),
        openings=(
            Opening(2.25, 0.0, 1.5, 2.25),
            Opening(2.25, 3.0, 1.5, 2.25),
            Opening(2.25, 6.0, 1.5, 2.25),
        ),
        element_size=0.75,
    )


@dataclass
class WallMesh:
    nodes: np.ndarray  # (n_nodes, 2) coordinates in m
    elements: np.ndarray  # (n_elements, 4) node ids, counterclockwise
    story: np.ndarray  # (n_elements,) story index of each element
    fixed_dofs: np.ndarray  # global DOF ids with zero displacement
    monitored_nodes: np.ndarray  # node ids whose horizontal response is reported

    @property
    def n_nodes(self):
        return self.nodes.shape[0]

    @property
    def n_elements(self):
        return self.elements.shape[0]

    @property
    def free_dofs(self):
        """Global DOF ids (``2 * node + component``) that are not constrained, ascending."""
        mask = np.ones(2 * self.n_nodes, dtype=bool)
        mask[self.fixed_dofs] = False
        return np.flatnonzero(mask)

    @property
    def d(self):
        return 2 * self.n_nodes - len(self.fixed_dofs)

    def free_index(self, node, component=0):
        """Position of a nodal DOF inside the free-DOF vector."""
        hits = np.flatnonzero(self.free_dofs == 2 * node + component)
        if hits.size == 0:
            raise GeometryError(f"DOF {component} of node {node} is constrained")
        return int(hits[0])

    def horizontal_influence(self):
        """Influence vector of a horizontal ground motion on the free DOFs."""
        return (self.free_dofs % 2 == 0).astype(float)

    def dof_labels(self):
        return [f"n{dof // 2}{'xy'[dof % 2]}" for dof in self.free_dofs]


def _axis(length, h, cuts, what):
    n = length / h
    if abs(n - round(n)) > _SNAP * max(1.0, n):
        raise GeometryError(f"{what} {length} is not a multiple of the element size {h}")
    n = int(round(n))
    for c in cuts:
        k = c / h
        if abs(k - round(k)) > _SNAP * max(1.0, abs(k)):
            raise GeometryError(f"{what} line at {c} does not fall on the element grid (size {h})")
    return np.linspace(0.0, length, n + 1)


def build_wall_mesh(geometry=None):
    """Conforming Q4 mesh of the wall; raises :class:`GeometryError` when openings miss the grid."""
    g = WallGeometry() if geometry is None else geometry
    if g.width <= 0 or g.element_size <= 0 or not g.story_heights or min(g.story_heights) <= 0:
        raise GeometryError("width, story heights and element size must be positive")
    h = g.element_size
    story_tops = np.cumsum(g.story_heights)
    for o in g.openings:
        if o.width <= 0 or o.height <= 0:
            raise GeometryError(f"opening {o} has non-positive size")
        if o.x0 < -_SNAP or o.y0 < -_SNAP or o.x0 + o.width > g.width + _SNAP or o.y0 + o.height > g.height + _SNAP:
            raise GeometryError(f"opening {o} extends outside the wall")
    xs = _axis(g.width, h, [v for o in g.openings for v in (o.x0, o.x0 + o.width)], "x")
    ys = _axis(g.height, h, [v for o in g.openings for v in (o.y0, o.y0 + o.height)] + list(story_tops), "y")
    nx, ny = len(xs) - 1, len(ys) - 1

    solid = np.ones((nx, ny), dtype=bool)
    xc = 0.5 * (xs[:-1] + xs[1:])
    yc = 0.5 * (ys[:-1] + ys[1:])
    for o in g.openings:
        inside = (xc[:, None] > o.x0) & (xc[:, None] < o.x0 + o.width) & (yc[None, :] > o.y0) & (yc[None, :] < o.y0 + o.height)
        solid &= ~inside
    if not solid.any():
        raise GeometryError("openings remove the whole wall")

    grid_id = lambda i, j: j * (nx + 1) + i  # noqa: E731
    quads, stories = [], []
    for j in range(ny):
        story = int(np.searchsorted(story_tops, yc[j]))
        for i in range(nx):
            if solid[i, j]:
                quads.append([grid_id(i, j), grid_id(i + 1, j), grid_id(i + 1, j + 1), grid_id(i, j + 1)])
                stories.append(story)
    quads = np.array(quads)

    # keep only nodes used by some element, numbered in grid order
    used = np.unique(quads)
    renumber = np.full((nx + 1) * (ny + 1), -1)
    renumber[used] = np.arange(used.size)
    gx, gy = np.meshgrid(xs, ys)
    nodes = np.column_stack([gx.ravel(), gy.ravel()])[used]
    elements = renumber[quads]

    base = np.flatnonzero(np.abs(nodes[:, 1]) < _SNAP)
    fixed = np.sort(np.concatenate([2 * base, 2 * base + 1]))
    monitored = []
    for top in story_tops:
        hit = np.flatnonzero((np.abs(nodes[:, 0]) < _SNAP) & (np.abs(nodes[:, 1] - top) < _SNAP * max(1.0, top)))
        if hit.size == 0:
            raise GeometryError(f"no node at the left edge of story top y={top}")
        monitored.append(int(hit[0]))
    mesh = WallMesh(nodes, elements, np.array(stories), fixed, np.array(monitored))
    _check_elements(mesh)
    return mesh


def _check_elements(mesh):
    for e, conn in enumerate(mesh.elements):
        if len(set(conn.tolist())) != 4:
            raise GeometryError(f"element {e} has repeated nodes")
        xy = mesh.nodes[conn]
        area2 = np.sum(xy[:, 0] * np.roll(xy[:, 1], -1) - np.roll(xy[:, 0], -1) * xy[:, 1])
        if area2 <= 0:
            raise GeometryError(f"element {e} is not counterclockwise")
