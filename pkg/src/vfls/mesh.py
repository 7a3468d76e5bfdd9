"""Structured grid of square bilinear elements with an active-element mask.

Nodes are numbered row-major (x index fastest), with two dofs per node
(x displacement, then y). Elements may be deactivated to carve non-rectangular
design domains such as an L-bracket; inactive elements take no part in
assembly, and every per-element array in the package follows the ordering of
``StructuredMesh.active_ids``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(eq=False)
class StructuredMesh:
    """Regular nx-by-ny grid of square elements of side ``h``.

    Attributes:
      nx, ny: element counts along x and y.
      h: element edge length.
      active: (ny, nx) bool mask, indexed [j, i] with j the y index.
      fixed_dofs: sorted unique constrained dof indices.
      loads: tuple of (dof index, force value) pairs for the primary load case.
      thickness: out-of-plane thickness (unit by default).
    """

    nx: int
    ny: int
    h: float
    active: np.ndarray
    fixed_dofs: np.ndarray
    loads: tuple[tuple[int, float], ...]
    thickness: float = 1.0

    # Derived connectivity, filled in __post_init__.
    active_ids: np.ndarray = field(init=False, repr=False)
    conn: np.ndarray = field(init=False, repr=False)
    edofs: np.ndarray = field(init=False, repr=False)
    centroids: np.ndarray = field(init=False, repr=False)
    free_dofs: np.ndarray = field(init=False, repr=False)
    node_touches_active: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1:
            raise ValueError("mesh must have at least one element per axis")
        if self.h <= 0.0:
            raise ValueError("element size h must be positive")
        self.active = np.asarray(self.active, dtype=bool)
        if self.active.shape != (self.ny, self.nx):
            raise ValueError(
                f"active mask shape {self.active.shape} does not match "
                f"(ny, nx) = {(self.ny, self.nx)}"
            )
        if not self.active.any():
            raise ValueError("active element set is empty")

        ej, ei = np.nonzero(self.active)
        self.active_ids = ej * self.nx + ei

        n00 = ej * (self.nx + 1) + ei
        n10 = n00 + 1
        n01 = n00 + (self.nx + 1)
        n11 = n01 + 1
        # Counterclockwise: lower-left, lower-right, upper-right, upper-left.
        self.conn = np.stack([n00, n10, n11, n01], axis=1)

        dofs = np.empty((self.n_active, 8), dtype=np.int64)
        dofs[:, 0::2] = 2 * self.conn
        dofs[:, 1::2] = 2 * self.conn + 1
        self.edofs = dofs

        self.centroids = np.stack(
            [(ei + 0.5) * self.h, (ej + 0.5) * self.h], axis=1
        )

        touched = np.zeros(self.n_nodes, dtype=bool)
        touched[self.conn.ravel()] = True
        self.node_touches_active = touched

        fixed = np.unique(np.asarray(self.fixed_dofs, dtype=np.int64))
        if fixed.size and (fixed[0] < 0 or fixed[-1] >= self.n_dofs):
            raise ValueError("fixed dof index out of range")
        self.fixed_dofs = fixed
        self._check_attached("constraint", fixed // 2)

        loads = tuple((int(d), float(v)) for d, v in self.loads)
        for dof, _ in loads:
            if dof < 0 or dof >= self.n_dofs:
                raise ValueError("load dof index out of range")
        self._check_attached("load", np.asarray([d // 2 for d, _ in loads]))
        self.loads = loads

        mask = np.ones(self.n_dofs, dtype=bool)
        mask[self.fixed_dofs] = False
        # Nodes outside every active element carry no stiffness; keeping
        # their dofs in the solve would make the reduced system singular.
        untouched = np.nonzero(~touched)[0]
        mask[2 * untouched] = False
        mask[2 * untouched + 1] = False
        self.free_dofs = np.nonzero(mask)[0]

    def _check_attached(self, what: str, nodes: np.ndarray):
        nodes = np.asarray(nodes, dtype=np.int64)
        if nodes.size and not self.node_touches_active[nodes].all():
            bad = nodes[~self.node_touches_active[nodes]][0]
            raise ValueError(
                f"{what} applied at node {bad}, which touches no active element"
            )

    @property
    def n_nodes(self) -> int:
        return (self.nx + 1) * (self.ny + 1)

    @property
    def n_dofs(self) -> int:
        return 2 * self.n_nodes

    @property
    def n_active(self) -> int:
        return int(self.active.sum())

    @property
    def lx(self) -> float:
        return self.nx * self.h

    @property
    def ly(self) -> float:
        return self.ny * self.h

    def node_id(self, i: int, j: int) -> int:
        return j * (self.nx + 1) + i

    def node_coords(self) -> np.ndarray:
        """(n_nodes, 2) coordinates in node-id order."""
        xs = np.arange(self.nx + 1) * self.h
        ys = np.arange(self.ny + 1) * self.h
        gx, gy = np.meshgrid(xs, ys)
        return np.stack([gx.ravel(), gy.ravel()], axis=1)

    def load_vector(self, loads=None) -> np.ndarray:
        """Assemble nodal point loads into a full dof vector."""
        f = np.zeros(self.n_dofs)
        for dof, value in (self.loads if loads is None else loads):
            f[dof] += value
        return f

    def boundary_segments(self) -> np.ndarray:
        """Merged line segments of the active-region boundary.

        Returns (n_seg, 2, 2): each segment as two endpoint coordinates.
        Collinear unit edges are merged so the count is O(number of corners).
        """
        padded = np.zeros((self.ny + 2, self.nx + 2), dtype=bool)
        padded[1:-1, 1:-1] = self.active
        segs = []
        # Horizontal edges: between element rows j-1 and j, at y = j*h.
        horiz = padded[1:, 1:-1] != padded[:-1, 1:-1]  # (ny+1, nx)
        for j in range(self.ny + 1):
            segs.extend(
                ((i0 * self.h, j * self.h), (i1 * self.h, j * self.h))
                for i0, i1 in _runs(horiz[j])
            )
        vert = padded[1:-1, 1:] != padded[1:-1, :-1]  # (ny, nx+1)
        for i in range(self.nx + 1):
            segs.extend(
                ((i * self.h, j0 * self.h), (i * self.h, j1 * self.h))
                for j0, j1 in _runs(vert[:, i])
            )
        return np.asarray(segs)

    def signed_distance_to_boundary(self, points: np.ndarray) -> np.ndarray:
        """Signed distance from points to the active-region boundary.

        Positive inside the active region, negative outside. The sign comes
        from element containment; points for which containment is ambiguous
        lie exactly on the boundary, where the distance is zero anyway.
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        segs = self.boundary_segments()
        d = _point_segment_distance(points, segs).min(axis=1)
        ii = np.clip((points[:, 0] / self.h).astype(int), 0, self.nx - 1)
        jj = np.clip((points[:, 1] / self.h).astype(int), 0, self.ny - 1)
        inside = self.active[jj, ii]
        return np.where(inside, d, -d)


def _runs(flags: np.ndarray):
    """Yield (start, stop) index pairs of consecutive True runs."""
    idx = np.nonzero(flags)[0]
    if idx.size == 0:
        return
    breaks = np.nonzero(np.diff(idx) > 1)[0]
    starts = np.concatenate([[0], breaks + 1])
    stops = np.concatenate([breaks, [idx.size - 1]])
    for a, b in zip(starts, stops):
        yield int(idx[a]), int(idx[b]) + 1


def _point_segment_distance(points: np.ndarray, segs: np.ndarray) -> np.ndarray:
    """Distances from each point to each segment, shape (n_pts, n_seg)."""
    a = segs[:, 0]
    ab = segs[:, 1] - segs[:, 0]
    ab2 = np.maximum((ab * ab).sum(axis=1), 1e-300)
    ap = points[:, None, :] - a[None, :, :]
    t = np.clip((ap * ab[None, :, :]).sum(axis=2) / ab2[None, :], 0.0, 1.0)
    closest = a[None, :, :] + t[:, :, None] * ab[None, :, :]
    diff = points[:, None, :] - closest
    return np.sqrt((diff * diff).sum(axis=2))


def build_mesh(nx, ny, h, active_mask=None, bc_spec=(), load_spec=()) -> StructuredMesh:
    """Construct a StructuredMesh.

    Args:
      nx, ny: element counts.
      h: element edge length.
      active_mask: (ny, nx) bool array, or None for a fully active rectangle.
      bc_spec: iterable of constrained dof indices.
      load_spec: iterable of (dof index, force value) pairs.
    """
    if active_mask is None:
        active_mask = np.ones((ny, nx), dtype=bool)
    return StructuredMesh(
        nx=nx,
        ny=ny,
        h=h,
        active=active_mask,
        fixed_dofs=np.asarray(list(bc_spec), dtype=np.int64),
        loads=tuple(load_spec),
    )


def lbracket_mask(nx: int, ny: int, cutout_fraction: float = 0.6) -> np.ndarray:
    """Active mask for an L-bracket: upper-right block removed."""
    if not 0.0 < cutout_fraction < 1.0:
        raise ValueError("cutout fraction must lie in (0, 1)")
    cut_x = int(round(nx * cutout_fraction))
    cut_y = int(round(ny * cutout_fraction))
    mask = np.ones((ny, nx), dtype=bool)
    mask[ny - cut_y:, nx - cut_x:] = False
    return mask
