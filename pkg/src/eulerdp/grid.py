"""Square grid partition over a bounded area.

The partition splits an axis-aligned square of side ``area_side`` into ``n * n``
closed cells (faces) and tracks the lower-dimensional components between them:
the ``2n(n-1)`` interior edge segments and the ``(n-1)^2`` interior grid
vertices. Components on the outer boundary of the area are not tracked.

Every component has two addresses: a structured :class:`ComponentId` and a
dense integer index. The dense layout is faces in row-major order, then
horizontal edges, then vertical edges, then vertices. File formats and noise
streams are keyed by the dense index, so the layout is load-bearing and must
stay stable.

Rows grow with y and columns grow with x. Face ``(r, c)`` covers
``[x0 + c*d, x0 + (c+1)*d] x [y0 + r*d, y0 + (r+1)*d]`` where ``d`` is the
cell side. The horizontal edge ``(r, c)`` is the segment between faces
``(r, c)`` and ``(r+1, c)``; the vertical edge ``(r, c)`` sits between faces
``(r, c)`` and ``(r, c+1)``; vertex ``(r, c)`` is the grid point shared by
faces ``(r, c)``, ``(r, c+1)``, ``(r+1, c)`` and ``(r+1, c+1)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np


class ComponentKind(Enum):
    FACE = "face"
    EDGE = "edge"
    VERTEX = "vertex"


class Orientation(Enum):
    HORIZONTAL = "horizontal"
    VERTICAL = "vertical"


@dataclass(frozen=True)
class ComponentId:
    """Structured address of one partition component.

    ``orientation`` is set exactly when ``kind`` is EDGE.
    """

    kind: ComponentKind
    row: int
    col: int
    orientation: Orientation | None = None

    def __post_init__(self) -> None:
        if (self.kind is ComponentKind.EDGE) != (self.orientation is not None):
            raise ValueError("orientation is required for edges and only for edges")

    def label(self) -> str:
        if self.kind is ComponentKind.FACE:
            return f"f{self.row}_{self.col}"
        if self.kind is ComponentKind.VERTEX:
            return f"x{self.row}_{self.col}"
        tag = "h" if self.orientation is Orientation.HORIZONTAL else "v"
        return f"{tag}e{self.row}_{self.col}"


def face(row: int, col: int) -> ComponentId:
    return ComponentId(ComponentKind.FACE, row, col)


def hedge(row: int, col: int) -> ComponentId:
    return ComponentId(ComponentKind.EDGE, row, col, Orientation.HORIZONTAL)


def vedge(row: int, col: int) -> ComponentId:
    return ComponentId(ComponentKind.EDGE, row, col, Orientation.VERTICAL)


def vertex(row: int, col: int) -> ComponentId:
    return ComponentId(ComponentKind.VERTEX, row, col)


@dataclass(frozen=True)
class GridPartition:
    """Immutable description of the grid: origin, area side, and resolution."""

    origin: tuple[float, float]
    area_side: float
    n: int

    def __post_init__(self) -> None:
        ox, oy = self.origin
        if not (np.isfinite(ox) and np.isfinite(oy)):
            raise ValueError("origin must be finite")
        if not (np.isfinite(self.area_side) and self.area_side > 0):
            raise ValueError("area_side must be positive and finite")
        if self.n < 2:
            raise ValueError("grid resolution n must be at least 2")

    @property
    def cell_side(self) -> float:
        # Derived, never stored: n * cell_side reproduces area_side exactly
        # up to one float division.
        return self.area_side / self.n

    # ---- component census ------------------------------------------------

    @property
    def n_faces(self) -> int:
        return self.n * self.n

    @property
    def n_hedges(self) -> int:
        return (self.n - 1) * self.n

    @property
    def n_vedges(self) -> int:
        return self.n * (self.n - 1)

    @property
    def n_edges(self) -> int:
        return self.n_hedges + self.n_vedges

    @property
    def n_vertices(self) -> int:
        return (self.n - 1) * (self.n - 1)

    @property
    def size(self) -> int:
        """Total number of tracked components."""
        return self.n_faces + self.n_edges + self.n_vertices

    # Dense-layout section offsets.
    @property
    def hedge_offset(self) -> int:
        return self.n_faces

    @property
    def vedge_offset(self) -> int:
        return self.n_faces + self.n_hedges

    @property
    def vertex_offset(self) -> int:
        return self.n_faces + self.n_edges

    # ---- id <-> dense index ----------------------------------------------

    def index_of(self, cid: ComponentId) -> int:
        n = self.n
        r, c = cid.row, cid.col
        if cid.kind is ComponentKind.FACE:
            if not (0 <= r < n and 0 <= c < n):
                raise IndexError(f"face ({r}, {c}) outside grid of size {n}")
            return r * n + c
        if cid.kind is ComponentKind.VERTEX:
            if not (0 <= r < n - 1 and 0 <= c < n - 1):
                raise IndexError(f"vertex ({r}, {c}) outside grid of size {n}")
            return self.vertex_offset + r * (n - 1) + c
        if cid.orientation is Orientation.HORIZONTAL:
            if not (0 <= r < n - 1 and 0 <= c < n):
                raise IndexError(f"horizontal edge ({r}, {c}) outside grid of size {n}")
            return self.hedge_offset + r * n + c
        if not (0 <= r < n and 0 <= c < n - 1):
            raise IndexError(f"vertical edge ({r}, {c}) outside grid of size {n}")
        return self.vedge_offset + r * (n - 1) + c

    def component_at(self, index: int) -> ComponentId:
        n = self.n
        if not (0 <= index < self.size):
            raise IndexError(f"dense index {index} outside [0, {self.size})")
        if index < self.hedge_offset:
            return face(index // n, index % n)
        if index < self.vedge_offset:
            k = index - self.hedge_offset
            return hedge(k // n, k % n)
        if index < self.vertex_offset:
            k = index - self.vedge_offset
            return vedge(k // (n - 1), k % (n - 1))
        k = index - self.vertex_offset
        return vertex(k // (n - 1), k % (n - 1))

    # ---- incidence ---------------------------------------------------------

    def incident_faces(self, edge: ComponentId) -> tuple[ComponentId, ComponentId]:
        """The two faces separated by an interior edge."""
        if edge.kind is not ComponentKind.EDGE:
            raise ValueError("incident_faces expects an edge component")
        self.index_of(edge)  # bounds check
        r, c = edge.row, edge.col
        if edge.orientation is Orientation.HORIZONTAL:
            return face(r, c), face(r + 1, c)
        return face(r, c), face(r, c + 1)

    def incident_edges(self, vx: ComponentId) -> tuple[ComponentId, ...]:
        """The four edges meeting at an interior vertex, in dense-index order."""
        if vx.kind is not ComponentKind.VERTEX:
            raise ValueError("incident_edges expects a vertex component")
        self.index_of(vx)
        r, c = vx.row, vx.col
        return hedge(r, c), hedge(r, c + 1), vedge(r, c), vedge(r + 1, c)

    def incident_faces_of_vertex(self, vx: ComponentId) -> tuple[ComponentId, ...]:
        """The four faces surrounding an interior vertex, row-major."""
        if vx.kind is not ComponentKind.VERTEX:
            raise ValueError("incident_faces_of_vertex expects a vertex component")
        self.index_of(vx)
        r, c = vx.row, vx.col
        return face(r, c), face(r, c + 1), face(r + 1, c), face(r + 1, c + 1)

    # ---- geometry ----------------------------------------------------------

    def x_line(self, i: int) -> float:
        return self.origin[0] + i * self.cell_side

    def y_line(self, j: int) -> float:
        return self.origin[1] + j * self.cell_side

    def box_of(self, cid: ComponentId) -> tuple[float, float, float, float]:
        """Closed axis-aligned extent (xlo, xhi, ylo, yhi); degenerate for
        edges (one zero side) and vertices (both sides zero)."""
        self.index_of(cid)
        r, c = cid.row, cid.col
        if cid.kind is ComponentKind.FACE:
            return self.x_line(c), self.x_line(c + 1), self.y_line(r), self.y_line(r + 1)
        if cid.kind is ComponentKind.VERTEX:
            x, y = self.x_line(c + 1), self.y_line(r + 1)
            return x, x, y, y
        if cid.orientation is Orientation.HORIZONTAL:
            y = self.y_line(r + 1)
            return self.x_line(c), self.x_line(c + 1), y, y
        x = self.x_line(c + 1)
        return x, x, self.y_line(r), self.y_line(r + 1)

    def area_box(self) -> tuple[float, float, float, float]:
        return (
            self.x_line(0),
            self.x_line(self.n),
            self.y_line(0),
            self.y_line(self.n),
        )

    def window(
        self, xlo: float, xhi: float, ylo: float, yhi: float
    ) -> tuple[np.ndarray, np.ndarray]:
        """Dense indices and boxes of every component that could meet the
        given bounding box.

        The candidate set is padded by one ring of cells so boundary-touching
        intersections are never missed; the caller's predicate makes the final
        call. Returns ``(indices, boxes)`` with ``boxes[i] = (xlo, xhi, ylo,
        yhi)`` for the component at ``indices[i]``.
        """
        n, d = self.n, self.cell_side
        ox, oy = self.origin
        clo = max(int(np.floor((xlo - ox) / d)) - 1, 0)
        chi = min(int(np.floor((xhi - ox) / d)) + 1, n - 1)
        rlo = max(int(np.floor((ylo - oy) / d)) - 1, 0)
        rhi = min(int(np.floor((yhi - oy) / d)) + 1, n - 1)
        if clo > chi or rlo > rhi:
            return np.empty(0, dtype=np.int64), np.empty((0, 4))

        xs = ox + np.arange(n + 1) * d
        ys = oy + np.arange(n + 1) * d
        idx_parts: list[np.ndarray] = []
        box_parts: list[np.ndarray] = []

        def emit(rows: np.ndarray, cols: np.ndarray, offset: int, width: int,
                 xa: np.ndarray, xb: np.ndarray, ya: np.ndarray, yb: np.ndarray) -> None:
            rr, cc = np.meshgrid(rows, cols, indexing="ij")
            idx_parts.append(offset + rr.ravel() * width + cc.ravel())
            box_parts.append(
                np.column_stack([
                    xa[cc.ravel()], xb[cc.ravel()], ya[rr.ravel()], yb[rr.ravel()],
                ])
            )

        frows = np.arange(rlo, rhi + 1)
        fcols = np.arange(clo, chi + 1)
        emit(frows, fcols, 0, n, xs[:-1], xs[1:], ys[:-1], ys[1:])

        hrows = np.arange(max(rlo - 1, 0), min(rhi, n - 2) + 1)
        if hrows.size:
            emit(hrows, fcols, self.hedge_offset, n, xs[:-1], xs[1:], ys[1:], ys[1:])

        vcols = np.arange(max(clo - 1, 0), min(chi, n - 2) + 1)
        if vcols.size:
            emit(frows, vcols, self.vedge_offset, n - 1, xs[1:], xs[1:], ys[:-1], ys[1:])

        if hrows.size and vcols.size:
            emit(hrows, vcols, self.vertex_offset, n - 1, xs[1:], xs[1:], ys[1:], ys[1:])

        return np.concatenate(idx_parts), np.concatenate(box_parts)


def build_partition(
    area_side: float, n: int, origin: tuple[float, float] = (0.0, 0.0)
) -> GridPartition:
    return GridPartition((float(origin[0]), float(origin[1])), float(area_side), int(n))
