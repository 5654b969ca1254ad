"""Convex planar bodies and closed-set intersection predicates.

All predicates treat both operands as closed point sets, so touching counts as
intersecting. Every grid component (face, edge, vertex) is represented as an
axis-aligned box, possibly degenerate, and tested against the body with the
same separating-axis routine over the same axis set. Because an edge's box is
contained in both incident face boxes (with bitwise-identical coordinates) and
a vertex's box in all four incident edge boxes, a hit on the smaller component
always implies a hit on the enclosing ones; the face/edge/vertex constraint
structure of raw histograms follows from this containment, not from luck.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import ComponentId, ComponentKind, GridPartition


@dataclass(frozen=True)
class ConvexBody:
    """A convex region given by its hull vertices in counterclockwise order.

    Degenerate bodies are allowed: a single vertex is a point, two vertices
    are a segment. The convexity check carries a relative slack of 1e-9 so
    hulls of ingested float data validate; clockwise winding still fails.
    """

    vertices: np.ndarray

    def __post_init__(self) -> None:
        pts = np.asarray(self.vertices, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 1:
            raise ValueError("vertices must be a (k, 2) array with k >= 1")
        if not np.all(np.isfinite(pts)):
            raise ValueError("vertices must be finite")
        if pts.shape[0] >= 3:
            scale = float(np.abs(pts).max()) or 1.0
            a = np.roll(pts, -1, axis=0) - pts
            b = np.roll(pts, -2, axis=0) - pts
            cross = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
            if np.any(cross < -1e-9 * scale * scale):
                raise ValueError("vertices must wind counterclockwise around a convex region")
        object.__setattr__(self, "vertices", pts)

    @property
    def bbox(self) -> tuple[float, float, float, float]:
        xs, ys = self.vertices[:, 0], self.vertices[:, 1]
        return float(xs.min()), float(xs.max()), float(ys.min()), float(ys.max())


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def convex_hull(points) -> ConvexBody:
    """Andrew monotone chain; strict turns only, so no three output vertices
    are collinear. Handles degenerate input (single point, collinear set)."""
    pts = sorted({(float(x), float(y)) for x, y in np.asarray(points, dtype=np.float64)})
    if not pts:
        raise ValueError("convex_hull needs at least one point")
    if len(pts) == 1:
        return ConvexBody(np.array(pts))
    lower: list[tuple[float, float]] = []
    for p in pts:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list[tuple[float, float]] = []
    for p in reversed(pts):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    hull = lower[:-1] + upper[:-1]
    if len(hull) < 2:  # all input points collinear
        hull = [pts[0], pts[-1]]
    return ConvexBody(np.array(hull))


def diameter(body: ConvexBody) -> float:
    """Largest pairwise distance between hull vertices."""
    pts = body.vertices
    if len(pts) == 1:
        return 0.0
    diff = pts[:, None, :] - pts[None, :, :]
    return float(np.sqrt((diff * diff).sum(axis=2).max()))


def _axes(vertices: np.ndarray) -> list[tuple[float, float]]:
    """Candidate separating axes: the two grid axes plus the body's edge
    normals; degenerate bodies also contribute edge directions, which the
    endpoint-beyond-segment case needs."""
    axes: list[tuple[float, float]] = [(1.0, 0.0), (0.0, 1.0)]
    k = len(vertices)
    if k < 2:
        return axes
    degenerate = k == 2
    for i in range(k):
        dx = vertices[(i + 1) % k, 0] - vertices[i, 0]
        dy = vertices[(i + 1) % k, 1] - vertices[i, 1]
        if dx == 0.0 and dy == 0.0:
            continue
        axes.append((-dy, dx))
        if degenerate:
            axes.append((dx, dy))
    return axes


def intersects_boxes(body: ConvexBody, boxes: np.ndarray, tol: float = 0.0) -> np.ndarray:
    """Vectorized closed-set intersection of one body against many boxes.

    ``boxes`` has rows (xlo, xhi, ylo, yhi); degenerate rows encode segments
    and points. ``tol > 0`` turns the test into within-distance-tol along
    every axis; the same tol must be used across component kinds to keep the
    containment monotonicity.
    """
    boxes = np.asarray(boxes, dtype=np.float64)
    if boxes.size == 0:
        return np.zeros(0, dtype=bool)
    alive = np.ones(len(boxes), dtype=bool)
    verts = body.vertices
    for ux, uy in _axes(verts):
        proj = verts[:, 0] * ux + verts[:, 1] * uy
        bmin, bmax = proj.min(), proj.max()
        px = np.minimum(ux * boxes[:, 0], ux * boxes[:, 1])
        qx = np.maximum(ux * boxes[:, 0], ux * boxes[:, 1])
        py = np.minimum(uy * boxes[:, 2], uy * boxes[:, 3])
        qy = np.maximum(uy * boxes[:, 2], uy * boxes[:, 3])
        gap = np.maximum((px + py) - bmax, bmin - (qx + qy))
        scale = max(abs(ux), abs(uy))
        alive &= gap <= tol * scale
        if not alive.any():
            break
    return alive


def _intersects_component(
    body: ConvexBody, p: GridPartition, cid: ComponentId, kind: ComponentKind, tol: float
) -> bool:
    if cid.kind is not kind:
        raise ValueError(f"expected a {kind.value} component, got {cid.kind.value}")
    box = np.array([p.box_of(cid)])
    return bool(intersects_boxes(body, box, tol)[0])


def intersects_face(body: ConvexBody, p: GridPartition, f: ComponentId, tol: float = 0.0) -> bool:
    """Does the body meet the closed cell of face ``f``?"""
    return _intersects_component(body, p, f, ComponentKind.FACE, tol)


def intersects_edge(body: ConvexBody, p: GridPartition, e: ComponentId, tol: float = 0.0) -> bool:
    """Does the body meet the closed segment of interior edge ``e``?"""
    return _intersects_component(body, p, e, ComponentKind.EDGE, tol)


def intersects_vertex(body: ConvexBody, p: GridPartition, v: ComponentId, tol: float = 0.0) -> bool:
    """Does the body contain the grid point of interior vertex ``v``?"""
    return _intersects_component(body, p, v, ComponentKind.VERTEX, tol)


def _contains_point(body: ConvexBody, q: tuple[float, float], eps: float) -> bool:
    pts = body.vertices
    k = len(pts)
    if k == 1:
        return abs(pts[0, 0] - q[0]) <= eps and abs(pts[0, 1] - q[1]) <= eps
    if k == 2:
        a, b = pts
        if abs(_cross(a, b, q)) > eps * max(1.0, float(np.abs(pts).max())):
            return False
        return (
            min(a[0], b[0]) - eps <= q[0] <= max(a[0], b[0]) + eps
            and min(a[1], b[1]) - eps <= q[1] <= max(a[1], b[1]) + eps
        )
    for i in range(k):
        if _cross(pts[i], pts[(i + 1) % k], q) < -eps:
            return False
    return True


def _segment_clip_params(p0, p1, rect) -> tuple[float, float] | None:
    """Liang-Barsky parameter interval of segment p0->p1 inside rect."""
    xlo, xhi, ylo, yhi = rect
    t0, t1 = 0.0, 1.0
    dx, dy = p1[0] - p0[0], p1[1] - p0[1]
    for delta, lo, hi, start in ((dx, xlo, xhi, p0[0]), (dy, ylo, yhi, p0[1])):
        if delta == 0.0:
            if start < lo or start > hi:
                return None
            continue
        ta, tb = (lo - start) / delta, (hi - start) / delta
        if ta > tb:
            ta, tb = tb, ta
        t0, t1 = max(t0, ta), min(t1, tb)
        if t0 > t1:
            return None
    return t0, t1


def clip_to_rect(body: ConvexBody, rect: tuple[float, float, float, float]) -> ConvexBody | None:
    """Intersection of the body with a closed axis-aligned rectangle, or None
    when the two are disjoint. The result may be degenerate (edge or corner
    contact collapses to a segment or point)."""
    xlo, xhi, ylo, yhi = rect
    pts: list[tuple[float, float]] = []
    for x, y in body.vertices:
        if xlo <= x <= xhi and ylo <= y <= yhi:
            pts.append((float(x), float(y)))
    for corner in ((xlo, ylo), (xlo, yhi), (xhi, ylo), (xhi, yhi)):
        if _contains_point(body, corner, 0.0):
            pts.append(corner)
    verts = body.vertices
    k = len(verts)
    if k >= 2:
        for i in range(k if k > 2 else 1):
            p0, p1 = verts[i], verts[(i + 1) % k]
            span = _segment_clip_params(p0, p1, rect)
            if span is None:
                continue
            for t in span:
                pts.append((
                    float(p0[0] + t * (p1[0] - p0[0])),
                    float(p0[1] + t * (p1[1] - p0[1])),
                ))
    if not pts:
        return None
    return convex_hull(np.array(pts))
