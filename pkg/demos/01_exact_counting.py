"""
Counting convex regions without double counting
================================================

A region that straddles a cell boundary appears in every cell it touches,
so summing per-cell tallies over a window overstates how many regions meet
it. Keeping separate tallies for cells, the edges between them, and the
corners where four cells meet repairs the overcount: faces minus edges
plus vertices hits each convex region exactly once.
"""

import numpy as np

from eulerdp import QueryRegion, build, build_partition, convex_hull, query

# A 3x3 grid over a 3-unit square, cell side 1.
p = build_partition(3.0, 3)

# Three occupants: one tucked inside a single cell, one lying across a
# vertical boundary, and one parked on the center corner touching four cells.
bodies = [
    convex_hull([(0.2, 0.2), (0.7, 0.2), (0.7, 0.7), (0.2, 0.7)]),
    convex_hull([(0.6, 2.3), (1.5, 2.3), (1.5, 2.8), (0.6, 2.8)]),
    convex_hull([(0.8, 0.8), (2.2, 0.8), (2.2, 2.2), (0.8, 2.2)]),
]
h = build(bodies, p)

# The face tallies alone tell the overcounting story.
faces = h.faces
print("per-cell tallies (row 0 at the bottom of the map):")
print(np.flipud(faces))

full = QueryRegion(0, 2, 0, 2)
print("\nnaive sum over the whole grid:", int(faces.sum()))
print("face-edge-vertex count:       ", query(h, full))
print("actual number of regions:     ", len(bodies))

# The same cancellation works on any rectangle of cells.
for qr in (QueryRegion(0, 1, 0, 1), QueryRegion(1, 2, 0, 2), QueryRegion(2, 2, 0, 1)):
    naive = int(faces[qr.r0 : qr.r1 + 1, qr.c0 : qr.c1 + 1].sum())
    print(f"rows {qr.r0}..{qr.r1} cols {qr.c0}..{qr.c1}:  naive {naive}  exact {query(h, qr)}")
