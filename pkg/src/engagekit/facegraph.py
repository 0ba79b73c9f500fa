"""Fixed intra-frame facial graph.

The 78-point canonical template is triangulated once (Delaunay, Bowyer-
Watson) and the resulting connectivity is shared by every subject and
frame.  Temporal edges (same landmark, consecutive frames) are realized
inside the temporal convolution and are not stored here.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from ._template import TEMPLATE_POINTS
from .errors import DegeneracyError, ShapeError, ValidationError


@dataclass(frozen=True)
class FaceGraphSpec:
    """Node set plus undirected intra-frame edges and binary adjacency."""

    node_count: int
    edges: frozenset  # frozenset of sorted (i, j) tuples
    adjacency: np.ndarray  # (N, N) float64, symmetric, zero diagonal

    def degree_with_self_loops(self) -> np.ndarray:
        return self.adjacency.sum(axis=1) + 1.0


@dataclass(frozen=True)
class NormalizedAdjacency:
    """Symmetric degree-normalized adjacency with self-loops."""

    matrix: np.ndarray   # (N, N)
    degrees: np.ndarray  # (N,) degrees of A + I


# error-bound coefficients for the floating-point sign filters; when a
# determinant is smaller than its bound the sign is recomputed exactly
# in rational arithmetic (floats are exact rationals, so Fraction math
# gives the true sign)
_ORIENT_ERR = 3.3306690738754716e-16
_INCIRCLE_ERR = 1.1102230246251565e-15
_GHOST = -1


def _orient_sign(pa, pb, pc) -> int:
    """Exact sign of the (pa, pb, pc) orientation: +1 counterclockwise."""
    detl = (pb[0] - pa[0]) * (pc[1] - pa[1])
    detr = (pb[1] - pa[1]) * (pc[0] - pa[0])
    det = detl - detr
    err = _ORIENT_ERR * (abs(detl) + abs(detr))
    if det > err:
        return 1
    if det < -err:
        return -1
    ax, ay = Fraction(float(pa[0])), Fraction(float(pa[1]))
    bx, by = Fraction(float(pb[0])), Fraction(float(pb[1]))
    cx, cy = Fraction(float(pc[0])), Fraction(float(pc[1]))
    d = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
    return (d > 0) - (d < 0)


def _strictly_between(pa, pb, pq) -> bool:
    """For pq on line (pa, pb): strictly inside the open segment."""
    ax, ay = Fraction(float(pa[0])), Fraction(float(pa[1]))
    bx, by = Fraction(float(pb[0])), Fraction(float(pb[1]))
    qx, qy = Fraction(float(pq[0])), Fraction(float(pq[1]))
    d1 = (qx - ax) * (bx - ax) + (qy - ay) * (by - ay)
    d2 = (qx - bx) * (ax - bx) + (qy - by) * (ay - by)
    return d1 > 0 and d2 > 0


def _incircle_sign(pa, pb, pc, pq) -> int:
    """Exact sign of the raw incircle determinant (not orientation
    normalized): zero means the four points are exactly concyclic."""
    adx, ady = pa[0] - pq[0], pa[1] - pq[1]
    bdx, bdy = pb[0] - pq[0], pb[1] - pq[1]
    cdx, cdy = pc[0] - pq[0], pc[1] - pq[1]
    alift = adx * adx + ady * ady
    blift = bdx * bdx + bdy * bdy
    clift = cdx * cdx + cdy * cdy
    bxcy, bycx = bdx * cdy, bdy * cdx
    cxay, cyax = cdx * ady, cdy * adx
    axby, aybx = adx * bdy, ady * bdx
    det = alift * (bxcy - bycx) + blift * (cxay - cyax) + clift * (axby - aybx)
    permanent = ((abs(bxcy) + abs(bycx)) * alift
                 + (abs(cxay) + abs(cyax)) * blift
                 + (abs(axby) + abs(aybx)) * clift)
    if abs(det) > _INCIRCLE_ERR * permanent:
        return 1 if det > 0 else -1
    return _incircle_exact_sign(pa, pb, pc, pq)


def _incircle_exact_sign(pa, pb, pc, pq) -> int:
    ax, ay = Fraction(float(pa[0])) - Fraction(float(pq[0])), \
        Fraction(float(pa[1])) - Fraction(float(pq[1]))
    bx, by = Fraction(float(pb[0])) - Fraction(float(pq[0])), \
        Fraction(float(pb[1])) - Fraction(float(pq[1]))
    cx, cy = Fraction(float(pc[0])) - Fraction(float(pq[0])), \
        Fraction(float(pc[1])) - Fraction(float(pq[1]))
    det = ((ax * ax + ay * ay) * (bx * cy - by * cx)
           + (bx * bx + by * by) * (cx * ay - cy * ax)
           + (cx * cx + cy * cy) * (ax * by - ay * bx))
    return (det > 0) - (det < 0)


def _real_conflicts(pts, tris, q) -> np.ndarray:
    """Strict in-circumcircle mask for counterclockwise triangles."""
    d = pts[tris] - q  # (T, 3, 2)
    adx, ady = d[:, 0, 0], d[:, 0, 1]
    bdx, bdy = d[:, 1, 0], d[:, 1, 1]
    cdx, cdy = d[:, 2, 0], d[:, 2, 1]
    alift = adx * adx + ady * ady
    blift = bdx * bdx + bdy * bdy
    clift = cdx * cdx + cdy * cdy
    bxcy, bycx = bdx * cdy, bdy * cdx
    cxay, cyax = cdx * ady, cdy * adx
    axby, aybx = adx * bdy, ady * bdx
    det = alift * (bxcy - bycx) + blift * (cxay - cyax) + clift * (axby - aybx)
    permanent = ((np.abs(bxcy) + np.abs(bycx)) * alift
                 + (np.abs(cxay) + np.abs(cyax)) * blift
                 + (np.abs(axby) + np.abs(aybx)) * clift)
    out = det > 0
    unsure = np.abs(det) <= _INCIRCLE_ERR * permanent
    for i in np.nonzero(unsure)[0]:
        a, b, c = tris[i]
        out[i] = _incircle_exact_sign(pts[a], pts[b], pts[c], q) > 0
    return out


def delaunay_triangulate(points) -> list[tuple[int, int, int]]:
    """Delaunay triangulation via incremental point insertion.

    The hull boundary is represented by ghost cells (directed hull edge
    plus a symbolic outer vertex), so no finite bounding triangle is
    needed and hull-adjacent slivers with huge circumcircles come out
    right.  All sign decisions are exact.  Returns sorted index triples;
    cocircular ties are normalized so the chosen diagonal of a tied quad
    is incident to its lowest node index.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValidationError("points", f"expected (n, 2), got {pts.shape}")
    n = pts.shape[0]
    if n < 3:
        raise ValidationError("points", f"need at least 3 points, got {n}")

    for i in range(n):
        d2 = np.sum((pts[i + 1:] - pts[i]) ** 2, axis=1)
        if d2.size and d2.min() < 1e-24:
            j = i + 1 + int(np.argmin(d2))
            raise ValidationError("points", f"points {i} and {j} coincide")

    # first triangle: points 0, 1, and the first point off their line
    third = None
    for k in range(2, n):
        if _orient_sign(pts[0], pts[1], pts[k]) != 0:
            third = k
            break
    if third is None:
        raise DegeneracyError("all points are collinear")
    i0, i1, i2 = 0, 1, third
    if _orient_sign(pts[i0], pts[i1], pts[i2]) < 0:
        i1, i2 = i2, i1
    reals = [(i0, i1, i2)]  # kept counterclockwise
    # ghost edges run clockwise around the hull: outside on their left
    ghosts = [(i1, i0), (i2, i1), (i0, i2)]

    for q in [i for i in range(2, n) if i != third]:
        pq = pts[q]
        real_mask = _real_conflicts(pts, np.asarray(reals, dtype=np.intp), pq)
        ghost_mask = []
        for a, b in ghosts:
            s = _orient_sign(pts[a], pts[b], pq)
            ghost_mask.append(s > 0 or (s == 0
                                        and _strictly_between(pts[a], pts[b], pq)))
        edges = set()
        for t, m in zip(reals, real_mask):
            if m:
                edges |= {(t[0], t[1]), (t[1], t[2]), (t[2], t[0])}
        for g, m in zip(ghosts, ghost_mask):
            if m:
                edges |= {(g[0], g[1]), (g[1], _GHOST), (_GHOST, g[0])}
        new_reals, new_ghosts = [], []
        for i, j in edges:
            if (j, i) in edges:
                continue  # interior to the cavity
            if i == _GHOST:
                new_ghosts.append((j, q))
            elif j == _GHOST:
                new_ghosts.append((q, i))
            else:
                new_reals.append((i, j, q))
        reals = [t for t, m in zip(reals, real_mask) if not m] + sorted(new_reals)
        ghosts = [g for g, m in zip(ghosts, ghost_mask) if not m] + sorted(new_ghosts)

    result = sorted(tuple(sorted(t)) for t in reals)
    return _normalize_cocircular(pts, result)


def _normalize_cocircular(pts, triangles):
    """Flip diagonals of exactly-cocircular quads so the kept diagonal is
    incident to the lowest node index of the quad (determinism rule)."""
    tris = [tuple(sorted(t)) for t in triangles]
    for _ in range(len(tris) * 4 + 16):
        edge_map = {}
        for idx, t in enumerate(tris):
            for e in ((t[0], t[1]), (t[1], t[2]), (t[0], t[2])):
                edge_map.setdefault(e, []).append(idx)
        flipped = False
        for e, owners in sorted(edge_map.items()):
            if len(owners) != 2:
                continue
            ta, tb = tris[owners[0]], tris[owners[1]]
            p = next(v for v in ta if v not in e)
            q = next(v for v in tb if v not in e)
            if min(e[0], e[1], p, q) in e:
                continue  # diagonal already touches the lowest index
            if _incircle_sign(pts[ta[0]], pts[ta[1]], pts[ta[2]], pts[q]) != 0:
                continue  # not an exact cocircular tie
            if not _convex_quad(pts, e, p, q):
                continue
            tris[owners[0]] = tuple(sorted((p, q, e[0])))
            tris[owners[1]] = tuple(sorted((p, q, e[1])))
            flipped = True
            break
        if not flipped:
            break
    tris.sort()
    return tris


def _convex_quad(pts, e, p, q):
    """p and q must lie strictly on opposite sides of edge e for a flip.

    For four concyclic points this single separation test already implies
    the chords cross, so the flipped diagonal is valid.
    """
    u, v = pts[e[0]], pts[e[1]]
    return _orient_sign(u, v, pts[p]) * _orient_sign(u, v, pts[q]) < 0


def build_adjacency(triangles, node_count: int) -> FaceGraphSpec:
    """Binary symmetric adjacency from triangle edges; zero diagonal."""
    a = np.zeros((node_count, node_count), dtype=np.float64)
    edges = set()
    for t in triangles:
        if max(t) >= node_count or min(t) < 0:
            raise ValidationError("triangles", f"index out of range in {t}")
        for i, j in ((t[0], t[1]), (t[1], t[2]), (t[0], t[2])):
            if i == j:
                raise ValidationError("triangles", f"degenerate triangle {t}")
            a[i, j] = a[j, i] = 1.0
            edges.add((min(i, j), max(i, j)))
    return FaceGraphSpec(node_count, frozenset(edges), a)


def normalize_adjacency(spec: FaceGraphSpec, mask=None) -> np.ndarray:
    """Λ^(-1/2)((A+I)⊙M)Λ^(-1/2) with Λ computed from A+I only.

    With mask None (≡1) this is the symmetric normalized adjacency with
    self-loops; a mask scales the numerator without touching Λ.
    """
    a_hat = spec.adjacency + np.eye(spec.node_count)
    if mask is not None:
        mask = np.asarray(mask, dtype=a_hat.dtype)
        if mask.shape != a_hat.shape:
            raise ShapeError(f"mask shape {mask.shape} != adjacency {a_hat.shape}")
        a_hat = a_hat * mask
    deg = spec.degree_with_self_loops()
    inv_sqrt = 1.0 / np.sqrt(deg)
    return inv_sqrt[:, None] * a_hat * inv_sqrt[None, :]


def normalized_with_degrees(spec: FaceGraphSpec) -> NormalizedAdjacency:
    return NormalizedAdjacency(normalize_adjacency(spec), spec.degree_with_self_loops())


def template_points() -> np.ndarray:
    """Canonical 78-point 2D template (copy)."""
    return np.array(TEMPLATE_POINTS, dtype=np.float64)


@lru_cache(maxsize=1)
def face_graph() -> FaceGraphSpec:
    """Triangulated template graph, built once per process."""
    pts = template_points()
    return build_adjacency(delaunay_triangulate(pts), pts.shape[0])


def graph_export_payload() -> dict:
    """JSON payload for the `graph export` CLI and the /graph endpoint."""
    spec = face_graph()
    pts = template_points()
    return {
        "node_count": spec.node_count,
        "edges": sorted([list(e) for e in spec.edges]),
        "template": [[float(x), float(y)] for x, y in pts],
    }


def is_connected(spec: FaceGraphSpec) -> bool:
    """Single connected component check (BFS over adjacency)."""
    n = spec.node_count
    seen = np.zeros(n, dtype=bool)
    stack = [0]
    seen[0] = True
    while stack:
        i = stack.pop()
        for j in np.nonzero(spec.adjacency[i])[0]:
            if not seen[j]:
                seen[j] = True
                stack.append(int(j))
    return bool(seen.all())
