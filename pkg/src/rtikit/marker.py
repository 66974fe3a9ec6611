"""Detection of the square fiducial marker.

The marker is a thick black square border on white stock with a white dot
punched into the border at one corner. Detection runs classical machinery:
global Otsu threshold, hierarchical border following on the ink mask,
Ramer-Douglas-Peucker simplification to find nested quads, then a dot search
over corresponding inner/outer vertex pairs to anchor the corner order.

Corners are reported in continuous image coordinates (pixel centers at
half-integers) with sub-pixel refinement: contour points along each quad edge
are pushed to the luminance gradient extremum along the edge normal, a line
is fitted per edge, and adjacent lines are intersected.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import RgbImage, luminance
from .errors import (
    AmbiguousMarkerError,
    DegenerateImageError,
    MarkerNotFoundError,
)

# Marker model geometry in marker units: outer square side 1.5, border
# thickness 0.25, so the inner (payload) square has side 1.0. The dot sits
# midway between an inner corner and its outer corner.
OUTER_SIDE = 1.5
INNER_SIDE = 1.0
BORDER = (OUTER_SIDE - INNER_SIDE) / 2.0
DOT_RADIUS = 0.08

RDP_PERIMETER_FRACTION = 0.02
DOT_PROBE_RADIUS_PX = 3.0

POLARITY_INK_OUTER = "white_to_black"  # outer border of an ink region
POLARITY_INK_HOLE = "black_to_white"  # hole border inside an ink region


@dataclass(frozen=True, eq=False)
class Contour:
    """A closed border polyline in continuous image coordinates.

    ``parent`` indexes the enclosing contour in the list returned by
    :func:`extract_contours`; None for top-level contours.
    """

    points: np.ndarray  # (M, 2) float64
    closed: bool
    parent: int | None
    polarity: str

    def __post_init__(self):
        if self.closed and len(self.points) < 1:
            raise ValueError("closed contour needs at least one point")

    def perimeter(self) -> float:
        p = self.points
        d = np.diff(np.vstack([p, p[:1]]), axis=0)
        return float(np.sqrt((d * d).sum(axis=1)).sum())


@dataclass(frozen=True, eq=False)
class MarkerDetection:
    corners: np.ndarray  # (4, 2), clockwise, corners[0] adjacent to the dot
    dot_center: np.ndarray  # (2,)

    def __post_init__(self):
        if self.corners.shape != (4, 2):
            raise ValueError("need exactly 4 corners")
        if _signed_area(self.corners) <= 0:
            raise ValueError("corners must be in clockwise (image) order")
        if not _is_convex(self.corners):
            raise ValueError("corners must form a convex quadrilateral")


def _signed_area(pts: np.ndarray) -> float:
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _is_convex(pts: np.ndarray) -> bool:
    n = len(pts)
    sign = 0
    for i in range(n):
        a, b, c = pts[i], pts[(i + 1) % n], pts[(i + 2) % n]
        cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0])
        if abs(cross) < 1e-12:
            continue
        s = 1 if cross > 0 else -1
        if sign == 0:
            sign = s
        elif s != sign:
            return False
    return sign != 0


def otsu_threshold(histogram) -> int:
    """Threshold maximizing between-class variance; ties go to the smallest t.

    Classes are bins <= t versus bins > t.
    """
    h = np.asarray(histogram, dtype=np.float64)
    if h.shape != (256,):
        raise ValueError("histogram must have 256 bins")
    if np.any(h < 0):
        raise ValueError("histogram counts must be non-negative")
    if int(np.count_nonzero(h)) < 2:
        raise DegenerateImageError("single-valued image has no threshold")

    levels = np.arange(256, dtype=np.float64)
    total = h.sum()
    w0 = np.cumsum(h)
    m0 = np.cumsum(h * levels)
    mu_total = m0[-1]

    w1 = total - w0
    valid = (w0 > 0) & (w1 > 0)
    sigma_b = np.zeros(256)
    mu0 = np.divide(m0, w0, out=np.zeros(256), where=valid)
    mu1 = np.divide(mu_total - m0, w1, out=np.zeros(256), where=valid)
    sigma_b[valid] = (w0 * w1)[valid] * (mu0 - mu1)[valid] ** 2
    return int(np.argmax(sigma_b))


# Moore neighborhood in clockwise order for y-down image coordinates.
_DIRS = [(0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1), (-1, 0), (-1, 1)]
_DIR_INDEX = {d: i for i, d in enumerate(_DIRS)}


def extract_contours(binary) -> list[Contour]:
    """Suzuki-style hierarchical border following on a 0/1 image.

    Foreground (value 1) is the dark ink. Outer borders of ink regions get
    polarity white->black, hole borders black->white; parent links encode
    containment.
    """
    arr = np.asarray(binary.data if hasattr(binary, "data") else binary)
    if arr.ndim != 2:
        raise ValueError("binary image must be 2-D")
    uniq = np.unique(arr)
    if not np.all(np.isin(uniq, (0, 1))):
        raise ValueError("binary image must contain only 0 and 1")

    f = arr.astype(np.int32).copy()
    h, w = f.shape

    border_type: dict[int, str] = {1: "hole"}  # the frame acts as a hole border
    border_parent: dict[int, int | None] = {1: None}
    border_points: dict[int, list[tuple[int, int]]] = {}
    nbd = 1

    for i in range(h):
        lnbd = 1
        row = f[i]
        for j in np.nonzero(row)[0]:
            j = int(j)
            fij = int(f[i, j])
            start = None
            if fij == 1 and (j == 0 or f[i, j - 1] == 0):
                start = ("outer", (i, j - 1))
            elif fij >= 1 and (j == w - 1 or f[i, j + 1] == 0):
                start = ("hole", (i, j + 1))

            if start is not None:
                btype, (i2, j2) = start
                if btype == "hole" and fij > 1:
                    lnbd = fij
                nbd += 1
                # parent table: same type -> grandparent, different -> LNBD
                if border_type[lnbd] == btype:
                    border_parent[nbd] = border_parent[lnbd]
                else:
                    border_parent[nbd] = lnbd
                border_type[nbd] = btype
                border_points[nbd] = _follow_border(f, i, j, i2, j2, nbd)

            if f[i, j] != 1:
                lnbd = abs(int(f[i, j]))

    contours: list[Contour] = []
    nbd_to_idx: dict[int, int] = {}
    for b in sorted(border_points):
        parent_nbd = border_parent[b]
        parent_idx = nbd_to_idx.get(parent_nbd) if parent_nbd not in (None, 1) else None
        pts = np.array(border_points[b], dtype=np.float64)
        # (row, col) pixels -> (x, y) pixel centers
        xy = np.column_stack([pts[:, 1] + 0.5, pts[:, 0] + 0.5])
        polarity = POLARITY_INK_OUTER if border_type[b] == "outer" else POLARITY_INK_HOLE
        nbd_to_idx[b] = len(contours)
        contours.append(Contour(points=xy, closed=True, parent=parent_idx, polarity=polarity))
    return contours


def _follow_border(f, i, j, i2, j2, nbd) -> list[tuple[int, int]]:
    h, w = f.shape

    def at(y, x):
        return f[y, x] if 0 <= y < h and 0 <= x < w else 0

    # 3.1: clockwise scan from (i2, j2) for the first foreground neighbor.
    start_dir = _DIR_INDEX[(i2 - i, j2 - j)]
    i1 = j1 = None
    for k in range(8):
        dy, dx = _DIRS[(start_dir + k) % 8]
        if at(i + dy, j + dx) != 0:
            i1, j1 = i + dy, j + dx
            break
    if i1 is None:
        f[i, j] = -nbd
        return [(i, j)]

    i2, j2 = i1, j1
    i3, j3 = i, j
    points = []
    while True:
        # 3.3: counterclockwise scan from the neighbor after (i2, j2).
        start = _DIR_INDEX[(i2 - i3, j2 - j3)]
        examined_east_zero = False
        i4 = j4 = None
        for k in range(1, 9):
            dy, dx = _DIRS[(start - k) % 8]
            y, x = i3 + dy, j3 + dx
            if at(y, x) != 0:
                i4, j4 = y, x
                break
            if (dy, dx) == (0, 1):
                examined_east_zero = True
        # 3.4: mark the current border pixel.
        if examined_east_zero:
            f[i3, j3] = -nbd
        elif f[i3, j3] == 1:
            f[i3, j3] = nbd
        points.append((i3, j3))
        # 3.5: termination -- back at the start in the starting configuration.
        if i4 == i and j4 == j and i3 == i1 and j3 == j1:
            break
        i2, j2 = i3, j3
        i3, j3 = i4, j4
    return points


def _perpendicular_distance(pts: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ab = b - a
    n = np.hypot(ab[0], ab[1])
    if n < 1e-12:
        return np.hypot(pts[:, 0] - a[0], pts[:, 1] - a[1])
    return np.abs((pts[:, 0] - a[0]) * ab[1] - (pts[:, 1] - a[1]) * ab[0]) / n


def rdp_simplify(polyline, epsilon: float) -> np.ndarray:
    """Ramer-Douglas-Peucker simplification of an open polyline.

    Endpoints are always retained; every removed point lies within epsilon of
    the simplified polyline.
    """
    pts = np.asarray(polyline, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 2:
        raise ValueError("polyline must be an (N>=2, 2) array")
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    keep = _rdp_indices(pts, 0, len(pts) - 1, epsilon)
    return pts[sorted(keep)]


def _rdp_indices(pts: np.ndarray, lo: int, hi: int, eps: float) -> set[int]:
    keep = {lo, hi}
    stack = [(lo, hi)]
    while stack:
        a, b = stack.pop()
        if b - a < 2:
            continue
        seg = pts[a + 1 : b]
        d = _perpendicular_distance(seg, pts[a], pts[b])
        m = int(np.argmax(d))
        if d[m] > eps:
            mid = a + 1 + m
            keep.add(mid)
            stack.append((a, mid))
            stack.append((mid, b))
    return keep


def _rdp_closed_indices(ring: np.ndarray, eps: float) -> list[int]:
    """RDP for a closed ring; returns kept indices in ring order."""
    m = len(ring)
    if m <= 3:
        return list(range(m))
    a0 = int(np.argmax(((ring - ring.mean(axis=0)) ** 2).sum(axis=1)))
    d = ((ring - ring[a0]) ** 2).sum(axis=1)
    a1 = int(np.argmax(d))
    lo, hi = sorted((a0, a1))

    keep: set[int] = set()
    chain1 = ring[lo : hi + 1]
    for k in _rdp_indices(chain1, 0, len(chain1) - 1, eps):
        keep.add(lo + k)
    chain2 = np.vstack([ring[hi:], ring[: lo + 1]])
    for k in _rdp_indices(chain2, 0, len(chain2) - 1, eps):
        keep.add((hi + k) % m)
    return sorted(keep)


def _bilinear(gray: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Sample continuous positions (x, y); edge-clamped."""
    h, w = gray.shape
    u = pts[:, 0] - 0.5
    v = pts[:, 1] - 0.5
    x0 = np.clip(np.floor(u).astype(int), 0, w - 1)
    y0 = np.clip(np.floor(v).astype(int), 0, h - 1)
    x1 = np.clip(x0 + 1, 0, w - 1)
    y1 = np.clip(y0 + 1, 0, h - 1)
    fx = np.clip(u - x0, 0.0, 1.0)
    fy = np.clip(v - y0, 0.0, 1.0)
    top = gray[y0, x0] * (1 - fx) + gray[y0, x1] * fx
    bot = gray[y1, x0] * (1 - fx) + gray[y1, x1] * fx
    return top * (1 - fy) + bot * fy


_PROFILE_OFFSETS = np.arange(-2.0, 2.01, 0.5)


def _refine_edge_points(gray: np.ndarray, pts: np.ndarray, normal: np.ndarray) -> np.ndarray:
    """Push contour points to the gradient extremum along the edge normal."""
    samples = pts[:, None, :] + _PROFILE_OFFSETS[None, :, None] * normal[None, None, :]
    prof = _bilinear(gray, samples.reshape(-1, 2)).reshape(len(pts), -1)
    grad = np.abs(prof[:, 2:] - prof[:, :-2])  # centered differences, step 0.5
    mid = np.argmax(grad, axis=1)
    mid = np.clip(mid, 1, grad.shape[1] - 2)
    rows = np.arange(len(pts))
    g0, g1, g2 = grad[rows, mid - 1], grad[rows, mid], grad[rows, mid + 1]
    denom = g0 - 2 * g1 + g2
    delta = np.where(np.abs(denom) > 1e-12, 0.5 * (g0 - g2) / denom, 0.0)
    delta = np.clip(delta, -1.0, 1.0)
    s = _PROFILE_OFFSETS[mid + 1] + delta * 0.5
    return pts + s[:, None] * normal[None, :]


def _fit_line(pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Total-least-squares line through points: (centroid, unit direction)."""
    c = pts.mean(axis=0)
    u, s, vt = np.linalg.svd(pts - c, full_matrices=False)
    return c, vt[0]


def _intersect_lines(c1, d1, c2, d2):
    a = np.column_stack([d1, -d2])
    if abs(np.linalg.det(a)) < 1e-9:
        return None
    t = np.linalg.solve(a, c2 - c1)
    return c1 + t[0] * d1


def _edge_arc(ring: np.ndarray, a: int, b: int) -> np.ndarray:
    if b > a:
        return ring[a : b + 1]
    return np.vstack([ring[a:], ring[: b + 1]])


def _refine_quad(gray: np.ndarray, ring: np.ndarray, vidx: list[int]) -> np.ndarray:
    """Sub-pixel corners via per-edge gradient snapping and line intersection."""
    lines = []
    for k in range(4):
        a, b = vidx[k], vidx[(k + 1) % 4]
        arc = _edge_arc(ring, a, b)
        va, vb = ring[a], ring[b]
        edge = vb - va
        elen = np.hypot(*edge)
        if elen < 1e-9 or len(arc) < 4:
            lines.append(None)
            continue
        tangent = edge / elen
        normal = np.array([-tangent[1], tangent[0]])
        # keep the straight mid-section of the edge, away from the corners
        t = (arc - va) @ tangent
        margin = max(2.0, 0.12 * elen)
        core = arc[(t > margin) & (t < elen - margin)]
        if len(core) < 4:
            core = arc[1:-1]
        if len(core) < 2:
            lines.append(None)
            continue
        refined = _refine_edge_points(gray, core, normal)
        lines.append(_fit_line(refined))

    corners = np.empty((4, 2))
    for k in range(4):
        prev, cur = lines[(k - 1) % 4], lines[k]
        pt = None
        if prev is not None and cur is not None:
            pt = _intersect_lines(prev[0], prev[1], cur[0], cur[1])
        corners[k] = pt if pt is not None else ring[vidx[k]]
    return corners


def _order_clockwise_from(pts: np.ndarray, first: int) -> np.ndarray:
    if _signed_area(pts) < 0:
        order = [first] + [(first - k) % 4 for k in (1, 2, 3)]
    else:
        order = [(first + k) % 4 for k in range(4)]
    return pts[order]


def _disc_mean(gray: np.ndarray, center: np.ndarray, radius: float) -> float:
    h, w = gray.shape
    x0 = int(np.floor(center[0] - radius))
    x1 = int(np.ceil(center[0] + radius)) + 1
    y0 = int(np.floor(center[1] - radius))
    y1 = int(np.ceil(center[1] + radius)) + 1
    xs = np.arange(max(0, x0), min(w, x1))
    ys = np.arange(max(0, y0), min(h, y1))
    if len(xs) == 0 or len(ys) == 0:
        return 0.0
    gx, gy = np.meshgrid(xs + 0.5, ys + 0.5)
    mask = (gx - center[0]) ** 2 + (gy - center[1]) ** 2 <= radius * radius
    if not mask.any():
        return 0.0
    return float(gray[np.ix_(ys, xs)][mask].mean())


def detect_marker(img: RgbImage) -> MarkerDetection:
    """Locate the marker and return its inner corners, clockwise from the dot.

    Raises MarkerNotFoundError / AmbiguousMarkerError; both mean "skip this
    frame" to the pipeline.
    """
    gray = luminance(img)
    q = np.clip(np.rint(gray * 255.0), 0, 255).astype(np.int64)
    hist = np.bincount(q.ravel(), minlength=256)
    try:
        t = otsu_threshold(hist)
    except DegenerateImageError as e:
        raise MarkerNotFoundError(f"degenerate image: {e}") from None
    white_level = (t + 0.5) / 255.0

    binary = (q <= t).astype(np.float32)
    contours = extract_contours(binary)

    quads: dict[int, tuple[np.ndarray, list[int]]] = {}
    for idx, c in enumerate(contours):
        if len(c.points) < 8:
            continue
        peri = c.perimeter()
        if peri < 20.0:
            continue
        vidx = _rdp_closed_indices(c.points, RDP_PERIMETER_FRACTION * peri)
        if len(vidx) != 4:
            continue
        verts = c.points[vidx]
        if not _is_convex(verts) or abs(_signed_area(verts)) < 25.0:
            continue
        quads[idx] = (verts, vidx)

    accepted = []
    saw_ambiguity = False
    for idx, (inner_verts, inner_vidx) in quads.items():
        c = contours[idx]
        if c.polarity != POLARITY_INK_HOLE:
            continue
        if c.parent is None or c.parent not in quads:
            continue
        if contours[c.parent].polarity != POLARITY_INK_OUTER:
            continue
        outer_verts, _ = quads[c.parent]

        # nearest-vertex pairing must be a bijection
        pairing = []
        for v in inner_verts:
            d = ((outer_verts - v) ** 2).sum(axis=1)
            pairing.append(int(np.argmin(d)))
        if len(set(pairing)) != 4:
            saw_ambiguity = True
            continue

        dot_hits = []
        for k in range(4):
            mid = (inner_verts[k] + outer_verts[pairing[k]]) / 2.0
            if _disc_mean(gray, mid, DOT_PROBE_RADIUS_PX) > white_level:
                dot_hits.append((k, mid))
        if len(dot_hits) == 1:
            accepted.append((idx, inner_vidx, dot_hits[0]))
        elif len(dot_hits) > 1:
            saw_ambiguity = True

    if len(accepted) > 1:
        raise AmbiguousMarkerError(f"{len(accepted)} marker candidates found")
    if not accepted:
        if saw_ambiguity:
            raise AmbiguousMarkerError("dot test or vertex pairing was ambiguous")
        raise MarkerNotFoundError("no nested quad pair with a single white dot")

    idx, inner_vidx, (dot_k, dot_mid) = accepted[0]
    ring = contours[idx].points
    refined = _refine_quad(gray, ring, inner_vidx)
    corners = _order_clockwise_from(refined, dot_k)
    return MarkerDetection(corners=corners, dot_center=dot_mid)
