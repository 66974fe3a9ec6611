"""Homography estimation and factorization into camera pose / light direction.

A plane-induced homography H with K known factors (up to scale) as
K^-1 H = alpha [r1 r2 t]; the scale is fixed by requiring r1, r2 to be unit
columns of a rotation, alpha ~ 2 / (|m1| + |m2|). The third rotation column
is r1 x r2 and the result is projected to the nearest rotation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import CameraIntrinsics, LightDirection
from .errors import DegenerateGeometryError


@dataclass(frozen=True, eq=False)
class Homography:
    """3x3 projective map, defined up to scale."""

    matrix: np.ndarray

    def __post_init__(self):
        m = self.matrix
        if m.shape != (3, 3):
            raise ValueError("homography must be 3x3")
        if not np.all(np.isfinite(m)):
            raise ValueError("homography must be finite")
        n = np.linalg.norm(m)
        if n < 1e-15 or abs(np.linalg.det(m / n)) <= 1e-12:
            raise DegenerateGeometryError("homography is (near-)singular")

    def apply(self, pts: np.ndarray) -> np.ndarray:
        """Map (N, 2) points through the homography."""
        p = np.asarray(pts, dtype=np.float64)
        ph = np.column_stack([p, np.ones(len(p))])
        q = ph @ self.matrix.T
        return q[:, :2] / q[:, 2:3]

    def inverse(self) -> "Homography":
        return Homography(np.linalg.inv(self.matrix))


@dataclass(frozen=True, eq=False)
class Pose:
    """Rigid transform (R, t) of the moving camera in the marker frame.

    t is expressed in marker-side units; only its direction feeds the
    light-direction estimate, so the absolute scale never matters.
    """

    r: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        if self.r.shape != (3, 3) or self.t.shape != (3,):
            raise ValueError("pose must have a 3x3 rotation and 3-vector translation")
        if np.linalg.norm(self.r.T @ self.r - np.eye(3)) > 1e-9:
            raise ValueError("R is not orthonormal")
        if abs(np.linalg.det(self.r) - 1.0) > 1e-9:
            raise ValueError("R is not a proper rotation")
        if not self.t[2] > 0:
            raise ValueError("camera must sit above the marker plane (t.z > 0)")


def _normalize_points(pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Hartley normalization: zero centroid, mean distance sqrt(2)."""
    c = pts.mean(axis=0)
    d = np.sqrt(((pts - c) ** 2).sum(axis=1)).mean()
    if d < 1e-12:
        raise DegenerateGeometryError("coincident points")
    s = np.sqrt(2.0) / d
    T = np.array([[s, 0.0, -s * c[0]], [0.0, s, -s * c[1]], [0.0, 0.0, 1.0]])
    ph = np.column_stack([pts, np.ones(len(pts))]) @ T.T
    return ph, T


def _any_three_collinear(pts: np.ndarray, tol: float = 1e-9) -> bool:
    n = len(pts)
    scale = max(1.0, float(np.abs(pts).max()))
    for i in range(n):
        for j in range(i + 1, n):
            for k in range(j + 1, n):
                a, b, c = pts[i], pts[j], pts[k]
                cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
                if abs(cross) < tol * scale * scale:
                    return True
    return False


def estimate_homography(src, dst) -> Homography:
    """DLT estimate of H with H . src_i ~ dst_i from four correspondences.

    Points are Hartley-normalized before building the design matrix. H is
    rescaled so h33 = 1 when that entry is meaningful, unit Frobenius norm
    otherwise.
    """
    s = np.asarray(src, dtype=np.float64)
    d = np.asarray(dst, dtype=np.float64)
    if s.shape != (4, 2) or d.shape != (4, 2):
        raise ValueError("estimate_homography expects 4 source and 4 destination points")
    if _any_three_collinear(s) or _any_three_collinear(d):
        raise DegenerateGeometryError("three of the input points are collinear")

    sn, Ts = _normalize_points(s)
    dn, Td = _normalize_points(d)

    rows = []
    for (x, y, _), (u, v, _) in zip(sn, dn):
        rows.append([x, y, 1, 0, 0, 0, -u * x, -u * y, -u])
        rows.append([0, 0, 0, x, y, 1, -v * x, -v * y, -v])
    A = np.array(rows)
    _, _, vt = np.linalg.svd(A)
    Hn = vt[-1].reshape(3, 3)

    H = np.linalg.inv(Td) @ Hn @ Ts
    if abs(H[2, 2]) > 1e-12:
        H = H / H[2, 2]
    else:
        H = H / np.linalg.norm(H)
    return Homography(H)


def factor_homography(h: Homography, k: CameraIntrinsics) -> Pose:
    """Factor K^-1 H into (R, t); sign-disambiguated so t.z > 0."""
    m = np.linalg.solve(k.matrix, h.matrix)
    m1, m2, m3 = m[:, 0], m[:, 1], m[:, 2]
    norms = np.linalg.norm(m1) + np.linalg.norm(m2)
    if norms < 1e-12:
        raise DegenerateGeometryError("homography columns vanish under K^-1")
    alpha = 2.0 / norms
    r1, r2, t = alpha * m1, alpha * m2, alpha * m3
    r3 = np.cross(r1, r2)

    q = np.column_stack([r1, r2, r3])
    u, _, vt = np.linalg.svd(q)
    r = u @ vt
    if np.linalg.det(r) < 0:
        r = u @ np.diag([1.0, 1.0, -1.0]) @ vt

    if t[2] < 0:
        # H and -H are the same homography; pick the camera-above solution.
        r = np.column_stack([-r[:, 0], -r[:, 1], r[:, 2]])
        t = -t
    return Pose(r=r, t=t)


def invert_pose(p: Pose) -> Pose:
    """Swap the roles of the two frames: (R, t) -> (R^T, -R^T t)."""
    return Pose(r=p.r.T.copy(), t=-(p.r.T @ p.t))


def light_direction(p: Pose) -> LightDirection:
    """Normalize the pose translation into the per-frame light direction."""
    n = float(np.linalg.norm(p.t))
    if n < 1e-9:
        raise DegenerateGeometryError("zero translation has no direction")
    return LightDirection.from_vector(p.t)


def marker_light_direction(
    corners: np.ndarray, k: CameraIntrinsics, marker_size: float = 1.0
) -> LightDirection:
    """Light direction, in crop coordinates, of a camera observing the marker.

    ``corners`` are the four detected inner corners (clockwise in the image,
    starting at the dot) in image coordinates. The homography mapping the
    marker model square (0,0),(S,0),(S,S),(0,S) onto them factors into the
    marker-to-camera transform, whose inverse places the camera (and its
    flash) relative to the marker.

    The crop frame shares the image's y-down handedness while its z axis
    points up toward the cameras, so the camera center comes out of the
    right-handed factorization with a negative third component; the light
    direction in crop coordinates is (cx, cy, -cz), normalized.
    """
    s = float(marker_size)
    model = np.array([[0.0, 0.0], [s, 0.0], [s, s], [0.0, s]])
    h = estimate_homography(model, corners)
    marker_to_cam = factor_homography(h, k)
    center = -(marker_to_cam.r.T @ marker_to_cam.t)
    return LightDirection.from_vector([center[0], center[1], -center[2]])
