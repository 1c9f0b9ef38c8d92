"""Seeded point-cloud samplers for the four test manifolds.

All randomness goes through numpy's PCG64 generator so that identical
(n, seed, params) produce bit-identical clouds on any platform. Intrinsic
parameters are kept alongside the ambient coordinates for visualization and
ground-truth checks; nothing downstream trains on them.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np


@dataclass
class PointCloud:
    """Ambient points in R^N with optional aligned intrinsic parameters."""

    points: np.ndarray  # (n, ambient_dim)
    ambient_dim: int
    intrinsic: np.ndarray | None = None  # (n, k), aligned with points
    label: str = ""

    def __post_init__(self) -> None:
        self.points = np.asarray(self.points, dtype=np.float64)
        if self.points.ndim != 2 or self.points.shape[1] != self.ambient_dim:
            raise ValueError(
                f"points must be (n, {self.ambient_dim}), got {self.points.shape}"
            )
        if self.intrinsic is not None:
            self.intrinsic = np.asarray(self.intrinsic, dtype=np.float64)
            if len(self.intrinsic) != len(self.points):
                raise ValueError(
                    f"intrinsic has {len(self.intrinsic)} rows for "
                    f"{len(self.points)} points"
                )

    def __len__(self) -> int:
        return len(self.points)


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def sample_sphere(n: int, seed: int) -> PointCloud:
    """Uniform points on the unit 2-sphere: draw standard Gaussians in R^3
    and normalize to unit norm."""
    if n < 1:
        raise ValueError("n must be >= 1")
    g = _rng(seed)
    x = g.standard_normal((n, 3))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    return PointCloud(points=x, ambient_dim=3, label="sphere")


def mobius_point(u: float | np.ndarray, v: float | np.ndarray) -> np.ndarray:
    """Standard Mobius band parameterization, u in [0, 2pi), v in [-1, 1].

    The half-angle terms give the band its single twist: going once around in
    u reverses the width direction v.
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    r = 1.0 + 0.5 * v * np.cos(0.5 * u)
    return np.stack(
        [r * np.cos(u), r * np.sin(u), 0.5 * v * np.sin(0.5 * u)], axis=-1
    )


def sample_mobius(n: int, seed: int) -> PointCloud:
    """Mobius band in R^3, uniform in the (u, v) parameter rectangle."""
    if n < 1:
        raise ValueError("n must be >= 1")
    g = _rng(seed)
    u = g.uniform(0.0, 2.0 * np.pi, n)
    v = g.uniform(-1.0, 1.0, n)
    return PointCloud(
        points=mobius_point(u, v),
        ambient_dim=3,
        intrinsic=np.stack([u, v], axis=1),
        label="mobius",
    )


def klein_point(
    u: float | np.ndarray, v: float | np.ndarray, m: float
) -> np.ndarray:
    """Klein bottle immersion in R^4; injective on the quotient when m > 1."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    return np.stack(
        [
            (m + np.cos(v)) * np.cos(u),
            (m + np.cos(v)) * np.sin(u),
            np.sin(v) * np.cos(0.5 * u),
            np.sin(v) * np.sin(0.5 * u),
        ],
        axis=-1,
    )


def sample_klein(n: int, m: float, seed: int) -> PointCloud:
    """Klein bottle in R^4, u and v uniform in [0, 2pi)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if m <= 1.0:
        raise ValueError(f"m must be > 1 for an injective immersion, got {m}")
    g = _rng(seed)
    u = g.uniform(0.0, 2.0 * np.pi, n)
    v = g.uniform(0.0, 2.0 * np.pi, n)
    return PointCloud(
        points=klein_point(u, v, m),
        ambient_dim=4,
        intrinsic=np.stack([u, v], axis=1),
        label="klein",
    )


# 10x10 patches; pixel centers live on a [-1, 1]^2 grid, so a blur of 0.5
# equals a quarter of the patch width.
PATCH_SIDE = 10
_PIX = (2.0 * np.arange(PATCH_SIDE) + 1.0) / PATCH_SIDE - 1.0


def render_line_patch(theta: float, offset: float, blur: float) -> np.ndarray:
    """Render one blurred-line patch, flattened to R^100 and unit-normalized.

    The line has direction (cos theta, sin theta) and passes through
    offset * (-sin theta, cos theta); pixel intensity decays with the
    Gaussian of the pixel-to-line distance. A line at angle theta + pi with
    mirrored offset is the same line, so those patches are identical.
    """
    if blur <= 0.0:
        raise ValueError("blur must be > 0")
    xs, ys = np.meshgrid(_PIX, _PIX, indexing="xy")
    # signed distance of each pixel center to the line
    dist = -np.sin(theta) * xs + np.cos(theta) * ys - offset
    img = np.exp(-(dist**2) / (2.0 * blur**2)).ravel()
    return img / np.linalg.norm(img)


def sample_line_patches(
    n_angles: int, n_offsets: int, blur: float = 0.5
) -> PointCloud:
    """Grid of blurred-line patch images in R^100.

    Angles cover [0, pi) (a line at theta and theta + pi is the same image up
    to mirroring the offset, so the patch space is a projective plane);
    offsets span the patch, linspace(-1, 1).
    """
    if n_angles < 1 or n_offsets < 1:
        raise ValueError("n_angles and n_offsets must be >= 1")
    thetas = np.linspace(0.0, np.pi, n_angles, endpoint=False)
    offsets = np.linspace(-1.0, 1.0, n_offsets)
    pts = np.empty((n_angles * n_offsets, PATCH_SIDE**2))
    intr = np.empty((n_angles * n_offsets, 2))
    i = 0
    for th in thetas:
        for off in offsets:
            pts[i] = render_line_patch(th, off, blur)
            intr[i] = (th, off)
            i += 1
    return PointCloud(
        points=pts, ambient_dim=PATCH_SIDE**2, intrinsic=intr, label="rp2_patches"
    )


def to_csv(cloud: PointCloud, path: str) -> None:
    """One row per point: ambient coordinates x0..x{N-1}, then intrinsic
    parameters t0..t{k-1} when present."""
    n_int = 0 if cloud.intrinsic is None else cloud.intrinsic.shape[1]
    header = [f"x{i}" for i in range(cloud.ambient_dim)] + [
        f"t{i}" for i in range(n_int)
    ]
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(header)
        for i in range(len(cloud)):
            row = [f"{v:.17g}" for v in cloud.points[i]]
            if cloud.intrinsic is not None:
                row += [f"{v:.17g}" for v in cloud.intrinsic[i]]
            w.writerow(row)


def from_csv(path: str, label: str = "") -> PointCloud:
    with open(path, newline="") as f:
        r = csv.reader(f)
        header = next(r)
        rows = [[float(v) for v in row] for row in r]
    n_amb = sum(1 for h in header if h.startswith("x"))
    data = np.asarray(rows, dtype=np.float64)
    intrinsic = data[:, n_amb:] if data.shape[1] > n_amb else None
    return PointCloud(
        points=data[:, :n_amb], ambient_dim=n_amb, intrinsic=intrinsic, label=label
    )
