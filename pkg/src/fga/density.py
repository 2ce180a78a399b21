"""Ground-truth density maps from head annotations.

Each head becomes a unit-mass Gaussian whose width follows the local crowd
geometry, ``sigma_i = beta * mean distance to its k nearest heads``.
"""
import csv
import json
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .formats import read_density, write_density, write_pgm

__all__ = [
    "HeadAnnotations", "GtConfig", "DensityMap", "knn_avg_distance", "kernel_sigmas",
    "generate_density_map", "ingest_annotations", "read_density", "write_density", "write_pgm",
]


class AnnotationError(ValueError):
    pass


@dataclass
class HeadAnnotations:
    points: np.ndarray  # (n, 2) as (x, y) in pixels
    image_w: int
    image_h: int

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64).reshape(-1, 2)
        self.points = pts
        if self.image_w < 1 or self.image_h < 1:
            raise AnnotationError(f"image size must be positive, got {self.image_w}x{self.image_h}")
        for i, (x, y) in enumerate(pts):
            if not (0 <= x < self.image_w and 0 <= y < self.image_h):
                raise AnnotationError(
                    f"point {i} at ({x}, {y}) lies outside the {self.image_w}x{self.image_h} image"
                )

    def __len__(self):
        return len(self.points)


@dataclass(frozen=True)
class GtConfig:
    beta: float = 0.3
    k: int = 3
    fixed_sigma: float = 4.0
    truncation: float = 4.0  # stamp radius in units of sigma
    renormalize: bool = True

    def __post_init__(self):
        if self.beta <= 0 or self.k < 1 or self.fixed_sigma <= 0 or self.truncation <= 0:
            raise ValueError(f"invalid ground-truth config {self}")


@dataclass
class DensityMap:
    grid: np.ndarray

    @property
    def count(self):
        return float(self.grid.sum())


def knn_avg_distance(points, k):
    """Mean distance from each point to its ``k`` nearest other points.

    With fewer than ``k`` neighbours available the mean runs over all of
    them; a lone point gets NaN, which callers treat as "use the fixed sigma".
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    n = len(pts)
    if n == 0:
        return np.zeros(0)
    if n == 1:
        return np.array([np.nan])
    diff = pts[:, None, :] - pts[None, :, :]
    dist = np.sqrt(diff[..., 0] ** 2 + diff[..., 1] ** 2)
    np.fill_diagonal(dist, np.inf)
    kk = min(k, n - 1)
    nearest = np.sort(dist, axis=1)[:, :kk]
    return nearest.sum(axis=1) / kk


def kernel_sigmas(ann, cfg=GtConfig()):
    d = knn_avg_distance(ann.points, cfg.k)
    sig = cfg.beta * d
    bad = ~np.isfinite(sig) | (sig <= 0)
    sig[bad] = cfg.fixed_sigma
    return sig


def generate_density_map(ann, cfg=GtConfig()):
    """Stamp one Gaussian per head; with ``renormalize`` each stamp sums to 1."""
    if ann.image_w < 1 or ann.image_h < 1:
        raise ValueError("cannot build a density map for an empty image")
    grid = np.zeros((ann.image_h, ann.image_w))
    if len(ann):
        _kernels.stamp_gaussians(grid, ann.points[:, 0], ann.points[:, 1],
                                 kernel_sigmas(ann, cfg), cfg.truncation, cfg.renormalize)
    return DensityMap(grid)


def _read_csv(path):
    points = []
    with open(path, newline="") as fh:
        rows = csv.reader(fh)
        header = next(rows, None)
        if header is None or [h.strip().lower() for h in header] != ["x", "y"]:
            raise AnnotationError(f"{path}: line 1: expected header 'x,y', got {header}")
        for lineno, row in enumerate(rows, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise AnnotationError(f"{path}: line {lineno}: expected 2 fields, got {len(row)}")
            try:
                points.append((float(row[0]), float(row[1])))
            except ValueError:
                raise AnnotationError(f"{path}: line {lineno}: non-numeric field in {row}") from None
    return points


def ingest_annotations(path, fmt=None, image_w=None, image_h=None):
    """Read head points from CSV (header ``x,y``) or JSON.

    CSV carries no image size, so ``image_w``/``image_h`` are required for
    it; for JSON they override the stored values when given.
    """
    path = str(path)
    fmt = fmt or ("json" if path.lower().endswith(".json") else "csv")
    if fmt == "csv":
        if image_w is None or image_h is None:
            raise AnnotationError("CSV annotations need image_w and image_h")
        points = _read_csv(path)
    elif fmt == "json":
        with open(path) as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as e:
                raise AnnotationError(f"{path}: line {e.lineno}: {e.msg}") from None
        try:
            image_w = int(doc["image_w"]) if image_w is None else image_w
            image_h = int(doc["image_h"]) if image_h is None else image_h
            raw = doc["points"]
        except (KeyError, TypeError, ValueError) as e:
            raise AnnotationError(f"{path}: missing or malformed field: {e}") from None
        points = []
        for i, p in enumerate(raw):
            if not isinstance(p, (list, tuple)) or len(p) != 2:
                raise AnnotationError(f"{path}: point {i} must be an [x, y] pair, got {p!r}")
            try:
                points.append((float(p[0]), float(p[1])))
            except (TypeError, ValueError):
                raise AnnotationError(f"{path}: point {i} has non-numeric coordinates {p!r}") from None
    else:
        raise AnnotationError(f"unknown annotation format {fmt!r}")
    return HeadAnnotations(np.array(points, dtype=np.float64).reshape(-1, 2), image_w, image_h)
