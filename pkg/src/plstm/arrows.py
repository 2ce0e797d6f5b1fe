"""Synthetic arrow-pointing images: does the arrow's ray hit the disk?

Geometry is sampled in unit-square coordinates and only scaled to pixels when
rasterizing, so a seed gives the same scene at every resolution. Every image
has its own RNG stream seeded from ``(seed, index)``; label ``index % 2``
makes the classes exactly balanced.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .errors import DatasetError, RangeError, RejectionLimit

GENERATOR_VERSION = "1"
MIN_RESOLUTION = 32
MAX_ATTEMPTS = 10_000

MARGIN = 1.0 / 16  # canvas margin; 2 px at the smallest resolution
LENGTH_RANGE = (0.15, 0.4)
RADIUS_RANGE = (0.05, 0.12)
WING_ANGLE = math.radians(30.0)
WING_FRACTION = 0.25
GAP = 1.0 / 32  # minimum clearance between arrow strokes and the disk
GRAZE = 1.0 / 64  # rays this close to tangency are resampled


@dataclass(frozen=True)
class ArrowScene:
    """Arrow and circle in unit-square coordinates ``(x, y)``, ``y`` pointing down."""

    resolution: int
    tail: tuple[float, float]
    tip: tuple[float, float]
    wing_length: float
    wing_angle: float
    center: tuple[float, float]
    radius: float
    label: bool

    def wings(self) -> tuple[tuple[float, float], tuple[float, float]]:
        return _wing_points(np.array(self.tail), np.array(self.tip), self.wing_length, self.wing_angle)

    def segments(self) -> list[tuple[tuple[float, float], tuple[float, float]]]:
        w1, w2 = self.wings()
        return [(self.tail, self.tip), (self.tip, w1), (self.tip, w2)]


def _wing_points(tail, tip, length, angle):
    back = tail - tip
    back = back / np.linalg.norm(back)
    pts = []
    for sgn in (1.0, -1.0):
        c, s = math.cos(sgn * angle), math.sin(sgn * angle)
        d = np.array([c * back[0] - s * back[1], s * back[0] + c * back[1]])
        pts.append(tuple(float(v) for v in tip + length * d))
    return pts[0], pts[1]


def ray_hits_disk(tail, tip, center, radius) -> bool:
    """Exact test: does the ray from ``tail`` through ``tip`` meet the closed disk?"""
    d = np.subtract(tip, tail, dtype=float)
    f = np.subtract(tail, center, dtype=float)
    a = d @ d
    b = 2.0 * (f @ d)
    c = f @ f - radius * radius
    disc = b * b - 4.0 * a * c
    if disc < 0:
        return False
    return (-b + math.sqrt(disc)) / (2.0 * a) > 0


def ray_march_hits(scene: ArrowScene, step_px: float = 0.1) -> bool:
    """Independent oracle: walk the ray in ``step_px`` pixel steps until it leaves the canvas."""
    res = scene.resolution
    tail = np.array(scene.tail) * res
    d = np.array(scene.tip) * res - tail
    d = d / np.linalg.norm(d)
    c = np.array(scene.center) * res
    r2 = (scene.radius * res) ** 2
    steps = int(math.ceil(2 * res / step_px))
    t = np.arange(steps + 1) * step_px
    pts = tail + t[:, None] * d
    return bool(np.any(np.sum((pts - c) ** 2, axis=1) <= r2))


def _point_segment_distance(p, a, b) -> float:
    ab = b - a
    t = np.clip((p - a) @ ab / (ab @ ab), 0.0, 1.0)
    return float(np.linalg.norm(p - (a + t * ab)))


def _inside(p, pad=0.0) -> bool:
    return all(MARGIN + pad <= v <= 1.0 - MARGIN - pad for v in p)


def sample_scene(rng: np.random.Generator, resolution: int, label: bool) -> ArrowScene:
    """Rejection-sample a scene whose exact label is ``label``."""
    if resolution < MIN_RESOLUTION:
        raise RangeError(f"resolution must be at least {MIN_RESOLUTION}")
    for _ in range(MAX_ATTEMPTS):
        tail = rng.uniform(MARGIN, 1.0 - MARGIN, 2)
        theta = rng.uniform(0.0, 2.0 * math.pi)
        length = rng.uniform(*LENGTH_RANGE)
        radius = rng.uniform(*RADIUS_RANGE)
        center = rng.uniform(MARGIN + radius, 1.0 - MARGIN - radius, 2)
        tip = tail + length * np.array([math.cos(theta), math.sin(theta)])
        wing_len = WING_FRACTION * length
        w1, w2 = _wing_points(tail, tip, wing_len, WING_ANGLE)
        if not all(_inside(p) for p in (tip, w1, w2)):
            continue
        segs = [(tail, tip), (tip, np.array(w1)), (tip, np.array(w2))]
        if min(_point_segment_distance(center, a, b) for a, b in segs) <= radius + GAP:
            continue
        # distance of the circle center from the ray's supporting line, for the grazing check
        u = (tip - tail) / length
        along = (center - tail) @ u
        perp = abs((center - tail)[0] * u[1] - (center - tail)[1] * u[0])
        if along > 0 and abs(perp - radius) < GRAZE:
            continue
        hit = ray_hits_disk(tail, tip, center, radius)
        if hit != bool(label):
            continue
        return ArrowScene(
            resolution,
            (float(tail[0]), float(tail[1])),
            (float(tip[0]), float(tip[1])),
            float(wing_len),
            WING_ANGLE,
            (float(center[0]), float(center[1])),
            float(radius),
            hit,
        )
    raise RejectionLimit(f"no scene with label {label} after {MAX_ATTEMPTS} attempts")


# -- rasterization --------------------------------------------------------------------------------


def _bresenham(x0, y0, x1, y1):
    dx, dy = abs(x1 - x0), -abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    while True:
        yield x0, y0
        if x0 == x1 and y0 == y1:
            return
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x0 += sx
        if e2 <= dx:
            err += dx
            y0 += sy


def _plot(img, x, y):
    h, w = img.shape
    if 0 <= x < w and 0 <= y < h:
        img[y, x] = 0


def draw_line(img: np.ndarray, p0, p1) -> None:
    """2-pixel-thick segment; the second pixel sits below (mostly horizontal) or right of each Bresenham pixel."""
    x0, y0, x1, y1 = (int(round(v)) for v in (*p0, *p1))
    horizontal = abs(x1 - x0) >= abs(y1 - y0)
    for x, y in _bresenham(x0, y0, x1, y1):
        _plot(img, x, y)
        if horizontal:
            _plot(img, x, y + 1)
        else:
            _plot(img, x + 1, y)


def _midpoint_circle(img, cx, cy, r):
    x, y, d = r, 0, 1 - r
    while x >= y:
        for px, py in ((x, y), (y, x), (-y, x), (-x, y), (-x, -y), (-y, -x), (y, -x), (x, -y)):
            _plot(img, cx + px, cy + py)
        y += 1
        if d < 0:
            d += 2 * y + 1
        else:
            x -= 1
            d += 2 * (y - x) + 1


def draw_ring(img: np.ndarray, center, radius: float) -> None:
    """2-pixel-thick ring: midpoint circles at the rounded radius and one pixel inside."""
    cx, cy = (int(round(v)) for v in center)
    r = max(1, int(round(radius)))
    for rr in (r, r - 1):
        if rr > 0:
            _midpoint_circle(img, cx, cy, rr)


def rasterize(scene: ArrowScene | None, resolution: int | None = None) -> np.ndarray:
    """Black strokes on white, ``(resolution, resolution)`` uint8. ``scene=None`` gives a blank canvas."""
    res = scene.resolution if scene is not None else int(resolution)
    img = np.full((res, res), 255, dtype=np.uint8)
    if scene is None:
        return img
    for a, b in scene.segments():
        draw_line(img, np.multiply(a, res), np.multiply(b, res))
    draw_ring(img, np.multiply(scene.center, res), scene.radius * res)
    return img


# -- dataset files --------------------------------------------------------------------------------


def write_pgm(path: str | Path, img: np.ndarray) -> None:
    h, w = img.shape
    Path(path).write_bytes(f"P5\n{w} {h}\n255\n".encode("ascii") + np.ascontiguousarray(img, np.uint8).tobytes())


def read_pgm(path: str | Path) -> np.ndarray:
    data = Path(path).read_bytes()
    parts = data.split(maxsplit=4)
    if len(parts) < 5 or parts[0] != b"P5" or parts[3] != b"255":
        raise DatasetError(f"{path}: not an 8-bit binary PGM")
    w, h = int(parts[1]), int(parts[2])
    pixels = parts[4]
    if len(pixels) != w * h:
        raise DatasetError(f"{path}: expected {w * h} pixel bytes, found {len(pixels)}")
    return np.frombuffer(pixels, dtype=np.uint8).reshape(h, w).copy()


@dataclass(frozen=True)
class DatasetSpec:
    count: int
    resolution: int
    seed: int
    out_dir: str


def scene_for_index(seed: int, index: int, resolution: int) -> ArrowScene:
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))
    return sample_scene(rng, resolution, bool(index % 2))


def generate_dataset(spec: DatasetSpec) -> Path:
    """Write ``img_<i>.pgm``, ``labels.csv`` and ``manifest.json`` into ``spec.out_dir``."""
    if spec.count < 0 or spec.count % 2:
        raise DatasetError("count must be a non-negative even number for an exactly balanced dataset")
    out = Path(spec.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for i in range(spec.count):
        scene = scene_for_index(spec.seed, i, spec.resolution)
        write_pgm(out / f"img_{i}.pgm", rasterize(scene))
        rows.append((i, int(scene.label)))
    with open(out / "labels.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "label"])
        w.writerows(rows)
    manifest = {**asdict(spec), "generator_version": GENERATOR_VERSION}
    del manifest["out_dir"]
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return out


def load_dataset(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    """Images ``(N, H, W)`` uint8 and labels ``(N,)`` from a generated directory."""
    root = Path(path)
    labels_file = root / "labels.csv"
    if not labels_file.is_file():
        raise DatasetError(f"{root}: no labels.csv")
    with open(labels_file, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise DatasetError(f"{root}: empty dataset")
    images = np.stack([read_pgm(root / f"img_{int(r['index'])}.pgm") for r in rows])
    labels = np.array([int(r["label"]) for r in rows], dtype=np.int64)
    return images, labels
