import math

import numpy as np
import pytest
from shapely.geometry import Polygon

from loopkit.geometry import Obb


def random_obb(rng, center_range=100.0, size_range=(5.0, 80.0)):
    """Random valid oriented box; independent of the library constructors
    beyond the public factory."""
    w = rng.uniform(*size_range)
    h = rng.uniform(*size_range)
    theta = rng.uniform(0.0, 2.0 * math.pi)
    cx, cy = rng.uniform(-center_range, center_range, size=2)
    return Obb.from_center_size_angle((cx, cy), w, h, theta)


def shapely_iou(a: Obb, b: Obb) -> float:
    """Independent IoU oracle via shapely's polygon clipping."""
    pa = Polygon(a.vertices)
    pb = Polygon(b.vertices)
    inter = pa.intersection(pb).area
    union = pa.union(pb).area
    return inter / union if union > 0 else 0.0


def monte_carlo_iou(a: Obb, b: Obb, n: int, rng) -> float:
    """Area-sampling IoU oracle: uniform points over the joint bounding
    box, vectorized point-in-rectangle tests."""
    verts = np.vstack([a.vertices, b.vertices])
    lo = verts.min(axis=0)
    hi = verts.max(axis=0)
    pts = rng.uniform(lo, hi, size=(n, 2))

    def inside(obb, p):
        c = obb.vertices.mean(axis=0)
        u = obb.vertices[1] - obb.vertices[0]
        v = obb.vertices[3] - obb.vertices[0]
        lu = np.linalg.norm(u)
        lv = np.linalg.norm(v)
        d = p - c
        pu = np.abs(d @ (u / lu)) <= lu / 2
        pv = np.abs(d @ (v / lv)) <= lv / 2
        return pu & pv

    ia = inside(a, pts)
    ib = inside(b, pts)
    union = np.count_nonzero(ia | ib)
    if union == 0:
        return 0.0
    return np.count_nonzero(ia & ib) / union


def make_scene(
    num_frames,
    shape=(240, 320),
    num_objects=3,
    seed=0,
    rotation_deg=0.5,
    scale=0.999,
    translation=(0.0, 0.0),
    jitter=0.0,
    catalog=None,
):
    """Render a small labeled sequence under a chained rigid-ish motion.

    Returns (frames, labels) where labels[i] is the analytic ground truth
    for frame i.
    """
    from loopkit import dataset as ds
    from loopkit.geometry import Similarity2

    rng = np.random.default_rng(seed)
    catalog = catalog or ds.default_catalog()
    h, w = shape
    bg = ds.make_noise_background(int(h * 1.8), int(w * 1.8), rng)
    placements = []
    for _ in range(num_objects):
        c = int(rng.integers(0, len(catalog)))
        sw = int(rng.uniform(40, 70))
        sh = max(int(sw / catalog[c].nominal_ratio), 12)
        sprite = ds.make_textured_sprite(c, sw, sh, rng)
        angle = float(rng.uniform(0, 2 * math.pi))
        cx = float(rng.uniform(0.25 * w, 0.75 * w))
        cy = float(rng.uniform(0.25 * h, 0.75 * h))
        ac = sprite.anchor.center
        placements.append(
            (
                sprite,
                Similarity2.about_point(
                    ac, rotation=angle, translation=(cx - ac[0], cy - ac[1])
                ),
            )
        )
    motions = [
        Similarity2.about_point(
            (w / 2.0, h / 2.0),
            scale=scale,
            rotation=math.radians(rotation_deg),
            translation=np.asarray(translation, dtype=float)
            + rng.uniform(-jitter, jitter, size=2),
        )
        for _ in range(num_frames - 1)
    ]
    frames = ds.generate_sequence(placements, motions, bg, frame_shape=(h, w))
    return frames, [rec.labels for rec in frames]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
