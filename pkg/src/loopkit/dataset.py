"""Synthetic scenes and sequences, label/prediction serialization, and a
noisy oracle detector that stands in for the CNN so the full pipeline can be
exercised without training anything.

On disk everything is plain: PNG rasters, JSON Lines labels/predictions,
pixel coordinates, angles in degrees.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage as ndi

from .encoding import (
    AngleQuantizer,
    ObjectCatalog,
    OrientedLabel,
    UnorientedLabel,
    encode_label,
)
from .geometry import (
    Aabb,
    Obb,
    Similarity2,
    aabb_of_obb,
    transform_obb,
    wrap_angle,
)

__all__ = [
    "DatasetError",
    "PlacementOutOfFrame",
    "Sprite",
    "FrameRecord",
    "NoiseModel",
    "make_textured_sprite",
    "make_noise_background",
    "render_synthetic_frame",
    "generate_sequence",
    "oracle_detector",
    "default_catalog",
    "save_png",
    "load_image",
    "labels_jsonl_line",
    "label_to_obj",
    "label_from_obj",
    "write_labels_jsonl",
    "read_labels_jsonl",
    "write_predictions_jsonl",
    "read_predictions_jsonl",
    "write_manifest",
    "load_manifest",
]


class DatasetError(RuntimeError):
    """Base class for dataset failures."""


class PlacementOutOfFrame(DatasetError):
    """A placed sprite's anchor box lies entirely outside the frame."""


@dataclass(frozen=True)
class Sprite:
    """RGBA raster plus its anchor box in sprite coordinates."""

    class_id: int
    image: np.ndarray
    anchor: Obb


@dataclass
class FrameRecord:
    """One frame's raster (or path, or nothing) with its ground truth."""

    image: object
    labels: list
    shape: tuple

    @property
    def height(self) -> int:
        return self.shape[0]

    @property
    def width(self) -> int:
        return self.shape[1]


@dataclass(frozen=True)
class NoiseModel:
    """Detector-error stand-in: center/size jitter, class flips, misses and
    clutter. Confidence decays with the perturbation magnitude."""

    center_sigma: float = 0.0
    size_sigma: float = 0.0
    angle_flip_prob: float = 0.0
    miss_prob: float = 0.0
    clutter_rate: float = 0.0

    def __post_init__(self):
        for name in ("angle_flip_prob", "miss_prob"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise DatasetError(f"{name} outside [0, 1]: {p}")
        if self.center_sigma < 0 or self.size_sigma < 0 or self.clutter_rate < 0:
            raise DatasetError("sigmas and clutter_rate must be non-negative")


def default_catalog(num_classes: int = 12, seed: int = 7) -> ObjectCatalog:
    """Procedural catalog of ``num_classes`` objects with varied aspect
    ratios, half tagged textured / half untextured like a desk scene."""
    from .encoding import CatalogEntry

    rng = np.random.default_rng(seed)
    entries = []
    for c in range(num_classes):
        ratio = float(rng.uniform(1.2, 3.0))
        group = "textured" if c < (num_classes + 1) // 2 else "untextured"
        entries.append(
            CatalogEntry(
                class_id=c,
                name=f"object_{c:02d}",
                nominal_ratio=ratio,
                symmetric=bool(c % 5 == 4),
                group=group,
            )
        )
    return ObjectCatalog(tuple(entries))


def make_textured_sprite(
    class_id: int,
    width: int,
    height: int,
    rng: np.random.Generator,
    margin: int = 2,
) -> Sprite:
    """Textured rectangle with an arrow glyph along +x to break symmetry."""
    w, h = int(width), int(height)
    full_w, full_h = w + 2 * margin, h + 2 * margin
    img = np.zeros((full_h, full_w, 4), dtype=np.uint8)
    base = rng.integers(60, 200, size=3)
    noise = ndi.gaussian_filter(rng.normal(0, 60, size=(h, w, 3)), (1.2, 1.2, 0))
    body = np.clip(base[None, None, :] + noise, 0, 255).astype(np.uint8)
    # arrow: bright wedge pointing towards +x
    yy, xx = np.mgrid[0:h, 0:w]
    tip_x, mid_y = 0.85 * w, 0.5 * h
    in_arrow = (xx > 0.25 * w) & (xx < tip_x) & (
        np.abs(yy - mid_y) < 0.35 * h * (tip_x - xx) / (0.6 * w)
    )
    body[in_arrow] = np.clip(255 - base, 0, 255).astype(np.uint8)
    img[margin : margin + h, margin : margin + w, :3] = body
    img[margin : margin + h, margin : margin + w, 3] = 255
    anchor = Obb.from_center_size_angle(
        (margin + 0.5 * w, margin + 0.5 * h), float(w), float(h), 0.0
    )
    return Sprite(class_id=class_id, image=img, anchor=anchor)


def make_noise_background(height: int, width: int, rng: np.random.Generator) -> np.ndarray:
    """Smooth high-contrast RGB noise texture; dense in trackable corners."""
    base = rng.normal(128, 80, size=(height, width, 3))
    smooth = ndi.gaussian_filter(base, (1.5, 1.5, 0))
    return np.clip(smooth, 0, 255).astype(np.uint8)


def _warp_rgba(rgba: np.ndarray, transform: Similarity2, out_shape):
    """Warp an RGBA sprite into an output frame (premultiplied alpha,
    bilinear sampling). Returns (premultiplied rgb float, alpha float)."""
    h_out, w_out = out_shape
    inv = transform.inverse()
    yy, xx = np.mgrid[0:h_out, 0:w_out]
    pts = np.stack([xx.ravel(), yy.ravel()], axis=1).astype(float)
    src = inv.apply(pts)
    coords = np.stack([src[:, 1].reshape(h_out, w_out), src[:, 0].reshape(h_out, w_out)])
    img = rgba.astype(float) / 255.0
    alpha = ndi.map_coordinates(img[..., 3], coords, order=1, cval=0.0)
    prem = np.empty((h_out, w_out, 3))
    for ch in range(3):
        prem[..., ch] = ndi.map_coordinates(
            img[..., ch] * img[..., 3], coords, order=1, cval=0.0
        )
    return prem, alpha


def render_synthetic_frame(background: np.ndarray, placements) -> FrameRecord:
    """Alpha-composite placed sprites over a background.

    ``placements``: iterable of (Sprite, Similarity2) mapping sprite
    coordinates into frame coordinates. Labels are the transformed anchors.
    """
    frame = np.asarray(background, dtype=float) / 255.0
    if frame.ndim != 3 or frame.shape[2] < 3:
        raise DatasetError("background must be an RGB raster")
    frame = frame[..., :3].copy()
    h, w = frame.shape[:2]
    frame_box = Aabb(x=w / 2.0, y=h / 2.0, w=float(w), h=float(h))
    labels = []
    for sprite, t in placements:
        anchor = transform_obb(t, sprite.anchor)
        if not aabb_of_obb(anchor).intersects(frame_box):
            raise PlacementOutOfFrame(
                f"sprite class {sprite.class_id} lands outside the {w}x{h} frame"
            )
        prem, alpha = _warp_rgba(sprite.image, t, (h, w))
        frame = prem + (1.0 - alpha[..., None]) * frame
        labels.append(OrientedLabel.from_obb(anchor, sprite.class_id))
    img = np.clip(frame * 255.0, 0, 255).astype(np.uint8)
    return FrameRecord(image=img, labels=labels, shape=(h, w))


def generate_sequence(
    placements,
    motions,
    background: np.ndarray,
    frame_shape=None,
):
    """Render a sequence under chained frame-to-frame motions.

    ``motions[i]`` maps frame i to frame i+1 (the whole image moves:
    background included, so feature matching can recover it). Ground-truth
    labels are carried analytically, never through the propagation module.
    """
    bg = np.asarray(background)
    if frame_shape is None:
        frame_shape = bg.shape[:2]
    h, w = frame_shape
    bg_h, bg_w = bg.shape[:2]
    # center the (larger) background canvas on the frame
    bg_place = Similarity2(
        translation=np.array([(w - bg_w) / 2.0, (h - bg_h) / 2.0])
    )
    bg_rgba = np.dstack([bg[..., :3], np.full((bg_h, bg_w), 255, dtype=np.uint8)])
    bg_sprite_anchor = Obb.from_center_size_angle(
        (bg_w / 2.0, bg_h / 2.0), float(bg_w), float(bg_h)
    )
    black = np.zeros((h, w, 3), dtype=np.uint8)

    frames = []
    chain = Similarity2.identity()
    n = len(motions) + 1
    for i in range(n):
        placed = [(Sprite(0, bg_rgba, bg_sprite_anchor), chain.compose(bg_place))]
        placed += [(sp, chain.compose(t)) for sp, t in placements]
        rec = render_synthetic_frame(black, placed)
        rec.labels = rec.labels[1:]  # drop the background pseudo-label
        frames.append(rec)
        if i < n - 1:
            chain = motions[i].compose(chain)
    return frames


def oracle_detector(
    frame: FrameRecord,
    q: AngleQuantizer,
    noise: NoiseModel,
    seed: int | None = None,
    num_classes: int | None = None,
):
    """Emit noisy unoriented predictions for a ground-truthed frame.

    Deterministic per seed. With an all-zero noise model this is exactly
    ``encode_label`` of every ground-truth label at confidence 1.
    """
    rng = np.random.default_rng(seed)
    h, w = frame.shape
    preds = []
    for label in frame.labels:
        miss = rng.random()
        dc = rng.normal(0.0, noise.center_sigma, size=2) if noise.center_sigma > 0 else np.zeros(2)
        ds = rng.normal(0.0, noise.size_sigma, size=2) if noise.size_sigma > 0 else np.zeros(2)
        flip = rng.random()
        if miss < noise.miss_prob:
            continue
        enc = encode_label(q, label)
        cx, cy = enc.aabb.x + dc[0], enc.aabb.y + dc[1]
        bw = max(enc.aabb.w * (1.0 + ds[0]), 1e-3)
        bh = max(enc.aabb.h * (1.0 + ds[1]), 1e-3)
        c_hat = enc.expanded_class
        flipped = False
        if flip < noise.angle_flip_prob:
            total = q.k * (num_classes if num_classes else label.class_id + 1)
            wrong = int(rng.integers(0, max(total - 1, 1)))
            if wrong >= c_hat:
                wrong += 1
            c_hat = wrong
            flipped = True
        pert = math.hypot(dc[0], dc[1]) * 0.1 + (abs(ds[0]) + abs(ds[1])) * 2.0
        conf = math.exp(-pert)
        if flipped:
            conf *= 0.5
        preds.append(
            UnorientedLabel(
                aabb=Aabb(x=cx, y=cy, w=bw, h=bh),
                expanded_class=c_hat,
                confidence=min(max(conf, 0.0), 1.0),
            )
        )
    n_clutter = int(rng.poisson(noise.clutter_rate)) if noise.clutter_rate > 0 else 0
    total = q.k * (num_classes if num_classes else 1)
    for _ in range(n_clutter):
        cw = float(rng.uniform(10, w / 3))
        ch = float(rng.uniform(10, h / 3))
        preds.append(
            UnorientedLabel(
                aabb=Aabb(
                    x=float(rng.uniform(cw / 2, w - cw / 2)),
                    y=float(rng.uniform(ch / 2, h - ch / 2)),
                    w=cw,
                    h=ch,
                ),
                expanded_class=int(rng.integers(0, total)),
                confidence=float(rng.uniform(0.05, 0.4)),
            )
        )
    return preds


# ---------------------------------------------------------------------------
# serialization

def save_png(path, image: np.ndarray) -> None:
    Image.fromarray(np.asarray(image, dtype=np.uint8)).save(path, format="PNG")


def load_image(path) -> np.ndarray:
    return np.asarray(Image.open(path).convert("RGB"))


def label_to_obj(label: OrientedLabel):
    return {
        "class_id": label.class_id,
        "vertices": [[float(x), float(y)] for x, y in label.obb.vertices],
        "theta_deg": math.degrees(label.theta),
    }


def labels_jsonl_line(frame_index: int, labels) -> str:
    return json.dumps(
        {"frame": frame_index, "labels": [label_to_obj(l) for l in labels]},
        separators=(",", ":"),
    )


def write_labels_jsonl(path, frames_labels) -> None:
    """``frames_labels``: list indexed by frame of OrientedLabel lists."""
    with open(path, "w") as fh:
        for i, labels in enumerate(frames_labels):
            fh.write(labels_jsonl_line(i, labels) + "\n")


def label_from_obj(rec) -> OrientedLabel:
    obb = Obb(np.asarray(rec["vertices"], dtype=float))
    return OrientedLabel.from_obb(obb, int(rec["class_id"]))


def read_labels_jsonl(path):
    """Return a list indexed by frame of OrientedLabel lists."""
    table = {}
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        table[int(rec["frame"])] = [label_from_obj(r) for r in rec["labels"]]
    if not table:
        return []
    n = max(table) + 1
    return [table.get(i, []) for i in range(n)]


def write_predictions_jsonl(path, frames_preds) -> None:
    """``frames_preds``: list indexed by frame of UnorientedLabel lists."""
    with open(path, "w") as fh:
        for i, preds in enumerate(frames_preds):
            rec = {
                "frame": i,
                "predictions": [
                    {
                        "cx": float(p.aabb.x),
                        "cy": float(p.aabb.y),
                        "w": float(p.aabb.w),
                        "h": float(p.aabb.h),
                        "expanded_class": p.expanded_class,
                        "confidence": float(p.confidence),
                    }
                    for p in preds
                ],
            }
            fh.write(json.dumps(rec, separators=(",", ":")) + "\n")


def read_predictions_jsonl(path):
    table = {}
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        table[int(rec["frame"])] = [
            UnorientedLabel(
                aabb=Aabb(x=p["cx"], y=p["cy"], w=p["w"], h=p["h"]),
                expanded_class=int(p["expanded_class"]),
                confidence=float(p["confidence"]),
            )
            for p in rec["predictions"]
        ]
    if not table:
        return []
    n = max(table) + 1
    return [table.get(i, []) for i in range(n)]


def write_manifest(path, frame_paths, fps: float = 30.0, camera_height_mm=None) -> None:
    obj = {"frames": [str(p) for p in frame_paths], "fps": fps}
    if camera_height_mm is not None:
        obj["camera_height_mm"] = camera_height_mm
    Path(path).write_text(json.dumps(obj, indent=2) + "\n")


def load_manifest(path):
    """Load a sequence manifest; frame paths resolve relative to it."""
    p = Path(path)
    obj = json.loads(p.read_text())
    base = p.parent
    frames = [
        str(f) if Path(f).is_absolute() else str(base / f) for f in obj["frames"]
    ]
    return {
        "frames": frames,
        "fps": float(obj.get("fps", 30.0)),
        "camera_height_mm": obj.get("camera_height_mm"),
    }
