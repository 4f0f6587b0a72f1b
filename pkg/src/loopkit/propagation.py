"""Semi-automatic video labeling: estimate the inter-frame similarity from
point correspondences and chain frame-0 oriented labels through a sequence.

The estimation treats 2D points as complex numbers: fitting
a*z + b with complex a, b in least squares is exactly the 4-DoF similarity
fit (|a| = scale, arg(a) = rotation), solved in closed form.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage as ndi

from .encoding import OrientedLabel
from .geometry import Aabb, Similarity2, aabb_of_obb, transform_obb

log = logging.getLogger(__name__)

__all__ = [
    "PropagationError",
    "InsufficientMatches",
    "DegenerateConfiguration",
    "NoConsensus",
    "NoFeatures",
    "PropagationBroken",
    "Keypoint",
    "Correspondence",
    "SimilarityEstimate",
    "SequenceLabels",
    "MatchConfig",
    "RansacConfig",
    "estimate_similarity_lsq",
    "estimate_similarity_ransac",
    "detect_corners",
    "detect_and_match",
    "propagate_labels",
    "matches_from_transform",
    "read_matches_jsonl",
    "write_matches_jsonl",
    "matches_file_provider",
    "frame_matching_provider",
]


class PropagationError(RuntimeError):
    """Base class for propagation failures."""


class InsufficientMatches(PropagationError):
    """Fewer than 2 correspondences supplied."""


class DegenerateConfiguration(PropagationError):
    """All source points coincide; the similarity is unobservable."""


class NoConsensus(PropagationError):
    """RANSAC found no model with at least 2 inliers."""


class NoFeatures(PropagationError):
    """Too few corners detected to attempt matching."""


class PropagationBroken(PropagationError):
    """Estimation failed between a pair of frames.

    ``partial`` holds the valid labels up to and including the last good
    frame, so a human can re-seed mid-sequence.
    """

    def __init__(self, index: int, partial: "SequenceLabels", cause: Exception):
        super().__init__(f"propagation broke between frames {index} and {index + 1}: {cause}")
        self.index = index
        self.partial = partial
        self.cause = cause


@dataclass(frozen=True)
class Keypoint:
    position: np.ndarray
    response: float
    descriptor: np.ndarray


@dataclass(frozen=True)
class Correspondence:
    """A matched point pair: ``src`` in frame i, ``dst`` in frame i+1."""

    src: np.ndarray
    dst: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "src", np.asarray(self.src, dtype=float).reshape(2))
        object.__setattr__(self, "dst", np.asarray(self.dst, dtype=float).reshape(2))


@dataclass(frozen=True)
class SimilarityEstimate:
    transform: Similarity2
    inlier_count: int
    inlier_rms: float
    inlier_mask: np.ndarray


@dataclass
class SequenceLabels:
    """Per-frame propagated labels plus the transform bookkeeping.

    ``pair_transforms[i]`` maps frame i to frame i+1; ``chained[i]`` maps
    frame 0 to frame i (``chained[0]`` is the identity).
    """

    labels: list
    pair_transforms: list
    chained: list


@dataclass(frozen=True)
class MatchConfig:
    """Built-in corner + NCC matcher settings."""

    max_corners: int = 300
    min_corners: int = 8
    quality: float = 0.01
    min_distance: int = 7
    patch_radius: int = 6
    search_radius: int = 2
    min_score: float = 0.6
    ratio: float = 0.99


@dataclass(frozen=True)
class RansacConfig:
    iterations: int = 1000
    inlier_threshold: float = 2.0
    seed: int = 0


def _as_point_arrays(matches):
    """Accept a list of Correspondence, an (n, 4) array, or a (src, dst)
    pair of (n, 2) arrays; return complex src/dst vectors."""
    if isinstance(matches, tuple) and len(matches) == 2:
        src = np.asarray(matches[0], dtype=float)
        dst = np.asarray(matches[1], dtype=float)
    elif hasattr(matches, "__len__") and len(matches) == 0:
        src = dst = np.zeros((0, 2))
    else:
        arr = np.asarray(
            [(m.src[0], m.src[1], m.dst[0], m.dst[1]) for m in matches]
            if len(matches) and isinstance(matches[0], Correspondence)
            else matches,
            dtype=float,
        )
        if arr.ndim != 2 or arr.shape[1] != 4:
            raise ValueError("matches must be (n, 4) [sx, sy, dx, dy]")
        src, dst = arr[:, :2], arr[:, 2:]
    return src[:, 0] + 1j * src[:, 1], dst[:, 0] + 1j * dst[:, 1]


def _similarity_from_complex(a: complex, b: complex) -> Similarity2:
    return Similarity2(
        scale=abs(a),
        rotation=float(np.angle(a)),
        translation=np.array([b.real, b.imag]),
    )


def estimate_similarity_lsq(matches) -> Similarity2:
    """Closed-form least-squares similarity fit on point correspondences.

    Exact on noise-free similarity-related point sets; minimizes the sum of
    squared destination residuals otherwise.
    """
    zs, zd = _as_point_arrays(matches)
    n = zs.size
    if n < 2:
        raise InsufficientMatches(f"need at least 2 matches, got {n}")
    ms, md = zs.mean(), zd.mean()
    cs, cd = zs - ms, zd - md
    denom = float(np.vdot(cs, cs).real)
    if denom < 1e-12:
        raise DegenerateConfiguration("all source points coincide")
    a = complex(np.vdot(cs, cd)) / denom
    if abs(a) < 1e-12:
        raise DegenerateConfiguration("destination points collapse to a point")
    b = md - a * ms
    return _similarity_from_complex(a, b)


def estimate_similarity_ransac(
    matches,
    iterations: int = 1000,
    inlier_threshold: float = 2.0,
    seed: int | None = None,
) -> SimilarityEstimate:
    """RANSAC with 2-point minimal samples, refit on the best inlier set.

    Deterministic for a fixed seed and input ordering.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    if not inlier_threshold > 0:
        raise ValueError("inlier_threshold must be positive")
    zs, zd = _as_point_arrays(matches)
    n = zs.size
    if n < 2:
        raise InsufficientMatches(f"need at least 2 matches, got {n}")

    rng = np.random.default_rng(seed)
    i1 = rng.integers(0, n, size=iterations)
    i2 = rng.integers(0, n - 1, size=iterations)
    i2 = np.where(i2 >= i1, i2 + 1, i2)

    den = zs[i2] - zs[i1]
    valid = np.abs(den) > 1e-9
    a = np.zeros(iterations, dtype=complex)
    a[valid] = (zd[i2] - zd[i1])[valid] / den[valid]
    b = zd[i1] - a * zs[i1]

    resid = np.abs(a[:, None] * zs[None, :] + b[:, None] - zd[None, :])
    inliers = resid <= inlier_threshold
    counts = inliers.sum(axis=1)
    counts[~valid] = -1
    best = int(np.argmax(counts))
    if counts[best] < 2:
        raise NoConsensus("no sample reached 2 inliers")

    transform = estimate_similarity_lsq((
        np.column_stack([zs[inliers[best]].real, zs[inliers[best]].imag]),
        np.column_stack([zd[inliers[best]].real, zd[inliers[best]].imag]),
    ))
    # recompute the mask against the refit model so it stays threshold-consistent
    a_fit = transform.scale * np.exp(1j * transform.rotation)
    b_fit = complex(transform.translation[0], transform.translation[1])
    final_resid = np.abs(a_fit * zs + b_fit - zd)
    mask = final_resid <= inlier_threshold
    if int(mask.sum()) >= 2:
        transform = estimate_similarity_lsq((
            np.column_stack([zs[mask].real, zs[mask].imag]),
            np.column_stack([zd[mask].real, zd[mask].imag]),
        ))
        a_fit = transform.scale * np.exp(1j * transform.rotation)
        b_fit = complex(transform.translation[0], transform.translation[1])
        final_resid = np.abs(a_fit * zs + b_fit - zd)
        mask = final_resid <= inlier_threshold
    count = int(mask.sum())
    rms = float(np.sqrt(np.mean(final_resid[mask] ** 2))) if count else 0.0
    return SimilarityEstimate(
        transform=transform, inlier_count=count, inlier_rms=rms, inlier_mask=mask
    )


def _to_gray(img) -> np.ndarray:
    a = np.asarray(img, dtype=float)
    if a.ndim == 3:
        a = a[..., :3].mean(axis=2)
    if a.ndim != 2:
        raise ValueError(f"expected a 2D or 3D image, got shape {a.shape}")
    if a.max() > 1.5:
        a = a / 255.0
    return a


def _harris_response(gray: np.ndarray) -> np.ndarray:
    ix = ndi.sobel(gray, axis=1, mode="nearest")
    iy = ndi.sobel(gray, axis=0, mode="nearest")
    sxx = ndi.gaussian_filter(ix * ix, 1.5, mode="nearest")
    syy = ndi.gaussian_filter(iy * iy, 1.5, mode="nearest")
    sxy = ndi.gaussian_filter(ix * iy, 1.5, mode="nearest")
    return sxx * syy - sxy * sxy - 0.05 * (sxx + syy) ** 2


def detect_corners(img, config: MatchConfig = MatchConfig()) -> np.ndarray:
    """Harris corners as an (n, 2) array of (x, y), strongest first."""
    gray = _to_gray(img)
    resp = _harris_response(gray)
    margin = config.patch_radius + config.search_radius + 2
    h, w = gray.shape
    if h <= 2 * margin or w <= 2 * margin:
        return np.zeros((0, 2))
    interior = np.zeros_like(resp, dtype=bool)
    interior[margin : h - margin, margin : w - margin] = True
    peak = (resp == ndi.maximum_filter(resp, size=config.min_distance)) & interior
    r_max = resp[interior].max() if interior.any() else 0.0
    if r_max <= 0:
        return np.zeros((0, 2))
    peak &= resp > config.quality * r_max
    ys, xs = np.nonzero(peak)
    if xs.size == 0:
        return np.zeros((0, 2))
    order = np.argsort(-resp[ys, xs], kind="stable")[: config.max_corners]
    return np.column_stack([xs[order], ys[order]]).astype(float)


def _patches(gray: np.ndarray, corners: np.ndarray, radius: int) -> np.ndarray:
    """Normalized flattened patches around integer corner positions."""
    n = corners.shape[0]
    size = 2 * radius + 1
    out = np.empty((n, size * size))
    for i, (x, y) in enumerate(corners.astype(int)):
        out[i] = gray[y - radius : y + radius + 1, x - radius : x + radius + 1].ravel()
    out -= out.mean(axis=1, keepdims=True)
    norms = np.linalg.norm(out, axis=1, keepdims=True)
    norms[norms < 1e-9] = 1.0
    return out / norms


def _refine_match(gray_a, gray_b, src, dst, radius, search):
    """Translational sub-pixel refinement of ``dst`` by local NCC search
    plus a 1D parabola fit on the score peak."""
    sx, sy = int(src[0]), int(src[1])
    patch = gray_a[sy - radius : sy + radius + 1, sx - radius : sx + radius + 1]
    patch = patch - patch.mean()
    pn = np.linalg.norm(patch)
    if pn < 1e-9:
        return dst
    patch = patch / pn
    bx, by = int(dst[0]), int(dst[1])
    size = 2 * search + 1
    scores = np.full((size, size), -2.0)
    h, w = gray_b.shape
    for dy in range(-search, search + 1):
        for dx in range(-search, search + 1):
            cx, cy = bx + dx, by + dy
            if (
                cy - radius < 0
                or cy + radius + 1 > h
                or cx - radius < 0
                or cx + radius + 1 > w
            ):
                continue
            win = gray_b[cy - radius : cy + radius + 1, cx - radius : cx + radius + 1]
            win = win - win.mean()
            wn = np.linalg.norm(win)
            if wn < 1e-9:
                continue
            scores[dy + search, dx + search] = float((patch * win / wn).sum())
    iy, ix = np.unravel_index(np.argmax(scores), scores.shape)
    off_x, off_y = ix - search, iy - search

    def parabola(sm, s0, sp):
        denom = sm - 2.0 * s0 + sp
        if denom >= -1e-12:
            return 0.0
        return float(np.clip(0.5 * (sm - sp) / denom, -0.5, 0.5))

    sub_x = sub_y = 0.0
    if 0 < ix < size - 1 and scores[iy, ix - 1] > -2 and scores[iy, ix + 1] > -2:
        sub_x = parabola(scores[iy, ix - 1], scores[iy, ix], scores[iy, ix + 1])
    if 0 < iy < size - 1 and scores[iy - 1, ix] > -2 and scores[iy + 1, ix] > -2:
        sub_y = parabola(scores[iy - 1, ix], scores[iy, ix], scores[iy + 1, ix])
    return np.array([bx + off_x + sub_x, by + off_y + sub_y])


def detect_and_match(img_a, img_b, config: MatchConfig = MatchConfig()):
    """Corner detection + mutual-best NCC patch matching with ratio test
    and sub-pixel refinement. Deterministic for fixed inputs/config."""
    gray_a, gray_b = _to_gray(img_a), _to_gray(img_b)
    if gray_a.shape != gray_b.shape:
        raise ValueError("images must be the same size")
    ca = detect_corners(gray_a, config)
    cb = detect_corners(gray_b, config)
    if ca.shape[0] < config.min_corners or cb.shape[0] < config.min_corners:
        raise NoFeatures(
            f"found {ca.shape[0]} / {cb.shape[0]} corners, need {config.min_corners}"
        )
    da = _patches(gray_a, ca, config.patch_radius)
    db = _patches(gray_b, cb, config.patch_radius)
    scores = da @ db.T
    best_ab = np.argmax(scores, axis=1)
    best_ba = np.argmax(scores, axis=0)

    out = []
    for ia, ib in enumerate(best_ab):
        if best_ba[ib] != ia:
            continue
        s = scores[ia, ib]
        if s < config.min_score:
            continue
        row = scores[ia].copy()
        row[ib] = -np.inf
        second = row.max()
        if second > 0 and s > 0 and second / s > config.ratio:
            continue
        dst = _refine_match(
            gray_a, gray_b, ca[ia], cb[ib], config.patch_radius, config.search_radius
        )
        out.append(Correspondence(src=ca[ia].copy(), dst=dst))
    return out


def frame_matching_provider(frames, config: MatchConfig = MatchConfig()):
    """Provider over an in-memory frame list using the built-in matcher."""

    def provider(i: int):
        return detect_and_match(frames[i], frames[i + 1], config)

    return provider


def matches_from_transform(transform: Similarity2, src_points):
    """Exact correspondences implied by a known transform (test scaffolding
    and the exact-path provider)."""
    src = np.asarray(src_points, dtype=float)
    dst = transform.apply(src)
    return [Correspondence(s, d) for s, d in zip(src, dst)]


def _fully_outside(label: OrientedLabel, shape) -> bool:
    h, w = shape[0], shape[1]
    frame_box = Aabb(x=w / 2.0, y=h / 2.0, w=float(w), h=float(h))
    return not aabb_of_obb(label.obb).intersects(frame_box)


def propagate_labels(
    num_frames: int,
    seed_labels,
    provider,
    ransac: RansacConfig = RansacConfig(),
    frame_shape=None,
) -> SequenceLabels:
    """Chain frame-0 labels through a sequence.

    ``provider(i)`` must yield the correspondences between frames i and
    i+1. Labels drifting fully outside the frame (when ``frame_shape`` is
    given) are dropped and logged. On a failed pair the valid prefix is
    attached to the raised PropagationBroken.
    """
    if num_frames < 1:
        raise ValueError("need at least one frame")
    if not seed_labels:
        raise ValueError("seed labels must be non-empty")

    labels = [list(seed_labels)]
    pair_transforms: list = []
    chained = [Similarity2.identity()]
    for i in range(num_frames - 1):
        try:
            matches = provider(i)
            est = estimate_similarity_ransac(
                matches,
                iterations=ransac.iterations,
                inlier_threshold=ransac.inlier_threshold,
                seed=ransac.seed,
            )
        except PropagationError as exc:
            raise PropagationBroken(
                i,
                SequenceLabels(labels=labels, pair_transforms=pair_transforms, chained=chained),
                exc,
            ) from exc
        t = est.transform
        nxt = []
        for lab in labels[-1]:
            moved = OrientedLabel.from_obb(
                transform_obb(t, lab.obb), lab.class_id, lab.confidence
            )
            if frame_shape is not None and _fully_outside(moved, frame_shape):
                log.info("dropping label class %d at frame %d: fully outside image",
                         lab.class_id, i + 1)
                continue
            nxt.append(moved)
        labels.append(nxt)
        pair_transforms.append(t)
        chained.append(t.compose(chained[-1]))
    return SequenceLabels(labels=labels, pair_transforms=pair_transforms, chained=chained)


def write_matches_jsonl(path, pair_matches) -> None:
    """``pair_matches``: iterable of (i, matches) for consecutive pairs."""
    with open(path, "w") as fh:
        for i, matches in pair_matches:
            rec = {
                "from": i,
                "to": i + 1,
                "matches": [
                    [float(m.src[0]), float(m.src[1]), float(m.dst[0]), float(m.dst[1])]
                    for m in matches
                ],
            }
            fh.write(json.dumps(rec) + "\n")


def read_matches_jsonl(path):
    """Return {pair_start_index: list of Correspondence}."""
    out = {}
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        out[int(rec["from"])] = [
            Correspondence(src=(m[0], m[1]), dst=(m[2], m[3])) for m in rec["matches"]
        ]
    return out


def matches_file_provider(path):
    """Provider backed by an external matches file (JSON Lines)."""
    table = read_matches_jsonl(path)

    def provider(i: int):
        if i not in table:
            raise InsufficientMatches(f"no matches recorded for pair ({i}, {i + 1})")
        return table[i]

    return provider
