"""Synthetic text placement on a canonical image.

Places word quads (geometry + transcription + per-character quads) onto the
valid regions of a segmentation map. Appearance rendering is out of scope;
the output is exactly what annotations need.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage

from vtforge import _kernels
from vtforge.geometry import AABox, Polygon, aabb, points_in_polygon

# Average advance width per character as a fraction of the font height.
CHAR_ASPECT = 0.6

DEFAULT_LEXICON = [
    "a", "i", "o", "we", "he", "it", "an", "on", "at", "up", "go", "no",
    "my", "me", "do", "so", "the", "and", "for", "are", "but", "not",
    "you", "all", "can", "her", "was", "one", "our", "out", "day", "get",
    "has", "him", "his", "how", "man", "new", "now", "old", "see", "two",
    "way", "who", "boy", "did", "its", "let", "put", "say", "she", "too",
    "use", "that", "with", "have", "this", "will", "your", "from", "they",
    "know", "want", "been", "good", "much", "some", "time", "very", "when",
    "come", "here", "just", "like", "long", "make", "many", "more", "only",
    "over", "such", "take", "than", "them", "well", "were", "what", "work",
    "year", "back", "call", "came", "each", "even", "find", "give", "hand",
    "high", "keep", "kind", "last", "late", "left", "life", "line", "live",
    "look", "made", "most", "move", "must", "name", "need", "next", "open",
    "part", "play", "read", "said", "same", "show", "side", "tell", "turn",
    "about", "after", "again", "along", "began", "below", "between", "black",
    "bring", "carry", "clean", "close", "could", "every", "first", "found",
    "going", "great", "group", "house", "large", "learn", "light", "might",
    "never", "often", "order", "other", "paper", "place", "plant", "point",
    "right", "small", "sound", "spell", "start", "state", "still", "study",
    "their", "there", "these", "thing", "think", "three", "under", "water",
    "where", "which", "while", "world", "would", "write", "almost", "always",
    "animal", "answer", "around", "before", "better", "change", "differ",
    "follow", "friend", "ground", "happen", "letter", "little", "mother",
    "number", "people", "person", "picture", "question", "schools",
    "second", "should", "street", "strong", "thought", "through", "together",
    "country", "example", "however", "morning", "nothing", "problem",
    "sentence", "something", "important", "different",
]


@dataclass
class CanonicalAssets:
    """Canonical image context: segmentation labels and optional depth."""

    width: int
    height: int
    segmentation: np.ndarray
    depth: Optional[np.ndarray] = None

    def __post_init__(self):
        self.segmentation = np.asarray(self.segmentation)
        if self.width <= 0 or self.height <= 0:
            raise ValueError("canonical dimensions must be positive")
        if self.segmentation.shape != (self.height, self.width):
            raise ValueError(
                f"segmentation shape {self.segmentation.shape} != "
                f"({self.height}, {self.width})")
        if not np.issubdtype(self.segmentation.dtype, np.integer):
            raise ValueError("segmentation labels must be integers")
        if np.any(self.segmentation < 0):
            raise ValueError("segmentation labels must be non-negative")
        if self.depth is not None:
            self.depth = np.asarray(self.depth, dtype=np.float64)
            if self.depth.shape != (self.height, self.width):
                raise ValueError("depth shape mismatch")
            if not np.all(np.isfinite(self.depth)):
                raise ValueError("non-finite depth values")


@dataclass
class PlacementConfig:
    lexicon: Sequence[str] = field(default_factory=lambda: list(DEFAULT_LEXICON))
    density_target: float = 6.44
    mean_word_length_target: float = 4.14
    font_height_range: Tuple[float, float] = (12.0, 32.0)
    min_region_area: float = 400.0
    seed: int = 0

    def __post_init__(self):
        if not self.lexicon:
            raise ValueError("lexicon must be nonempty")
        if self.density_target < 0:
            raise ValueError("density_target must be >= 0")
        lo, hi = self.font_height_range
        if lo > hi or lo <= 0:
            raise ValueError(f"bad font height range {self.font_height_range}")


@dataclass
class TextInstanceSeed:
    """A placed word: quad, transcription, one quad per character."""

    polygon: Polygon
    transcription: str
    char_polygons: List[Polygon]

    def __post_init__(self):
        if len(self.char_polygons) != len(self.transcription):
            raise ValueError(
                f"{len(self.char_polygons)} char quads for "
                f"{len(self.transcription)} characters")
        box = aabb(self.polygon)
        inflated = AABox(box.x0 - 2.0, box.y0 - 2.0, box.x1 + 2.0, box.y1 + 2.0)
        for cp in self.char_polygons:
            cb = aabb(cp)
            if cb.x0 < inflated.x0 or cb.y0 < inflated.y0 \
                    or cb.x1 > inflated.x1 or cb.y1 > inflated.y1:
                raise ValueError("char quad escapes the word quad bounds")


@dataclass
class RegionInfo:
    label: int
    pixel_count: int
    box: AABox
    mask: np.ndarray


def select_regions(assets: CanonicalAssets, min_area: float) -> List[RegionInfo]:
    """Connected components of equal nonzero label with area >= min_area,
    sorted by area descending."""
    seg = assets.segmentation
    regions = []
    for value in np.unique(seg):
        if value == 0:
            continue
        labeled, count = ndimage.label(seg == value)
        for comp in range(1, count + 1):
            mask = labeled == comp
            area = int(mask.sum())
            if area < min_area:
                continue
            ys, xs = np.nonzero(mask)
            box = AABox(float(xs.min()), float(ys.min()),
                        float(xs.max() + 1), float(ys.max() + 1))
            regions.append(RegionInfo(int(value), area, box, mask))
    regions.sort(key=lambda r: (-r.pixel_count, r.label, r.box.x0, r.box.y0))
    return regions


def _length_distribution(lexicon: Sequence[str], target: float):
    """Word-length sampling weights, exponentially tilted toward the target
    mean length. Returns (lengths, probabilities)."""
    lengths = sorted({len(w) for w in lexicon})
    counts = np.array([sum(1 for w in lexicon if len(w) == n) for n in lengths],
                      dtype=np.float64)
    ls = np.array(lengths, dtype=np.float64)

    def mean(theta):
        w = counts * np.exp(theta * (ls - ls.mean()))
        w /= w.sum()
        return float((w * ls).sum())

    lo, hi = -8.0, 8.0
    if target <= mean(lo):
        theta = lo
    elif target >= mean(hi):
        theta = hi
    else:
        for _ in range(80):
            mid = (lo + hi) / 2.0
            if mean(mid) < target:
                lo = mid
            else:
                hi = mid
        theta = (lo + hi) / 2.0
    w = counts * np.exp(theta * (ls - ls.mean()))
    return lengths, w / w.sum()


def _word_quad(cx, cy, width, height, angle_rad):
    """Clockwise corners TL, TR, BR, BL of a rotated rectangle."""
    c, s = math.cos(angle_rad), math.sin(angle_rad)
    half_w, half_h = width / 2.0, height / 2.0
    corners = []
    for dx, dy in ((-half_w, -half_h), (half_w, -half_h),
                   (half_w, half_h), (-half_w, half_h)):
        corners.append((cx + c * dx - s * dy, cy + s * dx + c * dy))
    return corners


def _depth_squeeze(corners, region: RegionInfo, depth: np.ndarray):
    """Compress the quad along the local depth gradient so it leans toward
    the fitted plane; a fronto-parallel approximation, not a perspective."""
    ys, xs = np.nonzero(region.mask)
    z = depth[ys, xs]
    a_mat = np.column_stack([xs, ys, np.ones(len(xs))])
    coef, *_ = np.linalg.lstsq(a_mat, z, rcond=None)
    gx, gy = float(coef[0]), float(coef[1])
    g = math.hypot(gx, gy)
    if g < 1e-9:
        return corners
    factor = max(0.3, 1.0 / math.sqrt(1.0 + gx * gx + gy * gy))
    ux, uy = gx / g, gy / g
    cx = sum(p[0] for p in corners) / 4.0
    cy = sum(p[1] for p in corners) / 4.0
    out = []
    for px, py in corners:
        rx, ry = px - cx, py - cy
        along = rx * ux + ry * uy
        rx += (factor - 1.0) * along * ux
        ry += (factor - 1.0) * along * uy
        out.append((cx + rx, cy + ry))
    return out


def _interior_all_valid(corners, valid: np.ndarray) -> bool:
    xs = [p[0] for p in corners]
    ys = [p[1] for p in corners]
    if min(xs) < 0 or min(ys) < 0:
        return False
    h, w = valid.shape
    if max(xs) > w or max(ys) > h:
        return False
    x0, x1 = math.floor(min(xs)), math.ceil(max(xs))
    y0, y1 = math.floor(min(ys)), math.ceil(max(ys))
    gx, gy = np.meshgrid(np.arange(x0, x1) + 0.5, np.arange(y0, y1) + 0.5)
    poly = Polygon(corners)
    inside = points_in_polygon(gx, gy, poly)
    if not inside.any():
        return False
    return bool(valid[y0:y1, x0:x1][inside].all())


def _char_quads(corners, n_chars: int) -> List[Polygon]:
    """Uniform horizontal subdivision of the word quad, one cell per char."""
    tl, tr, br, bl = [np.array(p, dtype=np.float64) for p in corners]
    quads = []
    for i in range(n_chars):
        f0, f1 = i / n_chars, (i + 1) / n_chars
        top0 = tl + (tr - tl) * f0
        top1 = tl + (tr - tl) * f1
        bot0 = bl + (br - bl) * f0
        bot1 = bl + (br - bl) * f1
        quads.append(Polygon([tuple(top0), tuple(top1), tuple(bot1), tuple(bot0)]))
    return quads


def place_text(assets: CanonicalAssets, cfg: PlacementConfig,
               frame_count: int) -> List[TextInstanceSeed]:
    """Place about density_target * frame_count non-overlapping word quads
    inside the valid regions. Deterministic for a fixed seed; undersupply
    on crowded canvases is accepted silently."""
    regions = select_regions(assets, cfg.min_region_area)
    if not regions:
        return []
    rng = np.random.default_rng(cfg.seed)
    valid = assets.segmentation != 0

    lengths, length_p = _length_distribution(cfg.lexicon, cfg.mean_word_length_target)
    by_length = {n: sorted(w for w in cfg.lexicon if len(w) == n) for n in lengths}
    areas = np.array([r.pixel_count for r in regions], dtype=np.float64)
    region_p = areas / areas.sum()
    region_pixels = [np.nonzero(r.mask) for r in regions]

    target = int(round(cfg.density_target * frame_count))
    placed: List[TextInstanceSeed] = []
    placed_arrays: List[np.ndarray] = []
    placed_boxes: List[AABox] = []

    for _ in range(target):
        for _attempt in range(50):
            ridx = int(rng.choice(len(regions), p=region_p))
            region = regions[ridx]
            length = int(rng.choice(lengths, p=length_p))
            words = by_length[length]
            word = words[int(rng.integers(len(words)))]
            font_h = float(rng.uniform(*cfg.font_height_range))
            if rng.random() < 0.5:
                angle = 0.0
            else:
                angle = math.radians(float(rng.uniform(-15.0, 15.0)))
            ys, xs = region_pixels[ridx]
            k = int(rng.integers(len(xs)))
            cx = float(xs[k]) + 0.5
            cy = float(ys[k]) + 0.5

            corners = _word_quad(cx, cy, CHAR_ASPECT * font_h * len(word),
                                 font_h, angle)
            if assets.depth is not None:
                corners = _depth_squeeze(corners, region, assets.depth)
            if not _interior_all_valid(corners, valid):
                continue
            arr = np.array(corners, dtype=np.float64)
            box = AABox(arr[:, 0].min(), arr[:, 1].min(),
                        arr[:, 0].max(), arr[:, 1].max())
            overlap = False
            for other_arr, other_box in zip(placed_arrays, placed_boxes):
                if box.x1 <= other_box.x0 or other_box.x1 <= box.x0 \
                        or box.y1 <= other_box.y0 or other_box.y1 <= box.y0:
                    continue
                if _kernels.convex_clip_area(arr, other_arr) > 1e-9:
                    overlap = True
                    break
            if overlap:
                continue
            seed_poly = Polygon(corners)
            placed.append(TextInstanceSeed(seed_poly, word, _char_quads(corners, len(word))))
            placed_arrays.append(seed_poly.as_array())
            placed_boxes.append(box)
            break
    return placed
