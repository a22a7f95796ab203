"""Carry text geometry across frames.

Two routes: (a) per-frame deformation-field reconstruction, (b) frame-by-
frame optical-flow stepping (forward then backward from the seed frame).
Both end with a RANSAC projective restoration so output quads stay exact
projective images of the seed quad.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from vtforge.geometry import (FlowField, GeometryError, Homography, Point2,
                              Polygon, points_in_polygon, transform_polygon)
from vtforge.homest import (NoConsensusError, PointPair, RansacParams,
                            ransac_homography, symmetric_transfer_error)
from vtforge.placement import TextInstanceSeed


class PropagationError(ValueError):
    """Inconsistent propagation inputs (dims, bounds, missing data)."""


@dataclass
class DeformationField:
    """One displacement grid per frame, canonical -> frame coordinates."""

    grids: List[FlowField]

    def __post_init__(self):
        if not self.grids:
            raise PropagationError("deformation field needs >= 1 frame")
        w, h = self.grids[0].width, self.grids[0].height
        for g in self.grids:
            if g.width != w or g.height != h:
                raise PropagationError("deformation grids disagree on dims")
        self.width = w
        self.height = h

    @property
    def frame_count(self) -> int:
        return len(self.grids)


@dataclass
class FlowSequence:
    """Forward flows F_{k->k+1} (k in [0, N-2]) and backward flows
    F_{k->k-1} (k in [1, N-1]), all with identical dims."""

    forward: List[FlowField]
    backward: List[FlowField]

    def __post_init__(self):
        if len(self.forward) != len(self.backward):
            raise PropagationError(
                f"{len(self.forward)} forward vs {len(self.backward)} backward flows")
        if not self.forward:
            raise PropagationError("flow sequence needs >= 1 step")
        w, h = self.forward[0].width, self.forward[0].height
        for g in list(self.forward) + list(self.backward):
            if g.width != w or g.height != h:
                raise PropagationError("flow grids disagree on dims")
        self.width = w
        self.height = h

    @property
    def frame_count(self) -> int:
        return len(self.forward) + 1

    def fwd(self, k: int) -> FlowField:
        return self.forward[k]

    def bwd(self, k: int) -> FlowField:
        """Flow from frame k to k-1 (k >= 1)."""
        return self.backward[k - 1]


@dataclass
class PropagationConfig:
    seed_frame: int = 0
    samples_per_edge: int = 5
    max_oob_fraction: float = 0.3
    max_restore_error: float = 3.0
    ransac: RansacParams = field(default_factory=RansacParams)

    def __post_init__(self):
        if self.samples_per_edge < 1:
            raise ValueError("samples_per_edge must be >= 1")
        if not 0.0 < self.max_oob_fraction <= 1.0:
            raise ValueError("max_oob_fraction must be in (0, 1]")
        if self.max_restore_error <= 0:
            raise ValueError("max_restore_error must be > 0")


@dataclass
class PropagatedInstance:
    """Per-frame geometry of one propagated text instance."""

    id: int
    transcription: str
    seed_frame: int
    provenance: str  # "deformation" | "flow"
    polygons: Dict[int, Polygon] = field(default_factory=dict)
    char_polygons: Optional[Dict[int, List[Polygon]]] = None
    homographies: Dict[int, Homography] = field(default_factory=dict)
    residuals: Dict[int, float] = field(default_factory=dict)
    oob_fractions: Dict[int, float] = field(default_factory=dict)

    def present_frames(self) -> List[int]:
        return sorted(self.polygons)


def boundary_samples(poly: Polygon, samples_per_edge: int) -> np.ndarray:
    """Evenly spaced boundary points, samples_per_edge per edge, corners
    included once each."""
    verts = poly.as_array()
    n = len(verts)
    pts = []
    for i in range(n):
        a = verts[i]
        b = verts[(i + 1) % n]
        for j in range(samples_per_edge):
            f = j / samples_per_edge
            pts.append(a + (b - a) * f)
    return np.array(pts)


@dataclass
class RawPropagation:
    """Sampled boundary points mapped into every frame, with per-point
    validity (False once a point could no longer be tracked)."""

    canonical_points: np.ndarray
    frame_points: Dict[int, np.ndarray]
    frame_valid: Dict[int, np.ndarray]


def _in_bounds(pts: np.ndarray, width: int, height: int) -> np.ndarray:
    return ((pts[:, 0] >= 0.0) & (pts[:, 0] <= width - 1)
            & (pts[:, 1] >= 0.0) & (pts[:, 1] <= height - 1))


def reconstruct_via_deformation(seeds: Sequence[TextInstanceSeed],
                                deformation: DeformationField,
                                cfg: PropagationConfig) -> List[RawPropagation]:
    """Map each seed's boundary samples into every frame by bilinear lookup
    of the deformation displacement at the canonical coordinates."""
    out = []
    for seed in seeds:
        pts = boundary_samples(seed.polygon, cfg.samples_per_edge)
        if not _in_bounds(pts, deformation.width, deformation.height).all():
            raise PropagationError(
                "seed geometry outside the canonical grid "
                f"({deformation.width}x{deformation.height})")
        frame_points = {}
        frame_valid = {}
        for k, grid in enumerate(deformation.grids):
            du, dv = grid.sample_many(pts[:, 0], pts[:, 1])
            raw = pts + np.column_stack([du, dv])
            frame_points[k] = raw
            frame_valid[k] = _in_bounds(raw, deformation.width, deformation.height)
        out.append(RawPropagation(pts, frame_points, frame_valid))
    return out


@dataclass
class RestoredFrame:
    homography: Homography
    polygon: Polygon
    residual: float
    inlier_count: int


def restore_projective(seed_polygon: Polygon, canonical_points: np.ndarray,
                       frame_points: Dict[int, np.ndarray],
                       cfg: PropagationConfig,
                       frame_valid: Optional[Dict[int, np.ndarray]] = None
                       ) -> Dict[int, RestoredFrame]:
    """Fit H per frame via RANSAC on (canonical, raw) pairs and map the seed
    quad through it. Frames with no consensus are absent from the result."""
    out = {}
    for k in sorted(frame_points):
        raw = frame_points[k]
        keep = np.isfinite(raw).all(axis=1)
        if frame_valid is not None and k in frame_valid:
            keep &= frame_valid[k]
        if int(keep.sum()) < 4:
            continue
        src = canonical_points[keep]
        dst = raw[keep]
        pairs = [PointPair(Point2(*s), Point2(*d)) for s, d in zip(src, dst)]
        try:
            h, flags = ransac_homography(pairs, cfg.ransac)
        except (NoConsensusError, GeometryError):
            continue
        err = symmetric_transfer_error(h, src, dst)
        residual = float(err[flags].mean()) if flags.any() else math.inf
        try:
            restored = transform_polygon(h, seed_polygon)
        except GeometryError:
            continue
        out[k] = RestoredFrame(h, restored, residual, int(flags.sum()))
    return out


def propagate_characters(seed_chars: Sequence[Polygon],
                         homographies: Dict[int, Homography]
                         ) -> Dict[int, List[Polygon]]:
    """Map character quads through the parent's per-frame homographies."""
    if not seed_chars:
        raise PropagationError("instance has no seed character polygons")
    out = {}
    for k, h in sorted(homographies.items()):
        out[k] = [transform_polygon(h, cp) for cp in seed_chars]
    return out


def _assemble(seed: TextInstanceSeed, idx: int, seed_frame: int, provenance: str,
              restored: Dict[int, RestoredFrame],
              oob: Dict[int, float]) -> PropagatedInstance:
    inst = PropagatedInstance(
        id=idx,
        transcription=seed.transcription,
        seed_frame=seed_frame,
        provenance=provenance,
        polygons={k: r.polygon for k, r in restored.items()},
        homographies={k: r.homography for k, r in restored.items()},
        residuals={k: r.residual for k, r in restored.items()},
        oob_fractions={k: oob.get(k, 0.0) for k in restored},
    )
    if seed.char_polygons and restored:
        inst.char_polygons = propagate_characters(
            seed.char_polygons, inst.homographies)
    return inst


def propagate_deformation(seeds: Sequence[TextInstanceSeed],
                          deformation: DeformationField,
                          cfg: PropagationConfig) -> List[PropagatedInstance]:
    """Deformation route: reconstruct raw points, then restore per frame."""
    raws = reconstruct_via_deformation(seeds, deformation, cfg)
    out = []
    for idx, (seed, raw) in enumerate(zip(seeds, raws), start=1):
        restored = restore_projective(seed.polygon, raw.canonical_points,
                                      raw.frame_points, cfg, raw.frame_valid)
        oob = {k: 1.0 - float(v.mean()) for k, v in raw.frame_valid.items()}
        out.append(_assemble(seed, idx, cfg.seed_frame, "deformation", restored, oob))
    return out


def propagate_flow(seeds: Sequence[TextInstanceSeed], flows: FlowSequence,
                   cfg: PropagationConfig) -> List[PropagatedInstance]:
    """Flow route: p_{k+1} = p_k + F_{k->k+1}(p_k) forward from the seed
    frame, p_{k-1} = p_k + F_{k->k-1}(p_k) backward, one step per frame,
    then per-frame restoration against the seed-frame geometry.

    A point that leaves the grid stays invalid from there on; a direction
    stops extending once a frame loses consensus or exceeds the
    out-of-bounds budget.
    """
    n = flows.frame_count
    t = cfg.seed_frame
    if not 0 <= t < n:
        raise PropagationError(f"seed frame {t} outside [0, {n})")
    w, h = flows.width, flows.height

    out = []
    for idx, seed in enumerate(seeds, start=1):
        pts_t = boundary_samples(seed.polygon, cfg.samples_per_edge)
        n_pts = len(pts_t)
        frame_points = {t: pts_t}
        frame_valid = {t: _in_bounds(pts_t, w, h)}

        def walk(start_pts, start_valid, frames_and_flows):
            """Step points through (frame, flow) pairs; yields per-frame
            results and stops early when the OOB budget is exhausted."""
            cur = start_pts.copy()
            valid = start_valid.copy()
            for frame_k, flow in frames_and_flows:
                can_step = valid & _in_bounds(cur, w, h)
                nxt = np.full_like(cur, np.nan)
                if can_step.any():
                    du, dv = flow.sample_many(cur[can_step, 0], cur[can_step, 1])
                    nxt[can_step] = cur[can_step] + np.column_stack([du, dv])
                cur = nxt
                valid = can_step
                yield frame_k, cur.copy(), valid.copy()
                if 1.0 - float(valid.sum()) / n_pts > cfg.max_oob_fraction:
                    return

        fwd_steps = [(k + 1, flows.fwd(k)) for k in range(t, n - 1)]
        for frame_k, pts, valid in walk(pts_t, frame_valid[t], fwd_steps):
            frame_points[frame_k] = pts
            frame_valid[frame_k] = valid & _in_bounds(pts, w, h)
        bwd_steps = [(k - 1, flows.bwd(k)) for k in range(t, 0, -1)]
        for frame_k, pts, valid in walk(pts_t, frame_valid[t], bwd_steps):
            frame_points[frame_k] = pts
            frame_valid[frame_k] = valid & _in_bounds(pts, w, h)

        restored = restore_projective(seed.polygon, pts_t, frame_points, cfg,
                                      frame_valid)
        oob = {k: 1.0 - float(v.sum()) / n_pts for k, v in frame_valid.items()}
        out.append(_assemble(seed, idx, t, "flow", restored, oob))
    return out


def _occluded_fraction(poly: Polygon, mask: np.ndarray) -> float:
    h, w = mask.shape
    arr = poly.as_array()
    x0 = max(0, math.floor(arr[:, 0].min()))
    y0 = max(0, math.floor(arr[:, 1].min()))
    x1 = min(w, math.ceil(arr[:, 0].max()))
    y1 = min(h, math.ceil(arr[:, 1].max()))
    if x1 <= x0 or y1 <= y0:
        return 1.0
    gx, gy = np.meshgrid(np.arange(x0, x1) + 0.5, np.arange(y0, y1) + 0.5)
    inside = points_in_polygon(gx, gy, poly)
    total = int(inside.sum())
    if total == 0:
        return 1.0
    hit = int((mask[y0:y1, x0:x1][inside] != 0).sum())
    return hit / total


def filter_instances(candidates: Sequence[PropagatedInstance],
                     cfg: PropagationConfig,
                     frame_dims: tuple,
                     masks: Optional[Dict[int, np.ndarray]] = None
                     ) -> List[PropagatedInstance]:
    """Apply drop rules and trim each instance to the contiguous frame
    interval around its seed frame.

    A frame is dropped when its out-of-bounds sample fraction or occluded
    interior fraction exceeds max_oob_fraction, or its restoration residual
    exceeds max_restore_error. Instances whose seed frame is dropped are
    removed entirely.
    """
    width, height = frame_dims
    out = []
    for inst in candidates:
        keep = set()
        for k in inst.present_frames():
            if inst.oob_fractions.get(k, 0.0) > cfg.max_oob_fraction:
                continue
            if inst.residuals.get(k, math.inf) > cfg.max_restore_error:
                continue
            if masks is not None and k in masks:
                if _occluded_fraction(inst.polygons[k], masks[k]) > cfg.max_oob_fraction:
                    continue
            keep.add(k)
        if inst.seed_frame not in keep:
            continue
        lo = hi = inst.seed_frame
        while lo - 1 in keep:
            lo -= 1
        while hi + 1 in keep:
            hi += 1
        frames = range(lo, hi + 1)
        out.append(PropagatedInstance(
            id=inst.id,
            transcription=inst.transcription,
            seed_frame=inst.seed_frame,
            provenance=inst.provenance,
            polygons={k: inst.polygons[k] for k in frames},
            char_polygons=(None if inst.char_polygons is None else
                           {k: inst.char_polygons[k] for k in frames
                            if k in inst.char_polygons}),
            homographies={k: inst.homographies[k] for k in frames},
            residuals={k: inst.residuals[k] for k in frames},
            oob_fractions={k: inst.oob_fractions[k] for k in frames},
        ))
    return out
