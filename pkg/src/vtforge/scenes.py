"""Analytic scenario generator.

Builds a static text layout plus a parametric whole-frame camera motion and
emits mutually consistent per-frame ground truth, flow fields, and a
deformation field. Everything is closed form, which makes the products an
independent oracle for the propagation and metrics code.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List

import numpy as np

from vtforge.dataio import CharBox, FrameRecord, TextInstance, VideoAnnotation
from vtforge.geometry import FlowField, GeometryError, Homography, Polygon, transform_polygon
from vtforge.placement import CanonicalAssets, PlacementConfig, place_text
from vtforge.propagation import DeformationField, FlowSequence

MOTION_KINDS = ("static", "translate", "rotate", "zoom", "projective", "random_shift")


@dataclass
class MotionSpec:
    kind: str
    frame_count: int
    width: int
    height: int
    dx: float = 0.0
    dy: float = 0.0
    degrees_per_frame: float = 0.0
    zoom_per_frame: float = 1.0
    gx: float = 0.0
    gy: float = 0.0
    max_shift: float = 0.0
    seed: int = 0
    noise_sigma: float = 0.0

    def __post_init__(self):
        if self.kind not in MOTION_KINDS:
            raise ValueError(f"unknown motion kind {self.kind!r}")
        if self.frame_count < 1:
            raise ValueError("frame_count must be >= 1")
        if self.width < 2 or self.height < 2:
            raise ValueError("scene dims must be >= 2")


def _about_center(m: np.ndarray, cx: float, cy: float) -> np.ndarray:
    to = np.array([[1.0, 0.0, cx], [0.0, 1.0, cy], [0.0, 0.0, 1.0]])
    back = np.array([[1.0, 0.0, -cx], [0.0, 1.0, -cy], [0.0, 0.0, 1.0]])
    return to @ m @ back


def motion_homographies(spec: MotionSpec) -> List[Homography]:
    """Per-frame transforms H_k mapping frame-0 coordinates to frame k."""
    cx, cy = (spec.width - 1) / 2.0, (spec.height - 1) / 2.0
    mats = [np.eye(3)]
    if spec.kind == "random_shift":
        rng = np.random.default_rng(spec.seed)
        cur = np.eye(3)
        for _ in range(1, spec.frame_count):
            sx, sy = rng.uniform(-spec.max_shift, spec.max_shift, size=2)
            cur = np.array([[1.0, 0.0, sx], [0.0, 1.0, sy], [0.0, 0.0, 1.0]]) @ cur
            mats.append(cur.copy())
    else:
        if spec.kind == "static":
            step = np.eye(3)
        elif spec.kind == "translate":
            step = np.array([[1.0, 0.0, spec.dx], [0.0, 1.0, spec.dy], [0.0, 0.0, 1.0]])
        elif spec.kind == "rotate":
            th = math.radians(spec.degrees_per_frame)
            rot = np.array([[math.cos(th), -math.sin(th), 0.0],
                            [math.sin(th), math.cos(th), 0.0],
                            [0.0, 0.0, 1.0]])
            step = _about_center(rot, cx, cy)
        elif spec.kind == "zoom":
            z = spec.zoom_per_frame
            step = _about_center(np.diag([z, z, 1.0]), cx, cy)
        else:  # projective
            persp = np.array([[1.0, 0.0, spec.dx],
                              [0.0, 1.0, spec.dy],
                              [spec.gx, spec.gy, 1.0]])
            step = _about_center(persp, cx, cy)
        cur = np.eye(3)
        for _ in range(1, spec.frame_count):
            cur = step @ cur
            mats.append(cur.copy())

    out = []
    for k, m in enumerate(mats):
        try:
            out.append(Homography(m))
        except GeometryError as exc:
            raise ValueError(f"motion schedule not invertible at frame {k}: {exc}") from exc
    # the whole visible plane must stay on one side of the horizon
    corners = np.array([[0.0, 0.0], [spec.width - 1.0, 0.0],
                        [spec.width - 1.0, spec.height - 1.0], [0.0, spec.height - 1.0]])
    ones = np.ones((4, 1))
    for k, h in enumerate(out):
        w = (np.hstack([corners, ones]) @ h.matrix.T)[:, 2]
        if np.any(w <= 1e-9):
            raise ValueError(f"motion schedule folds the image plane at frame {k}")
    return out


def gen_layout(dims: tuple, cfg: PlacementConfig, margin: int = 0) -> List[TextInstance]:
    """Frame-0 text layout on an everywhere-valid canvas (optionally with an
    invalid border band of `margin` pixels)."""
    width, height = dims
    seg = np.ones((height, width), dtype=np.int64)
    if margin > 0:
        seg[:, :] = 0
        seg[margin:height - margin, margin:width - margin] = 1
    assets = CanonicalAssets(width=width, height=height, segmentation=seg)
    seeds = place_text(assets, cfg, frame_count=1)
    out = []
    for i, seed in enumerate(seeds, start=1):
        chars = [CharBox(poly, ch) for poly, ch in
                 zip(seed.char_polygons, seed.transcription)]
        out.append(TextInstance(id=i, polygon=seed.polygon,
                                transcription=seed.transcription, chars=chars))
    return out


@dataclass
class Scenario:
    homographies: List[Homography]
    flows: "FlowSequence | None"  # None for single-frame scenes
    deformation: DeformationField
    ground_truth: VideoAnnotation


def _grid_points(width: int, height: int) -> np.ndarray:
    xs, ys = np.meshgrid(np.arange(width, dtype=np.float64),
                         np.arange(height, dtype=np.float64))
    return np.column_stack([xs.ravel(), ys.ravel()])


def _displacement_grid(m: np.ndarray, pts: np.ndarray, width: int, height: int):
    q = np.hstack([pts, np.ones((len(pts), 1))]) @ m.T
    mapped = q[:, :2] / q[:, 2:3]
    disp = mapped - pts
    return disp[:, 0].reshape(height, width), disp[:, 1].reshape(height, width)


def gen_motion(layout: List[TextInstance], spec: MotionSpec,
               video_id: str = "scene") -> Scenario:
    """Generate (homographies, flows, deformation, ground truth), all
    consistent by construction: frame-k geometry is H_k applied to frame 0,
    flows/deformation are the exact displacements of the same maps."""
    hs = motion_homographies(spec)
    n = spec.frame_count
    pts = _grid_points(spec.width, spec.height)
    rng = np.random.default_rng((spec.seed, 0xF10))

    def noisy(u, v):
        if spec.noise_sigma > 0.0:
            u = u + rng.normal(0.0, spec.noise_sigma, u.shape)
            v = v + rng.normal(0.0, spec.noise_sigma, v.shape)
        return FlowField(u.astype(np.float32), v.astype(np.float32))

    forward = []
    backward = []
    for k in range(n - 1):
        m_fwd = hs[k + 1].matrix @ np.linalg.inv(hs[k].matrix)
        forward.append(noisy(*_displacement_grid(m_fwd, pts, spec.width, spec.height)))
    for k in range(1, n):
        m_bwd = hs[k - 1].matrix @ np.linalg.inv(hs[k].matrix)
        backward.append(noisy(*_displacement_grid(m_bwd, pts, spec.width, spec.height)))
    grids = []
    for k in range(n):
        grids.append(noisy(*_displacement_grid(hs[k].matrix, pts, spec.width, spec.height)))

    frames = []
    for k in range(n):
        instances = []
        for inst in layout:
            poly = transform_polygon(hs[k], inst.polygon)
            chars = None
            if inst.chars is not None:
                chars = [CharBox(transform_polygon(hs[k], c.polygon), c.label)
                         for c in inst.chars]
            instances.append(TextInstance(id=inst.id, polygon=poly,
                                          transcription=inst.transcription,
                                          ignore=inst.ignore, chars=chars))
        frames.append(FrameRecord(frame_index=k, instances=instances))

    flows = FlowSequence(forward, backward) if n > 1 else None
    return Scenario(
        homographies=hs,
        flows=flows,
        deformation=DeformationField(grids),
        ground_truth=VideoAnnotation(video_id=video_id, frames=frames),
    )
