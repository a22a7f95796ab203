"""Geometry-level tracking-by-association simulator.

Carries persistent identities across frames from prior detections: gated
IoU + transcription-distance costs, optimal assignment, newborn ids for
unmatched detections, and patience-based termination. The transcription a
track reports is a per-position majority vote over its observations, so
recognition evidence accumulates across frames.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Sequence

from vtforge.dataio import FrameRecord, TextInstance, VideoAnnotation
from vtforge.geometry import AABox, Polygon, aabb, polygon_iou
from vtforge.matching import MatchWeights, hungarian

BIG_COST = 1e6


@dataclass
class AssocConfig:
    iou_gate: float = 0.3
    text_weight: float = 0.5
    cost_threshold: float = 0.7
    patience: int = 5
    weights: MatchWeights = field(default_factory=MatchWeights)

    def __post_init__(self):
        for name in ("iou_gate", "text_weight", "cost_threshold"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")
        if self.patience < 0:
            raise ValueError("patience must be >= 0")


def levenshtein(a: str, b: str) -> int:
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def normalized_edit_distance(a: str, b: str) -> float:
    denom = max(len(a), len(b), 1)
    return levenshtein(a, b) / denom


def consensus_transcription(observations: Sequence[str]) -> str:
    """Per-position majority vote; ties go to the earliest observation.

    The output length is the modal observation length (earliest-first on
    ties), and each position is voted over the observations long enough to
    reach it.
    """
    if not observations:
        return ""
    length_counts = Counter(len(o) for o in observations)
    top = max(length_counts.values())
    modal = {n for n, c in length_counts.items() if c == top}
    length = next(len(o) for o in observations if len(o) in modal)
    chars = []
    for pos in range(length):
        votes = Counter(o[pos] for o in observations if len(o) > pos)
        best = max(votes.values())
        tied = {ch for ch, c in votes.items() if c == best}
        chars.append(next(o[pos] for o in observations
                          if len(o) > pos and o[pos] in tied))
    return "".join(chars)


@dataclass
class Track:
    id: int
    polygon: Polygon
    box: AABox
    observations: List[str]
    age: int = 1
    miss_count: int = 0

    @property
    def transcription(self) -> str:
        return consensus_transcription(self.observations)


class Tracker:
    """Stateful frame-by-frame associator; ids start at 1 in first-seen order."""

    def __init__(self, cfg: AssocConfig | None = None):
        self.cfg = cfg or AssocConfig()
        self.tracks: List[Track] = []
        self._next_id = 1

    def step(self, detections: Sequence[TextInstance]) -> Dict[int, int]:
        """Associate one frame of detections; returns {detection index ->
        track id}. Output does not depend on the detection ordering."""
        cfg = self.cfg
        order = sorted(
            range(len(detections)),
            key=lambda i: ((aabb(detections[i].polygon).x0,
                            aabb(detections[i].polygon).y0,
                            aabb(detections[i].polygon).x1,
                            aabb(detections[i].polygon).y1),
                           detections[i].transcription))
        dets = [detections[i] for i in order]

        n_tracks = len(self.tracks)
        n_dets = len(dets)
        matched_track = {}
        matched_det = {}
        if n_tracks and n_dets:
            n_cols = max(n_dets, n_tracks)
            rows = []
            for ti, track in enumerate(self.tracks):
                row = [BIG_COST] * n_cols
                for di, det in enumerate(dets):
                    iou = polygon_iou(track.polygon, det.polygon)
                    if iou < cfg.iou_gate:
                        continue
                    ned = normalized_edit_distance(track.transcription,
                                                   det.transcription)
                    row[di] = ((1.0 - iou) * (1.0 - cfg.text_weight)
                               + ned * cfg.text_weight)
                rows.append(row)
            assignment, _ = hungarian(rows)
            for ti, di in enumerate(assignment):
                if di >= n_dets:
                    continue
                cost = rows[ti][di]
                if cost >= BIG_COST or cost > cfg.cost_threshold:
                    continue
                matched_track[ti] = di
                matched_det[di] = ti

        result: Dict[int, int] = {}
        for ti, track in enumerate(self.tracks):
            if ti in matched_track:
                det = dets[matched_track[ti]]
                track.polygon = det.polygon
                track.box = aabb(det.polygon)
                track.observations.append(det.transcription)
                track.age += 1
                track.miss_count = 0
            else:
                track.miss_count += 1
        for di, det in enumerate(dets):
            if di in matched_det:
                result[order[di]] = self.tracks[matched_det[di]].id
            else:
                track = Track(id=self._next_id, polygon=det.polygon,
                              box=aabb(det.polygon),
                              observations=[det.transcription])
                self._next_id += 1
                self.tracks.append(track)
                result[order[di]] = track.id
        self.tracks = [t for t in self.tracks if t.miss_count <= cfg.patience]
        return result


def run_sequence(detections: VideoAnnotation,
                 cfg: AssocConfig | None = None) -> VideoAnnotation:
    """Track a whole sequence of per-frame detections (input ids ignored).

    Frames must be contiguously indexed. Output instances carry the track
    id and the track's consensus transcription at that frame.
    """
    indices = [f.frame_index for f in detections.frames]
    if any(b != a + 1 for a, b in zip(indices, indices[1:])):
        raise ValueError("detection frames must be contiguously indexed")
    tracker = Tracker(cfg)
    out_frames = []
    for frame in detections.frames:
        assignment = tracker.step(frame.instances)
        by_id = {t.id: t for t in tracker.tracks}
        instances = []
        for di, det in enumerate(frame.instances):
            tid = assignment[di]
            transcription = by_id[tid].transcription if tid in by_id \
                else det.transcription
            instances.append(TextInstance(
                id=tid, polygon=det.polygon, transcription=transcription,
                ignore=det.ignore, chars=det.chars))
        instances.sort(key=lambda inst: inst.id)
        out_frames.append(FrameRecord(frame_index=frame.frame_index,
                                      instances=instances))
    return VideoAnnotation(video_id=detections.video_id, frames=out_frames)
