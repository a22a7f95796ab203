"""Video text spotting evaluation: detection/end-to-end P-R-F, CLEAR-MOT
(MOTA/MOTP), IDF1, and Mostly-Tracked / Mostly-Lost.

Ground truth marked with the ignore token ("###" by convention) is a
don't-care region: excluded from recall, and predictions matched to it are
excluded from precision.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

from vtforge.dataio import TextInstance, VideoAnnotation
from vtforge.geometry import aabb, iou_aabb, polygon_iou
from vtforge.matching import hungarian

BIG_COST = 1e6
MT_THRESHOLD = 0.8
ML_THRESHOLD = 0.2


@dataclass
class EvalConfig:
    iou_threshold: float = 0.5
    overlap_kind: str = "polygon"  # "polygon" | "aabb"
    case_sensitive: bool = False
    ignore_token: str = "###"

    def __post_init__(self):
        if not 0.0 < self.iou_threshold < 1.0:
            raise ValueError("iou_threshold must be in (0, 1)")
        if self.overlap_kind not in ("polygon", "aabb"):
            raise ValueError(f"unknown overlap kind {self.overlap_kind!r}")


@dataclass
class PRF:
    precision: float
    recall: float
    fmeasure: float
    tp: int = 0
    fp: int = 0
    fn: int = 0


@dataclass
class MetricReport:
    precision: float
    recall: float
    fmeasure: float
    mota: float
    motp: float
    idf1: float
    idsw: int
    fp: int
    fn: int
    gt_count: int
    mostly_tracked: int
    mostly_lost: int
    gt_track_count: int = 0

    def to_dict(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "fmeasure": self.fmeasure,
            "mota": self.mota,
            "motp": self.motp,
            "idf1": self.idf1,
            "idsw": self.idsw,
            "fp": self.fp,
            "fn": self.fn,
            "gt_count": self.gt_count,
            "mostly_tracked": self.mostly_tracked,
            "mostly_lost": self.mostly_lost,
            "gt_track_count": self.gt_track_count,
        }


def _overlap(a: TextInstance, b: TextInstance, cfg: EvalConfig) -> float:
    if cfg.overlap_kind == "aabb":
        return iou_aabb(aabb(a.polygon), aabb(b.polygon))
    return polygon_iou(a.polygon, b.polygon)


def _is_ignored(inst: TextInstance, cfg: EvalConfig) -> bool:
    return inst.ignore or inst.transcription == cfg.ignore_token


def _text_equal(a: str, b: str, cfg: EvalConfig) -> bool:
    if cfg.case_sensitive:
        return a == b
    return a.casefold() == b.casefold()


def _match_sets(gts: Sequence[TextInstance], preds: Sequence[TextInstance],
                cfg: EvalConfig, require_text: bool,
                forced: Dict[int, int] | None = None) -> List[Tuple[int, int, float]]:
    """One-to-one matching maximizing matches, minimizing (1 - IoU) among
    pairs at or above the IoU threshold. `forced` pins (gt_idx -> pred_idx)
    pairs before the assignment runs. Returns (gt_idx, pred_idx, iou)."""
    matches = []
    used_g = set()
    used_p = set()
    if forced:
        for gi, pi in forced.items():
            iou = _overlap(gts[gi], preds[pi], cfg)
            if iou >= cfg.iou_threshold and (
                    not require_text or _text_equal(
                        gts[gi].transcription, preds[pi].transcription, cfg)):
                matches.append((gi, pi, iou))
                used_g.add(gi)
                used_p.add(pi)
    free_g = [i for i in range(len(gts)) if i not in used_g]
    free_p = [j for j in range(len(preds)) if j not in used_p]
    if free_g and free_p:
        pairs = {}
        for i in free_g:
            for j in free_p:
                iou = _overlap(gts[i], preds[j], cfg)
                if iou < cfg.iou_threshold:
                    continue
                if require_text and not _text_equal(
                        gts[i].transcription, preds[j].transcription, cfg):
                    continue
                pairs[i, j] = iou
        if pairs:
            transpose = len(free_g) > len(free_p)
            rows, cols = (free_p, free_g) if transpose else (free_g, free_p)
            matrix = [[BIG_COST] * len(cols) for _ in rows]
            for ri, r in enumerate(rows):
                for ci, c in enumerate(cols):
                    key = (c, r) if transpose else (r, c)
                    if key in pairs:
                        matrix[ri][ci] = 1.0 - pairs[key]
            assignment, _ = hungarian(matrix)
            for ri, ci in enumerate(assignment):
                if matrix[ri][ci] >= BIG_COST:
                    continue
                gi, pi = (cols[ci], rows[ri]) if transpose else (rows[ri], cols[ci])
                matches.append((gi, pi, pairs[gi, pi]))
    return matches


def _split_frame(frame_insts: Sequence[TextInstance], cfg: EvalConfig):
    countable = [i for i in frame_insts if not _is_ignored(i, cfg)]
    ignored = [i for i in frame_insts if _is_ignored(i, cfg)]
    return countable, ignored


def _frame_union(gt: VideoAnnotation, pred: VideoAnnotation) -> List[int]:
    return sorted(set(gt.frame_map()) | set(pred.frame_map()))


def _prf_from_counts(tp: int, fp: int, fn: int) -> PRF:
    precision = 100.0 if tp + fp == 0 else 100.0 * tp / (tp + fp)
    recall = 100.0 if tp + fn == 0 else 100.0 * tp / (tp + fn)
    if precision + recall == 0.0:
        fmeasure = 0.0
    else:
        fmeasure = 2.0 * precision * recall / (precision + recall)
    return PRF(precision, recall, fmeasure, tp, fp, fn)


def _prf(preds: VideoAnnotation, gts: VideoAnnotation, cfg: EvalConfig,
         require_text: bool) -> PRF:
    gt_frames = gts.frame_map()
    pred_frames = preds.frame_map()
    tp = fp = fn = 0
    for k in _frame_union(gts, preds):
        gt_insts = gt_frames[k].instances if k in gt_frames else []
        pred_insts = pred_frames[k].instances if k in pred_frames else []
        countable, ignored = _split_frame(gt_insts, cfg)
        matches = _match_sets(countable, pred_insts, cfg, require_text)
        matched_p = {pi for _, pi, _ in matches}
        leftovers = [pred_insts[j] for j in range(len(pred_insts))
                     if j not in matched_p]
        absorbed = _match_sets(ignored, leftovers, cfg, require_text=False)
        tp += len(matches)
        fn += len(countable) - len(matches)
        fp += len(leftovers) - len(absorbed)
    return _prf_from_counts(tp, fp, fn)


def detection_prf(preds: VideoAnnotation, gts: VideoAnnotation,
                  cfg: EvalConfig | None = None) -> PRF:
    """Detection precision/recall/F over pooled frames (percentages)."""
    return _prf(preds, gts, cfg or EvalConfig(), require_text=False)


def e2e_prf(preds: VideoAnnotation, gts: VideoAnnotation,
            cfg: EvalConfig | None = None) -> PRF:
    """End-to-end spotting P/R/F: a match also needs an exact transcription
    (case-folded unless configured), with no lexicon assistance."""
    return _prf(preds, gts, cfg or EvalConfig(), require_text=True)


@dataclass
class MotStats:
    mota: float
    motp: float
    fp: int
    fn: int
    idsw: int
    gt_total: int
    matches: int
    # per frame: {gt_id: (pred_id, iou)}
    frame_matches: List[Dict[int, Tuple[int, float]]] = field(default_factory=list)
    frame_indices: List[int] = field(default_factory=list)


def clear_mot(gt_seq: VideoAnnotation, pred_seq: VideoAnnotation,
              cfg: EvalConfig | None = None) -> MotStats:
    """CLEAR-MOT correspondence: carry over still-overlapping pairs from the
    previous frame, match the rest optimally, count FP/FN/ID switches.

    MOTA = 100 * (1 - (FN + FP + IDSW) / GT); MOTP = mean matched IoU * 100.
    """
    cfg = cfg or EvalConfig()
    gt_frames = gt_seq.frame_map()
    pred_frames = pred_seq.frame_map()
    prev: Dict[int, int] = {}
    last_match: Dict[int, int] = {}
    fp = fn = idsw = gt_total = matches = 0
    iou_sum = 0.0
    trace: List[Dict[int, Tuple[int, float]]] = []
    frame_indices = _frame_union(gt_seq, pred_seq)

    for k in frame_indices:
        gt_insts = gt_frames[k].instances if k in gt_frames else []
        pred_insts = pred_frames[k].instances if k in pred_frames else []
        countable, ignored = _split_frame(gt_insts, cfg)
        gt_total += len(countable)

        pred_index = {p.id: j for j, p in enumerate(pred_insts)}
        forced = {}
        for gi, g in enumerate(countable):
            pid = prev.get(g.id)
            if pid is not None and pid in pred_index:
                pj = pred_index[pid]
                if pj not in forced.values():
                    forced[gi] = pj
        pairs = _match_sets(countable, pred_insts, cfg, require_text=False,
                            forced=forced)
        matched_p = {pi for _, pi, _ in pairs}
        leftovers = [pred_insts[j] for j in range(len(pred_insts))
                     if j not in matched_p]
        absorbed = _match_sets(ignored, leftovers, cfg, require_text=False)

        frame_match: Dict[int, Tuple[int, float]] = {}
        cur: Dict[int, int] = {}
        for gi, pi, iou in pairs:
            gid = countable[gi].id
            pid = pred_insts[pi].id
            if gid in last_match and last_match[gid] != pid:
                idsw += 1
            last_match[gid] = pid
            cur[gid] = pid
            iou_sum += iou
            matches += 1
            frame_match[gid] = (pid, iou)
        fn += len(countable) - len(pairs)
        fp += len(leftovers) - len(absorbed)
        prev = cur
        trace.append(frame_match)

    mota = 100.0 * (1.0 - (fn + fp + idsw) / max(gt_total, 1))
    motp = 100.0 * iou_sum / matches if matches > 0 else 100.0
    return MotStats(mota=mota, motp=motp, fp=fp, fn=fn, idsw=idsw,
                    gt_total=gt_total, matches=matches,
                    frame_matches=trace, frame_indices=frame_indices)


def _trajectories(ann: VideoAnnotation, cfg: EvalConfig, countable_only: bool):
    """{instance id: {frame: TextInstance}} over the annotation."""
    out: Dict[int, Dict[int, TextInstance]] = {}
    for frame in ann.frames:
        for inst in frame.instances:
            if countable_only and _is_ignored(inst, cfg):
                continue
            out.setdefault(inst.id, {})[frame.frame_index] = inst
    return out


def _absorbed_pred_frames(gt_seq: VideoAnnotation, pred_seq: VideoAnnotation,
                          cfg: EvalConfig):
    """(pred_id, frame) pairs accounted to don't-care ground truth: the
    prediction overlaps an ignored region and no countable one."""
    gt_frames = gt_seq.frame_map()
    absorbed = set()
    for frame in pred_seq.frames:
        k = frame.frame_index
        gt_insts = gt_frames[k].instances if k in gt_frames else []
        countable, ignored = _split_frame(gt_insts, cfg)
        if not ignored:
            continue
        for p in frame.instances:
            hits_countable = any(_overlap(g, p, cfg) >= cfg.iou_threshold
                                 for g in countable)
            if hits_countable:
                continue
            if any(_overlap(g, p, cfg) >= cfg.iou_threshold for g in ignored):
                absorbed.add((p.id, k))
    return absorbed


def idf1(gt_seq: VideoAnnotation, pred_seq: VideoAnnotation,
         cfg: EvalConfig | None = None) -> float:
    """Identity F1 under a globally optimal trajectory pairing.

    Trajectory pair cost is the count of frames where the pair does not
    overlap at the IoU threshold; IDF1 = 2 IDTP / (2 IDTP + IDFP + IDFN),
    as a percentage.
    """
    cfg = cfg or EvalConfig()
    gt_traj = _trajectories(gt_seq, cfg, countable_only=True)
    pred_traj = _trajectories(pred_seq, cfg, countable_only=False)
    absorbed = _absorbed_pred_frames(gt_seq, pred_seq, cfg)
    for pid in list(pred_traj):
        pred_traj[pid] = {k: v for k, v in pred_traj[pid].items()
                          if (pid, k) not in absorbed}
        if not pred_traj[pid]:
            del pred_traj[pid]

    gt_ids = sorted(gt_traj)
    pred_ids = sorted(pred_traj)
    total_gt = sum(len(t) for t in gt_traj.values())
    total_pred = sum(len(t) for t in pred_traj.values())
    if total_gt == 0 and total_pred == 0:
        return 100.0
    n_g, n_p = len(gt_ids), len(pred_ids)

    overlap_count = {}
    for gi, gid in enumerate(gt_ids):
        for pi, pid in enumerate(pred_ids):
            g, p = gt_traj[gid], pred_traj[pid]
            common = set(g) & set(p)
            count = sum(1 for k in common
                        if _overlap(g[k], p[k], cfg) >= cfg.iou_threshold)
            if count:
                overlap_count[gi, pi] = count

    size = n_g + n_p
    matrix = [[BIG_COST] * size for _ in range(size)]
    for gi, gid in enumerate(gt_ids):
        for pi, pid in enumerate(pred_ids):
            ov = overlap_count.get((gi, pi), 0)
            matrix[gi][pi] = (len(gt_traj[gid]) - ov) + (len(pred_traj[pid]) - ov)
        matrix[gi][n_p + gi] = len(gt_traj[gid])
    for pi, pid in enumerate(pred_ids):
        matrix[n_g + pi][pi] = len(pred_traj[pid])
        for gi in range(n_g):
            matrix[n_g + pi][n_p + gi] = 0.0
    assignment, _ = hungarian(matrix)
    idtp = 0
    for gi in range(n_g):
        pi = assignment[gi]
        if pi < n_p:
            idtp += overlap_count.get((gi, pi), 0)
    return 200.0 * idtp / (total_gt + total_pred)


def mostly_tracked_lost(gt_seq: VideoAnnotation, pred_seq: VideoAnnotation,
                        cfg: EvalConfig | None = None,
                        stats: MotStats | None = None) -> Tuple[int, int]:
    """Counts of GT trajectories covered >= 80% (MT) and <= 20% (ML) of
    their frames by the CLEAR-MOT correspondence (any prediction id)."""
    cfg = cfg or EvalConfig()
    stats = stats or clear_mot(gt_seq, pred_seq, cfg)
    gt_traj = _trajectories(gt_seq, cfg, countable_only=True)
    per_frame = dict(zip(stats.frame_indices, stats.frame_matches))
    mt = ml = 0
    for gid, frames in gt_traj.items():
        covered = sum(1 for k in frames if gid in per_frame.get(k, {}))
        ratio = covered / len(frames)
        if ratio >= MT_THRESHOLD:
            mt += 1
        elif ratio <= ML_THRESHOLD:
            ml += 1
    return mt, ml


def evaluate(gt_seq: VideoAnnotation, pred_seq: VideoAnnotation,
             cfg: EvalConfig | None = None) -> MetricReport:
    """Full tracking/spotting report for one video."""
    cfg = cfg or EvalConfig()
    prf = detection_prf(pred_seq, gt_seq, cfg)
    stats = clear_mot(gt_seq, pred_seq, cfg)
    idf1_value = idf1(gt_seq, pred_seq, cfg)
    mt, ml = mostly_tracked_lost(gt_seq, pred_seq, cfg, stats)
    gt_tracks = len(_trajectories(gt_seq, cfg, countable_only=True))
    return MetricReport(
        precision=prf.precision, recall=prf.recall, fmeasure=prf.fmeasure,
        mota=stats.mota, motp=stats.motp, idf1=idf1_value,
        idsw=stats.idsw, fp=stats.fp, fn=stats.fn, gt_count=stats.gt_total,
        mostly_tracked=mt, mostly_lost=ml, gt_track_count=gt_tracks)
