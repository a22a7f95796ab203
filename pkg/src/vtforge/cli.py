"""Command-line entry point.

Machine-readable run reports go to standard output as a single JSON
document; diagnostics go to standard error. Exit codes: 0 success, 1 input
or validation error, 2 internal error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from xml.sax.saxutils import escape

from vtforge import dataio
from vtforge.dataio import FormatError, VideoAnnotation
from vtforge.geometry import AABox, GeometryError, Polygon, aabb
from vtforge.homest import EstimationError, RansacParams
from vtforge.matching import (GroundTruthRecord, MatchWeights, PredictionRecord,
                              cost_matrix, hungarian, set_loss)
from vtforge.metrics import EvalConfig, clear_mot, detection_prf, e2e_prf, evaluate
from vtforge.placement import PlacementConfig
from vtforge.propagation import (DeformationField, FlowSequence, PropagationConfig,
                                 PropagationError, filter_instances,
                                 propagate_deformation, propagate_flow)
from vtforge.scenes import MotionSpec, Scenario, gen_layout, gen_motion
from vtforge.tracker import AssocConfig, run_sequence

USER_ERRORS = (FormatError, GeometryError, EstimationError, PropagationError,
               ValueError, FileNotFoundError, NotADirectoryError)


class CliParser(argparse.ArgumentParser):
    """argparse that exits 1 (not 2) on bad usage, per the exit-code contract."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


def _dims(text: str):
    try:
        w, h = text.lower().split("x")
        w, h = int(w), int(h)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected WIDTHxHEIGHT, got {text!r}")
    if w < 2 or h < 2:
        raise argparse.ArgumentTypeError(f"dims too small: {text}")
    return w, h


def build_parser() -> CliParser:
    parser = CliParser(prog="vtforge")
    sub = parser.add_subparsers(dest="cmd", required=True)

    def common(p, out_required=False):
        p.add_argument("--config", type=Path, default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", type=Path, required=out_required)
        p.add_argument("--iou", type=float, default=None)
        p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("gen-scene", help="generate an analytic scenario")
    common(p, out_required=True)
    p.add_argument("--motion", default="static",
                   help="kind[:params], e.g. translate:3,-2 rotate:1.5 "
                        "zoom:1.01 projective:1e-6,2e-6 random_shift:2")
    p.add_argument("--frames", type=int, default=10)
    p.add_argument("--dims", type=_dims, default=(640, 480))
    p.add_argument("--density", type=float, default=None)
    p.add_argument("--margin", type=int, default=40)
    p.add_argument("--noise-sigma", type=float, default=0.0)
    p.add_argument("--video-id", default=None,
                   help="defaults to the output directory name")

    for name in ("synth-flow", "synth-deform"):
        p = sub.add_parser(name, help=f"propagate seed-frame text via "
                           f"{'optical flow' if name == 'synth-flow' else 'deformation fields'}")
        common(p, out_required=True)
        p.add_argument("--in", dest="in_dir", type=Path, required=True)
        p.add_argument("--seed-frame", type=int, default=0)
        p.add_argument("--masks", type=Path, default=None)

    p = sub.add_parser("track", help="run the tracking simulator over detections")
    common(p, out_required=True)
    p.add_argument("--in", dest="in_path", type=Path, required=True)

    for name in ("eval-det", "eval-e2e", "eval-track"):
        p = sub.add_parser(name, help=f"evaluate predictions ({name[5:]})")
        common(p)
        p.add_argument("--gt", type=Path, required=True)
        p.add_argument("--pred", type=Path, required=True)

    p = sub.add_parser("match", help="cost-matrix matching of predictions to GT")
    common(p)
    p.add_argument("--gt", type=Path, required=True)
    p.add_argument("--pred", type=Path, required=True)
    p.add_argument("--dims", type=_dims, required=True)

    p = sub.add_parser("render-overlay", help="emit per-frame SVG overlays")
    common(p, out_required=True)
    p.add_argument("--ann", type=Path, required=True)
    p.add_argument("--dims", type=_dims, required=True)
    return parser


def _seed_of(args) -> int:
    if args.seed is not None:
        return args.seed
    return int(os.environ.get("VTFORGE_SEED", "0"))


def _load_config(args) -> dict:
    if args.config is None:
        return {}
    return dataio.read_config(args.config)


def _eval_config(args, cfgmap) -> EvalConfig:
    kw = {}
    if "eval.iou_threshold" in cfgmap:
        kw["iou_threshold"] = cfgmap["eval.iou_threshold"]
    if args.iou is not None:
        kw["iou_threshold"] = args.iou
    if "eval.overlap_kind" in cfgmap:
        kw["overlap_kind"] = cfgmap["eval.overlap_kind"]
    if "eval.case_sensitive" in cfgmap:
        kw["case_sensitive"] = cfgmap["eval.case_sensitive"]
    if "eval.ignore_token" in cfgmap:
        kw["ignore_token"] = cfgmap["eval.ignore_token"]
    return EvalConfig(**kw)


def _ransac_params(cfgmap, seed) -> RansacParams:
    kw = {"seed": seed}
    for key, attr in (("ransac.iterations", "iterations"),
                      ("ransac.inlier_threshold", "inlier_threshold"),
                      ("ransac.min_inlier_fraction", "min_inlier_fraction"),
                      ("ransac.confidence", "confidence"),
                      ("ransac.seed", "seed")):
        if key in cfgmap:
            kw[attr] = cfgmap[key]
    return RansacParams(**kw)


def _placement_config(cfgmap, seed, density=None) -> PlacementConfig:
    kw = {"seed": seed}
    if "placement.lexicon" in cfgmap:
        kw["lexicon"] = dataio.read_lexicon(cfgmap["placement.lexicon"])
    if "placement.density_target" in cfgmap:
        kw["density_target"] = cfgmap["placement.density_target"]
    if density is not None:
        kw["density_target"] = density
    if "placement.mean_word_length_target" in cfgmap:
        kw["mean_word_length_target"] = cfgmap["placement.mean_word_length_target"]
    lo = cfgmap.get("placement.font_height_min")
    hi = cfgmap.get("placement.font_height_max")
    if lo is not None or hi is not None:
        default = PlacementConfig()
        kw["font_height_range"] = (lo if lo is not None else default.font_height_range[0],
                                   hi if hi is not None else default.font_height_range[1])
    if "placement.min_region_area" in cfgmap:
        kw["min_region_area"] = cfgmap["placement.min_region_area"]
    return PlacementConfig(**kw)


def _propagation_config(args, cfgmap, seed) -> PropagationConfig:
    kw = {"ransac": _ransac_params(cfgmap, seed)}
    kw["seed_frame"] = getattr(args, "seed_frame", 0)
    if "propagation.seed_frame" in cfgmap and getattr(args, "seed_frame", 0) == 0:
        kw["seed_frame"] = cfgmap["propagation.seed_frame"]
    for key, attr in (("propagation.samples_per_edge", "samples_per_edge"),
                      ("propagation.max_oob_fraction", "max_oob_fraction"),
                      ("propagation.max_restore_error", "max_restore_error")):
        if key in cfgmap:
            kw[attr] = cfgmap[key]
    return PropagationConfig(**kw)


def _assoc_config(cfgmap) -> AssocConfig:
    kw = {}
    for key, attr in (("assoc.iou_gate", "iou_gate"),
                      ("assoc.text_weight", "text_weight"),
                      ("assoc.cost_threshold", "cost_threshold"),
                      ("assoc.patience", "patience")):
        if key in cfgmap:
            kw[attr] = cfgmap[key]
    return AssocConfig(**kw)


def _parse_motion(text: str, frames: int, dims, seed: int, noise: float) -> MotionSpec:
    kind, _, rest = text.partition(":")
    params = [float(v) for v in rest.split(",") if v] if rest else []
    w, h = dims
    kw = dict(kind=kind, frame_count=frames, width=w, height=h, seed=seed,
              noise_sigma=noise)
    if kind == "translate":
        if len(params) != 2:
            raise ValueError("translate takes dx,dy")
        kw.update(dx=params[0], dy=params[1])
    elif kind == "rotate":
        if len(params) != 1:
            raise ValueError("rotate takes degrees per frame")
        kw.update(degrees_per_frame=params[0])
    elif kind == "zoom":
        if len(params) != 1:
            raise ValueError("zoom takes a per-frame factor")
        kw.update(zoom_per_frame=params[0])
    elif kind == "projective":
        if len(params) not in (2, 4):
            raise ValueError("projective takes gx,gy[,dx,dy]")
        kw.update(gx=params[0], gy=params[1])
        if len(params) == 4:
            kw.update(dx=params[2], dy=params[3])
    elif kind == "random_shift":
        if len(params) != 1:
            raise ValueError("random_shift takes a max shift")
        kw.update(max_shift=params[0])
    elif kind == "static":
        if params:
            raise ValueError("static takes no parameters")
    else:
        raise ValueError(f"unknown motion kind {kind!r}")
    return MotionSpec(**kw)


def _write_scenario(out_dir: Path, scenario: Scenario) -> int:
    out_dir.mkdir(parents=True, exist_ok=True)
    files = 0
    dataio.write_annotations(dataio.annotations_path(out_dir), scenario.ground_truth)
    files += 1
    if scenario.flows is not None:
        for k, flow in enumerate(scenario.flows.forward):
            dataio.write_flow(dataio.fwd_flow_path(out_dir, k), flow)
            files += 1
        for k, flow in enumerate(scenario.flows.backward, start=1):
            dataio.write_flow(dataio.bwd_flow_path(out_dir, k), flow)
            files += 1
    for k, grid in enumerate(scenario.deformation.grids):
        dataio.write_flow(dataio.def_flow_path(out_dir, k), grid)
        files += 1
    return files


def _cmd_gen_scene(args, cfgmap, seed):
    if args.frames < 1:
        raise ValueError("--frames must be >= 1")
    placement = _placement_config(cfgmap, seed, args.density)
    spec = _parse_motion(args.motion, args.frames, args.dims, seed,
                         args.noise_sigma)
    layout = gen_layout(args.dims, placement, margin=args.margin)
    video_id = args.video_id if args.video_id is not None else (args.out.name or "scene")
    scenario = gen_motion(layout, spec, video_id=video_id)
    files = _write_scenario(args.out, scenario)
    config = {"motion": args.motion, "frames": args.frames,
              "dims": list(args.dims), "density": placement.density_target,
              "margin": args.margin, "seed": seed,
              "noise_sigma": args.noise_sigma}
    results = {"video_id": scenario.ground_truth.video_id,
               "frames": args.frames, "instances": len(layout),
               "files_written": files}
    return results, config


def _load_flow_sequence(in_dir: Path, n: int) -> FlowSequence:
    forward = [dataio.read_flow(dataio.fwd_flow_path(in_dir, k))
               for k in range(n - 1)]
    backward = [dataio.read_flow(dataio.bwd_flow_path(in_dir, k))
                for k in range(1, n)]
    return FlowSequence(forward, backward)


def _load_deformation(in_dir: Path, n: int) -> DeformationField:
    return DeformationField([dataio.read_flow(dataio.def_flow_path(in_dir, k))
                             for k in range(n)])


def _seeds_from_annotation(ann: VideoAnnotation, seed_frame: int):
    from vtforge.placement import TextInstanceSeed
    frame = ann.frame_map().get(seed_frame)
    if frame is None:
        raise ValueError(f"annotation has no frame {seed_frame}")
    seeds = []
    meta = []
    for inst in frame.instances:
        chars = [c.polygon for c in inst.chars] if inst.chars else \
            [inst.polygon for _ in inst.transcription]
        seeds.append(TextInstanceSeed(inst.polygon, inst.transcription, chars))
        meta.append(inst)
    return seeds, meta


def _propagated_to_annotation(instances, meta, video_id, n_frames):
    frames = {}
    for inst, src in zip(instances, meta):
        for k in inst.present_frames():
            chars = None
            if inst.char_polygons and k in inst.char_polygons:
                chars = [dataio.CharBox(poly, ch) for poly, ch in
                         zip(inst.char_polygons[k], inst.transcription)]
            frames.setdefault(k, []).append(dataio.TextInstance(
                id=src.id, polygon=inst.polygons[k],
                transcription=inst.transcription, ignore=src.ignore,
                chars=chars))
    records = []
    for k in range(n_frames):
        instances_k = sorted(frames.get(k, []), key=lambda i: i.id)
        records.append(dataio.FrameRecord(frame_index=k, instances=instances_k))
    return VideoAnnotation(video_id=video_id, frames=records)


def _drop_summary(candidates, filtered, cfg, n_frames, masks=None):
    from vtforge.propagation import _occluded_fraction
    reasons = {"out_of_bounds": 0, "restore_failed": 0, "high_residual": 0,
               "occluded": 0, "trimmed": 0}
    kept = {inst.id: set(inst.present_frames()) for inst in filtered}
    for cand in candidates:
        restored = set(cand.present_frames())
        for k in range(n_frames):
            if k in kept.get(cand.id, set()):
                continue
            if k not in restored:
                reasons["restore_failed"] += 1
            elif cand.oob_fractions.get(k, 0.0) > cfg.max_oob_fraction:
                reasons["out_of_bounds"] += 1
            elif cand.residuals.get(k, math.inf) > cfg.max_restore_error:
                reasons["high_residual"] += 1
            elif masks is not None and k in masks and _occluded_fraction(
                    cand.polygons[k], masks[k]) > cfg.max_oob_fraction:
                reasons["occluded"] += 1
            else:
                reasons["trimmed"] += 1
    return reasons


def _cmd_synth(args, cfgmap, seed, route: str):
    ann = dataio.read_annotations(dataio.annotations_path(args.in_dir))
    if not ann.frames:
        raise ValueError("input annotation is empty")
    n = ann.frames[-1].frame_index + 1
    cfg = _propagation_config(args, cfgmap, seed)
    seeds, meta = _seeds_from_annotation(ann, cfg.seed_frame)
    if route == "flow":
        flows = _load_flow_sequence(args.in_dir, n)
        dims = (flows.width, flows.height)
        candidates = propagate_flow(seeds, flows, cfg)
    else:
        deformation = _load_deformation(args.in_dir, n)
        dims = (deformation.width, deformation.height)
        candidates = propagate_deformation(seeds, deformation, cfg)
    masks_root = args.masks if args.masks is not None else args.in_dir
    masks = {}
    for k in range(n):
        path = dataio.mask_path(masks_root, k)
        if path.exists():
            masks[k] = dataio.read_mask(path)
    if not masks:
        masks = None
    filtered = filter_instances(candidates, cfg, dims, masks)
    out_ann = _propagated_to_annotation(
        filtered, [meta[inst.id - 1] for inst in filtered], ann.video_id, n)
    args.out.mkdir(parents=True, exist_ok=True)
    dataio.write_annotations(dataio.annotations_path(args.out), out_ann)
    config = {"route": route, "seed_frame": cfg.seed_frame, "seed": seed,
              "samples_per_edge": cfg.samples_per_edge,
              "max_oob_fraction": cfg.max_oob_fraction,
              "max_restore_error": cfg.max_restore_error}
    results = {"video_id": ann.video_id, "frames": n,
               "instances_in": len(seeds), "instances_out": len(filtered),
               "drops": _drop_summary(candidates, filtered, cfg, n, masks)}
    return results, config


def _cmd_track(args, cfgmap, seed):
    ann = dataio.read_annotations(args.in_path)
    cfg = _assoc_config(cfgmap)
    tracked = run_sequence(ann, cfg)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    dataio.write_annotations(args.out, tracked)
    ids = {inst.id for frame in tracked.frames for inst in frame.instances}
    config = {"iou_gate": cfg.iou_gate, "text_weight": cfg.text_weight,
              "cost_threshold": cfg.cost_threshold, "patience": cfg.patience,
              "seed": seed}
    results = {"video_id": tracked.video_id, "frames": len(tracked.frames),
               "tracks": len(ids)}
    return results, config


def _video_pairs(gt_path: Path, pred_path: Path):
    """Pair (video id, gt annotation path, pred annotation path)."""
    if gt_path.is_file():
        vid = gt_path.parent.name or gt_path.stem
        return [(vid, gt_path, pred_path)]
    pairs = []
    gt_videos = sorted(p.parent.name for p in gt_path.glob("*/annotations.jsonl"))
    if not gt_videos:
        raise ValueError(f"no <video>/annotations.jsonl under {gt_path}")
    for vid in gt_videos:
        pred_file = pred_path / vid / "annotations.jsonl"
        if not pred_file.exists():
            raise ValueError(f"missing prediction for video {vid!r}")
        pairs.append((vid, gt_path / vid / "annotations.jsonl", pred_file))
    return pairs


def _run_videos(pairs, jobs, worker):
    if jobs < 1:
        raise ValueError("--jobs must be >= 1")
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        futures = {vid: pool.submit(worker, gt, pred) for vid, gt, pred in pairs}
        return {vid: futures[vid].result() for vid, _, _ in sorted(pairs)}


def _cmd_eval_prf(args, cfgmap, seed, end_to_end: bool):
    cfg = _eval_config(args, cfgmap)
    fn = e2e_prf if end_to_end else detection_prf

    def worker(gt_file, pred_file):
        gt = dataio.read_annotations(gt_file)
        pred = dataio.read_annotations(pred_file)
        return fn(pred, gt, cfg)

    per_video = _run_videos(_video_pairs(args.gt, args.pred), args.jobs, worker)
    tp = sum(r.tp for r in per_video.values())
    fp = sum(r.fp for r in per_video.values())
    fn_count = sum(r.fn for r in per_video.values())
    from vtforge.metrics import _prf_from_counts
    overall = _prf_from_counts(tp, fp, fn_count)
    config = {"iou_threshold": cfg.iou_threshold, "overlap_kind": cfg.overlap_kind,
              "case_sensitive": cfg.case_sensitive,
              "ignore_token": cfg.ignore_token, "seed": seed}
    results = {
        "videos": {vid: vars(r) for vid, r in per_video.items()},
        "overall": vars(overall),
    }
    return results, config


def _cmd_eval_track(args, cfgmap, seed):
    cfg = _eval_config(args, cfgmap)

    def worker(gt_file, pred_file):
        gt = dataio.read_annotations(gt_file)
        pred = dataio.read_annotations(pred_file)
        return evaluate(gt, pred, cfg), clear_mot(gt, pred, cfg)

    per_video = _run_videos(_video_pairs(args.gt, args.pred), args.jobs, worker)
    reports = {vid: rep for vid, (rep, _) in per_video.items()}
    gt_total = sum(r.gt_count for r in reports.values())
    fp = sum(r.fp for r in reports.values())
    fn = sum(r.fn for r in reports.values())
    idsw = sum(r.idsw for r in reports.values())
    match_total = sum(stats.matches for _, stats in per_video.values())
    iou_total = sum(stats.motp / 100.0 * stats.matches
                    for _, stats in per_video.values())
    overall = {
        "mota": 100.0 * (1.0 - (fn + fp + idsw) / max(gt_total, 1)),
        "motp": 100.0 * iou_total / match_total if match_total else 100.0,
        "fp": fp, "fn": fn, "idsw": idsw, "gt_count": gt_total,
        "mostly_tracked": sum(r.mostly_tracked for r in reports.values()),
        "mostly_lost": sum(r.mostly_lost for r in reports.values()),
        "gt_track_count": sum(r.gt_track_count for r in reports.values()),
    }
    config = {"iou_threshold": cfg.iou_threshold, "overlap_kind": cfg.overlap_kind,
              "case_sensitive": cfg.case_sensitive,
              "ignore_token": cfg.ignore_token, "seed": seed}
    results = {"videos": {vid: rep.to_dict() for vid, rep in reports.items()},
               "overall": overall}
    return results, config


def _normalized_box(polygon: Polygon, dims) -> AABox:
    w, h = dims
    box = aabb(polygon)
    return AABox(box.x0 / w, box.y0 / h, box.x1 / w, box.y1 / h)


def _normalized_polygon(polygon: Polygon, dims) -> Polygon:
    w, h = dims
    return Polygon([(v.x / w, v.y / h) for v in polygon.vertices])


def _cmd_match(args, cfgmap, seed):
    gt_ann = dataio.read_annotations(args.gt)
    pred_ann = dataio.read_annotations(args.pred)
    weights = MatchWeights()
    gt_frames = gt_ann.frame_map()
    pred_frames = pred_ann.frame_map()
    frames_out = []
    total = 0.0
    breakdown_sum = {"classification": 0.0, "box": 0.0, "polygon": 0.0,
                     "recognition": 0.0}
    for k in sorted(set(gt_frames) | set(pred_frames)):
        gt_insts = gt_frames[k].instances if k in gt_frames else []
        pred_insts = pred_frames[k].instances if k in pred_frames else []
        if not pred_insts:
            continue
        gts = [GroundTruthRecord(box=_normalized_box(g.polygon, args.dims),
                                 polygon=_normalized_polygon(g.polygon, args.dims),
                                 transcription=g.transcription)
               for g in gt_insts]
        while len(gts) < len(pred_insts):
            gts.append(GroundTruthRecord.no_object())
        # annotation files carry no scores; treat predictions as maximally
        # confident minus an epsilon so no-object padding rows stay finite
        preds = [PredictionRecord(class_prob=1.0 - 1e-6,
                                  box=_normalized_box(p.polygon, args.dims),
                                  polygon=_normalized_polygon(p.polygon, args.dims))
                 for p in pred_insts]
        matrix = cost_matrix(preds, gts, weights)
        if len(gts) <= len(preds):
            assignment, frame_cost = hungarian(matrix)
            matched = list(enumerate(assignment))
        else:
            # more ground truths than predictions: assign each prediction
            assignment, frame_cost = hungarian(matrix.T)
            matched = [(i, j) for j, i in enumerate(assignment)]
        pairs = [(gts[i], preds[j]) for i, j in matched]
        loss, breakdown = set_loss(pairs, weights)
        total += loss
        for key in breakdown_sum:
            breakdown_sum[key] += breakdown[key]
        matched_gt = {i for i, _ in matched}
        frames_out.append({
            "frame_index": k,
            "assignment": [
                {"gt_id": gt_insts[i].id if i < len(gt_insts) else None,
                 "pred_id": pred_insts[j].id,
                 "cost": matrix[i][j]}
                for i, j in matched],
            "unmatched_gt_ids": [gt_insts[i].id for i in range(len(gt_insts))
                                 if i not in matched_gt],
            "matching_cost": frame_cost,
            "loss": loss,
        })
    config = {"dims": list(args.dims), "seed": seed,
              "weights": vars(weights)}
    results = {"frames": frames_out, "total_loss": total,
               "breakdown": breakdown_sum}
    return results, config


def _id_color(instance_id: int) -> str:
    digest = hashlib.md5(str(instance_id).encode("ascii")).hexdigest()
    return f"#{digest[:6]}"


def render_overlay(ann: VideoAnnotation, dims, out_dir: Path) -> int:
    """One SVG per frame: polygons as closed paths, per-id stable stroke
    color, transcription as a label at the first vertex."""
    w, h = dims
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = 0
    for frame in ann.frames:
        parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" '
            f'viewBox="0 0 {w} {h}">',
            f'<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>',
        ]
        for inst in frame.instances:
            color = _id_color(inst.id)
            coords = " L ".join(f"{v.x:.2f} {v.y:.2f}" for v in inst.polygon.vertices)
            parts.append(f'<path d="M {coords} Z" fill="none" stroke="{color}" '
                         f'stroke-width="2"/>')
            v0 = inst.polygon.vertices[0]
            parts.append(f'<text x="{v0.x:.2f}" y="{v0.y:.2f}" fill="{color}" '
                         f'font-size="12">{escape(inst.transcription)}</text>')
        parts.append("</svg>")
        path = out_dir / f"overlay_{frame.frame_index:06d}.svg"
        path.write_text("\n".join(parts) + "\n", encoding="utf-8")
        written += 1
    return written


def _cmd_render_overlay(args, cfgmap, seed):
    ann = dataio.read_annotations(args.ann)
    written = render_overlay(ann, args.dims, args.out)
    config = {"dims": list(args.dims), "seed": seed}
    results = {"video_id": ann.video_id, "files_written": written}
    return results, config


def _validate_iou(args):
    if getattr(args, "iou", None) is not None and not 0.0 < args.iou < 1.0:
        raise ValueError(f"--iou must be in (0, 1), got {args.iou}")


COMMANDS = {
    "gen-scene": _cmd_gen_scene,
    "synth-flow": lambda a, c, s: _cmd_synth(a, c, s, "flow"),
    "synth-deform": lambda a, c, s: _cmd_synth(a, c, s, "deformation"),
    "track": _cmd_track,
    "eval-det": lambda a, c, s: _cmd_eval_prf(a, c, s, end_to_end=False),
    "eval-e2e": lambda a, c, s: _cmd_eval_prf(a, c, s, end_to_end=True),
    "eval-track": _cmd_eval_track,
    "match": _cmd_match,
    "render-overlay": _cmd_render_overlay,
}


def main(argv=None) -> int:
    started = time.monotonic()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1

    report = {"command": args.cmd, "config": {}, "results": {}}
    try:
        _validate_iou(args)
        seed = _seed_of(args)
        cfgmap = _load_config(args)
        results, config = COMMANDS[args.cmd](args, cfgmap, seed)
        report["results"] = results
        report["config"] = config
        status = 0
    except USER_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        report["error"] = str(exc)
        status = 1
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {exc}", file=sys.stderr)
        report["error"] = f"internal error: {exc}"
        status = 2
    report["wall_time_s"] = round(time.monotonic() - started, 6)
    report["exit_status"] = status
    print(json.dumps(report, sort_keys=True))
    return status


if __name__ == "__main__":
    sys.exit(main())
