"""Readers and writers for every on-disk format: JSONL annotations,
Middlebury-layout flow/deformation grids, binary PGM masks, lexicons, and
key=value config files.

File naming contract under a video directory:
    <video>/<frame:06d>.fwd.flo   forward flow k -> k+1
    <video>/<frame:06d>.bwd.flo   backward flow k -> k-1
    <video>/<frame:06d>.def.flo   canonical -> frame displacement
    <video>/mask/<frame:06d>.pgm  segmentation / occlusion mask
    <video>/annotations.jsonl     one frame record per line
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

import numpy as np

from vtforge.geometry import FlowField, GeometryError, Polygon

FLO_MAGIC = 202021.25


class FormatError(ValueError):
    """Structured I/O failure naming file, position, and cause."""

    def __init__(self, path, cause, line=None, offset=None):
        self.path = str(path)
        self.cause = cause
        self.line = line
        self.offset = offset
        where = self.path
        if line is not None:
            where += f":{line}"
        if offset is not None:
            where += f" (byte {offset})"
        super().__init__(f"{where}: {cause}")


@dataclass
class CharBox:
    polygon: Polygon
    label: str


@dataclass
class TextInstance:
    """One text object: quad/polygon geometry, transcription, identity."""

    id: int
    polygon: Polygon
    transcription: str
    ignore: bool = False
    chars: Optional[List[CharBox]] = None

    def __post_init__(self):
        if self.id <= 0:
            raise ValueError(f"instance id must be positive, got {self.id}")


@dataclass
class FrameRecord:
    frame_index: int
    instances: List[TextInstance] = field(default_factory=list)


@dataclass
class VideoAnnotation:
    """Per-frame sets of text instances with persistent ids."""

    video_id: str
    frames: List[FrameRecord] = field(default_factory=list)

    def __post_init__(self):
        indices = [f.frame_index for f in self.frames]
        if any(b <= a for a, b in zip(indices, indices[1:])):
            raise ValueError("frame_index must be strictly increasing")

    def frame_map(self):
        return {f.frame_index: f for f in self.frames}


def _round6(v: float) -> float:
    return float(format(float(v), ".6g"))


def _poly_to_json(p: Polygon):
    return [[_round6(v.x), _round6(v.y)] for v in p.vertices]


_FRAME_KEYS = {"video_id", "frame_index", "instances"}
_INSTANCE_KEYS = {"id", "polygon", "transcription", "ignore", "chars"}
_CHAR_KEYS = {"polygon", "label"}


def write_annotations(path, ann: VideoAnnotation) -> None:
    """Write one frame record per line (JSON Lines, UTF-8)."""
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        for frame in ann.frames:
            instances = []
            for inst in frame.instances:
                rec = {
                    "id": inst.id,
                    "polygon": _poly_to_json(inst.polygon),
                    "transcription": inst.transcription,
                    "ignore": bool(inst.ignore),
                }
                if inst.chars is not None:
                    rec["chars"] = [
                        {"polygon": _poly_to_json(c.polygon), "label": c.label}
                        for c in inst.chars
                    ]
                instances.append(rec)
            line = {
                "video_id": ann.video_id,
                "frame_index": frame.frame_index,
                "instances": instances,
            }
            fh.write(json.dumps(line, ensure_ascii=False) + "\n")


def _parse_instance(obj, path, lineno) -> TextInstance:
    if not isinstance(obj, dict):
        raise FormatError(path, "instance is not an object", line=lineno)
    unknown = set(obj) - _INSTANCE_KEYS
    if unknown:
        raise FormatError(path, f"unknown instance keys {sorted(unknown)}", line=lineno)
    for key in ("id", "polygon", "transcription"):
        if key not in obj:
            raise FormatError(path, f"instance missing key {key!r}", line=lineno)
    try:
        polygon = Polygon(obj["polygon"])
    except (GeometryError, TypeError, IndexError) as exc:
        raise FormatError(path, f"bad polygon: {exc}", line=lineno) from exc
    chars = None
    if obj.get("chars") is not None:
        if not isinstance(obj["chars"], list):
            raise FormatError(path, "chars is not a list", line=lineno)
        chars = []
        for c in obj["chars"]:
            if not isinstance(c, dict) or set(c) - _CHAR_KEYS or "polygon" not in c \
                    or "label" not in c:
                raise FormatError(path, "malformed chars entry", line=lineno)
            try:
                chars.append(CharBox(Polygon(c["polygon"]), str(c["label"])))
            except (GeometryError, TypeError, IndexError) as exc:
                raise FormatError(path, f"bad char polygon: {exc}", line=lineno) from exc
    try:
        return TextInstance(
            id=int(obj["id"]),
            polygon=polygon,
            transcription=str(obj["transcription"]),
            ignore=bool(obj.get("ignore", False)),
            chars=chars,
        )
    except (ValueError, TypeError) as exc:
        raise FormatError(path, f"bad instance: {exc}", line=lineno) from exc


def read_annotations(path) -> VideoAnnotation:
    """Read a JSONL annotation file; instances are sorted by id per frame."""
    path = Path(path)
    frames = {}
    video_id = None
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise FormatError(path, f"cannot read: {exc}") from exc
    for lineno, raw_line in enumerate(raw.splitlines(), start=1):
        if not raw_line.strip():
            continue
        try:
            text = raw_line.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FormatError(path, f"not UTF-8: {exc}", line=lineno) from exc
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise FormatError(path, f"malformed JSON: {exc.msg}", line=lineno) from exc
        if not isinstance(obj, dict):
            raise FormatError(path, "line is not a JSON object", line=lineno)
        unknown = set(obj) - _FRAME_KEYS
        if unknown:
            raise FormatError(path, f"unknown frame keys {sorted(unknown)}", line=lineno)
        for key in _FRAME_KEYS:
            if key not in obj:
                raise FormatError(path, f"frame missing key {key!r}", line=lineno)
        if video_id is None:
            video_id = str(obj["video_id"])
        elif str(obj["video_id"]) != video_id:
            raise FormatError(path, f"mixed video ids {video_id!r} and "
                              f"{obj['video_id']!r}", line=lineno)
        try:
            idx = int(obj["frame_index"])
        except (TypeError, ValueError) as exc:
            raise FormatError(path, "frame_index is not an integer", line=lineno) from exc
        if idx in frames:
            raise FormatError(path, f"duplicate frame_index {idx}", line=lineno)
        if not isinstance(obj["instances"], list):
            raise FormatError(path, "instances is not a list", line=lineno)
        instances = [_parse_instance(o, path, lineno) for o in obj["instances"]]
        ids = [inst.id for inst in instances]
        if len(set(ids)) != len(ids):
            raise FormatError(path, f"duplicate instance id within frame {idx}",
                              line=lineno)
        instances.sort(key=lambda inst: inst.id)
        frames[idx] = FrameRecord(frame_index=idx, instances=instances)
    ordered = [frames[k] for k in sorted(frames)]
    return VideoAnnotation(video_id=video_id or "", frames=ordered)


def write_flow(path, flow: FlowField) -> None:
    """Write a displacement grid in the .flo layout (little-endian)."""
    path = Path(path)
    data = np.stack([flow.u, flow.v], axis=-1).astype("<f4")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<f", FLO_MAGIC))
        fh.write(struct.pack("<ii", flow.width, flow.height))
        fh.write(data.tobytes())


def read_flow(path) -> FlowField:
    """Read a .flo displacement grid; bit-exact with write_flow."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise FormatError(path, f"cannot read: {exc}") from exc
    if len(raw) < 12:
        raise FormatError(path, "file shorter than the 12-byte header", offset=len(raw))
    magic = struct.unpack_from("<f", raw, 0)[0]
    if magic != FLO_MAGIC:
        raise FormatError(path, f"bad magic {magic!r}, expected {FLO_MAGIC}", offset=0)
    width, height = struct.unpack_from("<ii", raw, 4)
    if width <= 0 or height <= 0:
        raise FormatError(path, f"non-positive dimensions {width}x{height}", offset=4)
    expected = 12 + 8 * width * height
    if len(raw) != expected:
        raise FormatError(path, f"payload is {len(raw) - 12} bytes, expected "
                          f"{expected - 12}", offset=12)
    data = np.frombuffer(raw, dtype="<f4", offset=12).reshape(height, width, 2)
    try:
        return FlowField(data[:, :, 0], data[:, :, 1])
    except GeometryError as exc:
        raise FormatError(path, f"invalid flow values: {exc}") from exc


def _pgm_tokens(raw: bytes, path):
    """Header tokens of a PGM file, skipping comments; returns (tokens, offset)."""
    tokens = []
    pos = 0
    while len(tokens) < 4 and pos < len(raw):
        ch = raw[pos:pos + 1]
        if ch == b"#":
            while pos < len(raw) and raw[pos:pos + 1] not in (b"\n", b""):
                pos += 1
        elif ch.isspace():
            pos += 1
        else:
            start = pos
            while pos < len(raw) and not raw[pos:pos + 1].isspace() \
                    and raw[pos:pos + 1] != b"#":
                pos += 1
            tokens.append(raw[start:pos])
    if len(tokens) < 4:
        raise FormatError(path, "truncated PGM header", offset=pos)
    # exactly one whitespace byte separates maxval from the payload
    if pos >= len(raw) or not raw[pos:pos + 1].isspace():
        raise FormatError(path, "missing whitespace after maxval", offset=pos)
    return tokens, pos + 1


def read_mask(path) -> np.ndarray:
    """Read a binary (P5) PGM into a (h, w) uint8 label grid."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise FormatError(path, f"cannot read: {exc}") from exc
    if raw[:2] == b"P2":
        raise FormatError(path, "ASCII (P2) PGM unsupported, need binary P5", offset=0)
    if raw[:2] != b"P5":
        raise FormatError(path, f"not a PGM file (magic {raw[:2]!r})", offset=0)
    tokens, data_off = _pgm_tokens(raw, path)
    try:
        width, height, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    except ValueError as exc:
        raise FormatError(path, f"bad header numbers: {exc}", offset=2) from exc
    if width <= 0 or height <= 0:
        raise FormatError(path, f"non-positive dimensions {width}x{height}", offset=2)
    if maxval > 255 or maxval <= 0:
        raise FormatError(path, f"maxval {maxval} outside 1..255", offset=2)
    payload = raw[data_off:]
    if len(payload) != width * height:
        raise FormatError(path, f"payload is {len(payload)} bytes, expected "
                          f"{width * height}", offset=data_off)
    return np.frombuffer(payload, dtype=np.uint8).reshape(height, width).copy()


def write_mask(path, grid: np.ndarray) -> None:
    """Write a (h, w) uint8 grid as binary PGM."""
    grid = np.asarray(grid)
    if grid.ndim != 2:
        raise ValueError("mask grid must be 2D")
    if grid.dtype != np.uint8:
        if grid.min() < 0 or grid.max() > 255:
            raise ValueError("mask values outside 0..255")
        grid = grid.astype(np.uint8)
    h, w = grid.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(grid.tobytes())


def read_lexicon(path) -> List[str]:
    """Newline-separated word list; blank lines dropped."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise FormatError(path, f"cannot read: {exc}") from exc
    except UnicodeDecodeError as exc:
        raise FormatError(path, f"not UTF-8: {exc}") from exc
    words = [line.strip() for line in text.splitlines()]
    words = [w for w in words if w]
    if not words:
        raise FormatError(path, "empty lexicon")
    return words


def _parse_bool(value: str) -> bool:
    low = value.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {value!r}")


CONFIG_REGISTRY = {
    "ransac.iterations": int,
    "ransac.inlier_threshold": float,
    "ransac.min_inlier_fraction": float,
    "ransac.seed": int,
    "ransac.confidence": float,
    "placement.density_target": float,
    "placement.mean_word_length_target": float,
    "placement.font_height_min": float,
    "placement.font_height_max": float,
    "placement.min_region_area": float,
    "placement.lexicon": str,
    "propagation.seed_frame": int,
    "propagation.samples_per_edge": int,
    "propagation.max_oob_fraction": float,
    "propagation.max_restore_error": float,
    "assoc.iou_gate": float,
    "assoc.text_weight": float,
    "assoc.cost_threshold": float,
    "assoc.patience": int,
    "eval.iou_threshold": float,
    "eval.overlap_kind": str,
    "eval.case_sensitive": _parse_bool,
    "eval.ignore_token": str,
}


def read_config(path) -> dict:
    """Parse `key = value` lines against the published key registry."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise FormatError(path, f"cannot read: {exc}") from exc
    except UnicodeDecodeError as exc:
        raise FormatError(path, f"not UTF-8: {exc}") from exc
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise FormatError(path, f"expected `key = value`, got {stripped!r}",
                              line=lineno)
        key, _, value = stripped.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in CONFIG_REGISTRY:
            raise FormatError(path, f"unknown config key {key!r}", line=lineno)
        try:
            out[key] = CONFIG_REGISTRY[key](value)
        except ValueError as exc:
            raise FormatError(path, f"bad value for {key!r}: {exc}", line=lineno) from exc
    return out


def fwd_flow_path(root, frame: int) -> Path:
    return Path(root) / f"{frame:06d}.fwd.flo"


def bwd_flow_path(root, frame: int) -> Path:
    return Path(root) / f"{frame:06d}.bwd.flo"


def def_flow_path(root, frame: int) -> Path:
    return Path(root) / f"{frame:06d}.def.flo"


def mask_path(root, frame: int) -> Path:
    return Path(root) / "mask" / f"{frame:06d}.pgm"


def annotations_path(root) -> Path:
    return Path(root) / "annotations.jsonl"
