"""FeatureSet persistence: the binary VMFS format and a JSON debug format.

VMFS layout, little-endian: the magic ``VMFS``, a u16 format version, a u32
record count, then per keypoint x, y, scale and orientation followed by the
128 descriptor components, all float32. The source id is not stored; readers
take it from the file name.
"""

import json
import math
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from veinmatch.errors import FeatureFormatError
from veinmatch.models.features import DESCRIPTOR_LENGTH, FeatureSet, Keypoint

MAGIC = b"VMFS"
FORMAT_VERSION = 1
JSON_FORMAT = "vmfs-json"

HEADER_DTYPE = np.dtype([("magic", "S4"), ("version", "<u2"), ("count", "<u4")])
RECORD_DTYPE = np.dtype(
    [
        ("x", "<f4"),
        ("y", "<f4"),
        ("scale", "<f4"),
        ("orientation", "<f4"),
        ("descriptor", "<f4", (DESCRIPTOR_LENGTH,)),
    ]
)


def _wrap_orientation(angle: float) -> float:
    # float32 rounding can push values at the ends of [-pi, pi) outside it
    if angle >= math.pi:
        return angle - 2.0 * math.pi
    if angle < -math.pi:
        return angle + 2.0 * math.pi
    return angle


def encode_features(features: FeatureSet) -> bytes:
    header = np.zeros(1, dtype=HEADER_DTYPE)
    header["magic"] = MAGIC
    header["version"] = FORMAT_VERSION
    header["count"] = len(features)

    records = np.zeros(len(features), dtype=RECORD_DTYPE)
    if len(features):
        records["x"] = [kp.x for kp in features.keypoints]
        records["y"] = [kp.y for kp in features.keypoints]
        records["scale"] = [kp.scale for kp in features.keypoints]
        records["orientation"] = [kp.orientation for kp in features.keypoints]
        records["descriptor"] = features.descriptors
    return header.tobytes() + records.tobytes()


def decode_features(payload: bytes, source_id: str) -> FeatureSet:
    if len(payload) < HEADER_DTYPE.itemsize:
        raise FeatureFormatError(f"{source_id}: truncated header ({len(payload)} bytes)")
    header = np.frombuffer(payload, dtype=HEADER_DTYPE, count=1)[0]
    if bytes(header["magic"]) != MAGIC:
        raise FeatureFormatError(f"{source_id}: bad magic {bytes(header['magic'])!r}")
    if int(header["version"]) != FORMAT_VERSION:
        raise FeatureFormatError(f"{source_id}: unsupported format version {int(header['version'])}")

    count = int(header["count"])
    expected = HEADER_DTYPE.itemsize + count * RECORD_DTYPE.itemsize
    if len(payload) != expected:
        raise FeatureFormatError(f"{source_id}: expected {expected} bytes for {count} keypoints, got {len(payload)}")

    records = np.frombuffer(payload, dtype=RECORD_DTYPE, count=count, offset=HEADER_DTYPE.itemsize)
    try:
        keypoints = [
            Keypoint(
                x=float(record["x"]),
                y=float(record["y"]),
                scale=float(record["scale"]),
                orientation=_wrap_orientation(float(record["orientation"])),
            )
            for record in records
        ]
        descriptors = records["descriptor"].astype(np.float64) if count else np.zeros((0, DESCRIPTOR_LENGTH))
        return FeatureSet(source_id=source_id, keypoints=keypoints, descriptors=descriptors)
    except ValidationError as exc:
        raise FeatureFormatError(f"{source_id}: invalid keypoint record: {exc.errors()[0]['msg']}") from exc


def write_features(path: Path, features: FeatureSet) -> None:
    """Write VMFS, or the JSON debug format when ``path`` ends in ``.json``."""
    path.parent.mkdir(parents=True, exist_ok=True)
    if path.suffix.lower() == ".json":
        document = {"format": JSON_FORMAT, "version": FORMAT_VERSION, **features.to_record()}
        path.write_text(json.dumps(document, indent=2) + "\n", encoding="utf-8")
    else:
        path.write_bytes(encode_features(features))


def read_features(path: Path, source_id: str | None = None) -> FeatureSet:
    if not path.is_file():
        raise FeatureFormatError(f"feature file not found: {path}")
    source_id = source_id or path.stem
    if path.suffix.lower() != ".json":
        return decode_features(path.read_bytes(), source_id)

    try:
        document = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FeatureFormatError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(document, dict) or document.get("format") != JSON_FORMAT:
        raise FeatureFormatError(f"{path}: not a {JSON_FORMAT} document")
    if document.get("version") != FORMAT_VERSION:
        raise FeatureFormatError(f"{path}: unsupported format version {document.get('version')}")
    try:
        return FeatureSet.from_record(document)
    except (KeyError, ValueError, ValidationError) as exc:
        raise FeatureFormatError(f"{path}: invalid feature record: {exc}") from exc
