"""File formats: 8-bit PNGs, control-point JSON, landmark JSON, WFLD flow dumps.

The JSON parsers are strict — unknown fields and wrong coordinate-space tags
are rejected outright so a file written in pixel units can never be silently
consumed as NDC.
"""

import json
import struct

import numpy as np
from PIL import Image as PILImage, UnidentifiedImageError

from .align import FiveLandmarks
from .errors import FormatError, ImageIOError
from .sampler import validate_image
from .tps import ControlPointSet

POINTS_SCHEMA_VERSION = 1
FLOW_MAGIC = b"WFLD"
FLOW_VERSION = 1


def read_png(path) -> np.ndarray:
    """Read an 8-bit grayscale or RGB PNG into H x W x C floats, v -> v/255."""
    try:
        with PILImage.open(path) as img:
            if img.format != "PNG":
                raise ImageIOError(f"{path}: not a PNG file (format {img.format})")
            if img.mode not in ("L", "RGB"):
                raise ImageIOError(
                    f"{path}: unsupported PNG mode {img.mode!r} (need 8-bit L or RGB)"
                )
            data = np.asarray(img, dtype=np.uint8)
    except UnidentifiedImageError as exc:
        raise ImageIOError(f"{path}: cannot decode image ({exc})") from exc
    except OSError as exc:
        raise ImageIOError(f"{path}: {exc}") from exc
    if data.ndim == 2:
        data = data[:, :, None]
    return data.astype(float) / 255.0


def write_png(image, path) -> None:
    """Write H x W x C floats as an 8-bit PNG; values are scaled by 255,
    rounded half away from zero, and clamped to [0, 255]."""
    arr = validate_image(image)
    channels = arr.shape[2]
    if channels not in (1, 3):
        raise ImageIOError(f"can only write 1- or 3-channel PNGs, got {channels}")
    scaled = arr * 255.0
    rounded = np.where(scaled >= 0, np.floor(scaled + 0.5), np.ceil(scaled - 0.5))
    data = np.clip(rounded, 0, 255).astype(np.uint8)
    pil = PILImage.fromarray(data[:, :, 0] if channels == 1 else data)
    try:
        pil.save(path, format="PNG")
    except OSError as exc:
        raise ImageIOError(f"{path}: {exc}") from exc


def _load_strict_json(path, required_keys) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(payload, dict):
        raise FormatError(f"{path}: top level must be a JSON object")
    keys = set(payload)
    unknown = keys - set(required_keys)
    if unknown:
        raise FormatError(f"{path}: unknown fields {sorted(unknown)}")
    missing = set(required_keys) - keys
    if missing:
        raise FormatError(f"{path}: missing fields {sorted(missing)}")
    return payload


def _check_header(payload, path):
    if payload["version"] != POINTS_SCHEMA_VERSION:
        raise FormatError(f"{path}: unsupported version {payload['version']!r}")
    if payload["coord_space"] != "ndc":
        raise FormatError(
            f"{path}: coord_space must be 'ndc', got {payload['coord_space']!r}"
        )


def _pair_list(value, name, path) -> np.ndarray:
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise FormatError(f"{path}: {name} must be a list of [u, v] pairs") from exc
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise FormatError(f"{path}: {name} must be a list of [u, v] pairs")
    if not np.all(np.isfinite(arr)):
        raise FormatError(f"{path}: {name} must be finite")
    return arr


def points_payload(control: ControlPointSet) -> dict:
    return {
        "version": POINTS_SCHEMA_VERSION,
        "coord_space": "ndc",
        "k": control.k,
        "points": control.points.tolist(),
        "displacements": control.displacements.tolist(),
    }


def save_points(control: ControlPointSet, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(points_payload(control), fh, indent=2)
        fh.write("\n")


def load_points(path) -> ControlPointSet:
    """Strictly parse a control-point file (version, coord_space, k, points,
    displacements; nothing else)."""
    payload = _load_strict_json(
        path, ("version", "coord_space", "k", "points", "displacements")
    )
    _check_header(payload, path)
    points = _pair_list(payload["points"], "points", path)
    displacements = _pair_list(payload["displacements"], "displacements", path)
    if payload["k"] != len(points):
        raise FormatError(f"{path}: k={payload['k']} but {len(points)} points")
    if len(points) != len(displacements):
        raise FormatError(
            f"{path}: {len(points)} points vs {len(displacements)} displacements"
        )
    return ControlPointSet(points, displacements)


def load_projective_params(path) -> np.ndarray:
    """Strictly parse an 8-parameter projective transform file."""
    payload = _load_strict_json(path, ("version", "coord_space", "projective"))
    _check_header(payload, path)
    arr = np.asarray(payload["projective"], dtype=float).reshape(-1)
    if arr.shape != (8,):
        raise FormatError(f"{path}: projective must hold exactly 8 numbers")
    if not np.all(np.isfinite(arr)):
        raise FormatError(f"{path}: projective parameters must be finite")
    return arr


def load_dense_grid(path) -> np.ndarray:
    """Strictly parse a coarse deformation grid file (g_h x g_w x 2 offsets)."""
    payload = _load_strict_json(path, ("version", "coord_space", "grid"))
    _check_header(payload, path)
    try:
        arr = np.asarray(payload["grid"], dtype=float)
    except (TypeError, ValueError) as exc:
        raise FormatError(f"{path}: grid must be a g_h x g_w x 2 nested list") from exc
    if arr.ndim != 3 or arr.shape[2] != 2 or min(arr.shape[:2]) < 2:
        raise FormatError(f"{path}: grid must be g_h x g_w x 2 with g >= 2")
    if not np.all(np.isfinite(arr)):
        raise FormatError(f"{path}: grid must be finite")
    return arr


_LANDMARK_KEYS = ("left_eye", "right_eye", "nose", "mouth_left", "mouth_right")
_CORNER_KEYS = ("left_eye_corners", "right_eye_corners")


def eye_center_from_corners(corner_a, corner_b) -> np.ndarray:
    """Eye center as the average of the two eye corners."""
    a = np.asarray(corner_a, dtype=float)
    b = np.asarray(corner_b, dtype=float)
    if a.shape != (2,) or b.shape != (2,):
        raise FormatError("eye corners must be 2-vectors")
    return (a + b) / 2.0


def load_landmarks(path) -> FiveLandmarks:
    """Parse a five-landmark JSON file (pixel coordinates).

    Either eye may be given as ``*_eye_corners`` (a pair of corner points)
    instead of ``*_eye``; the center is then the corner average.
    """
    allowed = _LANDMARK_KEYS + _CORNER_KEYS
    try:
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(payload, dict):
        raise FormatError(f"{path}: top level must be a JSON object")
    unknown = set(payload) - set(allowed)
    if unknown:
        raise FormatError(f"{path}: unknown fields {sorted(unknown)}")

    values = {}
    for side in ("left", "right"):
        eye_key, corner_key = f"{side}_eye", f"{side}_eye_corners"
        if eye_key in payload and corner_key in payload:
            raise FormatError(f"{path}: give {eye_key} or {corner_key}, not both")
        if eye_key in payload:
            values[eye_key] = np.asarray(payload[eye_key], dtype=float)
        elif corner_key in payload:
            corners = np.asarray(payload[corner_key], dtype=float)
            if corners.shape != (2, 2):
                raise FormatError(f"{path}: {corner_key} must be two [x, y] points")
            values[eye_key] = eye_center_from_corners(corners[0], corners[1])
        else:
            raise FormatError(f"{path}: missing {eye_key} (or {corner_key})")
    for key in ("nose", "mouth_left", "mouth_right"):
        if key not in payload:
            raise FormatError(f"{path}: missing {key}")
        values[key] = np.asarray(payload[key], dtype=float)
    for key, vec in values.items():
        if vec.shape != (2,) or not np.all(np.isfinite(vec)):
            raise FormatError(f"{path}: {key} must be a finite [x, y] pair")
    return FiveLandmarks(**values)


def save_landmarks(landmarks: FiveLandmarks, path) -> None:
    payload = {key: getattr(landmarks, key).tolist() for key in _LANDMARK_KEYS}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def write_flow(flow, path) -> None:
    """Dump an H x W x 2 NDC flow field in the WFLD binary layout:
    magic 'WFLD', then little-endian u32 version, H, W, then row-major
    (u, v) pairs as little-endian float32."""
    arr = np.asarray(flow)
    if arr.ndim != 3 or arr.shape[2] != 2:
        raise FormatError(f"flow must be H x W x 2, got {arr.shape}")
    h, w = arr.shape[:2]
    with open(path, "wb") as fh:
        fh.write(FLOW_MAGIC)
        fh.write(struct.pack("<III", FLOW_VERSION, h, w))
        fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def read_flow(path) -> np.ndarray:
    """Read a WFLD file back into an H x W x 2 float32 array."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 16 or blob[:4] != FLOW_MAGIC:
        raise FormatError(f"{path}: missing WFLD magic")
    version, h, w = struct.unpack("<III", blob[4:16])
    if version != FLOW_VERSION:
        raise FormatError(f"{path}: unsupported WFLD version {version}")
    expected = 16 + h * w * 2 * 4
    if len(blob) != expected:
        raise FormatError(f"{path}: size {len(blob)} != expected {expected}")
    data = np.frombuffer(blob, dtype="<f4", offset=16)
    return data.reshape(h, w, 2).copy()
