"""On-disk dataset format and track-record CSV I/O.

A dataset directory contains:
  meta            flat key=value header (camera intrinsics, frame count, ...)
  object.obj      tracked object mesh
  poses.txt       one line per frame: tx ty tz qw qx qy qz
  frames/NNNNNN.depth
                  16-bit little-endian millimeters, row-major, 0 = missing
"""

import io
import os

import numpy as np

from .depthmodel import CameraModel, DepthImage, load_obj, save_obj

DEPTH_SCALE = 0.001  # meters per stored unit


def parse_kv(text):
    """Parse flat key=value lines; values coerced to int, then float, else str.

    Blank lines and '#' comments are ignored.
    """
    out = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"expected key=value, got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        for cast in (int, float):
            try:
                out[key] = cast(value)
                break
            except ValueError:
                continue
        else:
            out[key] = value
    return out


def format_kv(mapping):
    return "".join(f"{key}={value}\n" for key, value in mapping.items())


def load_config(path):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_kv(fh.read())


def encode_depth(image):
    """Quantize a depth image to 16-bit millimeters (0 = missing)."""
    depth = np.asarray(image.depth, dtype=float)
    mm = np.where(np.isfinite(depth), np.round(depth / DEPTH_SCALE), 0.0)
    mm = np.clip(mm, 0, np.iinfo(np.uint16).max)
    return mm.astype("<u2")


def decode_depth(buf, width, height):
    mm = np.frombuffer(buf, dtype="<u2").reshape(height, width)
    depth = mm.astype(float) * DEPTH_SCALE
    depth[mm == 0] = np.nan
    return DepthImage(width, height, depth)


def _frame_path(root, index):
    return os.path.join(root, "frames", f"{index:06d}.depth")


def write_dataset(root, camera, mesh, poses_r, poses_q, images, extra_meta=None):
    """Write a full dataset directory; `images` is an iterable of DepthImage."""
    os.makedirs(os.path.join(root, "frames"), exist_ok=True)
    count = 0
    for index, image in enumerate(images):
        with open(_frame_path(root, index), "wb") as fh:
            fh.write(encode_depth(image).tobytes())
        count += 1
    meta = {
        "width": camera.width, "height": camera.height,
        "fx": camera.fx, "fy": camera.fy, "cx": camera.cx, "cy": camera.cy,
        "range_min": camera.range_min, "range_max": camera.range_max,
        "frames": count,
    }
    if extra_meta:
        meta.update(extra_meta)
    with open(os.path.join(root, "meta"), "w", encoding="utf-8") as fh:
        fh.write(format_kv(meta))
    with io.StringIO() as buf:
        for r, q in zip(poses_r, poses_q):
            buf.write(" ".join(repr(float(x)) for x in (*r, *q)) + "\n")
        poses_text = buf.getvalue()
    with open(os.path.join(root, "poses.txt"), "w", encoding="utf-8") as fh:
        fh.write(poses_text)
    save_obj(mesh, os.path.join(root, "object.obj"))


class Dataset:
    """Lazy reader over a dataset directory."""

    def __init__(self, root):
        self.root = root
        self.meta = load_config(os.path.join(root, "meta"))
        self.camera = CameraModel(
            int(self.meta["width"]), int(self.meta["height"]),
            float(self.meta["fx"]), float(self.meta["fy"]),
            float(self.meta["cx"]), float(self.meta["cy"]),
            float(self.meta.get("range_min", 0.5)), float(self.meta.get("range_max", 7.0)))
        self.frames = int(self.meta["frames"])
        poses = np.loadtxt(os.path.join(root, "poses.txt"), ndmin=2)
        if poses.shape != (self.frames, 7):
            raise ValueError(f"poses.txt shape {poses.shape}, expected ({self.frames}, 7)")
        self.poses_r = poses[:, :3]
        self.poses_q = poses[:, 3:]
        self.mesh = load_obj(os.path.join(root, "object.obj"))

    def image(self, index):
        if not 0 <= index < self.frames:
            raise IndexError(index)
        with open(_frame_path(self.root, index), "rb") as fh:
            return decode_depth(fh.read(), self.camera.width, self.camera.height)


# ---------------------------------------------------------------------------
# track-record CSV

RECORD_FIELDS = ("frame", "tx", "ty", "tz", "qw", "qx", "qy", "qz",
                 "gt_tx", "gt_ty", "gt_tz", "gt_qw", "gt_qx", "gt_qy", "gt_qz",
                 "update_ms")


def write_records(path, rows, header_kv):
    """Write track records with a '#' comment line carrying config and seed."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("# " + " ".join(f"{k}={v}" for k, v in header_kv.items()) + "\n")
        fh.write(",".join(RECORD_FIELDS) + "\n")
        for row in rows:
            fh.write(",".join(_format_cell(name, row[name]) for name in RECORD_FIELDS) + "\n")


def _format_cell(name, value):
    if name == "frame":
        return str(int(value))
    return repr(float(value))


def read_records(path):
    """Read back a record CSV; returns (header mapping, list of row dicts)."""
    header = {}
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                for token in line[1:].split():
                    if "=" in token:
                        header.update(parse_kv(token))
                continue
            cells = line.split(",")
            if cells[0] == RECORD_FIELDS[0]:
                if tuple(cells) != RECORD_FIELDS:
                    raise ValueError(f"unexpected CSV columns in {path}")
                continue
            rows.append({name: (int(cell) if name == "frame" else float(cell))
                         for name, cell in zip(RECORD_FIELDS, cells)})
    return header, rows
