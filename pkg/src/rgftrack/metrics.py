"""Pose error metrics and summary statistics for tracking runs."""

from typing import NamedTuple

import numpy as np

from .rotations import quat_angle

# a frame counts as lost when either threshold is exceeded
LOSS_TRANS_M = 0.05
LOSS_ANG_RAD = np.radians(30.0)


class ErrorStats(NamedTuple):
    mean: float
    median: float
    p90: float
    p95: float
    p99: float
    max: float


def translational_error(est_r, gt_r):
    """Euclidean distance per frame; inputs (F, 3)."""
    return np.linalg.norm(np.asarray(est_r) - np.asarray(gt_r), axis=-1)


def angular_error(est_q, gt_q):
    """Geodesic rotation angle per frame, sign-invariant; inputs (F, 4)."""
    est_q = np.asarray(est_q, dtype=float)
    gt_q = np.asarray(gt_q, dtype=float)
    dots = np.abs(np.sum(est_q * gt_q, axis=-1))
    norms = np.linalg.norm(est_q, axis=-1) * np.linalg.norm(gt_q, axis=-1)
    return 2.0 * np.arccos(np.minimum(dots / norms, 1.0))


def error_stats(errors):
    errors = np.asarray(errors, dtype=float)
    if errors.size == 0:
        nan = float("nan")
        return ErrorStats(nan, nan, nan, nan, nan, nan)
    return ErrorStats(
        float(np.mean(errors)),
        float(np.median(errors)),
        float(np.percentile(errors, 90)),
        float(np.percentile(errors, 95)),
        float(np.percentile(errors, 99)),
        float(np.max(errors)),
    )


def count_lost(trans_err, ang_err):
    lost = (np.asarray(trans_err) > LOSS_TRANS_M) | (np.asarray(ang_err) > LOSS_ANG_RAD)
    return int(np.count_nonzero(lost))


def errors_from_rows(rows):
    """Per-frame errors from record rows as read by dataio.read_records."""
    est_r = np.array([[row["tx"], row["ty"], row["tz"]] for row in rows])
    est_q = np.array([[row["qw"], row["qx"], row["qy"], row["qz"]] for row in rows])
    gt_r = np.array([[row["gt_tx"], row["gt_ty"], row["gt_tz"]] for row in rows])
    gt_q = np.array([[row["gt_qw"], row["gt_qx"], row["gt_qy"], row["gt_qz"]] for row in rows])
    return translational_error(est_r, gt_r), angular_error(est_q, gt_q)


def summarize(rows):
    """Summary dict for one tracking run: stats, loss count, timing."""
    trans, ang = errors_from_rows(rows)
    times = np.array([row["update_ms"] for row in rows])
    return {
        "frames": len(rows),
        "trans": error_stats(trans),
        "ang": error_stats(ang),
        "lost_frames": count_lost(trans, ang),
        "update_ms_median": float(np.median(times)) if len(rows) else float("nan"),
    }


def histogram(errors, bins=50):
    """Fixed linear-bin histogram; returns (edges (bins+1,), counts (bins,))."""
    errors = np.asarray(errors, dtype=float)
    hi = float(errors.max()) if errors.size else 1.0
    if hi <= 0.0:
        hi = 1.0
    counts, edges = np.histogram(errors, bins=bins, range=(0.0, hi))
    return edges, counts


def write_summary_table(path, items, comment=""):
    """Write one stats row per (name, summary) pair."""
    with open(path, "w", encoding="utf-8") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        fh.write("run,frames,lost_frames,update_ms_median,"
                 "trans_mean,trans_median,trans_p90,trans_p95,trans_p99,trans_max,"
                 "ang_mean,ang_median,ang_p90,ang_p95,ang_p99,ang_max\n")
        for name, summary in items:
            t, a = summary["trans"], summary["ang"]
            cells = [name, summary["frames"], summary["lost_frames"],
                     repr(summary["update_ms_median"]), *map(repr, t), *map(repr, a)]
            fh.write(",".join(str(c) for c in cells) + "\n")


def write_histogram(path, edges, counts, comment=""):
    with open(path, "w", encoding="utf-8") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        fh.write("bin_lo,bin_hi,count\n")
        for lo, hi, c in zip(edges[:-1], edges[1:], counts):
            fh.write(f"{lo!r},{hi!r},{int(c)}\n")
