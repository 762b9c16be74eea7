"""CSV and JSON emission.

Floats are written with 17 significant digits so values round-trip
exactly, rows are emitted in a fixed order, and every file is written to
a temporary name first and then renamed into place.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .core import AnalyticSegment, DenseSegment, Trajectory
from .metrics import ERROR_FIELDS, StudyResult

__all__ = [
    "fmt",
    "atomic_write_text",
    "trajectory_table",
    "jumps_table",
    "write_trajectory_csv",
    "write_jumps_csv",
    "run_manifest",
    "write_json",
    "write_study",
    "ERRORS_HEADER",
]

ERRORS_HEADER = ("model", "tableau", "h", "err_phase_jumps", "err_jump_times", "err_endpoint",
                 "err_sup_continuous", "mismatches", "n_jumps", "wall_time_s")


def fmt(v) -> str:
    """Deterministic text form of a table cell."""
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, ".17g")
    return str(v)


def atomic_write_text(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def _state_names(prefix: str, d: int, m: int) -> list[str]:
    return ([f"{prefix}y_{i + 1}" for i in range(d)]
            + [f"{prefix}theta_{i + 1}" for i in range(m)])


def trajectory_table(traj: Trajectory) -> tuple[list[str], list[list]]:
    """Grid states of every segment: ``segment_index, t, y..., theta..., w``."""
    header = ["segment_index", "t"] + _state_names("", traj.d, traj.m) + ["w"]
    rows = []
    for n, seg in enumerate(traj.segments):
        if isinstance(seg, DenseSegment):
            for t, u in zip(seg.t_grid, seg.u_grid):
                x, w = seg.split_u(u)
                rows.append([n, float(t), *x.y, *x.theta, w])
        elif isinstance(seg, AnalyticSegment):
            t_end = min(seg.t_end, traj.horizon) if seg.t_start < traj.horizon else seg.t_end
            for t in (seg.t_start, t_end):
                x = seg.state_at(t)
                rows.append([n, t, *x.y, *x.theta, seg.w_at(t)])
        else:  # pragma: no cover
            raise TypeError(f"unknown segment type {type(seg).__name__}")
    return header, rows


def jumps_table(traj: Trajectory) -> tuple[list[str], list[list]]:
    header = (["n", "t_n"] + _state_names("pre_", traj.d, traj.m)
              + _state_names("post_", traj.d, traj.m) + ["height_index"])
    rows = []
    for n in range(1, traj.n_jumps + 1):
        pre, post = traj.pre_jump_states[n - 1], traj.post_jump_states[n]
        rows.append([n, float(traj.jump_times[n]), *pre.y, *pre.theta, *post.y, *post.theta,
                     int(traj.height_indices[n - 1])])
    return header, rows


def write_trajectory_csv(path, traj: Trajectory) -> Path:
    return atomic_write_text(path, _csv_text(*trajectory_table(traj)))


def write_jumps_csv(path, traj: Trajectory) -> Path:
    return atomic_write_text(path, _csv_text(*jumps_table(traj)))


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    return v


def write_json(path, obj) -> Path:
    text = json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"
    return atomic_write_text(path, text)


def run_manifest(model_id: str, traj: Trajectory, method: str, h: float, seed: int) -> dict:
    return {
        "model": model_id,
        "tableau": method,
        "h": h,
        "T": traj.horizon,
        "seed": seed,
        "draws_consumed": traj.draws_consumed,
        "n_jumps": traj.n_jumps_in_horizon,
        "n_jumps_recorded": traj.n_jumps,
    }


def _study_rows(result: StudyResult, record_wall_time: bool) -> list[list]:
    rows = []
    for r in result.rows:
        rows.append([r.model, r.tableau, r.h, r.err_phase_jumps, r.err_jump_times, r.err_endpoint,
                     r.err_sup_continuous, r.mismatches, r.n_jumps,
                     r.wall_time_s if record_wall_time else None])
    return rows


def _guide_lines(result: StudyResult, field: str) -> tuple[list[str], list[list]]:
    """Lines ``C_p h^p`` (p = 1..4) placed just beneath every finite error."""
    pts = [(r.h, getattr(r, field)) for r in result.rows
           if math.isfinite(getattr(r, field)) and getattr(r, field) > 0]
    hs = sorted({r.h for r in result.rows}, reverse=True)
    header = ["h"] + [f"slope_{p}" for p in range(1, 5)]
    if not pts:
        return header, [[h, None, None, None, None] for h in hs]
    consts = [0.5 * min(e / h**p for h, e in pts) for p in range(1, 5)]
    return header, [[h] + [c * h**p for p, c in zip(range(1, 5), consts)] for h in hs]


def _loglog_text(result: StudyResult, field: str) -> str:
    # one gnuplot data block per method, separated by two blank lines
    blocks = []
    for method in dict.fromkeys(r.tableau for r in result.rows):
        lines = [f"# {method}", "# h " + field]
        for r in result.rows_for(method):
            lines.append(f"{fmt(r.h)} {fmt(getattr(r, field))}")
        blocks.append("\n".join(lines))
    return "\n\n\n".join(blocks) + "\n"


def write_study(out_dir, result: StudyResult, *, record_wall_time: bool = False) -> list[Path]:
    """Error table, slopes, and plot data of a convergence study."""
    out = Path(out_dir)
    written = [atomic_write_text(out / "errors.csv",
                                 _csv_text(ERRORS_HEADER, _study_rows(result, record_wall_time)))]
    slopes = {
        "model": result.model,
        "seed": result.seed,
        "T": result.horizon,
        "reference": result.reference.describe(),
        "reference_jumps": result.reference_jumps,
        "floors": result.floors,
        "h_star": result.h_star,
        "slopes": result.slopes,
        "notes": result.slope_notes,
    }
    written.append(write_json(out / "slopes.json", slopes))
    for field in ERROR_FIELDS:
        written.append(atomic_write_text(out / f"loglog_{field}.dat", _loglog_text(result, field)))
        written.append(atomic_write_text(out / f"guides_{field}.csv",
                                         _csv_text(*_guide_lines(result, field))))
    return written
