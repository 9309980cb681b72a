"""Plain-text file formats.

Every file starts with ``#`` comment lines carrying ``key=value`` metadata,
always including ``schema=1`` and ``kind=...``.  Tables are tab separated
with a single header row; floats are written in their shortest round-trip form, so a file read
back reproduces the in-memory values exactly.
"""
from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .bib_core import InferenceParams, ParameterError
from .imitation_game import GameConfig, GameTrace, agent_index
from .levy_fit import FitReport, survival_table

SCHEMA = 1


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        return repr(x)
    return str(x)


def header_lines(kind: str, meta: dict | None = None) -> list[str]:
    lines = [f"# schema={SCHEMA}", f"# kind={kind}"]
    for k, v in (meta or {}).items():
        lines.append(f"# {k}={fmt(v)}")
    return lines


def write_table(path, kind: str, columns, rows, meta: dict | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    out = header_lines(kind, meta)
    out.append("\t".join(columns))
    out.extend("\t".join(fmt(v) for v in row) for row in rows)
    path.write_text("\n".join(out) + "\n")
    return path


def read_table(path):
    """Return ``(meta, columns, rows)`` with cells left as strings."""
    meta, columns, rows = {}, None, []
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if "=" in body:
                k, v = body.split("=", 1)
                meta[k.strip()] = v.strip()
            continue
        cells = line.split("\t")
        if columns is None:
            columns = cells
        else:
            rows.append(cells)
    if meta.get("schema") != str(SCHEMA):
        raise ParameterError(f"{path}: unsupported or missing schema (expected schema={SCHEMA})")
    return meta, columns or [], rows


def params_meta(params: InferenceParams) -> dict:
    return {"beta": params.beta, "gamma": params.gamma, "epsilon": params.epsilon,
            "num_hypotheses": params.num_hypotheses, "variance": params.variance, "delta": params.delta}


def params_from_meta(meta: dict) -> InferenceParams:
    return InferenceParams(beta=float(meta["beta"]), gamma=float(meta["gamma"]),
                           epsilon=float(meta["epsilon"]), num_hypotheses=int(meta["num_hypotheses"]),
                           variance=float(meta["variance"]), delta=float(meta["delta"]))


# ---- traces --------------------------------------------------------------- #
def write_trace(path, trace: GameTrace) -> Path:
    cfg = trace.config
    K = trace.means.shape[-1]
    meta = {}
    if cfg is not None:
        meta.update(params_meta(cfg.params))
        meta.update({"total_steps": cfg.total_steps,
                     "window": f"{cfg.analysis_window[0]}:{cfg.analysis_window[1]}",
                     "seed": cfg.seed})
    columns = ["step", "agent", "h_max", "confidence", "presented_datum"] + [f"mean_{k}" for k in range(K)]
    rows = []
    for i in range(len(trace)):
        for a in (0, 1):
            rows.append([i + 1, a + 1, trace.h_max[a, i], trace.confidence[a, i], trace.presented[a, i],
                         *trace.means[a, i]])
    return write_table(path, "trace", columns, rows, meta)


def read_trace(path) -> GameTrace:
    """Load a trace file.  Full confidence vectors are not stored and come back as NaN."""
    meta, columns, rows = read_table(path)
    if meta.get("kind") != "trace":
        raise ParameterError(f"{path} is not a trace file")
    K = sum(c.startswith("mean_") for c in columns)
    T = len(rows) // 2
    h = np.empty((2, T), dtype=np.int64)
    conf = np.empty((2, T))
    pres = np.empty((2, T))
    means = np.empty((2, T, K))
    for r in rows:
        t, a = int(r[0]) - 1, int(r[1]) - 1
        h[a, t] = int(r[2])
        conf[a, t] = float(r[3])
        pres[a, t] = float(r[4])
        means[a, t] = [float(x) for x in r[5:5 + K]]
    config = None
    if "beta" in meta:
        lo, hi = (int(x) for x in meta["window"].split(":"))
        config = GameConfig(params_from_meta(meta), int(meta["total_steps"]), (lo, hi), int(meta["seed"]))
    return GameTrace(h, conf, pres, pres[::-1].copy(), means, np.full((2, T, K), np.nan), config)


# ---- walks and segments ---------------------------------------------------- #
def write_trajectory(path, traj, meta=None) -> Path:
    rows = [[0, 0.0, 0.0, math.nan]]
    rows += [[t + 1, x, y, th] for t, ((x, y), th) in enumerate(zip(traj.points[1:], traj.headings))]
    return write_table(path, "trajectory", ["t", "x", "y", "theta"], rows, meta)


def write_segments(path, lengths, meta=None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    out = header_lines("segments", meta)
    out.extend(str(int(l)) for l in lengths)
    path.write_text("\n".join(out) + "\n")
    return path


def read_segments(path) -> np.ndarray:
    """Integers one per line; ``#`` lines are ignored."""
    vals = []
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        try:
            vals.append(int(s))
        except ValueError:
            raise ParameterError(f"{path}:{n}: not an integer: {s!r}") from None
    return np.asarray(vals, dtype=np.int64)


# ---- fit reports ------------------------------------------------------------ #
def report_items(report: FitReport) -> list[tuple[str, object]]:
    items = [("n_total", report.n_total), ("verdict", report.verdict), ("levy", report.levy)]
    sel = report.selection
    if sel is not None:
        items += [("decided_by", sel.decided_by),
                  ("w_tp", sel.w_tp), ("w_ep", sel.w_ep),
                  ("delta_tp", sel.delta_tp), ("delta_ep", sel.delta_ep),
                  ("d_adj_tp", sel.d_adj_tp), ("d_adj_ep", sel.d_adj_ep)]
        for name in ("eta_hat", "l_min", "l_max", "log_lik", "ks", "n"):
            items.append((f"tp.{name}", getattr(sel.tp, name)))
        for name in ("lambda_hat", "l_min", "log_lik", "ks", "m"):
            items.append((f"ep.{name}", getattr(sel.ep, name)))
        for prefix, cmp in (("tp_range", sel.on_tp_range), ("ep_range", sel.on_ep_range)):
            for name in ("l_min", "l_max", "eta_hat", "lambda_hat", "log_lik_tp", "log_lik_ep",
                         "delta_tp", "delta_ep", "w_tp", "w_ep"):
                items.append((f"{prefix}.{name}", getattr(cmp, name)))
    for w in report.warnings:
        items.append(("warning", w))
    if report.error:
        items.append(("error", report.error))
    return items


def write_fit_report(path, report: FitReport, lengths, meta: dict | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    out = [f"schema={SCHEMA}", "kind=fit_report"]
    out += [f"{k}={fmt(v)}" for k, v in (meta or {}).items()]
    out += [f"{k}={fmt(v)}" for k, v in report_items(report)]
    out.append("")
    out.append("[survival]")
    out.append("\t".join(["l", "empirical", "tp_model", "ep_model"]))
    for row in survival_table(lengths, report.selection):
        out.append("\t".join(fmt(v) for v in row))
    path.write_text("\n".join(out) + "\n")
    return path


def read_fit_report(path):
    """Return ``(fields, survival_rows)``; repeated keys (warnings) collect into lists."""
    fields, table = {}, []
    in_table = False
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        if line.strip() == "[survival]":
            in_table = True
            continue
        if in_table:
            if line.startswith("l\t"):
                continue
            table.append(tuple(float(x) for x in line.split("\t")))
            continue
        k, v = line.split("=", 1)
        if k in fields:
            prev = fields[k]
            fields[k] = (prev if isinstance(prev, list) else [prev]) + [v]
        else:
            fields[k] = v
    return fields, table


def agent_label(agent) -> str:
    return f"agent{agent_index(agent) + 1}"
