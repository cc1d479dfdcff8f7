"""CSV tables for churn series, per-request series and Che sweeps.

Numbers are written with 9 significant digits and ``None`` as an empty
field, so a file read back with :func:`read_csv` re-emits byte-identically.
"""
from __future__ import annotations

import csv
import io
import math

import numpy as np


def churn_header(M):
    return (["event_index", "policy", "seed", "requests", "hits", "chr_window", "chr_cumulative"]
            + [f"n_{i}" for i in range(1, M + 1)] + ["capped"])


PER_REQUEST_HEADER = ["slot", "seed", "requests", "hits", "chr"]
SWEEP_HEADER = ["alpha", "c_ratio", "c_items", "tau_seconds", "r", "chr", "error"]


def fmt(value):
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        if math.isnan(value):
            return "nan"
        return format(float(value), ".9g")
    return str(value)


def _parse(text):
    if text == "":
        return None
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    return text


def render_csv(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(x) for x in row])
    return buf.getvalue()


def emit_csv(header, rows, path):
    """Write ``header`` and ``rows`` to ``path``; I/O errors name the path."""
    text = render_csv(header, rows)
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path


def read_csv(path):
    """``(header, rows)`` with numeric fields converted back to numbers."""
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[_parse(x) for x in row] for row in reader]
    return header, rows


def churn_rows(series):
    for r in series.rows:
        yield ([r.event_index, series.policy, series.seed, r.requests, r.hits,
                r.chr_window, r.chr_cumulative] + list(r.per_ap_n) + [r.capped])


def per_request_rows(series):
    for r in series.rows:
        yield [r.slot, series.seed, r.requests, r.hits, r.chr]


def sweep_rows(rows):
    for r in rows:
        yield [r.alpha, r.c_ratio, r.c_items, r.tau_seconds, r.r, r.chr, r.error]


def _mean_std(values):
    x = np.array([v for v in values if v is not None], dtype=float)
    if x.size == 0:
        return None, None
    std = float(np.std(x, ddof=1)) if x.size > 1 else 0.0
    return float(np.mean(x)), std


CHURN_AGGREGATE_HEADER = ["event_index", "policy", "seeds", "chr_window_mean", "chr_window_std",
                          "chr_cumulative_mean", "chr_cumulative_std"]
PER_REQUEST_AGGREGATE_HEADER = ["slot", "policy", "seeds", "chr_mean", "chr_std"]


def aggregate_churn(series_list):
    """Mean and sample std across seeds per (policy, event index)."""
    out = []
    by_policy = {}
    for s in series_list:
        by_policy.setdefault(s.policy, []).append(s)
    for policy, group in by_policy.items():
        for i in range(len(group[0].rows)):
            rows = [s.rows[i] for s in group]
            wm, ws = _mean_std([r.chr_window for r in rows])
            cm, cs = _mean_std([r.chr_cumulative for r in rows])
            out.append([rows[0].event_index, policy, len(group), wm, ws, cm, cs])
    return out


def aggregate_per_request(series_list):
    out = []
    by_policy = {}
    for s in series_list:
        by_policy.setdefault(s.policy, []).append(s)
    for policy, group in by_policy.items():
        for i in range(len(group[0].rows)):
            m, sd = _mean_std([s.rows[i].chr for s in group])
            out.append([group[0].rows[i].slot, policy, len(group), m, sd])
    return out
