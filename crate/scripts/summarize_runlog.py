#!/usr/bin/env python3
"""Recompute run statistics from a run log CSV, standard library only.

Usage: summarize_runlog.py RUNLOG.csv

Prints a JSON object with the same log-derived fields as summary.json.
"""

import bisect
import csv
import json
import math
import sys

SETTLE_TIME = 10.0


def read_log(path):
    with open(path, newline="") as f:
        meta = f.readline().strip()
        fields = dict(kv.split("=", 1) for kv in meta.lstrip("#").split(";"))
        if fields.get("schema") != "1":
            raise SystemExit("unsupported schema")
        plan = [tuple(float(c) for c in p.split(":")) for p in fields["plan"].split()]
        mssps = fields["mssps"].split()
        rows = list(csv.DictReader(f))
    return plan, mssps, rows


def num(s):
    return float(s) if s != "" else None


def seg_dist(p, a, b):
    dx, dy = b[0] - a[0], b[1] - a[1]
    l2 = dx * dx + dy * dy
    s = min(max(((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / l2, 0.0), 1.0)
    return math.hypot(p[0] - a[0] - s * dx, p[1] - a[1] - s * dy)


def cross_track(plan, p):
    return min(seg_dist(p, plan[i], plan[i + 1]) for i in range(len(plan) - 1))


def rms(v):
    return math.sqrt(sum(e * e for e in v) / len(v))


def summarize(plan, mssps, rows):
    t = [float(r["t"]) for r in rows]
    tx = [float(r["true_x"]) for r in rows]
    ty = [float(r["true_y"]) for r in rows]

    def truth_at(tq):
        if not t or tq < t[0] or tq > t[-1]:
            return None
        i = bisect.bisect_right(t, tq)
        if i == len(t):
            return tx[-1], ty[-1]
        s = (tq - t[i - 1]) / (t[i] - t[i - 1])
        return tx[i - 1] + s * (tx[i] - tx[i - 1]), ty[i - 1] + s * (ty[i] - ty[i - 1])

    fixes = [k for k, r in enumerate(rows) if r["fused_x"] != ""]
    first_fix = t[fixes[0]] if fixes else None
    stopped = next((t[k] for k, r in enumerate(rows) if r["phase"] == "stopped"), None)

    ct = []
    if first_fix is not None:
        for k, r in enumerate(rows):
            if t[k] >= first_fix + SETTLE_TIME and r["phase"] != "stopped":
                ct.append(cross_track(plan, (tx[k], ty[k])))

    errors = []
    for m in mssps:
        errs = []
        for r in rows:
            x, y, tc = num(r[m + "_x"]), num(r[m + "_y"]), num(r[m + "_tcap"])
            if x is None:
                continue
            p = truth_at(tc)
            if p is not None:
                errs.append(math.hypot(x - p[0], y - p[1]))
        errors.append({
            "mssp": m,
            "count": len(errs),
            "mean": sum(errs) / len(errs) if errs else 0.0,
            "rms": rms(errs) if errs else 0.0,
            "max": max(errs) if errs else 0.0,
        })

    jumps, excess = [], []
    for k in range(1, len(rows)):
        a, b = rows[k - 1], rows[k]
        if a["fused_x"] != "" and b["fused_x"] != "":
            j = math.hypot(float(b["fused_x"]) - float(a["fused_x"]),
                           float(b["fused_y"]) - float(a["fused_y"]))
            jumps.append(j)
            excess.append(j - float(a["true_v"]) * (t[k] - t[k - 1]))

    overshoot = None
    if len(plan) >= 3:
        p, a, b = plan[-3], plan[-2], plan[-1]
        length = math.hypot(b[0] - a[0], b[1] - a[1])
        ux, uy = (b[0] - a[0]) / length, (b[1] - a[1]) / length
        nx, ny = -uy, ux
        if (p[0] - a[0]) * nx + (p[1] - a[1]) * ny > 0.0:
            nx, ny = -nx, -ny
        for k in range(len(rows)):
            if (tx[k] - a[0]) * ux + (ty[k] - a[1]) * uy >= 0.0:
                o = max((tx[k] - a[0]) * nx + (ty[k] - a[1]) * ny, 0.0)
                overshoot = o if overshoot is None else max(overshoot, o)

    return {
        "rows": len(rows),
        "duration": t[-1] if t else 0.0,
        "first_fix_t": first_fix,
        "stopped_t": stopped,
        "final_x": tx[-1] if rows else 0.0,
        "final_y": ty[-1] if rows else 0.0,
        "cross_track_rms": rms(ct) if ct else None,
        "cross_track_max": max(ct) if ct else None,
        "estimate_errors": errors,
        "overshoot": overshoot,
        "fused_jump_max": max(jumps) if jumps else None,
        "fused_jump_excess_max": max(excess) if excess else None,
    }


def main():
    if len(sys.argv) != 2:
        raise SystemExit(__doc__)
    print(json.dumps(summarize(*read_log(sys.argv[1])), indent=2))


if __name__ == "__main__":
    main()
