"""Brute-force reference implementations used only by the tests.

They share no code with the library beyond the plain ``iou`` definition and
trade speed for obviousness.
"""

from __future__ import annotations

from groundline.core import TimeSegment, iou


def threshold_oracle(row, n_bins, k):
    values = [float(x) for x in row]
    lo, hi = min(values), max(values)
    if lo == hi:
        return lo
    kth = sorted(values, reverse=True)[min(k, len(values)) - 1]
    step = (hi - lo) / n_bins
    edges = [lo + i * step for i in range(n_bins)] + [hi]
    for b in range(n_bins):
        left, right = edges[b], edges[b + 1]
        last = b == n_bins - 1
        if left <= kth < right or (last and left <= kth <= right):
            return left
    raise AssertionError("value fell outside every bin")


def scan_state_machine(row, theta, gap_lambda):
    """Literal left-to-right scan; returns (first, last) frame pairs."""
    out = []
    opened = last_relevant = None
    gap = 0
    for j, x in enumerate(row):
        if x >= theta:
            if opened is None:
                opened = j
            last_relevant = j
            gap = 0
        elif opened is not None:
            gap += 1
            if gap > gap_lambda:
                out.append((opened, last_relevant))
                opened = None
    if opened is not None:
        out.append((opened, last_relevant))
    return out


def scan_run_merge(row, theta, gap_lambda):
    """Enumerate maximal relevant runs, then merge neighbours separated by <= gap_lambda frames."""
    runs = []
    j, n = 0, len(row)
    while j < n:
        if row[j] >= theta:
            k = j
            while k + 1 < n and row[k + 1] >= theta:
                k += 1
            runs.append([j, k])
            j = k + 1
        else:
            j += 1
    merged = []
    for run in runs:
        if merged and run[0] - merged[-1][1] - 1 <= gap_lambda:
            merged[-1][1] = run[1]
        else:
            merged.append(run)
    return [tuple(r) for r in merged]


def nms_oracle(items, mu):
    """``items``: list of (segment, score, query_index). Returns kept items in rank order."""
    ranked = sorted(items, key=lambda it: (-it[1], it[0].start, it[0].end - it[0].start, it[2]))
    kept = []
    for it in ranked:
        if all(iou(it[0], k[0]) <= mu for k in kept):
            kept.append(it)
    return kept


def ap_oracle(windows, gt_segments, m):
    """AP as the area under the stepwise precision-recall curve.

    Matching: walk predictions best-first; each claims, among the GT segments
    not yet claimed with IoU >= m, the one with highest IoU (lowest index on
    ties).
    """
    ranked = sorted(windows, key=lambda w: -w[2])
    claimed = [False] * len(gt_segments)
    tp = []
    for w in ranked:
        seg = TimeSegment(w[0], w[1])
        best, best_iou = None, -1.0
        for g, gt in enumerate(gt_segments):
            v = iou(seg, gt)
            if not claimed[g] and v >= m and v > best_iou:
                best, best_iou = g, v
        if best is None:
            tp.append(False)
        else:
            claimed[best] = True
            tp.append(True)
    area, prev_recall, hits = 0.0, 0.0, 0
    for rank, is_tp in enumerate(tp, start=1):
        hits += is_tp
        precision = hits / rank
        recall = hits / len(gt_segments)
        area += (recall - prev_recall) * precision
        prev_recall = recall
    return area
