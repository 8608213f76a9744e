"""Independent reference implementations used as test oracles.

Plain Python loops over floats; they share no code with the package.
"""
import math
import statistics


def giou_direct(a, b):
    ax1, ay1, ax2, ay2 = a
    bx1, by1, bx2, by2 = b
    area_a = (ax2 - ax1) * (ay2 - ay1)
    area_b = (bx2 - bx1) * (by2 - by1)
    iw = max(0.0, min(ax2, bx2) - max(ax1, bx1))
    ih = max(0.0, min(ay2, by2) - max(ay1, by1))
    inter = iw * ih
    union = area_a + area_b - inter
    hull = (max(ax2, bx2) - min(ax1, bx1)) * (max(ay2, by2) - min(ay1, by1))
    return inter / union - (hull - union) / hull


def focal_loop(S, G, gamma=2.0, alpha=0.25, normalizer=1.0):
    total = 0.0
    for srow, grow in zip(S, G):
        for s, g in zip(srow, grow):
            p = 1.0 / (1.0 + math.exp(-s))
            if g == 1:
                term = -((1 - p) ** gamma) * math.log(p)
                if alpha >= 0:
                    term *= alpha
            else:
                term = -(p ** gamma) * math.log(1 - p)
                if alpha >= 0:
                    term *= 1 - alpha
            total += term
    return total / normalizer


def centerness_loop(logits, targets, mask):
    total, n = 0.0, 0
    for x, t, m in zip(logits, targets, mask):
        if not m:
            continue
        p = 1.0 / (1.0 + math.exp(-x))
        total += -(t * math.log(p) + (1 - t) * math.log(1 - p))
        n += 1
    return total / n if n else 0.0


def _iou(a, b):
    iw = max(0.0, min(a[2], b[2]) - max(a[0], b[0]))
    ih = max(0.0, min(a[3], b[3]) - max(a[1], b[1]))
    inter = iw * ih
    area_a = (a[2] - a[0]) * (a[3] - a[1])
    area_b = (b[2] - b[0]) * (b[3] - b[1])
    return inter / (area_a + area_b - inter)


def atss_brute_force(anchors, per_level, boxes, concepts, N, topk=9):
    """G as nested lists. ``anchors`` and ``boxes`` are lists of [x1, y1, x2, y2]."""
    M = len(anchors)
    centers = [((a[0] + a[2]) / 2, (a[1] + a[3]) / 2) for a in anchors]
    claims = [[] for _ in range(M)]  # (iou, object index)
    for k, box in enumerate(boxes):
        bx, by = (box[0] + box[2]) / 2, (box[1] + box[3]) / 2
        cand = []
        start = 0
        for n in per_level:
            d = []
            for i in range(start, start + n):
                dx, dy = bx - centers[i][0], by - centers[i][1]
                d.append((dx * dx + dy * dy, i))
            d.sort()
            cand += [i for _, i in d[:min(topk, n)]]
            start += n
        ious = [_iou(box, anchors[i]) for i in cand]
        thr = statistics.fmean(ious) + (statistics.stdev(ious) if len(ious) > 1 else 0.0)
        for i, v in zip(cand, ious):
            cx, cy = centers[i]
            if v >= thr and box[0] < cx < box[2] and box[1] < cy < box[3]:
                claims[i].append((v, k))
    G = [[0] * M for _ in range(N)]
    for i, c in enumerate(claims):
        if c:
            best = max(c, key=lambda t: (t[0], -t[1]))
            G[concepts[best[1]]][i] = 1
    return G


def eleven_point_ap_loop(scores_hits, n_gt):
    """``scores_hits``: (score, is_true_positive) per detection, already matched."""
    ranked = sorted(scores_hits, key=lambda t: -t[0])
    tp = 0
    prec, rec = [], []
    for i, (_, hit) in enumerate(ranked, 1):
        tp += hit
        prec.append(tp / i)
        rec.append(tp / n_gt)
    total = 0.0
    for j in range(11):
        t = j / 10
        ps = [p for p, r in zip(prec, rec) if r >= t]
        total += max(ps) if ps else 0.0
    return total / 11
