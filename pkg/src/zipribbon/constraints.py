"""Linear seamlessness constraints over a chart set.

All rows are homogeneous equations c . X = 0 on the stacked chart
coordinates.  Four families:

pin        anchor vertex of each chart fixed at the origin (2 rows)
period     the two seam copies of a chart differ by one constant
           translation: consecutive differences agree (2 rows per
           seam segment pair)
straight   boundary lines are horizontal: y-steps vanish
interface  matched arcs on neighboring charts are related by a
           rotation of pi plus translation: x and y steps cancel
           pairwise across the two sides

Together pin + period make the seam transform a translation, straight
+ interface make every shared circle land on a straight line with the
two charts extending to opposite sides.  Rows overlap (a closed loop's
interface y-rows restate the straight rows, for example), so a maximal
independent subset is kept by exact rational elimination; dropping only
duplicates keeps the constrained space identical.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.sparse import csr_matrix


@dataclass
class Constraints:
    matrix: csr_matrix  # kept rows only
    tags: list[tuple]
    n_built: int
    n_dropped: int

    @property
    def n_rows(self):
        return self.matrix.shape[0]

    def residual(self, x):
        if self.n_rows == 0:
            return 0.0
        return float(np.abs(self.matrix @ x).max())


def _aligned_side_chains(chart_set, iface):
    """Chart-global unknown ids of both sides, in interface vertex order."""
    chains = []
    for side in chart_set.sides[iface.index]:
        chart = chart_set.charts[side.chart]
        line = getattr(chart, side.line)
        run = line.vertices[side.lo : side.hi + 1]
        if not side.forward:
            run = run[::-1]
        chains.append(chart_set.offsets[side.chart] // 2 + run)
    return chains


def build_rows(chart_set):
    """All constraint rows as sparse dicts plus a tag per row."""
    rows, tags = [], []

    def add(kind, info, entries):
        rows.append(entries)
        tags.append((kind,) + info)

    for ci, chart in enumerate(chart_set.charts):
        base = chart_set.offsets[ci]
        anchor = int(chart.seam_left[0])
        add("pin", (ci, "x"), {base + 2 * anchor: 1})
        add("pin", (ci, "y"), {base + 2 * anchor + 1: 1})

        left, right = chart.seam_left, chart.seam_right
        for j in range(1, len(left)):
            for coord in (0, 1):
                add(
                    "period",
                    (ci, j, "xy"[coord]),
                    {
                        base + 2 * left[j] + coord: 1,
                        base + 2 * left[j - 1] + coord: -1,
                        base + 2 * right[j] + coord: -1,
                        base + 2 * right[j - 1] + coord: 1,
                    },
                )

        for line_name in ("bottom", "top"):
            line = getattr(chart, line_name)
            v = line.vertices
            for k in range(len(v) - 1):
                add(
                    "straight",
                    (ci, line_name, k),
                    {base + 2 * v[k + 1] + 1: 1, base + 2 * v[k] + 1: -1},
                )

    for iface in chart_set.decomp.interfaces:
        pa, qa = _aligned_side_chains(chart_set, iface)
        for r in range(1, len(pa)):
            for coord in (0, 1):
                entries = {}
                for chain in (pa, qa):
                    hi = 2 * int(chain[r]) + coord
                    lo = 2 * int(chain[r - 1]) + coord
                    entries[hi] = entries.get(hi, 0) + 1
                    entries[lo] = entries.get(lo, 0) - 1
                entries = {c: v for c, v in entries.items() if v}
                add("interface", (iface.index, r, "xy"[coord]), entries)
    return rows, tags


def independent_rows(rows):
    """Indices of a maximal independent subset, by exact elimination.

    Rows are processed in order; a row reducing to zero against the
    rows already kept is redundant.  Arithmetic is rational so the
    decision is exact.
    """
    pivots = {}
    keep = []
    for i, row in enumerate(rows):
        r = {c: Fraction(v) for c, v in row.items() if v}
        while r:
            c = min(r)
            if c in pivots:
                f = r.pop(c)
                for cc, vv in pivots[c].items():
                    if cc == c:
                        continue
                    nv = r.get(cc, Fraction(0)) - f * vv
                    if nv:
                        r[cc] = nv
                    else:
                        r.pop(cc, None)
            else:
                inv = Fraction(1) / r[c]
                pivots[c] = {cc: vv * inv for cc, vv in r.items()}
                keep.append(i)
                break
    return keep


def build_constraints(chart_set):
    rows, tags = build_rows(chart_set)
    keep = independent_rows(rows)
    data, ri, ci = [], [], []
    for out_row, idx in enumerate(keep):
        for col, val in rows[idx].items():
            ri.append(out_row)
            ci.append(col)
            data.append(float(val))
    mat = csr_matrix(
        (data, (ri, ci)), shape=(len(keep), chart_set.n_unknowns)
    )
    return Constraints(
        matrix=mat,
        tags=[tags[i] for i in keep],
        n_built=len(rows),
        n_dropped=len(rows) - len(keep),
    )


# ----------------------------------------------------------------------
# transform view: the same conditions, checked against fitted maps


def seam_translations(chart_set, x):
    """Fit one translation per chart seam; report the worst deviation.

    Returns (translations, residual): the seam constraint family holds
    exactly when each right seam copy is the left copy plus a single
    per-chart constant vector.
    """
    translations = []
    worst = 0.0
    for ci, chart in enumerate(chart_set.charts):
        base = chart_set.offsets[ci]
        pl = np.stack(
            [x[base + 2 * chart.seam_left], x[base + 2 * chart.seam_left + 1]], axis=1
        )
        pr = np.stack(
            [x[base + 2 * chart.seam_right], x[base + 2 * chart.seam_right + 1]],
            axis=1,
        )
        d = pr - pl
        t = d.mean(axis=0)
        translations.append(t)
        if len(d):
            worst = max(worst, float(np.abs(d - t).max()))
    return translations, worst


def interface_poses(chart_set, x):
    """Fit the rotation-by-pi anchor per interface; report deviation.

    Side q matches side p through q(v) = T - p(v); the fitted T is the
    mean of p + q and the residual is the worst pointwise deviation.
    """
    anchors = {}
    worst = 0.0
    for iface in chart_set.decomp.interfaces:
        pa, qa = _aligned_side_chains(chart_set, iface)
        p = np.stack([x[2 * pa], x[2 * pa + 1]], axis=1)
        q = np.stack([x[2 * qa], x[2 * qa + 1]], axis=1)
        s = p + q
        t = s.mean(axis=0)
        anchors[iface.index] = t
        worst = max(worst, float(np.abs(s - t).max()))
    return anchors, worst


def line_flatness(chart_set, x):
    """Worst deviation of any boundary line from its mean height."""
    worst = 0.0
    for ci, chart in enumerate(chart_set.charts):
        base = chart_set.offsets[ci]
        for line_name in ("bottom", "top"):
            y = x[base + 2 * getattr(chart, line_name).vertices + 1]
            worst = max(worst, float(np.abs(y - y.mean()).max()))
    return worst
