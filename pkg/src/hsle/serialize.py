"""CSV serialization for driving paths, curves and interfaces.

Column orders are part of the external interface and stay stable:
driving: t, W, V_1, ..., V_k (tracks in sorted name order)
curve:   k, Re, Im
interface: k, x, y, turn
"""

from __future__ import annotations

import csv
import io

import numpy as np

from .errors import DomainError
from .interfaces import InterfacePath
from .loewner import DrivingPath, HalfPlaneCurve, TimeGrid


def driving_to_csv(d: DrivingPath) -> str:
    names = sorted(d.tracks)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "W"] + [f"V_{nm}" for nm in names])
    for k in range(d.w.size):
        row = [f"{d.grid.times[k]:.17g}", f"{d.w[k]:.17g}"]
        row += [f"{d.tracks[nm][k]:.17g}" for nm in names]
        w.writerow(row)
    return buf.getvalue()


def driving_from_csv(text: str) -> DrivingPath:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0][:2] != ["t", "W"]:
        raise DomainError("not a driving-path CSV")
    names = [h[2:] for h in rows[0][2:]]
    data = np.array([[float(v) for v in r] for r in rows[1:]])
    tracks = {nm: data[:, 2 + i] for i, nm in enumerate(names)}
    return DrivingPath(grid=TimeGrid(data[:, 0]), w=data[:, 1], tracks=tracks)


def curve_to_csv(c: HalfPlaneCurve) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["k", "Re", "Im"])
    for k, z in enumerate(c.points):
        w.writerow([k, f"{z.real:.17g}", f"{z.imag:.17g}"])
    return buf.getvalue()


def curve_from_csv(text: str) -> HalfPlaneCurve:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != ["k", "Re", "Im"]:
        raise DomainError("not a curve CSV")
    pts = np.array([complex(float(r[1]), float(r[2])) for r in rows[1:]])
    return HalfPlaneCurve(pts)


def interface_to_csv(p: InterfacePath) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["k", "x", "y", "turn"])
    turns = p.turns if p.turns else [""] * len(p.points)
    for k, ((x, y), turn) in enumerate(zip(p.points, turns)):
        w.writerow([k, f"{x:.17g}", f"{y:.17g}", turn])
    return buf.getvalue()
