"""Alignment-by-voting minutiae matcher."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..energy import fold_angle
from .minutiae import BIFURCATION, Minutia


@dataclass(frozen=True)
class MatchParams:
    distance_tol: float = 12.0
    angle_tol: float = math.radians(20.0)
    bin_xy: float = 8.0
    bin_angle: float = math.radians(15.0)
    # how many of the most-voted transform bins to try
    candidates: int = 5


def _arrays(ms: list[Minutia]):
    xy = np.array([[m.x, m.y] for m in ms], dtype=np.float64).reshape(-1, 2)
    kind = np.array([m.kind == BIFURCATION for m in ms], dtype=bool)
    d = np.array([m.direction for m in ms], dtype=np.float64)
    return xy, kind, d


def _count_matches(axy, akind, adir, bxy, bkind, bdir, rot, t, p: MatchParams) -> int:
    c, s = math.cos(rot), math.sin(rot)
    moved = axy @ np.array([[c, s], [-s, c]]) + t
    mdir = fold_angle(adir + rot)
    dist = np.hypot(moved[:, None, 0] - bxy[None, :, 0], moved[:, None, 1] - bxy[None, :, 1])
    dang = np.abs(fold_angle(mdir[:, None] - bdir[None, :]))
    ok = (dist <= p.distance_tol) & (dang <= p.angle_tol) & (akind[:, None] == bkind[None, :])
    ii, jj = np.nonzero(ok)
    if len(ii) == 0:
        return 0
    order = np.lexsort((jj, ii, dist[ii, jj]))
    used_a, used_b = set(), set()
    for k in order:
        i, j = int(ii[k]), int(jj[k])
        if i not in used_a and j not in used_b:
            used_a.add(i)
            used_b.add(j)
    return len(used_a)


def match_score(a: list[Minutia], b: list[Minutia], params: MatchParams = MatchParams()) -> float:
    """Similarity in [0, 1]: ``matched**2 / (len(a) * len(b))``.

    Every cross pair votes for the rigid transform (rotation about the origin,
    then translation) taking its ``a`` minutia onto its ``b`` minutia. The
    best-supported bins are refined to the mean of their voters, ``a`` is
    mapped through each, and minutiae are paired one-to-one (closest first)
    when position, direction and type all agree. The best count wins.
    """
    if not a or not b:
        return 0.0
    axy, akind, adir = _arrays(a)
    bxy, bkind, bdir = _arrays(b)
    rot = fold_angle(bdir[None, :] - adir[:, None]).ravel()
    c, s = np.cos(rot), np.sin(rot)
    ax = np.repeat(axy[:, 0], len(b))
    ay = np.repeat(axy[:, 1], len(b))
    bx = np.tile(bxy[:, 0], len(a))
    by = np.tile(bxy[:, 1], len(a))
    tx = bx - (c * ax - s * ay)
    ty = by - (s * ax + c * ay)
    keys = np.stack([np.floor(tx / params.bin_xy + 0.5), np.floor(ty / params.bin_xy + 0.5),
                     np.floor(rot / params.bin_angle + 0.5)], axis=1).astype(np.int64)
    uniq, inverse, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.ravel()
    # most votes first; ties resolved by bin key order (np.unique sorts keys)
    order = np.argsort(-counts, kind="stable")[: params.candidates]
    best = 0
    for u in order:
        sel = inverse == u
        t = np.array([tx[sel].mean(), ty[sel].mean()])
        best = max(best, _count_matches(axy, akind, adir, bxy, bkind, bdir, float(rot[sel].mean()), t, params))
    return best * best / (len(a) * len(b))


def score_matrix(probes: list[list[Minutia]], gallery: list[list[Minutia]],
                 params: MatchParams = MatchParams()) -> np.ndarray:
    return np.array([[match_score(p, g, params) for g in gallery] for p in probes], dtype=np.float64).reshape(
        len(probes), len(gallery))
