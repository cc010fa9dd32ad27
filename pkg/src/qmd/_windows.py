"""Batched exact max-min squared distances over lattice windows.

Given windows (boxes of lattice points, possibly poking outside the unit
cube) with a feature mask and a domain mask, compute for each window

    max over domain points p of  min over feature points f of |p - f|^2

in integer cell units, or -1 if the window has no feature point.

Small windows are processed together with a separable brute-force squared
distance transform; large windows go one at a time through
``scipy.ndimage.distance_transform_edt`` whose nearest-feature indices are
used to recompute the squared distances as exact integers.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import ndimage

INF = np.int64(1) << 50
BATCH_MAX_SIDE = 16
BATCH_MAX_CELLS = 1 << 22


def batched_sqedt(feat: np.ndarray) -> np.ndarray:
    """Exact squared EDT of every window in ``feat`` (shape (W, n1, ..., nd)).

    Entries with no feature in their window are >= INF.
    """
    f = np.where(feat, np.int64(0), INF)
    for ax in range(1, feat.ndim):
        n = f.shape[ax]
        g = f.copy()
        for t in range(1, n):
            t2 = np.int64(t * t)
            hi = [slice(None)] * f.ndim
            lo = [slice(None)] * f.ndim
            hi[ax] = slice(t, None)
            lo[ax] = slice(None, n - t)
            hi, lo = tuple(hi), tuple(lo)
            np.minimum(g[lo], f[hi] + t2, out=g[lo])
            np.minimum(g[hi], f[lo] + t2, out=g[hi])
        f = g
    return f


def window_max_min(feat: np.ndarray, dom: np.ndarray) -> np.ndarray:
    """Per-window max over ``dom`` of squared distance to ``feat``; -1 if no feature."""
    W = feat.shape[0]
    if W == 0:
        return np.zeros(0, dtype=np.int64)
    f = batched_sqedt(feat)
    f = np.where(dom, f, np.int64(-1)).reshape(W, -1).max(axis=1)
    f[f >= INF] = -1
    f[~feat.reshape(W, -1).any(axis=1)] = -1
    return f


def single_max_min(feat: np.ndarray, dom: np.ndarray | None) -> int:
    """One window via scipy; exact because distances are rebuilt from indices."""
    if not feat.any():
        return -1
    if dom is not None and not dom.any():
        return -1
    if feat.all():
        return 0
    idx = ndimage.distance_transform_edt(~feat, return_distances=False, return_indices=True)
    grid = np.indices(feat.shape)
    sq = ((idx.astype(np.int64) - grid) ** 2).sum(axis=0)
    if dom is None:
        return int(sq.max())
    return int(sq[dom].max())


class LatticeWindows:
    """Window extraction from an occupancy grid.

    ``occ`` is the d-dim boolean grid. Windows are axis-aligned boxes given by
    their low corners (W, d) and a common ``shape``; an optional ``mask`` of
    that shape (e.g. a ball) further restricts the domain. With
    ``inside_only`` the domain excludes lattice points outside the grid.
    """

    def __init__(self, occ: np.ndarray):
        self.occ = occ
        self.n = occ.shape[0]
        self.d = occ.ndim
        self._padded: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    def _pad(self, pad: int):
        if pad not in self._padded:
            p = np.pad(self.occ, pad, constant_values=False)
            inside = np.pad(np.ones(self.occ.shape, dtype=bool), pad, constant_values=False)
            self._padded[pad] = (p, inside)
        return self._padded[pad]

    def evaluate(
        self,
        lows: np.ndarray,
        shape: Sequence[int],
        mask: np.ndarray | None = None,
        inside_only: bool = True,
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Return (sq, touches, domain_counts) per window.

        ``sq`` is the max-min squared distance (-1 if E misses the window's
        domain), ``touches`` whether any feature lies in the domain, and
        ``domain_counts`` the number of domain lattice points.
        """
        lows = np.asarray(lows, dtype=np.int64).reshape(-1, self.d)
        shape = tuple(int(s) for s in shape)
        W = len(lows)
        if W == 0:
            z = np.zeros(0, dtype=np.int64)
            return z, z.astype(bool), z
        cells = int(np.prod(shape))
        if max(shape) <= BATCH_MAX_SIDE:
            out_sq, out_t, out_c = [], [], []
            step = max(1, BATCH_MAX_CELLS // cells)
            for s in range(0, W, step):
                sq, t, c = self._batch(lows[s : s + step], shape, mask, inside_only)
                out_sq.append(sq)
                out_t.append(t)
                out_c.append(c)
            return np.concatenate(out_sq), np.concatenate(out_t), np.concatenate(out_c)
        sq = np.empty(W, dtype=np.int64)
        touches = np.empty(W, dtype=bool)
        counts = np.empty(W, dtype=np.int64)
        for w in range(W):
            sq[w], touches[w], counts[w] = self._single(lows[w], shape, mask, inside_only)
        return sq, touches, counts

    def _batch(self, lows, shape, mask, inside_only):
        pad = int(max(0, -lows.min(), (lows + np.asarray(shape)).max() - self.n))
        p, inside = self._pad(pad)
        starts = tuple((lows + pad).T)
        feat = sliding_window_view(p, shape)[starts]
        if inside_only:
            dom = sliding_window_view(inside, shape)[starts]
            if mask is not None:
                dom = dom & mask
        elif mask is not None:
            dom = np.broadcast_to(mask, feat.shape)
        else:
            dom = np.ones(feat.shape, dtype=bool)
        feat = feat & dom
        W = len(lows)
        sq = window_max_min(feat, dom)
        touches = feat.reshape(W, -1).any(axis=1)
        counts = dom.reshape(W, -1).sum(axis=1)
        return sq, touches, counts

    def _single(self, low, shape, mask, inside_only):
        low = np.asarray(low)
        hi = low + np.asarray(shape)
        if inside_only:
            clo = np.maximum(low, 0)
            chi = np.minimum(hi, self.n)
            if (clo >= chi).any():
                return -1, False, 0
            sl = tuple(slice(a, b) for a, b in zip(clo, chi))
            feat = self.occ[sl]
            dom = None
            if mask is not None:
                msl = tuple(slice(a - l, b - l) for a, b, l in zip(clo, chi, low))
                dom = mask[msl]
                feat = feat & dom
            count = int(np.prod(chi - clo)) if dom is None else int(dom.sum())
        else:
            feat = np.zeros(shape, dtype=bool)
            clo = np.maximum(low, 0)
            chi = np.minimum(hi, self.n)
            if (clo < chi).all():
                src = tuple(slice(a, b) for a, b in zip(clo, chi))
                dst = tuple(slice(a - l, b - l) for a, b, l in zip(clo, chi, low))
                feat[dst] = self.occ[src]
            dom = mask
            if dom is not None:
                feat = feat & dom
            count = int(np.prod(shape)) if dom is None else int(dom.sum())
        touches = bool(feat.any())
        return single_max_min(feat, dom), touches, count


def parallel_map(fn: Callable, items: Sequence, threads: int | None = None) -> list:
    """Ordered map; results come back in input order whatever the worker count."""
    if threads is None or threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))
