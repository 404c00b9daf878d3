"""Pure numpy implementation of the enumeration kernels.

Both functions walk ``n`` data rows against ``m`` randomness rows. Row ``i``
with randomness ``z`` produces the transcript ``(base[i] + bz[z]) mod radix``
(inputs are already reduced, so one conditional subtraction suffices), encoded
mixed-radix with the first output least significant.

``scan`` builds the exact weighted transcript histogram of every row, makes
the first row of each group its reference, records the first row whose
histogram differs from its group reference in ``witness[0:2]``, adds every
histogram into ``sums``, and checks each decode row at every evaluation point.
It returns the number of failing decode checks; the first is kept in
``witness[2:4]`` as ``(row id, randomness index)``.

``kl`` needs the finished group sums and returns
``sum_rows sum_y h(y) * ln(h(y) * n_g / S_g(y))`` together with a flag that is
true iff every ratio was exactly one (integer comparison).
"""

from __future__ import annotations

import numpy as np

_CELLS = 1 << 22


def _codes(base, bz, radix):
    stride = np.cumprod(np.concatenate(([1], radix[:-1]))).astype(np.int64)
    y = base[:, None, :] + bz[None, :, :]
    y = np.where(y >= radix, y - radix, y)
    return y, (y * stride).sum(axis=2)


def _hist(codes, S):
    n = codes.shape[0]
    flat = codes + (np.arange(n, dtype=np.int64) * S)[:, None]
    return np.bincount(flat.ravel(), minlength=n * S).reshape(n, S)


def _chunks(n, m, S, t):
    step = max(1, _CELLS // max(S, m * max(t, 1), 1))
    for lo in range(0, n, step):
        yield slice(lo, min(n, lo + step))


def scan(base, bz, radix, groups, row_ids, weight, dec, dec_mod, dec_mode, target,
         ref, ref_row, ref_total, sums, group_rows, witness):
    n, m, t = base.shape[0], bz.shape[0], radix.shape[0]
    S = ref.shape[1]
    total = weight * m
    failures = 0
    for sl in _chunks(n, m, S, t):
        y, codes = _codes(base[sl], bz, radix)
        if dec.shape[0]:
            s = np.einsum("izj,qj->izq", y, dec) % dec_mod
            tq = target[sl][:, None, :]
            ok = np.where(dec_mode == 0, s == tq, (s == 0) == (tq == 1)) | (tq < 0)
            nbad = int((~ok).sum())
            if nbad:
                failures += nbad
                bad = ~ok.all(axis=2)
                if witness[2] < 0:
                    i, z = np.argwhere(bad)[0]
                    witness[2] = row_ids[sl][i]
                    witness[3] = z
        hist = _hist(codes, S) * weight
        g = groups[sl]
        rid = row_ids[sl]
        for gi in np.unique(g):
            if ref_row[gi] < 0:
                first = int(np.argmax(g == gi))
                ref_row[gi] = rid[first]
                ref_total[gi] = total
                ref[gi] = hist[first]
        if witness[0] < 0:
            same = (hist == ref[g]).all(axis=1) & (ref_total[g] == total)
            if not same.all():
                i = int(np.argmin(same))
                witness[0] = rid[i]
                witness[1] = ref_row[g[i]]
        if sums.shape[0]:
            np.add.at(sums, g, hist)
        np.add.at(group_rows, g, 1)
    return failures


def kl(base, bz, radix, groups, weight, sums, group_rows):
    n, m, t = base.shape[0], bz.shape[0], radix.shape[0]
    S = sums.shape[1]
    acc = 0.0
    exact = True
    for sl in _chunks(n, m, S, t):
        _, codes = _codes(base[sl], bz, radix)
        h = _hist(codes, S) * weight
        g = groups[sl]
        scaled = h * group_rows[g][:, None]
        sg = sums[g]
        mask = (h > 0) & (scaled != sg)
        if mask.any():
            exact = False
            acc += float((h[mask] * np.log(scaled[mask] / sg[mask])).sum())
    return acc, exact
