"""Affine descriptions of the server's view, for fast exhaustive enumeration.

For the sum scheme the transcript is ``Y = A w + B z (mod m)`` with ``w`` the
flattened data and ``z`` the free mask variables; decoding is ``F = D Y``.
The matrices below are written out from the scheme's channel table, independently
of :mod:`qmacsec.protocols`, and the test-suite checks the two agree.

The product scheme's view is a pair of independent factors (phase I over
``Z_p`` and phase II over ``Z_{d-1}``) because the two phases draw independent
randomness; each factor is affine once the zero pattern of the data is fixed.
Data rows are numbered in ``itertools.product`` order over the ``K x L`` data
flattened user-major.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Iterator

import numpy as np

from qmacsec import algebra, protocols

ROW_CHUNK = 1 << 16


@dataclass
class RowChunk:
    row_ids: np.ndarray
    base: np.ndarray
    groups: np.ndarray
    targets: np.ndarray


@dataclass
class Batch:
    """Data rows that share one enumerated randomness grid."""

    grid: np.ndarray
    grid_names: tuple[str, ...]
    bz: np.ndarray
    weight: int
    n_rows: int
    chunks: Callable[[], Iterator[RowChunk]]


@dataclass
class Factor:
    name: str
    radix: np.ndarray
    dec: np.ndarray
    dec_mod: np.ndarray
    dec_mode: np.ndarray
    batches: Callable[[], Iterator[Batch]]
    evaluations: int

    @property
    def code_space(self) -> int:
        return int(np.prod(self.radix))

    def decode_code(self, code: int) -> tuple[int, ...]:
        out = []
        for r in self.radix:
            out.append(int(code % r))
            code //= int(r)
        return tuple(out)


@dataclass
class AffineModel:
    scheme: protocols.Scheme
    n_groups: int
    group_label: Callable[[int], tuple]
    row_data: Callable[[int], np.ndarray]
    factors: list[Factor]
    group_of_data: Callable[[np.ndarray], int]
    final_check: Callable[[], tuple[bool, dict | None]] | None = field(default=None)

    @property
    def evaluations(self) -> int:
        return sum(f.evaluations for f in self.factors)


# -- the sum scheme as matrices -------------------------------------------------


def sum_matrices(K: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(A, B, D)`` for K users: ``Y = A w + B z``, ``F = D Y``.

    ``w`` is indexed ``k * L + l`` (0-based). For even K the free masks are
    ``Z_2..Z_{K/2}`` and ``Z_1 = -(Z_2 + ... )``. For odd K they are
    ``Z_0, Z_2(1), Z_2(2), Z_3(1), ...`` and ``Z_1(l) = -sum_i Z_i(l)``.
    """
    if K == 1:
        return np.ones((1, 1), np.int64), np.zeros((1, 0), np.int64), np.ones((1, 1), np.int64)
    if K % 2 == 0:
        t = K // 2
        A = np.zeros((t, K), np.int64)
        B = np.zeros((t, t - 1), np.int64)
        for i in range(t):
            A[i, 2 * i] = A[i, 2 * i + 1] = 1
        B[0, :] = -1
        for j in range(t - 1):
            B[j + 1, j] = 1
        return A, B, np.ones((1, t), np.int64)

    h = (K - 1) // 2
    A = np.zeros((K, 2 * K), np.int64)
    B = np.zeros((K, K - 2), np.int64)

    def w(k, l):  # 1-based user, instance
        return 2 * (k - 1) + (l - 1)

    def z(i, l):  # free index of Z_i(l), i >= 2
        return 1 + 2 * (i - 2) + (l - 1)

    def add_z1(row, l):
        for i in range(2, h + 1):
            B[row, z(i, l)] -= 1

    # Y1 = W1(1) - W1(2) + W2(1) + Z0 + Z1(1)
    A[0, w(1, 1)], A[0, w(1, 2)], A[0, w(2, 1)] = 1, -1, 1
    B[0, 0] = 1
    add_z1(0, 1)
    # Y2 = W2(2) - W3(1) + W3(2) + Z0 + Z1(2)
    A[1, w(2, 2)], A[1, w(3, 1)], A[1, w(3, 2)] = 1, -1, 1
    B[1, 0] = 1
    add_z1(1, 2)
    # Y3 = W1(2) + W3(1) - Z0
    A[2, w(1, 2)], A[2, w(3, 1)] = 1, 1
    B[2, 0] = -1
    D = np.zeros((2, K), np.int64)
    D[0, [0, 2]] = 1
    D[1, [1, 2]] = 1
    for i in range(2, h + 1):
        for l, row in ((1, 1 + i), (2, h + i)):
            A[row, w(2 * i, l)] = A[row, w(2 * i + 1, l)] = 1
            B[row, z(i, l)] = 1
            D[l - 1, row] = 1
    return A, B, D


def _digits(ids: np.ndarray, base: int, n: int) -> np.ndarray:
    """Most-significant-first digits of each id."""
    out = np.empty((ids.shape[0], n), np.int64)
    rem = ids.copy()
    for j in range(n - 1, -1, -1):
        out[:, j] = rem % base
        rem //= base
    return out


def _grid(sizes: list[int], offsets: list[int] | None = None) -> np.ndarray:
    if not sizes:
        return np.zeros((1, 0), np.int64)
    offsets = offsets or [0] * len(sizes)
    axes = [np.arange(s, dtype=np.int64) + o for s, o in zip(sizes, offsets)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def _group_index(F: np.ndarray, base: int) -> np.ndarray:
    """Instances ``F[:, l]`` folded into one index, instance 0 least significant."""
    g = np.zeros(F.shape[0], np.int64)
    for l in range(F.shape[1] - 1, -1, -1):
        g = g * base + F[:, l]
    return g


def _group_label(base: int, L: int) -> Callable[[int], tuple]:
    return lambda g: tuple((g // base**l) % base for l in range(L))


def sum_model(scheme: protocols.QSKSum) -> AffineModel:
    m, K, L = scheme.d, scheme.K, scheme.L
    n = K * L
    A, B, D = sum_matrices(K)
    zeroed = isinstance(scheme, protocols.BrokenQSKSum)
    grid = np.zeros((1, B.shape[1]), np.int64) if zeroed else _grid([m] * B.shape[1])
    bz = (grid @ B.T) % m
    radix = np.full(A.shape[0], m, np.int64)
    total = m**n

    def chunks():
        for lo in range(0, total, ROW_CHUNK):
            ids = np.arange(lo, min(total, lo + ROW_CHUNK), dtype=np.int64)
            W = _digits(ids, m, n)
            F = W.reshape(-1, K, L).sum(axis=1) % m
            yield RowChunk(ids, np.ascontiguousarray((W @ A.T) % m), _group_index(F, m), np.ascontiguousarray(F))

    batch = Batch(grid, tuple(f"z{j}" for j in range(grid.shape[1])), np.ascontiguousarray(bz), 1, total, chunks)
    factor = Factor(
        "transcript",
        radix,
        D % m,
        np.full(L, m, np.int64),
        np.zeros(L, np.int64),
        lambda: iter([batch]),
        total * grid.shape[0],
    )
    return AffineModel(
        scheme,
        m**L,
        _group_label(m, L),
        lambda rid: _digits(np.array([rid]), m, n)[0].reshape(K, L),
        [factor],
        lambda W: int(_group_index((np.asarray(W).sum(axis=0) % m)[None, :], m)[0]),
    )


# -- the product scheme -----------------------------------------------------------


def _poly_mul_table(spec: algebra.FieldSpec) -> np.ndarray:
    """Multiplication table from polynomial arithmetic (no discrete logs)."""
    d = spec.order
    tab = np.zeros((d, d), np.int64)
    for a in range(d):
        for b in range(a, d):
            c = algebra._poly_mulmod(spec.coeffs(a), spec.coeffs(b), spec.poly, spec.p)
            tab[a, b] = tab[b, a] = spec.from_coeffs(c)
    return tab


def prod_model(scheme: protocols.QSKProd) -> AffineModel:
    spec, K, L, p = scheme.spec, scheme.K, scheme.L, scheme.prime
    d = spec.order
    m2 = d - 1
    n = K * L
    A, B, D = sum_matrices(K)
    t = A.shape[0]
    rs = B.shape[1]
    log = spec.log
    exp = spec.exp
    mask = scheme.mask_zeros
    patterns = list(itertools.product((0, 1), repeat=n))  # 1 marks a zero entry
    place = np.array([d ** (n - 1 - j) for j in range(n)], np.int64)

    def pattern_rows(pat):
        nz = [j for j in range(n) if not pat[j]]
        count = m2 ** len(nz)
        for lo in range(0, count, ROW_CHUNK):
            ids = np.arange(lo, min(count, lo + ROW_CHUNK), dtype=np.int64)
            W = np.zeros((ids.shape[0], n), np.int64)
            if nz:
                W[:, nz] = _digits(ids, m2, len(nz)) + 1
            yield W

    def products(W):
        """Per-instance field products via the log tables, and the AND flags."""
        Wk = W.reshape(-1, K, L)
        allnz = (Wk != 0).all(axis=1)
        s = np.where(Wk != 0, log[Wk], 0).sum(axis=1) % max(m2, 1)
        F = np.where(allnz, exp[s] if d > 2 else 1, 0)
        return F, allnz, s

    def row_chunk(W, base):
        F, allnz, s = products(W)
        return F, allnz, s, RowChunk(W @ place, base, _group_index(F, d), None)

    ph1_grid = np.concatenate(
        [
            np.repeat(_grid([p - 1] * L, [1] * L), p**rs, axis=0),
            np.tile(_grid([p] * rs), ((p - 1) ** L, 1)),
        ],
        axis=1,
    )

    def phase1_batches():
        for pat in patterns:
            u = np.array(pat, np.int64).reshape(K, L)
            coef = np.stack([(A[:, [k * L + l for k in range(K)]] * u[:, l]).sum(axis=1) for l in range(L)], axis=1)
            bz = (ph1_grid @ np.concatenate([coef, B], axis=1).T) % p
            nrows = m2 ** (n - sum(pat))

            def chunks(pat=pat):
                for W in pattern_rows(pat):
                    F, allnz, _, ch = row_chunk(W, np.zeros((W.shape[0], t), np.int64))
                    ch.targets = np.ascontiguousarray(allnz.astype(np.int64))
                    yield ch

            yield Batch(
                ph1_grid,
                tuple(f"R{l + 1}" for l in range(L)) + tuple(f"z{j}" for j in range(rs)),
                np.ascontiguousarray(bz),
                1,
                nrows,
                chunks,
            )

    def phase2_batches():
        for pat in patterns:
            zeros = [j for j in range(n) if pat[j]]
            nzw = len(zeros) if mask else 0
            grid = _grid([m2] * (nzw + rs))
            coef = np.concatenate([A[:, zeros] if mask else A[:, []], B], axis=1)
            bz = (grid @ coef.T) % m2
            nrows = m2 ** (n - len(zeros))
            weight = m2 ** (n - nzw) if mask else 1

            def chunks(pat=pat):
                for W in pattern_rows(pat):
                    wl = np.where(W != 0, log[W], 0)
                    F, allnz, s, ch = row_chunk(W, np.ascontiguousarray((wl @ A.T) % m2))
                    ch.targets = np.ascontiguousarray(np.where(allnz, s, -1))
                    yield ch

            names = tuple(f"logWt{j}" for j in (zeros if mask else [])) + tuple(f"z{j}" for j in range(rs))
            yield Batch(grid, names, np.ascontiguousarray(bz), weight, nrows, chunks)

    ph1_evals = d**n * ph1_grid.shape[0]
    factors = [
        Factor(
            "phase1",
            np.full(t, p, np.int64),
            D % p,
            np.full(L, p, np.int64),
            np.ones(L, np.int64),
            phase1_batches,
            ph1_evals,
        )
    ]
    if d > 2:
        ph2_evals = sum(
            m2 ** (n - sum(pat)) * m2 ** ((sum(pat) if mask else 0) + rs) for pat in patterns
        )
        factors.append(
            Factor(
                "phase2",
                np.full(t, m2, np.int64),
                D % m2,
                np.full(L, m2, np.int64),
                np.zeros(L, np.int64),
                phase2_batches,
                ph2_evals,
            )
        )

    def final_check():
        """exp(sum of logs) must equal the polynomial-arithmetic product for nonzero data."""
        tab = _poly_mul_table(spec)
        nonzero = [0] * n
        for W in pattern_rows(nonzero):
            F, _, _ = products(W)
            Wk = W.reshape(-1, K, L)
            prod = Wk[:, 0, :]
            for k in range(1, K):
                prod = tab[prod, Wk[:, k, :]]
            bad = np.nonzero((prod != F).any(axis=1))[0]
            if bad.size:
                i = bad[0]
                return False, {"data": Wk[i].tolist(), "expected": prod[i].tolist(), "decoded": F[i].tolist()}
        return True, None

    def group_of_data(W):
        F, _, _ = products(np.asarray(W).reshape(1, -1))
        return int(_group_index(F, d)[0])

    return AffineModel(
        scheme,
        d**L,
        _group_label(d, L),
        lambda rid: _digits(np.array([rid]), d, n)[0].reshape(K, L),
        factors,
        group_of_data,
        final_check,
    )


def affine_model(scheme: protocols.Scheme) -> AffineModel | None:
    """The fast model for a scheme, or ``None`` if it only has the generic route."""
    if isinstance(scheme, protocols.QSKSum):
        return sum_model(scheme)
    if isinstance(scheme, protocols.QSKProd):
        return prod_model(scheme)
    return None
