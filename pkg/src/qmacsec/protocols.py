"""Secure computation schemes built on the additive channel.

Every scheme maps (data, common randomness) to a :class:`ProtocolRun` holding the
channel transcript and the server's decoded output. User labels in channel
pairs are 1-based. Data for ``K`` users and ``L`` instances is a ``K x L``
integer array; for field-valued schemes the integers are element indices of the
:class:`~qmacsec.algebra.FieldSpec`.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, ClassVar, Iterator

import numpy as np

from qmacsec import algebra
from qmacsec.algebra import FieldSpec
from qmacsec.channel import ChannelSession, ChannelUse, CostLedger, SimMode, ledger_rate


class ProtocolError(ValueError):
    pass


def batch_length(K: int) -> int:
    """Instances per run of the sum scheme: two for odd K >= 3, else one."""
    return 2 if K >= 3 and K % 2 else 1


@dataclass
class CommonRandomness:
    components: dict
    seed: int | None = None

    def __getitem__(self, key):
        return self.components[key]

    def to_dict(self) -> dict:
        return {"seed": self.seed, **{k: _jsonable(v) for k, v in self.components.items()}}


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (tuple, list)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.integer):
        return int(v)
    return v


@dataclass
class ProtocolRun:
    protocol: str
    data: np.ndarray
    randomness: CommonRandomness
    uses: list[ChannelUse]
    ref_dim: int
    decoder: Callable[[tuple[int, ...]], tuple] = field(repr=False, compare=False)
    session: ChannelSession | None = field(default=None, repr=False, compare=False)
    labels: Callable[[int], str] | None = field(default=None, repr=False, compare=False)
    output_labels: Callable[[int], str] | None = field(default=None, repr=False, compare=False)

    @property
    def K(self) -> int:
        return self.data.shape[0]

    @property
    def L(self) -> int:
        return self.data.shape[1]

    @property
    def transcript(self) -> tuple[int, ...]:
        return tuple(u.y for u in self.uses)

    @property
    def output(self) -> tuple:
        return self.decoder(self.transcript)

    @property
    def ledger(self) -> CostLedger:
        """Cost of this run, one qudit per channel use plus padding charges."""
        led = CostLedger()
        for u in self.uses:
            led.charge(u.d, 2 if u.padded else 1)
        return led

    @property
    def rate(self) -> float:
        return ledger_rate(self.ledger, self.L, self.ref_dim)

    @property
    def divergent(self) -> bool:
        return any(u.padded for u in self.uses)

    def to_dict(self) -> dict:
        fmt = self.labels or str
        out_fmt = self.output_labels or fmt
        return {
            "protocol": self.protocol,
            "K": self.K,
            "L": self.L,
            "data": [[fmt(int(w)) for w in row] for row in self.data],
            "randomness": self.randomness.to_dict(),
            "transcript": [
                {"pair": list(u.pair), "d": u.d, "kind": u.kind, "inputs": list(u.inputs), "y": u.y}
                for u in self.uses
            ],
            "output": [out_fmt(int(f)) for f in self.output],
            "ledger": self.ledger.to_dict(),
            "reference_dimension": self.ref_dim,
            "rate": self.rate,
            "paper_rate_divergent": self.divergent,
        }


def _as_matrix(W, K: int | None = None, L: int | None = None) -> np.ndarray:
    arr = np.array(W, dtype=np.int64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise ProtocolError(f"data must be a K x L matrix, got shape {arr.shape}")
    if K is not None and arr.shape[0] != K:
        raise ProtocolError(f"expected {K} users, got {arr.shape[0]}")
    if L is not None and arr.shape[1] != L:
        raise ProtocolError(f"expected {L} instance(s) per run, got {arr.shape[1]}")
    return arr


def _check_alphabet(arr: np.ndarray, size: int, what: str = "data") -> None:
    if arr.size and (arr.min() < 0 or arr.max() >= size):
        raise ProtocolError(f"{what} outside alphabet of size {size}: {arr.tolist()}")


def _session(session, mode, pad):
    if session is not None:
        return session, False
    return ChannelSession(mode, pad), True


# -- common randomness for the sum scheme --------------------------------------


def _sum_free_vars(K: int) -> int:
    if K % 2 == 0:
        return K // 2 - 1
    if K >= 3:
        return K - 2
    return 0


def _sum_components(m: int, K: int, free: tuple[int, ...]) -> dict:
    """Expand the free mask variables into the full set with the zero-sum constraint."""
    if K % 2 == 0:
        rest = list(free)
        return {"Z": tuple([(-sum(rest)) % m] + rest)}
    if K == 1:
        return {}
    h = (K - 1) // 2
    z0, others = free[0], free[1:]
    Z = np.zeros((h, 2), dtype=np.int64)
    if h > 1:
        Z[1:] = np.array(others, dtype=np.int64).reshape(h - 1, 2)
    Z[0] = (-Z[1:].sum(axis=0)) % m
    return {"Z0": int(z0), "Z": tuple(tuple(int(v) for v in row) for row in Z)}


def sum_randomness_space(m: int, K: int) -> Iterator[dict]:
    for free in itertools.product(range(m), repeat=_sum_free_vars(K)):
        yield _sum_components(m, K, free)


def sample_sum_randomness(m: int, K: int, rng: np.random.Generator) -> dict:
    free = tuple(int(v) for v in rng.integers(0, m, _sum_free_vars(K)))
    return _sum_components(m, K, free)


def check_sum_randomness(m: int, K: int, comp: dict) -> None:
    if K % 2 == 0:
        Z = comp.get("Z")
        if Z is None or len(Z) != K // 2:
            raise ProtocolError(f"even K={K} needs {K // 2} mask values Z")
        if any(not 0 <= z < m for z in Z) or sum(Z) % m:
            raise ProtocolError(f"masks {Z} must lie in Z_{m} and sum to zero")
    elif K >= 3:
        h = (K - 1) // 2
        Z = np.array(comp.get("Z", ()), dtype=np.int64)
        if Z.shape != (h, 2):
            raise ProtocolError(f"odd K={K} needs a ({h}, 2) array of masks Z_i(l)")
        if not 0 <= comp.get("Z0", -1) < m or Z.min() < 0 or Z.max() >= m:
            raise ProtocolError(f"masks must lie in Z_{m}")
        if (Z.sum(axis=0) % m).any():
            raise ProtocolError("masks Z_1(l) + ... + Z_h(l) must vanish for each l")


# -- transcripts of the sum scheme over Z_m ------------------------------------


def _sum_uses(session: ChannelSession, m: int, K: int, W: np.ndarray, comp: dict) -> list[ChannelUse]:
    if K == 1:
        return [session.send(1, m, int(W[0, 0]) % m)]
    if K % 2 == 0:
        Z = comp["Z"]
        return [
            session.use((2 * i + 1, 2 * i + 2), m, int(W[2 * i, 0] + Z[i]) % m, int(W[2 * i + 1, 0]) % m)
            for i in range(K // 2)
        ]
    h = (K - 1) // 2
    Z0 = comp["Z0"]
    Z = comp["Z"]
    w = lambda k, l: int(W[k - 1, l - 1])  # noqa: E731 - 1-based lookup as in the table
    uses = [
        session.use((1, 2), m, (w(1, 1) - w(1, 2)) % m, (w(2, 1) + Z0 + Z[0][0]) % m),
        session.use((2, 3), m, (w(2, 2) + Z0 + Z[0][1]) % m, (w(3, 2) - w(3, 1)) % m),
        session.use((1, 3), m, w(1, 2) % m, (w(3, 1) - Z0) % m),
    ]
    for ell in (1, 2):
        for i in range(2, h + 1):
            uses.append(
                session.use((2 * i, 2 * i + 1), m, (w(2 * i, ell) + Z[i - 1][ell - 1]) % m, w(2 * i + 1, ell) % m)
            )
    return uses


def _sum_decode(m: int, K: int, ys: tuple[int, ...]) -> tuple[int, ...]:
    if K == 1:
        return (ys[0] % m,)
    if K % 2 == 0:
        return (sum(ys) % m,)
    h = (K - 1) // 2
    row4 = ys[3 : 3 + (h - 1)]
    row5 = ys[3 + (h - 1) :]
    return ((ys[0] + ys[2] + sum(row4)) % m, (ys[1] + ys[2] + sum(row5)) % m)


def _sum_use_count(K: int) -> int:
    return K if K % 2 else K // 2 if K > 1 else 1


# -- the schemes ---------------------------------------------------------------

_CITED_TABLE = {
    1: lambda A, B: ((A, 0), (0, B)),
    2: lambda A, B: ((0, A), (B, (B + 1) % 2)),
    3: lambda A, B: (((A + 1) % 2, A), (B, 0)),
}


def qs2_and_cited(A: int, B: int, Z: int, session=None, mode=SimMode.ABSTRACT, pad=False) -> ProtocolRun:
    """Two-user AND with one 2-sum over qubits and a ternary shared ``Z``."""
    if A not in (0, 1) or B not in (0, 1):
        raise ProtocolError("inputs must be bits")
    if Z not in _CITED_TABLE:
        raise ProtocolError(f"Z must be in {{1,2,3}}, got {Z}")
    sess, own = _session(session, mode, pad)
    alice, bob = _CITED_TABLE[Z](A, B)
    uses = list(sess.two_sum((1, 2), 2, alice, bob))
    if own:
        sess.close()
    return ProtocolRun(
        "qs2-and-cited",
        _as_matrix([A, B]),
        CommonRandomness({"Z": Z}),
        uses,
        2,
        lambda ys: (int(tuple(ys) == (1, 1)),),
        sess,
    )


def _qs2_new_decode(ys):
    return (int(ys[0] == 0),)


def qs2_and_new(A: int, B: int, Z: int, session=None, mode=SimMode.ABSTRACT, pad=False,
                decoder=_qs2_new_decode, name="qs2-and-new") -> ProtocolRun:
    """Two-user AND with a single additive use over Z_3 and a binary shared ``Z``."""
    if A not in (0, 1) or B not in (0, 1):
        raise ProtocolError("inputs must be bits")
    if Z not in (1, 2):
        raise ProtocolError(f"Z must be in {{1,2}}, got {Z}")
    sess, own = _session(session, mode, pad)
    use = sess.use((1, 2), 3, Z * (1 - A) % 3, Z * (1 - B) % 3)
    if own:
        sess.close()
    return ProtocolRun(name, _as_matrix([A, B]), CommonRandomness({"Z": Z}), [use], 2, decoder, sess)


def qs2_and_new_bad_decode(A: int, B: int, Z: int, **kw) -> ProtocolRun:
    """Negative control: decodes AND = 1 on output 1 instead of 0."""
    return qs2_and_new(A, B, Z, decoder=lambda ys: (int(ys[0] == 1),), name="broken-qs2-and-decode", **kw)


def _randomness(Z, d: int, K: int, check=True) -> CommonRandomness:
    cr = Z if isinstance(Z, CommonRandomness) else CommonRandomness(_normalise_sum_comp(Z, K))
    if check:
        check_sum_randomness(d, K, cr.components)
    return cr


def _normalise_sum_comp(Z, K):
    if isinstance(Z, dict):
        return Z
    if K % 2 == 0:
        return {"Z": tuple(int(z) for z in Z)}
    raise ProtocolError("odd-K masks must be given as {'Z0': ..., 'Z': ...}")


def qsk_sum_even(d: int, K: int, W, Z, session=None, mode=SimMode.ABSTRACT, pad=False,
                 check=True, name="qsk-sum") -> ProtocolRun:
    """Even-K sum: users paired (1,2),(3,4),..., each pair sends one masked partial sum."""
    if K < 2 or K % 2:
        raise ProtocolError(f"qsk_sum_even needs an even K >= 2, got {K}")
    Wm = _as_matrix(W, K, 1)
    _check_alphabet(Wm, d)
    cr = _randomness(Z, d, K, check)
    sess, own = _session(session, mode, pad)
    uses = _sum_uses(sess, d, K, Wm, cr.components)
    if own:
        sess.close()
    return ProtocolRun(name, Wm, cr, uses, d, lambda ys: _sum_decode(d, K, ys), sess)


def broken_qsk_sum_even(d: int, K: int, W, Z=None, **kw) -> ProtocolRun:
    """Negative control: all pair masks forced to zero, so each output leaks a partial sum."""
    return qsk_sum_even(d, K, W, {"Z": (0,) * (K // 2)}, name="broken-qsk-sum", **kw)


def qsk_sum_odd(d: int, K: int, W, Z, session=None, mode=SimMode.ABSTRACT, pad=False) -> ProtocolRun:
    """Odd-K sum over two instances using K channel uses."""
    if K < 3 or K % 2 == 0:
        raise ProtocolError(f"qsk_sum_odd needs an odd K >= 3, got {K}")
    Wm = _as_matrix(W, K, 2)
    _check_alphabet(Wm, d)
    cr = Z if isinstance(Z, CommonRandomness) else CommonRandomness(dict(Z))
    check_sum_randomness(d, K, cr.components)
    sess, own = _session(session, mode, pad)
    uses = _sum_uses(sess, d, K, Wm, cr.components)
    if own:
        sess.close()
    return ProtocolRun("qsk-sum", Wm, cr, uses, d, lambda ys: _sum_decode(d, K, ys), sess)


def qsk_sum_single(d: int, W, session=None, mode=SimMode.ABSTRACT, pad=False) -> ProtocolRun:
    """K = 1: the lone user sends its symbol on one qudit."""
    Wm = _as_matrix(W, 1, 1)
    _check_alphabet(Wm, d)
    sess, own = _session(session, mode, pad)
    uses = _sum_uses(sess, d, 1, Wm, {})
    if own:
        sess.close()
    return ProtocolRun("qsk-sum", Wm, CommonRandomness({}), uses, d, lambda ys: _sum_decode(d, 1, ys), sess)


def _rng(randomness) -> tuple[np.random.Generator, int | None]:
    if isinstance(randomness, np.random.Generator):
        return randomness, None
    return np.random.default_rng(randomness), randomness


def qsk_sum(d: int, K: int, W, randomness=None, mode=SimMode.ABSTRACT, pad=False) -> list[ProtocolRun]:
    """Sum a stream of instances (``K x N`` data) in batches of :func:`batch_length`.

    All runs share one channel session, so in quantum mode same-pair uses of
    consecutive runs are realised together.
    """
    if K < 1:
        raise ProtocolError(f"K must be >= 1, got {K}")
    Wm = _as_matrix(W, K)
    L = batch_length(K)
    if Wm.shape[1] % L:
        raise ProtocolError(f"odd K={K} processes instances in pairs; got {Wm.shape[1]} instances")
    rng, seed = _rng(randomness)
    session = ChannelSession(mode, pad)
    runs = []
    for start in range(0, Wm.shape[1], L):
        block = Wm[:, start : start + L]
        if K == 1:
            runs.append(qsk_sum_single(d, block, session))
            continue
        cr = CommonRandomness(sample_sum_randomness(d, K, rng), seed)
        if K % 2 == 0:
            runs.append(qsk_sum_even(d, K, block, cr, session))
        else:
            runs.append(qsk_sum_odd(d, K, block, cr, session))
    session.close()
    return runs


def sample_prod_randomness(spec: FieldSpec, K: int, rng: np.random.Generator, seed=None) -> CommonRandomness:
    L = batch_length(K)
    p = algebra.bertrand_prime(K) if K >= 2 else None
    comp: dict = {}
    if p is not None:
        comp["R"] = tuple(int(v) for v in rng.integers(1, p, L))
        comp["phase1"] = sample_sum_randomness(p, K, rng)
        if spec.order > 2:
            comp["W_tilde"] = tuple(tuple(int(v) for v in row) for row in rng.integers(1, spec.order, (K, L)))
            comp["phase2"] = sample_sum_randomness(spec.order - 1, K, rng)
    return CommonRandomness(comp, seed)


def qsk_prod(spec: FieldSpec, K: int, W, randomness=None, session=None, mode=SimMode.ABSTRACT,
             pad=False, mask_zeros=True, name="qsk-prod") -> ProtocolRun:
    """Secure product over GF(d) in two phases.

    Phase I sums ``R * (1 - 1(W_k))`` over Z_p (p the smallest prime in (K, 2K))
    so that the output is zero iff every ``W_k`` is nonzero. Phase II sums
    discrete logs over Z_{d-1}, replacing the log of a zero input by that of a
    private uniform nonzero ``W~_k``; it is skipped for d = 2.
    ``mask_zeros=False`` is a negative control that sends log(1) for zeros.
    """
    L = batch_length(K)
    Wm = _as_matrix(W, K, L)
    _check_alphabet(Wm, spec.order)
    d = spec.order
    labels = lambda u: str(spec.element(u))  # noqa: E731
    if isinstance(randomness, CommonRandomness):
        cr = randomness
    else:
        rng, seed = _rng(randomness)
        cr = sample_prod_randomness(spec, K, rng, seed)
    sess, own = _session(session, mode, pad)
    if K < 2:
        uses = _sum_uses(sess, d, 1, Wm, {})
        if own:
            sess.close()
        return ProtocolRun(name, Wm, cr, uses, d, lambda ys: (ys[0],), sess, labels)

    p = algebra.bertrand_prime(K)
    R = np.array(cr["R"], dtype=np.int64)
    if R.shape != (L,) or R.min() < 1 or R.max() >= p:
        raise ProtocolError(f"R must hold {L} value(s) in Z_{p} \\ {{0}}")
    check_sum_randomness(p, K, cr["phase1"])
    zero = Wm == 0
    u = zero.astype(np.int64)
    uses1 = _sum_uses(sess, p, K, (R[None, :] * u) % p, cr["phase1"])
    n1 = len(uses1)
    uses2: list[ChannelUse] = []
    if d > 2:
        Wt = np.array(cr["W_tilde"], dtype=np.int64) if mask_zeros else np.ones_like(Wm)
        _check_alphabet(Wt, d, "W_tilde")
        if (Wt == 0).any():
            raise ProtocolError("W_tilde entries must be nonzero")
        check_sum_randomness(d - 1, K, cr["phase2"])
        w = np.where(zero, spec.log[Wt], spec.log[Wm])
        uses2 = _sum_uses(sess, d - 1, K, w, cr["phase2"])
    if own:
        sess.close()

    def decode(ys):
        s1 = _sum_decode(p, K, ys[:n1])
        s2 = _sum_decode(d - 1, K, ys[n1:]) if d > 2 else (0,) * L
        return tuple(0 if s1[l] else (1 if d == 2 else int(spec.exp[s2[l]])) for l in range(L))

    return ProtocolRun(name, Wm, cr, uses1 + uses2, d, decode, sess, labels)


def qsk_and(K: int, W, randomness=None, **kw) -> ProtocolRun:
    """K-user AND as the product over GF(2)."""
    return qsk_prod(algebra.build_field(2, 1), K, W, randomness, name="qsk-and", **kw)


DOT_A_MAP = (1, 6, 2, 0)
DOT_B_MAP = (3, 2, 8, 4)
DOT_R_VALUES = (1, 3, 4, 5, 9)
DOT_S1 = frozenset({2, 6, 7, 8, 10})
DOT_S0 = frozenset({1, 3, 4, 5, 9})


def _bits(v) -> tuple[int, int]:
    if isinstance(v, str):
        v = [int(c) for c in v]
    if len(v) != 2 or any(b not in (0, 1) for b in v):
        raise ProtocolError(f"expected two bits, got {v!r}")
    return int(v[0]), int(v[1])


def _dot_decode(ys):
    y = ys[0]
    if y in DOT_S1:
        return (1,)
    if y in DOT_S0:
        return (0,)
    raise ProtocolError(f"dot-product output {y} is unreachable")


def dot_product_demo(A, B, R: int, session=None, mode=SimMode.ABSTRACT, pad=False) -> ProtocolRun:
    """Expand-and-randomize F_2 dot product of two 2-bit vectors via one use over Z_11."""
    a1, a2 = _bits(A)
    b1, b2 = _bits(B)
    if R not in DOT_R_VALUES:
        raise ProtocolError(f"R must be one of {DOT_R_VALUES}")
    sess, own = _session(session, mode, pad)
    use = sess.use((1, 2), 11, R * DOT_A_MAP[2 * a1 + a2] % 11, R * DOT_B_MAP[2 * b1 + b2] % 11)
    if own:
        sess.close()
    data = np.array([[2 * a1 + a2], [2 * b1 + b2]], dtype=np.int64)
    return ProtocolRun(
        "dot-demo", data, CommonRandomness({"R": R}), [use], 2, _dot_decode, sess, lambda v: format(v, "02b"), str
    )


# -- scheme objects: parameters bound, spaces enumerable ------------------------


class Scheme:
    """A protocol with fixed parameters, as seen by the verifier and the CLI.

    ``data_shape`` is ``(K, L)``; data points are ``K x L`` arrays over
    ``range(alphabet)``; each run computes ``L`` instances and ``truth``
    returns the expected ``F`` per instance.
    """

    name: ClassVar[str]
    negative_control: ClassVar[bool] = False
    K: int
    L: int
    alphabet: int
    ref_dim: int

    def params(self) -> dict:
        raise NotImplementedError

    def data_space(self) -> Iterator[np.ndarray]:
        K, L = self.data_shape
        for flat in itertools.product(range(self.alphabet), repeat=K * L):
            yield np.array(flat, dtype=np.int64).reshape(K, L)

    @property
    def data_shape(self) -> tuple[int, int]:
        return self.K, self.L

    @property
    def data_size(self) -> int:
        return self.alphabet ** (self.K * self.L)

    def randomness_space(self) -> Iterator[CommonRandomness]:
        raise NotImplementedError

    def randomness_size(self) -> int:
        raise NotImplementedError

    def sample_data(self, rng: np.random.Generator) -> np.ndarray:
        return rng.integers(0, self.alphabet, self.data_shape)

    def sample_randomness(self, rng: np.random.Generator) -> CommonRandomness:
        raise NotImplementedError

    def run(self, W, randomness: CommonRandomness, **kw) -> ProtocolRun:
        raise NotImplementedError

    def truth(self, W) -> tuple:
        raise NotImplementedError

    def paper_ledger(self) -> CostLedger:
        """Cost of one run in one-qudit-per-use accounting."""
        raise NotImplementedError

    def paper_rate(self) -> float:
        return ledger_rate(self.paper_ledger(), self.L, self.ref_dim)

    def label(self, v: int) -> str:
        return str(v)

    def output_label(self, v: int) -> str:
        return self.label(v)


class QS2AndCited(Scheme):
    name = "qs2-and-cited"
    K, L, alphabet, ref_dim = 2, 1, 2, 2

    def params(self):
        return {}

    def randomness_space(self):
        return (CommonRandomness({"Z": z}) for z in (1, 2, 3))

    def randomness_size(self):
        return 3

    def sample_randomness(self, rng):
        return CommonRandomness({"Z": int(rng.integers(1, 4))})

    def run(self, W, randomness, **kw):
        return qs2_and_cited(int(W[0, 0]), int(W[1, 0]), randomness["Z"], **kw)

    def truth(self, W):
        return (int(W[0, 0] and W[1, 0]),)

    def paper_ledger(self):
        return CostLedger({2: 2})


class QS2AndNew(QS2AndCited):
    name = "qs2-and-new"

    def randomness_space(self):
        return (CommonRandomness({"Z": z}) for z in (1, 2))

    def randomness_size(self):
        return 2

    def sample_randomness(self, rng):
        return CommonRandomness({"Z": int(rng.integers(1, 3))})

    def run(self, W, randomness, **kw):
        return qs2_and_new(int(W[0, 0]), int(W[1, 0]), randomness["Z"], **kw)

    def paper_ledger(self):
        return CostLedger({3: 1})


class QS2AndBadDecode(QS2AndNew):
    name = "broken-qs2-and-decode"
    negative_control = True

    def run(self, W, randomness, **kw):
        return qs2_and_new_bad_decode(int(W[0, 0]), int(W[1, 0]), randomness["Z"], **kw)


class QSKSum(Scheme):
    name = "qsk-sum"

    def __init__(self, d: int, K: int):
        if d < 2:
            raise ProtocolError(f"d must be >= 2, got {d}")
        if K < 1:
            raise ProtocolError(f"K must be >= 1, got {K}")
        self.d, self.K = d, K
        self.L = batch_length(K)
        self.alphabet = self.ref_dim = d

    def params(self):
        return {"d": self.d, "K": self.K}

    def randomness_space(self):
        return (CommonRandomness(c) for c in sum_randomness_space(self.d, self.K))

    def randomness_size(self):
        return self.d ** _sum_free_vars(self.K)

    def sample_randomness(self, rng):
        return CommonRandomness(sample_sum_randomness(self.d, self.K, rng))

    def run(self, W, randomness, **kw):
        if self.K == 1:
            return qsk_sum_single(self.d, W, **kw)
        if self.K % 2 == 0:
            return qsk_sum_even(self.d, self.K, W, randomness, **kw)
        return qsk_sum_odd(self.d, self.K, W, randomness, **kw)

    def truth(self, W):
        return tuple(int(v) for v in np.asarray(W).sum(axis=0) % self.d)

    def paper_ledger(self):
        return CostLedger({self.d: _sum_use_count(self.K)})


class BrokenQSKSum(QSKSum):
    """Even-K sum with every mask forced to zero."""

    name = "broken-qsk-sum"
    negative_control = True

    def __init__(self, d: int, K: int):
        if K < 2 or K % 2:
            raise ProtocolError("broken-qsk-sum is defined for even K >= 2")
        super().__init__(d, K)

    def randomness_space(self):
        return iter([CommonRandomness({"Z": (0,) * (self.K // 2)})])

    def randomness_size(self):
        return 1

    def sample_randomness(self, rng):
        return next(self.randomness_space())

    def run(self, W, randomness, **kw):
        return broken_qsk_sum_even(self.d, self.K, W, **kw)


class QSKProd(Scheme):
    name = "qsk-prod"
    mask_zeros = True

    def __init__(self, p: int, r: int, K: int):
        if K < 2:
            raise ProtocolError(f"qsk-prod verification needs K >= 2, got {K}")
        self.spec = algebra.build_field(p, r)
        self.K = K
        self.L = batch_length(K)
        self.alphabet = self.ref_dim = self.spec.order
        self.prime = algebra.bertrand_prime(K)

    def params(self):
        return {"p": self.spec.p, "r": self.spec.r, "d": self.spec.order, "K": self.K, "bertrand_prime": self.prime}

    def _parts(self):
        d, K, L, p = self.spec.order, self.K, self.L, self.prime
        parts = [
            [("R", tuple(r)) for r in itertools.product(range(1, p), repeat=L)],
            [("phase1", c) for c in sum_randomness_space(p, K)],
        ]
        if d > 2:
            parts.append(
                [
                    ("W_tilde", tuple(tuple(wt[k * L : (k + 1) * L]) for k in range(K)))
                    for wt in itertools.product(range(1, d), repeat=K * L)
                ]
            )
            parts.append([("phase2", c) for c in sum_randomness_space(d - 1, K)])
        return parts

    def randomness_space(self):
        for combo in itertools.product(*self._parts()):
            yield CommonRandomness(dict(combo))

    def randomness_size(self):
        d, K, L, p = self.spec.order, self.K, self.L, self.prime
        n = (p - 1) ** L * p ** _sum_free_vars(K)
        if d > 2:
            n *= (d - 1) ** (K * L) * (d - 1) ** _sum_free_vars(K)
        return n

    def sample_randomness(self, rng):
        return sample_prod_randomness(self.spec, self.K, rng)

    def run(self, W, randomness, **kw):
        return qsk_prod(self.spec, self.K, W, randomness, mask_zeros=self.mask_zeros, name=self.name, **kw)

    def truth(self, W):
        out = []
        for col in np.asarray(W).T:
            acc = 1
            for w in col:
                acc = self.spec.mul(acc, int(w))
            out.append(acc)
        return tuple(out)

    def paper_ledger(self):
        uses = _sum_use_count(self.K)
        led = CostLedger({self.prime: uses})
        if self.spec.order > 2:
            led.charge(self.spec.order - 1, uses)
        return led

    def label(self, v):
        return str(self.spec.element(v))

    def lower_bound(self) -> float:
        """Guaranteed achievable rate (2/K) / (log_d(2K-1) + log_d(d-1))."""
        return ledger_rate(self._bound_ledger(), self.L, self.ref_dim)

    def _bound_ledger(self) -> CostLedger:
        uses = _sum_use_count(self.K)
        led = CostLedger({2 * self.K - 1: uses})
        if self.spec.order > 2:
            led.charge(self.spec.order - 1, uses)
        return led


class QSKAnd(QSKProd):
    name = "qsk-and"

    def __init__(self, K: int):
        super().__init__(2, 1, K)

    def params(self):
        return {"d": 2, "K": self.K, "bertrand_prime": self.prime}


class UnmaskedQSKProd(QSKProd):
    """Product scheme whose users send log(1) for zero inputs instead of a masked log."""

    name = "broken-qsk-prod"
    negative_control = True
    mask_zeros = False

    def __init__(self, p: int, r: int, K: int):
        super().__init__(p, r, K)
        if self.spec.order <= 2:
            raise ProtocolError("the unmasked variant needs d > 2 (there is no phase II at d = 2)")

    def _parts(self):
        parts = super()._parts()
        parts[2] = [("W_tilde", None)]
        return parts

    def randomness_size(self):
        d = self.spec.order
        return super().randomness_size() // (d - 1) ** (self.K * self.L)


class DotProductDemo(Scheme):
    name = "dot-demo"
    K, L, alphabet, ref_dim = 2, 1, 4, 2

    def params(self):
        return {}

    def data_space(self):
        for a in range(4):
            for b in range(4):
                yield np.array([[a], [b]], dtype=np.int64)

    def randomness_space(self):
        return (CommonRandomness({"R": r}) for r in DOT_R_VALUES)

    def randomness_size(self):
        return len(DOT_R_VALUES)

    def sample_randomness(self, rng):
        return CommonRandomness({"R": int(rng.choice(DOT_R_VALUES))})

    def run(self, W, randomness, **kw):
        a, b = int(W[0, 0]), int(W[1, 0])
        return dot_product_demo((a >> 1, a & 1), (b >> 1, b & 1), randomness["R"], **kw)

    def truth(self, W):
        a, b = int(W[0, 0]), int(W[1, 0])
        return (((a >> 1) * (b >> 1) + (a & 1) * (b & 1)) % 2,)

    def paper_ledger(self):
        return CostLedger({11: 1})

    def label(self, v):
        return format(v, "02b")

    def output_label(self, v):
        return str(v)


SCHEMES: dict[str, type[Scheme]] = {
    cls.name: cls
    for cls in (QS2AndCited, QS2AndNew, QSKSum, QSKProd, QSKAnd, DotProductDemo, BrokenQSKSum, QS2AndBadDecode, UnmaskedQSKProd)
}
