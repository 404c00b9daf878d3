"""Modular rings, small finite fields GF(p^r), and the discrete-log isomorphism.

Field elements are stored internally as integers ``sum(c_i * p**i)`` over their
coefficient vector ``(c_0, ..., c_{r-1})``; :class:`FieldElement` wraps that
index together with its :class:`FieldSpec` for the public API.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import product

import numpy as np

DEFAULT_FIELD_LIMIT = 4096

_TERM = re.compile(r"(?P<c>\d+)?(?P<x>x(?:\^(?P<e>\d+))?)?")


class AlgebraError(ValueError):
    pass


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    f = 3
    while f * f <= n:
        if n % f == 0:
            return False
        f += 2
    return True


def prime_factors(n: int) -> list[int]:
    out = []
    f = 2
    while f * f <= n:
        if n % f == 0:
            out.append(f)
            while n % f == 0:
                n //= f
        f += 1
    if n > 1:
        out.append(n)
    return out


def bertrand_prime(K: int) -> int:
    """Smallest prime strictly between ``K`` and ``2K``."""
    if K < 2:
        raise AlgebraError(f"bertrand_prime needs K >= 2, got {K}")
    for p in range(K + 1, 2 * K):
        if is_prime(p):
            return p
    raise AssertionError(f"no prime in ({K}, {2 * K})")  # pragma: no cover


@dataclass(frozen=True)
class ZmodElement:
    value: int
    modulus: int

    def __post_init__(self):
        if self.modulus < 1:  # Z_1 is the log group of GF(2)
            raise AlgebraError(f"modulus must be >= 1, got {self.modulus}")
        if not 0 <= self.value < self.modulus:
            raise AlgebraError(f"{self.value} not in Z_{self.modulus}")

    @classmethod
    def of(cls, value: int, modulus: int) -> "ZmodElement":
        return cls(value % modulus, modulus)

    def _check(self, other: "ZmodElement") -> None:
        if other.modulus != self.modulus:
            raise AlgebraError(f"modulus mismatch: {self.modulus} vs {other.modulus}")

    def __add__(self, other: "ZmodElement") -> "ZmodElement":
        self._check(other)
        return ZmodElement((self.value + other.value) % self.modulus, self.modulus)

    def __sub__(self, other: "ZmodElement") -> "ZmodElement":
        self._check(other)
        return ZmodElement((self.value - other.value) % self.modulus, self.modulus)

    def __neg__(self) -> "ZmodElement":
        return ZmodElement(-self.value % self.modulus, self.modulus)

    def __int__(self) -> int:
        return self.value


# -- polynomial helpers over Z_p, coefficient tuples lowest degree first --


def _poly_mulmod(a: tuple[int, ...], b: tuple[int, ...], f: tuple[int, ...], p: int) -> tuple[int, ...]:
    r = len(f) - 1
    prod = [0] * (2 * r - 1 if r > 0 else 1)
    for i, ai in enumerate(a):
        if ai:
            for j, bj in enumerate(b):
                prod[i + j] = (prod[i + j] + ai * bj) % p
    # f is monic
    for deg in range(len(prod) - 1, r - 1, -1):
        c = prod[deg]
        if c:
            for k in range(r + 1):
                prod[deg - r + k] = (prod[deg - r + k] - c * f[k]) % p
    return tuple(prod[:r])


def _poly_rem(a: list[int], b: tuple[int, ...], p: int) -> list[int]:
    """Remainder of ``a`` modulo the monic polynomial ``b``."""
    a = list(a)
    db = len(b) - 1
    for deg in range(len(a) - 1, db - 1, -1):
        c = a[deg]
        if c:
            for k in range(db + 1):
                a[deg - db + k] = (a[deg - db + k] - c * b[k]) % p
    return a[:db]


def is_irreducible(f: tuple[int, ...], p: int) -> bool:
    """Trial division by every monic polynomial of degree 1..deg(f)//2."""
    r = len(f) - 1
    if r < 1 or f[-1] != 1:
        return False
    if r == 1:
        return True
    for deg in range(1, r // 2 + 1):
        for low in product(range(p), repeat=deg):
            g = tuple(low) + (1,)
            if not any(_poly_rem(list(f), g, p)):
                return False
    return True


def smallest_irreducible(p: int, r: int) -> tuple[int, ...]:
    """Monic irreducible of degree r, smallest under ``sum(c_i p^i)`` order."""
    if r == 1:
        return (0, 1)
    for code in range(p**r):
        low = tuple((code // p**i) % p for i in range(r))
        f = low + (1,)
        if is_irreducible(f, p):
            return f
    raise AssertionError(f"no irreducible polynomial of degree {r} over Z_{p}")  # pragma: no cover


@dataclass(frozen=True, eq=False)
class FieldSpec:
    """GF(p^r) with a fixed irreducible modulus, generator and dlog table.

    ``exp[e]`` is the index of ``g**e`` for ``e`` in ``[0, d-1)``; ``log[u]`` is
    the discrete log of the nonzero element with index ``u`` (``log[0] == -1``).
    """

    p: int
    r: int
    poly: tuple[int, ...]
    generator: int
    exp: np.ndarray = field(repr=False)
    log: np.ndarray = field(repr=False)
    digits: np.ndarray = field(repr=False)

    @property
    def order(self) -> int:
        return self.p**self.r

    @property
    def d(self) -> int:
        return self.p**self.r

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FieldSpec):
            return NotImplemented
        return (self.p, self.r, self.poly, self.generator) == (other.p, other.r, other.poly, other.generator)

    def __hash__(self) -> int:
        return hash((self.p, self.r, self.poly, self.generator))

    # index-level arithmetic, used by the protocols and the enumerators

    def coeffs(self, u: int) -> tuple[int, ...]:
        return tuple(int(c) for c in self.digits[u])

    def from_coeffs(self, coeffs) -> int:
        coeffs = tuple(int(c) for c in coeffs)
        if len(coeffs) != self.r or any(not 0 <= c < self.p for c in coeffs):
            raise AlgebraError(f"bad coefficient vector {coeffs} for GF({self.p}^{self.r})")
        return sum(c * self.p**i for i, c in enumerate(coeffs))

    def _check(self, u: int) -> int:
        u = int(u)
        if not 0 <= u < self.order:
            raise AlgebraError(f"{u} is not an element index of GF({self.order})")
        return u

    def add(self, a: int, b: int) -> int:
        a, b = self._check(a), self._check(b)
        s = (self.digits[a] + self.digits[b]) % self.p
        return int(s @ self._weights)

    def neg(self, a: int) -> int:
        a = self._check(a)
        return int(((-self.digits[a]) % self.p) @ self._weights)

    def mul(self, a: int, b: int) -> int:
        a, b = self._check(a), self._check(b)
        if a == 0 or b == 0:
            return 0
        return int(self.exp[(self.log[a] + self.log[b]) % (self.order - 1)])

    def inv(self, a: int) -> int:
        a = self._check(a)
        if a == 0:
            raise ZeroDivisionError("inverse of zero field element")
        return int(self.exp[(-self.log[a]) % (self.order - 1)])

    def dlog(self, u: int) -> int:
        u = self._check(u)
        if u == 0:
            raise AlgebraError("discrete log of zero")
        return int(self.log[u])

    def dlog_inverse(self, e: int) -> int:
        e = int(e)
        if not 0 <= e < self.order - 1:
            raise AlgebraError(f"exponent {e} outside Z_{self.order - 1}")
        return int(self.exp[e])

    @property
    def _weights(self) -> np.ndarray:
        return self.p ** np.arange(self.r, dtype=np.int64)

    def element(self, value) -> "FieldElement":
        if isinstance(value, FieldElement):
            if value.spec != self:
                raise AlgebraError("field element belongs to a different field")
            return value
        if isinstance(value, (tuple, list)):
            return FieldElement(self.from_coeffs(value), self)
        if isinstance(value, str):
            return FieldElement(self.from_coeffs(self._parse(value)), self)
        return FieldElement(self._check(value), self)

    def _parse(self, text: str) -> list[int]:
        """Coefficients of a polynomial string such as ``2x^2+x+1``."""
        coeffs = [0] * self.r
        body = text.replace(" ", "")
        if not body:
            raise AlgebraError("empty polynomial string")
        for term in body.split("+"):
            m = _TERM.fullmatch(term)
            if m is None or not (m["c"] or m["x"]):
                raise AlgebraError(f"cannot parse term {term!r} of {text!r}")
            c = int(m["c"]) if m["c"] else 1
            deg = 0 if not m["x"] else int(m["e"] or 1)
            if deg >= self.r:
                raise AlgebraError(f"degree {deg} term in GF({self.p}^{self.r})")
            coeffs[deg] = (coeffs[deg] + c) % self.p
        return coeffs

    def elements(self) -> list["FieldElement"]:
        return [FieldElement(u, self) for u in range(self.order)]


@dataclass(frozen=True)
class FieldElement:
    index: int
    spec: FieldSpec = field(repr=False)

    @property
    def coefficients(self) -> tuple[int, ...]:
        return self.spec.coeffs(self.index)

    def _other(self, other) -> int:
        if isinstance(other, FieldElement):
            if other.spec != self.spec:
                raise AlgebraError("field mismatch")
            return other.index
        raise TypeError(f"cannot combine FieldElement with {type(other).__name__}")

    def __add__(self, other):
        return FieldElement(self.spec.add(self.index, self._other(other)), self.spec)

    def __sub__(self, other):
        return FieldElement(self.spec.add(self.index, self.spec.neg(self._other(other))), self.spec)

    def __mul__(self, other):
        return FieldElement(self.spec.mul(self.index, self._other(other)), self.spec)

    def __neg__(self):
        return FieldElement(self.spec.neg(self.index), self.spec)

    def inverse(self) -> "FieldElement":
        return FieldElement(self.spec.inv(self.index), self.spec)

    def __bool__(self) -> bool:
        return self.index != 0

    def __int__(self) -> int:
        return self.index

    def __str__(self) -> str:
        terms = []
        for i, c in reversed(list(enumerate(self.coefficients))):
            if not c:
                continue
            mono = "1" if i == 0 else ("x" if i == 1 else f"x^{i}")
            terms.append(mono if c == 1 and i else (str(c) if i == 0 else f"{c}{mono}"))
        return "+".join(terms) or "0"


def _element_order(u: tuple[int, ...], one: tuple[int, ...], f, p, n: int) -> bool:
    """True iff ``u`` generates the cyclic group of order ``n``."""

    def power(base, e):
        acc = one
        while e:
            if e & 1:
                acc = _poly_mulmod(acc, base, f, p)
            base = _poly_mulmod(base, base, f, p)
            e >>= 1
        return acc

    return all(power(u, n // q) != one for q in prime_factors(n)) if n > 1 else u == one


@lru_cache(maxsize=None)
def _build_field(p: int, r: int) -> FieldSpec:
    f = smallest_irreducible(p, r)
    d = p**r
    one = (1,) + (0,) * (r - 1)
    elems = [tuple((u // p**i) % p for i in range(r)) for u in range(d)]
    gen = next(u for u in range(1, d) if _element_order(elems[u], one, f, p, d - 1))
    exp = np.zeros(max(d - 1, 1), dtype=np.int64)
    log = np.full(d, -1, dtype=np.int64)
    cur = one
    for e in range(d - 1):
        idx = sum(c * p**i for i, c in enumerate(cur))
        exp[e] = idx
        log[idx] = e
        cur = _poly_mulmod(cur, elems[gen], f, p)
    digits = np.array(elems, dtype=np.int64).reshape(d, r)
    for arr in (exp, log, digits):
        arr.setflags(write=False)
    return FieldSpec(p=p, r=r, poly=f, generator=gen, exp=exp, log=log, digits=digits)


def build_field(p: int, r: int = 1, limit: int = DEFAULT_FIELD_LIMIT) -> FieldSpec:
    if not is_prime(p):
        raise AlgebraError(f"characteristic {p} is not prime")
    if r < 1:
        raise AlgebraError(f"extension degree must be >= 1, got {r}")
    if p**r > limit:
        raise AlgebraError(f"field order {p}^{r} exceeds limit {limit}")
    return _build_field(p, r)


def field_for_order(d: int, limit: int = DEFAULT_FIELD_LIMIT) -> FieldSpec:
    """The field of order ``d``, which must be a prime power."""
    if d < 2:
        raise AlgebraError(f"no field of order {d}")
    factors = prime_factors(d)
    if len(factors) != 1:
        raise AlgebraError(f"{d} is not a prime power")
    p = factors[0]
    r = 0
    n = d
    while n > 1:
        n //= p
        r += 1
    return build_field(p, r, limit)


def field_add(a: FieldElement, b: FieldElement) -> FieldElement:
    return a + b


def field_mul(a: FieldElement, b: FieldElement) -> FieldElement:
    return a * b


def field_neg(a: FieldElement) -> FieldElement:
    return -a


def field_inv(a: FieldElement) -> FieldElement:
    return a.inverse()


def dlog(spec: FieldSpec, u: FieldElement | int) -> ZmodElement:
    idx = u.index if isinstance(u, FieldElement) else int(u)
    return ZmodElement(spec.dlog(idx), spec.order - 1)


def dlog_inverse(spec: FieldSpec, e: ZmodElement | int) -> FieldElement:
    if isinstance(e, ZmodElement):
        if e.modulus != spec.order - 1:
            raise AlgebraError(f"exponent lives in Z_{e.modulus}, expected Z_{spec.order - 1}")
        e = e.value
    return FieldElement(spec.dlog_inverse(e), spec)


def indicator(w) -> int:
    if isinstance(w, FieldElement):
        return int(w.index != 0)
    return int(int(w) != 0)
