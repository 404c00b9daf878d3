import itertools

import pytest


def poly_mul_ref(a, b, f, p):
    """Schoolbook product of coefficient lists (low degree first) reduced mod monic f."""
    r = len(f) - 1
    prod = [0] * (2 * r)
    for i, x in enumerate(a):
        for j, y in enumerate(b):
            prod[i + j] = (prod[i + j] + x * y) % p
    for k in range(len(prod) - 1, r - 1, -1):
        c = prod[k]
        if c:
            for i in range(r + 1):
                prod[k - r + i] = (prod[k - r + i] - c * f[i]) % p
    return tuple(prod[:r])


def coeffs_of(u, p, r):
    return tuple((u // p**i) % p for i in range(r))


def index_of(c, p):
    return sum(v * p**i for i, v in enumerate(c))


@pytest.fixture
def all_pairs():
    def gen(n):
        return itertools.product(range(n), repeat=2)

    return gen
