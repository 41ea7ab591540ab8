"""Prime-field arithmetic and Lagrange interpolation.

Values are plain Python ints (arbitrary precision). A polynomial is kept in
coefficient form, constant term first, so that evaluating it at a new counter
costs one Horner pass instead of a full Lagrange sum.
"""
from __future__ import annotations

import functools
import random
from dataclasses import dataclass
from typing import Iterable, Sequence, Tuple

__all__ = [
    "FieldError",
    "ZeroInverse",
    "NotPrime",
    "DuplicateAbscissa",
    "OutOfField",
    "FieldPoly",
    "is_probable_prime",
    "require_prime",
    "mod_inv",
    "lagrange_interpolate",
    "poly_eval",
]

MR_ROUNDS = 64

_SMALL_PRIMES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71)


class FieldError(ValueError):
    pass


class ZeroInverse(FieldError, ZeroDivisionError):
    pass


class NotPrime(FieldError):
    pass


class DuplicateAbscissa(FieldError):
    pass


class OutOfField(FieldError):
    pass


def is_probable_prime(n: int, rounds: int = MR_ROUNDS) -> bool:
    """Miller-Rabin test; a composite survives with probability <= 4**-rounds.

    Witnesses are drawn from a generator seeded with ``n`` so the verdict for
    a given modulus never changes between runs.
    """
    if n < 2:
        return False
    for q in _SMALL_PRIMES:
        if n % q == 0:
            return n == q
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    rng = random.Random(n)
    for _ in range(rounds):
        a = rng.randrange(2, n - 1)
        x = pow(a, d, n)
        if x == 1 or x == n - 1:
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


@functools.lru_cache(maxsize=64)
def require_prime(p: int) -> int:
    if not is_probable_prime(p):
        raise NotPrime(f"{p} is not prime")
    return p


def _egcd(a: int, b: int) -> Tuple[int, int, int]:
    # iterative: 256-bit inputs would blow the recursion budget of the textbook version
    old_r, r = a, b
    old_s, s = 1, 0
    old_t, t = 0, 1
    while r:
        q = old_r // r
        old_r, r = r, old_r - q * r
        old_s, s = s, old_s - q * s
        old_t, t = t, old_t - q * t
    return old_r, old_s, old_t


def mod_inv(a: int, p: int) -> int:
    """Multiplicative inverse of ``a`` modulo ``p`` via extended Euclid."""
    a %= p
    if a == 0:
        raise ZeroInverse(f"0 has no inverse modulo {p}")
    g, s, _ = _egcd(a, p)
    if g != 1:
        raise NotPrime(f"{a} and {p} share the factor {g}")
    return s % p


def _trim(coeffs: Iterable[int]) -> Tuple[int, ...]:
    out = list(coeffs)
    while out and out[-1] == 0:
        out.pop()
    return tuple(out)


@dataclass(frozen=True)
class FieldPoly:
    """Polynomial over GF(prime); ``coefficients[i]`` multiplies x**i.

    The zero polynomial has no coefficients.
    """

    coefficients: Tuple[int, ...]
    prime: int

    def __post_init__(self):
        require_prime(self.prime)
        coeffs = tuple(self.coefficients)
        for c in coeffs:
            if not 0 <= c < self.prime:
                raise OutOfField(f"coefficient {c} not in [0, {self.prime})")
        object.__setattr__(self, "coefficients", _trim(coeffs))

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    def __call__(self, x: int) -> int:
        return poly_eval(self, x)


def poly_eval(poly: FieldPoly, x: int) -> int:
    p = poly.prime
    x %= p
    acc = 0
    for c in reversed(poly.coefficients):
        acc = (acc * x + c) % p
    return acc


def lagrange_interpolate(points: Sequence[Tuple[int, int]], p: int) -> FieldPoly:
    """Return the unique polynomial of degree < len(points) through ``points``.

    Builds the master product M(x) = prod(x - x_j) once, then recovers each
    basis numerator M(x) / (x - x_i) by synthetic division, which keeps the
    whole construction at O(k^2) field operations.
    """
    require_prime(p)
    pts = [(int(x), int(y)) for x, y in points]
    if not pts:
        raise FieldError("at least one point is required")
    seen = set()
    for x, y in pts:
        if not (0 <= x < p and 0 <= y < p):
            raise OutOfField(f"point ({x}, {y}) outside GF({p})")
        if x in seen:
            raise DuplicateAbscissa(f"abscissa {x} appears twice")
        seen.add(x)

    k = len(pts)
    master = [1]
    for xj, _ in pts:
        # master *= (x - xj)
        nxt = [0] * (len(master) + 1)
        for i, c in enumerate(master):
            nxt[i] = (nxt[i] - xj * c) % p
            nxt[i + 1] = (nxt[i + 1] + c) % p
        master = nxt

    result = [0] * k
    for xi, yi in pts:
        # synthetic division of master by (x - xi), high degree first
        quotient = [0] * k
        carry = 0
        for deg in range(k, 0, -1):
            carry = (master[deg] + carry * xi) % p
            quotient[deg - 1] = carry
        denom = 1
        for xj, _ in pts:
            if xj != xi:
                denom = denom * (xi - xj) % p
        scale = yi * mod_inv(denom, p) % p
        for i in range(k):
            result[i] = (result[i] + scale * quotient[i]) % p
    return FieldPoly(tuple(result), p)
