"""Smallest-prime-factor sieve, deterministic primality, and factorization.

The sieve is built once (lazily) as an immutable numpy table and shared by
everything else in the package; the bound can be set through
``set_sieve_bound`` or the ``SUBFIB_SIEVE_BOUND`` environment variable
before first use.
"""

import os
from math import gcd, isqrt

import numpy as np

DEFAULT_SIEVE_BOUND = 10**7

# Deterministic Miller-Rabin witnesses, valid for all n < 3.3e24
# (covers the full 63-bit term range with room to spare).
_MR_WITNESSES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)
_MR_DETERMINISTIC_BOUND = 3317044064679887385961981


class FactorSieve:
    """Immutable table mapping n -> smallest prime factor of n, for n < bound."""

    def __init__(self, bound: int):
        if bound < 4:
            raise ValueError(f"sieve bound must be at least 4, got {bound}")
        self.bound = int(bound)
        table = np.zeros(self.bound, dtype=np.uint32)
        table[2::2] = 2
        for i in range(3, isqrt(self.bound) + 1, 2):
            if table[i] == 0:
                chunk = table[i * i :: 2 * i]
                chunk[chunk == 0] = i
        remaining = np.nonzero(table == 0)[0]
        table[remaining] = remaining  # odd primes above sqrt(bound); also 0, 1
        table.flags.writeable = False
        self.table = table
        primes = np.nonzero(table == np.arange(self.bound, dtype=np.uint32))[0]
        self.primes = primes[primes >= 2].astype(np.int64)
        self.primes.flags.writeable = False

    def spf(self, n: int) -> int:
        return int(self.table[n])

    def is_prime_below_bound(self, n: int) -> bool:
        return n >= 2 and int(self.table[n]) == n


_sieve: FactorSieve | None = None


def set_sieve_bound(bound: int) -> None:
    """Rebuild the shared sieve with a new bound (drops the old table)."""
    global _sieve
    _sieve = FactorSieve(bound)


def get_sieve() -> FactorSieve:
    global _sieve
    if _sieve is None:
        bound = int(os.environ.get("SUBFIB_SIEVE_BOUND", DEFAULT_SIEVE_BOUND))
        _sieve = FactorSieve(bound)
    return _sieve


def is_prime(n: int) -> bool:
    """Primality test: sieve lookup below the bound, Miller-Rabin above it.

    Deterministic for n < 3.3e24; above that the same witness set is used
    and the answer is (overwhelmingly) probable rather than proven.
    """
    if n < 2:
        return False
    sieve = get_sieve()
    if n < sieve.bound:
        return sieve.is_prime_below_bound(n)
    if n % 2 == 0:
        return False
    d = n - 1
    r = 0
    while d % 2 == 0:
        d //= 2
        r += 1
    for a in _MR_WITNESSES:
        x = pow(a, d, n)
        if x == 1 or x == n - 1:
            continue
        for _ in range(r - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def _pollard_rho(n: int) -> int:
    """One nontrivial factor of odd composite n (Brent's cycle-finding variant)."""
    if n % 2 == 0:
        return 2
    c = 1
    while True:
        x = y = 2
        d = 1
        q = 1
        ys = x
        m = 128
        while d == 1:
            x = y
            for _ in range(m):
                y = (y * y + c) % n
            k = 0
            while k < m and d == 1:
                ys = y
                lim = min(m, m - k)
                for _ in range(lim):
                    y = (y * y + c) % n
                    q = q * abs(x - y) % n
                k += lim
                d = gcd(q, n)
        if d == n:
            # backtrack one step at a time
            d = 1
            y = ys
            while d == 1:
                y = (y * y + c) % n
                d = gcd(abs(x - y), n)
        if d != n:
            return d
        c += 1  # rare: retry with a different polynomial


def factorize(n: int) -> dict[int, int]:
    """Full prime factorization {p: exponent} of n >= 1."""
    if n < 1:
        raise ValueError(f"factorize expects n >= 1, got {n}")
    factors: dict[int, int] = {}
    if n == 1:
        return factors
    sieve = get_sieve()
    stack = [n]
    while stack:
        m = stack.pop()
        if m == 1:
            continue
        if m < sieve.bound:
            while m > 1:
                p = sieve.spf(m)
                factors[p] = factors.get(p, 0) + 1
                m //= p
            continue
        if is_prime(m):
            factors[m] = factors.get(m, 0) + 1
            continue
        while m % 2 == 0:
            factors[2] = factors.get(2, 0) + 1
            m //= 2
        if m == 1:
            continue
        if is_prime(m):
            factors[m] = factors.get(m, 0) + 1
            continue
        d = _pollard_rho(m)
        stack.append(d)
        stack.append(m // d)
    return factors


def smallest_prime_factor(n: int) -> int:
    """Least prime dividing n; equals n itself exactly when n is prime."""
    if n < 2:
        raise ValueError(f"smallest_prime_factor requires n >= 2, got {n}")
    if n % 2 == 0:
        return 2
    sieve = get_sieve()
    if n < sieve.bound:
        return sieve.spf(n)
    if is_prime(n):
        return n
    return min(factorize(n))


def divisors(n: int) -> list[int]:
    """Sorted list of the positive divisors of n >= 1."""
    divs = [1]
    for p, e in factorize(n).items():
        divs = [d * p**i for d in divs for i in range(e + 1)]
    return sorted(divs)
