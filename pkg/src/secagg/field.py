"""Exact arithmetic in GF(p^m).

Elements are canonical integers in ``[0, q)``: the polynomial
``c_0 + c_1 x + ... + c_{m-1} x^{m-1}`` is stored as ``sum(c_i * p**i)``.
Every operation exists in a scalar form (Python ints) and a vectorised form
(``v``-prefixed, numpy arrays) so that the matrix and analyzer code can work
on whole rows at once.

Grouping ``B`` consecutive base-field symbols into one symbol of
GF(p^(mB)) uses the same digit packing, which makes the map an additive
isomorphism: coordinate-wise sums over the base field and sums in the
extension field agree.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from functools import cached_property, lru_cache
from typing import Iterable, Sequence

import numpy as np

from .errors import FieldError

MAX_Q = 2**32
TABLE_LIMIT = 2**16


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    i = 3
    while i * i <= n:
        if n % i == 0:
            return False
        i += 2
    return True


# -- polynomials over GF(p), coefficient lists low -> high ---------------------


def _trim(a: list[int]) -> list[int]:
    while a and a[-1] == 0:
        a.pop()
    return a


def poly_mod(a: Sequence[int], f: Sequence[int], p: int) -> list[int]:
    a = _trim(list(a))
    f = _trim(list(f))
    lead_inv = pow(f[-1], p - 2, p)
    df = len(f) - 1
    while len(a) - 1 >= df and a:
        c = a[-1] * lead_inv % p
        shift = len(a) - 1 - df
        for i, fc in enumerate(f):
            a[shift + i] = (a[shift + i] - c * fc) % p
        _trim(a)
    return a


def poly_mul(a: Sequence[int], b: Sequence[int], p: int) -> list[int]:
    if not a or not b:
        return []
    out = [0] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b):
                out[i + j] = (out[i + j] + x * y) % p
    return _trim(out)


def poly_sub(a: Sequence[int], b: Sequence[int], p: int) -> list[int]:
    n = max(len(a), len(b))
    out = [((a[i] if i < len(a) else 0) - (b[i] if i < len(b) else 0)) % p for i in range(n)]
    return _trim(out)


def poly_gcd(a: Sequence[int], b: Sequence[int], p: int) -> list[int]:
    a, b = _trim(list(a)), _trim(list(b))
    while b:
        a, b = b, poly_mod(a, b, p)
    return a


def _poly_powmod_x(exponent: int, f: Sequence[int], p: int) -> list[int]:
    result, base = [1], [0, 1]
    while exponent:
        if exponent & 1:
            result = poly_mod(poly_mul(result, base, p), f, p)
        base = poly_mod(poly_mul(base, base, p), f, p)
        exponent >>= 1
    return result


def _prime_factors(n: int) -> list[int]:
    out, d = [], 2
    while d * d <= n:
        if n % d == 0:
            out.append(d)
            while n % d == 0:
                n //= d
        d += 1
    if n > 1:
        out.append(n)
    return out


def is_irreducible(f: Sequence[int], p: int) -> bool:
    """Rabin's test for a monic polynomial ``f`` (low -> high) over GF(p)."""
    m = len(f) - 1
    if m < 1:
        return False
    if m == 1:
        return True
    if poly_sub(_poly_powmod_x(p**m, f, p), [0, 1], p):
        return False
    for r in _prime_factors(m):
        h = poly_sub(_poly_powmod_x(p ** (m // r), f, p), [0, 1], p)
        if len(poly_gcd(f, h, p)) != 1:
            return False
    return True


def lowest_irreducible(p: int, m: int) -> tuple[int, ...]:
    """Lexicographically smallest monic irreducible of degree ``m``.

    Ordering compares coefficients from x^(m-1) down to the constant term,
    which coincides with the integer order of the base-p packing.
    """
    for tail in range(p**m):
        coeffs = [(tail // p**i) % p for i in range(m)] + [1]
        if coeffs[0] == 0:
            continue
        if is_irreducible(coeffs, p):
            return tuple(coeffs)
    raise FieldError(f"no irreducible polynomial of degree {m} over GF({p})")  # unreachable


# -- the field -------------------------------------------------------------------


@dataclass(frozen=True)
class FieldSpec:
    """GF(p^m) with a fixed modulus; immutable and shareable."""

    p: int
    m: int
    modulus_poly: tuple[int, ...] = ()
    q: int = dc_field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "q", self.p**self.m)

    def __repr__(self):
        return f"GF({self.p}^{self.m})" if self.m > 1 else f"GF({self.p})"

    # -- element encoding

    @property
    def is_prime_field(self) -> bool:
        return self.m == 1

    @property
    def dtype(self):
        return np.int64 if self.q <= 2**31 else object

    @property
    def element_bytes(self) -> int:
        return ((self.q - 1).bit_length() + 7) // 8

    def digits(self, a: int) -> list[int]:
        return [(a // self.p**i) % self.p for i in range(self.m)]

    def from_digits(self, ds: Iterable[int]) -> int:
        return sum((d % self.p) * self.p**i for i, d in enumerate(ds))

    def check(self, a: int) -> int:
        a = int(a)
        if not 0 <= a < self.q:
            raise FieldError(f"{a} is not an element of {self!r}")
        return a

    def elements(self) -> range:
        return range(self.q)

    def __call__(self, value: int) -> "FieldElement":
        return FieldElement(self, self.check(value))

    def encode(self, a: int) -> bytes:
        return self.check(a).to_bytes(self.element_bytes, "little")

    def decode(self, data: bytes) -> int:
        if len(data) != self.element_bytes:
            raise FieldError(f"expected {self.element_bytes} bytes, got {len(data)}")
        return self.check(int.from_bytes(data, "little"))

    def encode_vector(self, values: Iterable[int]) -> bytes:
        return b"".join(self.encode(v) for v in values)

    def decode_vector(self, data: bytes, n: int) -> tuple[int, ...]:
        w = self.element_bytes
        if len(data) != n * w:
            raise FieldError(f"expected {n * w} bytes, got {len(data)}")
        return tuple(self.decode(data[i * w : (i + 1) * w]) for i in range(n))

    def random(self, rng: np.random.Generator, size) -> np.ndarray:
        out = rng.integers(0, self.q, size=size, dtype=np.int64)
        return out if self.dtype is np.int64 else out.astype(object)

    # -- scalar arithmetic

    def add(self, a: int, b: int) -> int:
        if self.m == 1:
            return (a + b) % self.p
        if self.p == 2:
            return a ^ b
        return self.from_digits(x + y for x, y in zip(self.digits(a), self.digits(b)))

    def neg(self, a: int) -> int:
        if self.m == 1:
            return (-a) % self.p
        if self.p == 2:
            return a
        return self.from_digits(-x for x in self.digits(a))

    def sub(self, a: int, b: int) -> int:
        return self.add(a, self.neg(b))

    def mul(self, a: int, b: int) -> int:
        if self.m == 1:
            return a * b % self.p
        if a == 0 or b == 0:
            return 0
        if self._tables is not None:
            exp, log = self._tables
            return int(exp[(int(log[a]) + int(log[b])) % (self.q - 1)])
        return self._poly_mul(a, b)

    def inv(self, a: int) -> int:
        if a == 0:
            raise ZeroDivisionError(f"0 has no inverse in {self!r}")
        if self.m == 1:
            return pow(a, self.p - 2, self.p)
        if self._tables is not None:
            exp, log = self._tables
            return int(exp[(-int(log[a])) % (self.q - 1)])
        return self.pow(a, self.q - 2)

    def div(self, a: int, b: int) -> int:
        return self.mul(a, self.inv(b))

    def pow(self, a: int, e: int) -> int:
        result = 1
        while e:
            if e & 1:
                result = self.mul(result, a)
            a = self.mul(a, a)
            e >>= 1
        return result

    def _poly_mul(self, a: int, b: int) -> int:
        prod = poly_mul(self.digits(a), self.digits(b), self.p)
        return self.from_digits(poly_mod(prod, self.modulus_poly, self.p))

    @cached_property
    def _tables(self):
        """(exp, log) tables for extension fields up to TABLE_LIMIT elements."""
        if self.m == 1 or self.q > TABLE_LIMIT:
            return None
        n = self.q - 1
        factors = _prime_factors(n)
        for g in range(2, self.q):
            # g generates the multiplicative group iff g^(n/r) != 1 for all r | n
            if all(self._poly_pow(g, n // r) != 1 for r in factors):
                break
        exp = np.zeros(2 * n, dtype=np.int64)
        log = np.zeros(self.q, dtype=np.int64)
        x = 1
        for i in range(n):
            exp[i] = x
            log[x] = i
            x = self._poly_mul(x, g)
        exp[n:] = exp[:n]
        return exp, log

    def _poly_pow(self, a: int, e: int) -> int:
        result = 1
        while e:
            if e & 1:
                result = self._poly_mul(result, a)
            a = self._poly_mul(a, a)
            e >>= 1
        return result

    # -- vectorised arithmetic

    def asarray(self, values) -> np.ndarray:
        return np.asarray(values, dtype=self.dtype)

    def vadd(self, x, y) -> np.ndarray:
        x, y = self.asarray(x), self.asarray(y)
        if self.m == 1:
            return (x + y) % self.p
        if self.p == 2:
            return np.bitwise_xor(x, y)
        return self._digitwise(x, y, 1)

    def vsub(self, x, y) -> np.ndarray:
        x, y = self.asarray(x), self.asarray(y)
        if self.m == 1:
            return (x - y) % self.p
        if self.p == 2:
            return np.bitwise_xor(x, y)
        return self._digitwise(x, y, -1)

    def vneg(self, x) -> np.ndarray:
        x = self.asarray(x)
        if self.m == 1:
            return (-x) % self.p
        if self.p == 2:
            return x.copy()
        return self._digitwise(np.zeros_like(x), x, -1)

    def _digitwise(self, x, y, sign: int) -> np.ndarray:
        x, y = np.broadcast_arrays(x, y)
        out = np.zeros(x.shape, dtype=self.dtype)
        for i in range(self.m):
            w = self.p**i
            d = ((x // w) % self.p + sign * ((y // w) % self.p)) % self.p
            out = out + d * w
        return out

    def vmul(self, x, y) -> np.ndarray:
        x, y = self.asarray(x), self.asarray(y)
        if self.m == 1:
            return (x * y) % self.p
        if self._tables is not None:
            exp, log = self._tables
            x, y = np.broadcast_arrays(x, y)
            out = exp[(log[x] + log[y]) % (self.q - 1)]
            out[(x == 0) | (y == 0)] = 0
            return out
        return np.frompyfunc(self.mul, 2, 1)(x, y).astype(self.dtype)

    def vinv(self, x) -> np.ndarray:
        x = self.asarray(x)
        if np.any(x == 0):
            raise ZeroDivisionError(f"0 has no inverse in {self!r}")
        if self._tables is not None:
            exp, log = self._tables
            return exp[(-log[x]) % (self.q - 1)]
        return np.frompyfunc(self.inv, 1, 1)(x).astype(self.dtype)

    def vsum(self, x, axis=0) -> np.ndarray:
        """Field sum along ``axis``."""
        x = self.asarray(x)
        if self.m == 1:
            return x.sum(axis=axis) % self.p if self.dtype is np.int64 else np.sum(x, axis=axis) % self.p
        x = np.moveaxis(x, axis, 0)
        acc = np.zeros(x.shape[1:], dtype=self.dtype)
        for row in x:
            acc = self.vadd(acc, row)
        return acc


class FieldElement:
    """A single element bound to its field; convenient for interactive use."""

    __slots__ = ("field", "value")

    def __init__(self, field: FieldSpec, value: int):
        self.field = field
        self.value = field.check(value)

    def _coerce(self, other) -> int:
        if isinstance(other, FieldElement):
            if other.field != self.field:
                raise FieldError("mixing elements of different fields")
            return other.value
        return self.field.check(other)

    def __add__(self, other):
        return FieldElement(self.field, self.field.add(self.value, self._coerce(other)))

    __radd__ = __add__

    def __sub__(self, other):
        return FieldElement(self.field, self.field.sub(self.value, self._coerce(other)))

    def __rsub__(self, other):
        return FieldElement(self.field, self.field.sub(self._coerce(other), self.value))

    def __mul__(self, other):
        return FieldElement(self.field, self.field.mul(self.value, self._coerce(other)))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return FieldElement(self.field, self.field.div(self.value, self._coerce(other)))

    def __neg__(self):
        return FieldElement(self.field, self.field.neg(self.value))

    def inverse(self) -> "FieldElement":
        return FieldElement(self.field, self.field.inv(self.value))

    def __eq__(self, other):
        if isinstance(other, FieldElement):
            return self.field == other.field and self.value == other.value
        if isinstance(other, int):
            return self.value == other
        return NotImplemented

    def __hash__(self):
        return hash((self.field, self.value))

    def __int__(self):
        return self.value

    def __repr__(self):
        return f"{self.value}@{self.field!r}"

    def to_bytes(self) -> bytes:
        return self.field.encode(self.value)


def make_field(p: int, m: int = 1) -> FieldSpec:
    """Build GF(p^m) with the lowest-lexicographic monic irreducible modulus."""
    return _make_field(int(p), int(m))


@lru_cache(maxsize=None)
def _make_field(p: int, m: int) -> FieldSpec:
    if not is_prime(p):
        raise FieldError(f"{p} is not prime")
    if m < 1:
        raise FieldError(f"extension degree must be >= 1, got {m}")
    if p**m > MAX_Q:
        raise FieldError(f"{p}^{m} exceeds the supported field size 2^32")
    modulus = lowest_irreducible(p, m) if m > 1 else ()
    return FieldSpec(p, m, modulus)


def smallest_field(n: int) -> tuple[int, int]:
    """(p, m) of the smallest prime power q >= n."""
    q = max(n, 2)
    while True:
        for p in range(2, q + 1):
            if is_prime(p):
                m = round(math.log(q, p))
                if p**m == q:
                    return p, m
        q += 1


def grouping_factor(field: FieldSpec, n: int) -> int:
    """Smallest B with q^B >= n."""
    b = 1
    while field.q**b < n:
        b += 1
    return b


# -- grouping into the degree-B extension -----------------------------------------


def extension(field: FieldSpec, B: int) -> FieldSpec:
    """GF(p^(mB)); the field itself when B == 1."""
    if B < 1:
        raise FieldError(f"block size must be >= 1, got {B}")
    return field if B == 1 else make_field(field.p, field.m * B)


@dataclass(frozen=True)
class GroupedElement:
    """B base-field symbols viewed as one element of the degree-B extension."""

    parts: tuple[int, ...]
    base: FieldSpec

    def __post_init__(self):
        if len(self.parts) < 1:
            raise FieldError("a grouped element needs at least one part")
        for a in self.parts:
            self.base.check(a)

    @property
    def B(self) -> int:
        return len(self.parts)

    @property
    def value(self) -> int:
        """Canonical integer in the extension field."""
        return sum(a * self.base.q**i for i, a in enumerate(self.parts))

    @classmethod
    def from_value(cls, value: int, base: FieldSpec, B: int) -> "GroupedElement":
        return cls(tuple((value // base.q**i) % base.q for i in range(B)), base)

    def __add__(self, other: "GroupedElement") -> "GroupedElement":
        if other.base != self.base or other.B != self.B:
            raise FieldError("grouped elements from different fields")
        return GroupedElement(tuple(self.base.add(a, b) for a, b in zip(self.parts, other.parts)), self.base)


def group_embed(field: FieldSpec, v: Sequence[int], B: int) -> list[GroupedElement]:
    if B < 1:
        raise FieldError(f"block size must be >= 1, got {B}")
    if len(v) % B:
        raise FieldError(f"length {len(v)} is not divisible by block size {B}")
    return [GroupedElement(tuple(int(a) for a in v[i : i + B]), field) for i in range(0, len(v), B)]


def ungroup(groups: Sequence[GroupedElement]) -> list[int]:
    return [a for g in groups for a in g.parts]


def group_array(field: FieldSpec, arr, B: int) -> np.ndarray:
    """Pack the last axis of ``arr`` (length n*B) into n extension-field ints."""
    arr = np.asarray(arr, dtype=np.int64)
    if B == 1:
        return arr.astype(field.dtype)
    if arr.shape[-1] % B:
        raise FieldError(f"length {arr.shape[-1]} is not divisible by block size {B}")
    weights = np.array([field.q**i for i in range(B)], dtype=np.int64)
    blocks = arr.reshape(arr.shape[:-1] + (arr.shape[-1] // B, B))
    return (blocks * weights).sum(axis=-1).astype(extension(field, B).dtype)


def ungroup_array(field: FieldSpec, arr, B: int) -> np.ndarray:
    """Inverse of :func:`group_array`."""
    arr = np.asarray(arr, dtype=np.int64)
    if B == 1:
        return arr.astype(field.dtype)
    parts = [(arr // field.q**i) % field.q for i in range(B)]
    out = np.stack(parts, axis=-1)
    return out.reshape(arr.shape[:-1] + (arr.shape[-1] * B,)).astype(field.dtype)
