"""Trusted dealer: session parameters, correlated randomness, randomness audit.

For every qualifying survivor set U1 (|U1| >= U) the dealer ramp-shares the
mask sum ``sum_{k in U1} S_k`` together with T fresh noise symbols ``N^U1``
through a |U1| x U Cauchy matrix. User k receives its own mask S_k plus its
share of every qualifying set that contains it.

The dealer works in the *working field*: the base field itself when B == 1,
otherwise the degree-B extension obtained by grouping B base symbols. Values
handed to users are always base-field symbols.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field as dc_field
from fractions import Fraction
from functools import cached_property, lru_cache
from itertools import combinations
from math import comb
from typing import Optional

import numpy as np

from .errors import FormatError, InfeasibleError, ParameterError
from .field import FieldSpec, extension, group_array, make_field, smallest_field, ungroup_array
from .linear import Registry, VariableBundle
from .matrix import Matrix, canonical_cauchy, matmul, rank_of

MAX_USERS = 20

CANONICAL = "canonical"
STRUCTURED = "structured"
_SCHEMES = (CANONICAL, STRUCTURED)


def mask_of(users) -> int:
    return sum(1 << (k - 1) for k in users)


def users_of(mask: int) -> frozenset[int]:
    return frozenset(i + 1 for i in range(mask.bit_length()) if mask >> i & 1)


def fmt_set(users) -> str:
    return "{" + ",".join(str(k) for k in sorted(users)) + "}"


@dataclass(frozen=True)
class SessionParams:
    """(K, U, T) over ``field`` with grouping factor B and input length L.

    ``L`` defaults to ``B * (U - T)``, the shortest length the scheme supports.
    """

    K: int
    U: int
    T: int
    field: FieldSpec
    B: int = 1
    L: Optional[int] = None
    allow_large: bool = dc_field(default=False, compare=False)

    def __post_init__(self):
        K, U, T, B = self.K, self.U, self.T, self.B
        if K < 2:
            raise ParameterError(f"need K >= 2 users, got K={K}")
        if not 1 <= U <= K - 1:
            raise ParameterError(f"response threshold must satisfy 1 <= U <= K-1, got U={U}, K={K}")
        if T < 0:
            raise ParameterError(f"collusion threshold must be >= 0, got T={T}")
        if U <= T:
            raise InfeasibleError(
                f"U={U} <= T={T}: the optimal rate region is empty, "
                "correctness and security cannot hold together"
            )
        if T > K - 2:
            raise ParameterError(f"collusion threshold must satisfy T <= K-2, got T={T}, K={K}")
        if K > MAX_USERS and not self.allow_large:
            raise ParameterError(f"K={K} exceeds {MAX_USERS}; enumeration of survivor sets explodes (use allow_large)")
        if B < 1:
            raise ParameterError(f"grouping factor must be >= 1, got B={B}")
        if self.field.q**B < K + U:
            raise ParameterError(
                f"working field too small: q^B = {self.field.q}^{B} < K+U = {K + U}; "
                f"increase B or use a field with q >= {K + U}"
            )
        if self.L is None:
            object.__setattr__(self, "L", B * (U - T))
        if self.L <= 0 or self.L % ((U - T) * B):
            raise ParameterError(f"L={self.L} must be a positive multiple of (U-T)*B = {(U - T) * B}")

    @classmethod
    def smallest(cls, K: int, U: int, T: int, **kw) -> "SessionParams":
        """Parameters over the smallest field with q >= K + U and B = 1."""
        p, m = smallest_field(K + U)
        return cls(K, U, T, make_field(p, m), **kw)

    @property
    def work(self) -> FieldSpec:
        return extension(self.field, self.B)

    @property
    def Lbar(self) -> int:
        """Input length in working-field symbols."""
        return self.L // self.B

    @property
    def blocks(self) -> int:
        """Independent copies of the length-(U-T) scheme."""
        return self.Lbar // (self.U - self.T)

    @property
    def L_Y(self) -> int:
        """Second-round message length in base-field symbols."""
        return self.L // (self.U - self.T)

    @property
    def users(self) -> range:
        return range(1, self.K + 1)

    @cached_property
    def qualifying_sets(self) -> tuple[frozenset[int], ...]:
        out = []
        for size in range(self.U, self.K + 1):
            out.extend(frozenset(c) for c in combinations(self.users, size))
        return tuple(out)

    @property
    def shares_per_user(self) -> int:
        return sum(comb(self.K - 1, u) for u in range(self.U - 1, self.K))

    def describe(self) -> str:
        return f"K={self.K} U={self.U} T={self.T} field={self.field!r} B={self.B} L={self.L}"


@dataclass(frozen=True)
class SeedSet:
    """Raw dealer seeds in base-field symbols."""

    S: dict[int, tuple[int, ...]]
    N: dict[frozenset, tuple[int, ...]]


@dataclass(frozen=True)
class UserRandomness:
    """Z_k: the user's mask S_k and its share of every qualifying set containing k."""

    k: int
    S: tuple[int, ...]
    shares: dict[frozenset, tuple[int, ...]]


@dataclass(frozen=True, eq=False)
class DealerRep:
    """Linear representation of every dealt quantity over the session registry.

    Rows are over the working field; ``S[k]`` is Lbar x s and
    ``shares[k][U1]`` is blocks x s.
    """

    registry: Registry
    S: dict
    shares: dict

    @cached_property
    def layout(self) -> tuple[np.ndarray, dict]:
        """All rows stacked, and (k, U1 or None) -> row slice."""
        blocks, where, pos = [], {}, 0
        for k in sorted(self.S):
            for key, rows in [(None, self.S[k])] + sorted(self.shares[k].items(), key=lambda kv: _set_key(kv[0])):
                blocks.append(rows)
                where[(k, key)] = slice(pos, pos + rows.shape[0])
                pos += rows.shape[0]
        return np.vstack(blocks), where

    def Z(self, k: int) -> np.ndarray:
        parts = [self.S[k]] + [self.shares[k][u1] for u1 in sorted(self.shares[k], key=_set_key)]
        return np.vstack(parts)


def _set_key(s) -> tuple:
    return (len(s), tuple(sorted(s)))


@dataclass(eq=False)
class DealerOutput:
    params: SessionParams
    users: dict[int, UserRandomness]
    session_id: int
    scheme: str = CANONICAL
    noise: bool = True
    reuse: Optional[tuple[int, int]] = None
    consumed: bool = dc_field(default=False, repr=False)

    @property
    def rep(self) -> DealerRep:
        return representation(self.params, self.scheme, self.noise, self.reuse)

    def __getitem__(self, k: int) -> UserRandomness:
        return self.users[k]

    def to_bytes(self) -> bytes:
        return dump_dealer_output(self)


def session_registry(params: SessionParams) -> Registry:
    """Ground symbols in order: all W, then all S, then all N coordinates."""
    reg = Registry(params.work)
    for k in params.users:
        for l in range(params.Lbar):
            reg.add(("W", k, l))
    for k in params.users:
        for l in range(params.Lbar):
            reg.add(("S", k, l))
    if params.T:
        for u1 in params.qualifying_sets:
            for t in range(params.T):
                for j in range(params.blocks):
                    reg.add(("N", mask_of(u1), t, j))
    return reg.seal()


def encoding_matrix(params: SessionParams, n: int, scheme: str = CANONICAL) -> Matrix:
    """The n x U precoding matrix applied to [sum S ; N] for a survivor set of size n."""
    if scheme == CANONICAL:
        return canonical_cauchy(params.work, n, params.U)
    if scheme == STRUCTURED:
        _check_structured(params)
        if n == 2:
            return Matrix.identity(params.work, 2)
        return Matrix(params.work, [[1, 0], [1, 1], [0, 1]])
    raise ParameterError(f"unknown scheme {scheme!r}")


def _check_structured(params: SessionParams):
    if (params.K, params.U, params.T, params.L) != (3, 2, 0, 2):
        raise ParameterError(f"the structured scheme is defined only for K=3, U=2, T=0, L=2; got {params.describe()}")


@lru_cache(maxsize=64)
def representation(
    params: SessionParams, scheme: str = CANONICAL, noise: bool = True, reuse: Optional[tuple[int, int]] = None
) -> DealerRep:
    reg = session_registry(params)
    f = params.work
    s = len(reg)
    width = params.U - params.T

    S = {}
    for k in params.users:
        rows = np.zeros((params.Lbar, s), dtype=f.dtype)
        for l in range(params.Lbar):
            rows[l, reg.index(("S", k, l))] = 1
        S[k] = rows
    if reuse is not None:
        src, dst = reuse
        S[dst] = S[src].copy()

    shares: dict[int, dict] = {k: {} for k in params.users}
    for u1 in params.qualifying_sets:
        members = sorted(u1)
        M = encoding_matrix(params, len(members), scheme)
        total = np.zeros((params.Lbar, s), dtype=f.dtype)
        for k in members:
            total = f.vadd(total, S[k])
        per_block = []
        for j in range(params.blocks):
            v = np.zeros((params.U, s), dtype=f.dtype)
            v[:width] = total[j * width : (j + 1) * width]
            if noise:
                for t in range(params.T):
                    v[width + t, reg.index(("N", mask_of(u1), t, j))] = 1
            per_block.append(matmul(f, M.data, v))
        for r, k in enumerate(members):
            shares[k][u1] = np.vstack([blk[r : r + 1] for blk in per_block])
    return DealerRep(reg, S, shares)


def deal(
    params: SessionParams,
    rng: np.random.Generator,
    *,
    scheme: str = CANONICAL,
    noise: bool = True,
    reuse: Optional[tuple[int, int]] = None,
) -> tuple[SeedSet, DealerOutput]:
    """Sample seeds and hand every user its correlated randomness Z_k.

    ``noise=False`` and ``reuse=(i, j)`` (user j silently gets S_i) build
    deliberately broken dealers for negative-control experiments.
    """
    if scheme not in _SCHEMES:
        raise ParameterError(f"unknown scheme {scheme!r}")
    if scheme == STRUCTURED:
        _check_structured(params)
    if reuse is not None:
        reuse = tuple(int(x) for x in reuse)
        if reuse[0] == reuse[1] or not all(k in params.users for k in reuse):
            raise ParameterError(f"reuse must name two distinct users, got {reuse}")
    rep = representation(params, scheme, noise, reuse)
    reg = rep.registry
    f = params.work

    seed_idx = reg.indices(lambda sym: sym[0] != "W")
    assignment = np.zeros(len(reg), dtype=f.dtype)
    assignment[seed_idx] = f.random(rng, len(seed_idx))
    session_id = int(rng.integers(0, 2**63))

    stacked, where = rep.layout
    values = VariableBundle("_", reg, stacked).evaluate(assignment)

    def base(k, key) -> tuple[int, ...]:
        return tuple(int(x) for x in ungroup_array(params.field, values[where[(k, key)]], params.B))

    users = {}
    for k in params.users:
        users[k] = UserRandomness(k, base(k, None), {u1: base(k, u1) for u1 in rep.shares[k]})

    s_seed = {k: users[k].S for k in params.users}
    n_seed = {}
    for u1 in params.qualifying_sets:
        if params.T:
            idx = [reg.index(("N", mask_of(u1), t, j)) for t in range(params.T) for j in range(params.blocks)]
            vals = assignment[idx] if noise else np.zeros(len(idx), dtype=f.dtype)
            n_seed[u1] = tuple(int(x) for x in ungroup_array(params.field, vals, params.B))
        else:
            n_seed[u1] = ()
    out = DealerOutput(params, users, session_id, scheme, noise, reuse)
    return SeedSet(s_seed, n_seed), out


def deal_structured_k3(params: SessionParams, rng: np.random.Generator) -> tuple[SeedSet, DealerOutput]:
    """K=3, U=2, T=0 deal with identity / [[1,0],[1,1],[0,1]] precoders.

    Correlating the shares lowers H(Z_1) and H(Z_3) to 2L while keeping the
    scheme correct and secure.
    """
    _check_structured(params)
    return deal(params, rng, scheme=STRUCTURED)


# -- randomness audit --------------------------------------------------------------


@dataclass(frozen=True)
class RandomnessReport:
    """Entropies in base-field q-ary units and normalised by L."""

    L: int
    per_user: dict[int, int]
    total: int

    @property
    def per_user_rate(self) -> dict[int, Fraction]:
        return {k: Fraction(h, self.L) for k, h in self.per_user.items()}

    @property
    def total_rate(self) -> Fraction:
        return Fraction(self.total, self.L)

    def lines(self) -> list[str]:
        out = [f"H(Z_{k}) = {h} symbols, H(Z_{k})/L = {self.per_user_rate[k]}" for k, h in self.per_user.items()]
        out.append(f"H(Z_1..Z_K) = {self.total} symbols, /L = {self.total_rate}")
        return out


def randomness_report(output: DealerOutput) -> RandomnessReport:
    """Entropy of each Z_k and of all of them, as ranks of their linear maps."""
    params = output.params
    rep = output.rep
    f = params.work
    per_user = {k: rank_of(f, rep.Z(k)) * params.B for k in params.users}
    total = rank_of(f, np.vstack([rep.Z(k) for k in params.users])) * params.B
    return RandomnessReport(params.L, per_user, total)


# -- binary file format ------------------------------------------------------------

_MAGIC = b"SAGD"
_VERSION = 1
_HEADER = struct.Struct("<4sHHHHIHHIBBBBQ")
_USER = struct.Struct("<HI")
_SHARE = struct.Struct("<Q")


def dump_dealer_output(out: DealerOutput) -> bytes:
    p = out.params
    f = p.field
    src, dst = out.reuse or (0, 0)
    chunks = [
        _HEADER.pack(
            _MAGIC, _VERSION, p.K, p.U, p.T, f.p, f.m, p.B, p.L,
            _SCHEMES.index(out.scheme), 0 if out.noise else 1, src, dst, out.session_id,
        )
    ]
    for k in p.users:
        z = out.users[k]
        chunks.append(struct.pack("<H", k))
        chunks.append(f.encode_vector(z.S))
        chunks.append(struct.pack("<I", len(z.shares)))
        for u1 in sorted(z.shares, key=_set_key):
            chunks.append(_SHARE.pack(mask_of(u1)))
            chunks.append(f.encode_vector(z.shares[u1]))
    return b"".join(chunks)


def load_dealer_output(data: bytes) -> DealerOutput:
    if len(data) < _HEADER.size:
        raise FormatError("dealer file truncated")
    (magic, version, K, U, T, p, m, B, L, scheme, flags, src, dst, session_id) = _HEADER.unpack_from(data)
    if magic != _MAGIC:
        raise FormatError("not a dealer output file")
    if version != _VERSION:
        raise FormatError(f"unsupported dealer file version {version}")
    if scheme >= len(_SCHEMES):
        raise FormatError(f"unknown scheme tag {scheme}")
    params = SessionParams(K, U, T, make_field(p, m), B, L, allow_large=True)
    f = params.field
    w = f.element_bytes
    pos = _HEADER.size
    users = {}
    try:
        for _ in range(K):
            (k,) = struct.unpack_from("<H", data, pos)
            pos += 2
            S = f.decode_vector(data[pos : pos + params.L * w], params.L)
            pos += params.L * w
            (count,) = struct.unpack_from("<I", data, pos)
            pos += 4
            shares = {}
            for _ in range(count):
                (bits,) = _SHARE.unpack_from(data, pos)
                pos += _SHARE.size
                shares[users_of(bits)] = f.decode_vector(data[pos : pos + params.L_Y * w], params.L_Y)
                pos += params.L_Y * w
            users[k] = UserRandomness(k, S, shares)
    except struct.error as exc:
        raise FormatError(f"dealer file truncated: {exc}") from None
    if pos != len(data):
        raise FormatError(f"{len(data) - pos} trailing bytes in dealer file")
    if sorted(users) != list(params.users):
        raise FormatError("dealer file does not list every user exactly once")
    reuse = (src, dst) if src else None
    return DealerOutput(params, users, session_id, _SCHEMES[scheme], not flags & 1, reuse)


def working_values(params: SessionParams, base_values) -> np.ndarray:
    """Base-field vector -> working-field vector."""
    return group_array(params.field, np.asarray(base_values, dtype=np.int64), params.B)
