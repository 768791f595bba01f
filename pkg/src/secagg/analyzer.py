"""Exact verification of correctness, security, rate and randomness claims.

All protocol variables are affine in i.i.d.-uniform ground symbols, so the
entropy of any bundle (in q-ary units) is the rank of its coefficient matrix
and conditional mutual information is a combination of four ranks. The
exhaustive oracle recomputes the same quantities from a full enumeration of
ground assignments; it exists only to defend the affine modelling step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from fractions import Fraction
from itertools import combinations
from typing import Iterable, Optional

import numpy as np

from .dealer import (
    STRUCTURED,
    DealerOutput,
    SessionParams,
    deal,
    fmt_set,
    mask_of,
    randomness_report,
    working_values,
)
from .errors import BudgetExceededError
from .field import make_field
from .linear import Registry, VariableBundle, join
from .matrix import rank_of
from .protocol import encode_round1, encode_round2
from .simulator import collusion_sets

ORACLE_BUDGET = 10**8


# -- rank-based information measures ---------------------------------------------


def entropy(bundle: VariableBundle) -> int:
    """H(bundle) in q-ary units of the bundle's field (constants are irrelevant)."""
    return rank_of(bundle.registry.field, bundle.coeffs)


def conditional_mi(A: VariableBundle, B: VariableBundle, C: Optional[VariableBundle] = None) -> int:
    """I(A; B | C) = r(AC) + r(BC) - r(ABC) - r(C)."""
    if C is None:
        C = VariableBundle.empty("C", A.registry)
    return (
        entropy(join("AC", A, C)) + entropy(join("BC", B, C)) - entropy(join("ABC", A, B, C)) - entropy(C)
    )


def _prime_registry(reg: Registry) -> Registry:
    twin = getattr(reg, "_prime_twin", None)
    if twin is None:
        f = reg.field
        twin = Registry(make_field(f.p), [(sym, d) for sym in reg.symbols for d in range(f.m)]).seal()
        reg._prime_twin = twin
    return twin


def prime_expansion(bundle: VariableBundle) -> VariableBundle:
    """Rewrite a bundle over GF(p^n) as n-times-larger bundle over GF(p).

    Each ground symbol splits into its n base-p digits and each row into the
    n digits of its value; multiplication by a coefficient c becomes the
    n x n GF(p) matrix of x -> c*x. Entropies come out in p-ary units.
    """
    f = bundle.registry.field
    n = f.m
    reg = _prime_registry(bundle.registry)
    r, s = bundle.coeffs.shape
    out = np.zeros((r, n, s, n), dtype=np.int64)
    for d in range(n):
        images = f.vmul(bundle.coeffs, f.p**d)  # c * e_d for every coefficient
        for i in range(n):
            out[:, i, :, d] = (np.asarray(images, dtype=np.int64) // f.p**i) % f.p
    consts = np.asarray(bundle.constants, dtype=np.int64)
    cdig = np.stack([(consts // f.p**i) % f.p for i in range(n)], axis=1).reshape(-1)
    return VariableBundle(bundle.name, reg, out.reshape(r * n, s * n), cdig)


def _base_units(params: SessionParams, A, B, C, granularity: str) -> Fraction:
    """I(A;B|C) in q-ary units of the *base* field."""
    if granularity == "working":
        return Fraction(conditional_mi(A, B, C) * params.B)
    mi_p = conditional_mi(prime_expansion(A), prime_expansion(B), prime_expansion(C))
    return Fraction(mi_p, params.field.m)


# -- exhaustive oracle -------------------------------------------------------------


def _histogram_entropy(counts: np.ndarray, total: int, q: int) -> Fraction | float:
    """Entropy in q-ary units from exact counts; exact when the law is uniform on its support."""
    c0 = int(counts[0])
    if np.all(counts == c0):
        e = round(math.log(c0, q)) if c0 > 1 else 0
        t = round(math.log(total, q))
        if q**e == c0 and q**t == total:
            return Fraction(t - e)
    n = counts.astype(np.float64)
    return float(math.log(total, q) - (n * np.log(n)).sum() / (total * math.log(q)))


class _Counter:
    def __init__(self):
        self.keys: list[np.ndarray] = []
        self.counts: list[np.ndarray] = []

    def add(self, values: np.ndarray, q: int):
        rows, n = values.shape
        if rows == 0:
            keys = np.zeros(n, dtype=np.int64)
        elif q**rows < 2**62:
            weights = np.array([q**i for i in range(rows)], dtype=np.int64)
            keys = (np.asarray(values, dtype=np.int64) * weights[:, None]).sum(axis=0)
        else:
            arr = np.ascontiguousarray(np.asarray(values, dtype=np.int64).T)
            keys = arr.view(np.dtype((np.void, arr.dtype.itemsize * rows))).reshape(-1)
        k, c = np.unique(keys, return_counts=True)
        self.keys.append(k)
        self.counts.append(c)

    def histogram(self) -> np.ndarray:
        keys = np.concatenate(self.keys)
        counts = np.concatenate(self.counts)
        _, inv = np.unique(keys, return_inverse=True)
        return np.bincount(inv.reshape(-1), weights=counts).astype(np.int64)


def exhaustive_mi_oracle(
    A: VariableBundle,
    B: VariableBundle,
    C: Optional[VariableBundle] = None,
    budget: int = ORACLE_BUDGET,
    chunk: int = 1 << 17,
) -> Fraction | float:
    """I(A; B | C) by enumerating every assignment of every ground symbol.

    Counts are exact integers. The result is an exact Fraction whenever each
    joint law is uniform on its support (always the case for affine families);
    otherwise a float is returned.
    """
    reg = A.registry
    f = reg.field
    if C is None:
        C = VariableBundle.empty("C", reg)
    s = len(reg)
    total = f.q**s
    if total > budget:
        raise BudgetExceededError(f"{f.q}^{s} = {total} ground states exceed the oracle budget {budget}")
    everything = join("ABC", A, B, C)
    a, b = len(A), len(B)
    rows = {
        "AC": np.r_[0:a, a + b : len(everything)],
        "BC": np.r_[a : len(everything)],
        "ABC": np.r_[0 : len(everything)],
        "C": np.r_[a + b : len(everything)],
    }
    counters = {name: _Counter() for name in rows}
    powers = np.array([f.q**i for i in range(s)], dtype=np.int64)
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total), dtype=np.int64)
        states = f.asarray((idx[None, :] // powers[:, None]) % f.q)
        values = everything.evaluate(states)
        for name, sel in rows.items():
            counters[name].add(values[sel], f.q)
    H = {name: _histogram_entropy(c.histogram(), total, f.q) for name, c in counters.items()}
    return H["AC"] + H["BC"] - H["ABC"] - H["C"]


# -- session model -----------------------------------------------------------------


class SessionModel:
    """Bundles for every protocol variable of one dealer output."""

    def __init__(self, output: DealerOutput):
        self.params = output.params
        self.output = output
        self.rep = output.rep
        self.registry = self.rep.registry

    def _sym(self, name: str, syms) -> VariableBundle:
        return VariableBundle.symbols(name, self.registry, list(syms))

    def W(self, k: int) -> VariableBundle:
        return self._sym(f"W_{k}", [("W", k, l) for l in range(self.params.Lbar)])

    def W_all(self) -> VariableBundle:
        return join("W", *(self.W(k) for k in self.params.users))

    def S(self, k: int) -> VariableBundle:
        return VariableBundle(f"S_{k}", self.registry, self.rep.S[k])

    def N(self, u1) -> VariableBundle:
        p = self.params
        syms = [("N", mask_of(u1), t, j) for t in range(p.T) for j in range(p.blocks)]
        return self._sym(f"N^{fmt_set(u1)}", syms) if syms else VariableBundle.empty("N", self.registry)

    def X(self, k: int) -> VariableBundle:
        w, s = self.W(k), self.S(k)
        f = self.registry.field
        return VariableBundle(f"X_{k}", self.registry, f.vadd(w.coeffs, s.coeffs))

    def Y(self, k: int, u1) -> VariableBundle:
        return VariableBundle(f"Y_{k}", self.registry, self.rep.shares[k][frozenset(u1)])

    def Z(self, k: int) -> VariableBundle:
        return VariableBundle(f"Z_{k}", self.registry, self.rep.Z(k))

    def _sum(self, name: str, parts: Iterable[VariableBundle]) -> VariableBundle:
        f = self.registry.field
        acc = np.zeros((self.params.Lbar, len(self.registry)), dtype=f.dtype)
        for b in parts:
            acc = f.vadd(acc, b.coeffs)
        return VariableBundle(name, self.registry, acc)

    def sum_W(self, u1) -> VariableBundle:
        return self._sum("sum W", (self.W(k) for k in sorted(u1)))

    def sum_S(self, u1) -> VariableBundle:
        return self._sum("sum S", (self.S(k) for k in sorted(u1)))

    def bundles(self, *parts: VariableBundle, name: str = "") -> VariableBundle:
        parts = [p for p in parts if len(p)]
        return join(name, *parts) if parts else VariableBundle.empty(name, self.registry)

    def security_bundles(self, u1, collusion) -> tuple[VariableBundle, VariableBundle, VariableBundle]:
        """(all inputs, full transcript for u1, sum over u1 plus colluders' (W, Z))."""
        users = self.params.users
        A = self.W_all()
        B = self.bundles(*(self.X(k) for k in users), *(self.Y(k, u1) for k in sorted(u1)), name="transcript")
        C = self.bundles(
            self.sum_W(u1), *(self.W(k) for k in sorted(collusion)), *(self.Z(k) for k in sorted(collusion)), name="given"
        )
        return A, B, C


# -- reports -----------------------------------------------------------------------


@dataclass(frozen=True)
class Check:
    check_id: str
    params: str
    expected: object
    got: object

    @property
    def passed(self) -> bool:
        return self.expected == self.got

    def line(self) -> str:
        return f"{self.check_id}\t{self.params}\texpected={self.expected}\tgot={self.got}\t{'PASS' if self.passed else 'FAIL'}"


@dataclass
class VerificationReport:
    checks: list[Check] = dc_field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def extend(self, other: "VerificationReport") -> "VerificationReport":
        self.checks.extend(other.checks)
        return self

    def to_text(self) -> str:
        return "\n".join(c.line() for c in self.checks) + "\n"


@dataclass(frozen=True)
class SecurityCase:
    u1: frozenset
    collusion: frozenset
    mi: Fraction


@dataclass
class SecurityReport:
    params: SessionParams
    cases: list[SecurityCase]
    granularity: str

    @property
    def ok(self) -> bool:
        return all(c.mi == 0 for c in self.cases)

    @property
    def violations(self) -> list[SecurityCase]:
        return [c for c in self.cases if c.mi != 0]

    def as_checks(self) -> VerificationReport:
        return VerificationReport(
            [
                Check("security", f"U1={fmt_set(c.u1)} T={fmt_set(c.collusion)} [{self.granularity}]", 0, c.mi)
                for c in self.cases
            ]
        )


def _granularity(params: SessionParams, granularity: str) -> str:
    if granularity == "auto":
        return "working" if params.B == 1 else "base"
    if granularity not in ("working", "base"):
        raise ValueError(f"unknown granularity {granularity!r}")
    return granularity


def verify_security(
    params: SessionParams,
    output: DealerOutput,
    *,
    cases: Optional[Iterable[tuple]] = None,
    granularity: str = "auto",
) -> SecurityReport:
    """I(W; transcript | sum, colluders) for every (U1, T-set); violations are reported, not raised."""
    if output.params != params:
        raise ValueError("dealer output belongs to different parameters")
    g = _granularity(params, granularity)
    model = SessionModel(output)
    if cases is None:
        cases = [(u1, c) for u1 in params.qualifying_sets for c in collusion_sets(params)]
    out = []
    for u1, coll in cases:
        A, B, C = model.security_bundles(u1, coll)
        out.append(SecurityCase(frozenset(u1), frozenset(coll), _base_units(params, A, B, C, g)))
    return SecurityReport(params, out, g)


@dataclass(frozen=True)
class RateReport:
    L_X: int
    L_Y: int
    L: int

    @property
    def R1(self) -> Fraction:
        return Fraction(self.L_X, self.L)

    @property
    def R2(self) -> Fraction:
        return Fraction(self.L_Y, self.L)


def verify_rates(params: SessionParams) -> tuple[RateReport, VerificationReport]:
    """Measure message lengths of a real session and compare with (1, 1/(U-T))."""
    _, out = deal(params, np.random.default_rng(0))
    u1 = frozenset(params.users)
    zero = (0,) * params.L
    r1 = encode_round1(params.field, zero, out[1])
    r2 = encode_round2(params, 1, u1, out[1])
    rates = RateReport(len(r1.X), len(r2.Y), params.L)
    desc = params.describe()
    checks = [
        Check("rate.R1", desc, Fraction(1), rates.R1),
        Check("rate.R2", desc, Fraction(1, params.U - params.T), rates.R2),
    ]
    return rates, VerificationReport(checks)


def verify_share_identities(params: SessionParams, output: DealerOutput) -> VerificationReport:
    """Rank-form identities for the colluders' randomness, in working-field symbols.

    e1: H(Z_T) = H(Z_T | S_T') = |T| (Lbar + blocks * sum_{u=U-1}^{K-1} C(K-1, u))
    e2: H(S_T' | Z_T) = |T'| Lbar
    e3: H(N^U1 | sum_U1 S, Z_T) = H(N^U1 | all S, Z_T) = blocks (T - |T & U1|)
    """
    model = SessionModel(output)
    p = params
    report = VerificationReport()
    per_user = p.Lbar + p.blocks * p.shares_per_user
    all_S = model.bundles(*(model.S(k) for k in p.users))
    for coll in collusion_sets(p):
        Z = model.bundles(*(model.Z(k) for k in sorted(coll)))
        hz = entropy(Z)
        rest = [k for k in p.users if k not in coll]
        report.checks.append(Check("identity.e1", f"T={fmt_set(coll)}", len(coll) * per_user, hz))
        for size in range(len(rest) + 1):
            for tp in combinations(rest, size):
                Sp = model.bundles(*(model.S(k) for k in tp))
                hs = entropy(Sp)
                joint = entropy(model.bundles(Z, Sp))
                tag = f"T={fmt_set(coll)} T'={fmt_set(tp)}"
                report.checks.append(Check("identity.e1|S", tag, len(coll) * per_user, joint - hs))
                report.checks.append(Check("identity.e2", tag, len(tp) * p.Lbar, joint - hz))
        for u1 in p.qualifying_sets:
            N = model.N(u1)
            expected = p.blocks * (p.T - len(coll & u1))
            given_sum = model.bundles(model.sum_S(u1), Z)
            given_all = model.bundles(all_S, Z)
            tag = f"U1={fmt_set(u1)} T={fmt_set(coll)}"
            report.checks.append(
                Check("identity.e3.sum", tag, expected, entropy(model.bundles(N, given_sum)) - entropy(given_sum))
            )
            report.checks.append(
                Check("identity.e3.all", tag, expected, entropy(model.bundles(N, given_all)) - entropy(given_all))
            )
    return report


def verify_randomness(params: SessionParams, output: DealerOutput) -> VerificationReport:
    """Total randomness K*L when T = 0; per-user K*L when additionally U = 1.

    The structured K=3 deal must reach per-user rates (2, 5/2, 2). Other
    settings have no proven optimum and produce no checks.
    """
    rr = randomness_report(output)
    report = VerificationReport()
    desc = params.describe()
    if params.T == 0:
        report.checks.append(Check("randomness.total", desc, params.K * params.L, rr.total))
        if params.U == 1:
            for k, h in rr.per_user.items():
                report.checks.append(Check(f"randomness.H(Z_{k})", desc, params.K * params.L, h))
    if output.scheme == STRUCTURED:
        target = {1: Fraction(2), 2: Fraction(5, 2), 3: Fraction(2)}
        for k, rate in rr.per_user_rate.items():
            report.checks.append(Check(f"randomness.H(Z_{k})/L", desc, target[k], rate))
    return report


def verify_dealer_consistency(output: DealerOutput) -> VerificationReport:
    """Dealt values must lie in the image of the scheme's linear map from seeds."""
    p = output.params
    f = p.work
    stacked, where = output.rep.layout
    values = np.zeros(stacked.shape[0], dtype=f.dtype)
    for (k, key), sl in where.items():
        base = output.users[k].S if key is None else output.users[k].shares[key]
        values[sl] = working_values(p, base)
    r = rank_of(f, stacked)
    r_aug = rank_of(f, np.hstack([stacked, values[:, None]]))
    return VerificationReport([Check("dealer.consistent", p.describe(), r, r_aug)])


def verify_all(params: SessionParams, output: DealerOutput, *, identity_max_k: int = 4) -> VerificationReport:
    report = VerificationReport()
    report.extend(verify_dealer_consistency(output))
    report.extend(verify_security(params, output).as_checks())
    if params.K <= identity_max_k:
        report.extend(verify_share_identities(params, output))
    report.extend(verify_rates(params)[1])
    report.extend(verify_randomness(params, output))
    return report
