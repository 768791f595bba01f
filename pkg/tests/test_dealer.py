from fractions import Fraction
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from secagg.dealer import (
    STRUCTURED,
    SessionParams,
    deal,
    deal_structured_k3,
    dump_dealer_output,
    load_dealer_output,
    randomness_report,
)
from secagg.errors import FormatError, InfeasibleError, ParameterError
from secagg.field import make_field
from secagg.matrix import canonical_cauchy, solve, submatrix


def _pinv(x, p):
    return pow(x % p, p - 2, p)


def expected_shares_prime(params, seeds):
    """Shares recomputed from raw seeds with plain integer arithmetic (prime fields only)."""
    p = params.field.p
    U, T, w = params.U, params.T, params.U - params.T
    out = {}
    for u1 in params.qualifying_sets:
        members = sorted(u1)
        n = len(members)
        C = [[_pinv(a - b, p) for b in range(n, n + U)] for a in range(n)]
        total = [sum(seeds.S[k][l] for k in members) % p for l in range(params.L)]
        noise = seeds.N[u1]
        for r, k in enumerate(members):
            share = []
            for j in range(params.blocks):
                v = total[j * w : (j + 1) * w] + [noise[t * params.blocks + j] for t in range(T)]
                share.append(sum(c * x for c, x in zip(C[r], v)) % p)
            out[(k, u1)] = tuple(share)
    return out


@pytest.mark.parametrize(
    "K,U,T,p,L",
    [(3, 2, 1, 5, 1), (3, 2, 0, 5, 2), (4, 2, 1, 7, 3), (4, 3, 1, 7, 4), (5, 3, 2, 11, 2), (5, 4, 1, 11, 6), (2, 1, 0, 3, 2)],
)
def test_shares_match_independent_computation(K, U, T, p, L):
    params = SessionParams(K, U, T, make_field(p), L=L)
    seeds, out = deal(params, np.random.default_rng(11))
    ref = expected_shares_prime(params, seeds)
    for k in params.users:
        assert out[k].S == seeds.S[k]
        assert set(out[k].shares) == {u1 for u1 in params.qualifying_sets if k in u1}
        for u1, share in out[k].shares.items():
            assert len(share) == params.L_Y
            assert share == ref[(k, u1)]


def test_k3_u2_t1_layout():
    params = SessionParams(3, 2, 1, make_field(5), L=1)
    _, out = deal(params, np.random.default_rng(0))
    for k in params.users:
        assert len(out[k].S) == 1
        expected = {frozenset(s) for s in [{1, 2}, {1, 3}, {2, 3}, {1, 2, 3}] if k in s}
        assert set(out[k].shares) == expected
        assert all(len(v) == 1 for v in out[k].shares.values())


def test_k3_u2_t0_three_shares_each():
    params = SessionParams(3, 2, 0, make_field(5), L=2)
    _, out = deal(params, np.random.default_rng(0))
    for k in params.users:
        assert len(out[k].shares) == 3
        assert params.shares_per_user == 3


def test_infeasible_and_invalid_parameters():
    f = make_field(5)
    with pytest.raises(InfeasibleError):
        SessionParams(3, 2, 2, f)
    with pytest.raises(ParameterError):
        SessionParams(3, 3, 0, f)
    with pytest.raises(ParameterError):
        SessionParams(4, 2, 1, make_field(5))  # q = 5 < K + U = 6
    with pytest.raises(ParameterError):
        SessionParams(3, 2, 0, f, L=3)  # not a multiple of U - T = 2
    assert SessionParams(4, 2, 1, make_field(2), B=3).L == 3


@pytest.mark.parametrize("K", [2, 3, 4, 5])
def test_share_consistency_every_qualifying_set(K):
    """Any U shares of U1, times the inverse Cauchy subsystem, give back (sum S, N)."""
    for U in range(1, K):
        for T in range(0, min(U, K - 1)):
            params = SessionParams.smallest(K, U, T)
            f = params.field
            seeds, out = deal(params, np.random.default_rng([K, U, T]))
            for u1 in params.qualifying_sets:
                members = sorted(u1)
                M = canonical_cauchy(f, len(members), U)
                total = f.vsum(np.array([seeds.S[k] for k in members]), axis=0)
                for chosen in list(combinations(range(len(members)), U))[:4]:
                    Y = np.array([out[members[i]].shares[u1] for i in chosen])
                    sol = solve(submatrix(M, chosen), Y)
                    w = U - T
                    got_sum = sol[:w].T.reshape(-1)
                    assert list(got_sum) == list(total)
                    got_noise = sol[w:].reshape(-1)
                    assert list(got_noise) == list(seeds.N[u1])


# -- randomness cost -----------------------------------------------------------------


def test_structured_k3_ranks():
    params = SessionParams(3, 2, 0, make_field(5), L=2)
    _, out = deal_structured_k3(params, np.random.default_rng(0))
    rr = randomness_report(out)
    assert rr.per_user == {1: 4, 2: 5, 3: 4}
    assert rr.per_user_rate == {1: Fraction(2), 2: Fraction(5, 2), 3: Fraction(2)}
    assert rr.total == 6


@pytest.mark.parametrize("p", [5, 7, 11, 13])
def test_canonical_k3_ranks(p):
    # With canonical points, row 2 of the 2x2 precoder and row 3 of the 3x2
    # precoder are both (-1, -1/2) = (1/(1-2), 1/(1-3)) = (1/(2-3), 1/(2-4)).
    # User 3 therefore holds r.(S1+S3), r.(S2+S3), r.(S1+S2+S3); the first two
    # minus the third equal r.S3, which is already in Z_3, so H(Z_3) = 4.
    params = SessionParams(3, 2, 0, make_field(p), L=2)
    f = params.field
    small, big = canonical_cauchy(f, 2, 2), canonical_cauchy(f, 3, 2)
    assert small.tolist()[1] == big.tolist()[2] == [f.neg(1), f.neg(f.inv(2))]
    _, out = deal(params, np.random.default_rng(0))
    assert randomness_report(out).per_user == {1: 5, 2: 5, 3: 4}


@pytest.mark.parametrize("K", [2, 3, 4, 5])
def test_total_randomness_t0(K):
    for U in range(1, K):
        for mult in (1, 2):
            params = SessionParams.smallest(K, U, 0, L=U * mult)
            _, out = deal(params, np.random.default_rng(1))
            rr = randomness_report(out)
            assert rr.total == K * params.L
            if U == 1:
                assert all(h == K * params.L for h in rr.per_user.values())


def test_randomness_report_counts_base_symbols_under_grouping():
    params = SessionParams(3, 1, 0, make_field(2), B=2)
    _, out = deal(params, np.random.default_rng(1))
    rr = randomness_report(out)
    assert rr.total == 3 * params.L
    assert rr.per_user == {1: 6, 2: 6, 3: 6}


def test_structured_scheme_only_for_its_parameters():
    with pytest.raises(ParameterError):
        deal(SessionParams(4, 2, 0, make_field(7), L=2), np.random.default_rng(0), scheme=STRUCTURED)


# -- serialization and determinism ---------------------------------------------------


@given(st.sampled_from([(3, 2, 1, 5, 1, 1), (4, 2, 1, 2, 3, 1), (4, 3, 1, 7, 1, 2), (3, 2, 0, 5, 1, 1)]), st.integers(0, 2**32))
@settings(max_examples=20, deadline=None)
def test_dealer_file_roundtrip(cfg, seed):
    K, U, T, p, B, mult = cfg
    params = SessionParams(K, U, T, make_field(p), B=B, L=B * (U - T) * mult)
    _, out = deal(params, np.random.default_rng(seed))
    data = dump_dealer_output(out)
    back = load_dealer_output(data)
    assert back.params == params
    assert back.session_id == out.session_id
    assert back.users == out.users
    assert dump_dealer_output(back) == data


def test_sabotage_flags_survive_roundtrip():
    params = SessionParams(3, 2, 1, make_field(5))
    _, out = deal(params, np.random.default_rng(0), noise=False, reuse=(1, 2))
    back = load_dealer_output(out.to_bytes())
    assert back.noise is False and back.reuse == (1, 2)
    assert back[2].S == back[1].S


def test_same_seed_same_bytes():
    params = SessionParams(4, 2, 1, make_field(7), L=2)
    a = deal(params, np.random.default_rng(42))[1].to_bytes()
    b = deal(params, np.random.default_rng(42))[1].to_bytes()
    c = deal(params, np.random.default_rng(43))[1].to_bytes()
    assert a == b != c


@pytest.mark.parametrize("cut", [0, 3, 10, 40])
def test_truncated_file_rejected(cut):
    params = SessionParams(3, 2, 1, make_field(5))
    data = deal(params, np.random.default_rng(0))[1].to_bytes()
    with pytest.raises(FormatError):
        load_dealer_output(data[:cut])


def test_bad_magic_rejected():
    params = SessionParams(3, 2, 1, make_field(5))
    data = deal(params, np.random.default_rng(0))[1].to_bytes()
    with pytest.raises(FormatError):
        load_dealer_output(b"XXXX" + data[4:])
