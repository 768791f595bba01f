import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from secagg.dealer import STRUCTURED, SessionParams, deal, deal_structured_k3
from secagg.errors import FormatError, ProtocolError, ReuseError, ScheduleError
from secagg.field import make_field
from secagg.protocol import (
    DropoutSchedule,
    Round1Message,
    Round2Message,
    ServerState,
    Transcript,
    decode_message,
    encode_message,
    encode_round1,
    encode_round2,
    run_session,
    server_decode,
)
from secagg.simulator import enumerate_schedules

GF5 = make_field(5)


def _sum(field, vectors):
    out = [0] * len(vectors[0])
    for v in vectors:
        out = [field.add(a, b) for a, b in zip(out, v)]
    return tuple(out)


def test_round1_examples():
    params = SessionParams(3, 2, 1, GF5)
    _, out = deal(params, np.random.default_rng(0))
    assert encode_round1(GF5, (0,), out[1]).X == out[1].S
    z = out[1]
    fixed = type(z)(1, (4,), z.shares)
    assert encode_round1(GF5, (3,), fixed).X == (2,)


def test_round2_is_the_dealt_share():
    params = SessionParams(3, 2, 1, GF5)
    _, out = deal(params, np.random.default_rng(0))
    for u1 in params.qualifying_sets:
        for k in u1:
            assert encode_round2(params, k, u1, out[k]).Y == out[k].shares[u1]


def test_round2_preconditions():
    params = SessionParams(3, 2, 1, GF5)
    _, out = deal(params, np.random.default_rng(0))
    with pytest.raises(ProtocolError):
        encode_round2(params, 3, {1, 2}, out[3])
    with pytest.raises(ProtocolError):
        encode_round2(params, 1, {1}, out[1])
    with pytest.raises(ProtocolError):
        encode_round2(params, 1, {1, 2}, out[2])


def _session(params, W, schedule, seed=0, scheme="canonical"):
    if scheme == STRUCTURED:
        _, out = deal_structured_k3(params, np.random.default_rng(seed))
    else:
        _, out = deal(params, np.random.default_rng(seed))
    return run_session(params, W, out, DropoutSchedule(*schedule))


@pytest.mark.parametrize("scheme", ["canonical", STRUCTURED])
def test_k3_u2_t0_decodes(scheme):
    params = SessionParams(3, 2, 0, GF5, L=2)
    W = [(1, 2), (3, 4), (0, 4)]
    got, _ = _session(params, W, ({1, 2}, {1, 2}), scheme=scheme)
    assert got == _sum(GF5, W[:2])
    for u2 in ({1, 2}, {1, 3}, {2, 3}, {1, 2, 3}):
        got, _ = _session(params, W, ({1, 2, 3}, u2), scheme=scheme)
        assert got == _sum(GF5, W)


def test_zero_inputs_decode_to_zero_everywhere():
    params = SessionParams(3, 2, 1, GF5)
    for s in enumerate_schedules(params):
        got, _ = _session(params, [(0,)] * 3, (s.u1, s.u2), seed=7)
        assert got == (0,)


def test_four_users_two_dropouts():
    params = SessionParams(4, 2, 1, make_field(7))
    W = [(5,), (1,), (6,), (3,)]
    got, transcript = _session(params, W, ({1, 3, 4}, {1, 4}))
    assert got == _sum(params.field, [W[0], W[2], W[3]])
    # user 2 dropped in round 1, but its message may still be on the wire
    assert {m.sender for m in transcript.round1} == {1, 2, 3, 4}
    assert {m.sender for m in transcript.round2} == {1, 3, 4}


def test_no_dropouts():
    params = SessionParams(4, 2, 1, make_field(7), L=2)
    W = [(1, 2), (3, 4), (5, 6), (0, 1)]
    got, _ = _session(params, W, ({1, 2, 3, 4}, {1, 2, 3, 4}))
    assert got == _sum(params.field, W)


@pytest.mark.parametrize("schedule", [({1, 2, 3}, {1}), ({1, 2}, {1, 3}), ({1, 5}, {1, 5})])
def test_bad_schedules_rejected(schedule):
    params = SessionParams(3, 2, 1, GF5)
    _, out = deal(params, np.random.default_rng(0))
    with pytest.raises(ScheduleError):
        run_session(params, [(0,)] * 3, out, DropoutSchedule(*schedule))


def test_dealer_output_cannot_be_reused():
    params = SessionParams(3, 2, 1, GF5)
    _, out = deal(params, np.random.default_rng(0))
    run_session(params, [(1,)] * 3, out, DropoutSchedule({1, 2}, {1, 2}))
    with pytest.raises(ReuseError):
        run_session(params, [(1,)] * 3, out, DropoutSchedule({1, 2}, {1, 2}))


@st.composite
def session_case(draw):
    K = draw(st.integers(2, 5))
    U = draw(st.integers(1, K - 1))
    T = draw(st.integers(0, min(U - 1, K - 2)))
    mult = draw(st.integers(1, 2))
    params = SessionParams.smallest(K, U, T, L=(U - T) * mult)
    u1 = draw(st.sets(st.integers(1, K), min_size=U))
    u2 = draw(st.sets(st.sampled_from(sorted(u1)), min_size=U))
    q = params.field.q
    W = draw(st.lists(st.lists(st.integers(0, q - 1), min_size=params.L, max_size=params.L), min_size=K, max_size=K))
    return params, W, DropoutSchedule(u1, u2), draw(st.integers(0, 2**32))


@given(session_case())
@settings(max_examples=300, deadline=None)
def test_decode_is_exact(case):
    params, W, schedule, seed = case
    _, out = deal(params, np.random.default_rng(seed))
    got, _ = run_session(params, W, out, schedule)
    assert got == _sum(params.field, [W[k - 1] for k in sorted(schedule.u1)])


@given(st.integers(0, 2**32), st.data())
@settings(max_examples=60, deadline=None)
def test_grouped_field_decode_is_exact(seed, data):
    params = SessionParams(4, 2, 1, make_field(2), B=3, L=6)
    u1 = data.draw(st.sets(st.integers(1, 4), min_size=2))
    u2 = data.draw(st.sets(st.sampled_from(sorted(u1)), min_size=2))
    W = data.draw(st.lists(st.lists(st.integers(0, 1), min_size=6, max_size=6), min_size=4, max_size=4))
    _, out = deal(params, np.random.default_rng(seed))
    got, _ = run_session(params, W, out, DropoutSchedule(u1, u2))
    assert got == _sum(params.field, [W[k - 1] for k in sorted(u1)])


def test_decode_independent_of_which_u_answer():
    params = SessionParams(5, 3, 1, make_field(11), L=4)
    _, out = deal(params, np.random.default_rng(3))
    W = [[(k * 3 + l) % 11 for l in range(4)] for k in range(1, 6)]
    u1 = frozenset({1, 2, 4, 5})
    r1 = {k: encode_round1(params.field, W[k - 1], out[k]) for k in u1}
    r2 = {k: encode_round2(params, k, u1, out[k]) for k in u1}
    results = set()
    for drop in u1:
        results.add(server_decode(params, u1, r1, {k: v for k, v in r2.items() if k != drop}))
    assert len(results) == 1


def test_server_rejects_adversarial_messages():
    params = SessionParams(3, 2, 1, GF5)
    _, out = deal(params, np.random.default_rng(0))
    server = ServerState(params, session_id=out.session_id)
    r1 = [encode_round1(GF5, (1,), out[k], out.session_id) for k in (1, 2, 3)]
    server.receive_round1(r1[0])
    with pytest.raises(ProtocolError):
        server.receive_round1(r1[0])  # duplicate
    with pytest.raises(ProtocolError):
        server.receive_round1(Round1Message(2, (1,), out.session_id + 1))  # foreign session
    server.receive_round1(r1[1])
    with pytest.raises(ProtocolError):
        server.announce({1, 2, 3})  # user 3 never spoke
    u1 = server.announce()
    with pytest.raises(ProtocolError):
        server.receive_round1(r1[2])  # round closed
    with pytest.raises(ProtocolError):
        server.receive_round2(Round2Message(1, frozenset({1, 3}), (0,), out.session_id))
    server.receive_round2(encode_round2(params, 1, u1, out[1], out.session_id))
    with pytest.raises(ProtocolError):
        server.decode()  # only one share
    server.receive_round2(encode_round2(params, 2, u1, out[2], out.session_id))
    assert server.decode() == (2,)


def test_server_decode_rejects_wrong_lengths():
    params = SessionParams(3, 2, 1, GF5)
    _, out = deal(params, np.random.default_rng(0))
    u1 = frozenset({1, 2})
    r1 = {1: Round1Message(1, (1, 2)), 2: encode_round1(GF5, (1,), out[2])}
    r2 = {k: encode_round2(params, k, u1, out[k]) for k in u1}
    with pytest.raises(ProtocolError):
        server_decode(params, u1, r1, r2)


# -- wire format -----------------------------------------------------------------------


def test_transcript_roundtrip():
    params = SessionParams(4, 2, 1, make_field(7), L=2)
    _, out = deal(params, np.random.default_rng(5))
    _, t = run_session(params, [(1, 2)] * 4, out, DropoutSchedule({1, 3, 4}, {1, 4}))
    data = t.to_bytes(params.field)
    back = Transcript.from_bytes(params.field, data, t.u2)
    assert back.round1 == t.round1
    assert back.round2 == t.round2
    assert back.u1 == t.u1 and back.session_id == t.session_id


@given(st.sampled_from([(2, 1), (5, 1), (2, 8), (65537, 1)]), st.data())
@settings(max_examples=50, deadline=None)
def test_message_roundtrip(pm, data):
    f = make_field(*pm)
    payload = tuple(data.draw(st.lists(st.integers(0, f.q - 1), max_size=6)))
    sender = data.draw(st.integers(1, 20))
    sid = data.draw(st.integers(0, 2**63))
    if data.draw(st.booleans()):
        msg = Round1Message(sender, payload, sid)
    else:
        u1 = frozenset(data.draw(st.sets(st.integers(1, 20), min_size=1)) | {sender})
        msg = Round2Message(sender, u1, payload, sid)
    raw = encode_message(f, msg)
    assert decode_message(f, raw) == (msg, len(raw))


def test_truncated_message_rejected():
    raw = encode_message(GF5, Round1Message(1, (1, 2, 3), 9))
    for cut in (0, 5, len(raw) - 1):
        with pytest.raises(FormatError):
            decode_message(GF5, raw[:cut])
    with pytest.raises(FormatError):
        decode_message(GF5, raw[:8] + b"\x07" + raw[9:])
