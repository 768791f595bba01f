"""Two-round protocol machines.

Round 1: user k sends ``X_k = W_k + S_k``. The server fixes the survivor set
U1 and announces it. Round 2: every k in U1 sends its dealt share for U1.
From any U shares the server inverts a U x U Cauchy subsystem to get
``sum_{k in U1} S_k`` and unmasks the sum of the round-1 messages.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field as dc_field
from typing import Mapping, Sequence

import numpy as np

from .dealer import (
    CANONICAL,
    DealerOutput,
    SessionParams,
    UserRandomness,
    encoding_matrix,
    fmt_set,
    mask_of,
    users_of,
    working_values,
)
from .errors import FormatError, ProtocolError, ReuseError, ScheduleError, SingularMatrixError
from .field import FieldSpec, ungroup_array
from .matrix import solve, submatrix

InputVector = tuple[int, ...]


@dataclass(frozen=True)
class Round1Message:
    sender: int
    X: tuple[int, ...]
    session_id: int = 0


@dataclass(frozen=True)
class Round2Message:
    sender: int
    u1: frozenset
    Y: tuple[int, ...]
    session_id: int = 0


@dataclass(frozen=True)
class DropoutSchedule:
    """Survivors after round 1 (u1) and after round 2 (u2)."""

    u1: frozenset
    u2: frozenset

    def __post_init__(self):
        object.__setattr__(self, "u1", frozenset(self.u1))
        object.__setattr__(self, "u2", frozenset(self.u2))

    def validate(self, params: SessionParams) -> "DropoutSchedule":
        if not self.u1 <= frozenset(params.users):
            raise ScheduleError(f"u1={fmt_set(self.u1)} contains unknown users")
        if not self.u2 <= self.u1:
            raise ScheduleError(f"u2={fmt_set(self.u2)} is not a subset of u1={fmt_set(self.u1)}")
        if len(self.u2) < params.U:
            raise ScheduleError(f"|u2|={len(self.u2)} < U={params.U}: too few second-round responders")
        return self

    @property
    def key(self) -> tuple[int, int]:
        return (mask_of(self.u1), mask_of(self.u2))

    def __str__(self):
        return f"U1={fmt_set(self.u1)} U2={fmt_set(self.u2)}"


def _check_vector(field: FieldSpec, v, n: int, what: str) -> tuple[int, ...]:
    v = tuple(int(x) for x in v)
    if len(v) != n:
        raise ProtocolError(f"{what} has length {len(v)}, expected {n}")
    for x in v:
        field.check(x)
    return v


def encode_round1(field: FieldSpec, W: Sequence[int], Z: UserRandomness, session_id: int = 0) -> Round1Message:
    W = _check_vector(field, W, len(Z.S), "input vector")
    X = field.vadd(np.asarray(W, dtype=np.int64), np.asarray(Z.S, dtype=np.int64))
    return Round1Message(Z.k, tuple(int(x) for x in X), session_id)


def encode_round2(params: SessionParams, k: int, u1, Z: UserRandomness, session_id: int = 0) -> Round2Message:
    u1 = frozenset(u1)
    if k not in u1:
        raise ProtocolError(f"user {k} is not in the announced set {fmt_set(u1)}")
    if len(u1) < params.U:
        raise ProtocolError(f"announced set {fmt_set(u1)} has fewer than U={params.U} users")
    if Z.k != k:
        raise ProtocolError(f"randomness of user {Z.k} offered to user {k}")
    if u1 not in Z.shares:
        raise ProtocolError(f"user {k} holds no share for {fmt_set(u1)}")
    return Round2Message(k, u1, Z.shares[u1], session_id)


def server_decode(
    params: SessionParams,
    u1,
    round1: Mapping[int, Round1Message] | Sequence[Round1Message],
    round2: Mapping[int, Round2Message] | Sequence[Round2Message],
    scheme: str = CANONICAL,
) -> InputVector:
    """Recover ``sum_{k in u1} W_k`` from all round-1 messages of u1 and >= U round-2 messages."""
    u1 = frozenset(u1)
    r1 = _by_sender(round1)
    r2 = _by_sender(round2)
    u2 = frozenset(r2)
    if not u2 <= u1:
        raise ProtocolError(f"round-2 senders {fmt_set(u2)} not contained in U1={fmt_set(u1)}")
    if len(u2) < params.U:
        raise ProtocolError(f"only {len(u2)} round-2 messages, need U={params.U}")
    missing = u1 - frozenset(r1)
    if missing:
        raise ProtocolError(f"missing round-1 messages from {fmt_set(missing)}")
    for msg in r2.values():
        if msg.u1 != u1:
            raise ProtocolError(f"user {msg.sender} answered for {fmt_set(msg.u1)}, not {fmt_set(u1)}")

    f = params.field
    members = sorted(u1)
    chosen = sorted(u2)[: params.U]
    M = submatrix(encoding_matrix(params, len(members), scheme), [members.index(k) for k in chosen])
    Y = np.stack([working_values(params, r2[k].Y) for k in chosen])  # U x blocks
    try:
        sol = solve(M, Y)
    except SingularMatrixError as exc:
        raise ProtocolError(f"internal corruption: decoding subsystem is singular ({exc})") from None
    width = params.U - params.T
    mask_sum = ungroup_array(f, sol[:width].T.reshape(-1), params.B)

    xs = np.stack([np.asarray(_check_vector(f, r1[k].X, params.L, f"X_{k}"), dtype=np.int64) for k in members])
    total = f.vsub(f.vsum(xs, axis=0), mask_sum)
    return tuple(int(x) for x in total)


def _by_sender(msgs) -> dict:
    if isinstance(msgs, Mapping):
        return dict(msgs)
    out = {}
    for m in msgs:
        if m.sender in out:
            raise ProtocolError(f"duplicate message from user {m.sender}")
        out[m.sender] = m
    return out


class ServerState:
    """Single-owner server machine: collect round 1, announce U1, collect round 2, decode."""

    def __init__(self, params: SessionParams, scheme: str = CANONICAL, session_id: int = 0):
        self.params = params
        self.scheme = scheme
        self.session_id = session_id
        self.round1: dict[int, Round1Message] = {}
        self.u1: frozenset | None = None
        self.round2: dict[int, Round2Message] = {}
        self.decoded: InputVector | None = None

    def receive_round1(self, msg: Round1Message):
        if self.u1 is not None:
            raise ProtocolError("round 1 is closed")
        self._check_session(msg)
        if msg.sender in self.round1:
            raise ProtocolError(f"duplicate round-1 message from user {msg.sender}")
        self.round1[msg.sender] = msg

    def announce(self, u1=None) -> frozenset:
        """Close round 1; U1 defaults to everyone heard from."""
        u1 = frozenset(self.round1) if u1 is None else frozenset(u1)
        if len(u1) < self.params.U:
            raise ProtocolError(f"only {len(u1)} users survived round 1, need U={self.params.U}")
        if not u1 <= frozenset(self.round1):
            raise ProtocolError(f"U1={fmt_set(u1)} includes users never heard from in round 1")
        self.u1 = u1
        return u1

    def receive_round2(self, msg: Round2Message):
        if self.u1 is None:
            raise ProtocolError("U1 has not been announced")
        self._check_session(msg)
        if msg.u1 != self.u1 or msg.sender not in self.u1:
            raise ProtocolError(f"unexpected round-2 message from user {msg.sender}")
        if msg.sender in self.round2:
            raise ProtocolError(f"duplicate round-2 message from user {msg.sender}")
        self.round2[msg.sender] = msg

    @property
    def u2(self) -> frozenset:
        return frozenset(self.round2)

    def decode(self) -> InputVector:
        if self.u1 is None:
            raise ProtocolError("U1 has not been announced")
        if len(self.round2) < self.params.U:
            raise ProtocolError(f"decode needs U={self.params.U} round-2 messages, have {len(self.round2)}")
        r1 = {k: self.round1[k] for k in self.u1}
        self.decoded = server_decode(self.params, self.u1, r1, self.round2, self.scheme)
        return self.decoded

    def _check_session(self, msg):
        if msg.session_id != self.session_id:
            raise ProtocolError(f"message for session {msg.session_id}, expected {self.session_id}")


@dataclass
class Transcript:
    """Everything emitted in a session, including messages of users who later dropped."""

    session_id: int
    u1: frozenset
    u2: frozenset
    round1: list[Round1Message] = dc_field(default_factory=list)
    round2: list[Round2Message] = dc_field(default_factory=list)

    def to_bytes(self, field: FieldSpec) -> bytes:
        return b"".join(encode_message(field, m) for m in [*self.round1, *self.round2])

    @classmethod
    def from_bytes(cls, field: FieldSpec, data: bytes, u2) -> "Transcript":
        r1, r2 = [], []
        pos = 0
        while pos < len(data):
            msg, pos = decode_message(field, data, pos)
            (r1 if isinstance(msg, Round1Message) else r2).append(msg)
        if not r1:
            raise FormatError("transcript has no round-1 messages")
        u1 = r2[0].u1 if r2 else frozenset()
        return cls(r1[0].session_id, u1, frozenset(u2), r1, r2)


def run_session(
    params: SessionParams,
    inputs: Mapping[int, Sequence[int]] | Sequence[Sequence[int]],
    dealer_output: DealerOutput,
    schedule: DropoutSchedule,
) -> tuple[InputVector, Transcript]:
    """Simulate one session; dropouts follow ``schedule`` rather than timing."""
    schedule.validate(params)
    if dealer_output.params != params:
        raise ProtocolError("dealer output was produced for different parameters")
    if dealer_output.consumed:
        raise ReuseError("dealer output already used by a session; deal fresh randomness")
    dealer_output.consumed = True
    if not isinstance(inputs, Mapping):
        inputs = {k: inputs[k - 1] for k in params.users}

    sid = dealer_output.session_id
    server = ServerState(params, dealer_output.scheme, sid)
    round1 = [encode_round1(params.field, inputs[k], dealer_output[k], sid) for k in params.users]
    for msg in round1:
        if msg.sender in schedule.u1:
            server.receive_round1(msg)
    u1 = server.announce(schedule.u1)
    round2 = [encode_round2(params, k, u1, dealer_output[k], sid) for k in sorted(u1)]
    for msg in round2:
        if msg.sender in schedule.u2:
            server.receive_round2(msg)
    decoded = server.decode()
    return decoded, Transcript(sid, u1, schedule.u2, round1, round2)


# -- wire format ---------------------------------------------------------------------

_R1 = struct.Struct("<QBH")
_R2 = struct.Struct("<QBHQ")
_COUNT = struct.Struct("<I")


def encode_message(field: FieldSpec, msg: Round1Message | Round2Message) -> bytes:
    if isinstance(msg, Round1Message):
        head = _R1.pack(msg.session_id, 1, msg.sender)
        payload = msg.X
    else:
        head = _R2.pack(msg.session_id, 2, msg.sender, mask_of(msg.u1))
        payload = msg.Y
    return head + _COUNT.pack(len(payload)) + field.encode_vector(payload)


def decode_message(field: FieldSpec, data: bytes, pos: int = 0) -> tuple[Round1Message | Round2Message, int]:
    try:
        session_id, tag, sender = _R1.unpack_from(data, pos)
        if tag == 1:
            pos += _R1.size
            u1 = None
        elif tag == 2:
            _, _, _, bits = _R2.unpack_from(data, pos)
            pos += _R2.size
            u1 = users_of(bits)
        else:
            raise FormatError(f"unknown round tag {tag}")
        (n,) = _COUNT.unpack_from(data, pos)
        pos += _COUNT.size
    except struct.error as exc:
        raise FormatError(f"truncated message header: {exc}") from None
    end = pos + n * field.element_bytes
    if end > len(data):
        raise FormatError("truncated message payload")
    payload = field.decode_vector(data[pos:end], n)
    msg = Round1Message(sender, payload, session_id) if u1 is None else Round2Message(sender, u1, payload, session_id)
    return msg, end
