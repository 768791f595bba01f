"""Batch experiments over dropout schedules and collusion sets."""

from __future__ import annotations

import os
from dataclasses import dataclass, field as dc_field
from itertools import combinations
from math import comb
from typing import Callable, Optional, Sequence

import numpy as np

from .dealer import CANONICAL, SessionParams, UserRandomness, deal, fmt_set, mask_of
from .errors import BudgetExceededError, ParameterError
from .protocol import DropoutSchedule, Round1Message, Round2Message, Transcript, run_session

__all__ = [
    "AdversaryView",
    "DropoutSchedule",
    "ExperimentPlan",
    "ExperimentReport",
    "ScheduleRecord",
    "collusion_sets",
    "count_schedules",
    "default_budget",
    "enumerate_schedules",
    "run_experiment",
]

DEFAULT_BUDGET = 10**5

InputSampler = Callable[[np.random.Generator, SessionParams], Sequence[Sequence[int]]]


def default_budget() -> int:
    env = os.environ.get("SECAGG_BUDGET")
    return int(env) if env else DEFAULT_BUDGET


def enumerate_schedules(params: SessionParams) -> list[DropoutSchedule]:
    """Every (u1, u2) with u2 <= u1, |u2| >= U, ordered by (|u1|, u1, |u2|, u2)."""
    out = []
    for u1 in params.qualifying_sets:
        members = sorted(u1)
        for size in range(params.U, len(members) + 1):
            for u2 in combinations(members, size):
                out.append(DropoutSchedule(u1, frozenset(u2)))
    return out


def count_schedules(params: SessionParams) -> int:
    return sum(comb(params.K, s) * sum(comb(s, u) for u in range(params.U, s + 1)) for s in range(params.U, params.K + 1))


def collusion_sets(params: SessionParams) -> list[frozenset]:
    """All subsets of [K] with at most T members, dropped users included."""
    return [frozenset(c) for t in range(params.T + 1) for c in combinations(params.users, t)]


@dataclass(frozen=True)
class ExperimentPlan:
    params: SessionParams
    mode: str = "exhaustive"
    n: int = 0
    seed: int = 0
    collusion: str = "exhaustive"
    budget: int = dc_field(default_factory=default_budget)
    scheme: str = CANONICAL

    def __post_init__(self):
        if self.mode not in ("exhaustive", "sampled"):
            raise ParameterError(f"unknown mode {self.mode!r}")
        if self.collusion not in ("exhaustive", "sampled"):
            raise ParameterError(f"unknown collusion mode {self.collusion!r}")
        if self.mode == "sampled" and self.n < 1:
            raise ParameterError("sampled mode needs n >= 1")


@dataclass
class AdversaryView:
    """What a server colluding with ``collusion`` sees in one session."""

    round1: list[Round1Message]
    round2: list[Round2Message]
    collusion: frozenset
    colluders: dict[int, tuple[tuple[int, ...], UserRandomness]]


@dataclass(frozen=True)
class ScheduleRecord:
    schedule: DropoutSchedule
    collusion: frozenset
    decode_ok: bool
    transcript_ref: str

    def line(self) -> str:
        u1, u2 = self.schedule.key
        return (
            f"u1={u1:#06x} u2={u2:#06x} T={mask_of(self.collusion):#06x} "
            f"decode_ok={int(self.decode_ok)} transcript={self.transcript_ref}"
        )


@dataclass
class ExperimentReport:
    plan: ExperimentPlan
    records: list[ScheduleRecord]
    transcripts: dict[str, Transcript]
    views: list[AdversaryView]
    decoded: dict[str, tuple[tuple[int, ...], tuple[int, ...]]]

    @property
    def all_ok(self) -> bool:
        return all(r.decode_ok for r in self.records)

    @property
    def sessions(self) -> int:
        return len(self.transcripts)

    def to_text(self) -> str:
        p = self.plan.params
        head = [
            f"# secagg experiment {p.describe()} scheme={self.plan.scheme}",
            f"# mode={self.plan.mode} n={self.plan.n} seed={self.plan.seed} collusion={self.plan.collusion}",
            f"# sessions={self.sessions} records={len(self.records)} all_ok={int(self.all_ok)}",
        ]
        return "\n".join(head + [r.line() for r in self.records]) + "\n"


def _uniform_inputs(rng: np.random.Generator, params: SessionParams):
    return [tuple(int(x) for x in rng.integers(0, params.field.q, params.L)) for _ in params.users]


def _sample_subset(rng: np.random.Generator, pool: Sequence[int], size: int) -> frozenset:
    return frozenset(int(x) for x in rng.choice(pool, size=size, replace=False)) if size else frozenset()


def _sample_schedule(rng: np.random.Generator, params: SessionParams) -> DropoutSchedule:
    sizes = list(range(params.U, params.K + 1))
    weights = np.array([comb(params.K, s) * sum(comb(s, u) for u in range(params.U, s + 1)) for s in sizes], float)
    s = sizes[rng.choice(len(sizes), p=weights / weights.sum())]
    u1 = _sample_subset(rng, list(params.users), s)
    inner = list(range(params.U, s + 1))
    w2 = np.array([comb(s, t) for t in inner], float)
    t = inner[rng.choice(len(inner), p=w2 / w2.sum())]
    return DropoutSchedule(u1, _sample_subset(rng, sorted(u1), t))


def _sample_collusion(rng: np.random.Generator, params: SessionParams) -> frozenset:
    sizes = list(range(params.T + 1))
    w = np.array([comb(params.K, t) for t in sizes], float)
    t = sizes[rng.choice(len(sizes), p=w / w.sum())]
    return _sample_subset(rng, list(params.users), t)


def run_experiment(
    plan: ExperimentPlan,
    inputs: Optional[Sequence[Sequence[int]]] = None,
    sampler: Optional[InputSampler] = None,
    schedules: Optional[Sequence[DropoutSchedule]] = None,
) -> ExperimentReport:
    """Run one fresh session per schedule and record decode results and adversary views.

    Fixed ``inputs`` are reused for every session; otherwise ``sampler`` (or a
    uniform sampler) draws new inputs per session. Explicit ``schedules``
    replace the enumeration in exhaustive mode. Output depends only on the plan.
    """
    params = plan.params
    root = np.random.default_rng(plan.seed)
    all_collusions = collusion_sets(params)

    if plan.mode == "exhaustive":
        schedules = [s.validate(params) for s in schedules] if schedules is not None else enumerate_schedules(params)
        total = len(schedules) * (len(all_collusions) if plan.collusion == "exhaustive" else 1)
        if total > plan.budget:
            raise BudgetExceededError(
                f"{total} (schedule, collusion) combinations exceed budget {plan.budget}; use sampled mode"
            )
    else:
        schedules = [_sample_schedule(root, params) for _ in range(plan.n)]

    jobs = []
    for schedule in schedules:
        coll = all_collusions if plan.collusion == "exhaustive" else [_sample_collusion(root, params)]
        jobs.append((schedule, coll))

    seqs = np.random.SeedSequence(plan.seed).spawn(len(jobs))
    sample = sampler or _uniform_inputs
    records, transcripts, views, decoded = [], {}, [], {}
    f = params.field
    for idx, ((schedule, colls), seq) in enumerate(zip(jobs, seqs)):
        rng = np.random.default_rng(seq)
        W = [tuple(int(x) for x in w) for w in (inputs if inputs is not None else sample(rng, params))]
        _, dealer_output = deal(params, rng, scheme=plan.scheme)
        result, transcript = run_session(params, W, dealer_output, schedule)
        expected = tuple(int(x) for x in f.vsum(np.array([W[k - 1] for k in sorted(schedule.u1)]), axis=0))
        ref = f"t{idx:05d}.bin"
        transcripts[ref] = transcript
        decoded[ref] = (result, expected)
        for c in colls:
            records.append(ScheduleRecord(schedule, c, result == expected, ref))
            views.append(
                AdversaryView(
                    transcript.round1,
                    transcript.round2,
                    c,
                    {k: (W[k - 1], dealer_output[k]) for k in sorted(c)},
                )
            )

    order = sorted(range(len(records)), key=lambda i: (*records[i].schedule.key, mask_of(records[i].collusion), records[i].transcript_ref))
    return ExperimentReport(plan, [records[i] for i in order], transcripts, [views[i] for i in order], decoded)


def describe_schedule(schedule: DropoutSchedule, collusion: frozenset) -> str:
    return f"{schedule} T={fmt_set(collusion)}"
