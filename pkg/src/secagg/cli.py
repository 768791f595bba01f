"""Command-line front end: ``secagg {check,deal,simulate,verify,rates}``.

Exit codes: 0 pass, 1 usage error, 2 infeasible parameters, 3 verification failure.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .analyzer import verify_all, verify_rates
from .dealer import (
    CANONICAL,
    STRUCTURED,
    SessionParams,
    deal,
    dump_dealer_output,
    load_dealer_output,
    randomness_report,
)
from .errors import BudgetExceededError, FormatError, InfeasibleError, ParameterError, SecAggError
from .field import FieldError, grouping_factor, make_field, smallest_field
from .protocol import DropoutSchedule
from .simulator import ExperimentPlan, default_budget, run_experiment

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INFEASIBLE = 2
EXIT_FAILED = 3

_INT_KEYS = ("K", "U", "T", "p", "m", "B", "L", "seed", "budget")
_STR_KEYS = ("out", "scheme")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass
class Config:
    K: Optional[int] = None
    U: Optional[int] = None
    T: Optional[int] = None
    p: Optional[int] = None
    m: Optional[int] = None
    B: Optional[int] = None
    L: Optional[int] = None
    seed: int = 0
    budget: Optional[int] = None
    out: Optional[str] = None
    scheme: str = CANONICAL

    def session_params(self) -> SessionParams:
        """Build SessionParams; p defaults to the smallest prime power >= K + U."""
        missing = [k for k in ("K", "U", "T") if getattr(self, k) is None]
        if missing:
            raise UsageError(f"missing required parameter(s): {', '.join(missing)}")
        if self.p is None:
            if self.m is not None:
                raise UsageError("m given without p")
            p, m = smallest_field(self.K + self.U)
        else:
            p, m = self.p, self.m or 1
        try:
            field = make_field(p, m)
        except FieldError as exc:
            raise UsageError(str(exc)) from None
        return SessionParams(self.K, self.U, self.T, field, B=self.B or 1, L=self.L)

    def enumeration_budget(self) -> int:
        return self.budget if self.budget is not None else default_budget()


def parse_config_file(path: str) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in _INT_KEYS:
            try:
                values[key] = int(value)
            except ValueError:
                raise UsageError(f"{path}:{n}: {key} must be an integer, got {value!r}") from None
        elif key in _STR_KEYS:
            values[key] = value
        else:
            raise UsageError(f"{path}:{n}: unknown key {key!r}")
    return values


def load_config(args: argparse.Namespace) -> Config:
    values = parse_config_file(args.config) if args.config else {}
    for key in _INT_KEYS + _STR_KEYS:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    cfg = Config(**values)
    if cfg.scheme not in (CANONICAL, STRUCTURED):
        raise UsageError(f"unknown scheme {cfg.scheme!r}")
    return cfg


def read_inputs(path: str, params: SessionParams) -> list[tuple[int, ...]]:
    """One user per line, L space-separated integers in [0, q)."""
    try:
        lines = [ln.split() for ln in Path(path).read_text().splitlines() if ln.strip()]
    except OSError as exc:
        raise UsageError(f"cannot read inputs {path}: {exc.strerror}") from None
    if len(lines) != params.K:
        raise UsageError(f"{path}: expected {params.K} lines (one per user), got {len(lines)}")
    out = []
    for k, row in enumerate(lines, 1):
        try:
            vals = tuple(int(x) for x in row)
        except ValueError:
            raise UsageError(f"{path}: line {k} is not a list of integers") from None
        if len(vals) != params.L:
            raise UsageError(f"{path}: line {k} has {len(vals)} values, expected L={params.L}")
        if any(not 0 <= v < params.field.q for v in vals):
            raise UsageError(f"{path}: line {k} has values outside [0, {params.field.q})")
        out.append(vals)
    return out


def _parse_users(text: str) -> frozenset:
    try:
        return frozenset(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise UsageError(f"bad user list {text!r}; expected e.g. 1,3,4") from None


def _out_dir(cfg: Config) -> Optional[Path]:
    if cfg.out is None:
        return None
    d = Path(cfg.out)
    d.mkdir(parents=True, exist_ok=True)
    return d


# -- commands ---------------------------------------------------------------------


def cmd_check(cfg: Config) -> int:
    try:
        params = cfg.session_params()
    except InfeasibleError as exc:
        print(f"infeasible: {exc}")
        return EXIT_INFEASIBLE
    except ParameterError as exc:
        if cfg.p is not None and "working field too small" in str(exc):
            print(f"invalid: {exc}")
            _suggest(cfg.K, cfg.U, make_field(cfg.p, cfg.m or 1))
        else:
            print(f"rejected: {exc}")
        return EXIT_USAGE
    print(f"feasible: {params.describe()}")
    print(f"  rates: R1 = 1, R2 = 1/{params.U - params.T}")
    print(f"  second-round length L_Y = {params.L_Y}, shares per user = {params.shares_per_user}")
    _suggest(params.K, params.U, params.field if cfg.p is not None else None)
    return EXIT_OK


def _suggest(K: int, U: int, field=None):
    n = K + U
    p, m = smallest_field(n)
    q = p**m
    print(f"  field needs q >= K+U = {n}: smallest is GF({q})" + (f" = GF({p}^{m})" if m > 1 else ""))
    if field is not None:
        B = grouping_factor(field, n)
        print(f"  over GF({field.q}) use B = {B} ({field.q}^{B} = {field.q**B} >= {n})")
    if p != 2 and (field is None or field.q != 2):
        B = grouping_factor(make_field(2), n)
        print(f"  or GF(2) with B = {B} (2^{B} = {2**B} >= {n})")


def cmd_deal(cfg: Config) -> int:
    params = cfg.session_params()
    if cfg.out is None:
        raise UsageError("deal needs --out DIR")
    _, output = deal(params, np.random.default_rng(cfg.seed), scheme=cfg.scheme)
    path = _out_dir(cfg) / "dealer.bin"
    data = dump_dealer_output(output)
    path.write_bytes(data)
    print(f"dealt {params.describe()} scheme={cfg.scheme} seed={cfg.seed} session={output.session_id:#018x}")
    print(f"wrote {path} ({len(data)} bytes)")
    return EXIT_OK


def cmd_simulate(cfg: Config, args: argparse.Namespace) -> int:
    params = cfg.session_params()
    inputs = read_inputs(args.inputs, params) if args.inputs else None
    if args.exhaustive:
        plan = ExperimentPlan(params, "exhaustive", seed=cfg.seed, budget=cfg.enumeration_budget(), scheme=cfg.scheme)
        report = run_experiment(plan, inputs)
    elif args.u1 is not None:
        schedule = DropoutSchedule(_parse_users(args.u1), _parse_users(args.u2) if args.u2 else _parse_users(args.u1))
        plan = ExperimentPlan(params, "exhaustive", seed=cfg.seed, budget=cfg.enumeration_budget(), scheme=cfg.scheme)
        report = run_experiment(plan, inputs, schedules=[schedule])
    else:
        n = args.samples or 1
        plan = ExperimentPlan(
            params, "sampled", n=n, seed=cfg.seed, collusion="sampled", budget=cfg.enumeration_budget(), scheme=cfg.scheme
        )
        report = run_experiment(plan, inputs)

    text = report.to_text()
    sys.stdout.write(text)
    schedules = len({r.schedule for r in report.records})
    print(f"schedules={schedules} decodes_exact={sum(a == b for a, b in report.decoded.values())}/{report.sessions}")
    out = _out_dir(cfg)
    if out is not None:
        (out / "report.txt").write_text(text)
        tdir = out / "transcripts"
        tdir.mkdir(exist_ok=True)
        for ref, t in report.transcripts.items():
            (tdir / ref).write_bytes(t.to_bytes(params.field))
    return EXIT_OK if report.all_ok else EXIT_FAILED


def cmd_verify(cfg: Config, args: argparse.Namespace) -> int:
    params = cfg.session_params()
    if args.dealer:
        try:
            output = load_dealer_output(Path(args.dealer).read_bytes())
        except OSError as exc:
            raise UsageError(f"cannot read dealer output {args.dealer}: {exc.strerror}") from None
        if output.params != params:
            raise UsageError(f"dealer output is for {output.params.describe()}, config says {params.describe()}")
    else:
        _, output = deal(params, np.random.default_rng(cfg.seed), scheme=cfg.scheme)
    report = verify_all(params, output)
    text = report.to_text()
    text += "\n".join(randomness_report(output).lines()) + "\n"
    sys.stdout.write(text)
    summary = f"{len(report.checks) - len(report.failures)}/{len(report.checks)} checks passed"
    print(summary)
    out = _out_dir(cfg)
    if out is not None:
        (out / "verify.txt").write_text(text + summary + "\n")
    return EXIT_OK if report.ok else EXIT_FAILED


def cmd_rates(cfg: Config) -> int:
    params = cfg.session_params()
    rates, report = verify_rates(params)
    print("K\tU\tT\tq\tB\tL\tL_X\tL_Y\tR1\tR2\tok")
    print(
        f"{params.K}\t{params.U}\t{params.T}\t{params.field.q}\t{params.B}\t{params.L}\t"
        f"{rates.L_X}\t{rates.L_Y}\t{rates.R1}\t{rates.R2}\t{int(report.ok)}"
    )
    return EXIT_OK if report.ok else EXIT_FAILED


# -- entry point ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value file; flags override it")
    for key in ("K", "U", "T", "p", "m", "B", "L"):
        common.add_argument(f"--{key}", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--budget", type=int, help=f"enumeration budget (default $SECAGG_BUDGET or {default_budget()})")
    common.add_argument("--out", help="output directory")
    common.add_argument("--scheme", choices=(CANONICAL, STRUCTURED))

    parser = _Parser(prog="secagg", description="Two-round secure aggregation with dropouts and collusion.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("check", parents=[common], help="feasibility verdict and field suggestions")
    sub.add_parser("deal", parents=[common], help="write a dealer-output file")
    sim = sub.add_parser("simulate", parents=[common], help="run sessions and check decoding")
    src = sim.add_mutually_exclusive_group()
    src.add_argument("--inputs", help="file with one line of L integers per user")
    src.add_argument("--random", action="store_true", help="draw fresh uniform inputs per session (default)")
    how = sim.add_mutually_exclusive_group()
    how.add_argument("--exhaustive", action="store_true", help="every (U1, U2) schedule and collusion set")
    how.add_argument("--u1", help="one schedule: round-1 survivors, e.g. 1,3,4")
    how.add_argument("--samples", type=int, help="number of uniformly sampled schedules")
    sim.add_argument("--u2", help="round-2 survivors for --u1 (default: all of U1)")
    ver = sub.add_parser("verify", parents=[common], help="security, randomness identities, rates, randomness cost")
    ver.add_argument("--dealer", help="dealer-output file (default: deal fresh from --seed)")
    sub.add_parser("rates", parents=[common], help="measured message rates")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # --help or a usage error
        return int(exc.code or 0)
    try:
        cfg = load_config(args)
        if args.command == "check":
            return cmd_check(cfg)
        if args.command == "deal":
            return cmd_deal(cfg)
        if args.command == "simulate":
            return cmd_simulate(cfg, args)
        if args.command == "verify":
            return cmd_verify(cfg, args)
        return cmd_rates(cfg)
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (UsageError, ParameterError, BudgetExceededError, FormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SecAggError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
