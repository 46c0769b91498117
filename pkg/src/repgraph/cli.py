"""Command line entry point.

Exit codes: 0 success, 1 usage error, 2 data or validation error.
"""
from __future__ import annotations

import argparse
import sys
from contextlib import contextmanager
from pathlib import Path

from filelock import FileLock, Timeout

from . import pipeline
from .engine import get_reputation
from .errors import DataError
from .params import EngineParams
from .persistence import DataRoot, export_dynamics, format_value
from .simulator import (
    SimConfig,
    evaluate_dynamics,
    format_labels,
    generate_events,
    read_labels,
)
from .temporal_graph import EntityKind, parse_node

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _params(path) -> EngineParams:
    return EngineParams.from_file(path) if path else EngineParams()


@contextmanager
def _locked(data: Path):
    data.mkdir(parents=True, exist_ok=True)
    lock = FileLock(str(data / ".lock"))
    try:
        lock.acquire(timeout=0)
    except Timeout:
        raise DataError(f"{data} is locked by another running command") from None
    try:
        yield
    finally:
        lock.release()


def cmd_ingest(args, out):
    params = _params(args.params)
    root = DataRoot(args.data, params.period_seconds)
    with _locked(root.path), open(args.input, encoding="utf-8") as fh:
        summaries = pipeline.ingest(fh, root, params, name=args.input)
    for s in summaries:
        print(s.line(), file=out)
    total = sum(s.events for s in summaries)
    print(f"events: {total}", file=out)
    print(f"periods: {len(summaries)}", file=out)
    print(f"dangling: {sum(s.dangling for s in summaries)}", file=out)
    print(f"self_pairs: {sum(s.self_pairs for s in summaries)}", file=out)


def cmd_update(args, out):
    params = _params(args.params)
    root = DataRoot(args.data, params.period_seconds)
    with _locked(root.path):
        done = pipeline.update(root, params, args.start, args.end)
    if not done:
        print("up to date", file=out)
    for s in done:
        print(f"period {s.period}: accounts={s.accounts}", file=out)


def cmd_query(args, out):
    params = _params(args.params)
    account = parse_node(args.account)
    if account.kind is not EntityKind.ACCOUNT:
        raise UsageError(f"{args.account} is not an account")
    state = DataRoot(args.data, params.period_seconds).load_state(args.period)
    print(format_value(get_reputation(state, account, params)), file=out)


def cmd_export(args, out):
    params = _params(args.params)
    root = DataRoot(args.data, params.period_seconds)
    accounts = [
        line.strip()
        for line in Path(args.accounts).read_text(encoding="utf-8").splitlines()
        if line.strip() and not line.startswith("#")
    ]
    text = export_dynamics(root, accounts, args.start, args.end, params.default_reputation)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        out.write(text)


def cmd_simulate(args, out):
    cfg = SimConfig.from_file(args.config)
    text = "".join(line + "\n" for line in generate_events(cfg))
    Path(args.out).write_text(text, encoding="utf-8")
    if args.labels:
        Path(args.labels).write_text(format_labels(cfg.labels()), encoding="utf-8")
    print(f"events: {text.count(chr(10))}", file=out)


def cmd_eval(args, out):
    report = evaluate_dynamics(
        Path(args.dynamics).read_text(encoding="utf-8"),
        read_labels(Path(args.labels).read_text(encoding="utf-8")),
        positive=args.positive,
        negative=args.negative,
    )
    for line in report.to_lines():
        print(line, file=out)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="repgraph", description="Incremental reputation over a temporal graph.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", help="parse events into sealed evidence files")
    p.add_argument("--data", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--params")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("update", help="compute reputation states")
    p.add_argument("--data", required=True)
    p.add_argument("--params")
    p.add_argument("--from", dest="start", type=int)
    p.add_argument("--to", dest="end", type=int)
    p.set_defaults(func=cmd_update)

    p = sub.add_parser("query", help="print one account's reputation")
    p.add_argument("--data", required=True)
    p.add_argument("--account", required=True)
    p.add_argument("--period", required=True, type=int)
    p.add_argument("--params")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("export", help="write period,account,reputation CSV")
    p.add_argument("--data", required=True)
    p.add_argument("--accounts", required=True)
    p.add_argument("--from", dest="start", type=int, required=True)
    p.add_argument("--to", dest="end", type=int, required=True)
    p.add_argument("--out")
    p.add_argument("--params")
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("simulate", help="generate a synthetic cohort event stream")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--labels", help="also write account<TAB>cohort labels here")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("eval", help="score reputation dynamics by cohort")
    p.add_argument("--dynamics", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--positive", default="whale")
    p.add_argument("--negative", default="blacklist")
    p.set_defaults(func=cmd_eval)
    return parser


def run(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args.func(args, out)
    except SystemExit as exc:  # --help
        return exc.code or EXIT_OK
    except UsageError as exc:
        print(exc, file=err)
        return EXIT_USAGE
    except (DataError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=err)
        return EXIT_DATA
    except ValueError as exc:
        # malformed argument values such as an account id without prefix
        print(f"usage error: {exc}", file=err)
        return EXIT_USAGE
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
