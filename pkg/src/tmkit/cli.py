"""``tm`` command-line interface.

Exit codes:
    0  success
    1  the model has error diagnostics
    2  usage, I/O or scenario input problem
    3  simulation reached a branch with no choice left
    4  simulation hit maxSteps (partial trace still written)
    5  other engine failure (plan explosion, region overlap, ...)
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from tmkit import __version__
from tmkit.diagnostics import Diagnostic, has_errors
from tmkit.dsl import ParseResult, parse_model
from tmkit.engine import DEFAULT_REPEAT_BOUND, enumerate_plans
from tmkit.errors import ChoiceMissing, ScenarioError, StepLimit, TMError
from tmkit.export import LEVELS, to_dot, to_json
from tmkit.model import Bundle, Scenario, decompose_event
from tmkit.sim import simulate, simulate_concurrent, trace_to_jsonl
from tmkit.validator import validate_bundle

EXIT_OK, EXIT_INVALID, EXIT_USAGE, EXIT_CHOICE, EXIT_STEPS, EXIT_ENGINE = range(6)

_COLORS = {"error": "\033[31m", "warning": "\033[33m"}


class _Fail(Exception):
    def __init__(self, code: int):
        self.code = code


def _use_color(stream) -> bool:
    mode = os.environ.get("TM_COLOR", "auto").lower()
    if mode == "always":
        return True
    if mode == "never":
        return False
    return hasattr(stream, "isatty") and stream.isatty()


def _report(diags: list[Diagnostic], as_json: bool) -> None:
    color = not as_json and _use_color(sys.stderr)
    for d in diags:
        if as_json:
            print(d.to_json(), file=sys.stderr)
        elif color:
            print(f"{_COLORS[d.severity.value]}{d}\033[0m", file=sys.stderr)
        else:
            print(d, file=sys.stderr)


def _load(path: str) -> tuple[ParseResult, list[Diagnostic]]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        print(f"tm: cannot read {path}: {exc}", file=sys.stderr)
        raise _Fail(EXIT_USAGE) from None
    result = parse_model(text, file=path)
    diags = list(result.diagnostics)
    if result.bundle is not None:
        diags += validate_bundle(result.bundle, result.spans)
    return result, diags


def _load_valid(path: str, as_json: bool = False) -> Bundle:
    result, diags = _load(path)
    if has_errors(diags):
        _report([d for d in diags if d.is_error], as_json)
        raise _Fail(EXIT_INVALID)
    return result.bundle


def _write(text: str, out: str | None) -> None:
    if out:
        try:
            Path(out).write_text(text, encoding="utf-8")
        except OSError as exc:
            print(f"tm: cannot write {out}: {exc}", file=sys.stderr)
            raise _Fail(EXIT_USAGE) from None
    else:
        sys.stdout.write(text)


def _chronology(bundle: Bundle, name: str | None):
    if name is None:
        if not bundle.chronologies:
            print("tm: model declares no chronology", file=sys.stderr)
            raise _Fail(EXIT_USAGE)
        return next(iter(bundle.chronologies.values()))
    if name not in bundle.chronologies:
        print(f"tm: unknown chronology {name!r}", file=sys.stderr)
        raise _Fail(EXIT_USAGE)
    return bundle.chronologies[name]


def cmd_validate(args) -> int:
    _, diags = _load(args.path)
    _report(diags, args.json)
    return EXIT_INVALID if has_errors(diags) else EXIT_OK


def cmd_events(args) -> int:
    bundle = _load_valid(args.path, args.json)
    lines = []
    for ev in bundle.events.values():
        region = bundle.model.ordered(ev.region)
        if args.json:
            atoms = [a.id for a in decompose_event(bundle, ev)]
            lines.append(
                json.dumps(
                    {
                        "id": ev.id,
                        "name": ev.name,
                        "timeRef": ev.time_ref,
                        "duration": ev.duration.value,
                        "region": region,
                        "subEvents": list(ev.sub_events),
                        "atomic": atoms,
                    }
                )
            )
        else:
            parts = [ev.id, ev.name]
            if ev.time_ref:
                parts.append(f"at {ev.time_ref}")
            if ev.sub_events:
                parts.append("= " + " + ".join(ev.sub_events))
            parts.append("region: " + ", ".join(region))
            lines.append("\t".join(parts))
    _write("".join(line + "\n" for line in lines), None)
    return EXIT_OK


def cmd_plans(args) -> int:
    bundle = _load_valid(args.path)
    c = _chronology(bundle, args.chronology)
    try:
        plans = enumerate_plans(c, args.start, args.repeat_bound)
    except TMError as exc:
        print(f"tm: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ENGINE
    _write(plans.to_json() + "\n", args.out)
    return EXIT_OK


def _scenario(path: str) -> tuple[Scenario, dict]:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        return Scenario.from_dict(data), data
    except (OSError, ValueError, KeyError, TypeError, AttributeError) as exc:
        print(f"tm: bad scenario {path}: {exc}", file=sys.stderr)
        raise _Fail(EXIT_USAGE) from None


def cmd_simulate(args) -> int:
    bundle = _load_valid(args.path)
    scenario, _ = _scenario(args.scenario)
    names = list(scenario.chronologies) or [args.chronology]
    chrons = [_chronology(bundle, n) for n in names]
    try:
        if len(chrons) == 1:
            trace = simulate(chrons[0], bundle, scenario)
        else:
            trace = simulate_concurrent(chrons, bundle, scenario)
    except ChoiceMissing as exc:
        print(f"tm: ChoiceMissing: {exc}", file=sys.stderr)
        return EXIT_CHOICE
    except StepLimit as exc:
        _write(trace_to_jsonl(exc.trace), args.out)
        print(f"tm: StepLimit: {exc} (partial trace written)", file=sys.stderr)
        return EXIT_STEPS
    except ScenarioError as exc:
        print(f"tm: ScenarioError: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TMError as exc:
        print(f"tm: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ENGINE
    _write(trace_to_jsonl(trace), args.out)
    return EXIT_OK


def cmd_export(args) -> int:
    bundle = _load_valid(args.path)
    text = to_json(bundle) if args.format == "json" else to_dot(args.level, bundle)
    _write(text, args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tm", description="Thinging machine models: validate, inspect, simulate, export.")
    p.add_argument("--version", action="version", version=f"tm {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate", help="check a .tm model and report diagnostics")
    v.add_argument("path")
    v.add_argument("--json", action="store_true", help="JSON-lines diagnostics on stderr")
    v.set_defaults(func=cmd_validate)

    e = sub.add_parser("events", help="list declared events")
    e.add_argument("path")
    e.add_argument("--json", action="store_true", help="one JSON object per event")
    e.set_defaults(func=cmd_events)

    pl = sub.add_parser("plans", help="enumerate maximal paths through a chronology")
    pl.add_argument("path")
    pl.add_argument("--start")
    pl.add_argument("--repeat-bound", type=int, default=DEFAULT_REPEAT_BOUND)
    pl.add_argument("--chronology")
    pl.add_argument("--out")
    pl.set_defaults(func=cmd_plans)

    s = sub.add_parser("simulate", help="run a chronology under a JSON scenario")
    s.add_argument("path")
    s.add_argument("--scenario", required=True)
    s.add_argument("--chronology")
    s.add_argument("--out")
    s.set_defaults(func=cmd_simulate)

    x = sub.add_parser("export", help="render DOT or JSON")
    x.add_argument("path")
    x.add_argument("--level", choices=LEVELS, default="static")
    x.add_argument("--format", choices=("dot", "json"), default="dot")
    x.add_argument("--out")
    x.set_defaults(func=cmd_export)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _Fail as f:
        return f.code


if __name__ == "__main__":
    sys.exit(main())
