"""Command-line interface.

Commands: eval, crosscheck, check-inv, check-omega, refine, props,
corpus, export-mdp.  Machine-readable output with --format json is
byte-identical across runs for fixed inputs and seed; timing data is
only emitted under --timings (to stderr in text mode) so that the
default output stays deterministic.

Exit codes: 0 success or Holds, 1 a check failed, 2 input error,
3 inconclusive.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from fractions import Fraction
from typing import Dict, List, Optional, Tuple

from . import __version__
from .corpus import ENTRIES
from .invariants import (
    OmegaInvariantSpec,
    PreconditionFailed,
    StateDomain,
    UpperInvariantSpec,
    Verdict,
    check_limit,
    check_omega_invariant,
    check_upper_invariant,
    refine,
)
from .kernel import KernelError, State, XReal
from .mdp import MdpConfig, NodeCapExceeded, build_mdp, cross_check, mdp_to_dot
from .parser import ParseError, parse_program, parse_rt
from .props import run_property_suite
from .semantics import EvalError
from .specfile import InvariantSpecFile, SpecError, load_spec
from .syntax import Program, RtExpr, RT_ZERO
from .transformer import ErtConfig, expected_runtime
from .specfile import parse_domain  # noqa: F401  (re-exported for scripting)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_INPUT_ERROR = 2
EXIT_INCONCLUSIVE = 3

_SCHEMA = "ertkit-report/1"


class CliError(Exception):
    """Input or usage error; maps to exit code 2."""


def _default_node_cap() -> int:
    env = os.environ.get("ERTKIT_MAX_NODES")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise CliError(f"ERTKIT_MAX_NODES must be an integer, found {env!r}")
    return 200_000


def _rational_str(x: XReal) -> str:
    if x.is_infinite:
        return "inf"
    return str(x.q)


def _float_or_none(x: XReal) -> Optional[float]:
    if x.is_infinite:
        return None
    return float(x.q)


def _nice(x: XReal) -> str:
    """Short human form: integers plain, small denominators as p/q,
    everything else as a rounded decimal."""
    if x.is_infinite:
        return "inf"
    if x.q.denominator == 1:
        return str(x.q.numerator)
    if x.q.denominator <= 1000:
        return str(x.q)
    return f"{float(x.q):.12g}"


def _parse_value(text: str):
    low = text.strip().lower()
    if low == "true":
        return True
    if low == "false":
        return False
    try:
        return int(text)
    except ValueError:
        raise CliError(f"state values must be integers or booleans, found {text!r}")


def _parse_state(pairs: List[str]) -> State:
    # Array values use ; between cells so , can keep separating bindings.
    scalars: Dict[str, object] = {}
    arrays: Dict[str, tuple] = {}
    for chunk in pairs:
        for item in chunk.split(","):
            item = item.strip()
            if not item:
                continue
            if "=" not in item:
                raise CliError(f"state bindings look like name=value, found {item!r}")
            name, _, value = item.partition("=")
            name = name.strip()
            value = value.strip()
            if value.startswith("["):
                if not value.endswith("]"):
                    raise CliError(f"unterminated array value in {item!r}")
                cells = [v.strip() for v in value[1:-1].split(";") if v.strip()]
                try:
                    arrays[name] = tuple(int(c) for c in cells)
                except ValueError:
                    raise CliError(f"array cells must be integers in {item!r}")
            else:
                scalars[name] = _parse_value(value)
    return State(scalars, arrays)


def _parse_params(pairs: List[str]) -> Dict[str, int]:
    params: Dict[str, int] = {}
    for chunk in pairs:
        for item in chunk.split(","):
            item = item.strip()
            if not item:
                continue
            if "=" not in item:
                raise CliError(f"parameters look like name=value, found {item!r}")
            name, _, value = item.partition("=")
            try:
                params[name.strip()] = int(value)
            except ValueError:
                raise CliError(f"parameter {name.strip()!r} must be an integer")
    return params


def _load_program(ref: str, params: Dict[str, int]) -> Tuple[Program, str, Optional[str]]:
    """Returns (program, source text, corpus name or None)."""
    if ref.startswith("corpus:"):
        name = ref[len("corpus:") :]
        if name not in ENTRIES:
            known = ", ".join(sorted(ENTRIES))
            raise CliError(f"unknown corpus entry {name!r} (known: {known})")
        try:
            source = ENTRIES[name].source(**params)
        except KeyError as exc:
            raise CliError(str(exc.args[0]))
        return parse_program(source), source, name
    if params:
        raise CliError("--param only applies to corpus: programs")
    try:
        with open(ref, "r", encoding="utf-8") as handle:
            source = handle.read()
    except OSError as exc:
        raise CliError(f"cannot read program {ref!r}: {exc.strerror or exc}")
    return parse_program(source), source, None


def _load_runtime(text: Optional[str]) -> RtExpr:
    if text is None:
        return RT_ZERO
    if text.endswith(".rt") and os.path.exists(text):
        with open(text, "r", encoding="utf-8") as handle:
            text = handle.read()
    return parse_rt(text)


def _default_state(corpus_name: Optional[str]) -> State:
    if corpus_name is not None:
        return ENTRIES[corpus_name].initial_state()
    return State()


def _sha256(source: str) -> str:
    return hashlib.sha256(source.encode("utf-8")).hexdigest()


def _emit(args, payload: dict, text_lines: List[str], started: float) -> None:
    if args.format == "json":
        if args.timings:
            payload = dict(payload)
            payload["timings"] = {"total_s": round(time.monotonic() - started, 6)}
        json.dump(payload, sys.stdout, sort_keys=True, indent=2)
        sys.stdout.write("\n")
    else:
        for line in text_lines:
            print(line)
        if args.timings:
            print(f"time: {time.monotonic() - started:.3f}s", file=sys.stderr)


def _base_report(args, command: str) -> dict:
    return {
        "schema": _SCHEMA,
        "tool": {"name": "ertkit", "version": __version__},
        "command": command,
        "argv": args.argv_echo,
        "seed": getattr(args, "seed", None),
    }


# -- eval --------------------------------------------------------------


def _cmd_eval(args) -> int:
    started = time.monotonic()
    params = _parse_params(args.param)
    program, source, corpus_name = _load_program(args.program, params)
    f = _load_runtime(args.f)
    cfg = ErtConfig(max_unroll_depth=args.depth)
    states = [_parse_state([s]) for s in args.state] or [_default_state(corpus_name)]

    results = []
    text = [f"program sha256 {_sha256(source)[:12]}"]
    for sigma in states:
        res = expected_runtime(program, f, sigma, cfg)
        entry = {
            "state": repr(sigma),
            "rational": _rational_str(res.value),
            "float": _float_or_none(res.value),
            "kind": res.kind,
        }
        if res.kind == "lower":
            entry["depth"] = args.depth
            half = expected_runtime(
                program, f, sigma, ErtConfig(max_unroll_depth=max(1, args.depth // 2))
            )
            if res.value.is_finite and half.value.is_finite:
                gain = res.value.q - half.value.q
                entry["last_doubling_gain"] = str(gain)
                gap_note = f"; refinement from depth {max(1, args.depth // 2)}: +{float(gain):.6g}"
            else:
                gap_note = ""
            text.append(
                f"{sigma!r}: {_nice(res.value)} (lower bound, depth {args.depth})"
                + gap_note
            )
            text.append(f"  exact rational: {_rational_str(res.value)}")
        else:
            text.append(f"{sigma!r}: {_rational_str(res.value)} (exact)")
        if res.annotations_used:
            entry["annotations_used"] = list(res.annotations_used)
            text.append(f"  using annotated bounds: {', '.join(res.annotations_used)}")
        results.append(entry)

    payload = _base_report(args, "eval")
    payload["program_sha256"] = _sha256(source)
    payload["results"] = results
    _emit(args, payload, text, started)
    return EXIT_OK


# -- crosscheck --------------------------------------------------------


def _cmd_crosscheck(args) -> int:
    started = time.monotonic()
    params = _parse_params(args.param)
    program, source, corpus_name = _load_program(args.program, params)
    f = _load_runtime(args.f)
    sigma = _parse_state(args.state) if args.state else _default_state(corpus_name)
    cfg = MdpConfig(node_cap=args.node_cap)
    report = cross_check(
        program,
        f,
        sigma,
        cfg,
        ert_config=ErtConfig(max_unroll_depth=args.depth),
        fallback_unroll=args.fallback_depth,
        tol=args.tol,
    )

    payload = _base_report(args, "crosscheck")
    payload["program_sha256"] = _sha256(source)
    payload["result"] = {
        "status": report.status,
        "detail": report.detail,
        "transformer": {
            "rational": _rational_str(report.ert_value),
            "float": _float_or_none(report.ert_value),
            "kind": report.ert_kind,
        },
        "model": {
            "rational": _rational_str(report.mdp_value),
            "float": _float_or_none(report.mdp_value),
            "method": report.method,
        },
        "nodes": report.node_count,
        "bounded_at": report.bounded_at,
    }
    where = f" (bounded at depth {report.bounded_at})" if report.bounded_at else ""
    text = [
        f"program sha256 {_sha256(source)[:12]}",
        f"{report.status}: {report.detail}{where}",
        f"  transformer: {_nice(report.ert_value)} ({report.ert_kind})",
        f"  model:       {_nice(report.mdp_value)} via {report.method}, "
        f"{report.node_count} nodes",
    ]
    _emit(args, payload, text, started)
    return EXIT_OK if report.status == "pass" else EXIT_CHECK_FAILED


# -- invariant checks --------------------------------------------------


def _verdict_json(v: Verdict) -> dict:
    out: Dict[str, object] = {"status": v.status}
    if v.witness is not None:
        out["witness"] = repr(v.witness)
    if v.n is not None:
        out["n"] = v.n
    if v.lhs is not None:
        out["lhs"] = _rational_str(v.lhs)
    if v.rhs is not None:
        out["rhs"] = _rational_str(v.rhs)
    if v.reason is not None:
        out["reason"] = v.reason
    return out


def _verdict_text(label: str, v: Verdict) -> List[str]:
    lines = [f"{label}: {v.status}"]
    if v.status == "Fails":
        where = f" at n = {v.n}" if v.n is not None else ""
        lines.append(
            f"  witness {v.witness!r}{where}: lhs {_nice(v.lhs)} vs rhs {_nice(v.rhs)}"
        )
    elif v.reason is not None:
        lines.append(f"  {v.reason}")
    return lines


def _spec_or_die(path: str) -> InvariantSpecFile:
    try:
        return load_spec(path)
    except OSError as exc:
        raise CliError(f"cannot read spec {path!r}: {exc.strerror or exc}")


def _cmd_check_inv(args) -> int:
    started = time.monotonic()
    spec = _spec_or_die(args.spec)
    if spec.check != "upper":
        raise CliError(f"{args.spec} declares `check: {spec.check}`, expected upper")
    verdict = check_upper_invariant(
        spec.loop, spec.f, UpperInvariantSpec(spec.invariant), spec.domain
    )
    payload = _base_report(args, "check-inv")
    payload["program_sha256"] = _sha256(spec.program_source)
    payload["verdicts"] = [_verdict_json(verdict)]
    _emit(args, payload, _verdict_text("upper invariant", verdict), started)
    if verdict.status == "Holds":
        return EXIT_OK
    if verdict.status == "Fails":
        return EXIT_CHECK_FAILED
    return EXIT_INCONCLUSIVE


def _limit_consistent(v: Verdict) -> bool:
    return v.status == "Inconclusive" and v.reason is not None and (
        v.reason.startswith("consistent with")
    )


def _cmd_check_omega(args) -> int:
    started = time.monotonic()
    spec = _spec_or_die(args.spec)
    if spec.check != "omega":
        raise CliError(f"{args.spec} declares `check: {spec.check}`, expected omega")
    directions = ("lower", "upper") if spec.direction == "both" else (spec.direction,)
    verdicts: List[Tuple[str, Verdict]] = []
    for direction in directions:
        ospec = OmegaInvariantSpec(spec.invariant_n, direction, limit=spec.limit)
        verdicts.append(
            (
                f"omega invariant ({direction})",
                check_omega_invariant(
                    spec.loop, spec.f, ospec, n_max=spec.n_max, D=spec.domain
                ),
            )
        )
    if spec.limit is not None:
        ospec = OmegaInvariantSpec(spec.invariant_n, directions[0], limit=spec.limit)
        verdicts.append(
            (
                f"limit consistency (probe {spec.probe})",
                check_limit(
                    ospec, spec.domain, n_probe=spec.probe, tol=spec.tol, big=spec.big
                ),
            )
        )

    payload = _base_report(args, "check-omega")
    payload["program_sha256"] = _sha256(spec.program_source)
    payload["verdicts"] = [dict(_verdict_json(v), part=label) for label, v in verdicts]
    text: List[str] = []
    for label, v in verdicts:
        text.extend(_verdict_text(label, v))
    _emit(args, payload, text, started)

    if any(v.status == "Fails" for _, v in verdicts):
        return EXIT_CHECK_FAILED
    for label, v in verdicts:
        if label.startswith("limit"):
            if not _limit_consistent(v):
                return EXIT_INCONCLUSIVE
        elif v.status != "Holds":
            return EXIT_INCONCLUSIVE
    return EXIT_OK


def _cmd_refine(args) -> int:
    started = time.monotonic()
    spec = _spec_or_die(args.spec)
    if spec.check != "refine":
        raise CliError(f"{args.spec} declares `check: {spec.check}`, expected refine")
    try:
        table = refine(
            spec.loop,
            spec.f,
            spec.invariant,
            spec.domain,
            rounds=spec.rounds,
        )
    except PreconditionFailed as exc:
        payload = _base_report(args, "refine")
        payload["program_sha256"] = _sha256(spec.program_source)
        payload["error"] = {
            "kind": "PreconditionFailed",
            "state": repr(exc.state),
            "round": exc.round_index,
            "message": str(exc),
        }
        _emit(args, payload, [f"precondition failed: {exc}"], started)
        return EXIT_CHECK_FAILED

    ordered = sorted(table.items(), key=lambda kv: repr(kv[0]))
    payload = _base_report(args, "refine")
    payload["program_sha256"] = _sha256(spec.program_source)
    payload["table"] = [
        {"state": repr(sigma), "rational": _rational_str(value)}
        for sigma, value in ordered
    ]
    text = [f"refined bound after {spec.rounds} round(s):"]
    text.extend(f"  {sigma!r}: {_nice(value)}" for sigma, value in ordered)
    _emit(args, payload, text, started)
    return EXIT_OK


# -- props -------------------------------------------------------------


def _cmd_props(args) -> int:
    started = time.monotonic()
    config = ErtConfig(tick_mutation="drop-if-tick") if args.mutant else None
    report = run_property_suite(
        args.seed, count=args.count, max_depth=args.max_depth, config=config
    )
    payload = _base_report(args, "props")
    payload["requested"] = report.requested
    payload["checked"] = report.checked
    payload["per_property"] = dict(sorted(report.per_property.items()))
    payload["mutant"] = bool(args.mutant)
    payload["failures"] = [
        {
            "property": f.prop,
            "program": f.program,
            "f": f.f,
            "state": f.state,
            "detail": f.detail,
        }
        for f in report.failures
    ]
    text = [
        f"checked {report.checked} cases over {report.requested} programs "
        f"(seed {args.seed})"
    ]
    for name, n in sorted(report.per_property.items()):
        text.append(f"  {name}: {n}")
    if report.failures:
        text.append(f"{len(report.failures)} failure(s):")
        for f in report.failures[:10]:
            text.append(f"  [{f.prop}] {f.detail}")
            text.append("    program: " + " ".join(f.program.split()))
            text.append(f"    f: {f.f}  state: {f.state}")
        if len(report.failures) > 10:
            text.append(f"  ... and {len(report.failures) - 10} more")
    else:
        text.append("all properties hold")
    if args.mutant:
        caught = not report.ok
        payload["mutant_caught"] = caught
        text.append(
            "mutant caught by the suite" if caught else "mutant NOT caught"
        )
        _emit(args, payload, text, started)
        return EXIT_OK if caught else EXIT_CHECK_FAILED
    _emit(args, payload, text, started)
    return EXIT_OK if report.ok else EXIT_CHECK_FAILED


# -- corpus ------------------------------------------------------------


def _cmd_corpus(args) -> int:
    started = time.monotonic()
    if args.name not in ENTRIES:
        known = ", ".join(sorted(ENTRIES))
        raise CliError(f"unknown corpus entry {args.name!r} (known: {known})")
    entry = ENTRIES[args.name]
    params = _parse_params(args.param)
    for flag in ("N", "lead", "start", "threshold"):
        value = getattr(args, flag)
        if value is not None:
            params[flag] = value
    try:
        outcomes = entry.run_checks(**params)
    except KeyError as exc:
        raise CliError(str(exc.args[0]))

    payload = _base_report(args, "corpus")
    payload["entry"] = entry.name
    payload["params"] = dict(sorted(entry.resolved(**params).items()))
    payload["notes"] = entry.notes
    payload["checks"] = [
        {"name": o.name, "ok": o.ok, "detail": o.detail} for o in outcomes
    ]
    ok = all(o.ok for o in outcomes)
    text = [f"corpus entry {entry.name}: {entry.notes}"]
    for o in outcomes:
        text.append(f"  {'ok  ' if o.ok else 'FAIL'} {o.name}: {o.detail}")
    text.append("all checks passed" if ok else "some checks FAILED")
    _emit(args, payload, text, started)
    return EXIT_OK if ok else EXIT_CHECK_FAILED


# -- export-mdp --------------------------------------------------------


def _cmd_export_mdp(args) -> int:
    params = _parse_params(args.param)
    program, source, corpus_name = _load_program(args.program, params)
    f = _load_runtime(args.f)
    sigma = _parse_state(args.state) if args.state else _default_state(corpus_name)
    try:
        m = build_mdp(program, sigma, f, node_cap=args.node_cap)
    except NodeCapExceeded as exc:
        raise CliError(
            f"{exc}; raise --node-cap / ERTKIT_MAX_NODES or export a bounded "
            "variant of the program"
        )
    dot = mdp_to_dot(m)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as handle:
            handle.write(dot)
        print(f"wrote {m.node_count} nodes to {args.out}")
    else:
        sys.stdout.write(dot)
    return EXIT_OK


# -- wiring ------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ertkit",
        description="Expected run-time analysis for probabilistic programs.",
    )
    parser.add_argument("--version", action="version", version=f"ertkit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--format", choices=("text", "json"), default="text")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--timings", action="store_true", help="emit timing data")

    def program_args(p: argparse.ArgumentParser) -> None:
        p.add_argument("program", help="program file or corpus:NAME")
        p.add_argument(
            "--param",
            action="append",
            default=[],
            metavar="K=V",
            help="corpus parameter override (repeatable)",
        )
        p.add_argument(
            "--f",
            default=None,
            metavar="RT",
            help="continuation run-time: inline text or an .rt file (default 0)",
        )

    p = sub.add_parser("eval", help="expected run-time of a program")
    program_args(p)
    p.add_argument(
        "--state",
        action="append",
        default=[],
        metavar="BINDINGS",
        help="initial state, e.g. c=1 or x=2,y=0 (repeatable for several states)",
    )
    p.add_argument("--depth", type=int, default=64, help="loop unrolling cap")
    common(p)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser(
        "crosscheck", help="compare the transformer with the operational model"
    )
    program_args(p)
    p.add_argument("--state", action="append", default=[], metavar="BINDINGS")
    p.add_argument("--depth", type=int, default=64)
    p.add_argument("--node-cap", type=int, default=None)
    p.add_argument(
        "--fallback-depth",
        type=int,
        default=40,
        help="loop bound used when the full model exceeds the node cap",
    )
    p.add_argument("--tol", type=float, default=1e-9)
    common(p)
    p.set_defaults(func=_cmd_crosscheck)

    p = sub.add_parser("check-inv", help="check an upper invariant spec")
    p.add_argument("spec")
    common(p)
    p.set_defaults(func=_cmd_check_inv)

    p = sub.add_parser("check-omega", help="check an omega-invariant spec")
    p.add_argument("spec")
    common(p)
    p.set_defaults(func=_cmd_check_omega)

    p = sub.add_parser("refine", help="tighten a bound by applying the loop functional")
    p.add_argument("spec")
    common(p)
    p.set_defaults(func=_cmd_refine)

    p = sub.add_parser("props", help="randomized algebraic-law suite")
    p.add_argument("--count", type=int, default=500)
    p.add_argument("--max-depth", type=int, default=3)
    p.add_argument(
        "--mutant",
        action="store_true",
        help="run with the if-tick-dropping mutation; succeeds when caught",
    )
    common(p)
    p.set_defaults(func=_cmd_props)

    p = sub.add_parser("corpus", help="run a case study's scripted checks")
    p.add_argument("name", help=", ".join(sorted(ENTRIES)))
    p.add_argument("--param", action="append", default=[], metavar="K=V")
    p.add_argument("--N", type=int, default=None)
    p.add_argument("--lead", type=int, default=None)
    p.add_argument("--start", type=int, default=None)
    p.add_argument("--threshold", type=int, default=None)
    common(p)
    p.set_defaults(func=_cmd_corpus)

    p = sub.add_parser("export-mdp", help="write the operational model as DOT")
    program_args(p)
    p.add_argument("--state", action="append", default=[], metavar="BINDINGS")
    p.add_argument("--node-cap", type=int, default=None)
    p.add_argument("--out", default=None, metavar="FILE")
    common(p)
    p.set_defaults(func=_cmd_export_mdp)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = _build_parser()
    args = parser.parse_args(argv)
    args.argv_echo = argv
    if getattr(args, "node_cap", None) is None and hasattr(args, "node_cap"):
        args.node_cap = _default_node_cap()
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    except SpecError as exc:
        print(f"spec error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    except (EvalError, KernelError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR


if __name__ == "__main__":
    sys.exit(main())
