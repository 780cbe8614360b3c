"""Command-line access to the audit pipeline.

Subcommands mirror the workflow: ingest, match, audit, multiworkload,
explain, resolve, serve, plus a synthetic-dataset generator for demos.
Exit codes: 0 success, 1 validation problem, 2 internal error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from pathlib import Path

from .audit import ALL_MEASURES, AuditConfig
from .explain import ExplainError, ExplanationQuery
from .ingest import IngestError, SensitiveAttributeSpec
from .matchers import ScoreFileError, UntrainableError
from .resolve import DEFAULT_ENUMERATION_CAP, ResolutionConfig, ResolveError
from .session import Session, SessionError
from .synth import PROFILES, generate

AUDIT_CSV_COLUMNS = (
    "matcher", "paradigm", "measure", "group", "group_value", "overall_value",
    "disparity", "mode", "unfair", "tp", "fp", "fn", "tn", "annotation",
)

_VALIDATION_ERRORS = (
    IngestError, ScoreFileError, UntrainableError, ExplainError, ResolveError,
    SessionError, ValueError, KeyError,
)


class CliError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # validation failures exit 1, not argparse's 2
        raise CliError(message)


def _use_color() -> bool:
    return sys.stdout.isatty() and not os.environ.get("NO_COLOR")


def _parse_sensitive(text: str) -> SensitiveAttributeSpec:
    """Accept a JSON file path, inline JSON, or comma-separated attribute names."""
    path = Path(text)
    if path.exists():
        return SensitiveAttributeSpec.from_json(json.loads(path.read_text(encoding="utf-8")))
    stripped = text.strip()
    if stripped.startswith("{"):
        return SensitiveAttributeSpec.from_json(json.loads(stripped))
    return SensitiveAttributeSpec.from_json(
        {"attributes": [{"name": name.strip()} for name in stripped.split(",") if name.strip()]}
    )


def _group_text(group) -> str:
    return "|".join(group) if isinstance(group, list) else group


def _audit_rows_to_csv(entries: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(AUDIT_CSV_COLUMNS)
    for e in entries:
        writer.writerow(
            [
                e["matcher"], e["paradigm"], e["measure"], _group_text(e["group"]),
                e["group_value"], e["overall_value"], e["disparity"], e["mode"], e["unfair"],
                e["support"]["tp"], e["support"]["fp"], e["support"]["fn"], e["support"]["tn"],
                e["annotation"],
            ]
        )
    return buf.getvalue()


def _print_audit_table(entries: list[dict]) -> None:
    color = _use_color()

    def fmt(value):
        return "-" if value is None else (f"{value:.4f}" if isinstance(value, float) else value)

    print(f"{'matcher':<18} {'measure':<18} {'group':<22} {'value':>8} {'overall':>8} "
          f"{'disparity':>9}  flag")
    for e in entries:
        flag = "UNFAIR" if e["unfair"] else (e["annotation"] or "ok")
        if color and e["unfair"]:
            flag = f"\x1b[31m{flag}\x1b[0m"
        print(
            f"{e['matcher']:<18} {e['measure']:<18} {_group_text(e['group']):<22} "
            f"{fmt(e['group_value']):>8} {fmt(e['overall_value']):>8} "
            f"{fmt(e['disparity']):>9}  {flag}"
        )


def _emit(artifact: dict, args, csv_text: str | None = None) -> None:
    if getattr(args, "json", False):
        print(json.dumps(artifact, indent=2))
    elif getattr(args, "csv", False) and csv_text is not None:
        print(csv_text, end="")
    elif "entries" in artifact:
        _print_audit_table(artifact["entries"])
    else:
        print(json.dumps(artifact, indent=2))


def build_parser() -> _Parser:
    parser = _Parser(prog="matchaudit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="load a dataset into a new session directory")
    p.add_argument("--table-a", required=True)
    p.add_argument("--table-b", required=True)
    p.add_argument("--train")
    p.add_argument("--valid")
    p.add_argument("--test")
    p.add_argument("--pairs", help="single pair file to split with --split-ratios")
    p.add_argument("--split-ratios", default="0.6,0.2,0.2")
    p.add_argument("--split-seed", type=int, default=0)
    p.add_argument("--sensitive", required=True,
                   help="JSON file, inline JSON, or comma-separated attribute names")
    p.add_argument("--mode", default="match-and-evaluate",
                   choices=("match-and-evaluate", "evaluate-only"))
    p.add_argument("--scores", help="external score file (evaluate-only)")
    p.add_argument("--name", default="scores", help="name for the external matcher")
    p.add_argument("--out", required=True, help="session directory to create")

    p = sub.add_parser("match", help="train built-in matchers or register external scores")
    p.add_argument("--session", required=True)
    p.add_argument("--matchers", help="comma-separated kinds, e.g. threshold,logistic")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scores", help="external score file to register instead of training")
    p.add_argument("--name", default="scores")

    p = sub.add_parser("audit", help="run the fairness audit")
    p.add_argument("--session", required=True)
    p.add_argument("--paradigm", default="single", choices=("single", "pairwise"))
    p.add_argument("--measures", default=",".join(ALL_MEASURES))
    p.add_argument("--match-threshold", type=float, default=0.5)
    p.add_argument("--fairness-threshold", type=float, default=0.2)
    p.add_argument("--mode", default="subtraction", choices=("subtraction", "division"))
    p.add_argument("--min-support", type=int, default=10)
    p.add_argument("--unfair-only", action="store_true")
    p.add_argument("--json", action="store_true")
    p.add_argument("--csv", action="store_true")

    p = sub.add_parser("multiworkload", help="bootstrap workloads and z-test each group")
    p.add_argument("--session", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("explain", help="explain one (group, measure) finding")
    p.add_argument("--session", required=True)
    p.add_argument("--group", required=True, help="group name, or a|b for a pair")
    p.add_argument("--measure", required=True)
    p.add_argument("--matcher", help="defaults to the only matcher in the session")
    p.add_argument("--paradigm", default="single", choices=("single", "pairwise"))
    p.add_argument("--samples", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--split", default="train", choices=("train", "valid", "test"))

    p = sub.add_parser("resolve", help="explore per-group matcher assignments")
    p.add_argument("apply_cmd", nargs="?", choices=("apply",),
                   help="`resolve apply --assignment file.json` re-audits a strategy")
    p.add_argument("--session", required=True)
    p.add_argument("--measure", default="tprp")
    p.add_argument("--mode", default="subtraction", choices=("subtraction", "division"))
    p.add_argument("--cap", type=int, default=DEFAULT_ENUMERATION_CAP)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--target-group")
    p.add_argument("--assignment", help="JSON file mapping group -> matcher (apply)")
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("demo", help="generate a planted-bias synthetic dataset")
    p.add_argument("--profile", default="faculty", choices=PROFILES)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--bind", default=os.environ.get("MATCHAUDIT_BIND", "127.0.0.1:8400"))
    p.add_argument("--root", default=os.environ.get("MATCHAUDIT_ROOT"),
                   help="directory holding session artifacts")
    p.add_argument("--cap", type=int,
                   default=int(os.environ.get("MATCHAUDIT_CAP", DEFAULT_ENUMERATION_CAP)))
    return parser


def _cmd_ingest(args) -> int:
    session = Session.create(args.out)
    kwargs = dict(
        sensitive=_parse_sensitive(args.sensitive),
        mode=args.mode,
        scores=args.scores,
        scores_name=args.name,
    )
    if args.pairs:
        ratios = tuple(float(r) for r in args.split_ratios.split(","))
        if len(ratios) != 3:
            raise CliError("--split-ratios needs three comma-separated fractions")
        summary = session.ingest(
            args.table_a, args.table_b, pairs=args.pairs,
            split_ratios=ratios, split_seed=args.split_seed, **kwargs,
        )
    else:
        summary = session.ingest(
            args.table_a, args.table_b, args.train, args.valid, args.test, **kwargs
        )
    print(json.dumps(summary, indent=2))
    return 0


def _cmd_match(args) -> int:
    session = Session.open(args.session)
    if args.scores:
        matcher_id = session.add_external_scores(args.scores, name=args.name)
        print(f"registered {matcher_id}")
        return 0
    if not args.matchers:
        raise CliError("pass --matchers kinds or --scores file.csv")
    kinds = [k.strip() for k in args.matchers.split(",") if k.strip()]
    trained = session.train(kinds, seed=args.seed)
    print(f"trained {', '.join(trained)}")
    return 0


def _cmd_audit(args) -> int:
    session = Session.open(args.session)
    measures = tuple(sorted(m.strip() for m in args.measures.split(",") if m.strip()))
    config = AuditConfig(
        paradigm=args.paradigm,
        measures=measures,
        tau_match=args.match_threshold,
        theta_fair=args.fairness_threshold,
        mode=args.mode,
        unfair_only=args.unfair_only,
        min_support=args.min_support,
    )
    artifact = session.run_audit(config)
    _emit(artifact, args, _audit_rows_to_csv(artifact["entries"]))
    return 0


def _cmd_multiworkload(args) -> int:
    session = Session.open(args.session)
    artifact = session.run_multiworkload(args.k, args.seed, args.alpha)
    if args.json:
        print(json.dumps(artifact, indent=2))
    else:
        print(f"{'matcher':<18} {'measure':<18} {'group':<22} {'k':>4} {'mean':>7} "
              f"{'z':>8} {'p':>9}  reject")
        for row in artifact["rows"]:
            z = "-" if row["z"] is None else f"{row['z']:8.3f}"
            p = "-" if row["p_value"] is None else f"{row['p_value']:9.2e}"
            mean = "-" if row["mean"] is None else f"{row['mean']:7.4f}"
            print(f"{row['matcher']:<18} {row['measure']:<18} {_group_text(row['group']):<22} "
                  f"{row['k']:>4} {mean} {z:>8} {p:>9}  {row['reject']}")
    return 0


def _cmd_explain(args) -> int:
    session = Session.open(args.session)
    matcher = args.matcher
    if matcher is None:
        ids = session.matcher_ids()
        if len(ids) != 1:
            raise CliError(f"--matcher needed; session has {len(ids)} matchers: {', '.join(ids)}")
        matcher = ids[0]
    group = tuple(args.group.split("|")) if "|" in args.group else args.group
    query = ExplanationQuery(
        matcher_id=matcher, group=group, measure_id=args.measure,
        paradigm=args.paradigm, sample_size=args.samples, seed=args.seed,
    )
    print(json.dumps(session.run_explain(query, split=args.split), indent=2))
    return 0


def _cmd_resolve(args) -> int:
    session = Session.open(args.session)
    if args.apply_cmd == "apply":
        if not args.assignment:
            raise CliError("resolve apply needs --assignment file.json")
        assignment = json.loads(Path(args.assignment).read_text(encoding="utf-8"))
        artifact = session.run_strategy(assignment)
        _emit(artifact, args, _audit_rows_to_csv(artifact["entries"]))
        return 0
    config = ResolutionConfig(
        measure_id=args.measure, mode=args.mode, cap=args.cap,
        target_group=args.target_group, seed=args.seed,
    )
    artifact = session.run_resolve(config)
    if args.json:
        print(json.dumps(artifact, indent=2))
    else:
        points = artifact["points"]
        print(f"{len(points)} assignments scored; frontier of {len(artifact['frontier_indices'])}:")
        for i in artifact["frontier_indices"]:
            p = points[i]
            label = ", ".join(f"{g}->{m}" for g, m in p["assignment"].items())
            print(f"  F={p['F']:.4f} A={p['A']:.4f}  {label}")
    return 0


def _cmd_demo(args) -> int:
    meta = generate(args.profile, args.seed, args.out)
    print(json.dumps(meta, indent=2))
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    if not args.root:
        raise CliError("pass --root or set MATCHAUDIT_ROOT")
    host, _, port = args.bind.rpartition(":")
    app = create_app(root=args.root, enumeration_cap=args.cap)
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port))
    return 0


_COMMANDS = {
    "ingest": _cmd_ingest,
    "match": _cmd_match,
    "audit": _cmd_audit,
    "multiworkload": _cmd_multiworkload,
    "explain": _cmd_explain,
    "resolve": _cmd_resolve,
    "demo": _cmd_demo,
    "serve": _cmd_serve,
}


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return _COMMANDS[args.command](args)
    except CliError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except _VALIDATION_ERRORS as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except Exception as err:  # pragma: no cover - internal failures
        print(f"internal error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
