"""Command-line front end.

Subcommands: ``report`` (exact collision quantities for a pair),
``figure`` (empirical-vs-exact scatter data over a manifest of pairs),
``lowerbound`` (the adversarial uniform family), ``lowcomm`` (bounded
communication sessions), and ``specdec`` (toy speculative decoding).

Every command is deterministic given its flags; the seed defaults to
the ``COUPLING_SEED`` environment variable.  Exit codes: 0 success,
2 input error, 3 protocol violation or pathological input.
"""

import argparse
import csv
import io
import json
import os
import sys
from itertools import combinations

from .analysis import (
    CollisionReport,
    adversarial_family,
    collision_report,
    exact_collision_gumbel,
    exact_collision_wmh,
    monte_carlo_collision,
)
from .distributions import load_distribution, tv_distance
from .errors import PathologicalInput, ProtocolViolation
from .lowcomm import run_lowcomm, simulate_sessions
from .protocols import ProtocolKind
from .randomness import SharedRandomSource
from .specdec import (
    GenerationMode,
    acceptance_report,
    generate_drafter_invariant,
    generate_no_drafter,
    generate_standard,
    load_model,
    position_pairs,
)

_METHODS = {"gumbel": ProtocolKind.GUMBEL, "wmh": ProtocolKind.WEIGHTED_MINHASH}


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.12g}"
    return str(value)


def _write_csv(header, rows, out) -> None:
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])


def _emit(args, text: str) -> None:
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _default_seed() -> int:
    return int(os.environ.get("COUPLING_SEED", "0"))


def cmd_report(args) -> int:
    p = load_distribution(args.p_file)
    q = load_distribution(args.q_file)
    report = collision_report(p, q)
    if args.format == "json":
        _emit(args, json.dumps(report.to_json_dict(), indent=2) + "\n")
    else:
        buf = io.StringIO()
        _write_csv(CollisionReport.CSV_HEADER, [report.to_csv_row()], buf)
        _emit(args, buf.getvalue())
    return 0


def _manifest_pairs(args):
    with open(args.manifest, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if isinstance(doc, list):
        return [(load_distribution(e["p"]), load_distribution(e["q"])) for e in doc]
    if isinstance(doc, dict) and "specdec" in doc:
        spec = doc["specdec"]
        target = load_model(spec["target"])
        drafter = load_model(spec["drafter"])
        return position_pairs(
            target, drafter, int(spec["length"]), int(spec.get("seed", args.seed))
        )
    raise ValueError("manifest must be a list of {p, q} entries or carry a 'specdec' spec")


def cmd_figure(args) -> int:
    pairs = _manifest_pairs(args)
    root = SharedRandomSource(args.seed, "figure")
    rows = []
    for i, (p, q) in enumerate(pairs):
        tv = tv_distance(p, q)
        est_g = monte_carlo_collision(
            ProtocolKind.GUMBEL, p, q, args.trials, root.derive("gumbel").derive_index(i).key
        )
        est_w = monte_carlo_collision(
            ProtocolKind.WEIGHTED_MINHASH, p, q, args.trials, root.derive("wmh").derive_index(i).key
        )
        rows.append((tv, est_g.estimate, est_w.estimate, (1 - tv) / (1 + tv), 1 - tv))
    header = ("tv", "empirical_gumbel", "empirical_wmh", "bound", "optimal")
    if args.format == "json":
        docs = [dict(zip(header, row)) for row in rows]
        _emit(args, json.dumps(docs, indent=2) + "\n")
    else:
        buf = io.StringIO()
        _write_csv(header, rows, buf)
        _emit(args, buf.getvalue())
    return 0


def cmd_lowerbound(args) -> int:
    family = adversarial_family(args.d)
    root = SharedRandomSource(args.seed, "lowerbound")
    bound = (1 - 1 / args.d) / (1 + 1 / args.d)
    tvs = set()
    emp_g, emp_w, exact_g, exact_w = [], [], [], []
    for k, (i, j) in enumerate(combinations(range(len(family)), 2)):
        p, q = family[i], family[j]
        tvs.add(tv_distance(p, q))
        exact_g.append(exact_collision_gumbel(p, q))
        exact_w.append(exact_collision_wmh(p, q))
        emp_g.append(
            monte_carlo_collision(
                ProtocolKind.GUMBEL, p, q, args.trials, root.derive("gumbel").derive_index(k).key
            ).estimate
        )
        emp_w.append(
            monte_carlo_collision(
                ProtocolKind.WEIGHTED_MINHASH,
                p,
                q,
                args.trials,
                root.derive("wmh").derive_index(k).key,
            ).estimate
        )
    summary = {
        "d": args.d,
        "pairs": len(exact_g),
        "pairwise_tv": sorted(tvs)[0] if len(tvs) == 1 else sorted(tvs),
        "bound": bound,
        "min_exact_gumbel": min(exact_g),
        "min_exact_wmh": min(exact_w),
        "min_empirical_gumbel": min(emp_g),
        "min_empirical_wmh": min(emp_w),
    }
    if args.format == "json":
        _emit(args, json.dumps(summary, indent=2) + "\n")
    else:
        buf = io.StringIO()
        _write_csv(list(summary), [tuple(summary.values())], buf)
        _emit(args, buf.getvalue())
    return 0


def cmd_lowcomm(args) -> int:
    p = load_distribution(args.p_file)
    q = load_distribution(args.q_file)
    if args.transcripts:
        stats = _lowcomm_with_transcripts(args, p, q)
    else:
        stats = simulate_sessions(p, q, args.epsilon, args.sessions, args.seed)
    doc = stats.to_json_dict()
    if args.format == "json":
        _emit(args, json.dumps(doc, indent=2) + "\n")
    else:
        buf = io.StringIO()
        _write_csv(list(doc), [tuple(doc.values())], buf)
        _emit(args, buf.getvalue())
    return 0


def _lowcomm_with_transcripts(args, p, q):
    """Scalar session loop so full transcripts can be logged; the
    summary equals the batch path for the same seed."""
    root = SharedRandomSource(args.seed, "sessions")
    with open(args.transcripts, "w", encoding="utf-8") as fh:
        for t in range(args.sessions):
            result = run_lowcomm(p, q, args.epsilon, root.derive_index(t))
            result.transcript.write(fh)
    return simulate_sessions(p, q, args.epsilon, args.sessions, args.seed)


def cmd_specdec(args) -> int:
    target = load_model(args.target)
    drafters = [load_model(path) for path in args.drafters]
    method = _METHODS[args.method]
    if args.mode == "invariant":
        baseline = generate_no_drafter(target, args.length, args.seed, method)
        runs = [
            generate_drafter_invariant(target, d, args.length, args.seed, method)
            for d in drafters
        ]
        doc = {
            "mode": runs[0].mode.value if runs else GenerationMode.NO_DRAFTER.value,
            "tokens": list(baseline.tokens),
            "drafters": [
                {
                    "name": d.name,
                    "draft_tokens": list(r.draft_tokens),
                    "accepted": [int(f) for f in r.accepted],
                    "acceptance": acceptance_report(r).aggregate,
                    "tvs": list(r.tvs),
                }
                for d, r in zip(drafters, runs)
            ],
        }
    else:
        runs = [generate_standard(target, d, args.length, args.seed) for d in drafters]
        doc = {
            "mode": GenerationMode.STANDARD.value,
            "drafters": [
                {
                    "name": d.name,
                    "tokens": list(r.tokens),
                    "draft_tokens": list(r.draft_tokens),
                    "accepted": [int(f) for f in r.accepted],
                    "acceptance": acceptance_report(r).aggregate,
                    "tvs": list(r.tvs),
                }
                for d, r in zip(drafters, runs)
            ],
        }
    if args.format == "json":
        _emit(args, json.dumps(doc, indent=2) + "\n")
        return 0
    rows = []
    for entry, run in zip(doc["drafters"], runs):
        tokens = doc["tokens"] if args.mode == "invariant" else entry["tokens"]
        for i in range(args.length):
            rows.append(
                (
                    entry["name"],
                    i,
                    tokens[i],
                    entry["draft_tokens"][i],
                    entry["accepted"][i],
                    entry["tvs"][i],
                )
            )
    buf = io.StringIO()
    _write_csv(("drafter", "position", "token", "draft_token", "accepted", "tv"), rows, buf)
    _emit(args, buf.getvalue())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="couplekit",
        description="Coupled sampling protocols for discrete distributions",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, trials_default=20000):
        p.add_argument("--seed", type=int, default=_default_seed(), help="base seed (env COUPLING_SEED)")
        p.add_argument("--trials", type=int, default=trials_default)
        p.add_argument("--out", help="output path (default stdout)")
        p.add_argument("--format", choices=("csv", "json"), default="csv")

    p_report = sub.add_parser("report", help="exact collision quantities for a pair")
    p_report.add_argument("p_file")
    p_report.add_argument("q_file")
    common(p_report)
    p_report.set_defaults(func=cmd_report)

    p_figure = sub.add_parser("figure", help="empirical collision scatter data")
    p_figure.add_argument("manifest")
    common(p_figure)
    p_figure.set_defaults(func=cmd_figure)

    p_lb = sub.add_parser("lowerbound", help="adversarial family saturation")
    p_lb.add_argument("--d", type=int, required=True)
    common(p_lb)
    p_lb.set_defaults(func=cmd_lowerbound)

    p_lc = sub.add_parser("lowcomm", help="bounded-communication sessions")
    p_lc.add_argument("p_file")
    p_lc.add_argument("q_file")
    p_lc.add_argument("--epsilon", type=float, required=True)
    p_lc.add_argument("--sessions", type=int, default=10000)
    p_lc.add_argument("--transcripts", help="JSON-lines transcript log path")
    common(p_lc)
    p_lc.set_defaults(func=cmd_lowcomm)

    p_sd = sub.add_parser("specdec", help="toy speculative decoding")
    p_sd.add_argument("target")
    p_sd.add_argument("drafters", nargs="+")
    p_sd.add_argument("--length", type=int, default=32)
    p_sd.add_argument("--mode", choices=("invariant", "standard"), default="invariant")
    p_sd.add_argument("--method", choices=("gumbel", "wmh"), default="gumbel")
    common(p_sd)
    p_sd.set_defaults(func=cmd_specdec)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ProtocolViolation, PathologicalInput) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ValueError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
