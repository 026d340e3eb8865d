"""Command-line front end.

    pltcp synth spec.json [--verify]
    pltcp tfim-noise --s-min 2 --s-max 10 --h 2 --eta 0.01 --trials 1000 --seed 0 --scenario both
    pltcp xyz-cp --s 3 4 --ranks 1-8 --restarts 20 --seed 0
    pltcp cost --s 2 4 8 --regime exact
    pltcp model tfim --s 4 --h 2

Every subcommand writes CSV (``model`` writes spec JSON) to stdout or ``--out``.
"""

from __future__ import annotations

import argparse
import json
import re
import sys
from typing import Optional

from .combine import SpecError, spec_from_json, spec_to_json
from .experiments import (
    SCENARIOS,
    NoiseScenario,
    cost_csv,
    cost_report,
    perturb_unitary,
    run_tfim_noise,
    run_xyz_cp,
    synth,
    to_csv,
)
from .models import tfim, xyz

__all__ = [
    "main",
    "build_parser",
    "load_spec",
    "perturb_unitary",
    "run_tfim_noise",
    "run_xyz_cp",
    "synth",
    "cost_report",
    "NoiseScenario",
]


class CliError(Exception):
    pass


def _term_lines(text: str) -> list[int]:
    """1-based line of each element of the top-level ``"terms"`` array."""
    lines: list[int] = []
    depth = 0
    line = 1
    i = 0
    in_terms = False
    terms_depth = -1
    expect_value = False
    last_key = None
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line += 1
        elif ch == '"':
            j = i + 1
            while j < n and text[j] != '"':
                j += 2 if text[j] == "\\" else 1
            if depth == 1 and not in_terms:
                last_key = text[i + 1 : j]
            i = j
        elif ch in "[{":
            if in_terms and depth == terms_depth and expect_value:
                lines.append(line)
                expect_value = False
            depth += 1
            if ch == "[" and depth == 2 and last_key == "terms" and not in_terms:
                in_terms, terms_depth, expect_value = True, depth, True
        elif ch in "]}":
            if in_terms and depth == terms_depth:
                in_terms = False
            depth -= 1
        elif ch == "," and in_terms and depth == terms_depth:
            expect_value = True
        i += 1
    return lines


def load_spec(path: str):
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CliError(f"{path}:{exc.lineno}:{exc.colno}: malformed JSON: {exc.msg}") from exc
    try:
        return spec_from_json(obj)
    except SpecError as exc:
        match = re.match(r"term (\d+)", str(exc))
        lines = _term_lines(text)
        if match and int(match.group(1)) < len(lines):
            raise CliError(f"{path}:{lines[int(match.group(1))]}: {exc}") from exc
        raise CliError(f"{path}: {exc}") from exc


def _parse_ints(text: str) -> list[int]:
    out: list[int] = []
    for part in text.replace(" ", "").split(","):
        if not part:
            continue
        if "-" in part:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    return out


def parse_ranks(text: str):
    """``"1-8"`` for every s, or ``"3:1-8;4:7,9"`` per s."""
    if ":" not in text:
        return _parse_ints(text)
    per_s = {}
    for chunk in text.split(";"):
        if chunk.strip():
            s, ranks = chunk.split(":", 1)
            per_s[int(s)] = _parse_ints(ranks)
    return per_s


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_synth(args) -> str:
    spec = load_spec(args.spec)
    summary, be = synth(spec, verify=args.verify)
    if args.encoding_out:
        from .encoding import encoding_to_json

        with open(args.encoding_out, "w", encoding="utf-8") as fh:
            json.dump(encoding_to_json(be), fh)
    return to_csv([summary])


def cmd_tfim_noise(args) -> str:
    labels = SCENARIOS if args.scenario == "all" else (args.scenario,)
    records = []
    for label in labels:
        scenario = NoiseScenario.from_label(label, args.eta, args.trials, args.seed)
        records.extend(run_tfim_noise(args.s_min, args.s_max, args.h, scenario))
    order = {label: k for k, label in enumerate(SCENARIOS)}
    records.sort(key=lambda r: (r.s, order.get(r.scenario, len(order)), r.trial))
    return to_csv(records)


def cmd_xyz_cp(args) -> str:
    s_values = sorted(args.s)
    ranks = parse_ranks(args.ranks)
    synth_rank = parse_ranks(args.synth_rank) if args.synth_rank else None
    if isinstance(synth_rank, list):
        synth_rank = synth_rank[0] if len(synth_rank) == 1 else None
    elif isinstance(synth_rank, dict):
        synth_rank = {s: r[0] for s, r in synth_rank.items()}
    rows = []
    for s in s_values:
        rows.extend(run_xyz_cp(s, s, ranks, args.restarts, args.seed, args.max_iters, synth_rank))
    return to_csv(rows)


def cmd_cost(args) -> str:
    regime = "approximate" if args.regime == "approx" else "exact"
    return cost_csv(cost_report(args.s, regime, args.eps))


def cmd_model(args) -> str:
    if args.family == "tfim":
        spec, _ = tfim(args.s, args.h)
    else:
        spec, _, _ = xyz(args.s)
    return json.dumps(spec_to_json(spec)) + "\n"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pltcp", description="Block-encoding synthesis experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="synthesize a CP-like spec from JSON")
    p.add_argument("spec")
    p.add_argument("--verify", action="store_true", help="measure the encoding error against the dense sum")
    p.add_argument("--encoding-out", help="also write the block-encoding JSON here")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("tfim-noise", help="coherent-noise trials on the Ising chain")
    p.add_argument("--s-min", type=int, default=2)
    p.add_argument("--s-max", type=int, default=10)
    p.add_argument("--h", type=float, default=2.0)
    p.add_argument("--eta", type=float, default=0.01)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scenario", choices=SCENARIOS + ("all",), default="all")
    p.set_defaults(func=cmd_tfim_noise)

    p = sub.add_parser("xyz-cp", help="CP rank sweeps of the spin-1 chain")
    p.add_argument("--s", type=int, nargs="+", required=True)
    p.add_argument("--ranks", required=True, help='e.g. "1-8" or "3:1-8;4:7,9"')
    p.add_argument("--restarts", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-iters", type=int, default=500)
    p.add_argument("--synth-rank", help='rank to compile end to end, e.g. "7" or "4:7"')
    p.set_defaults(func=cmd_xyz_cp)

    p = sub.add_parser("cost", help="leading-order CNOT counts")
    p.add_argument("--s", type=int, nargs="+", required=True)
    p.add_argument("--regime", choices=("exact", "approx"), default="exact")
    p.add_argument("--eps", type=float)
    p.set_defaults(func=cmd_cost)

    p = sub.add_parser("model", help="emit a model as spec JSON")
    p.add_argument("family", choices=("tfim", "xyz"))
    p.add_argument("--s", type=int, required=True)
    p.add_argument("--h", type=float, default=2.0)
    p.set_defaults(func=cmd_model)

    for name in ("synth", "tfim-noise", "xyz-cp", "cost", "model"):
        sub.choices[name].add_argument("--out", help="write output to this path instead of stdout")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        text = args.func(args)
    except (CliError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    _emit(text, args.out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
