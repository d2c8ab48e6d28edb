"""Command-line entry point."""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import report as R
from .models import ModelKind
from .scenarios import REGISTRY, ScenarioError, load_scenario_file, make_scenario

OUTPUT_DIR_ENV = "PARALLEL_LIVES_OUTPUT_DIR"


def _param(text: str) -> tuple[str, object]:
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    k, v = text.split("=", 1)
    try:
        return k, json.loads(v)
    except json.JSONDecodeError:
        return k, v


def parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="parallel-lives", description="Simulate idealized quantum experiments "
                                "as causal graphs under several interpretations.")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run one scenario under one model")
    src = r.add_mutually_exclusive_group(required=True)
    src.add_argument("--scenario", choices=sorted(REGISTRY))
    src.add_argument("--scenario-file", type=Path, help="scenario descriptor JSON")
    r.add_argument("--model", choices=[m.value for m in ModelKind], default=ModelKind.PARALLEL_LIVES.value)
    r.add_argument("--param", type=_param, action="append", default=[], metavar="KEY=VALUE",
                   help="scenario parameter (repeatable)")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--samples", type=int, default=0, help="sampled futures (inflation model)")
    r.add_argument("--format", choices=["json", "csv"], default="json")
    r.add_argument("--tolerance", type=float, default=1e-9)
    r.add_argument("--out", type=Path, help="output file; relative paths go under $" + OUTPUT_DIR_ENV)
    r.add_argument("--no-audit", action="store_true", help="skip the fluid and locality audits")
    sub.add_parser("list", help="list registered scenarios")
    return p


def _resolve(out: Path) -> Path:
    base = os.environ.get(OUTPUT_DIR_ENV)
    if base and not out.is_absolute():
        out = Path(base) / out
    out.parent.mkdir(parents=True, exist_ok=True)
    return out


def main(argv: list[str] | None = None) -> int:
    p = parser()
    args = p.parse_args(argv)
    if args.command == "list":
        for name, spec in sorted(REGISTRY.items()):
            print(f"{name}\t{json.dumps(spec.defaults, default=str)}")
        return 0
    if args.samples < 0 or args.tolerance <= 0:
        p.error("--samples must be >= 0 and --tolerance > 0")
    try:
        if args.scenario_file is not None:
            desc = load_scenario_file(args.scenario_file)
            if args.param:
                desc = make_scenario(desc.name, **{**desc.params, **dict(args.param)})
        else:
            desc = make_scenario(args.scenario, **dict(args.param))
        rep = R.run(desc, args.model, args.seed, args.samples, args.tolerance, audits=not args.no_audit)
    except (ScenarioError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"parallel-lives: error: {exc}", file=sys.stderr)
        return 2
    text = rep.dumps() if args.format == "json" else rep.to_csv()
    if args.out is not None:
        _resolve(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0 if rep.passed else 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
