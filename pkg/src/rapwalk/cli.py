"""Command-line entry point.

Subcommands mirror the experiment kinds (constants, green, rwre, rap,
invariance, scaling) plus `selftest` for the acceptance gates.  Each
experiment subcommand reads a YAML config (see README for the schema);
--seed/--threads/--out override the config values.  Exit codes: 0 on
success, 1 on errors, 2 when a selftest gate fails.
"""

from __future__ import annotations

import argparse
import json
import sys

from .errors import RapwalkError

_KIND_FOR_COMMAND = {
    "constants": "constants",
    "green": "green",
    "rwre": "rwre-cov",
    "rap": "rap-cov",
    "invariance": "invariance",
    "scaling": "scaling",
}


def _add_common(p: argparse.ArgumentParser, config_required: bool):
    p.add_argument("--config", required=config_required, help="YAML experiment config")
    p.add_argument("--seed", type=int, help="override the config base seed")
    p.add_argument("--threads", type=int, help="override the config thread count")
    p.add_argument("--out", help="override the config output directory")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="rapwalk",
        description="Random average process / space-time RWRE: constants, Green tables, "
                    "and fluctuation experiments.",
    )
    sub = ap.add_subparsers(dest="command", required=True)
    for cmd, kind in _KIND_FOR_COMMAND.items():
        p = sub.add_parser(cmd, help=f"run a {kind} experiment")
        _add_common(p, config_required=(cmd != "constants"))
        if cmd == "constants":
            p.add_argument("--law", help="inline law spec as JSON, e.g. "
                                         '\'{"variant": "two_point_beta", "m": 2, "j": 1}\'')
    p = sub.add_parser("selftest", help="run the acceptance gates")
    p.add_argument("--quick", action="store_true", help="reduced Monte Carlo sizes (smoke run)")
    p.add_argument("--only", help="comma-separated criterion numbers, e.g. 1,3,5")
    return ap


def _headline(kind: str, results: dict) -> dict:
    """The one or two numbers someone running the experiment wants first."""
    if kind == "rwre-cov":
        return {
            "backward_max_abs_z": results["backward_cov"]["max_abs_z"],
            "forward_max_abs_z": results["forward_var"]["max_abs_z"],
        }
    if kind == "rap-cov":
        return {"cov_max_abs_z": results["cov"]["max_abs_z"]}
    if kind == "scaling":
        return {"slope": results["fit"]["slope"], "slope_stderr": results["fit"]["stderr"]}
    if kind == "invariance":
        return {
            "max_ks_over_crit1pct": max(
                c["ks_distance"] / c["ks_critical_1pct"] for c in results["cases"]
            )
        }
    if kind == "green":
        return {"worst_rel_err": max(r["rel_err"] for r in results["rows"])}
    return {}


def _experiment_config(args, kind: str):
    from .harness import ExperimentConfig

    if args.config:
        raw = ExperimentConfig.from_yaml(args.config).to_dict()
    else:  # constants with an inline law
        if not getattr(args, "law", None):
            raise RapwalkError("constants: provide --config or --law")
        raw = {"kind": "constants", "law": json.loads(args.law)}
    if raw.get("kind") != kind:
        raise RapwalkError(f"config kind {raw.get('kind')!r} does not match subcommand ({kind})")
    for field in ("seed", "threads", "out"):
        v = getattr(args, field, None)
        if v is not None:
            raw[field] = v
    return ExperimentConfig.from_dict(raw)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "selftest":
            from .acceptance import run_all

            try:
                only = {int(x) for x in args.only.split(",")} if args.only else None
            except ValueError as exc:
                raise RapwalkError(f"--only expects comma-separated integers: {exc}") from exc
            results = run_all(quick=args.quick, only=only)
            return 0 if all(r.passed for r in results) else 2

        from .harness import run

        kind = _KIND_FOR_COMMAND[args.command]
        cfg = _experiment_config(args, kind)
        result = run(cfg)
        if cfg.kind == "constants":
            print(result.results["text"])
            print(json.dumps(result.to_json_dict()["results"]["constants"], indent=2))
        else:
            summary = {k: v for k, v in result.results.items()
                       if not isinstance(v, (list, dict))}
            summary.update(_headline(cfg.kind, result.results))
            print(json.dumps({"kind": cfg.kind, **summary}, indent=2, default=str))
        if cfg.out:
            for p in result.write(cfg.out):
                print(f"wrote {p}")
        return 0
    except RapwalkError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
