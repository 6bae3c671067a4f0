"""
CLI module - command-line entry point for distance queries, standardization,
scans, rendering and the verification suite.
"""
import argparse
import json
import os
import sys
from typing import List, Optional

from benzecri import standardize
from convex import ConvexBody, MarkedBody, body_from_json, body_to_json, make_family
from core import (
    DEFAULT_SEED,
    LOG_LEVEL,
    LOG_PATH,
    OUTPUT_DIR,
    THREADS,
    HilbertLabError,
    SchemaError,
    configure_logging,
    install_fatal_handler,
    logger,
)
from hilbert import displacement, distance
from projective import ProjectivePoint, map_from_json
from render import render_svg
from scenario import dump_json, load_scenario, margulis_scan, parse_point, run_scenario, stabilizer_experiment
from verify import SELECTORS, verify_suite


def _read_json_argument(value: str):
    """Inline JSON or a path to a JSON file."""
    text = value
    if not value.lstrip().startswith(("{", "[")):
        try:
            with open(value, "r", encoding="utf-8") as f:
                text = f.read()
        except OSError as e:
            raise SchemaError(f"cannot read {value}: {e}") from e
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise SchemaError(f"malformed JSON in {value[:40]!r}: {e}") from e


def load_body(value: str) -> ConvexBody:
    """--body accepts inline JSON, a JSON file, or family:<tag>[:<n>]."""
    if value.startswith("family:"):
        parts = value.split(":")
        if len(parts) > 2 and not parts[2].isdigit():
            raise SchemaError(f"family dimension in {value!r} is not an integer")
        return make_family(parts[1], int(parts[2]) if len(parts) > 2 else 2).body
    return body_from_json(_read_json_argument(value))


def _point(value: Optional[str], body: ConvexBody) -> ProjectivePoint:
    if value is None:
        return body.interior_point()
    if value.lstrip().startswith("["):
        coords = _read_json_argument(value)
    else:
        try:
            coords = [float(c) for c in value.split(",")]
        except ValueError as e:
            raise SchemaError(f"point {value!r} is not a comma-separated list of numbers") from e
    return parse_point(coords, body.dim)


def _floats(value: str) -> List[float]:
    try:
        return [float(c) for c in value.split(",") if c.strip()]
    except ValueError as e:
        raise SchemaError(f"{value!r} is not a comma-separated list of numbers") from e


def _emit(text: str, out: Optional[str]):
    if out:
        os.makedirs(os.path.dirname(os.path.abspath(out)), exist_ok=True)
        with open(out, "w", encoding="utf-8") as f:
            f.write(text)
        logger.info(f"written to {out}")
    else:
        print(text)


# --- Commands ---
def cmd_distance(args) -> int:
    body = load_body(args.body)
    result = distance(body, _point(args.x, body), _point(args.y, body))
    _emit(json.dumps({
        "distance": result.value,
        "a": result.a.to_list() if result.a is not None else None,
        "b": result.b.to_list() if result.b is not None else None,
    }, indent=2), args.out)
    return 0


def cmd_displacement(args) -> int:
    body = load_body(args.body)
    g = map_from_json(json.dumps(_read_json_argument(args.g)))
    _emit(json.dumps({"displacement": displacement(body, g, _point(args.x, body))}, indent=2), args.out)
    return 0


def cmd_standardize(args) -> int:
    body = load_body(args.body)
    result = standardize(MarkedBody(body, _point(args.x, body)))
    audit = result.audit()
    audit["body"] = json.loads(body_to_json(result.body))
    _emit(json.dumps(audit, indent=2), args.out)
    return 0 if result.certificate.valid else 1


def cmd_scan(args) -> int:
    scenario = load_scenario(args.scenario)
    scenario.seed = args.seed if args.seed is not None else scenario.seed
    if args.out:
        scenario.outputs.json_path = scenario.outputs.json_path or os.path.join(args.out, "report.json")
        scenario.outputs.csv_path = scenario.outputs.csv_path or os.path.join(args.out, "report.csv")
    if scenario.scan is not None:
        report = margulis_scan(scenario, args.threads)
    else:
        report = run_scenario(scenario)
    if not scenario.outputs.json_path:
        print(dump_json(report))
    logger.info(f"epsilon* = {report.epsilon_star}, monotone = {report.monotone}")
    return 0


def cmd_render(args) -> int:
    body = load_body(args.body)
    out = args.out or os.path.join(OUTPUT_DIR, "hilbert_ball.svg")
    render_svg(body, _point(args.x, body), _floats(args.radii), out, args.samples)
    return 0


def cmd_verify(args) -> int:
    summary = verify_suite(args.selector, args.seed)
    for result in summary.results:
        print(f"{'PASS' if result.passed else 'FAIL'} {result.identifier} {result.detail}".rstrip())
    if not summary.passed:
        logger.error(f"failing checks: {', '.join(summary.failures)}")
        return 1
    return 0


def cmd_stabilizer(args) -> int:
    families = []
    for item in args.families.split(","):
        tag, _, n = item.partition(":")
        families.append((tag, int(n or 2)))
    report = stabilizer_experiment(families, _floats(args.epsilons), args.samples, args.seed)
    _emit(dump_json(report), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hilbertlab", description="Hilbert geometry laboratory")
    sub = parser.add_subparsers(dest="command", required=True)

    def body_command(name: str, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--body", required=True,
                       help="Body as inline JSON, a JSON file, or family:<tag>[:<n>]")
        p.add_argument("--x", help="Basepoint, affine (n numbers) or homogeneous (n+1); default: an interior point")
        p.add_argument("--out", help="Output file (default: stdout)")
        return p

    p = body_command("distance", "Hilbert distance between two points")
    p.add_argument("--y", required=True, help="Second point")
    p.set_defaults(handler=cmd_distance)

    p = body_command("displacement", "Displacement d(x, g.x) of an automorphism")
    p.add_argument("--g", required=True, help="Matrix as inline JSON or a JSON file")
    p.set_defaults(handler=cmd_displacement)

    p = body_command("standardize", "Projective map making (body, x) a standard pair")
    p.set_defaults(handler=cmd_standardize)

    p = body_command("render", "SVG of Hilbert balls about x (n = 2)")
    p.add_argument("--radii", default="0.5,1,2", help="Comma-separated radii (default: 0.5,1,2)")
    p.add_argument("--samples", type=int, default=256, help="Boundary samples per ball (default: 256)")
    p.set_defaults(handler=cmd_render)

    # Defaults from Environment Variables
    p = sub.add_parser("scan", help="Run a scenario file (a Margulis scan when it has a scan block)")
    p.add_argument("--scenario", required=True, help="Scenario JSON file or inline JSON")
    p.add_argument("--seed", type=int, default=None, help="Override the scenario seed")
    p.add_argument("--threads", type=int, default=THREADS, help=f"Worker threads (default: {THREADS})")
    p.add_argument("--out", help="Directory for report.json / report.csv when the scenario names none")
    p.set_defaults(handler=cmd_scan)

    p = sub.add_parser("verify", help="Run the invariant checks")
    p.add_argument("selector", nargs="?", default="all", choices=["all"] + SELECTORS)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED, help=f"Seed (default: {DEFAULT_SEED})")
    p.set_defaults(handler=cmd_verify)

    p = sub.add_parser("stabilizer", help="Displacement against stabilizer proximity on standard families")
    p.add_argument("--families", default="ellipsoid:2,simplex:2", help="Comma-separated tag:n list")
    p.add_argument("--epsilons", default="0.01,0.02,0.05,0.1,0.2,0.5", help="Comma-separated epsilon grid")
    p.add_argument("--samples", type=int, default=200, help="Samples per family (default: 200)")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED, help=f"Seed (default: {DEFAULT_SEED})")
    p.add_argument("--out", help="Output file (default: stdout)")
    p.set_defaults(handler=cmd_stabilizer)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(LOG_PATH, LOG_LEVEL)
    install_fatal_handler()
    logger.debug(f"command {args.command}, log file {LOG_PATH}")
    try:
        code = args.handler(args)
    except HilbertLabError as e:
        logger.error(f"{type(e).__name__}: {e}")
        code = e.exit_code
    if argv is None:
        sys.exit(code)
    return code


if __name__ == "__main__":
    main()
