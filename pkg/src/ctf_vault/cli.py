"""Admin command line: validate, build, flagcheck-gen, stats, serve.

Exit codes form a closed set: 0 success, 1 validation errors, 2 usage
errors, 3 runtime failures. Flags to be hashed are read from stdin, not
argv, so they never appear in process listings or shell history.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__, flagcheck
from .config import Config, ConfigError, load_config, parse_listen
from .registry import (
    DuplicateId,
    Registry,
    Severity,
    ingest_archive,
    validate_challenge,
)
from .sandbox import (
    DEFAULT_BASE_REF,
    LocalProcessDriver,
    OciCommandDriver,
    SandboxError,
    compile_build_plan,
    render_build_recipe,
)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_USAGE = 2
EXIT_RUNTIME = 3


def _fail(message: str) -> None:
    print(f"ctf-vault: {message}", file=sys.stderr)


def _load_config_or_none(args: argparse.Namespace) -> Config | None:
    if args.config is None:
        return None
    return load_config(Path(args.config))


def _require_config(args: argparse.Namespace) -> Config:
    if args.config is None:
        raise ConfigError("this command needs --config")
    return load_config(Path(args.config))


# --- validate ---------------------------------------------------------------


def _emit_finding(challenge: str, severity: str, code: str, message: str, as_json: bool) -> None:
    if as_json:
        print(
            json.dumps(
                {
                    "severity": severity,
                    "challenge": challenge,
                    "code": code,
                    "message": message,
                },
                sort_keys=True,
            )
        )
    else:
        print(f"{severity} {challenge} {code} {message}")


def cmd_validate(args: argparse.Namespace) -> int:
    if args.root is not None:
        root = Path(args.root)
    else:
        cfg = _load_config_or_none(args)
        if cfg is None:
            _fail("validate needs an archive root argument or --config")
            return EXIT_USAGE
        root = cfg.archive_root

    try:
        registry = ingest_archive(root)
    except DuplicateId as exc:
        _emit_finding("-", "ERROR", "DUPLICATE_ID", str(exc), args.json)
        return EXIT_VALIDATION
    except OSError as exc:
        _fail(str(exc))
        return EXIT_RUNTIME

    errors = 0
    for finding in registry.ingest_findings:
        if finding.severity is Severity.ERROR:
            errors += 1
        _emit_finding(
            finding.path or "-", finding.severity.value, finding.code, finding.message,
            args.json,
        )
    for challenge_id in registry.ids():
        manifest = registry.manifests[challenge_id]
        chal_dir = registry.dir_for(challenge_id)
        if chal_dir is None:
            continue
        report = validate_challenge(manifest, chal_dir)
        for finding in report.findings:
            if finding.severity is Severity.ERROR:
                errors += 1
            _emit_finding(
                challenge_id, finding.severity.value, finding.code, finding.message,
                args.json,
            )
    return EXIT_VALIDATION if errors else EXIT_OK


# --- build ------------------------------------------------------------------


def _driver_for(cfg: Config):
    if cfg.runtime_driver == "oci":
        return OciCommandDriver()
    return LocalProcessDriver()


def cmd_build(args: argparse.Namespace) -> int:
    try:
        cfg = _require_config(args)
        registry = ingest_archive(cfg.archive_root)
    except (ConfigError, OSError, DuplicateId) as exc:
        _fail(str(exc))
        return EXIT_USAGE if isinstance(exc, ConfigError) else EXIT_RUNTIME

    manifest = registry.get(args.challenge)
    if manifest is None:
        _fail(f"unknown challenge {args.challenge!r}")
        return EXIT_USAGE
    chal_dir = registry.dir_for(args.challenge)
    assert chal_dir is not None

    report = validate_challenge(manifest, chal_dir)
    if not report.passing:
        for finding in report.errors():
            _emit_finding(manifest.id, "ERROR", finding.code, finding.message, args.json)
        return EXIT_VALIDATION

    try:
        plan = compile_build_plan(manifest, chal_dir, base_ref=args.base_ref)
    except SandboxError as exc:
        _emit_finding(manifest.id, "ERROR", "PLAN_FAILED", str(exc), args.json)
        return EXIT_VALIDATION

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    recipe_path = out_dir / f"{manifest.id}.containerfile"
    try:
        recipe_path.write_text(render_build_recipe(plan), encoding="utf-8")
    except OSError as exc:
        _fail(str(exc))
        return EXIT_RUNTIME

    image_ref = None
    if args.run:
        try:
            image_ref = _driver_for(cfg).build(plan)
        except Exception as exc:
            _fail(f"build failed: {exc}")
            return EXIT_RUNTIME

    if args.json:
        payload = {"challenge": manifest.id, "recipe": str(recipe_path)}
        if image_ref is not None:
            payload["image_ref"] = image_ref
        print(json.dumps(payload, sort_keys=True))
    else:
        print(recipe_path)
        if image_ref is not None:
            print(image_ref)
    return EXIT_OK


# --- flagcheck-gen ----------------------------------------------------------


def cmd_flagcheck_gen(args: argparse.Namespace) -> int:
    # The flag arrives on stdin only; putting it in argv would leak it to
    # anyone who can read the process table.
    raw = sys.stdin.read()
    try:
        record = flagcheck.generate_check(
            raw, platform_flag=args.platform_flag, challenge_id=args.challenge
        )
    except flagcheck.EmptyFlag as exc:
        _fail(str(exc))
        return EXIT_USAGE
    if args.json:
        print(
            json.dumps(
                {
                    "algorithm": record.algorithm,
                    "challenge": record.challenge_id,
                    "digest": record.digest,
                    "platform_flag": record.platform_flag,
                },
                sort_keys=True,
            )
        )
    else:
        sys.stdout.write(flagcheck.serialize_record(record))
    return EXIT_OK


# --- stats ------------------------------------------------------------------


def cmd_stats(args: argparse.Namespace) -> int:
    from .registry import category_stats
    from .store import SolveLog

    try:
        cfg = _require_config(args)
        registry = ingest_archive(cfg.archive_root)
        log = SolveLog.load(cfg.data_dir / "solves.log")
    except ConfigError as exc:
        _fail(str(exc))
        return EXIT_USAGE
    except (OSError, DuplicateId) as exc:
        _fail(str(exc))
        return EXIT_RUNTIME

    rows = category_stats(registry, log.records())

    if args.json:
        for row in rows:
            print(
                json.dumps(
                    {
                        "category": row.category,
                        "available": row.available,
                        "solves": row.solves,
                    },
                    sort_keys=True,
                )
            )
    else:
        width = max(len("Category"), max(len(r.category) for r in rows))
        print(f"{'Category':<{width}}  {'Available':>9}  {'Solves':>7}")
        for row in rows:
            print(f"{row.category:<{width}}  {row.available:>9}  {row.solves:>7}")

    if args.report_dir is not None:
        from .report import write_category_report

        try:
            csv_path, fig_path = write_category_report(rows, Path(args.report_dir))
        except OSError as exc:
            _fail(str(exc))
            return EXIT_RUNTIME
        print(f"wrote {csv_path} and {fig_path}", file=sys.stderr)
    return EXIT_OK


# --- serve ------------------------------------------------------------------


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import build_app, platform_from_config

    try:
        cfg = _require_config(args)
        platform = platform_from_config(cfg, base_ref=args.base_ref)
    except ConfigError as exc:
        _fail(str(exc))
        return EXIT_USAGE
    except (OSError, DuplicateId) as exc:
        _fail(str(exc))
        return EXIT_RUNTIME

    static_dir = Path(args.static_dir) if args.static_dir is not None else None
    if static_dir is not None and not static_dir.is_dir():
        _fail(f"static dir {static_dir} is not a directory")
        return EXIT_USAGE

    app = build_app(platform, static_dir=static_dir)
    host, port = parse_listen(cfg.server_listen)
    try:
        uvicorn.run(app, host=host, port=port, log_level="warning")
    except OSError as exc:
        _fail(str(exc))
        return EXIT_RUNTIME
    finally:
        platform.instances.stop_all()
        platform.solves.close()
    return EXIT_OK


# --- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="platform config file (YAML)")
    common.add_argument("--json", action="store_true", help="machine-readable output")

    parser = argparse.ArgumentParser(
        prog="ctf-vault",
        description="Self-hostable archive platform for rehosted CTF challenges.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_validate = sub.add_parser(
        "validate", parents=[common], help="check an archive tree and report findings"
    )
    p_validate.add_argument(
        "root", nargs="?", default=None,
        help="archive root (defaults to archive.root from --config)",
    )
    p_validate.set_defaults(func=cmd_validate)

    p_build = sub.add_parser(
        "build", parents=[common], help="compile one challenge to a containerfile"
    )
    p_build.add_argument("challenge", help="challenge id")
    p_build.add_argument("--out-dir", default="build", help="where to write the recipe")
    p_build.add_argument(
        "--base-ref", default=DEFAULT_BASE_REF, help="base image reference"
    )
    p_build.add_argument(
        "--run", action="store_true", help="also build the image with the configured driver"
    )
    p_build.set_defaults(func=cmd_build)

    p_gen = sub.add_parser(
        "flagcheck-gen", parents=[common],
        help="hash a flag read from stdin into a check record",
    )
    p_gen.add_argument("--challenge", required=True, help="challenge id for the record")
    p_gen.add_argument(
        "--platform-flag", required=True,
        help="flag the platform releases on a correct submission",
    )
    p_gen.set_defaults(func=cmd_flagcheck_gen)

    p_stats = sub.add_parser(
        "stats", parents=[common], help="per-category availability and solve counts"
    )
    p_stats.add_argument(
        "--report-dir", default=None, metavar="DIR",
        help="also write categories.csv and categories.png here",
    )
    p_stats.set_defaults(func=cmd_stats)

    p_serve = sub.add_parser("serve", parents=[common], help="run the HTTP service")
    p_serve.add_argument(
        "--static-dir", default=None, metavar="DIR",
        help="serve a built web UI from this directory",
    )
    p_serve.add_argument(
        "--base-ref", default=DEFAULT_BASE_REF, help="base image reference"
    )
    p_serve.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ConfigError as exc:
        _fail(str(exc))
        return EXIT_USAGE
    except KeyboardInterrupt:
        return EXIT_RUNTIME
