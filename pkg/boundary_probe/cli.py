"""
Command-line entry point

    python run.py train   --config configs/lenet_digit1.json --out runs/lenet
    python run.py attack  --config configs/lenet_digit1.json --out runs/lenet --jobs 4
    python run.py regions|audit|report|all ...
    python run.py smoke

Exit codes: 0 success, 2 configuration error, 1 any other failure. Failures
print a JSON error record to stdout and write it to <out>/error.json.
"""

import argparse
import json
import sys
from pathlib import Path
from typing import List, Optional

from .exceptions import BoundaryProbeError, ConfigError
from .models import ExperimentConfig
from .utils.logger import logger, run_log, setup_logger

COMMANDS = ("train", "attack", "regions", "audit", "report", "all")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="boundary_probe",
        description="Map adversarial hyper-rectangles and ensemble uncertainty regions",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    for command in COMMANDS:
        sub = subparsers.add_parser(command, help=f"run the {command} stage" if command != "all"
                                    else "run every stage in order")
        sub.add_argument("--config", help="experiment JSON (defaults apply when omitted)")
        sub.add_argument("--out", help="output directory (overrides out_dir)")
        sub.add_argument("--seed-override", type=int, help="replace the seed list with N, N+1, ...")
        sub.add_argument("--jobs", type=int, help="worker threads (results do not depend on it)")
        sub.add_argument("--log-level", default="INFO",
                         choices=["DEBUG", "INFO", "SUCCESS", "WARNING", "ERROR"])
        sub.add_argument("--log-file", help="extra log file")
    subparsers.add_parser("smoke", help="import and configuration check")
    return parser


def load_config(args: argparse.Namespace) -> ExperimentConfig:
    config = ExperimentConfig.from_json(args.config) if args.config else ExperimentConfig()
    config = config.with_overrides(out_dir=args.out, seed_override=args.seed_override, jobs=args.jobs)
    try:
        config.validate()
    except (TypeError, ValueError) as e:
        raise ConfigError(f"invalid configuration: {e}")
    return config


def error_record(error: BaseException, command: str) -> dict:
    return {"error": type(error).__name__, "message": str(error), "command": command}


def report_error(error: BaseException, command: str, out_dir: Optional[str]) -> None:
    record = error_record(error, command)
    text = json.dumps(record, sort_keys=True, ensure_ascii=False)
    print(text)
    if out_dir:
        try:
            path = Path(out_dir) / "error.json"
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(text + "\n", encoding="utf-8")
        except OSError as e:
            logger.error(f"could not write error record: {e}")


def smoke() -> int:
    """Quick import and configuration check"""
    logger.info("boundary_probe smoke check")
    try:
        from .core import pipeline  # noqa: F401
        from .attacks import ATTACKS
        from .models import AttackKind

        config = ExperimentConfig()
        config.validate()
        logger.success(f"  default config valid, hash {config.config_hash[:12]}")
        missing = [kind.value for kind in AttackKind if kind not in ATTACKS]
        if missing:
            logger.error(f"  attacks without an implementation: {missing}")
            return EXIT_FAILURE
        logger.success(f"  {len(ATTACKS)} attacks registered")
        arch = config.arch
        logger.success(f"  architecture {arch.kind.value}: {len(arch.param_shapes())} parameter tensors")
    except (ImportError, BoundaryProbeError) as e:
        logger.error(f"  smoke check failed: {e}")
        return EXIT_FAILURE
    logger.success("smoke check passed")
    return EXIT_OK


def run_command(command: str, config: ExperimentConfig) -> None:
    from .core import pipeline
    commands = {
        "train": pipeline.cmd_train,
        "attack": pipeline.cmd_attack,
        "regions": pipeline.cmd_regions,
        "audit": pipeline.cmd_audit,
        "report": pipeline.cmd_report,
        "all": pipeline.cmd_all,
    }
    commands[command](config)


def fail(error: BaseException, command: str, out_dir: Optional[str]) -> int:
    """Log, emit the error record and pick the exit code"""
    if isinstance(error, ConfigError):
        logger.error(f"configuration error: {error}")
        code = EXIT_CONFIG
    elif isinstance(error, BoundaryProbeError):
        logger.error(f"{command} failed: {error}")
        code = EXIT_FAILURE
    else:
        logger.opt(exception=error).error(f"{command} failed unexpectedly: {error!r}")
        code = EXIT_FAILURE
    report_error(error, command, out_dir)
    return code


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "smoke":
        return smoke()

    setup_logger(level=args.log_level, log_file=args.log_file)
    try:
        config = load_config(args)
    except Exception as e:
        return fail(e, args.command, args.out)

    try:
        with run_log(config.out_dir, args.log_level):
            try:
                run_command(args.command, config)
            except Exception as e:
                return fail(e, args.command, config.out_dir)
    except OSError as e:
        return fail(e, args.command, config.out_dir)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
