"""
stdml command-line entry point
"""
import argparse
import logging
import sys
from typing import List, Optional, TextIO

from stdml.core.config import settings
from stdml.core.error_handler import EXIT_OK, handle_exception
from stdml.core.exceptions import UsageError


class ArgumentParser(argparse.ArgumentParser):
    """argparse with usage errors raised instead of exiting"""

    def error(self, message: str):
        raise UsageError(f"{message}\n{self.format_usage().strip()}")


def configure_logging() -> None:
    level = logging.DEBUG if settings.DEBUG else getattr(logging, settings.LOG_LEVEL, logging.INFO)
    logging.basicConfig(
        level=level,
        stream=sys.stderr,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


def build_parser() -> ArgumentParser:
    from stdml.cli.commands import VERBS

    parser = ArgumentParser(
        prog=settings.APP_NAME,
        description="Spatiotemporal double machine learning for gridded two-period data",
    )
    subparsers = parser.add_subparsers(dest="verb", metavar="VERB")
    for verb in VERBS:
        verb.register(subparsers)
    return parser


def main(argv: Optional[List[str]] = None, out: TextIO = sys.stdout, err: TextIO = sys.stderr) -> int:
    """Run one verb and return the process exit code"""
    configure_logging()
    try:
        parser = build_parser()
        args = parser.parse_args(argv)
        if not getattr(args, "handler", None):
            raise UsageError(f"a verb is required\n{parser.format_usage().strip()}")
        return args.handler(args, out=out) or EXIT_OK
    except Exception as exc:
        return handle_exception(exc, stream=err)


if __name__ == "__main__":
    sys.exit(main())
