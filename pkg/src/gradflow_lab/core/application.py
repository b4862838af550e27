"""Main application class for gradflow-lab."""

import argparse
import asyncio
import sys
from typing import List, Optional, Sequence, Tuple

from pydantic import ValidationError

from ..config.logging_config import get_logger, setup_logging
from ..config.settings import Settings, get_settings
from ..handlers.command_handler import CommandHandler, build_parser
from .exceptions import GradflowError

logger = get_logger(__name__)


class Application:
    """Command-line application: settings overrides, logging, dispatch, exit code."""

    def __init__(self, settings: Optional[Settings] = None):
        """Initialize the application.

        Args:
            settings: Base settings (cached environment settings when omitted)
        """
        self.settings = settings or get_settings()
        self.parser = build_parser()

    def configure(self, argv: Sequence[str]) -> Tuple[Settings, argparse.Namespace]:
        args = self.parser.parse_args(list(argv))
        overrides = {
            "output_root": args.out,
            "workers": args.workers,
            "seed": args.seed,
            "tolerance_scale": args.tolerance_scale,
            "log_level": args.log_level,
        }
        updates = {k: v for k, v in overrides.items() if v is not None}
        settings = Settings.model_validate({**self.settings.model_dump(), **updates})
        return settings, args

    async def run(self, argv: Optional[List[str]] = None) -> int:
        """Run one command and return its exit code (0 pass, 2 check failure, 1 error)."""
        try:
            settings, args = self.configure(sys.argv[1:] if argv is None else argv)
        except ValidationError as e:
            print(f"invalid option: {e.errors()[0]['msg']}", file=sys.stderr)
            return 1
        setup_logging(settings.log_level, settings.log_file, settings.log_dir, settings.json_logs)
        logger.info(f"gradflow-lab {getattr(args, 'command', '')} started")

        try:
            return await CommandHandler(settings).dispatch(args)
        except (GradflowError, ValidationError, OSError) as e:
            logger.error(f"{type(e).__name__}: {e}")
            print(f"error: {e}", file=sys.stderr)
            return 1
        except KeyboardInterrupt:
            logger.info("Received keyboard interrupt")
            return 1


def main() -> None:
    """Console entry point."""
    sys.exit(asyncio.run(Application().run()))


if __name__ == "__main__":
    main()
