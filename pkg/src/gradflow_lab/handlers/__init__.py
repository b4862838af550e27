"""Command-line handlers."""

from .command_handler import CommandHandler, build_parser, parse_sweep_params

__all__ = ["CommandHandler", "build_parser", "parse_sweep_params"]
