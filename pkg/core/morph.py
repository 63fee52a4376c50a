from __future__ import annotations

import argparse
import asyncio
import importlib
import logging
import os
from pathlib import Path
from typing import Sequence

import msgspec

import extensions
import utilities.config
from kernels.backends import BACKENDS
from utilities.base import BaseCommand
from utilities.config import Config, RunConfig
from utilities.errors import ConfigurationError, ParameterFileError, on_command_error

__all__ = ("Morph",)


log = logging.getLogger(__name__)

DEFAULT_ROOT = Path(__file__).resolve().parent.parent


class Morph:
    def __init__(self, *, environment: str | None = None, root: str | Path | None = None) -> None:
        """Initialize the harness.

        Args:
            environment: "production" selects configs/prod.toml, anything else configs/dev.toml.
                Defaults to MORPH_ENVIRONMENT.
            root: Directory holding configs/ and params/. Defaults to MORPH_CONFIG_ROOT, then the
                repository root.
        """
        self.environment = environment or os.getenv("MORPH_ENVIRONMENT", "development")
        self.root = Path(root or os.getenv("MORPH_CONFIG_ROOT") or DEFAULT_ROOT)
        self.commands: dict[str, BaseCommand] = {}
        self.output_lock = asyncio.Lock()
        self._run_config: RunConfig | None = None

    @property
    def run_config(self) -> RunConfig | None:
        """The configuration of the command being run, once parsed."""
        return self._run_config

    def load_config(self, path: str | Path | None = None) -> Config:
        """Read and decode the environment's config file.

        Raises:
            ParameterFileError: If the file is missing or does not match the schema.
        """
        name = "prod" if self.environment == "production" else "dev"
        path = Path(path) if path else self.root / "configs" / f"{name}.toml"
        try:
            with open(path, "rb") as f:
                return utilities.config.decode(f.read())
        except FileNotFoundError:
            raise ParameterFileError(str(path), "no such config file") from None
        except (msgspec.DecodeError, msgspec.ValidationError) as exc:
            raise ParameterFileError(str(path), str(exc)) from exc

    def add_command(self, command: BaseCommand) -> None:
        """Register a command under its name."""
        if command.name in self.commands:
            raise ConfigurationError(f"command {command.name!r} registered twice")
        self.commands[command.name] = command

    async def setup_hook(self) -> None:
        """Load every extension; each registers its commands."""
        for ext in extensions.EXTENSIONS:
            log.debug(f"Loading {ext}...")
            module = importlib.import_module(ext)
            await module.setup(self)

    def build_parser(self) -> argparse.ArgumentParser:
        """Global flags plus one subcommand per registered command."""
        parser = argparse.ArgumentParser(prog="morph", description="Matrix-engine ZKP kernels and their cost model.")
        parser.add_argument("--config", help="config file, overriding the environment's default")
        parser.add_argument("--seed", type=int, help="seed for every random choice of the run")
        parser.add_argument("--backend", choices=BACKENDS, help="field backend")
        parser.add_argument("--out", help="output file or directory")
        parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
        subparsers = parser.add_subparsers(dest="command", required=True)
        for command in self.commands.values():
            command.add_arguments(subparsers.add_parser(command.name, help=command.help))
        return parser

    async def run(self, argv: Sequence[str]) -> int:
        """Parse arguments, load the config and dispatch to one command.

        Returns:
            int: 0 on success, 1 on a verification failure, 2 on a usage or configuration error.
        """
        await self.setup_hook()
        parser = self.build_parser()
        try:
            args = parser.parse_args(argv)
        except SystemExit as exc:
            return int(exc.code or 0)
        command = self.commands[args.command]
        try:
            config = self.load_config(args.config)
            self._run_config = RunConfig(
                command=command.name,
                seed=config.seed if args.seed is None else args.seed,
                backend=args.backend or config.backend,
                out=args.out,
                root=str(self.root),
                config=config,
            )
            log.info(f"Running {command.name} (seed {self._run_config.seed}, backend {self._run_config.backend})")
            return await command.run(self._run_config, args)
        except Exception as exc:  # noqa: BLE001
            return await on_command_error(self, command, exc)
