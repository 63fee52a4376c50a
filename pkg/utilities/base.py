from __future__ import annotations

import argparse
import random
import sys
from abc import ABC, abstractmethod
from logging import getLogger
from pathlib import Path
from typing import TYPE_CHECKING, ClassVar

from kernels.backends import BaseBackend, get_backend
from kernels.bigt import HardwareProfile
from kernels.edwards import CurveParams, TwistedEdwardsCurve
from kernels.field import PrimeField
from utilities import params

if TYPE_CHECKING:
    import core
    from utilities.config import RunConfig

__all__ = ("BaseCommand",)

log = getLogger(__name__)


class BaseCommand(ABC):
    name: ClassVar[str]
    help: ClassVar[str]

    def __init__(self, morph: core.Morph) -> None:
        """Initialize the base command.

        Args:
            morph (core.Morph): The harness instance.
        """
        self.morph = morph

    def add_arguments(self, parser: argparse.ArgumentParser) -> None:
        """Override to register command specific arguments."""

    @abstractmethod
    async def run(self, run: RunConfig, args: argparse.Namespace) -> int:
        """Execute the command and return its exit status."""

    def params_root(self, run: RunConfig) -> Path:
        """Directory holding the fields, curves and profiles."""
        return Path(run.root) / run.config.paths.params

    def field(self, run: RunConfig, name: str) -> PrimeField:
        """Load a named field."""
        return params.load_field(self.params_root(run), name)

    def curve_params(self, run: RunConfig, name: str) -> CurveParams:
        """Load named curve parameters."""
        return params.load_curve(self.params_root(run), name)

    def curve(self, run: RunConfig, name: str, backend: str | None = None) -> TwistedEdwardsCurve:
        """A curve bound to a backend, the run's default when none is named."""
        curve_params = self.curve_params(run, name)
        return TwistedEdwardsCurve(curve_params, self.backend(run, curve_params.field, backend))

    def backend(self, run: RunConfig, field: PrimeField, name: str | None = None) -> BaseBackend:
        """Field backend seeded from the run."""
        return get_backend(name or run.backend, field, seed=run.seed)

    def profile(self, run: RunConfig, name: str) -> HardwareProfile:
        """Load a named hardware profile."""
        return params.load_profile(self.params_root(run), name)

    def rng(self, run: RunConfig, label: str) -> random.Random:
        """Deterministic generator for one labelled stream of the run."""
        return random.Random(f"{run.seed}:{label}")

    async def write_output(self, text: str, path: str | None = None) -> None:
        """Write to `path`, or to stdout, holding the harness output lock."""
        async with self.morph.output_lock:
            if path is None:
                sys.stdout.write(text)
                sys.stdout.flush()
                return
            target = Path(path)
            target.parent.mkdir(parents=True, exist_ok=True)
            target.write_text(text)
            log.info(f"Wrote {target}")
