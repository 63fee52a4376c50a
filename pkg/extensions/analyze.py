from __future__ import annotations

import argparse
from logging import getLogger
from typing import TYPE_CHECKING

from kernels.bigt import KERNELS, PARAM_KEYS, KernelConfig, parse_range, sweep, sweep_configs
from utilities.base import BaseCommand
from utilities.errors import ConfigurationError
from utilities.formatter import CsvFormatter

if TYPE_CHECKING:
    import core
    from utilities.config import RunConfig

log = getLogger(__name__)

HEADER = ("kernel", "params", "vpu", "mxu", "xlu", "memory", "bottleneck", "bigt")


def parse_assignment(text: str) -> tuple[str, str]:
    """Split "key=value".

    Raises:
        ConfigurationError: If there is no '=' or the key is unknown.
    """
    key, sep, value = text.partition("=")
    key = key.strip()
    if not sep or not value:
        raise ConfigurationError(f"expected key=value, got {text!r}")
    if key not in PARAM_KEYS:
        raise ConfigurationError(f"unknown parameter {key!r}; expected one of {', '.join(PARAM_KEYS)}")
    return key, value.strip()


def parse_value(text: str) -> int:
    """An integer, optionally written 2^k."""
    start, _ = parse_range(f"{text}..{text}")
    return start


class AnalyzeCommand(BaseCommand):
    name = "analyze"
    help = "predict per-unit spans, the bottleneck and Big-T for kernel configurations"

    def add_arguments(self, parser: argparse.ArgumentParser) -> None:
        """Register analyze arguments."""
        parser.add_argument("--kernel", required=True, choices=KERNELS)
        parser.add_argument("--param", action="append", default=[], help="fixed parameter, e.g. N=2^16 (repeatable)")
        parser.add_argument("--sweep", help="swept parameter, e.g. N=2^14..2^26")
        parser.add_argument("--profile", help="hardware profile name")
        parser.add_argument("--padd-unit", choices=("vpu", "mxu", "both"), help="unit charged for point additions")

    def configs(self, run: RunConfig, args: argparse.Namespace) -> list[KernelConfig]:
        """Expand the fixed and swept parameters into kernel configurations."""
        base = {k: parse_value(v) for k, v in map(parse_assignment, args.param)}
        padd_unit = args.padd_unit or run.config.analyze.padd_unit
        if args.sweep is None:
            return [KernelConfig.from_params(args.kernel, base, padd_unit=padd_unit)]
        key, text = parse_assignment(args.sweep)
        start, stop = parse_range(text)
        return sweep_configs(args.kernel, base, key, start, stop, padd_unit=padd_unit)

    async def run(self, run: RunConfig, args: argparse.Namespace) -> int:
        """Write one CSV row per configuration."""
        profile = self.profile(run, args.profile or run.config.analyze.profile)
        reports = sweep(self.configs(run, args), profile)
        if not profile.bw_calibrated:
            log.info(f"Profile {profile.name} has uncalibrated bandwidth; memory is reported but not ranked")
        await self.write_output(CsvFormatter(reports, header=HEADER).format(), run.out)
        return 0


async def setup(morph: core.Morph) -> None:
    """Register the analyze command."""
    morph.add_command(AnalyzeCommand(morph))
