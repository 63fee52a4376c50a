from __future__ import annotations

import argparse
from logging import getLogger
from pathlib import Path
from typing import TYPE_CHECKING

from kernels.msm import msm_naive, random_instance
from kernels.ntt import make_plan, ntt_direct
from kernels.vectors import format_modmul, format_msm, format_ntt
from utilities.base import BaseCommand
from utilities.errors import ConfigurationError

if TYPE_CHECKING:
    import core
    from utilities.config import RunConfig

log = getLogger(__name__)


class GenVectorsCommand(BaseCommand):
    name = "gen-vectors"
    help = "write deterministic golden vector files from the reference implementations"

    def add_arguments(self, parser: argparse.ArgumentParser) -> None:
        """Register gen-vectors arguments."""
        parser.add_argument("--count", type=int, help="records per modmul and msm file, overriding the config")

    def modmul_files(self, run: RunConfig, count: int) -> dict[str, str]:
        """One modmul file per configured field."""
        out = {}
        for name in run.config.vectors.modmul_fields:
            beta = self.field(run, name).beta
            rng = self.rng(run, f"vectors:modmul:{name}")
            triples = []
            for _ in range(count):
                a, b = rng.randrange(beta), rng.randrange(beta)
                triples.append((a, b, a * b % beta))
            out[f"modmul_{name}.txt"] = format_modmul(name, triples)
        return out

    def msm_files(self, run: RunConfig, count: int) -> dict[str, str]:
        """One msm file per configured curve, summed with the double-and-add reference."""
        cfg = run.config.vectors
        out = {}
        for name in cfg.msm_curves:
            curve = self.curve(run, name, "oracle")
            if count == 0:
                out[f"msm_{name}.txt"] = format_msm(name, cfg.msm_window_bits, [], None)
                continue
            instance = random_instance(curve, count, cfg.msm_window_bits, self.rng(run, f"vectors:msm:{name}"))
            terms = [(s, *curve.to_affine(p)) for s, p in zip(instance.scalars, instance.points, strict=True)]
            expect = curve.to_affine(msm_naive(instance))
            out[f"msm_{name}.txt"] = format_msm(name, cfg.msm_window_bits, terms, expect)
        return out

    def ntt_files(self, run: RunConfig) -> dict[str, str]:
        """One ntt file from the direct transform."""
        cfg = run.config.vectors
        field = self.field(run, cfg.ntt_field)
        n = 1 << cfg.ntt_log
        rng = self.rng(run, f"vectors:ntt:{cfg.ntt_field}")
        x = [rng.randrange(field.beta) for _ in range(n)]
        return {f"ntt_{cfg.ntt_field}.txt": format_ntt(cfg.ntt_field, x, ntt_direct(x, make_plan(field, n, "direct")))}

    async def run(self, run: RunConfig, args: argparse.Namespace) -> int:
        """Write every vector file into the output directory."""
        count = run.config.vectors.modmul_count if args.count is None else args.count
        if count < 0:
            raise ConfigurationError("count must be non-negative")
        msm_count = run.config.vectors.msm_count if args.count is None else args.count
        directory = Path(run.out) if run.out else Path(run.root) / run.config.paths.vectors
        files = {**self.modmul_files(run, count), **self.msm_files(run, msm_count), **self.ntt_files(run)}
        for filename, text in files.items():
            await self.write_output(text, str(directory / filename))
        log.info(f"Wrote {len(files)} vector files to {directory}")
        return 0


async def setup(morph: core.Morph) -> None:
    """Register the gen-vectors command."""
    morph.add_command(GenVectorsCommand(morph))
