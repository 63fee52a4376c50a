from __future__ import annotations

import argparse
import contextlib
import statistics
import time
from concurrent.futures import Executor, ThreadPoolExecutor
from logging import getLogger
from typing import TYPE_CHECKING, Any, Callable

import msgspec

from kernels import field as fc
from kernels.counters import OpCounts, counting
from kernels.lazy import modmul_lazy_batch, precompute, size_basis
from kernels.msm import msm, msm_naive, random_instance
from kernels.ntt import make_plan, ntt, ntt_butterfly, ntt_direct
from kernels.rns import from_rns_batch, to_rns_batch
from utilities.base import BaseCommand
from utilities.errors import ConfigurationError, VerificationError
from utilities.formatter import CsvFormatter

if TYPE_CHECKING:
    import core
    from utilities.config import RunConfig

log = getLogger(__name__)

# Fewer timed repeats than this mark a row as low confidence.
MIN_CONFIDENT_REPEATS = 5
# Above this size --verify checks NTTs against the oracle butterfly instead of the N² product.
DIRECT_REFERENCE_MAX = 1 << 10
BENCH_KERNELS = ("modmul", "ntt", "msm")
BENCH_NTT_VARIANTS = ("butterfly", "three-step", "five-step")
HEADER = (
    "kernel",
    "size",
    "backend",
    "wall_time_s",
    "repeats",
    "low_confidence",
    *OpCounts.__struct_fields__,
)


class BenchRow(msgspec.Struct, frozen=True):
    kernel: str
    size: int
    backend: str
    wall_time_s: float
    repeats: int
    counts: OpCounts

    @property
    def low_confidence(self) -> bool:
        """True when too few repeats were timed for a stable median."""
        return self.repeats < MIN_CONFIDENT_REPEATS

    def to_format_dict(self) -> dict[str, str | None]:
        """Row for the bench CSV."""
        return {
            "kernel": self.kernel,
            "size": str(self.size),
            "backend": self.backend,
            "wall_time_s": f"{self.wall_time_s:.6g}",
            "repeats": str(self.repeats),
            "low_confidence": str(self.low_confidence).lower(),
            **{k: str(v) for k, v in self.counts.as_dict().items()},
        }


class BenchJob(msgspec.Struct, frozen=True):
    """One timed kernel; `check` receives the output of the counted run."""

    name: str
    size: int
    fn: Callable[[], Any]
    check: Callable[[Any], bool]


def time_kernel(fn: Callable[[], Any], *, repeats: int, warmup: int) -> tuple[float, OpCounts, Any]:
    """Median wall time over `repeats` runs after `warmup` untimed ones, plus one run's counts and output."""
    for _ in range(warmup):
        fn()
    with counting() as counts:
        result = fn()
    samples = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - start)
    return statistics.median(samples), counts, result


def parse_factors(text: str | None) -> tuple[int, ...] | None:
    """Comma separated NTT factors, e.g. "128,128" or "8,16,128"."""
    if text is None:
        return None
    try:
        return tuple(int(part) for part in text.split(","))
    except ValueError:
        raise ConfigurationError(f"malformed factors {text!r}; expected comma separated integers") from None


class BenchCommand(BaseCommand):
    name = "bench"
    help = "time kernels and report median wall time with operation counts"

    def add_arguments(self, parser: argparse.ArgumentParser) -> None:
        """Register bench arguments."""
        parser.add_argument("--kernel", action="append", choices=BENCH_KERNELS, help="kernel to time (repeatable)")
        parser.add_argument("--size", type=int, help="log2 of the problem size, overriding the config")
        parser.add_argument("--repeats", type=int, help="timed repeats")
        parser.add_argument("--warmup", type=int, help="untimed runs before timing")
        parser.add_argument("--window-bits", type=int, help="MSM window width c")
        parser.add_argument(
            "--ntt-variant", action="append", choices=BENCH_NTT_VARIANTS, help="NTT schedule to time (repeatable)"
        )
        parser.add_argument("--factors", help="NTT factors, e.g. 128,128 for three-step or 8,16,128 for five-step")
        parser.add_argument("--compare-direct", action="store_true", help="also time the N² direct transform")
        parser.add_argument("--verify", action="store_true", help="check every timed output against its oracle")

    def _modmul(self, run: RunConfig, backend: str, log_size: int | None) -> list[BenchJob]:
        cfg = run.config.bench
        field = self.field(run, cfg.modmul_field)
        beta = field.beta
        batch = 1 << log_size if log_size is not None else cfg.modmul_batch
        rng = self.rng(run, "bench:modmul")
        pairs = [(rng.randrange(beta), rng.randrange(beta)) for _ in range(batch)]
        expected = [x * y % beta for x, y in pairs]
        match backend:
            case "rns-lazy":
                tables = precompute(size_basis(field, seed=run.seed), None, field)
                a = to_rns_batch([tables.z * x for x, _ in pairs], tables.basis_q)
                b = to_rns_batch([tables.z * y for _, y in pairs], tables.basis_q)

                def check(out: Any) -> bool:
                    return [v * tables.y % beta for v in from_rns_batch(out, tables.basis_p)] == expected

                return [BenchJob("modmul", batch, lambda: modmul_lazy_batch(a, b, tables), check)]
            case "radix-mont":
                elements = [(field.element(x), fc.to_montgomery(field.element(y))) for x, y in pairs]
                return [
                    BenchJob(
                        "modmul",
                        batch,
                        lambda: [fc.mont_mul_radix(x, y) for x, y in elements],
                        lambda out: [v.value for v in out] == expected,
                    )
                ]
            case _:
                return [BenchJob("modmul", batch, lambda: [x * y % beta for x, y in pairs], lambda out: out == expected)]

    def _ntt(self, run: RunConfig, args: argparse.Namespace, backend: str) -> list[BenchJob]:
        cfg = run.config.bench
        field = self.field(run, cfg.ntt_field)
        n = 1 << (args.size if args.size is not None else cfg.ntt_log)
        rng = self.rng(run, "bench:ntt")
        x = [rng.randrange(field.beta) for _ in range(n)]
        be = self.backend(run, field, backend)
        variants = args.ntt_variant or cfg.ntt_variants
        factors = parse_factors(args.factors)
        arity = {"three-step": 2, "five-step": 3}
        if factors is not None and not any(arity.get(v) == len(factors) for v in variants):
            raise ConfigurationError(f"factors {factors} fit none of the selected variants {', '.join(variants)}")

        reference: list[int] = []

        def check(out: list[int]) -> bool:
            if not reference:
                variant = "direct" if n <= DIRECT_REFERENCE_MAX else "butterfly"
                oracle = make_plan(field, n, variant)
                reference.extend(ntt_direct(x, oracle) if variant == "direct" else ntt_butterfly(x, oracle))
            return out == reference

        jobs = []
        for variant in variants:
            explicit = factors if factors is not None and arity.get(variant) == len(factors) else None
            plan = make_plan(field, n, variant, explicit)
            jobs.append(BenchJob(f"ntt-{variant}", n, lambda plan=plan: ntt(x, plan, be), check))
        if args.compare_direct:
            plan = make_plan(field, n, "direct")
            jobs.append(BenchJob("ntt-direct", n, lambda: ntt(x, plan, be), check))
        return jobs

    def _msm(
        self, run: RunConfig, args: argparse.Namespace, backend: str, executor: Executor | None
    ) -> list[BenchJob]:
        cfg = run.config.bench
        curve = self.curve(run, cfg.msm_curve, backend)
        size = 1 << (args.size if args.size is not None else cfg.msm_log)
        c = args.window_bits or cfg.msm_window_bits
        instance = random_instance(curve, size, c, self.rng(run, "bench:msm"))
        return [
            BenchJob(
                "msm",
                size,
                lambda: msm(instance, executor=executor),
                lambda out: curve.eq_points(out, msm_naive(instance)),
            )
        ]

    async def run(self, run: RunConfig, args: argparse.Namespace) -> int:
        """Time every selected kernel on every configured backend and write the CSV."""
        cfg = run.config.bench
        repeats = cfg.repeats if args.repeats is None else args.repeats
        warmup = cfg.warmup if args.warmup is None else args.warmup
        if repeats < 1:
            raise ConfigurationError("repeats must be at least 1")
        if warmup < 0:
            raise ConfigurationError("warmup must not be negative")
        if repeats < MIN_CONFIDENT_REPEATS:
            log.warning(f"Only {repeats} repeats; rows are marked low confidence")
        backends = [args.backend] if args.backend else cfg.backends
        with contextlib.ExitStack() as stack:
            executor = None
            if run.config.workers > 1:
                executor = stack.enter_context(ThreadPoolExecutor(max_workers=run.config.workers))
            rows = self._time_all(run, args, backends, repeats, warmup, executor)
        await self.write_output(CsvFormatter(rows, header=HEADER).format(), run.out)
        return 0

    def _jobs(
        self, run: RunConfig, args: argparse.Namespace, kernel: str, backend: str, executor: Executor | None
    ) -> list[BenchJob]:
        match kernel:
            case "modmul":
                return self._modmul(run, backend, args.size)
            case "ntt":
                return self._ntt(run, args, backend)
            case "msm":
                return self._msm(run, args, backend, executor)
        raise ConfigurationError(f"unknown bench kernel {kernel!r}")

    def _time_all(
        self,
        run: RunConfig,
        args: argparse.Namespace,
        backends: list[str],
        repeats: int,
        warmup: int,
        executor: Executor | None,
    ) -> list[BenchRow]:
        rows = []
        for kernel in args.kernel or run.config.bench.kernels:
            for backend in backends:
                for job in self._jobs(run, args, kernel, backend, executor):
                    wall, counts, result = time_kernel(job.fn, repeats=repeats, warmup=warmup)
                    log.info(f"{job.name} size={job.size} on {backend}: {wall:.4g}s")
                    if args.verify and not job.check(result):
                        raise VerificationError("bench", f"{job.name} size={job.size} on {backend} differs from oracle")
                    rows.append(BenchRow(job.name, job.size, backend, wall, repeats, counts))
        return rows


async def setup(morph: core.Morph) -> None:
    """Register the bench command."""
    morph.add_command(BenchCommand(morph))
