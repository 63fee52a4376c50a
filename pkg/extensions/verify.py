from __future__ import annotations

import argparse
import asyncio
import time
from logging import getLogger
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np

from extensions._suite_registry import SUITES, SuiteContext, SuiteResult, suite
from kernels import bigt, field as fc
from kernels.backends import BACKENDS, get_backend
from kernels.counters import counting
from kernels.lazy import lazy_reduce_batch, modmul_lazy_batch, precompute, quotient_estimate, size_basis
from kernels.msm import (
    MAX_MATERIALIZED_WINDOW_BITS,
    MsmInstance,
    bucket_reduce_running,
    bucket_reduce_tree,
    msm,
    msm_naive,
    random_instance,
    window_merge,
)
from kernels.ntt import (
    cyclic_convolution,
    five_step_factorizations,
    intt,
    make_plan,
    ntt,
    ntt_direct,
    schedule_counts,
    three_step_factorizations,
)
from kernels.rns import RnsBasis, crt_constants, from_rns_batch, to_rns_batch
from kernels.vectors import parse_vectors
from utilities.base import BaseCommand
from utilities.errors import DomainError, MorphError, UserFacingError, VerificationError
from utilities.formatter import ReportFormatter

if TYPE_CHECKING:
    import core
    from utilities.config import RunConfig

log = getLogger(__name__)


@suite("lazy-toy")
def lazy_toy(ctx: SuiteContext) -> None:
    """Exhaustive lazy reduction over the toy basis: slack bound, fused path and quotient estimate."""
    toy = ctx.run.config.lazy_toy
    basis = RnsBasis.from_moduli(toy.moduli, w=toy.w)
    tables = precompute(basis, None, toy.beta, shift="full")
    xs = list(range(basis.product))
    residues = to_rns_batch(xs, basis)
    out = lazy_reduce_batch(residues, tables)
    ctx.check(np.array_equal(out, lazy_reduce_batch(residues, tables, fused=True)), "fused path differs")

    beta, y, z = tables.beta, tables.y, tables.z
    modulus = tables.basis_p.product
    scale = pow(z * beta, -1, modulus)
    worst = 0
    for x, v in zip(xs, from_rns_batch(out, tables.basis_p), strict=True):
        m = ((v - z * (x * y % beta)) * scale) % modulus
        worst = max(worst, m)
        ctx.check(m <= tables.slack_bound, f"x={x}: slack {m} exceeds bound {tables.slack_bound}", record=x)

    compact = precompute(basis, None, toy.beta)
    constants = crt_constants(basis)
    half = basis.product // 2
    for x, row in zip(xs[:half], residues[:half], strict=True):
        alpha = (sum(int(r) * c for r, c in zip(row, constants, strict=True)) - x) // basis.product
        k = quotient_estimate(row, compact)
        ctx.check(k == alpha, f"x={x}: quotient estimate {k}, exact {alpha}", record=x)
    ctx.result.detail = f"lambda={worst} bound={tables.slack_bound}"


@suite("modmul")
def modmul(ctx: SuiteContext) -> None:
    """Random products on the lazy RNS path and the radix Montgomery path against a·b mod beta."""
    cfg = ctx.run.config.verify.modmul
    for name in cfg.fields:
        field = ctx.command.field(ctx.run, name)
        beta = field.beta
        tables = precompute(size_basis(field, seed=ctx.run.seed), None, field)
        rng = ctx.command.rng(ctx.run, f"modmul:{name}")
        pairs = [(rng.randrange(beta), rng.randrange(beta)) for _ in range(cfg.count)]
        if not pairs:
            continue
        a = to_rns_batch([tables.z * x for x, _ in pairs], tables.basis_q)
        b = to_rns_batch([tables.z * x for _, x in pairs], tables.basis_q)
        lazy = from_rns_batch(modmul_lazy_batch(a, b, tables), tables.basis_p)
        for i, ((x, y), v) in enumerate(zip(pairs, lazy, strict=True)):
            expected = x * y % beta
            ctx.check(v * tables.y % beta == expected, f"{name}: lazy product of {x:#x} and {y:#x}", record=i)
            radix = fc.mont_mul_radix(field.element(x), fc.to_montgomery(field.element(y)))
            ctx.check(radix.value == expected, f"{name}: radix product of {x:#x} and {y:#x}", record=i)


@suite("msm")
def msm_suite(ctx: SuiteContext) -> None:
    """Bucket MSM on every configured backend against independent double-and-add."""
    cfg = ctx.run.config.verify.msm
    for curve_name in cfg.curves:
        oracle = ctx.command.curve(ctx.run, curve_name, "oracle")
        bits = cfg.scalar_bits or oracle.params.scalar_bits
        for size in cfg.sizes:
            for c in cfg.window_bits:
                if c > bits or c > MAX_MATERIALIZED_WINDOW_BITS:
                    continue
                rng = ctx.command.rng(ctx.run, f"msm:{curve_name}:{size}:{c}")
                instance = random_instance(oracle, size, c, rng, scalar_bits=bits)
                expected = oracle.to_affine(msm_naive(instance))
                affine = [oracle.to_affine(p) for p in instance.points]
                for backend in cfg.backends:
                    if backend != "oracle" and size > cfg.backend_max_size:
                        continue
                    curve = ctx.command.curve(ctx.run, curve_name, backend)
                    points = [curve.lift(x, y) for x, y in affine]
                    on_backend = MsmInstance.create(instance.scalars, points, curve, window_bits=c, scalar_bits=bits)
                    got = curve.to_affine(msm(on_backend))
                    ctx.check(got == expected, f"{curve_name} N={size} c={c} on {backend}: {got} != {expected}")


@suite("bucket-reduce")
def bucket_reduce(ctx: SuiteContext) -> None:
    """Tree and running-sum reductions of random buckets against Σ j·B_j."""
    cfg = ctx.run.config.verify.bucket_reduce
    curve = ctx.command.curve(ctx.run, cfg.curve, "oracle")
    for c in cfg.window_bits:
        rng = ctx.command.rng(ctx.run, f"bucket-reduce:{c}")
        for trial in range(cfg.trials):
            buckets = [curve.random_point(rng) for _ in range(1 << c)]
            expected = curve.identity()
            for j, point in enumerate(buckets):
                expected = curve.padd(expected, curve.scalar_mul_oracle(j, point))
            tree = bucket_reduce_tree(buckets, curve)
            ctx.check(curve.eq_points(tree, expected), f"c={c}: tree reduction differs", record=trial)
            running = bucket_reduce_running(buckets, curve)
            ctx.check(curve.eq_points(running, expected), f"c={c}: running reduction differs", record=trial)


def _random_vector(ctx: SuiteContext, label: str, n: int, beta: int) -> list[int]:
    rng = ctx.command.rng(ctx.run, label)
    return [rng.randrange(beta) for _ in range(n)]


@suite("ntt")
def ntt_suite(ctx: SuiteContext) -> None:
    """Every variant and factorization against the direct transform, plus inverse, convolution and backends."""
    cfg = ctx.run.config.verify.ntt
    field = ctx.command.field(ctx.run, cfg.field)
    beta = field.beta
    for log_n in range(cfg.direct_max_log + 1):
        n = 1 << log_n
        x = _random_vector(ctx, f"ntt:{n}", n, beta)
        expected = ntt_direct(x, make_plan(field, n, "direct"))
        plans = [make_plan(field, n, "butterfly")]
        plans += [make_plan(field, n, "three-step", f) for f in three_step_factorizations(n)]
        plans += [make_plan(field, n, "five-step", f) for f in five_step_factorizations(n)]
        for plan in plans:
            with counting() as counts:
                got = ntt(x, plan)
            ctx.check(got == expected, f"N={n} {plan.variant} {plan.factors} differs from direct")
            measured = {k: v for k, v in counts.as_dict().items() if k in ("field_mul", "mac", "permute")}
            ctx.check(measured == schedule_counts(plan), f"N={n} {plan.variant} {plan.factors} counts {measured}")
        ctx.check(intt(expected, plans[0]) == x, f"N={n}: inverse does not round-trip")

    for log_n in range(cfg.direct_max_log + 1, cfg.cross_max_log + 1):
        n = 1 << log_n
        x = _random_vector(ctx, f"ntt:{n}", n, beta)
        reference = ntt(x, make_plan(field, n, "butterfly"))
        for variant in ("three-step", "five-step"):
            ctx.check(ntt(x, make_plan(field, n, variant)) == reference, f"N={n} {variant} differs from butterfly")

    for log_n in range(1, cfg.convolution_max_log + 1):
        n = 1 << log_n
        a = _random_vector(ctx, f"conv-a:{n}", n, beta)
        b = _random_vector(ctx, f"conv-b:{n}", n, beta)
        plan = make_plan(field, n, "three-step" if log_n > 1 else "butterfly")
        pointwise = [u * v % beta for u, v in zip(ntt(a, plan), ntt(b, plan), strict=True)]
        ctx.check(intt(pointwise, plan) == cyclic_convolution(a, b, beta), f"N={n}: convolution theorem fails")

    small = ctx.command.field(ctx.run, cfg.backend_field)
    n = 1 << cfg.backend_log
    x = _random_vector(ctx, f"ntt-backends:{n}", n, small.beta)
    reference = ntt_direct(x, make_plan(small, n, "direct"))
    for name in BACKENDS:
        backend = get_backend(name, small, seed=ctx.run.seed)
        for variant in ("butterfly", "three-step", "five-step"):
            got = ntt(x, make_plan(small, n, variant), backend)
            ctx.check(got == reference, f"N={n} {variant} on {name} differs from direct")


@suite("bigt")
def bigt_suite(ctx: SuiteContext) -> None:
    """Bottleneck identities across the swept ranges and model counts against measured ones."""
    cfg = ctx.run.config.verify.bigt
    profile = ctx.command.profile(ctx.run, cfg.profile)
    low, high = cfg.d_range
    for d in range(low, high + 1):
        radix = bigt.predict_spans(bigt.KernelConfig(kernel="radix-mont", d=d), profile)
        ctx.check(radix.bottleneck == "XLU", f"radix-mont D={d} bottleneck {radix.bottleneck}")
        lazy = bigt.predict_spans(bigt.KernelConfig(kernel="mxu-rns-lazy", d=d), profile)
        ctx.check(lazy.bottleneck == "VPU", f"mxu-rns-lazy D={d} bottleneck {lazy.bottleneck}")
    low, high = cfg.n_log_range
    for log_n in range(low, high + 1):
        n = 1 << log_n
        expectations = {"butterfly-ntt": "XLU", "three-step-ntt": "MXU", "five-step-ntt": "MXU"}
        for kernel, unit in expectations.items():
            report = bigt.predict_spans(bigt.KernelConfig.from_params(kernel, {"N": n}), profile)
            ctx.check(report.bottleneck == unit, f"{kernel} N=2^{log_n} bottleneck {report.bottleneck}")
    low, high = cfg.k_range
    for k in range(low, high + 1):
        params = {"N": 1 << 16, "K": k, "c": 8}
        presort = bigt.predict_spans(bigt.KernelConfig.from_params("presort-ppg", params), profile)
        ls = bigt.predict_spans(bigt.KernelConfig.from_params("ls-ppg", params), profile)
        ratio = presort.spans["Memory"] / ls.spans["Memory"]
        ctx.check(abs(ratio - k / 2) < 1e-9, f"K={k}: memory ratio {ratio}")
    _check_counts(ctx)


def _check_counts(ctx: SuiteContext) -> None:
    field = ctx.command.field(ctx.run, ctx.run.config.verify.modmul.fields[0])
    a, b = field.element(3), field.element(field.beta - 5)
    config = bigt.KernelConfig(kernel="radix-mont", d=field.d)
    _, report = bigt.measure_counts(lambda: fc.mont_mul_radix(a, b), bigt.expected_counts(config))
    ctx.check(report.consistent, f"radix-mont counts {report.counts}")

    tables = precompute(size_basis(field, seed=ctx.run.seed), None, field)
    operand = to_rns_batch([tables.z * 7], tables.basis_q)
    config = bigt.KernelConfig(kernel="mxu-rns-lazy", d=len(tables.basis_q))
    _, report = bigt.measure_counts(lambda: modmul_lazy_batch(operand, operand, tables), bigt.expected_counts(config))
    ctx.check(report.consistent, f"mxu-rns-lazy counts {report.counts}")

    curve = ctx.command.curve(ctx.run, ctx.run.config.verify.bucket_reduce.curve, "oracle")
    rng = ctx.command.rng(ctx.run, "bigt-counts")
    k, c = 3, 3
    windows = [[curve.random_point(rng) for _ in range(1 << c)] for _ in range(k)]
    for kernel, reduce in (("presort-ppg", bucket_reduce_running), ("ls-ppg", bucket_reduce_tree)):
        config = bigt.KernelConfig(kernel=kernel, n=1, k=k, c=c)

        def run(reduce=reduce) -> object:
            return window_merge([reduce(w, curve) for w in windows], c, curve)

        _, report = bigt.measure_counts(run, bigt.expected_counts(config))
        ctx.check(report.consistent, f"{kernel} counts {report.counts} expected {report.expected}")


@suite("golden")
def golden(ctx: SuiteContext) -> None:
    """Shipped or generated vector files, checked record by record."""
    directory = Path(ctx.args.vectors or Path(ctx.run.root) / ctx.run.config.paths.vectors)
    files = sorted(directory.glob("*.txt")) if directory.is_dir() else []
    if not files:
        ctx.result.detail = f"no vectors in {directory}"
        return
    for path in files:
        try:
            _check_vector_file(ctx, path)
        except VerificationError as exc:
            ctx.fail(exc.message, record=exc.record)
    ctx.result.detail = f"{len(files)} files"


def _check_vector_file(ctx: SuiteContext, path: Path) -> None:
    vectors = parse_vectors(path.read_text(), source=path.name)
    match vectors.kind:
        case "modmul":
            field = ctx.command.field(ctx.run, vectors.meta["field"])
            for i, (a, b, product) in enumerate(vectors.records):
                ok = a < field.beta and b < field.beta and a * b % field.beta == product
                if ok:
                    radix = fc.mont_mul_radix(field.element(a), fc.to_montgomery(field.element(b)))
                    ok = radix.value == product
                ctx.check(ok, f"{path.name}: {a:x}·{b:x} != {product:x}", record=i)
        case "msm":
            if not vectors.records:
                return
            curve = ctx.command.curve(ctx.run, vectors.meta["curve"])
            points = []
            for i, (_, x, y) in enumerate(vectors.records):
                try:
                    points.append(curve.lift(x, y))
                except DomainError as exc:
                    raise VerificationError("golden", f"{path.name}: {exc}", record=i) from exc
            scalars = [s for s, _, _ in vectors.records]
            bits = max(curve.params.scalar_bits, max(scalars).bit_length())
            instance = MsmInstance.create(
                scalars, points, curve, window_bits=int(vectors.meta.get("c", 4)), scalar_bits=bits
            )
            got = curve.to_affine(msm(instance))
            ctx.check(got == vectors.expect, f"{path.name}: sum {got} != {vectors.expect}", record=len(scalars))
        case "ntt":
            if not vectors.inputs:
                return
            field = ctx.command.field(ctx.run, vectors.meta["field"])
            got = ntt(vectors.inputs, make_plan(field, len(vectors.inputs), "butterfly"))
            mismatch = next((i for i, (u, v) in enumerate(zip(got, vectors.outputs, strict=True)) if u != v), None)
            ctx.check(mismatch is None, f"{path.name}: output {mismatch} differs", record=mismatch)


class VerifyCommand(BaseCommand):
    name = "verify"
    help = "run the oracle suites and report per-suite pass counts"

    def add_arguments(self, parser: argparse.ArgumentParser) -> None:
        """Register verify arguments."""
        parser.add_argument("--suite", action="append", choices=sorted(SUITES), help="suite to run (repeatable)")
        parser.add_argument("--vectors", help="directory of golden vector files")

    def _run_suite(self, name: str, run: RunConfig, args: argparse.Namespace) -> SuiteResult:
        ctx = SuiteContext(name, self, run, args)
        start = time.perf_counter()
        try:
            SUITES[name](ctx)
        except VerificationError as exc:
            ctx.fail(exc.message, record=exc.record)
        except UserFacingError:
            raise
        except MorphError as exc:
            ctx.fail(f"{type(exc).__name__}: {exc}")
        log.info(f"[{name}] {ctx.result.passed} passed, {ctx.result.failed} failed in {time.perf_counter() - start:.2f}s")
        return ctx.result

    async def run(self, run: RunConfig, args: argparse.Namespace) -> int:
        """Run the selected suites concurrently, one worker thread each.

        Raises:
            VerificationError: If any comparison failed, naming the first failure.
        """
        names = args.suite or run.config.verify.suites
        for name in names:
            if name not in SUITES:
                raise UserFacingError(f"unknown suite {name!r}")
        results = await asyncio.gather(*(asyncio.to_thread(self._run_suite, name, run, args) for name in names))
        report = ReportFormatter(results, title=f"verify (seed {run.seed}, backend {run.backend})").format()
        await self.write_output(report, run.out)
        for result in results:
            if result.failed:
                first = result.failures[0] if result.failures else None
                if first is None:
                    raise VerificationError(result.name, f"{result.failed} comparisons failed")
                raise first.to_error(result.name)
        return 0


async def setup(morph: core.Morph) -> None:
    """Register the verify command."""
    morph.add_command(VerifyCommand(morph))
