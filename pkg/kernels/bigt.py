"""Analytic span model for matrix-engine accelerators.

Each kernel is charged four spans, one per resource: work divided by the unit's parallelism
for the vector unit, the matrix unit and the cross-lane unit, plus words moved divided by
bandwidth for memory. The largest span is the bottleneck and its value is Big-T. Memory only
competes for the bottleneck when the profile's bandwidth has been calibrated.
"""

from __future__ import annotations

import math
from logging import getLogger
from typing import Any, Callable, Literal, Mapping, Self, TypeVar, get_args

import msgspec

from kernels.counters import counting
from kernels.ntt import balanced_factors
from utilities.errors import ConfigurationError

__all__ = (
    "DEFAULT_PROFILE",
    "KERNELS",
    "PARAM_KEYS",
    "UNITS",
    "CountReport",
    "HardwareProfile",
    "Kernel",
    "KernelConfig",
    "SpanReport",
    "expected_counts",
    "measure_counts",
    "parse_range",
    "predict_spans",
    "sweep",
    "sweep_configs",
)

log = getLogger(__name__)

T = TypeVar("T")

Kernel = Literal[
    "radix-mont",
    "mxu-rns-lazy",
    "presort-ppg",
    "ls-ppg",
    "butterfly-ntt",
    "three-step-ntt",
    "five-step-ntt",
]
KERNELS: tuple[str, ...] = get_args(Kernel)
UNITS = ("VPU", "MXU", "XLU", "Memory")
PaddUnit = Literal["vpu", "mxu", "both"]

# Command-line parameter names to KernelConfig fields.
PARAM_KEYS: dict[str, str] = {"D": "d", "N": "n", "K": "k", "c": "c", "R": "r", "C": "cols", "R1": "r1", "R2": "r2"}

_REQUIRED: dict[str, tuple[str, ...]] = {
    "radix-mont": ("d",),
    "mxu-rns-lazy": ("d",),
    "presort-ppg": ("n", "k", "c"),
    "ls-ppg": ("n", "k", "c"),
    "butterfly-ntt": ("n",),
    "three-step-ntt": ("n", "r", "cols"),
    "five-step-ntt": ("n", "r1", "r2", "cols"),
}
# Parameters that sweep geometrically; the rest step linearly.
_GEOMETRIC = frozenset({"n", "r", "cols", "r1", "r2"})


class HardwareProfile(msgspec.Struct, frozen=True, forbid_unknown_fields=True):
    name: str
    par_shuffle: float = 4096
    par_transpose: float = 4096
    par_mxu: float = 131072
    par_vpu: float = 2048
    bw_hbm: float = 1.0
    bw_calibrated: bool = False
    vreg_elements: int = 1024

    def __post_init__(self) -> None:
        """Reject non-positive parallelism or bandwidth."""
        for field in ("par_shuffle", "par_transpose", "par_mxu", "par_vpu", "bw_hbm", "vreg_elements"):
            if getattr(self, field) <= 0:
                raise ConfigurationError(f"profile {self.name}: {field} must be positive")

    @property
    def par_shuffle_element(self) -> float:
        """Cross-lane parallelism for element-granular shuffles, one vreg tile per shuffle."""
        return self.par_shuffle / self.vreg_elements


DEFAULT_PROFILE = HardwareProfile(name="tpu-v4")


class KernelConfig(msgspec.Struct, frozen=True, forbid_unknown_fields=True):
    kernel: Kernel
    d: int | None = None
    n: int | None = None
    k: int | None = None
    c: int | None = None
    r: int | None = None
    cols: int | None = None
    r1: int | None = None
    r2: int | None = None
    padd_unit: PaddUnit = "vpu"

    def __post_init__(self) -> None:
        """Check that the kernel's parameters are present, positive and consistent."""
        if self.kernel not in _REQUIRED:
            raise ConfigurationError(f"unknown kernel {self.kernel!r}")
        for name in _REQUIRED[self.kernel]:
            value = getattr(self, name)
            if value is None:
                raise ConfigurationError(f"{self.kernel} requires parameter {name}")
            if value < 1:
                raise ConfigurationError(f"{self.kernel}: {name} must be positive, got {value}")
        if self.kernel == "three-step-ntt" and self.r * self.cols != self.n:
            raise ConfigurationError(f"R·C = {self.r * self.cols} does not equal N = {self.n}")
        if self.kernel == "five-step-ntt" and self.r1 * self.r2 * self.cols != self.n:
            raise ConfigurationError(f"R1·R2·C = {self.r1 * self.r2 * self.cols} does not equal N = {self.n}")

    @classmethod
    def from_params(cls, kernel: str, params: Mapping[str, int], *, padd_unit: str = "vpu") -> Self:
        """Build from command-line style keys (D, N, K, c, R, C, R1, R2).

        NTT factors left out are filled with the balanced split of N.

        Raises:
            ConfigurationError: On an unknown key or invalid parameters.
        """
        fields: dict[str, Any] = {}
        for key, value in params.items():
            if key not in PARAM_KEYS:
                raise ConfigurationError(f"unknown parameter {key!r}; expected one of {', '.join(PARAM_KEYS)}")
            fields[PARAM_KEYS[key]] = int(value)
        n = fields.get("n")
        if n and kernel == "three-step-ntt" and "r" not in fields and "cols" not in fields:
            fields["r"], fields["cols"] = balanced_factors(n, "three-step")
        if n and kernel == "five-step-ntt" and not {"r1", "r2", "cols"} & fields.keys():
            fields["r1"], fields["r2"], fields["cols"] = balanced_factors(n, "five-step")
        return cls(kernel=kernel, padd_unit=padd_unit, **fields)

    def params(self) -> dict[str, int]:
        """The kernel's parameters under their command-line names."""
        reverse = {v: k for k, v in PARAM_KEYS.items()}
        return {reverse[name]: getattr(self, name) for name in _REQUIRED[self.kernel]}


class SpanReport(msgspec.Struct, frozen=True):
    kernel: str
    params: dict[str, int]
    spans: dict[str, float]
    bottleneck: str
    bigt: float
    memory_calibrated: bool

    def to_format_dict(self) -> dict[str, str | None]:
        """Row for the analyze CSV."""
        return {
            "kernel": self.kernel,
            "params": ";".join(f"{k}={v}" for k, v in self.params.items()),
            "vpu": f"{self.spans['VPU']:.6g}",
            "mxu": f"{self.spans['MXU']:.6g}",
            "xlu": f"{self.spans['XLU']:.6g}",
            "memory": f"{self.spans['Memory']:.6g}",
            "bottleneck": self.bottleneck,
            "bigt": f"{self.bigt:.6g}",
        }


def _msm_compute(config: KernelConfig, par: float) -> float:
    n, k, c = config.n, config.k, config.c
    accumulate = k * n / par
    merge = ((k - 1) * (1 + c) + 1) / par
    if config.kernel == "presort-ppg":
        reduce = 2 * k * (2**c - 1) / 2
    else:
        reduce = 4 * k * (2**c - 1) / c
    return accumulate + reduce + merge


def predict_spans(config: KernelConfig, profile: HardwareProfile = DEFAULT_PROFILE) -> SpanReport:
    """Per-unit spans, bottleneck and Big-T for one kernel configuration.

    Ties are broken in the order VPU, MXU, XLU, Memory.
    """
    p = profile
    lg = math.log2
    match config.kernel:
        case "radix-mont":
            d = config.d
            spans = (d * d / p.par_vpu, d * d / p.par_mxu, d * d * lg(d) / p.par_shuffle, d / p.bw_hbm)
        case "mxu-rns-lazy":
            d = config.d
            spans = (4 * d / p.par_vpu, d * d / p.par_mxu, 0.0, 2 * d / p.bw_hbm)
        case "presort-ppg" | "ls-ppg":
            n = config.n
            vpu = _msm_compute(config, p.par_vpu) if config.padd_unit in ("vpu", "both") else 0.0
            mxu = _msm_compute(config, p.par_mxu) if config.padd_unit in ("mxu", "both") else 0.0
            xlu = 2**config.c * n * lg(n) / p.par_shuffle
            words = config.k * n if config.kernel == "presort-ppg" else 2 * n
            spans = (vpu, mxu, xlu, words / p.bw_hbm)
        case "butterfly-ntt":
            n = config.n
            spans = (n * lg(n) / p.par_vpu, 0.0, n * lg(n) / p.par_shuffle_element, 2 * n / p.bw_hbm)
        case "three-step-ntt":
            n, r, c = config.n, config.r, config.cols
            spans = (n / p.par_vpu, n * (r + c) / p.par_mxu, 2 * n / p.par_transpose, (2 * n + r * r + c * c) / p.bw_hbm)
        case "five-step-ntt":
            n, r1, r2, c = config.n, config.r1, config.r2, config.cols
            words = 2 * n + r1 * r1 + r2 * r2 + r1 * r2 + c * c
            spans = (2 * n / p.par_vpu, n * (r1 + r2 + c) / p.par_mxu, 3 * n / p.par_transpose, words / p.bw_hbm)
        case _:
            raise ConfigurationError(f"unknown kernel {config.kernel!r}")
    by_unit = dict(zip(UNITS, (float(s) for s in spans), strict=True))
    candidates = UNITS if p.bw_calibrated else UNITS[:3]
    bottleneck = max(candidates, key=lambda unit: (by_unit[unit], -UNITS.index(unit)))
    return SpanReport(
        kernel=config.kernel,
        params=config.params(),
        spans=by_unit,
        bottleneck=bottleneck,
        bigt=by_unit[bottleneck],
        memory_calibrated=p.bw_calibrated,
    )


def parse_range(text: str) -> tuple[int, int]:
    """Parse "a..b" where either end may be written 2^k.

    A range with b < a is empty and sweeps nothing.

    Raises:
        ConfigurationError: On malformed text or a non-positive start.
    """

    def value(part: str) -> int:
        part = part.strip()
        try:
            if "^" in part:
                base, exp = part.split("^", 1)
                return int(base) ** int(exp)
            return int(part)
        except ValueError as exc:
            raise ConfigurationError(f"not an integer: {part!r}") from exc

    if ".." not in text:
        raise ConfigurationError(f"range must look like a..b, got {text!r}")
    start, stop = (value(p) for p in text.split("..", 1))
    if start < 1:
        raise ConfigurationError(f"non-positive range {text!r}")
    return start, stop


def sweep_configs(
    kernel: str, base: Mapping[str, int], param: str, start: int, stop: int, *, padd_unit: str = "vpu"
) -> list[KernelConfig]:
    """Configurations stepping one parameter from start to stop inclusive.

    N and the NTT factors double at each step, every other parameter increments by one. When N
    sweeps, NTT factors not fixed in `base` follow the balanced split.
    """
    field = PARAM_KEYS.get(param)
    if field is None:
        raise ConfigurationError(f"unknown sweep parameter {param!r}")
    configs = []
    value = start
    while value <= stop:
        configs.append(KernelConfig.from_params(kernel, {**base, param: value}, padd_unit=padd_unit))
        value = value * 2 if field in _GEOMETRIC else value + 1
    return configs


def sweep(configs: list[KernelConfig], profile: HardwareProfile = DEFAULT_PROFILE) -> list[SpanReport]:
    """Span reports for each configuration, in order."""
    reports = [predict_spans(config, profile) for config in configs]
    log.debug(f"Swept {len(reports)} configurations on profile {profile.name}")
    return reports


def expected_counts(config: KernelConfig) -> dict[str, int]:
    """Exact operation counts the executable schedule of a kernel issues.

    For the MSM kernels only the data independent phases are counted: bucket reduction (running
    sums for presort-ppg, the pairwise tree for ls-ppg) and the window merge. The NTT counts are
    those of the oracle backend, where every product is one `field_mul`.
    """
    match config.kernel:
        case "radix-mont":
            return {"field_mul": 1, "digit_mul": 2 * config.d * config.d}
        case "mxu-rns-lazy":
            d = config.d
            return {"field_mul": 1, "byte_mac": 16 * d * d}
        case "presort-ppg":
            k, c = config.k, config.c
            return {"padd": 2 * k * (2**c - 1) + (k - 1), "pdbl": (k - 1) * c}
        case "ls-ppg":
            k, c = config.k, config.c
            return {"padd": 3 * k * (2**c - 1) + (k - 1), "pdbl": k * (2**c - 1) + (k - 1) * c}
        case "butterfly-ntt":
            n = config.n
            return {"field_mul": (n // 2) * int(math.log2(n)), "permute": n}
        case "three-step-ntt":
            n = config.n
            return {"field_mul": n * (config.r + config.cols) + n, "mac": n * (config.r + config.cols), "permute": n}
        case "five-step-ntt":
            n, s = config.n, config.r1 + config.r2 + config.cols
            return {"field_mul": n * s + 2 * n, "mac": n * s, "permute": n}
    raise ConfigurationError(f"unknown kernel {config.kernel!r}")


class CountReport(msgspec.Struct):
    counts: dict[str, int]
    expected: dict[str, int]

    @property
    def ratios(self) -> dict[str, float]:
        """Measured over expected, per expected kind."""
        return {k: (self.counts.get(k, 0) / v if v else float(self.counts.get(k, 0) == 0)) for k, v in self.expected.items()}

    @property
    def consistent(self) -> bool:
        """True when every expected count was met exactly."""
        return all(self.counts.get(k, 0) == v for k, v in self.expected.items())


def measure_counts(run: Callable[[], T], expected: Mapping[str, int]) -> tuple[T, CountReport]:
    """Run a kernel under a counter and pair the counts with the model's expectations."""
    with counting() as counts:
        result = run()
    report = CountReport(counts=counts.as_dict(), expected=dict(expected))
    if not report.consistent:
        log.warning(f"Measured counts {report.counts} differ from expected {report.expected}")
    return result, report
