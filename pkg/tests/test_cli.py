from __future__ import annotations

import asyncio
import csv
from pathlib import Path

import pytest

from core import Morph
from extensions.bench import HEADER as BENCH_HEADER

ROOT = Path(__file__).resolve().parent.parent


def morph(*argv: str) -> int:
    return asyncio.run(Morph(environment="development", root=ROOT).run(list(argv)))


def read_csv(path: Path) -> list[dict[str, str]]:
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def test_analyze_sweep(tmp_path):
    out = tmp_path / "spans.csv"
    assert morph("--out", str(out), "analyze", "--kernel", "three-step-ntt", "--sweep", "N=2^14..2^16") == 0
    rows = read_csv(out)
    assert out.read_text().splitlines()[0] == "kernel,params,vpu,mxu,xlu,memory,bottleneck,bigt"
    assert [row["params"] for row in rows] == [
        "N=16384;R=128;C=128",
        "N=32768;R=128;C=256",
        "N=65536;R=256;C=256",
    ]
    assert {row["bottleneck"] for row in rows} == {"MXU"}


def test_analyze_empty_sweep_writes_header_only(tmp_path):
    out = tmp_path / "spans.csv"
    argv = ("--out", str(out), "analyze", "--kernel", "presort-ppg", "--param", "N=1024", "--param", "c=4", "--sweep", "K=4..2")
    assert morph(*argv) == 0
    assert out.read_text() == "kernel,params,vpu,mxu,xlu,memory,bottleneck,bigt\n"


def test_analyze_writes_to_stdout(capsys):
    assert morph("analyze", "--kernel", "radix-mont", "--param", "D=8") == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 2
    assert lines[1].startswith("radix-mont,D=8,")
    assert lines[1].split(",")[6] == "XLU"


def test_analyze_with_register_profile(capsys):
    assert morph("analyze", "--kernel", "butterfly-ntt", "--param", "N=2^16", "--profile", "tpu-v4-vreg") == 0
    assert capsys.readouterr().out.splitlines()[1].split(",")[6] == "VPU"


@pytest.mark.parametrize(
    "argv",
    [
        ("analyze", "--kernel", "radix-mont", "--param", "Q=8"),
        ("analyze", "--kernel", "radix-mont"),
        ("analyze", "--kernel", "radix-mont", "--param", "D=8", "--profile", "tpu-v9"),
        ("analyze", "--kernel", "three-step-ntt", "--param", "N=16", "--param", "R=4", "--param", "C=8"),
        ("--config", "missing.toml", "analyze", "--kernel", "radix-mont", "--param", "D=8"),
        ("bench", "--repeats", "0"),
    ],
)
def test_usage_errors_exit_with_two(argv, capsys):
    assert morph(*argv) == 2
    assert "error:" in capsys.readouterr().err


def test_unknown_command():
    assert morph("transmogrify") == 2


def test_lazy_toy_suite(tmp_path):
    out = tmp_path / "report.txt"
    assert morph("--out", str(out), "verify", "--suite", "lazy-toy") == 0
    report = out.read_text()
    assert report.startswith("verify (seed 7, backend oracle)")
    assert "lazy-toy" in report
    assert "failed=0" in report
    assert "lambda=" in report


def test_bigt_suite(tmp_path):
    assert morph("--out", str(tmp_path / "report.txt"), "verify", "--suite", "bigt") == 0


def test_generated_vectors_verify(tmp_path):
    vectors = tmp_path / "vectors"
    assert morph("--out", str(vectors), "gen-vectors") == 0
    names = sorted(p.name for p in vectors.iterdir())
    assert names == ["modmul_bn254_fr.txt", "modmul_toy97.txt", "msm_toy13.txt", "ntt_ntt_7681.txt"]
    assert morph("--out", str(tmp_path / "report.txt"), "verify", "--suite", "golden", "--vectors", str(vectors)) == 0
    assert "4 files" in (tmp_path / "report.txt").read_text()


def test_generated_vectors_are_deterministic(tmp_path):
    assert morph("--out", str(tmp_path / "a"), "gen-vectors") == 0
    assert morph("--out", str(tmp_path / "b"), "gen-vectors") == 0
    for path in (tmp_path / "a").iterdir():
        assert path.read_text() == (tmp_path / "b" / path.name).read_text()
    assert morph("--seed", "8", "--out", str(tmp_path / "c"), "gen-vectors") == 0
    assert (tmp_path / "c" / "modmul_toy97.txt").read_text() != (tmp_path / "a" / "modmul_toy97.txt").read_text()


def test_tampered_vectors_fail_verification(tmp_path, capsys):
    vectors = tmp_path / "vectors"
    assert morph("--out", str(vectors), "gen-vectors") == 0
    path = vectors / "modmul_toy97.txt"
    lines = path.read_text().splitlines()
    lines[1] = "1 1 2"
    path.write_text("\n".join(lines) + "\n")
    assert morph("--out", str(tmp_path / "report.txt"), "verify", "--suite", "golden", "--vectors", str(vectors)) == 1
    err = capsys.readouterr().err
    assert "verification failed" in err
    assert "record 0" in err


def test_empty_vector_files_pass(tmp_path):
    vectors = tmp_path / "vectors"
    assert morph("--out", str(vectors), "gen-vectors", "--count", "0") == 0
    assert (vectors / "msm_toy13.txt").read_text() == "# morph kind=msm curve=toy13 c=4 count=0\n"
    assert morph("--out", str(tmp_path / "report.txt"), "verify", "--suite", "golden", "--vectors", str(vectors)) == 0


def test_golden_without_vectors_passes(tmp_path):
    out = tmp_path / "report.txt"
    assert morph("--out", str(out), "verify", "--suite", "golden", "--vectors", str(tmp_path / "none")) == 0
    assert "no vectors" in out.read_text()


def test_bench_rows(tmp_path):
    out = tmp_path / "bench.csv"
    argv = ("--out", str(out), "--backend", "oracle", "bench", "--kernel", "modmul", "--kernel", "ntt", "--size", "3", "--repeats", "1")
    assert morph(*argv) == 0
    assert out.read_text().splitlines()[0] == ",".join(BENCH_HEADER)
    rows = read_csv(out)
    assert [row["kernel"] for row in rows] == ["modmul", "ntt-butterfly", "ntt-three-step", "ntt-five-step"]
    assert all(row["size"] == "8" and row["backend"] == "oracle" for row in rows)
    assert all(row["low_confidence"] == "true" for row in rows)
    assert int(rows[1]["field_mul"]) == 4 * 3
    assert int(rows[1]["permute"]) == 8


def test_bench_msm_on_the_lazy_backend(tmp_path):
    out = tmp_path / "bench.csv"
    assert morph("--out", str(out), "--backend", "rns-lazy", "bench", "--kernel", "msm", "--size", "2", "--repeats", "1") == 0
    (row,) = read_csv(out)
    assert row["kernel"] == "msm"
    assert int(row["padd"]) > 0


def test_bench_ntt_flags_with_verification(tmp_path):
    out = tmp_path / "bench.csv"
    argv = (
        "--out", str(out), "--backend", "oracle", "bench", "--kernel", "ntt", "--size", "4",
        "--ntt-variant", "three-step", "--factors", "2,8", "--compare-direct", "--verify",
        "--repeats", "1", "--warmup", "0",
    )
    assert morph(*argv) == 0
    rows = read_csv(out)
    assert [row["kernel"] for row in rows] == ["ntt-three-step", "ntt-direct"]
    # three-step with R=2, C=8: N(R+C)+N multiplications
    assert int(rows[0]["field_mul"]) == 16 * (2 + 8) + 16
    assert int(rows[1]["field_mul"]) == 16 * 16


def test_bench_verify_modmul_and_msm(tmp_path):
    out = tmp_path / "bench.csv"
    argv = (
        "--out", str(out), "--backend", "rns-lazy", "bench", "--kernel", "modmul", "--kernel", "msm",
        "--size", "2", "--window-bits", "2", "--verify", "--repeats", "1",
    )
    assert morph(*argv) == 0
    assert [row["kernel"] for row in read_csv(out)] == ["modmul", "msm"]


@pytest.mark.parametrize(
    "argv",
    [
        ("bench", "--kernel", "ntt", "--ntt-variant", "butterfly", "--factors", "4,4"),
        ("bench", "--kernel", "ntt", "--ntt-variant", "three-step", "--factors", "4,x"),
        ("bench", "--warmup", "-1"),
    ],
)
def test_bench_flag_errors(argv, capsys):
    assert morph(*argv) == 2
    assert "error:" in capsys.readouterr().err


@pytest.mark.slow
def test_every_suite_passes(tmp_path):
    out = tmp_path / "report.txt"
    assert morph("--out", str(out), "verify") == 0
    assert "failed=0" in out.read_text()
