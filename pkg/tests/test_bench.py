import statistics

import numpy as np
import pytest
from threadpoolctl import threadpool_limits

from striplab import bench
from striplab.attention import (SelfAttentionParams, StdaParams, flops_self_attention,
                                flops_stda, self_attention, stda)


def test_parse_grid():
    assert bench.parse_grid("8,16") == ((8, 8), (16, 16))
    assert bench.parse_grid("8x16, 32X4") == ((8, 16), (32, 4))


@pytest.mark.parametrize("kwargs", [
    {"k": 4}, {"reps": 2}, {"warmup": 0}, {"channels": 0}, {"grid": ()}, {"grid": ((0, 8),)},
])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        bench.BenchConfig(**kwargs)


def test_modeled_flops_columns():
    assert bench.modeled_flops("stda", 64, 64, 32, 7) == flops_stda(64, 64, 32, 7).total
    assert bench.modeled_flops("self_attention", 8, 8, 32, 7) == flops_self_attention(8, 8, 32).total


def test_loglog_slope_exact():
    sizes = [64, 256, 1024, 4096]
    assert bench.loglog_slope(sizes, [3 * s for s in sizes]) == pytest.approx(1.0, abs=1e-12)
    assert bench.loglog_slope(sizes, [s * s for s in sizes]) == pytest.approx(2.0, abs=1e-12)


def test_time_median_counts_calls():
    calls = []
    ns = bench.time_median(lambda: calls.append(1), reps=5, warmup=2)
    assert len(calls) == 7 and ns >= 0


def test_small_run_csv_schema():
    cfg = bench.BenchConfig(grid=((4, 4), (8, 8)), channels=4, k=3, reps=3)
    records, skipped = bench.run_bench(cfg)
    assert skipped == []
    text = bench.render_csv(records)
    lines = text.splitlines()
    assert lines[0] == bench.CSV_VERSION
    assert lines[1] == ",".join(bench.COLUMNS)
    rows = bench.read_csv(text)
    assert [(r["op"], r["H"]) for r in rows] == [
        ("self_attention", "4"), ("stda", "4"), ("self_attention", "8"), ("stda", "8")]
    for r in rows:
        h, w, c, k = int(r["H"]), int(r["W"]), int(r["C"]), int(r["K"])
        assert int(r["flops_model"]) == bench.modeled_flops(r["op"], h, w, c, k)
        assert float(r["ns_median"]) > 0
        assert float(r["flops_per_ns"]) == pytest.approx(
            int(r["flops_model"]) / float(r["ns_median"]), rel=1e-5)
    assert sum(line.startswith("# slope op=") for line in lines) == 2


def test_skipped_points_are_commented():
    text = bench.render_csv([], skipped=[("self_attention", 512, 512)])
    assert "# skipped op=self_attention H=512 W=512 reason=allocation-failure" in text
    assert bench.read_csv(text) == []


@pytest.mark.slow
@pytest.mark.parametrize("size", [32, 64])
@pytest.mark.parametrize("op", ["self_attention", "stda"])
def test_median_stable_when_reps_double(op, size):
    # the first half of one sample stream is exactly a run with half the reps,
    # so background drift between separate runs does not enter the comparison
    rng = np.random.default_rng(1)
    x = rng.normal(size=(32, size, size))
    if op == "stda":
        p = StdaParams.random(7, 32, rng)
        fn = lambda: stda(x, p)  # noqa: E731
    else:
        p = SelfAttentionParams.random(32, rng)
        fn = lambda: self_attention(x, p)  # noqa: E731
    with threadpool_limits(limits=1):
        samples = bench.time_samples(fn, reps=14, warmup=2)
    half, full = statistics.median(samples[:7]), statistics.median(samples)
    assert abs(full - half) / half < 0.2, (half, full)
