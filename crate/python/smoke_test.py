"""Smoke test for the pyscanvlp extension.

Build and install it first, either inside a virtualenv:

    maturin develop --release -m crates/py/Cargo.toml

or as a wheel:

    maturin build --release -m crates/py/Cargo.toml -o target/wheels
    pip install target/wheels/pyscanvlp-*.whl

then run ``python python/smoke_test.py``.
"""

import json
import math
import tempfile
from pathlib import Path

import pyscanvlp as sv


def close(a, b, rel=1e-9):
    return abs(a - b) <= rel * max(abs(a), abs(b), 1e-300)


def main():
    grid = sv.BeamGrid()
    assert len(grid) == 32_400, len(grid)
    assert grid.angles(grid.index(0, 0)) == (0.0, 0.0)
    assert grid.column(0) == (0.0, 0.0, -1.0) or close(grid.column(0)[2], -1.0)

    ch = sv.ChannelParams()
    assert abs(ch.beam_radius(3.0) - 0.153760) < 1e-6
    y = ch.received_power(1.7, 0.9)
    d, status = ch.invert_distance(y, 0.9)
    assert status == "ok" and close(d, 1.7), (d, status)

    assert sv.laplace_sample(0.0, 10.0, 0.0) == 0.0
    assert abs(sv.laplace_cdf(0.0, 10.0, 0.0) - 0.5) < 1e-15
    n = sv.normal_from_euler(10.0, -25.0, 40.0)
    assert abs(math.hypot(*n) - 1.0) < 1e-12
    assert sv.normal_from_euler(0.0, 0.0, 0.0) == (0.0, 0.0, 1.0)

    # noiseless recovery along a grid direction
    j = grid.index(20, 133)
    u = grid.column(j)
    truth = tuple(e + 1.5 * c for e, c in zip((0.5, 0.5, 3.0), u))
    samples = sv.simulate_scan(grid, truth)
    est = sv.estimate(grid, samples)
    assert est["beam_index"] == j and est["status"] == "ok", est
    err = math.dist(est["position"], truth)
    assert err < 1e-9, err

    small = """
[experiment]
grid_spacing_m = 0.5
h_max_m = 1.0
trials_per_point = 1
[scan]
azimuth_step_deg = 5
elevation_step_deg = 5
"""
    meta = json.loads(sv.run_experiment("cdf", small))
    assert meta["mode"] == "cdf"
    assert meta["summary"]["aggregates"]["samples"] == 3 * 3 * 3
    assert meta["snr_definition"] == sv.SNR_DEFINITION

    with tempfile.TemporaryDirectory() as tmp:
        paths = sv.write_experiment("snr-sweep", tmp, small)
        names = sorted(Path(p).name for p in paths)
        assert names == ["mean_error_vs_snr.csv", "meta.json"], names
        rows = (Path(tmp) / "mean_error_vs_snr.csv").read_text().splitlines()
        assert len(rows) == 1 + 7

    try:
        sv.run_experiment("cdf", "[channel]\nwavelength = 1\n")
    except ValueError:
        pass
    else:
        raise AssertionError("unknown config key accepted")

    print(f"pyscanvlp {sv.__version__}: smoke test passed")


if __name__ == "__main__":
    main()
