import json
import math

import numpy as np
import pytest

from carnotheat.catalog import get_group
from carnotheat.diffusion import (BLOCK_SIZE, DiffusionSampler, huisken_statistic,
                                  kde_kernel_estimate, ledoux_constant, ledoux_statistic,
                                  marginal_gaussian_test, sample_endpoints, write_endpoints)
from carnotheat.heat_kernel import KernelEngine, step2_kernel

from oracles import gaussian_abs_moment


def test_sampler_validation():
    sc = get_group("h1")
    for kw in ({"h": 0.0}, {"t": -1.0}, {"n": 0}, {"n": 2.5}, {"scheme": "euler"},
               {"threads": 0}, {"t": 0.001, "h": 0.01}):
        args = {"sc": sc, "t": 1.0, "h": 0.01, "n": 10, **kw}
        with pytest.raises(ValueError):
            DiffusionSampler(**args)


def test_scheme_resolution():
    assert DiffusionSampler(get_group("h1"), 1.0, 0.1, 10).resolved_scheme() == "layer-exact"
    assert DiffusionSampler(get_group("free2_3"), 1.0, 0.1, 10).resolved_scheme() == \
        "layer-exact"
    assert DiffusionSampler(get_group("engel"), 1.0, 0.1, 10).resolved_scheme() == "heun"
    with pytest.raises(ValueError, match="Ito"):
        DiffusionSampler(get_group("engel"), 1.0, 0.1, 10, scheme="layer-exact").resolved_scheme()


def test_determinism_and_thread_independence():
    sc = get_group("engel")
    n = BLOCK_SIZE + 123
    a = sample_endpoints(DiffusionSampler(sc, 0.5, 0.05, n, seed=7))
    b = sample_endpoints(DiffusionSampler(sc, 0.5, 0.05, n, seed=7, threads=3))
    c = sample_endpoints(DiffusionSampler(sc, 0.5, 0.05, n, seed=8))
    np.testing.assert_array_equal(a.points, b.points)
    assert not np.array_equal(a.points, c.points)
    assert not a.points.flags.writeable


def test_step_count_and_horizon():
    s = sample_endpoints(DiffusionSampler(get_group("h1"), 1.0, 0.3, 10))
    assert s.metadata["n_steps"] == 4
    assert s.h == pytest.approx(0.25)


def test_write_endpoints(tmp_path):
    s = sample_endpoints(DiffusionSampler(get_group("h1"), 1.0, 0.5, 3, seed=1))
    write_endpoints(s, tmp_path / "e.csv", tmp_path / "e.json")
    lines = (tmp_path / "e.csv").read_text().splitlines()
    assert lines[0] == "path_id,layer,index,value"
    assert len(lines) == 1 + 3 * 3
    assert lines[3].split(",")[:3] == ["0", "2", "1"]
    meta = json.loads((tmp_path / "e.json").read_text())
    assert meta["n"] == 3 and meta["scheme"] == "layer-exact"


def test_marginal_and_ledoux_small_run():
    s = sample_endpoints(DiffusionSampler(get_group("h1"), 1.0, 0.1, 20_000, seed=3))
    rep = marginal_gaussian_test(s)
    assert rep["ok"], rep["checks"]
    for p in (1.0, 2.0, 3.0):
        est = ledoux_statistic(s, [0.6, 0.8], p)
        assert est.within(ledoux_constant(p), k=4)


def test_marginal_test_detects_wrong_time():
    s = sample_endpoints(DiffusionSampler(get_group("h1"), 1.0, 0.1, 20_000, seed=3))
    assert not marginal_gaussian_test(s, t=1.2)["ok"]


def test_ledoux_constant_matches_gaussian_moment():
    # E|N(0, 2)|^p
    for p in (1.0, 2.0, 3.0, 4.5):
        assert ledoux_constant(p) == pytest.approx(gaussian_abs_moment(p, 2.0), rel=1e-13)


def test_engel_heun_layer_statistics():
    # second layer of Engel is the Levy area of the z-block, mean 0
    s = sample_endpoints(DiffusionSampler(get_group("engel"), 1.0, 0.02, 20_000, seed=4))
    area = s.points[:, 2]
    assert abs(area.mean()) < 4 * area.std() / math.sqrt(area.size)
    # E[A^2] for A = (1/2) int (z1 dz2 - z2 dz1), z = sqrt(2) W: 2^2 * t^2 / 4 * ... = t^2
    assert np.mean(area ** 2) == pytest.approx(1.0, rel=0.05)


def test_heisenberg_area_second_moment():
    s = sample_endpoints(DiffusionSampler(get_group("h1"), 1.0, 0.02, 20_000, seed=5))
    assert np.mean(s.points[:, 2] ** 2) == pytest.approx(1.0, rel=0.05)


def test_vertical_variance_deficit_of_coarse_steps():
    # the discrete area misses the intra-step areas: Var(sigma) = t (1 - h / t)
    s = sample_endpoints(DiffusionSampler(get_group("h1"), 1.0, 0.1, 100_000, seed=9))
    assert np.var(s.points[:, 2]) == pytest.approx(0.9, abs=0.02)


def test_huisken_and_kde_small_run():
    # the vertical law needs the fine step; a coarse one biases the KDE upward
    s = sample_endpoints(DiffusionSampler(get_group("h1"), 1.0, 0.01, 200_000, seed=6))
    assert huisken_statistic(s, [1.0, 0.0]).within(1.0, k=3)
    est = kde_kernel_estimate(s, [0.0, 0.0, 0.0])
    exact = step2_kernel(np.zeros(3), 1.0, KernelEngine(get_group("h1"))).value
    assert abs(est.value - exact) <= 3 * est.error


def test_statistic_input_errors():
    s = sample_endpoints(DiffusionSampler(get_group("h1"), 1.0, 0.5, 50))
    with pytest.raises(ValueError):
        ledoux_statistic(s, [1.0, 1.0], 2.0)
    with pytest.raises(ValueError):
        ledoux_statistic(s, [1.0, 0.0], 0.5)
    with pytest.raises(ValueError):
        marginal_gaussian_test(s)
    with pytest.raises(ValueError):
        huisken_statistic(s, [1.0, 0.0])
