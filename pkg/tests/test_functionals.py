import math

import numpy as np
import pytest
import sympy
from scipy import integrate

from carnotheat.catalog import get_group
from carnotheat.diffusion import DiffusionSampler, ledoux_constant
from carnotheat.frame import horizontal_frame
from carnotheat.functionals import (absolute_moment, bbm_energy, bbm_limit,
                                    bbm_seminorm_limit, besov_embedding_bound, besov_seminorm,
                                    diffquot_bound_profile, gaussian_moment_constant, lp_norm,
                                    ms_limit, phi_p2_oracle, phi_profile, sandwich_check,
                                    sobolev_energy)
from carnotheat.heat_kernel import KernelEngine
from carnotheat.testfns import get_function, zero_field

from oracles import chi_moment


def _r1_fourier_energy(t):
    """``t^-1 int |f^|^2 2 (1 - e^{-t xi^2}) dxi / 2pi`` for f = (1 - x^2)^2."""
    x, xi = sympy.symbols("x xi", real=True)
    fhat = sympy.lambdify(xi, sympy.integrate((1 - x ** 2) ** 2 * sympy.cos(xi * x),
                                              (x, -1, 1)), "math")

    def integrand(k):
        return fhat(k) ** 2 * 2 * -math.expm1(-t * k * k) if k > 1e-6 else 0.0
    val, _ = integrate.quad(integrand, 0, np.inf, limit=400)
    return 2 * val / (2 * math.pi) / t


@pytest.fixture(scope="module")
def r1():
    return get_group("r1")


def test_constants():
    assert gaussian_moment_constant(2, 2) == pytest.approx(4.0)
    for p, m in ((1, 2), (3, 4), (2.5, 3)):
        assert gaussian_moment_constant(p, m) == pytest.approx(chi_moment(p, m, 2.0))
    assert absolute_moment(2, 3.0) == pytest.approx(3.0)
    assert ledoux_constant(2) == pytest.approx(2.0)


def test_r1_energy_matches_fourier_oracle(r1):
    f = get_function("r1_bump").field
    for t in (0.01, 0.1):
        est = bbm_energy(f, 2.0, t, r1)
        assert est.value == pytest.approx(_r1_fourier_energy(t), rel=1e-7)


def test_r1_limit_reaches_sobolev_target(r1):
    f = get_function("r1_bump").field
    rep = bbm_limit(f, 2.0, [4e-4, 2e-4, 1e-4, 5e-5], r1)
    # target 2 * 256/105
    assert rep.target == pytest.approx(512 / 105, rel=1e-10)
    assert abs(rep.ratio - 1) <= 3 * rep.ratio_error + 1e-6


def test_lp_norm_and_sobolev_exact(r1):
    f = get_function("r1_bump").field
    assert lp_norm(f, 2.0).value == pytest.approx(256 / 315, rel=1e-12)
    assert sobolev_energy(f, 2.0, horizontal_frame(r1)).value == pytest.approx(256 / 105,
                                                                              rel=1e-12)


def test_zero_function_gives_zero(r1):
    z = zero_field(1)
    assert bbm_energy(z, 2.0, 0.1, r1).value == 0.0
    assert sobolev_energy(z, 2.0, horizontal_frame(r1)).value == 0.0
    rep = bbm_limit(z, 1.0, [0.4, 0.2, 0.1], r1)
    assert rep.limit.value == 0.0


def test_input_errors(r1):
    f = get_function("r1_bump").field
    with pytest.raises(ValueError):
        bbm_energy(f, 0.5, 0.1, r1)
    with pytest.raises(ValueError):
        bbm_energy(f, 2.0, 0.0, r1)
    with pytest.raises(ValueError):
        bbm_limit(f, 2.0, [0.1, 0.2, 0.4], r1)
    with pytest.raises(ValueError):
        bbm_limit(f, 2.0, [0.1, 0.07, 0.05], r1)


@pytest.fixture(scope="module")
def r1_profile(r1):
    f = get_function("r1_bump").field
    return phi_profile(f, 2.0, np.geomspace(1e-4, 1e3, 15), r1)


def test_profile_plateau_and_small_t(r1_profile):
    assert "plateau-not-reached" not in r1_profile.flags
    assert r1_profile.metadata["plateau_ratio"] == pytest.approx(1.0, abs=0.02)
    assert r1_profile.metadata["small_t_ratio"] == pytest.approx(1.0, abs=0.01)
    # Phi is increasing in t
    assert np.all(np.diff(r1_profile.values) > 0)


def test_profile_matches_fourier_oracle(r1_profile):
    for ti, v in zip(r1_profile.t[::4], r1_profile.values[::4]):
        assert v == pytest.approx(_r1_fourier_energy(ti) * ti, rel=1e-6)


def test_besov_limits_r1(r1_profile):
    f = get_function("r1_bump").field
    hi = bbm_seminorm_limit(f, 2.0, [0.99, 0.995, 0.999], r1_profile)
    assert hi.ratio == pytest.approx(1.0, abs=0.02)
    lo = ms_limit(f, 2.0, [0.02, 0.01], r1_profile)
    assert lo.ratio == pytest.approx(1.0, abs=0.02)
    with pytest.raises(ValueError):
        ms_limit(f, 2.0, [0.01, 0.02], r1_profile)
    with pytest.raises(ValueError):
        bbm_seminorm_limit(f, 2.0, [0.9, 1.0], r1_profile)


def test_embedding_and_difference_quotient_bounds(r1_profile):
    f = get_function("r1_bump").field
    cp = gaussian_moment_constant(2.0, 1)
    for s in (0.1, 0.5, 0.9):
        assert besov_seminorm(f, s, 2.0, r1_profile).value <= \
            besov_embedding_bound(r1_profile, s, cp)
    rep = diffquot_bound_profile(r1_profile, 1)
    assert rep["ok"] and rep["max_ratio"] <= 1


def test_sandwich_r1(r1_profile):
    rep = sandwich_check(r1_profile, r1_profile.t[:3], [0.9999, 0.99999, 0.999999])
    assert rep["ok"], rep
    with pytest.raises(ValueError):
        sandwich_check(r1_profile, [0.5e-4], [0.999])


def test_h1_energy_matches_p2_oracle():
    sc = get_group("h1")
    f = get_function("h1_bump").field
    t = 0.25
    oracle = phi_p2_oracle(f, t, KernelEngine(sc), sc)
    mc = bbm_energy(f, 2.0, t, DiffusionSampler(sc, t, 0.0125, 64, seed=11)).scaled(t)
    assert abs(mc.value - oracle.value) <= 3 * (mc.error + oracle.error)
