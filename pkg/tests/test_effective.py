import math

import numpy as np
import pytest

from pmhomog.effective import (
    EffectiveFlux,
    check_fbar_properties,
    default_p_grid,
    effective_f,
    effective_g,
    torus_measure,
)
from pmhomog.errors import ConfigError, NumericalError
from pmhomog.flux import g_eval
from pmhomog.io import read_effective_flux, write_effective_flux
from pmhomog.medium import MediumSpec, ensemble_mean


def two_atom_gbar(p):
    # independent closed form: (sqrt(|p|) + sqrt(|p| / 4)) / 2 = 3/4 sqrt(|p|)
    p = np.asarray(p, dtype=float)
    return np.sign(p) * 0.5 * (np.sqrt(np.abs(p)) + np.sqrt(np.abs(p) / 4.0))


def two_atom_fbar(v):
    v = np.asarray(v, dtype=float)
    return np.sign(v) * (16.0 / 9.0) * v * v


def test_default_p_grid():
    p = default_p_grid(1.5)
    assert p.size == 513 and p[0] == pytest.approx(-1.8) and p[-1] == pytest.approx(1.8)
    assert 0.0 in p


def test_constant_medium_is_identity(unit_constant):
    eff = effective_g(unit_constant, default_p_grid(10.0))
    np.testing.assert_allclose(eff.gbar_values, np.sign(eff.p_grid) * np.sqrt(np.abs(eff.p_grid)), atol=1e-15)
    assert effective_f(eff, 3.0) == pytest.approx(9.0, rel=1e-12)
    v = np.linspace(-3, 3, 61)
    np.testing.assert_allclose(eff.fbar(v), v * np.abs(v), rtol=1e-10, atol=1e-12)


def test_two_atom_exact(two_atom):
    eff = effective_g(two_atom, default_p_grid(1.0))
    assert eff.method == "exact"
    np.testing.assert_allclose(eff.gbar_values, two_atom_gbar(eff.p_grid), rtol=1e-14, atol=1e-16)
    assert effective_f(eff, 1.0) == pytest.approx(16 / 9, abs=1e-10)
    assert abs(effective_f(eff, 1.0) - 2.5) > 0.7
    v = np.linspace(-1.3, 1.3, 53)
    np.testing.assert_allclose(eff.fbar(v), two_atom_fbar(v), rtol=1e-10, atol=1e-12)


def test_two_atom_table_without_measure(two_atom):
    # the bare table (as reloaded from CSV) must reproduce the closed form too
    exact = effective_g(two_atom, default_p_grid(2.0))
    eff = EffectiveFlux(exact.p_grid, exact.gbar_values, exact.stderr, exact.dgbar_values)
    assert effective_f(eff, 1.0) == pytest.approx(16 / 9, abs=1e-6)
    v = np.linspace(-1.0, 1.0, 401)
    assert np.max(np.abs(eff.fbar(v) - two_atom_fbar(v))) < 1e-6


def test_two_atom_as_bernoulli_seed_medium(two_atom):
    p = np.linspace(-1.0, 1.0, 21)
    eff = effective_g(two_atom, p, M=20_000, method="mc")
    assert eff.method == "mc"
    z = np.abs(eff.gbar_values - two_atom_gbar(p)) / np.where(eff.stderr > 0, eff.stderr, 1.0)
    assert np.all(z[p != 0] < 4.5)
    assert eff.gbar_values[10] == 0.0


def test_gbar_vanishes_at_common_zero_offset():
    spec = MediumSpec(kind="random_fourier", a_range=(0.5, 2), gamma_range=(0.5, 2), modes=3)
    eff = effective_g(spec, np.linspace(-1, 1, 11), M=200)
    assert eff.gbar_values[5] == 0.0


@pytest.mark.parametrize("kind", ["periodic", "random_fourier", "atoms", "constant"])
def test_round_trip_on_nodes(kind, two_atom):
    if kind == "atoms":
        spec = two_atom
    else:
        spec = MediumSpec(kind=kind, a_range=(1, 3), b_range=(-0.2, 0.2), gamma_range=(0.5, 1.5), modes=2)
    eff = effective_g(spec, default_p_grid(1.0), M=300)
    np.testing.assert_allclose(effective_f(eff, eff.gbar_values), eff.p_grid, rtol=0, atol=1e-9)


def test_interpolant_monotone_without_overshoot():
    spec = MediumSpec(kind="periodic", a_range=(1, 3), b_range=(-0.3, 0.3), gamma_range=(0.5, 2), modes=3)
    eff = effective_g(spec, np.linspace(-1.2, 1.2, 41))
    v = np.linspace(eff.gbar_values[0], eff.gbar_values[-1], 20_001)
    fb = eff.fbar(v)
    assert np.all(np.diff(fb) > 0)
    # each node interval maps into its own p interval
    k = np.clip(np.searchsorted(eff.gbar_values, v, side="right") - 1, 0, 39)
    assert np.all(fb >= eff.p_grid[k] - 1e-12) and np.all(fb <= eff.p_grid[k + 1] + 1e-12)
    p = np.linspace(-1.2, 1.2, 5001)
    np.testing.assert_allclose(eff.fbar(eff.gbar(p)), p, atol=1e-10)


def test_gbar_and_fbar_between_nodes_match_quadrature():
    spec = MediumSpec(kind="periodic", a_range=(1, 3), b_range=(-0.2, 0.2), gamma_range=(0.8, 1.2), modes=2)
    eff = effective_g(spec, default_p_grid(1.0))
    fine = torus_measure(spec, 1024)
    p = np.linspace(-1.1, 1.1, 997)
    v = fine.gbar(p)
    # away from the range of b the interpolant is essentially exact
    calm = np.abs(p) > 0.35
    assert np.max(np.abs(eff.gbar(p) - v)[calm]) < 1e-9
    assert np.max(np.abs(eff.fbar(v) - p)[calm]) < 1e-9
    # where p sweeps through the values of b the averaged inverse is only Holder smooth
    assert np.max(np.abs(eff.gbar(p) - v)) < 1e-3
    assert np.max(np.abs(eff.fbar(v) - p)) < 5e-4


def test_torus_matches_monte_carlo():
    spec = MediumSpec(kind="periodic", a_range=(1, 3), b_range=(-0.2, 0.2), gamma_range=(0.5, 1.5), modes=2)
    p = np.array([-0.9, -0.4, 0.35, 0.8])
    tor = effective_g(spec, p, method="torus")
    mc = effective_g(spec, p, M=20_000, method="mc")
    assert np.all(np.abs(tor.gbar_values - mc.gbar_values) <= 4 * mc.stderr)
    assert np.all(tor.stderr < 1e-10)


def test_mc_matches_ensemble_mean():
    spec = MediumSpec(kind="random_fourier", a_range=(1, 3), gamma_range=(0.5, 1.5), modes=2)
    eff = effective_g(spec, np.array([0.2, 0.7]), M=500, seed0=3)
    mean, se = ensemble_mean(spec, lambda c: g_eval(c, 0.7), 500, seed0=3)
    assert eff.gbar_values[1] == pytest.approx(mean, rel=1e-14)
    assert eff.stderr[1] == pytest.approx(se, rel=1e-12)


def test_mc_stderr_decays_like_inverse_root_M():
    spec = MediumSpec(kind="random_fourier", a_range=(0.5, 2), b_range=(-0.3, 0.3), gamma_range=(0.5, 1.5), modes=3)
    p = np.linspace(-1.5, 1.5, 13)
    se = [effective_g(spec, p, M=M, seed0=1).stderr.mean() for M in (100, 1000, 10_000)]
    for lo, hi in zip(se[:-1], se[1:]):
        assert 0.25 <= hi / lo <= 0.40


def test_extrapolation_beyond_table(two_atom):
    eff = effective_g(two_atom, default_p_grid(1.0))
    # exact measure: geometric bracket expansion far outside the table
    assert effective_f(eff, 5.0) == pytest.approx(16 / 9 * 25, rel=1e-10)
    assert effective_f(eff, -5.0) == pytest.approx(-16 / 9 * 25, rel=1e-10)
    table = EffectiveFlux(eff.p_grid, eff.gbar_values, eff.stderr, eff.dgbar_values)
    out = table.fbar(np.array([-3.0, -2.0, 2.0, 3.0]))
    assert np.all(np.diff(out) > 0)


def test_effective_f_rejects_non_finite(unit_constant):
    eff = effective_g(unit_constant)
    for bad in (np.nan, np.inf, -np.inf):
        with pytest.raises(ConfigError):
            effective_f(eff, bad)


def test_table_validation():
    with pytest.raises(NumericalError):
        EffectiveFlux(np.array([0.0, 1.0, 2.0]), np.array([0.0, 1.0, 1.0]), np.zeros(3))
    with pytest.raises(ConfigError):
        EffectiveFlux(np.array([0.0, 0.0]), np.array([0.0, 1.0]), np.zeros(2))
    with pytest.raises(ConfigError):
        effective_g(MediumSpec(), np.array([1.0, 0.5]))
    with pytest.raises(ConfigError):
        effective_g(MediumSpec(kind="random_fourier"), method="torus")
    with pytest.raises(ConfigError):
        effective_g(MediumSpec(kind="random_fourier"), M=1, method="mc")


def test_fbar_report_constant(unit_constant):
    eff = effective_g(unit_constant, default_p_grid(4.0))
    rep = check_fbar_properties(eff, np.linspace(-2, 2, 1001))
    assert rep.monotone and rep.violations == 0
    assert rep.lipschitz == pytest.approx(4.0, rel=0.01)


def test_fbar_report_two_atom(two_atom):
    eff = effective_g(two_atom, default_p_grid(4.0))
    rep = check_fbar_properties(eff, np.linspace(-2, 2, 1001))
    assert rep.monotone and rep.violations == 0
    assert rep.lipschitz == pytest.approx(4 * 16 / 9, rel=0.01)


def test_fbar_report_single_point(unit_constant):
    rep = check_fbar_properties(effective_g(unit_constant), np.array([0.3]))
    assert rep.monotone and rep.n_points == 1 and rep.violations == 0


def test_dfbar_matches_difference_quotient():
    spec = MediumSpec(kind="periodic", a_range=(1, 3), gamma_range=(0.5, 1.5), modes=2)
    eff = effective_g(spec, default_p_grid(1.0))
    v = np.array([-0.6, -0.2, 0.3, 0.5])
    h = 1e-6
    fd = (eff.fbar(v + h) - eff.fbar(v - h)) / (2 * h)
    np.testing.assert_allclose(eff.dfbar(v), fd, rtol=1e-4)
    p, s = eff.fbar_and_slope(v)
    np.testing.assert_allclose(p, eff.fbar(v))
    np.testing.assert_allclose(s, eff.dfbar(v))


def test_csv_round_trip_is_bit_stable(tmp_path):
    spec = MediumSpec(kind="random_fourier", a_range=(1, 3), b_range=(-0.1, 0.1), gamma_range=(0.5, 1.5), modes=2)
    eff = effective_g(spec, default_p_grid(1.0), M=100)
    path = write_effective_flux(tmp_path / "g.csv", eff)
    back = read_effective_flux(path)
    for name in ("p_grid", "gbar_values", "stderr", "dgbar_values"):
        np.testing.assert_array_equal(getattr(back, name), getattr(eff, name))
    v = np.linspace(-0.9, 0.9, 37)
    np.testing.assert_array_equal(back.fbar(v), eff.fbar(v))
    write_effective_flux(tmp_path / "h.csv", back)
    assert (tmp_path / "h.csv").read_bytes() == path.read_bytes()
    header = path.read_text().splitlines()[0]
    assert header.startswith("p,gbar,stderr")


def test_stderr_columns_are_nonnegative():
    spec = MediumSpec(kind="periodic", a_range=(1, 3), modes=2)
    eff = effective_g(spec, default_p_grid(1.0), n_quad=64)
    assert np.all(eff.stderr >= 0) and math.isfinite(eff.stderr.max())
