import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

import oracles
from squidres.constants import PHI0
from squidres.errors import DomainError, NoHysteresisError
from squidres.squid import (SquidParams, all_flux_branches, beta_from_critical_flux,
                            critical_applied_flux, flux_residual, fold_flux, josephson_inductance,
                            jump_fluxes, load_inductance, screening_parameter, solve_total_flux,
                            stable_interval, stable_roots_newton, sweep_flux)

betas = st.floats(0.01, 5.0)
fluxes = st.floats(-1.0, 2.0)


def test_screening_parameter_and_josephson_inductance():
    assert screening_parameter(1.55e-12, 320e-6) == pytest.approx(1.507, abs=1e-3)
    assert josephson_inductance(320e-6) == pytest.approx(PHI0 / (2 * math.pi * 320e-6))
    sq = SquidParams.from_beta(1.51)
    assert sq.beta_l == pytest.approx(1.51, rel=1e-14)
    assert sq.arm_split == pytest.approx(0.5)


@pytest.mark.parametrize("kw", [dict(arm_split=0.0), dict(arm_split=1.0),
                                dict(critical_current=-1.0)])
def test_params_validation(kw):
    args = dict(loop_inductance=1.55e-12, critical_current=320e-6)
    args.update(kw)
    with pytest.raises(DomainError):
        SquidParams.from_loop(**args)
    with pytest.raises(DomainError):
        SquidParams(1e-12, 0.4e-12, 0.4e-12, 1e-4, 1e-12)  # arms do not sum to the loop


@given(betas, fluxes)
def test_grid_roots_match_bisection_oracle(beta, pe):
    got = [s.total_flux for s in all_flux_branches(SquidParams.from_beta(beta), pe)]
    ref, _ = oracles.flux_roots_bisection(beta, pe)
    assume(len(ref) == len(got))  # a near-tangent pair can hide below the oracle's grid
    np.testing.assert_allclose(got, ref, atol=1e-10)


@given(betas, fluxes)
def test_root_counts_and_bounds(beta, pe):
    roots = all_flux_branches(SquidParams.from_beta(beta), pe)
    n = len(roots)
    # total count is odd; stable roots are the (n + 1) / 2 that alternate with unstable ones
    assert n % 2 == 1
    assert sum(s.stable for s in roots) == (n + 1) // 2
    assert [s.stable for s in roots][::2] == [True] * ((n + 1) // 2)
    for s in roots:
        assert abs(s.total_flux - pe) <= beta / (2 * math.pi) + 1e-12
        assert abs(flux_residual(beta, pe, s.total_flux)) < 1e-12


@given(betas, fluxes)
def test_newton_and_grid_agree_on_stable_roots(beta, pe):
    sq = SquidParams.from_beta(beta)
    grid = [s.total_flux for s in all_flux_branches(sq, pe) if s.stable]
    newton = [s.total_flux for s in stable_roots_newton(sq, pe)]
    np.testing.assert_allclose(newton, grid, atol=1e-10)


def test_single_root_below_unit_beta():
    sq = SquidParams.from_beta(0.7)
    for pe in np.linspace(-1, 2, 31):
        s = solve_total_flux(sq, pe)
        assert s.stable and len(all_flux_branches(sq, pe)) == 1


def test_window_validation():
    with pytest.raises(DomainError):
        all_flux_branches(SquidParams.from_beta(2.0), 0.3, window=(0.0, 0.5))


def test_fold_and_critical_flux():
    with pytest.raises(NoHysteresisError):
        fold_flux(1.0)
    pc = fold_flux(1.51)
    assert 1 + 1.51 * math.cos(2 * math.pi * pc) == pytest.approx(0.0, abs=1e-14)
    lo, hi = stable_interval(1.51, 0.02)
    assert (lo, hi) == pytest.approx((-pc, pc))
    assert critical_applied_flux(1.51) == pytest.approx(0.5453, abs=1e-4)


@given(st.floats(1.001, 20.0))
def test_critical_flux_inverse(beta):
    cf = critical_applied_flux(beta)
    assert cf > 0.5
    assert beta_from_critical_flux(cf) == pytest.approx(beta, rel=1e-9)


def test_beta_from_critical_flux_domain():
    with pytest.raises(DomainError):
        beta_from_critical_flux(0.45)


@given(st.floats(0.05, 0.95), st.floats(0.1, 5.0), st.floats(-2.0, 2.0))
def test_load_inductance_matches_network_reduction(split, beta, phi):
    sq = SquidParams.from_beta(beta, arm_split=split)
    ref = oracles.load_inductance_network(sq.junction_arm_inductance, sq.shunt_arm_inductance,
                                          sq.junction_inductance_zero, phi)
    got = load_inductance(sq, phi)
    assert got == pytest.approx(ref, rel=1e-12)
    l1, l2, lj = sq.junction_arm_inductance, sq.shunt_arm_inductance, sq.junction_inductance_zero
    floor = (l1 + lj) * l2 / (l1 + lj + l2)
    assert floor * (1 - 1e-12) <= got <= l2 * (1 + 1e-12)
    # even and one-periodic in the loop flux
    assert load_inductance(sq, -phi) == pytest.approx(got, rel=1e-12)
    assert load_inductance(sq, phi + 1) == pytest.approx(got, rel=1e-9)


def test_load_inductance_vectorised_and_half_flux():
    sq = SquidParams.from_beta(1.51)
    phi = np.linspace(0, 1, 11)
    np.testing.assert_allclose(load_inductance(sq, phi), [load_inductance(sq, p) for p in phi])
    assert load_inductance(sq, 0.5) == pytest.approx(sq.shunt_arm_inductance)


def test_sweep_reference_jump_and_flags():
    states = sweep_flux(SquidParams.from_beta(1.51), np.linspace(0, 1, 2001))
    assert jump_fluxes(states) == pytest.approx([0.5455])
    assert all(s.stable for s in states)
    tot = np.array([s.total_flux for s in states])
    assert np.all(np.diff(tot) > 0)  # the loop flux only advances on an upward ramp


def test_sweep_without_hysteresis_has_no_jumps():
    states = sweep_flux(SquidParams.from_beta(0.5), np.linspace(0, 2, 801))
    assert jump_fluxes(states) == []


def test_sweep_continues_from_initial_state():
    sq = SquidParams.from_beta(2.0)
    up = sweep_flux(sq, np.linspace(0, 0.5, 101))
    more = sweep_flux(sq, np.linspace(0.5, 0.3, 41), initial_state=up[-1])
    # hysteresis: coming back down stays on the original branch
    assert more[-1].branch_index == 0 and not any(s.jumped for s in more)
    assert sweep_flux(sq, []) == []
