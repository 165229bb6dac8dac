#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Tests du schéma en temps et des tendances MHD
"""

import sys
import os
import math

import numpy as np
import pytest

# Ajouter le répertoire du projet au path pour importer les modules
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from constitutive import REFERENCE_COEFFICIENTS, CoefficientSet
from dynamics import (RK3_NODES, RK3_WEIGHTS, Progress, advance, advance_until, cfl_time_step,
                      check_step_invariants, lorentz_force, rhs, stable_dt, step, stress_tensor,
                      viscous_production_density)
from errors import NumericError, StepRejectedError, UsageError
from field_state import FieldState, Grid, constant_state, div_max, integrate, lp_norm
from initial_profiles import manufactured, resistive

TWO_PI = 2.0 * np.pi


def test_rk3_tableau():
    assert math.fsum(RK3_WEIGHTS) == pytest.approx(1.0)
    assert RK3_NODES == (0.0, 1.0, 0.5)


def test_constant_state_is_fixed_point():
    """Un état uniforme n'évolue pas"""
    grid = Grid((16, 16, 16), (TWO_PI,) * 3)
    state = constant_state(grid, rho=1.0, theta=1.0, u=(0.1, 0.0, 0.0), H=(0.5, 0.0, 0.0))
    tendencies = rhs(state, REFERENCE_COEFFICIENTS)
    for name in ("d_rho", "d_u", "d_theta", "d_H"):
        assert np.max(np.abs(getattr(tendencies, name))) < 1e-12, name
    dt = stable_dt(state, REFERENCE_COEFFICIENTS, 0.5)
    after = state
    for _ in range(5):
        after = step(after, REFERENCE_COEFFICIENTS, dt)
    assert np.allclose(after.rho, 1.0, atol=1e-12)
    assert np.allclose(after.H[0], 0.5, atol=1e-12)
    assert after.time == pytest.approx(5 * dt)


def test_step_window_exposes_stages():
    grid = Grid((32,), (TWO_PI,))
    state = manufactured(grid)
    window = advance(state, REFERENCE_COEFFICIENTS, 1e-3, run_id="essai")
    times = [stage.time for stage in window.stages]
    assert times == pytest.approx([0.0, 1e-3, 5e-4])
    assert window.before is state
    assert window.after.time == pytest.approx(1e-3)
    assert window.flooring_events == 0
    assert window.run_id == "essai"


def test_mass_is_conserved():
    grid = Grid((32,), (TWO_PI,))
    state = manufactured(grid)
    mass = integrate(state.rho, grid)
    after = advance_until(state, REFERENCE_COEFFICIENTS, 0.01, cfl=0.25)
    assert integrate(after.rho, grid) == pytest.approx(mass, rel=1e-12)


def test_resistive_decay_matches_exponential():
    """Énergie magnétique ∝ exp(−2 c6 k² t) avec u, ρ, θ gelés et ν constant"""
    coeffs = CoefficientSet(nu_family="constant")
    grid = Grid((32,), (TWO_PI,))
    state = resistive(grid, amplitude=1.0, mode=1)
    energy0 = 0.5 * lp_norm(state.H, 2, grid) ** 2
    progress = Progress()
    after = advance_until(state, coeffs, 1.0, cfl=0.5, frozen=("rho", "u", "theta"), progress=progress)
    energy = 0.5 * lp_norm(after.H, 2, grid) ** 2
    assert after.time == 1.0
    assert progress.steps > 0
    assert energy / energy0 == pytest.approx(math.exp(-2.0 * coeffs.c6), rel=1e-6)


def test_divergence_free_after_step():
    grid = Grid((16, 16), (TWO_PI, TWO_PI))
    x, y = grid.coordinates()
    ones = np.ones(grid.dims)
    state = FieldState(grid, 0.0, 1.0 + 0.1 * np.sin(x + y), 0.1 * np.stack([np.sin(y), np.cos(x), 0 * ones]),
                       ones, np.stack([0.3 * np.sin(y), 0.2 * np.sin(x), 0.1 * ones]))
    window = advance(state, REFERENCE_COEFFICIENTS, 1e-3)
    assert div_max(window.after.H, grid) < 1e-12
    report = check_step_invariants(window, REFERENCE_COEFFICIENTS)
    assert report['div_H_max'] < 1e-12


def test_viscous_stress_is_symmetric_and_dissipative():
    grid = Grid((32,), (TWO_PI,))
    state = manufactured(grid, amplitude=2.0)
    psi = stress_tensor(state, REFERENCE_COEFFICIENTS)
    assert np.allclose(psi, np.swapaxes(psi, 0, 1))
    production = viscous_production_density(state, REFERENCE_COEFFICIENTS)
    assert production.min() >= -1e-14 * np.abs(production).max()


def test_lorentz_force_of_transverse_field():
    """H = (0, sin x, 0): la force se réduit au gradient de pression magnétique"""
    grid = Grid((32,), (TWO_PI,))
    x = grid.coordinates()[0]
    H = np.stack([np.zeros_like(x), np.sin(x), np.zeros_like(x)])
    force = lorentz_force(H, grid)
    assert np.allclose(force[0], -np.sin(x) * np.cos(x), atol=1e-12)
    assert np.allclose(force[1:], 0.0, atol=1e-12)


def test_cfl_time_step():
    assert cfl_time_step(0.1, 1, 2.0, 0.0, 0.5) == pytest.approx(0.025)
    assert cfl_time_step(0.1, 2, 0.0, 1.0, 1.0) == pytest.approx(0.0025)
    with pytest.raises(UsageError):
        cfl_time_step(0.1, 1, 1.0, 1.0, 1.5)
    with pytest.raises(NumericError):
        cfl_time_step(0.1, 1, 0.0, 0.0, 0.5)


def test_explosive_step_rejected():
    """Un pas démesuré sur la diffusion magnétique est rejeté"""
    coeffs = CoefficientSet(nu_family="constant")
    grid = Grid((16,), (TWO_PI,))
    state = resistive(grid)
    with pytest.raises(StepRejectedError) as excinfo:
        advance(state, coeffs, 100.0, frozen=("rho", "u", "theta"))
    assert excinfo.value.term == "H"


def test_bad_arguments():
    grid = Grid((16,), (TWO_PI,))
    state = constant_state(grid)
    with pytest.raises(UsageError):
        rhs(state, REFERENCE_COEFFICIENTS, frozen=("pressure",))
    with pytest.raises(UsageError):
        advance(state, REFERENCE_COEFFICIENTS, 0.0)


def main():
    """Fonction principale de test"""
    print("🧪 Dynamique MHD - Tests")
    print("=" * 55)
    tests = [value for name, value in sorted(globals().items()) if name.startswith("test_")]
    results = {}
    for test in tests:
        try:
            test()
            results[test.__name__] = True
        except Exception as e:
            print(f"   ❌ {test.__name__}: {e}")
            results[test.__name__] = False

    print("\n" + "=" * 55)
    print("📋 RÉSUMÉ DES TESTS:")
    for name, ok in results.items():
        print(f"   {'✅' if ok else '❌'} {name}")
    return all(results.values())


if __name__ == "__main__":
    success = main()
    sys.exit(0 if success else 1)
