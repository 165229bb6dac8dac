#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Tests de la grille, de l'état discret et des opérateurs
"""

import sys
import os
import math

import numpy as np
import pytest

# Ajouter le répertoire du projet au path pour importer les modules
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from errors import UsageError
from field_state import (FieldState, Grid, apply_derivative, apply_floors, constant_state, div_max,
                         dyadic_shell_ratio, integrate, low_pass, lp_norm, project_div_free,
                         screened_poisson_norm, spectral_tail)

TWO_PI = 2.0 * np.pi


def test_grid_validation():
    """Tailles impaires, trop petites ou dimension 4 refusées"""
    for dims, lengths in (((7,), (1.0,)), ((2,), (1.0,)), ((8, 8, 8, 8), (1.0,) * 4), ((8,), (0.0,))):
        with pytest.raises(UsageError):
            Grid(dims, lengths)
    grid = Grid((8, 12), (1.0, 3.0))
    assert grid.d == 2
    assert grid.spacing == pytest.approx((0.125, 0.25))
    assert grid.volume == pytest.approx(3.0)
    assert grid.vector_shape == (3, 8, 12)


def test_state_is_read_only():
    grid = Grid((8,), (TWO_PI,))
    state = constant_state(grid, rho=2.0)
    with pytest.raises(ValueError):
        state.rho[0] = 1.0
    arrays = state.copy_arrays()
    arrays['rho'][0] = 5.0
    assert state.rho[0] == 2.0
    with pytest.raises(UsageError):
        FieldState(grid, 0.0, np.ones(4), np.zeros((3, 8)), np.ones(8), np.zeros((3, 8)))


def test_gradient_of_sine_both_schemes():
    grid = Grid((32,), (TWO_PI,))
    x = grid.coordinates()[0]
    grad = apply_derivative("gradient", np.sin(x), grid)
    assert np.allclose(grad[0], np.cos(x), atol=1e-12)
    assert np.allclose(grad[1:], 0.0)
    central = apply_derivative("gradient", np.sin(x), grid, scheme="central")
    h = grid.spacing[0]
    assert np.allclose(central[0], np.sin(h) / h * np.cos(x), atol=1e-12)


def test_laplacian_and_curl():
    grid = Grid((16, 16), (TWO_PI, TWO_PI))
    x, y = grid.coordinates()
    field = np.sin(x) * np.cos(2.0 * y)
    assert np.allclose(apply_derivative("laplacian", field, grid), -5.0 * field, atol=1e-11)
    H = np.stack([np.zeros(grid.dims), np.zeros(grid.dims), np.sin(x)])
    curl = apply_derivative("curl", H, grid)
    assert np.allclose(curl[1], -np.cos(x), atol=1e-12)
    with pytest.raises(UsageError):
        apply_derivative("hessian", field, grid)


def test_projection_removes_gradient_part():
    """Le gradient d'un potentiel est annulé, un champ solénoïdal conservé"""
    grid = Grid((16, 16, 16), (TWO_PI,) * 3)
    x, y, z = grid.coordinates()
    potential_gradient = np.stack([np.cos(x) * np.sin(y), np.sin(x) * np.cos(y), np.zeros(grid.dims)])
    solenoidal = np.stack([np.sin(y), np.sin(z), np.sin(x)])
    mean = np.stack([np.full(grid.dims, 0.3), np.zeros(grid.dims), np.zeros(grid.dims)])
    projected = project_div_free(potential_gradient + solenoidal + mean, grid)
    assert np.allclose(projected, solenoidal + mean, atol=1e-12)
    assert div_max(projected, grid) < 1e-12
    central = project_div_free(potential_gradient + solenoidal, grid, scheme="central")
    assert div_max(central, grid, scheme="central") < 1e-12


def _random_vector(grid: Grid, seed: int) -> np.ndarray:
    return np.random.default_rng(seed).uniform(-1.0, 1.0, grid.vector_shape)


def test_divergence_of_curl_vanishes_on_random_fields():
    grid = Grid((16, 8, 8), (TWO_PI, 3.0, 5.0))
    for scheme in ("spectral", "central"):
        for seed in (1, 2, 3):
            V = _random_vector(grid, seed)
            curl = apply_derivative("curl", V, grid, scheme)
            residual = apply_derivative("divergence", curl, grid, scheme)
            assert np.max(np.abs(residual)) <= 1e-12 * max(1.0, np.max(np.abs(curl))), scheme


def test_discrete_integration_by_parts():
    """∫ f div V = −∫ ∇f·V sur le tore, pour les deux schémas"""
    grid = Grid((16, 8, 8), (TWO_PI, 3.0, 5.0))
    rng = np.random.default_rng(11)
    for scheme in ("spectral", "central"):
        f = rng.uniform(-1.0, 1.0, grid.dims)
        V = rng.uniform(-1.0, 1.0, grid.vector_shape)
        left = integrate(f * apply_derivative("divergence", V, grid, scheme), grid)
        right = -integrate(np.sum(apply_derivative("gradient", f, grid, scheme) * V, axis=0), grid)
        scale = integrate(np.abs(f) * np.sum(np.abs(apply_derivative("gradient", f, grid, scheme)), axis=0), grid)
        assert left == pytest.approx(right, abs=1e-12 * max(1.0, scale)), scheme


def test_projection_idempotent_on_random_fields():
    """P(P V) = P V et div(P V) ≈ 0, en 1, 2 et 3 dimensions"""
    for grid in (Grid((32,), (TWO_PI,)), Grid((16, 8), (TWO_PI, 2.0)), Grid((8, 16, 8), (1.0, TWO_PI, 3.0))):
        for scheme in ("spectral", "central"):
            V = _random_vector(grid, 5)
            once = project_div_free(V, grid, scheme)
            twice = project_div_free(once, grid, scheme)
            assert np.allclose(twice, once, rtol=0.0, atol=1e-12), (grid.dims, scheme)
            scale = max(1.0, np.max(np.abs(apply_derivative("gradient", once[0], grid, scheme))))
            assert div_max(once, grid, scheme) <= 1e-12 * scale, (grid.dims, scheme)


def test_projection_of_sine_pair():
    """H = (sin x, sin x, 0) se projette sur (0, sin x, 0)"""
    for grid in (Grid((32,), (TWO_PI,)), Grid((16, 16, 16), (TWO_PI,) * 3)):
        x = grid.coordinates()[0]
        zero = np.zeros(grid.dims)
        H = np.stack([np.sin(x), np.sin(x), zero])
        for scheme in ("spectral", "central"):
            projected = project_div_free(H, grid, scheme)
            assert np.allclose(projected, np.stack([zero, np.sin(x), zero]), atol=1e-12), (grid.dims, scheme)


def test_norms():
    grid = Grid((64,), (TWO_PI,))
    x = grid.coordinates()[0]
    assert lp_norm(np.sin(x), 2, grid) == pytest.approx(math.sqrt(math.pi), rel=1e-12)
    assert lp_norm(np.sin(x), math.inf, grid) == pytest.approx(1.0)
    assert integrate(np.ones(grid.dims), grid) == pytest.approx(TWO_PI)
    assert screened_poisson_norm(np.sin(x), grid) == pytest.approx(math.sqrt(math.pi) / 2.0, rel=1e-12)
    assert screened_poisson_norm(np.sin(3 * x), grid) == pytest.approx(math.sqrt(math.pi) / 10.0, rel=1e-12)
    assert screened_poisson_norm(np.ones(grid.dims), grid) == pytest.approx(math.sqrt(TWO_PI), rel=1e-12)
    with pytest.raises(UsageError):
        lp_norm(np.sin(x), 0.5, grid)
    with pytest.raises(UsageError):
        lp_norm(np.sin(x), 2, grid, weight=-np.ones(grid.dims))


def test_floors_count_corrections():
    grid = Grid((8,), (1.0,))
    rho = np.ones(8)
    rho[2] = 0.0
    rho[5] = -1.0
    state = FieldState(grid, 0.0, rho, np.zeros((3, 8)), np.ones(8), np.zeros((3, 8)))
    floored, count = apply_floors(state, rho_floor=1e-3, theta_floor=1e-3)
    assert count == 2
    assert floored.rho.min() == pytest.approx(1e-3)
    unchanged, count = apply_floors(floored, rho_floor=1e-3, theta_floor=1e-3)
    assert count == 0 and unchanged is floored


def test_low_pass_band():
    """Pass-bande |k|ε <= 1/2, coupure |k|ε >= 1"""
    grid = Grid((64,), (TWO_PI,))
    x = grid.coordinates()[0]
    field = np.cos(x) + np.cos(2 * x) + np.cos(4 * x) + np.cos(8 * x)
    filtered = low_pass(field, grid, eps=0.25)
    assert np.allclose(filtered, np.cos(x) + np.cos(2 * x), atol=1e-12)
    assert np.allclose(low_pass(filtered, grid, eps=0.25), filtered, atol=1e-12)


def test_spectral_diagnostics():
    grid = Grid((64,), (TWO_PI,))
    x = grid.coordinates()[0]
    lacunary = sum(0.5 ** j * np.cos(2 ** j * x) for j in range(5))
    assert dyadic_shell_ratio(lacunary, grid) == pytest.approx(0.5, rel=1e-10)
    assert spectral_tail(np.sin(x), grid) == pytest.approx(0.0, abs=1e-20)
    assert spectral_tail(np.sin(20 * x), grid) == pytest.approx(1.0)


def main():
    """Fonction principale de test"""
    print("🧪 Grille et opérateurs - Tests")
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
