#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Tests des lois constitutives
Familles de coefficients, validateur d'hypothèses et exposants dérivés
"""

import sys
import os

import numpy as np
import pytest

# Ajouter le répertoire du projet au path pour importer les modules
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from constitutive import (MU_FAMILIES, PE_FAMILIES, REFERENCE_COEFFICIENTS, CoefficientSet, SampleSpec,
                          derived_exponents, eval_coefficients, lambda_of, mu_of, mu_prime_of,
                          pe_of, pe_potential_of, phi_of, validate_hypotheses)
from errors import ConfigError, DomainError, UsageError


def test_reference_set_passes():
    """Le jeu de référence passe toutes les hypothèses sur 10³ échantillons"""
    report = validate_hypotheses(REFERENCE_COEFFICIENTS, SampleSpec(n_samples=1000))
    assert report.all_passed, report.to_table()
    assert REFERENCE_COEFFICIENTS.invariant_violations() == []


def test_documented_perturbations_fail():
    """β = 0.5, m = 0.9, l = 5 et k = 8 échouent chacun avec un témoin"""
    cases = {
        'H32_low': CoefficientSet(beta=0.5),
        'H32_high': CoefficientSet(m=0.9),
        'H35_low': CoefficientSet(l=5.0),
        'H35_high': CoefficientSet(k=8.0),
    }
    for hypothesis_id, coeffs in cases.items():
        entry = validate_hypotheses(coeffs).entry(hypothesis_id)
        assert not entry.passed, hypothesis_id
        assert entry.worst_margin < 0
        assert entry.detail


def test_invalid_beta_cites_interval():
    with pytest.raises(ConfigError, match=r"\(2/3, 1\)"):
        CoefficientSet(beta=0.5).check()


def test_bounds_on_l_and_k():
    coeffs = REFERENCE_COEFFICIENTS
    assert coeffs.l_bound() == pytest.approx(5.4)
    assert coeffs.k_bound() == pytest.approx(7.306, abs=1e-3)


def test_lambda_relation_all_families():
    rho = np.logspace(-6, 6, 1000)
    for family in MU_FAMILIES:
        coeffs = CoefficientSet(mu_family=family)
        lam = lambda_of(rho, coeffs)
        expected = 2.0 * (rho * mu_prime_of(rho, coeffs) - mu_of(rho, coeffs))
        assert np.all(np.abs(lam - expected) <= 1e-12 * np.maximum(1.0, np.abs(expected)))


def test_reference_values_at_unit_state():
    values = eval_coefficients(1.0, 1.0, REFERENCE_COEFFICIENTS)
    assert float(values.kappa) == pytest.approx(4.0)
    assert float(values.nu) == pytest.approx(1.0)
    assert float(values.p) == pytest.approx(1.0 + 1.0 / 7.0 - 1.0 / 6.0)
    assert float(values.P_e) == pytest.approx(0.0, abs=1e-14)
    assert float(values.mu) == pytest.approx(1.107, abs=1e-3)
    assert float(values.phi) == pytest.approx(0.0, abs=1e-12)


def test_viscosity_blend_is_continuous():
    coeffs = REFERENCE_COEFFICIENTS
    for junction in (0.5, 2.0):
        left = np.array([junction * (1.0 - 1e-10)])
        right = np.array([junction * (1.0 + 1e-10)])
        assert mu_of(left, coeffs)[0] == pytest.approx(mu_of(right, coeffs)[0], rel=1e-8)
        assert mu_prime_of(left, coeffs)[0] == pytest.approx(mu_prime_of(right, coeffs)[0], rel=1e-8)
        assert phi_of(left, coeffs)[0] == pytest.approx(phi_of(right, coeffs)[0], rel=1e-8, abs=1e-8)
    assert float(mu_of(2.0, coeffs)) == pytest.approx(3.81965, rel=1e-4)


def test_phi_derivative_matches_mu_prime_over_rho():
    coeffs = REFERENCE_COEFFICIENTS
    rho = np.array([0.3, 0.9, 1.5, 3.0])
    h = 1e-6 * rho
    derivative = (phi_of(rho + h, coeffs) - phi_of(rho - h, coeffs)) / (2.0 * h)
    assert np.allclose(derivative, mu_prime_of(rho, coeffs) / rho, rtol=1e-6)


def test_cold_potential_derivative_all_families():
    """P_e' = p_e/ρ² jusqu'aux extrémités de la plage échantillonnée"""
    rho = np.array([1e-6, 1e-4, 0.5, 2.0, 1e4, 1e6])
    h = 1e-4 * rho
    for family in PE_FAMILIES:
        coeffs = CoefficientSet(pe_family=family)
        derivative = (pe_potential_of(rho + h, coeffs) - pe_potential_of(rho - h, coeffs)) / (2.0 * h)
        assert np.allclose(derivative, pe_of(rho, coeffs) / rho ** 2, rtol=1e-5, atol=0.0), family


def test_blended_cold_pressure_passes():
    """La famille raccordée passe la loi d'état sur 12 décades de densité"""
    coeffs = CoefficientSet(pe_family="blended")
    report = validate_hypotheses(coeffs, SampleSpec(n_samples=1000))
    assert report.all_passed, report.to_table()
    assert report.entry('H34').worst_margin > 0.5


def test_blended_potential_matches_closed_form_far_from_unity():
    """Loin de ρ = 1 la famille raccordée rejoint ses deux puissances"""
    coeffs = CoefficientSet(pe_family="blended")
    rho = np.array([1e-6, 1e6])
    potential = pe_potential_of(rho, coeffs)
    l, k = coeffs.l, coeffs.k
    assert potential[0] == pytest.approx(rho[0] ** (-l - 1.0) / (l * (l + 1.0)), rel=1e-6)
    assert potential[1] == pytest.approx(rho[1] ** (k - 1.0) / (k * (k - 1.0)), rel=1e-6)
    assert float(pe_potential_of(np.array([1.0]), coeffs)[0]) == 0.0


def test_domain_error_on_vacuum():
    with pytest.raises(DomainError):
        eval_coefficients(np.array([1.0, 0.0]), 1.0, REFERENCE_COEFFICIENTS)
    with pytest.raises(DomainError):
        eval_coefficients(1.0, -1.0, REFERENCE_COEFFICIENTS)


def test_empty_sample_range_rejected():
    with pytest.raises(UsageError):
        validate_hypotheses(REFERENCE_COEFFICIENTS, SampleSpec(rho_range=(1.0, 1.0)))


def test_resistivity_active_fraction_recorded():
    entry = validate_hypotheses(REFERENCE_COEFFICIENTS).entry('H36')
    assert entry.passed
    assert 0.0 < entry.active_fraction < 1.0
    assert entry.description == 'resistivity'


def test_constant_resistivity_fails_theta_over_rho_bound():
    """ν ≡ c6 respecte [c6, 1/c6] mais pas ν >= c5θ/ρ là où c6 < c5θ/ρ <= 1/c6"""
    coeffs = CoefficientSet(nu_family="constant", c6=0.5)
    entry = validate_hypotheses(coeffs).entry('H36')
    assert not entry.passed
    assert entry.worst_margin == pytest.approx(-0.75, abs=0.05)
    rho, theta = entry.worst_sample
    assert coeffs.c6 < coeffs.c5 * theta / rho <= (1.0 + 1e-9) / coeffs.c6
    assert "c5 θ/ρ" in entry.detail
    assert "par c6 violée" not in entry.detail
    assert "1/c6 violée" not in entry.detail


def test_report_carries_identifiers_and_descriptions():
    report = validate_hypotheses(REFERENCE_COEFFICIENTS)
    assert [e.id for e in report.entries] == ['H31', 'H32_low', 'H32_high', 'H33', 'H34',
                                              'H35_low', 'H35_high', 'H36']
    assert report.entry('viscosity_high') is report.entry('H32_high')
    frame = report.to_frame()
    assert list(frame['hypothesis']) == [e.id for e in report.entries]
    assert frame.loc[frame['hypothesis'] == 'H33', 'description'].item() == 'conductivity'
    assert 'H35_high' in report.to_table()


def test_viscosity_high_below_unity_exponent():
    """m < 1: la croissance haute densité échoue avec une marge négative"""
    entry = validate_hypotheses(CoefficientSet(m=0.9)).entry('H32_high')
    assert not entry.passed
    assert entry.worst_margin <= (0.9 - 1.0) / 0.9 + 1e-12
    assert "m > 1" in entry.detail
    assert entry.worst_sample[0] > 0 and entry.worst_sample[1] > 0


def test_derived_exponents_randomized_valid_sets():
    """Formes closes et inégalités de la table sur des jeux valides tirés au hasard"""
    rng = np.random.default_rng(20240611)
    for _ in range(200):
        beta = rng.uniform(2.0 / 3.0 + 1e-3, 1.0 - 1e-3)
        m = rng.uniform(1.05, 4.0)
        draft = CoefficientSet(beta=beta, m=m)
        l = draft.l_bound() + rng.uniform(0.05, 6.0)
        k = CoefficientSet(beta=beta, m=m, l=l).k_bound() * rng.uniform(0.5, 1.0)
        coeffs = CoefficientSet(beta=beta, m=m, l=l, k=k)
        assert coeffs.invariant_violations() == []
        table = derived_exponents(coeffs)
        assert table.j == pytest.approx((l + 1.0 - beta) / beta, rel=1e-12)
        assert table.q1 == pytest.approx(2.0 * (1.0 - beta / (l + 1.0)), rel=1e-12)
        assert 1.0 / table.q3 == pytest.approx(1.0 / (6.0 * table.j) + 0.5, rel=1e-12)
        assert table.q2 == pytest.approx(3.0 * table.q1, rel=1e-12)
        assert table.j1 == pytest.approx((l + 1.0 - beta) / (2.0 * l), rel=1e-12)
        assert 1.0 / table.s_exp == pytest.approx((5.0 * l + 3.0) / (6.0 * (l + 1.0 - beta)), rel=1e-12)
        assert 1.0 / table.r_exp == pytest.approx((17.0 * l + 15.0 - 12.0 * beta) / (18.0 * (l + 1.0 - beta)),
                                                  rel=1e-12)
        assert table.p_density == pytest.approx(6.0 * m - 3.0)
        assert table.delta_floor == 3.0
        assert 1.0 < table.q1 < 2.0
        assert table.q1 > 5.0 / 3.0
        assert table.q3 > 15.0 / 8.0
        assert table.s_exp > 1.0 and table.r_exp > 1.0


def test_derived_exponents():
    table = derived_exponents(REFERENCE_COEFFICIENTS)
    assert table.q1 == pytest.approx(1.7714, abs=1e-4)
    assert table.j == pytest.approx(7.75)
    assert table.q3 == pytest.approx(1.9175, abs=1e-4)
    assert table.q2 == pytest.approx(5.3143, abs=1e-4)
    assert table.p_density == pytest.approx(9.0)
    assert table.velocity_margin == pytest.approx(0.025, abs=1e-3)
    assert table.velocity_margin > 0
    assert table.magnetic_exponent(2.0) == pytest.approx(6.0)
    with pytest.raises(UsageError):
        table.theta_exponent(3.0, 1.0)


def main():
    """Fonction principale de test"""
    print("🧪 Lois constitutives - Tests")
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
