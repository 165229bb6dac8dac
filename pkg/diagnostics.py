"""
Diagnostics d'énergie, d'entropie et d'estimations a priori
==========================================================

Pour chaque état on calcule:
- les énergies cinétique, magnétique, interne et totale
- la fonctionnelle BD ∫ρ|u + 2∇φ(ρ)|²/2 + |H|²/2
- l'entropie ∫ρs et ses trois productions (visqueuse, ohmique, Fourier)
- les résidus discrets des bilans, évalués avec la quadrature RK3 du pas
- la batterie de normes a priori et les moniteurs d'inégalités

Les intégrales utilisent toutes la sommation compensée de field_state.
"""

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from constitutive import (CoefficientSet, kappa_of, lambda_of, mu_of, mu_prime_of, nu_of,
                          pe_potential_of, phi_of, pressure_of)
from dynamics import (RK3_WEIGHTS, StepWindow, advance, electric_field_of, skew_part,
                      stable_dt, strain_rate, stress_tensor)
from errors import UsageError
from field_state import (FieldState, get_operators, integrate, lp_norm, spectral_tail)

logger = logging.getLogger(__name__)

# Constantes des moniteurs: ε = 1/2, constantes existentielles fixées à 1
MONITOR_CONSTANTS = {
    'epsilon': 0.5,
    'c_epsilon': 1.0,
    'concave_exponent': 0.5,
}

DEFAULT_ALPHA_FRACTIONS = (0.25, 0.5)
DEFAULT_TAIL_TOLERANCE = 1e-8


class StateTerms:
    """
    Quantités dérivées d'un état, calculées à la demande et mises en cache

    Args:
        state (FieldState): État plancherisé
        coeffs (CoefficientSet): Coefficients
        scheme (str): Schéma de dérivation
    """

    def __init__(self, state: FieldState, coeffs: CoefficientSet, scheme: str = "spectral"):
        self.state = state
        self.coeffs = coeffs
        self.scheme = scheme
        self.grid = state.grid
        self.ops = get_operators(state.grid, scheme)

    def integral(self, values: np.ndarray) -> float:
        return integrate(values, self.grid)

    @cached_property
    def grad_u(self) -> np.ndarray:
        return self.ops.vector_gradient(self.state.u)

    @cached_property
    def div_u(self) -> np.ndarray:
        return np.trace(self.grad_u, axis1=0, axis2=1)

    @cached_property
    def strain(self) -> np.ndarray:
        return strain_rate(self.grad_u)

    @cached_property
    def skew(self) -> np.ndarray:
        return skew_part(self.grad_u)

    @cached_property
    def psi(self) -> np.ndarray:
        return stress_tensor(self.state, self.coeffs, self.scheme, grad_u=self.grad_u)

    @cached_property
    def viscous_density(self) -> np.ndarray:
        return np.einsum("ij...,ij...->...", self.psi, self.grad_u)

    @cached_property
    def current(self) -> np.ndarray:
        return self.ops.curl(self.state.H)

    @cached_property
    def current_sq(self) -> np.ndarray:
        return np.sum(self.current ** 2, axis=0)

    @cached_property
    def grad_rho(self) -> np.ndarray:
        return self.ops.gradient(self.state.rho)

    @cached_property
    def grad_theta(self) -> np.ndarray:
        return self.ops.gradient(self.state.theta)

    @cached_property
    def grad_theta_sq(self) -> np.ndarray:
        return np.sum(self.grad_theta ** 2, axis=0)

    @cached_property
    def mu(self) -> np.ndarray:
        return mu_of(self.state.rho, self.coeffs)

    @cached_property
    def mu_prime(self) -> np.ndarray:
        return mu_prime_of(self.state.rho, self.coeffs)

    @cached_property
    def lam(self) -> np.ndarray:
        return lambda_of(self.state.rho, self.coeffs)

    @cached_property
    def grad_mu(self) -> np.ndarray:
        """∇μ(ρ) = μ'(ρ)∇ρ"""
        return self.mu_prime * self.grad_rho

    @cached_property
    def grad_phi(self) -> np.ndarray:
        """∇φ(ρ) = μ'(ρ)∇ρ/ρ"""
        return self.grad_mu / self.state.rho

    @cached_property
    def nu(self) -> np.ndarray:
        return nu_of(self.state.rho, self.state.theta, self.coeffs)

    @cached_property
    def kappa(self) -> np.ndarray:
        return kappa_of(self.state.rho, self.state.theta, self.coeffs)

    @cached_property
    def pressure(self) -> np.ndarray:
        return pressure_of(self.state.rho, self.state.theta, self.coeffs)

    @cached_property
    def grad_p(self) -> np.ndarray:
        return self.ops.gradient(self.pressure)

    @cached_property
    def P_e(self) -> np.ndarray:
        return pe_potential_of(self.state.rho, self.coeffs)

    @cached_property
    def lorentz(self) -> np.ndarray:
        return np.cross(self.current, self.state.H, axis=0)

    @cached_property
    def entropy_density(self) -> np.ndarray:
        """s = c_υ ln θ − ln ρ"""
        return self.coeffs.c_upsilon * np.log(self.state.theta) - np.log(self.state.rho)

    # -- fonctionnelles ------------------------------------------------------
    def kinetic(self) -> float:
        return self.integral(0.5 * self.state.rho * np.sum(self.state.u ** 2, axis=0))

    def magnetic(self) -> float:
        return self.integral(0.5 * np.sum(self.state.H ** 2, axis=0))

    def internal(self) -> float:
        return self.integral(self.state.rho * (self.coeffs.c_upsilon * self.state.theta + self.P_e))

    def bd_functional(self) -> float:
        shifted = self.state.u + 2.0 * self.grad_phi
        return self.integral(0.5 * self.state.rho * np.sum(shifted ** 2, axis=0)
                             + 0.5 * np.sum(self.state.H ** 2, axis=0))

    def entropy_total(self) -> float:
        return self.integral(self.state.rho * self.entropy_density)

    def rho_log_rho(self) -> float:
        return self.integral(self.state.rho * np.log(self.state.rho))

    def productions(self) -> Dict[str, float]:
        theta = self.state.theta
        return {
            'production_visc': self.integral(self.viscous_density / theta),
            'production_ohmic': self.integral(self.nu * self.current_sq / theta),
            'production_fourier': self.integral(self.kappa * self.grad_theta_sq / theta ** 2),
        }

    # -- taux instantanés (seconds membres des bilans) -------------------------
    def energy_rate(self) -> float:
        """−∫2μD:D − ∫λ(div u)² − ∫ν|∇×H|² + ∫p div u"""
        dissipation = (2.0 * self.mu * np.einsum("ij...,ij...->...", self.strain, self.strain)
                       + self.lam * self.div_u ** 2 + self.nu * self.current_sq)
        return self.integral(self.pressure * self.div_u - dissipation)

    def bd_rate(self) -> float:
        """−∫2μA:A − ∫ν|∇×H|² + ∫p div u − 2∫∇p·∇φ + 2∫(∇×H)×H·∇μ/ρ"""
        integrand = (-2.0 * self.mu * np.einsum("ij...,ij...->...", self.skew, self.skew)
                     - self.nu * self.current_sq
                     + self.pressure * self.div_u
                     - 2.0 * np.sum(self.grad_p * self.grad_phi, axis=0)
                     + 2.0 * np.sum(self.lorentz * self.grad_mu, axis=0) / self.state.rho)
        return self.integral(integrand)

    def rho_log_rho_rate(self) -> float:
        return -self.integral(self.state.rho * self.div_u)

    def entropy_rate(self) -> float:
        return sum(self.productions().values())


def _terms(state: FieldState, coeffs: CoefficientSet, scheme: str) -> StateTerms:
    return StateTerms(state, coeffs, scheme)


def energy_report(state: FieldState, coeffs: CoefficientSet, scheme: str = "spectral") -> Dict[str, float]:
    """
    Énergies du système

    Returns:
        Dict: {'E', 'kinetic', 'magnetic', 'internal'}
    """
    terms = _terms(state, coeffs, scheme)
    kinetic, magnetic, internal = terms.kinetic(), terms.magnetic(), terms.internal()
    return {'E': kinetic + magnetic + internal, 'kinetic': kinetic,
            'magnetic': magnetic, 'internal': internal}


def _check_window(window: StepWindow):
    before, after = window.before, window.after
    if before.grid != after.grid or any(stage.grid != before.grid for stage in window.stages):
        raise UsageError("fenêtre incohérente: grilles différentes")
    if window.stages[0] is not before and window.stages[0].time != before.time:
        raise UsageError("fenêtre incohérente: la première étape n'est pas l'état initial")
    if not math.isclose(after.time, before.time + window.dt, rel_tol=1e-12, abs_tol=1e-14):
        raise UsageError(f"fenêtre incohérente: {before.time} + {window.dt} != {after.time}")


def _rk_quadrature(window: StepWindow, coeffs: CoefficientSet, scheme: str, rate_name: str) -> float:
    return math.fsum(weight * getattr(_terms(stage, coeffs, scheme), rate_name)()
                     for weight, stage in zip(RK3_WEIGHTS, window.stages))


def _difference_quotient(window: StepWindow, coeffs: CoefficientSet, scheme: str, functional: str) -> float:
    before = getattr(_terms(window.before, coeffs, scheme), functional)()
    after = getattr(_terms(window.after, coeffs, scheme), functional)()
    return (after - before) / window.dt


def entropy_report(state: FieldState, coeffs: CoefficientSet, window: Optional[StepWindow] = None,
                   scheme: str = "spectral") -> Dict[str, float]:
    """
    Entropie totale, productions et résidu du bilan d'entropie

    Le résidu vaut NaN sans fenêtre de pas.
    """
    terms = _terms(state, coeffs, scheme)
    report = {'entropy_total': terms.entropy_total(), **terms.productions()}
    report['balance_residual_29'] = math.nan
    if window is not None:
        _check_window(window)
        report['balance_residual_29'] = (_difference_quotient(window, coeffs, scheme, "entropy_total")
                                 - _rk_quadrature(window, coeffs, scheme, "entropy_rate"))
    return report


def _total_energy(terms: StateTerms) -> float:
    return terms.kinetic() + terms.magnetic() + terms.internal()


def balance_residuals(window: StepWindow, coeffs: CoefficientSet, scheme: str = "spectral",
                      run_ids: Optional[Tuple[str, str]] = None) -> Dict[str, float]:
    """
    Résidus discrets des bilans sur un pas

    res = ΔF/Δt − Σ b_i R(y_i), avec les poids RK3 aux états d'étape.

    Args:
        window (StepWindow): Pas accepté
        coeffs (CoefficientSet): Coefficients
        scheme (str): Schéma de dérivation
        run_ids (tuple): Identifiants de run des deux enregistrements encadrants

    Returns:
        Dict: res22, res23, res13, res_rho_log_rho, balance_residual_29

    Raises:
        UsageError: fenêtre incohérente ou identifiants de run différents
    """
    _check_window(window)
    if run_ids is not None and (run_ids[0] != run_ids[1] or (window.run_id and window.run_id != run_ids[0])):
        raise UsageError(f"enregistrements de runs différents: {run_ids}")

    def energy_functional(terms):
        return terms.kinetic() + terms.magnetic()

    before = _terms(window.before, coeffs, scheme)
    after = _terms(window.after, coeffs, scheme)
    dt = window.dt
    return {
        'res22': ((energy_functional(after) - energy_functional(before)) / dt
                       - _rk_quadrature(window, coeffs, scheme, "energy_rate")),
        'res23': ((after.bd_functional() - before.bd_functional()) / dt
                   - _rk_quadrature(window, coeffs, scheme, "bd_rate")),
        'res13': (_total_energy(after) - _total_energy(before)) / dt,
        'res_rho_log_rho': ((after.rho_log_rho() - before.rho_log_rho()) / dt
                            - _rk_quadrature(window, coeffs, scheme, "rho_log_rho_rate")),
        'balance_residual_29': ((after.entropy_total() - before.entropy_total()) / dt
                        - _rk_quadrature(window, coeffs, scheme, "entropy_rate")),
    }


# ---------------------------------------------------------------------------
# Normes a priori
# ---------------------------------------------------------------------------

APRIORI_NAMES = (
    'sqrt_rho_u',
    'grad_mu_over_sqrt_rho',
    'weighted_grad_u',
    'weighted_grad_u_over_sqrt_theta',
    'bd_pressure',
    'rho_theta_L1',
    'rho_Pe_L1',
    'H_L2',
    'sqrt_nu_curl_H',
    'grad_log_theta',
    'theta_grad_rho',
    'low_density_gradient',
    'thermal_gain',
)


def alpha_name(fraction: float) -> str:
    return f"grad_theta_pow_{fraction:g}a"


def apriori_names(alpha_fractions: Sequence[float] = DEFAULT_ALPHA_FRACTIONS) -> List[str]:
    return list(APRIORI_NAMES) + [alpha_name(f) for f in alpha_fractions]


def apriori_norms(state: FieldState, coeffs: CoefficientSet,
                  alpha_fractions: Sequence[float] = DEFAULT_ALPHA_FRACTIONS,
                  scheme: str = "spectral") -> Dict[str, float]:
    """
    Normes instantanées de la batterie d'estimations a priori

    Args:
        alpha_fractions: α exprimés en fraction de a, chacun dans ]0, 1/2]
            (le cas α → 0 est la norme séparée de ∇ln θ)

    Returns:
        Dict[str, float]: Normes nommées, dans l'ordre de apriori_names()
    """
    for fraction in alpha_fractions:
        if not 0 < fraction <= 0.5:
            raise UsageError(f"alpha = {fraction}·a hors de ]0, a/2]")
    t = _terms(state, coeffs, scheme)
    grid = state.grid
    rho, theta, c = state.rho, state.theta, coeffs
    grad_u_norm = np.sqrt(np.sum(t.grad_u ** 2, axis=(0, 1)))
    weight_u = rho ** (c.m / 2.0) + rho ** (c.beta / 2.0)
    gamma = (c.l + 1.0 - c.beta) / 2.0
    low = (rho < c.A1).astype(float)
    grad_low = -gamma * rho ** (-gamma - 1.0) * t.grad_rho
    gain = (c.a + 1.0 - MONITOR_CONSTANTS['concave_exponent']) / 2.0
    grad_gain = gain * (1.0 + theta) ** (gain - 1.0) * t.grad_theta

    norms = {
        'sqrt_rho_u': lp_norm(np.sqrt(rho) * state.u, 2, grid),
        'grad_mu_over_sqrt_rho': lp_norm(t.grad_mu / np.sqrt(rho), 2, grid),
        'weighted_grad_u': lp_norm(weight_u * grad_u_norm, 2, grid),
        'weighted_grad_u_over_sqrt_theta': lp_norm(weight_u * grad_u_norm / np.sqrt(theta), 2, grid),
        'bd_pressure': lp_norm(np.sqrt(rho * theta / t.mu_prime) * t.grad_phi, 2, grid),
        'rho_theta_L1': lp_norm(rho * theta, 1, grid),
        'rho_Pe_L1': lp_norm(rho * t.P_e, 1, grid),
        'H_L2': lp_norm(state.H, 2, grid),
        'sqrt_nu_curl_H': lp_norm(np.sqrt(t.nu) * t.current, 2, grid),
        'grad_log_theta': lp_norm((np.sqrt(rho) + 1.0) * t.grad_theta / theta, 2, grid),
        'theta_grad_rho': lp_norm(np.sqrt(theta) * (rho ** ((c.beta - 1.0) / 2.0) + rho ** ((c.m - 1.0) / 2.0))
                                  * t.grad_rho / rho, 2, grid),
        'low_density_gradient': lp_norm(grad_low, 2, grid, weight=low),
        'thermal_gain': lp_norm(np.sqrt(1.0 + rho) * grad_gain, 2, grid),
    }
    for fraction in alpha_fractions:
        alpha = fraction * c.a
        grad_pow = alpha * theta ** (alpha - 1.0) * t.grad_theta
        norms[alpha_name(fraction)] = lp_norm(np.sqrt(1.0 + rho) * grad_pow, 2, grid)
    return norms


# ---------------------------------------------------------------------------
# Moniteurs d'inégalités
# ---------------------------------------------------------------------------

@dataclass
class MonitorEntry:
    """Les deux membres d'une inégalité lhs <= rhs, et leur écart"""

    lhs: float
    rhs: float
    ratio: Optional[float] = None

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs

    @property
    def holds(self) -> bool:
        return self.slack >= 0.0

    def ratio_text(self) -> str:
        return "indéfini (gradient nul)" if self.ratio is None else f"{self.ratio:.6e}"


MONITOR_NAMES = (
    'sobolev_high',
    'sobolev_low',
    'pressure_work',
    'pressure_gradient',
    'lorentz_control',
    'entropy_bound',
    'concave_thermal',
)

RATIO_MONITORS = ('sobolev_high', 'sobolev_low')


def inequality_monitors(state: FieldState, coeffs: CoefficientSet, window: Optional[StepWindow] = None,
                        scheme: str = "spectral") -> Dict[str, MonitorEntry]:
    """
    Évalue les deux membres de chaque inégalité suivie

    Les termes en d/dt utilisent le quotient différentiel de la fenêtre
    (nul sans fenêtre). Les constantes existentielles valent 1 et ε = 1/2.
    """
    if window is not None:
        _check_window(window)
    t = _terms(state, coeffs, scheme)
    grid = state.grid
    rho, theta, c = state.rho, state.theta, coeffs
    eps = MONITOR_CONSTANTS['epsilon']
    c_eps = MONITOR_CONSTANTS['c_epsilon']
    monitors: Dict[str, MonitorEntry] = {}

    def rate(functional) -> float:
        if window is None:
            return 0.0
        return (functional(window.after) - functional(window.before)) / window.dt

    grad_mu_term = lp_norm(t.grad_mu / np.sqrt(rho), 2, grid)
    denominator = grad_mu_term + lp_norm(t.mu / np.sqrt(rho), 2, grid)
    for name, exponent, mask in (('sobolev_high', c.m - 0.5, rho > 2.0 * c.A),
                                 ('sobolev_low', c.beta - 0.5, rho < 0.5 * c.A)):
        lhs = lp_norm(rho ** exponent, 6, grid, weight=mask.astype(float))
        ratio = lhs / denominator if denominator > 0 else None
        monitors[name] = MonitorEntry(lhs, denominator, ratio)

    combo = 3.0 * t.lam + 2.0 * t.mu
    potential = lambda s: integrate(s.rho * pe_potential_of(s.rho, c), grid)
    monitors['pressure_work'] = MonitorEntry(
        lhs=t.integral(t.pressure * t.div_u),
        rhs=(-rate(potential)
             + eps * t.integral(combo * t.div_u ** 2)
             + c_eps * (lp_norm(rho * theta, 1, grid) ** 2 + lp_norm(theta, 6, grid) ** 2
                        + lp_norm(theta, 3, grid) ** 2 * grad_mu_term ** 2)))

    gamma = (c.l + 1.0 - c.beta) / 2.0
    low = rho < c.A1
    grad_low_sq = (gamma * rho ** (-gamma - 1.0)) ** 2 * np.sum(t.grad_rho ** 2, axis=0)
    phi_prime = t.mu_prime / rho
    monitors['pressure_gradient'] = MonitorEntry(
        lhs=-t.integral(np.sum(t.grad_p * t.grad_phi, axis=0)),
        rhs=(-t.integral(phi_prime * theta * np.sum(t.grad_rho ** 2, axis=0))
             + t.integral(c_eps * t.kappa * t.grad_theta_sq / theta ** 2
                          + eps * np.sum(t.grad_mu ** 2, axis=0) / rho)
             - (c.c3 * c.c0 / gamma ** 2) * t.integral(np.where(low, grad_low_sq, 0.0))))

    monitors['lorentz_control'] = MonitorEntry(
        lhs=abs(t.integral(np.sum(t.lorentz * t.grad_mu, axis=0) / rho)),
        rhs=t.integral(t.nu * t.current_sq / theta + np.sum(t.grad_mu ** 2, axis=0) / rho))

    monitors['entropy_bound'] = MonitorEntry(
        lhs=t.entropy_total(),
        rhs=t.integral(c.c_upsilon * rho * theta) - t.rho_log_rho())

    exponent = MONITOR_CONSTANTS['concave_exponent']
    f_prime = theta ** (-exponent)
    f_second = -exponent * theta ** (-exponent - 1.0)
    concave = lambda s: integrate(c.c_upsilon * s.rho * s.theta ** (1.0 - exponent) / (1.0 - exponent), grid)
    monitors['concave_thermal'] = MonitorEntry(
        lhs=t.integral(f_prime * (t.viscous_density + t.nu * t.current_sq) - t.kappa * f_second * t.grad_theta_sq),
        rhs=rate(concave) + t.integral(rho * theta * f_prime * np.abs(t.div_u)))
    return monitors


# ---------------------------------------------------------------------------
# Champ électrique
# ---------------------------------------------------------------------------

def electric_field(state: FieldState, coeffs: CoefficientSet, scheme: str = "spectral") -> Dict:
    """
    Champ électrique E = ν∇×H − u×H et cohérence avec l'induction

    Returns:
        Dict: {'E_field': champ (3, *dims), 'induction_consistency': ‖d_H + ∇×E‖₂ / max(1, ‖d_H‖₂)}
    """
    ops = get_operators(state.grid, scheme)
    nu = nu_of(state.rho, state.theta, coeffs)
    d_H = ops.curl(np.cross(state.u, state.H, axis=0)) - ops.curl(nu * ops.curl(state.H))
    e_field = electric_field_of(state, coeffs, scheme)
    mismatch = lp_norm(d_H + ops.curl(e_field), 2, state.grid)
    return {'E_field': e_field,
            'induction_consistency': mismatch / max(1.0, lp_norm(d_H, 2, state.grid))}


# ---------------------------------------------------------------------------
# Enregistrement
# ---------------------------------------------------------------------------

# (champ, étiquette d'équation) dans l'ordre des colonnes CSV; sans étiquette,
# le nom du champ porte déjà la sienne
SCALAR_COLUMNS = (
    ('time', 'clock'),
    ('dt_step', 'clock'),
    ('total_energy', 'eq13'),
    ('kinetic', 'eq22'),
    ('magnetic', 'eq22'),
    ('internal', 'eq13'),
    ('bd_functional', 'eq23'),
    ('entropy_total', 'eq29'),
    ('production_visc', 'eq210'),
    ('production_ohmic', 'eq210'),
    ('production_fourier', 'eq210'),
    ('rho_log_rho', 'eq211'),
    ('mass', 'eq1a'),
    ('res22', None),
    ('res23', None),
    ('res13', None),
    ('res_rho_log_rho', None),
    ('balance_residual_29', None),
    ('div_H_max', 'eq1d'),
    ('induction_consistency', 'eq1d'),
    ('flooring_count', 'floors'),
    ('spectral_tail', 'resolution'),
    ('trusted', 'resolution'),
)

APRIORI_TAG = 'eq215'

MONITOR_TAGS = {
    'sobolev_high': 'lemma33',
    'sobolev_low': 'lemma33',
    'pressure_work': 'lemma34',
    'pressure_gradient': 'lemma35',
    'lorentz_control': 'lemma36',
    'entropy_bound': 'eq210',
    'concave_thermal': 'lemma43',
}


def column_name(name: str, tag: Optional[str]) -> str:
    """Nom de colonne CSV: champ suivi de son étiquette d'équation"""
    return name if tag is None else f"{name}_{tag}"


def csv_columns(alpha_fractions: Sequence[float] = DEFAULT_ALPHA_FRACTIONS) -> List[str]:
    """Ordre documenté et figé des colonnes du CSV de séries temporelles"""
    columns = [column_name(name, tag) for name, tag in SCALAR_COLUMNS]
    columns += [column_name(name, APRIORI_TAG) for name in apriori_names(alpha_fractions)]
    for name in MONITOR_NAMES:
        sides = ('lhs', 'rhs', 'slack') + (('ratio',) if name in RATIO_MONITORS else ())
        columns += [column_name(f"{name}_{side}", MONITOR_TAGS[name]) for side in sides]
    return columns


CSV_COLUMNS = tuple(csv_columns())


@dataclass
class DiagnosticRecord:
    """Valeurs de toutes les fonctionnelles à un instant de sortie"""

    time: float
    dt_step: float
    total_energy: float
    kinetic: float
    magnetic: float
    internal: float
    bd_functional: float
    entropy_total: float
    production_visc: float
    production_ohmic: float
    production_fourier: float
    rho_log_rho: float
    mass: float
    res22: float
    res23: float
    res13: float
    res_rho_log_rho: float
    balance_residual_29: float
    div_H_max: float
    induction_consistency: float
    flooring_count: int
    spectral_tail: float
    trusted: bool
    apriori: Dict[str, float] = field(default_factory=dict)
    monitors: Dict[str, MonitorEntry] = field(default_factory=dict)
    alpha_fractions: Tuple[float, ...] = DEFAULT_ALPHA_FRACTIONS

    def to_row(self) -> Dict[str, float]:
        row = {}
        for name, tag in SCALAR_COLUMNS:
            value = getattr(self, name)
            row[column_name(name, tag)] = int(value) if isinstance(value, (bool, np.bool_)) else value
        for name in apriori_names(self.alpha_fractions):
            row[column_name(name, APRIORI_TAG)] = self.apriori[name]
        for name in MONITOR_NAMES:
            entry = self.monitors[name]
            tag = MONITOR_TAGS[name]
            row[column_name(f"{name}_lhs", tag)] = entry.lhs
            row[column_name(f"{name}_rhs", tag)] = entry.rhs
            row[column_name(f"{name}_slack", tag)] = entry.slack
            if name in RATIO_MONITORS:
                row[column_name(f"{name}_ratio", tag)] = math.nan if entry.ratio is None else entry.ratio
        return row

    def residuals(self) -> Dict[str, float]:
        return {name: getattr(self, name) for name in
                ('res22', 'res23', 'res13', 'res_rho_log_rho', 'balance_residual_29')}


def diagnose_window(window: StepWindow, coeffs: CoefficientSet, scheme: str = "spectral",
                    alpha_fractions: Sequence[float] = DEFAULT_ALPHA_FRACTIONS,
                    tail_tolerance: float = DEFAULT_TAIL_TOLERANCE) -> DiagnosticRecord:
    """Enregistrement complet de l'état initial d'une fenêtre de pas"""
    state = window.before
    terms = _terms(state, coeffs, scheme)
    energies = energy_report(state, coeffs, scheme)
    entropy = entropy_report(state, coeffs, None, scheme)
    residuals = balance_residuals(window, coeffs, scheme)
    tail = max(spectral_tail(state.rho, state.grid), spectral_tail(state.u, state.grid),
               spectral_tail(state.theta, state.grid), spectral_tail(state.H, state.grid))
    return DiagnosticRecord(
        time=state.time,
        dt_step=window.dt,
        total_energy=energies['E'],
        kinetic=energies['kinetic'],
        magnetic=energies['magnetic'],
        internal=energies['internal'],
        bd_functional=terms.bd_functional(),
        entropy_total=entropy['entropy_total'],
        production_visc=entropy['production_visc'],
        production_ohmic=entropy['production_ohmic'],
        production_fourier=entropy['production_fourier'],
        rho_log_rho=terms.rho_log_rho(),
        mass=terms.integral(state.rho),
        div_H_max=float(np.max(np.abs(terms.ops.divergence(state.H)))),
        induction_consistency=electric_field(state, coeffs, scheme)['induction_consistency'],
        flooring_count=int(window.flooring_events),
        spectral_tail=tail,
        trusted=bool(tail <= tail_tolerance),
        apriori=apriori_norms(state, coeffs, alpha_fractions, scheme),
        monitors=inequality_monitors(state, coeffs, window, scheme),
        alpha_fractions=tuple(alpha_fractions),
        **residuals,
    )


def diagnose_state(state: FieldState, coeffs: CoefficientSet, cfl: float, scheme: str = "spectral",
                   floors: Optional[Dict[str, float]] = None, frozen: Sequence[str] = (),
                   alpha_fractions: Sequence[float] = DEFAULT_ALPHA_FRACTIONS,
                   tail_tolerance: float = DEFAULT_TAIL_TOLERANCE) -> DiagnosticRecord:
    """
    Enregistrement d'un état isolé

    Les résidus portent sur un pas de mesure déterministe de longueur stable_dt,
    de sorte qu'un même état donne toujours la même ligne.
    """
    dt = stable_dt(state, coeffs, cfl)
    window = advance(state, coeffs, dt, scheme=scheme, floors=floors, frozen=frozen)
    return diagnose_window(window, coeffs, scheme, alpha_fractions, tail_tolerance)


def render_record(record: DiagnosticRecord) -> str:
    """Résumé texte d'un enregistrement"""
    lines = [
        "╔" + "═" * 78 + "╗",
        "║" + f"DIAGNOSTICS À t = {record.time:.6g}".center(78) + "║",
        "╚" + "═" * 78 + "╝",
        "",
        "📊 ÉNERGIES:",
        f"   • Totale: {record.total_energy:.12e}",
        f"   • Cinétique / magnétique / interne: {record.kinetic:.6e} / {record.magnetic:.6e} / {record.internal:.6e}",
        f"   • Fonctionnelle BD: {record.bd_functional:.12e}",
        "",
        "🔥 ENTROPIE:",
        f"   • ∫ρs = {record.entropy_total:.12e}",
        f"   • Productions visc/ohm/Fourier: {record.production_visc:.3e} / "
        f"{record.production_ohmic:.3e} / {record.production_fourier:.3e}",
        "",
        "🧮 RÉSIDUS DES BILANS:",
    ]
    for name, value in record.residuals().items():
        lines.append(f"   • {name:<18} {value:+.3e}")
    lines.append("")
    lines.append("📏 MONITEURS (lhs <= rhs):")
    for name in MONITOR_NAMES:
        entry = record.monitors[name]
        mark = "✅" if entry.holds else "⚠️"
        extra = f" | ratio {entry.ratio_text()}" if name in RATIO_MONITORS else ""
        lines.append(f"   {mark} {name:<18} lhs {entry.lhs:+.3e} | rhs {entry.rhs:+.3e}{extra}")
    lines.append("")
    if not record.trusted:
        lines.append(f"⚠️ Queue spectrale {record.spectral_tail:.2e}: diagnostics non fiables")
    if record.flooring_count:
        lines.append(f"⚠️ {record.flooring_count} correction(s) de plancher pendant le pas de mesure")
    lines.append("=" * 80)
    return "\n".join(lines)
