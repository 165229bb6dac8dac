"""
Lois constitutives du modèle MHD compressible
=============================================

Ce module définit les familles de coefficients de transport dépendant de la
densité (viscosités μ, λ, conductivité κ, résistivité magnétique ν, pression
froide p_e) et vérifie numériquement, par échantillonnage logarithmique, les
hypothèses de croissance qui rendent valide l'identité d'entropie BD.

Il calcule aussi la table des exposants d'intégrabilité dérivés de (β, l, m).
"""

import logging
import math
from dataclasses import dataclass, field, fields, asdict
from functools import lru_cache
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from numpy.polynomial import Polynomial
from scipy import integrate
from scipy.interpolate import CubicHermiteSpline

from errors import ConfigError, DomainError, NumericError, UsageError

logger = logging.getLogger(__name__)

MU_FAMILIES = ("reference", "power", "linear")
KAPPA0_FAMILIES = ("constant", "oscillating")
NU_FAMILIES = ("clamp", "constant")
PE_FAMILIES = ("power", "two_power", "blended")

# Familles de p_e dont le potentiel P_e s'écrit en forme close
CLOSED_FORM_PE = ("power", "two_power")

# Tolérances absolue et relative de la quadrature adaptative de P_e
PE_QUAD_TOLERANCE = 1e-10
PE_QUAD_RELATIVE = 1e-12


@dataclass(frozen=True)
class CoefficientSet:
    """
    Paramètres constitutifs et choix des familles de coefficients

    La famille de référence (β=0.8, m=2, l=6, k=7, a=2) satisfait toutes les
    hypothèses de croissance; ``validate_hypotheses`` le confirme.
    """

    beta: float = 0.8
    m: float = 2.0
    A: float = 1.0
    c0: float = 0.1
    c1: float = 0.1
    a: float = 2.0
    c2: float = 0.5
    l: float = 6.0
    k: float = 7.0
    A0: float = 1.0
    c3: float = 0.4
    c4: float = 3.0
    c5: float = 1.0
    c6: float = 0.5
    c_upsilon: float = 1.0
    mu_family: str = "reference"
    kappa0_family: str = "constant"
    nu_family: str = "clamp"
    pe_family: str = "two_power"

    @property
    def A1(self) -> float:
        """Seuil basse densité min(A, A0)"""
        return min(self.A, self.A0)

    def l_bound(self) -> float:
        """Borne inférieure stricte imposée à l"""
        if self.m == 1.0:
            return math.inf
        return 2.0 * self.beta * (3.0 * self.m - 2.0) / (self.m - 1.0) - 1.0

    def k_bound(self) -> float:
        """Borne supérieure imposée à k"""
        denominator = self.l + 1.0 - self.beta
        if denominator <= 0:
            return -math.inf
        return (self.m - 0.5) * (5.0 * (self.l + 1.0) - 6.0 * self.beta) / denominator

    def invariant_violations(self) -> List[str]:
        """
        Liste les invariants violés, sans lever d'exception

        Returns:
            List[str]: Messages lisibles, vide si le jeu est valide
        """
        problems = []
        if not (2.0 / 3.0 < self.beta < 1.0):
            problems.append(f"beta = {self.beta} hors de l'intervalle (2/3, 1) exigé pour la croissance basse densité de mu")
        if not self.m > 1.0:
            problems.append(f"m = {self.m} doit être > 1 (croissance haute densité de mu)")
        if not self.a >= 2.0:
            problems.append(f"a = {self.a} doit être >= 2 (conductivité)")
        for name in ("A", "A0", "c0", "c1", "c2", "c3", "c4", "c5", "c6", "c_upsilon"):
            if not getattr(self, name) > 0:
                problems.append(f"{name} = {getattr(self, name)} doit être > 0")
        if self.nu_family == "clamp" and self.c6 > 1.0:
            problems.append(f"c6 = {self.c6} doit être <= 1 pour que [c6, 1/c6] soit non vide")
        if not self.l > self.l_bound():
            problems.append(f"l = {self.l} doit dépasser 2β(3m−2)/(m−1) − 1 = {self.l_bound():.6g}")
        if not self.k <= self.k_bound():
            problems.append(f"k = {self.k} doit être <= (m−1/2)(5(l+1)−6β)/(l+1−β) = {self.k_bound():.6g}")
        for name, allowed in (("mu_family", MU_FAMILIES), ("kappa0_family", KAPPA0_FAMILIES),
                              ("nu_family", NU_FAMILIES), ("pe_family", PE_FAMILIES)):
            if getattr(self, name) not in allowed:
                problems.append(f"{name} = {getattr(self, name)!r} inconnu (choix: {', '.join(allowed)})")
        return problems

    def check(self) -> "CoefficientSet":
        """Lève ConfigError sur le premier invariant violé"""
        problems = self.invariant_violations()
        if problems:
            raise ConfigError(problems[0])
        return self

    def to_dict(self) -> Dict:
        return asdict(self)


REFERENCE_COEFFICIENTS = CoefficientSet()


@dataclass(frozen=True)
class CoefficientValues:
    """Évaluations ponctuelles (ou sur grille, par diffusion numpy) des coefficients"""

    mu: np.ndarray
    mu_prime: np.ndarray
    lam: np.ndarray
    three_lambda_plus_two_mu: np.ndarray
    kappa: np.ndarray
    nu: np.ndarray
    p: np.ndarray
    e: np.ndarray
    phi: np.ndarray
    phi_prime: np.ndarray
    P_e: np.ndarray
    pe: np.ndarray
    pe_prime: np.ndarray


# ---------------------------------------------------------------------------
# Viscosité
# ---------------------------------------------------------------------------

def _power_antiderivative(exponent: float, s: np.ndarray) -> np.ndarray:
    """Primitive de ξ^exponent, nulle en ξ = 1"""
    if exponent == -1.0:
        return np.log(s)
    return (s ** (exponent + 1.0) - 1.0) / (exponent + 1.0)


class ViscosityProfile:
    """
    Profil μ(s) réalisé, avec μ', φ (φ' = μ'/s, φ(A) = 0)

    La famille de référence raccorde s^β (s <= A/2) et s^m + δ (s >= 2A) par
    une cubique de Hermite sur μ' dont μ et φ sont les primitives exactes.
    """

    def __init__(self, family: str, beta: float, m: float, A: float):
        self.family = family
        self.beta = beta
        self.m = m
        self.A = A
        self.s_low = 0.5 * A
        self.s_high = 2.0 * A
        self.blend = None
        self.delta = 0.0
        self._phi_low_shift = 0.0
        self._phi_high_shift = 0.0
        if family == "reference":
            self._build_blend()
        self._phi_offset = 0.0
        self._phi_offset = float(self._phi_raw(np.array([A]))[0])

    def _build_blend(self):
        x0, x1 = self.s_low, self.s_high
        beta, m = self.beta, self.m
        values = [beta * x0 ** (beta - 1.0), m * x1 ** (m - 1.0)]
        slopes = [beta * (beta - 1.0) * x0 ** (beta - 2.0), m * (m - 1.0) * x1 ** (m - 2.0)]
        spline = CubicHermiteSpline([x0, x1], values, slopes)
        # Développement en puissances de s du polynôme local en (s - x0)
        shift = Polynomial([-x0, 1.0])
        poly = Polynomial([0.0])
        for coefficient in spline.c[:, 0]:
            poly = poly * shift + coefficient
        self.blend = poly
        self._blend_mu = poly.integ()
        self._blend_mu_at_x0 = self._blend_mu(x0)
        # P(s)/s = a0/s + (a1 + a2 s + a3 s^2)
        self._blend_phi_poly = Polynomial(poly.coef[1:]).integ() if len(poly.coef) > 1 else Polynomial([0.0])
        self._blend_phi_log = float(poly.coef[0])
        mu_x0 = x0 ** beta
        mu_x1 = mu_x0 + self._blend_mu(x1) - self._blend_mu_at_x0
        self.delta = float(mu_x1 - x1 ** m)
        # Continuité de φ aux deux raccords
        phi_low_x0 = self._phi_power(beta, np.array([x0]))[0]
        self._phi_low_shift = 0.0
        self._phi_blend_shift = phi_low_x0 - self._phi_blend_unshifted(np.array([x0]))[0]
        phi_blend_x1 = self._phi_blend_unshifted(np.array([x1]))[0] + self._phi_blend_shift
        self._phi_high_shift = phi_blend_x1 - self._phi_power(m, np.array([x1]))[0]

    @staticmethod
    def _phi_power(exponent: float, s: np.ndarray) -> np.ndarray:
        """Primitive de exponent·s^(exponent−2)"""
        if exponent == 1.0:
            return np.log(s)
        return exponent / (exponent - 1.0) * s ** (exponent - 1.0)

    def _phi_blend_unshifted(self, s: np.ndarray) -> np.ndarray:
        return self._blend_phi_log * np.log(s) + self._blend_phi_poly(s)

    def _regimes(self, s: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        low = s <= self.s_low
        high = s >= self.s_high
        return low, ~(low | high), high

    def mu(self, s: np.ndarray) -> np.ndarray:
        if self.family == "linear":
            return s.copy()
        if self.family == "power":
            return s ** self.beta
        low, mid, high = self._regimes(s)
        out = np.empty_like(s)
        out[low] = s[low] ** self.beta
        out[mid] = self.s_low ** self.beta + self._blend_mu(s[mid]) - self._blend_mu_at_x0
        out[high] = s[high] ** self.m + self.delta
        return out

    def mu_prime(self, s: np.ndarray) -> np.ndarray:
        if self.family == "linear":
            return np.ones_like(s)
        if self.family == "power":
            return self.beta * s ** (self.beta - 1.0)
        low, mid, high = self._regimes(s)
        out = np.empty_like(s)
        out[low] = self.beta * s[low] ** (self.beta - 1.0)
        out[mid] = self.blend(s[mid])
        out[high] = self.m * s[high] ** (self.m - 1.0)
        return out

    def _phi_raw(self, s: np.ndarray) -> np.ndarray:
        if self.family == "linear":
            return np.log(s)
        if self.family == "power":
            return self._phi_power(self.beta, s)
        low, mid, high = self._regimes(s)
        out = np.empty_like(s)
        out[low] = self._phi_power(self.beta, s[low])
        out[mid] = self._phi_blend_unshifted(s[mid]) + self._phi_blend_shift
        out[high] = self._phi_power(self.m, s[high]) + self._phi_high_shift
        return out

    def phi(self, s: np.ndarray) -> np.ndarray:
        return self._phi_raw(s) - self._phi_offset


@lru_cache(maxsize=32)
def viscosity_profile(family: str, beta: float, m: float, A: float) -> ViscosityProfile:
    return ViscosityProfile(family, beta, m, A)


def _profile(coeffs: CoefficientSet) -> ViscosityProfile:
    return viscosity_profile(coeffs.mu_family, coeffs.beta, coeffs.m, coeffs.A)


def _pointwise(method, rho) -> np.ndarray:
    """Applique une méthode du profil à un scalaire ou à un tableau de forme quelconque"""
    rho = np.asarray(rho, dtype=float)
    return method(np.atleast_1d(rho).ravel()).reshape(rho.shape)


def mu_of(rho, coeffs: CoefficientSet) -> np.ndarray:
    return _pointwise(_profile(coeffs).mu, rho)


def mu_prime_of(rho, coeffs: CoefficientSet) -> np.ndarray:
    return _pointwise(_profile(coeffs).mu_prime, rho)


def lambda_of(rho, coeffs: CoefficientSet) -> np.ndarray:
    """λ = 2(ρμ'(ρ) − μ(ρ)), jamais paramétré indépendamment"""
    rho = np.asarray(rho, dtype=float)
    return 2.0 * (rho * mu_prime_of(rho, coeffs) - mu_of(rho, coeffs))


def phi_of(rho, coeffs: CoefficientSet) -> np.ndarray:
    return _pointwise(_profile(coeffs).phi, rho)


# ---------------------------------------------------------------------------
# Conductivité, résistivité
# ---------------------------------------------------------------------------

def kappa0_of(rho, theta, coeffs: CoefficientSet) -> np.ndarray:
    rho = np.asarray(rho, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if coeffs.kappa0_family == "oscillating":
        return 1.0 + 0.5 * np.sin(np.log1p(rho * theta))
    return np.ones(np.broadcast(rho, theta).shape)


def kappa_of(rho, theta, coeffs: CoefficientSet) -> np.ndarray:
    """κ = κ0 (ρ + 1)(θ^a + 1)"""
    rho = np.asarray(rho, dtype=float)
    theta = np.asarray(theta, dtype=float)
    return kappa0_of(rho, theta, coeffs) * (rho + 1.0) * (theta ** coeffs.a + 1.0)


def nu_of(rho, theta, coeffs: CoefficientSet) -> np.ndarray:
    rho = np.asarray(rho, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if coeffs.nu_family == "constant":
        return np.full(np.broadcast(rho, theta).shape, coeffs.c6)
    return np.clip(coeffs.c5 * theta / rho, coeffs.c6, 1.0 / coeffs.c6)


# ---------------------------------------------------------------------------
# Pression froide
# ---------------------------------------------------------------------------

def pe_of(rho, coeffs: CoefficientSet) -> np.ndarray:
    rho = np.asarray(rho, dtype=float)
    k, l = coeffs.k, coeffs.l
    if coeffs.pe_family == "power":
        return coeffs.c4 * rho ** k
    if coeffs.pe_family == "two_power":
        return rho ** k / k - rho ** (-l) / l
    weight = 1.0 / (1.0 + rho ** 2)
    return -weight * rho ** (-l) / l + (1.0 - weight) * rho ** k / k


def pe_prime_of(rho, coeffs: CoefficientSet) -> np.ndarray:
    rho = np.asarray(rho, dtype=float)
    k, l = coeffs.k, coeffs.l
    if coeffs.pe_family == "power":
        return coeffs.c4 * k * rho ** (k - 1.0)
    if coeffs.pe_family == "two_power":
        return rho ** (k - 1.0) + rho ** (-l - 1.0)
    weight = 1.0 / (1.0 + rho ** 2)
    weight_prime = -2.0 * rho * weight ** 2
    cold = -rho ** (-l) / l
    hot = rho ** k / k
    return (weight_prime * cold + weight * rho ** (-l - 1.0)
            - weight_prime * hot + (1.0 - weight) * rho ** (k - 1.0))


def _pe_potential_quadrature(rho: np.ndarray, coeffs: CoefficientSet) -> np.ndarray:
    """
    P_e par quadrature adaptative en t = ln ξ

    ∫₁^ρ p_e(ξ)/ξ² dξ = ∫₀^{ln ρ} p_e(eᵗ) e⁻ᵗ dt. Les valeurs distinctes de ρ sont
    triées par distance à 1 de chaque côté et l'intégrale est cumulée segment par
    segment, si bien que P_e(ρ') − P_e(ρ) est exactement la somme des segments
    compris entre ρ et ρ'.
    """
    values, inverse = np.unique(rho.ravel(), return_inverse=True)
    logs = np.log(values)
    integrand = lambda t: float(pe_of(math.exp(t), coeffs)) * math.exp(-t)
    potentials = np.zeros_like(values)
    for side in (np.flatnonzero(logs < 0.0), np.flatnonzero(logs > 0.0)):
        side = side[np.argsort(np.abs(logs[side]))]
        ends = logs[side]
        starts = np.concatenate(([0.0], ends[:-1]))
        pieces = [integrate.quad(integrand, start, end, epsabs=PE_QUAD_TOLERANCE,
                                 epsrel=PE_QUAD_RELATIVE, limit=200)[0]
                  for start, end in zip(starts, ends)]
        potentials[side] = np.cumsum(pieces)
    return potentials[inverse].reshape(rho.shape)


def pe_potential_of(rho, coeffs: CoefficientSet) -> np.ndarray:
    """P_e(ρ) = ∫₁^ρ p_e(ξ)/ξ² dξ"""
    rho = np.asarray(rho, dtype=float)
    k, l = coeffs.k, coeffs.l
    if coeffs.pe_family == "power":
        return coeffs.c4 * _power_antiderivative(k - 2.0, rho)
    if coeffs.pe_family == "two_power":
        return _power_antiderivative(k - 2.0, rho) / k - _power_antiderivative(-l - 2.0, rho) / l
    return _pe_potential_quadrature(rho, coeffs)


def pressure_of(rho, theta, coeffs: CoefficientSet) -> np.ndarray:
    """p = ρθ + p_e(ρ)"""
    rho = np.asarray(rho, dtype=float)
    return rho * np.asarray(theta, dtype=float) + pe_of(rho, coeffs)


# ---------------------------------------------------------------------------
# Évaluation groupée
# ---------------------------------------------------------------------------

def _require_positive(name: str, values: np.ndarray):
    bad = ~(values > 0)
    if np.any(bad):
        index = np.unravel_index(int(np.argmax(bad)), values.shape) if values.ndim else ()
        raise DomainError(f"{name} doit être > 0, valeur {values[index]!r} à l'indice {index}")


def eval_coefficients(rho, theta, coeffs: CoefficientSet) -> CoefficientValues:
    """
    Évalue tous les coefficients en (ρ, θ)

    Args:
        rho: Densité (scalaire ou tableau), strictement positive
        theta: Température (même forme ou diffusable), strictement positive
        coeffs (CoefficientSet): Paramètres constitutifs

    Returns:
        CoefficientValues: μ, μ', λ, 3λ+2μ, κ, ν, p, e, φ, φ', P_e, p_e, p_e'

    Raises:
        DomainError: ρ ou θ non strictement positif
        NumericError: coefficient non fini, avec l'échantillon fautif
    """
    rho = np.asarray(rho, dtype=float)
    theta = np.asarray(theta, dtype=float)
    _require_positive("rho", rho)
    _require_positive("theta", theta)
    rho, theta = np.broadcast_arrays(rho, theta)

    mu = mu_of(rho, coeffs)
    mu_prime = mu_prime_of(rho, coeffs)
    lam = 2.0 * (rho * mu_prime - mu)
    pe = pe_of(rho, coeffs)
    P_e = pe_potential_of(rho, coeffs)
    values = CoefficientValues(
        mu=mu,
        mu_prime=mu_prime,
        lam=lam,
        three_lambda_plus_two_mu=3.0 * lam + 2.0 * mu,
        kappa=kappa_of(rho, theta, coeffs),
        nu=nu_of(rho, theta, coeffs),
        p=rho * theta + pe,
        e=coeffs.c_upsilon * theta + P_e,
        phi=phi_of(rho, coeffs),
        phi_prime=mu_prime / rho,
        P_e=P_e,
        pe=pe,
        pe_prime=pe_prime_of(rho, coeffs),
    )
    for item in fields(values):
        array = np.asarray(getattr(values, item.name))
        bad = ~np.isfinite(array)
        if np.any(bad):
            index = np.unravel_index(int(np.argmax(bad)), array.shape) if array.ndim else ()
            sample = (float(rho[index]), float(theta[index]))
            raise NumericError(f"coefficient {item.name} non fini en (rho, theta) = {sample}",
                               term=item.name, sample=sample)
    return values


# ---------------------------------------------------------------------------
# Validation des hypothèses
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SampleSpec:
    """Plages d'échantillonnage logarithmique"""

    rho_range: Tuple[float, float] = (1e-6, 1e6)
    theta_range: Tuple[float, float] = (1e-3, 1e3)
    n_samples: int = 1000


@dataclass
class HypothesisEntry:
    id: str
    description: str
    passed: bool
    worst_margin: float
    worst_sample: Tuple[float, float]
    detail: str = ""
    active_fraction: Optional[float] = None


@dataclass
class HypothesisReport:
    entries: List[HypothesisEntry] = field(default_factory=list)

    @property
    def all_passed(self) -> bool:
        return all(entry.passed for entry in self.entries)

    def failures(self) -> List[HypothesisEntry]:
        return [entry for entry in self.entries if not entry.passed]

    def entry(self, hypothesis_id: str) -> HypothesisEntry:
        for item in self.entries:
            if hypothesis_id in (item.id, item.description):
                return item
        raise KeyError(hypothesis_id)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([{
            "hypothesis": e.id,
            "description": e.description,
            "status": "PASS" if e.passed else "FAIL",
            "worst_margin": e.worst_margin,
            "witness_rho": e.worst_sample[0],
            "witness_theta": e.worst_sample[1],
            "detail": e.detail,
        } for e in self.entries])

    def to_table(self) -> str:
        """Tableau texte à colonnes fixes"""
        lines = [
            "╔" + "═" * 80 + "╗",
            "║" + "RAPPORT DES HYPOTHÈSES CONSTITUTIVES".center(80) + "║",
            "╚" + "═" * 80 + "╝",
            f"{'hypothese':<9} {'description':<20} {'statut':<6} {'marge_min':>14} {'rho_temoin':>14} {'theta_temoin':>14}",
            "-" * 82,
        ]
        for e in self.entries:
            lines.append(f"{e.id:<9} {e.description:<20} {'PASS' if e.passed else 'FAIL':<6} {e.worst_margin:>14.6e} "
                         f"{e.worst_sample[0]:>14.6e} {e.worst_sample[1]:>14.6e}")
        lines.append("-" * 82)
        for e in self.entries:
            if e.detail:
                lines.append(f"• {e.id}: {e.detail}")
        lines.append(("✅ Toutes les hypothèses sont satisfaites" if self.all_passed
                      else f"❌ {len(self.failures())} hypothèse(s) en échec"))
        return "\n".join(lines)


def _margin(small, large) -> np.ndarray:
    """Marge normalisée de l'inégalité small <= large (négative si violée)"""
    small = np.asarray(small, dtype=float)
    large = np.asarray(large, dtype=float)
    scale = np.maximum(np.maximum(np.abs(large), np.abs(small)), np.finfo(float).tiny)
    return (large - small) / scale


class _Collector:
    """Accumule la pire marge d'une hypothèse et son échantillon témoin"""

    def __init__(self, hypothesis_id: str, description: str, default_sample: Tuple[float, float]):
        self.id = hypothesis_id
        self.description = description
        self.worst = math.inf
        self.sample = default_sample
        self.notes: List[str] = []
        self.active_fraction = None

    def sampled(self, margins, rho, theta, label: str):
        margins = np.asarray(margins, dtype=float)
        if margins.size == 0:
            return
        margins = np.where(np.isnan(margins), -math.inf, margins)
        index = int(np.argmin(margins))
        rho_b, theta_b = np.broadcast_arrays(np.asarray(rho, dtype=float), np.asarray(theta, dtype=float))
        if margins.flat[index] < self.worst:
            self.worst = float(margins.flat[index])
            self.sample = (float(rho_b.flat[index]), float(theta_b.flat[index]))
        if margins.flat[index] < 0:
            self.notes.append(f"{label} violée")

    def analytic(self, margin: float, label: str):
        if margin < self.worst:
            self.worst = float(margin)
        if margin < 0:
            self.notes.append(f"{label} violée")

    def entry(self) -> HypothesisEntry:
        worst = self.worst if math.isfinite(self.worst) else 1.0
        return HypothesisEntry(self.id, self.description, worst >= 0.0, worst, self.sample,
                               "; ".join(self.notes), self.active_fraction)


def _log_samples(bounds: Tuple[float, float], count: int, label: str) -> np.ndarray:
    low, high = float(bounds[0]), float(bounds[1])
    if not (low > 0 and high > low):
        raise UsageError(f"plage d'échantillonnage {label} vide ou non positive: {bounds}")
    decades = math.log10(high / low)
    if count < 2 or count < 2.0 * decades:
        raise UsageError(f"{count} échantillons pour {decades:.1f} décades de {label}: il en faut au moins 2 par décade")
    return np.logspace(math.log10(low), math.log10(high), count)


def validate_hypotheses(coeffs: CoefficientSet, sample_spec: SampleSpec = SampleSpec()) -> HypothesisReport:
    """
    Vérifie numériquement les hypothèses de croissance des coefficients

    Args:
        coeffs (CoefficientSet): Jeu à valider (éventuellement invalide)
        sample_spec (SampleSpec): Plages et nombre d'échantillons log-espacés

    Returns:
        HypothesisReport: Verdict, pire marge et échantillon témoin par hypothèse
    """
    rho = _log_samples(sample_spec.rho_range, sample_spec.n_samples, "rho")
    theta_count = max(int(math.ceil(2.0 * math.log10(sample_spec.theta_range[1] / max(sample_spec.theta_range[0], 1e-300)))) + 1,
                      min(sample_spec.n_samples, 64))
    theta = _log_samples(sample_spec.theta_range, theta_count, "theta")
    theta_ref = math.sqrt(theta[0] * theta[-1])
    default = (float(rho[0]), theta_ref)
    rho_grid, theta_grid = np.meshgrid(rho, theta, indexing="ij")
    report = HypothesisReport()

    mu = mu_of(rho, coeffs)
    mu_prime = mu_prime_of(rho, coeffs)
    lam = lambda_of(rho, coeffs)
    combo = 3.0 * lam + 2.0 * mu
    beta, m = coeffs.beta, coeffs.m

    check = _Collector("H31", "viscosity_relation", default)
    error = np.abs(lam - 2.0 * (rho * mu_prime - mu))
    check.sampled(1.0 - error / (1e-12 * np.maximum(1.0, np.abs(lam))), rho, theta_ref, "relation lambda")
    check.sampled(_margin(0.0, mu_prime), rho, theta_ref, "positivité de mu'")
    report.entries.append(check.entry())

    check = _Collector("H32_low", "viscosity_low", default)
    check.analytic(min((beta - 2.0 / 3.0) / beta, 1.0 - beta), "beta dans (2/3, 1)")
    low = rho < coeffs.A
    s = rho[low]
    check.sampled(_margin(coeffs.c0 * s ** (beta - 1.0), mu_prime[low]), s, theta_ref, "minoration de mu'")
    check.sampled(_margin(mu_prime[low], s ** (beta - 1.0) / coeffs.c0), s, theta_ref, "majoration de mu'")
    check.sampled(_margin(coeffs.c0 * s ** beta, combo[low]), s, theta_ref, "minoration de 3λ+2μ")
    report.entries.append(check.entry())

    check = _Collector("H32_high", "viscosity_high", default)
    check.analytic((m - 1.0) / max(abs(m), 1e-300), "m > 1")
    high = ~low
    s = rho[high]
    check.sampled(_margin(coeffs.c1 * s ** (m - 1.0), mu_prime[high]), s, theta_ref, "minoration de mu'")
    check.sampled(_margin(mu_prime[high], s ** (m - 1.0) / coeffs.c1), s, theta_ref, "majoration de mu'")
    check.sampled(_margin(coeffs.c1 * s ** m, combo[high]), s, theta_ref, "minoration de 3λ+2μ")
    check.sampled(_margin(combo[high], s ** m / coeffs.c1), s, theta_ref, "majoration de 3λ+2μ")
    report.entries.append(check.entry())

    check = _Collector("H33", "conductivity", default)
    check.analytic((coeffs.a - 2.0) / coeffs.a if coeffs.a > 0 else -1.0, "a >= 2")
    kappa0 = kappa0_of(rho_grid, theta_grid, coeffs)
    check.sampled(_margin(coeffs.c2, kappa0), rho_grid, theta_grid, "minoration de kappa0")
    check.sampled(_margin(kappa0, 1.0 / coeffs.c2), rho_grid, theta_grid, "majoration de kappa0")
    report.entries.append(check.entry())

    check = _Collector("H34", "state_law", default)
    h = 1e-5
    potential = pe_potential_of(np.array([1.0]), coeffs)
    check.analytic(1.0 - abs(float(potential[0])) / PE_QUAD_TOLERANCE, "P_e(1) = 0")
    derivative = (pe_potential_of(rho * (1.0 + h), coeffs) - pe_potential_of(rho * (1.0 - h), coeffs)) / (2.0 * h * rho)
    target = pe_of(rho, coeffs) / rho ** 2
    quadrature_error = PE_QUAD_TOLERANCE + PE_QUAD_RELATIVE * np.abs(pe_potential_of(rho, coeffs))
    allowance = (1e-4 * (np.abs(target) + np.abs(pe_prime_of(rho, coeffs)) / rho)
                 + 4.0 * quadrature_error / (2.0 * h * rho))
    check.sampled(1.0 - np.abs(derivative - target) / allowance, rho, theta_ref, "P_e' = p_e/ρ²")
    report.entries.append(check.entry())

    pe_prime = pe_prime_of(rho, coeffs)
    l, k = coeffs.l, coeffs.k

    check = _Collector("H35_low", "cold_pressure_low", default)
    check.analytic((l - coeffs.l_bound()) / max(abs(l), 1e-300), f"l > {coeffs.l_bound():.6g}")
    below = rho < coeffs.A0
    s = rho[below]
    check.sampled(_margin(coeffs.c3 * s ** (-l - 1.0), pe_prime[below]), s, theta_ref, "minoration de p_e'")
    check.sampled(_margin(pe_prime[below], s ** (-l - 1.0) / coeffs.c3), s, theta_ref, "majoration de p_e'")
    report.entries.append(check.entry())

    check = _Collector("H35_high", "cold_pressure_high", default)
    k_bound = coeffs.k_bound()
    check.analytic((k_bound - k) / max(abs(k_bound), 1e-300), f"k <= {k_bound:.6g}")
    above = rho > coeffs.A0
    s = rho[above]
    check.sampled(_margin(pe_prime[above], coeffs.c4 * s ** (k - 1.0)), s, theta_ref, "majoration de p_e'")
    report.entries.append(check.entry())

    check = _Collector("H36", "resistivity", default)
    nu = nu_of(rho_grid, theta_grid, coeffs)
    check.sampled(_margin(coeffs.c6, nu), rho_grid, theta_grid, "minoration par c6")
    check.sampled(_margin(nu, 1.0 / coeffs.c6), rho_grid, theta_grid, "majoration par 1/c6")
    # Minoration en θ/ρ là où elle est compatible avec la majoration 1/c6
    lower = coeffs.c5 * theta_grid / rho_grid
    active = lower <= 1.0 / coeffs.c6
    check.active_fraction = float(np.count_nonzero(active)) / active.size
    check.sampled(_margin(lower[active], nu[active]), rho_grid[active], theta_grid[active], "minoration par c5 θ/ρ")
    report.entries.append(check.entry())

    failed = report.failures()
    if failed:
        logger.warning(f"⚠️ Hypothèses en échec: {', '.join(e.id for e in failed)}")
    else:
        logger.info("✅ Hypothèses constitutives satisfaites sur tout l'échantillon")
    return report


# ---------------------------------------------------------------------------
# Exposants dérivés
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExponentTable:
    j: float
    j1: float
    q1: float
    q2: float
    q3: float
    s_exp: float
    r_exp: float
    p_density: float
    delta_floor: float
    a: float = 2.0

    @property
    def velocity_margin(self) -> float:
        """1 − (1/p + 2q1/(q2(q1−1))), positif quand le produit des vitesses est intégrable"""
        return 1.0 - (1.0 / self.p_density + 2.0 * self.q1 / (self.q2 * (self.q1 - 1.0)))

    def theta_exponent(self, p: float, r: float) -> float:
        """Exposant q de l'intégrabilité en temps de θ pour p ∈ [1, a], r >= 1"""
        if not (1.0 <= p <= self.a) or r < 1.0:
            raise UsageError(f"théta: p = {p} doit être dans [1, {self.a}] et r = {r} >= 1")
        inverse = (self.a - p) / (p * (self.a - 1.0) * r) + (p - 1.0) / (3.0 * p * (self.a - 1.0))
        return 1.0 / inverse

    @staticmethod
    def magnetic_exponent(p: float) -> float:
        """Exposant spatial q de H en L^p(0,T;L^q), 1/q = 1/2 − 2/(3p)"""
        inverse = 0.5 - 2.0 / (3.0 * p)
        if inverse <= 0:
            raise UsageError(f"exposant magnétique non défini pour p = {p}")
        return 1.0 / inverse


def derived_exponents(coeffs: CoefficientSet) -> ExponentTable:
    """
    Calcule les exposants d'intégrabilité à partir de (β, l, m)

    Returns:
        ExponentTable: j, j1, q1, q2, q3, s, r, p, δ
    """
    beta, l, m = coeffs.beta, coeffs.l, coeffs.m
    q1 = 2.0 * (1.0 - beta / (l + 1.0))
    j = (l + 1.0 - beta) / beta
    return ExponentTable(
        j=j,
        j1=(l + 1.0 - beta) / (2.0 * l),
        q1=q1,
        q2=3.0 * q1,
        q3=1.0 / (1.0 / (6.0 * j) + 0.5),
        s_exp=6.0 * (l + 1.0 - beta) / (5.0 * l + 3.0),
        r_exp=18.0 * (l + 1.0 - beta) / (17.0 * l + 15.0 - 12.0 * beta),
        p_density=6.0 * m - 3.0,
        delta_floor=3.0,
        a=coeffs.a,
    )
