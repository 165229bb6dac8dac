"""
Dynamique MHD compressible en variables primitives
==================================================

Tendances de la masse, de la quantité de mouvement, de l'équation thermique
et de l'induction, puis intégration SSP-RK3 (Shu–Osher) à pas CFL.

Le pas expose ses trois états intermédiaires (``StepWindow``) pour que les
résidus des bilans soient évalués sur la trajectoire discrète elle-même.
"""

import logging
import math
from dataclasses import dataclass, fields
from typing import Dict, FrozenSet, Iterable, Optional, Tuple

import numpy as np

from constitutive import (CoefficientSet, kappa_of, lambda_of, mu_of, nu_of, pe_prime_of,
                          pressure_of)
from errors import NumericError, StepRejectedError, UsageError
from field_state import (DEFAULT_FLOORS, FieldState, Grid, apply_floors, get_operators,
                         lp_norm)

logger = logging.getLogger(__name__)

FIELD_NAMES = ("rho", "u", "theta", "H")

# Poids et instants des trois étapes SSP-RK3 (tableau de Butcher équivalent)
RK3_WEIGHTS = (1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0)
RK3_NODES = (0.0, 1.0, 0.5)

STEP_LIMITS = {
    'growth_factor': 10.0,
    'production_tolerance': 1e-14,
    'div_tolerance': 1e-10,
}


@dataclass(frozen=True, eq=False)
class Tendencies:
    """Dérivées temporelles des quatre champs"""

    d_rho: np.ndarray
    d_u: np.ndarray
    d_theta: np.ndarray
    d_H: np.ndarray

    def scaled(self, factor: float) -> "Tendencies":
        return Tendencies(*(factor * getattr(self, item.name) for item in fields(self)))

    def finite_or_raise(self) -> "Tendencies":
        for item in fields(self):
            values = getattr(self, item.name)
            if not np.all(np.isfinite(values)):
                raise NumericError(f"tendance {item.name} non finie", term=item.name)
        return self


@dataclass(frozen=True, eq=False)
class StepWindow:
    """
    Un pas accepté: état initial, état final et états des trois étapes RK

    Les étapes sont évaluées aux instants t, t+dt, t+dt/2 avec les poids
    (1/6, 1/6, 2/3).
    """

    before: FieldState
    after: FieldState
    stages: Tuple[FieldState, FieldState, FieldState]
    dt: float
    flooring_events: int = 0
    run_id: str = ""


def velocity_gradient(state: FieldState, scheme: str = "spectral") -> np.ndarray:
    """G[i, j] = ∂_j u_i"""
    return get_operators(state.grid, scheme).vector_gradient(state.u)


def strain_rate(grad_u: np.ndarray) -> np.ndarray:
    return 0.5 * (grad_u + np.swapaxes(grad_u, 0, 1))


def skew_part(grad_u: np.ndarray) -> np.ndarray:
    return 0.5 * (grad_u - np.swapaxes(grad_u, 0, 1))


def stress_tensor(state: FieldState, coeffs: CoefficientSet, scheme: str = "spectral",
                  grad_u: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Tenseur des contraintes visqueuses Ψ = 2μ(ρ)D(u) + λ(ρ)(div u)I

    Returns:
        np.ndarray: Tenseur symétrique de forme (3, 3, *dims)
    """
    if grad_u is None:
        grad_u = velocity_gradient(state, scheme)
    div_u = np.trace(grad_u, axis1=0, axis2=1)
    psi = 2.0 * mu_of(state.rho, coeffs) * strain_rate(grad_u)
    bulk = lambda_of(state.rho, coeffs) * div_u
    for i in range(3):
        psi[i, i] += bulk
    return psi


def lorentz_force(H: np.ndarray, grid: Grid, scheme: str = "spectral") -> np.ndarray:
    """(∇×H)×H"""
    current = get_operators(grid, scheme).curl(np.asarray(H, dtype=float))
    return np.cross(current, H, axis=0)


def electric_field_of(state: FieldState, coeffs: CoefficientSet, scheme: str = "spectral") -> np.ndarray:
    """E = ν∇×H − u×H"""
    current = get_operators(state.grid, scheme).curl(state.H)
    return nu_of(state.rho, state.theta, coeffs) * current - np.cross(state.u, state.H, axis=0)


def induction_tendency(state: FieldState, coeffs: CoefficientSet, scheme: str = "spectral") -> np.ndarray:
    """Tendance d'induction non projetée ∇×(u×H) − ∇×(ν∇×H) = −∇×E"""
    return -get_operators(state.grid, scheme).curl(electric_field_of(state, coeffs, scheme))


def rhs(state: FieldState, coeffs: CoefficientSet, scheme: str = "spectral",
        frozen: Iterable[str] = ()) -> Tendencies:
    """
    Tendances du système MHD en variables primitives

    Args:
        state (FieldState): État plancherisé
        coeffs (CoefficientSet): Coefficients validés
        scheme (str): Schéma de dérivation
        frozen (Iterable[str]): Champs gelés (tendance nulle)

    Returns:
        Tendencies: d_rho, d_u, d_theta, d_H (d_H projeté à divergence nulle)

    Raises:
        NumericError: terme non fini, identifié par son nom
    """
    frozen = frozenset(frozen)
    unknown = frozen - set(FIELD_NAMES)
    if unknown:
        raise UsageError(f"champs gelés inconnus: {sorted(unknown)}")
    ops = get_operators(state.grid, scheme)
    rho, u, theta, H = state.rho, state.u, state.theta, state.H

    grad_u = ops.vector_gradient(u)
    div_u = np.trace(grad_u, axis1=0, axis2=1)
    psi = stress_tensor(state, coeffs, scheme, grad_u=grad_u)

    d_rho = -ops.divergence(rho * u)

    current = ops.curl(H)
    advection = np.einsum("j...,ij...->i...", u, grad_u)
    d_u = (-advection
           + (-ops.gradient(pressure_of(rho, theta, coeffs))
              + np.cross(current, H, axis=0)
              + ops.tensor_divergence(psi)) / rho)

    grad_theta = ops.gradient(theta)
    heat_flux = ops.divergence(kappa_of(rho, theta, coeffs) * grad_theta)
    ohmic = nu_of(rho, theta, coeffs) * np.sum(current ** 2, axis=0)
    viscous = np.einsum("ij...,ij...->...", psi, grad_u)
    d_theta = ((heat_flux + ohmic + viscous - theta * rho * div_u) / (coeffs.c_upsilon * rho)
               - np.einsum("i...,i...->...", u, grad_theta))

    d_H = ops.project(induction_tendency(state, coeffs, scheme))

    tendencies = Tendencies(
        d_rho=np.zeros_like(d_rho) if "rho" in frozen else d_rho,
        d_u=np.zeros_like(d_u) if "u" in frozen else d_u,
        d_theta=np.zeros_like(d_theta) if "theta" in frozen else d_theta,
        d_H=np.zeros_like(d_H) if "H" in frozen else d_H,
    )
    return tendencies.finite_or_raise()


def _stage(base: FieldState, base_weight: float, previous: FieldState, tendencies: Tendencies,
           dt: float, time: float) -> FieldState:
    """base_weight·base + (1 − base_weight)·(previous + dt·L(previous))"""
    w = base_weight
    return FieldState(
        grid=base.grid,
        time=time,
        rho=w * base.rho + (1.0 - w) * (previous.rho + dt * tendencies.d_rho),
        u=w * base.u + (1.0 - w) * (previous.u + dt * tendencies.d_u),
        theta=w * base.theta + (1.0 - w) * (previous.theta + dt * tendencies.d_theta),
        H=w * base.H + (1.0 - w) * (previous.H + dt * tendencies.d_H),
    )


def fast_speed(state: FieldState, coeffs: CoefficientSet) -> np.ndarray:
    """Vitesse magnétosonore rapide √(∂p/∂ρ + θ + |H|²/ρ), avec ∂p/∂ρ = θ + p_e'(ρ)"""
    squared = (2.0 * state.theta + pe_prime_of(state.rho, coeffs)
               + np.sum(state.H ** 2, axis=0) / state.rho)
    if not np.all(np.isfinite(squared)):
        raise NumericError("vitesse d'onde non finie", term="c_fast")
    return np.sqrt(np.maximum(squared, 0.0))


def _check_growth(before: FieldState, after: FieldState, coeffs: CoefficientSet):
    factor = STEP_LIMITS['growth_factor']
    if not after.is_finite():
        raise StepRejectedError(f"état non fini après le pas à t = {before.time:.6g}", term="state")
    old = before.max_abs()
    new = after.max_abs()
    old['u'] = max(old['u'], float(np.max(fast_speed(before, coeffs))))
    for name in FIELD_NAMES:
        if new[name] > factor * old[name] and new[name] > 0.0:
            raise StepRejectedError(
                f"le champ {name} croît de {old[name]:.3e} à {new[name]:.3e} en un pas (t = {before.time:.6g})",
                term=name)


def advance(state: FieldState, coeffs: CoefficientSet, dt: float, scheme: str = "spectral",
            floors: Optional[Dict[str, float]] = None, frozen: Iterable[str] = (),
            run_id: str = "") -> StepWindow:
    """
    Un pas SSP-RK3 avec exposition des étapes

    Returns:
        StepWindow: fenêtre avant/après avec les trois états d'étape

    Raises:
        StepRejectedError: croissance de plus d'un facteur 10 ou valeur non finie
    """
    if not dt > 0:
        raise UsageError(f"pas de temps dt = {dt} invalide")
    floors = {**DEFAULT_FLOORS, **(floors or {})}
    frozen = tuple(frozen)
    t = state.time
    events = 0

    y0 = state
    y1, count = apply_floors(_stage(y0, 0.0, y0, rhs(y0, coeffs, scheme, frozen), dt, t + dt),
                             floors['rho'], floors['theta'])
    events += count
    y2, count = apply_floors(_stage(y0, 0.75, y1, rhs(y1, coeffs, scheme, frozen), dt, t + 0.5 * dt),
                             floors['rho'], floors['theta'])
    events += count
    y3 = _stage(y0, 1.0 / 3.0, y2, rhs(y2, coeffs, scheme, frozen), dt, t + dt)
    if "H" not in frozen:
        y3 = y3.replace(H=get_operators(state.grid, scheme).project(y3.H))
    y3, count = apply_floors(y3, floors['rho'], floors['theta'])
    events += count

    _check_growth(y0, y3, coeffs)
    if events:
        logger.warning(f"⚠️ {events} correction(s) de plancher pendant le pas t = {t:.6g}")
    return StepWindow(before=y0, after=y3, stages=(y0, y1, y2), dt=float(dt),
                      flooring_events=events, run_id=run_id)


def step(state: FieldState, coeffs: CoefficientSet, dt: float, **kwargs) -> FieldState:
    """Avance l'état de dt (SSP-RK3)"""
    return advance(state, coeffs, dt, **kwargs).after


def cfl_time_step(dx: float, d: int, speed: float, diffusivity: float, cfl: float) -> float:
    """
    dt = cfl · min(Δx / vitesse, Δx² / (2d · diffusivité))

    Un terme nul (vitesse ou diffusivité) ne contraint pas le pas.
    """
    if not 0 < cfl <= 1:
        raise UsageError(f"cfl = {cfl} hors de ]0, 1]")
    advective = dx / speed if speed > 0 else math.inf
    diffusive = dx * dx / (2.0 * d * diffusivity) if diffusivity > 0 else math.inf
    dt = cfl * min(advective, diffusive)
    if not math.isfinite(dt):
        raise NumericError("aucune contrainte de stabilité finie", term="dt")
    return dt


def max_diffusivity(state: FieldState, coeffs: CoefficientSet) -> float:
    rho, theta = state.rho, state.theta
    mu = mu_of(rho, coeffs)
    lam = lambda_of(rho, coeffs)
    candidates = (
        mu / rho,
        (3.0 * lam + 2.0 * mu) / rho,
        (2.0 * mu + lam) / rho,
        kappa_of(rho, theta, coeffs) / (coeffs.c_upsilon * rho),
        nu_of(rho, theta, coeffs),
    )
    return max(float(np.max(np.abs(c))) for c in candidates)


def stable_dt(state: FieldState, coeffs: CoefficientSet, cfl: float) -> float:
    """
    Pas de temps stable: advection magnétosonore et diffusion explicite

    Raises:
        NumericError: vitesse d'onde non finie
    """
    speed = float(np.max(np.sqrt(np.sum(state.u ** 2, axis=0)) + fast_speed(state, coeffs)))
    return cfl_time_step(min(state.grid.spacing), state.grid.d, speed,
                         max_diffusivity(state, coeffs), cfl)


def viscous_production_density(state: FieldState, coeffs: CoefficientSet,
                               scheme: str = "spectral") -> np.ndarray:
    """Ψ:∇u ponctuel"""
    grad_u = velocity_gradient(state, scheme)
    psi = stress_tensor(state, coeffs, scheme, grad_u=grad_u)
    return np.einsum("ij...,ij...->...", psi, grad_u)


def check_step_invariants(window: StepWindow, coeffs: CoefficientSet,
                          scheme: str = "spectral") -> Dict[str, float]:
    """
    Vérifie Ψ:∇u >= 0 ponctuellement et div H ≈ 0 après le pas

    Raises:
        NumericError: invariant violé
    """
    after = window.after
    grad_u = velocity_gradient(after, scheme)
    psi = stress_tensor(after, coeffs, scheme, grad_u=grad_u)
    production = np.einsum("ij...,ij...->...", psi, grad_u)
    scale = float(np.max(np.sqrt(np.sum(psi ** 2, axis=(0, 1)) * np.sum(grad_u ** 2, axis=(0, 1)))))
    minimum = float(np.min(production))
    if minimum < -STEP_LIMITS['production_tolerance'] * max(scale, 1e-300):
        raise NumericError(f"production visqueuse négative ({minimum:.3e}) à t = {after.time:.6g}",
                           term="viscous_production")
    ops = get_operators(after.grid, scheme)
    div_h = float(np.max(np.abs(ops.divergence(after.H))))
    h_norm = lp_norm(after.H, 2, after.grid)
    if div_h > STEP_LIMITS['div_tolerance'] * max(h_norm, 1e-300) and h_norm > 0:
        raise NumericError(f"div H = {div_h:.3e} dépasse la tolérance à t = {after.time:.6g}", term="div_H")
    return {'production_min': minimum, 'div_H_max': div_h}


@dataclass
class Progress:
    """Compteurs cumulés d'une intégration"""

    steps: int = 0
    flooring_events: int = 0


def advance_until(state: FieldState, coeffs: CoefficientSet, t_target: float, cfl: float,
                  scheme: str = "spectral", floors: Optional[Dict[str, float]] = None,
                  frozen: Iterable[str] = (), run_id: str = "",
                  progress: Optional[Progress] = None) -> FieldState:
    """
    Intègre jusqu'à t_target exactement, au pas stable (dernier pas raccourci)

    Chaque pas est suivi de check_step_invariants.
    """
    progress = progress if progress is not None else Progress()
    while state.time < t_target:
        dt = min(stable_dt(state, coeffs, cfl), t_target - state.time)
        window = advance(state, coeffs, dt, scheme=scheme, floors=floors, frozen=frozen, run_id=run_id)
        check_step_invariants(window, coeffs, scheme)
        state = window.after
        if t_target - state.time <= 1e-12 * max(1.0, abs(t_target)):
            state = state.replace(time=t_target)
        progress.steps += 1
        progress.flooring_events += window.flooring_events
        logger.debug(f"🔄 pas {progress.steps}: t = {state.time:.6g}, dt = {dt:.3e}")
    return state
