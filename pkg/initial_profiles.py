"""
Données initiales nommées
=========================

Chaque profil est une fonction ``profil(grid, **paramètres) -> FieldState``
dont les paramètres ont des valeurs par défaut. Les champs ne dépendent que
de la première coordonnée x, ce qui rend H à divergence nulle par
construction (H₁ constant) et permet les mêmes profils en d = 1, 2 ou 3.
"""

import inspect
import logging
from typing import Callable, Dict

import numpy as np

from errors import UsageError
from field_state import FieldState, Grid, constant_state

logger = logging.getLogger(__name__)


def constant(grid: Grid, rho: float = 1.0, theta: float = 1.0,
             u1: float = 0.0, u2: float = 0.0, u3: float = 0.0,
             H1: float = 0.0, H2: float = 0.0, H3: float = 0.0) -> FieldState:
    """État uniforme, point fixe de la dynamique"""
    return constant_state(grid, rho=rho, theta=theta, u=(u1, u2, u3), H=(H1, H2, H3))


def manufactured(grid: Grid, amplitude: float = 1.0, mode: int = 1) -> FieldState:
    """
    Champs lisses variant selon x seulement

    ρ = 1 + 0.2a sin(kx), u = a(0.1 sin kx, 0.1 cos kx, 0.05 sin 2kx),
    θ = 1 + 0.1a cos kx, H = (0.5, 0.2a sin kx, 0.1a cos kx)
    """
    x = grid.coordinates()[0]
    kx = mode * 2.0 * np.pi * x / grid.lengths[0]
    a = amplitude
    ones = np.ones(grid.dims)
    return FieldState(
        grid=grid,
        time=0.0,
        rho=1.0 + 0.2 * a * np.sin(kx),
        u=np.stack([0.1 * a * np.sin(kx), 0.1 * a * np.cos(kx), 0.05 * a * np.sin(2.0 * kx)]),
        theta=1.0 + 0.1 * a * np.cos(kx),
        H=np.stack([0.5 * ones, 0.2 * a * np.sin(kx), 0.1 * a * np.cos(kx)]),
    )


def resistive(grid: Grid, amplitude: float = 1.0, mode: int = 1) -> FieldState:
    """Fluide au repos, ρ = θ = 1, H = (0, a sin(kx), 0)"""
    x = grid.coordinates()[0]
    kx = mode * 2.0 * np.pi * x / grid.lengths[0]
    zeros = np.zeros(grid.dims)
    return FieldState(
        grid=grid,
        time=0.0,
        rho=np.ones(grid.dims),
        u=np.zeros(grid.vector_shape),
        theta=np.ones(grid.dims),
        H=np.stack([zeros, amplitude * np.sin(kx), zeros]),
    )


def lacunary(grid: Grid, q: float = 0.5, terms: int = 5, rho_amplitude: float = 0.3,
             u_amplitude: float = 0.1, theta_amplitude: float = 0.2, H_amplitude: float = 0.2) -> FieldState:
    """
    Série lacunaire Σ_{j<terms} q^j cos(2^j x) sur chaque champ

    Chaque octave porte exactement un mode, de sorte qu'un filtre dyadique
    retire une octave entière d'amplitude relative q.
    """
    if not 0 < q < 1:
        raise UsageError(f"q = {q} hors de ]0, 1[")
    x = 2.0 * np.pi * grid.coordinates()[0] / grid.lengths[0]
    cos_series = sum(q ** j * np.cos(2 ** j * x) for j in range(terms))
    sin_series = sum(q ** j * np.sin(2 ** j * x) for j in range(terms))
    zeros = np.zeros(grid.dims)
    return FieldState(
        grid=grid,
        time=0.0,
        rho=1.0 + rho_amplitude * cos_series,
        u=np.stack([u_amplitude * sin_series, u_amplitude * cos_series, zeros]),
        theta=1.0 + theta_amplitude * cos_series,
        H=np.stack([np.full(grid.dims, 0.5), H_amplitude * sin_series, zeros]),
    )


def vacuum_slab(grid: Grid, width: float = 0.5, rho_vacuum: float = 0.0) -> FieldState:
    """
    Tranche de densité 1 entourée de vide (ρ = rho_vacuum)

    Non admissible telle quelle: sert à éprouver les planchers.
    """
    x = grid.coordinates()[0] / grid.lengths[0]
    inside = np.abs(x - 0.5) < 0.5 * width
    return FieldState(
        grid=grid,
        time=0.0,
        rho=np.where(inside, 1.0, rho_vacuum),
        u=np.zeros(grid.vector_shape),
        theta=np.ones(grid.dims),
        H=np.zeros(grid.vector_shape),
    )


PROFILES: Dict[str, Callable[..., FieldState]] = {
    'constant': constant,
    'manufactured': manufactured,
    'resistive': resistive,
    'lacunary': lacunary,
    'vacuum_slab': vacuum_slab,
}


def profile_defaults(name: str) -> Dict[str, object]:
    """Paramètres acceptés par un profil et leurs valeurs par défaut"""
    if name not in PROFILES:
        raise UsageError(f"profil {name!r} inconnu (choix: {', '.join(sorted(PROFILES))})")
    signature = inspect.signature(PROFILES[name])
    return {key: p.default for key, p in signature.parameters.items() if key != "grid"}


def build_profile(name: str, grid: Grid, params: Dict[str, object] = None) -> FieldState:
    """
    Construit un profil nommé

    Raises:
        UsageError: profil ou paramètre inconnu
    """
    params = dict(params or {})
    defaults = profile_defaults(name)
    unknown = set(params) - set(defaults)
    if unknown:
        raise UsageError(f"paramètres inconnus pour le profil {name!r}: {sorted(unknown)}")
    logger.debug(f"🔄 Profil initial {name} avec {params}")
    return PROFILES[name](grid, **params)
