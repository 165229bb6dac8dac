"""
Grille périodique, état discret et opérateurs différentiels
==========================================================

Les champs vivent sur une grille périodique uniforme de dimension d ∈ {1,2,3}.
Vitesse et champ magnétique gardent toujours 3 composantes (convention 2.5-D):
les axes inactifs ont une dérivée nulle.

Deux schémas partagent la même interface:
- ``spectral``: dérivation de Fourier avec la règle des 2/3
- ``central``: différences centrées d'ordre 2, pour les vérifications croisées
"""

import logging
import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from errors import UsageError

logger = logging.getLogger(__name__)

SCHEMES = ("spectral", "central")

DEFAULT_FLOORS = {
    'rho': 1e-8,
    'theta': 1e-8,
}


@dataclass(frozen=True)
class Grid:
    """
    Grille périodique uniforme

    Args:
        dims (tuple): Points par axe actif (pairs, >= 4)
        lengths (tuple): Longueurs du domaine par axe actif
    """

    dims: Tuple[int, ...]
    lengths: Tuple[float, ...]

    def __post_init__(self):
        dims = tuple(int(n) for n in self.dims)
        lengths = tuple(float(x) for x in self.lengths)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "lengths", lengths)
        if not 1 <= len(dims) <= 3:
            raise UsageError(f"dimension {len(dims)} non supportée (1, 2 ou 3)")
        if len(lengths) != len(dims):
            raise UsageError(f"{len(dims)} tailles mais {len(lengths)} longueurs")
        for n in dims:
            if n < 4 or n % 2:
                raise UsageError(f"taille d'axe {n} invalide: entier pair >= 4 exigé")
        for length in lengths:
            if not length > 0:
                raise UsageError(f"longueur d'axe {length} invalide")

    @property
    def d(self) -> int:
        return len(self.dims)

    @property
    def spacing(self) -> Tuple[float, ...]:
        return tuple(length / n for length, n in zip(self.lengths, self.dims))

    @property
    def volume_element(self) -> float:
        return math.prod(self.spacing)

    @property
    def volume(self) -> float:
        return math.prod(self.lengths)

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.dims

    @property
    def vector_shape(self) -> Tuple[int, ...]:
        return (3,) + self.dims

    def coordinates(self) -> Tuple[np.ndarray, ...]:
        """Coordonnées des nœuds, une grille (indexing='ij') par axe actif"""
        axes = [np.arange(n) * h for n, h in zip(self.dims, self.spacing)]
        return tuple(np.meshgrid(*axes, indexing="ij"))

    def wavenumbers(self) -> Tuple[np.ndarray, ...]:
        """
        Nombres d'onde physiques du spectre rfftn, diffusables sur sa forme

        Le dernier axe actif est tronqué à la moitié (rfftfreq).
        """
        ks = []
        for axis, (n, length) in enumerate(zip(self.dims, self.lengths)):
            if axis == self.d - 1:
                k = 2.0 * np.pi * np.fft.rfftfreq(n, d=length / n)
            else:
                k = 2.0 * np.pi * np.fft.fftfreq(n, d=length / n)
            shape = [1] * self.d
            shape[axis] = k.size
            ks.append(k.reshape(shape))
        return tuple(ks)

    def mode_indices(self) -> Tuple[np.ndarray, ...]:
        """Indices entiers de mode (n = k L / 2π), même disposition que wavenumbers"""
        return tuple(np.rint(k * length / (2.0 * np.pi))
                     for k, length in zip(self.wavenumbers(), self.lengths))

    def spectral_weights(self) -> np.ndarray:
        """Multiplicité de chaque coefficient rfftn dans le spectre complet"""
        n_last = self.dims[-1]
        weights = np.full(n_last // 2 + 1, 2.0)
        weights[0] = 1.0
        weights[-1] = 1.0
        shape = [1] * self.d
        shape[-1] = weights.size
        return weights.reshape(shape)


@dataclass(frozen=True, eq=False)
class FieldState:
    """
    État discret (ρ, u, θ, H) à un instant donné

    Les tableaux sont copiés et verrouillés en écriture à la construction.
    """

    grid: Grid
    time: float
    rho: np.ndarray
    u: np.ndarray
    theta: np.ndarray
    H: np.ndarray

    def __post_init__(self):
        expected = {"rho": self.grid.dims, "theta": self.grid.dims,
                    "u": self.grid.vector_shape, "H": self.grid.vector_shape}
        for name, shape in expected.items():
            array = np.array(getattr(self, name), dtype=np.float64, copy=True)
            if array.shape != shape:
                raise UsageError(f"champ {name} de forme {array.shape}, attendu {shape}")
            array.flags.writeable = False
            object.__setattr__(self, name, array)
        object.__setattr__(self, "time", float(self.time))

    def replace(self, **changes) -> "FieldState":
        return replace(self, **changes)

    def max_abs(self) -> Dict[str, float]:
        return {
            'rho': float(np.max(np.abs(self.rho))),
            'u': float(np.max(np.sqrt(np.sum(self.u ** 2, axis=0)))),
            'theta': float(np.max(np.abs(self.theta))),
            'H': float(np.max(np.sqrt(np.sum(self.H ** 2, axis=0)))),
        }

    def copy_arrays(self) -> Dict[str, np.ndarray]:
        """Copies modifiables des quatre champs"""
        return {name: np.array(getattr(self, name)) for name in ("rho", "u", "theta", "H")}

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(getattr(self, name))) for name in ("rho", "u", "theta", "H"))


def constant_state(grid: Grid, rho: float = 1.0, theta: float = 1.0,
                   u: Sequence[float] = (0.0, 0.0, 0.0), H: Sequence[float] = (0.0, 0.0, 0.0),
                   time: float = 0.0) -> FieldState:
    """État uniforme (point fixe de la dynamique)"""
    ones = np.ones(grid.dims)
    return FieldState(
        grid=grid,
        time=time,
        rho=rho * ones,
        u=np.array([c * ones for c in u]),
        theta=theta * ones,
        H=np.array([c * ones for c in H]),
    )


# ---------------------------------------------------------------------------
# Opérateurs
# ---------------------------------------------------------------------------

class Operators:
    """
    Opérateurs gradient, divergence, rotationnel et projection de Leray

    Args:
        grid (Grid): Grille périodique
        scheme (str): 'spectral' (Fourier + 2/3) ou 'central' (ordre 2)
    """

    def __init__(self, grid: Grid, scheme: str = "spectral"):
        if scheme not in SCHEMES:
            raise UsageError(f"schéma {scheme!r} inconnu (choix: {', '.join(SCHEMES)})")
        self.grid = grid
        self.scheme = scheme
        self.axes = tuple(range(-grid.d, 0))
        self.k = grid.wavenumbers()
        modes = grid.mode_indices()
        self.dealias = np.ones(np.broadcast_shapes(*[m.shape for m in modes]), dtype=bool)
        for n_axis, size in zip(modes, grid.dims):
            self.dealias = self.dealias & (np.abs(n_axis) < size / 3.0)
        self.symbols = tuple(1j * k * self.dealias for k in self.k)
        # Symbole de la projection spectrale, nul sur le mode de Nyquist
        self.projection_symbols = tuple(np.where(2.0 * np.abs(n_axis) == size, 0.0, k)
                                        for k, n_axis, size in zip(self.k, modes, grid.dims))
        # Symbole des différences centrées, utilisé par la projection du schéma central
        self.central_symbols = tuple(np.sin(k * h) / h for k, h in zip(self.k, grid.spacing))

    # -- transformées --------------------------------------------------------
    def fft(self, field: np.ndarray) -> np.ndarray:
        return np.fft.rfftn(field, axes=self.axes)

    def ifft(self, spectrum: np.ndarray) -> np.ndarray:
        return np.fft.irfftn(spectrum, s=self.grid.dims, axes=self.axes)

    # -- dérivées scalaires ----------------------------------------------------
    def _check_scalar(self, field: np.ndarray, what: str):
        if field.shape != self.grid.dims:
            raise UsageError(f"{what}: champ scalaire de forme {self.grid.dims} attendu, reçu {field.shape}")

    def _check_vector(self, field: np.ndarray, what: str):
        if field.shape != self.grid.vector_shape:
            raise UsageError(f"{what}: champ vectoriel de forme {self.grid.vector_shape} attendu, reçu {field.shape}")

    def _central(self, field: np.ndarray, axis: int) -> np.ndarray:
        h = self.grid.spacing[axis]
        return (np.roll(field, -1, axis=axis) - np.roll(field, 1, axis=axis)) / (2.0 * h)

    def partials(self, field: np.ndarray) -> np.ndarray:
        """Les trois dérivées partielles d'un champ scalaire (nulles sur les axes inactifs)"""
        out = np.zeros((3,) + self.grid.dims)
        if self.scheme == "central":
            for axis in range(self.grid.d):
                out[axis] = self._central(field, axis)
            return out
        spectrum = self.fft(field)
        for axis in range(self.grid.d):
            out[axis] = self.ifft(self.symbols[axis] * spectrum)
        return out

    def gradient(self, field: np.ndarray) -> np.ndarray:
        self._check_scalar(field, "gradient")
        return self.partials(field)

    def divergence(self, field: np.ndarray) -> np.ndarray:
        self._check_vector(field, "divergence")
        if self.scheme == "central":
            total = np.zeros(self.grid.dims)
            for axis in range(self.grid.d):
                total += self._central(field[axis], axis)
            return total
        spectrum = np.zeros(self.fft(field[0]).shape, dtype=complex)
        for axis in range(self.grid.d):
            spectrum += self.symbols[axis] * self.fft(field[axis])
        return self.ifft(spectrum)

    def vector_gradient(self, field: np.ndarray) -> np.ndarray:
        """G[i, j] = ∂_j V_i"""
        self._check_vector(field, "gradient vectoriel")
        return np.stack([self.partials(field[i]) for i in range(3)])

    def curl(self, field: np.ndarray) -> np.ndarray:
        self._check_vector(field, "rotationnel")
        G = self.vector_gradient(field)
        return np.stack([
            G[2, 1] - G[1, 2],
            G[0, 2] - G[2, 0],
            G[1, 0] - G[0, 1],
        ])

    def tensor_divergence(self, tensor: np.ndarray) -> np.ndarray:
        """(div T)_i = Σ_j ∂_j T_ji"""
        if tensor.shape != (3, 3) + self.grid.dims:
            raise UsageError(f"divergence tensorielle: forme {(3, 3) + self.grid.dims} attendue, reçu {tensor.shape}")
        return np.stack([self.divergence(np.ascontiguousarray(tensor[:, i])) for i in range(3)])

    def laplacian(self, field: np.ndarray) -> np.ndarray:
        """Laplacien d'un champ scalaire"""
        self._check_scalar(field, "laplacien")
        if self.scheme == "central":
            total = np.zeros(self.grid.dims)
            for axis, h in enumerate(self.grid.spacing):
                total += (np.roll(field, -1, axis=axis) - 2.0 * field + np.roll(field, 1, axis=axis)) / (h * h)
            return total
        k2 = sum(k ** 2 for k in self.k)
        return self.ifft(-k2 * self.dealias * self.fft(field))

    # -- projection ------------------------------------------------------------
    def project(self, field: np.ndarray) -> np.ndarray:
        """Retire la partie gradient (projection de Leray–Helmholtz), mode moyen conservé"""
        self._check_vector(field, "projection")
        d = self.grid.d
        symbols = self.projection_symbols if self.scheme == "spectral" else self.central_symbols
        spectra = [self.fft(field[i]) for i in range(3)]
        norm2 = sum(s ** 2 for s in symbols)
        safe = np.where(norm2 > 0, norm2, 1.0)
        dot = sum(symbols[i] * spectra[i] for i in range(d))
        factor = np.where(norm2 > 0, dot / safe, 0.0)
        out = np.empty_like(field)
        for i in range(3):
            if i < d:
                out[i] = self.ifft(spectra[i] - symbols[i] * factor)
            else:
                out[i] = field[i]
        return out


@lru_cache(maxsize=16)
def get_operators(grid: Grid, scheme: str = "spectral") -> Operators:
    return Operators(grid, scheme)


def apply_derivative(kind: str, field: np.ndarray, grid: Grid, scheme: str = "spectral") -> np.ndarray:
    """
    Applique un opérateur différentiel

    Args:
        kind (str): 'gradient', 'divergence', 'curl' ou 'laplacian'
        field (np.ndarray): Champ scalaire (gradient) ou vectoriel (3, *dims)
        grid (Grid): Grille
        scheme (str): Schéma de dérivation

    Returns:
        np.ndarray: Champ dérivé
    """
    ops = get_operators(grid, scheme)
    field = np.asarray(field, dtype=float)
    if kind == "gradient":
        return ops.gradient(field)
    if kind == "divergence":
        return ops.divergence(field)
    if kind == "curl":
        return ops.curl(field)
    if kind == "laplacian":
        return ops.laplacian(field)
    raise UsageError(f"opérateur {kind!r} inconnu (gradient, divergence, curl, laplacian)")


def project_div_free(H: np.ndarray, grid: Grid, scheme: str = "spectral") -> np.ndarray:
    return get_operators(grid, scheme).project(np.asarray(H, dtype=float))


# ---------------------------------------------------------------------------
# Réductions
# ---------------------------------------------------------------------------

def compensated_sum(values: np.ndarray) -> float:
    """Somme exactement arrondie, ordre fixe (ligne par ligne)"""
    return math.fsum(np.ravel(np.asarray(values, dtype=float), order="C").tolist())


def integrate(field: np.ndarray, grid: Grid) -> float:
    """∫ f dx sur le tore"""
    return compensated_sum(field) * grid.volume_element


def pointwise_magnitude(field: np.ndarray, grid: Grid) -> np.ndarray:
    """|f| ponctuel: valeur absolue, norme euclidienne ou de Frobenius selon le rang"""
    field = np.asarray(field, dtype=float)
    extra = field.ndim - grid.d
    if extra < 0 or field.shape[extra:] != grid.dims:
        raise UsageError(f"champ de forme {field.shape} incompatible avec la grille {grid.dims}")
    if extra == 0:
        return np.abs(field)
    return np.sqrt(np.sum(field ** 2, axis=tuple(range(extra))))


def lp_norm(field: np.ndarray, p: float, grid: Grid, weight: Optional[np.ndarray] = None) -> float:
    """
    Norme L^p pondérée (Σ w |f|^p dV)^(1/p), ou max de w|f| pour p = ∞

    Raises:
        UsageError: p < 1 ou poids négatif
    """
    if not p >= 1:
        raise UsageError(f"exposant p = {p} invalide (p >= 1)")
    magnitude = pointwise_magnitude(field, grid)
    if weight is not None:
        weight = np.asarray(weight, dtype=float)
        if np.any(weight < 0):
            raise UsageError("poids négatif dans lp_norm")
    if math.isinf(p):
        values = magnitude if weight is None else weight * magnitude
        return float(np.max(values))
    integrand = magnitude ** p if weight is None else weight * magnitude ** p
    return integrate(integrand, grid) ** (1.0 / p)


def div_max(H: np.ndarray, grid: Grid, scheme: str = "spectral") -> float:
    return float(np.max(np.abs(get_operators(grid, scheme).divergence(H))))


# ---------------------------------------------------------------------------
# Planchers
# ---------------------------------------------------------------------------

def apply_floors(state: FieldState, rho_floor: float = DEFAULT_FLOORS['rho'],
                 theta_floor: float = DEFAULT_FLOORS['theta']) -> Tuple[FieldState, int]:
    """
    Impose ρ >= rho_floor et θ >= theta_floor

    Returns:
        Tuple[FieldState, int]: État plancherisé et nombre de points corrigés
    """
    low_rho = ~(state.rho >= rho_floor)
    low_theta = ~(state.theta >= theta_floor)
    count = int(np.count_nonzero(low_rho) + np.count_nonzero(low_theta))
    if count == 0:
        return state, 0
    logger.debug(f"⚠️ Plancher actif sur {count} point(s) à t = {state.time:.6g}")
    return state.replace(rho=np.where(low_rho, rho_floor, state.rho),
                         theta=np.where(low_theta, theta_floor, state.theta)), count


# ---------------------------------------------------------------------------
# Outils spectraux
# ---------------------------------------------------------------------------

def _smooth_step(x: np.ndarray) -> np.ndarray:
    """Transition C∞ de 0 (x <= 0) à 1 (x >= 1)"""
    x = np.clip(x, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        left = np.where(x > 0, np.exp(-1.0 / np.where(x > 0, x, 1.0)), 0.0)
        right = np.where(x < 1, np.exp(-1.0 / np.where(x < 1, 1.0 - x, 1.0)), 0.0)
    return left / (left + right)


def low_pass(field: np.ndarray, grid: Grid, eps: float) -> np.ndarray:
    """
    Filtre passe-bas lisse à support compact

    Transmission 1 pour |k|ε <= 1/2, 0 pour |k|ε >= 1.
    """
    ops = get_operators(grid)
    radius = np.sqrt(sum(k ** 2 for k in ops.k)) * eps
    transfer = 1.0 - _smooth_step(2.0 * radius - 1.0)
    field = np.asarray(field, dtype=float)
    if field.shape == grid.dims:
        return ops.ifft(transfer * ops.fft(field))
    return np.stack([ops.ifft(transfer * ops.fft(component)) for component in field])


def _power_spectrum(field: np.ndarray, grid: Grid) -> np.ndarray:
    ops = get_operators(grid)
    field = np.asarray(field, dtype=float)
    components = [field] if field.shape == grid.dims else list(field)
    return sum(np.abs(ops.fft(c)) ** 2 for c in components) * grid.spectral_weights()


def spectral_tail(field: np.ndarray, grid: Grid) -> float:
    """Part de l'énergie spectrale (hors mode moyen) dans le tiers supérieur des modes retenus"""
    power = _power_spectrum(field, grid)
    modes = grid.mode_indices()
    ratio = np.zeros(power.shape)
    for n_axis, size in zip(modes, grid.dims):
        ratio = np.maximum(ratio, np.abs(n_axis) / (size / 3.0))
    power = np.where(ratio > 0, power, 0.0)
    total = compensated_sum(power)
    if total <= 0:
        return 0.0
    return compensated_sum(np.where(ratio > 2.0 / 3.0, power, 0.0)) / total


def dyadic_shell_ratio(field: np.ndarray, grid: Grid) -> float:
    """
    Rapport maximal des amplitudes de couronnes dyadiques consécutives

    La couronne j regroupe les modes 2^j <= |k|/k0 < 2^(j+1), k0 = 2π/max(L).
    """
    power = _power_spectrum(field, grid)
    k0 = 2.0 * np.pi / max(grid.lengths)
    radius = np.sqrt(sum(k ** 2 for k in grid.wavenumbers())) / k0
    shells = np.full(radius.shape, -1, dtype=int)
    nonzero = radius >= 1.0 - 1e-12
    shells[nonzero] = np.floor(np.log2(radius[nonzero] + 1e-12)).astype(int)
    amplitudes = [math.sqrt(compensated_sum(np.where(shells == j, power, 0.0)))
                  for j in range(int(shells.max()) + 1)]
    if not amplitudes:
        return 0.0
    floor = 1e-12 * max(amplitudes)
    ratios = [amplitudes[j + 1] / amplitudes[j] for j in range(len(amplitudes) - 1) if amplitudes[j] > floor]
    return max(ratios) if ratios else 0.0


def screened_poisson_norm(field: np.ndarray, grid: Grid) -> float:
    """
    Substitut de norme H^{-1}: on résout (1 − Δ)ψ = f et on renvoie ‖ψ‖₂

    Le mode moyen passe inchangé (ψ̂₀ = f̂₀).
    """
    ops = get_operators(grid)
    field = np.asarray(field, dtype=float)
    components = [field] if field.shape == grid.dims else list(field)
    k2 = sum(k ** 2 for k in ops.k)
    psi = np.stack([ops.ifft(ops.fft(component) / (1.0 + k2)) for component in components])
    return lp_norm(psi[0] if field.shape == grid.dims else psi, 2, grid)
