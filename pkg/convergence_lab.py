"""
Laboratoire de convergence des suites de données mollifiées
===========================================================

Une suite de données initiales est obtenue en filtrant un profil de base à
des échelles ε_n = ε₀/2ⁿ. Chaque membre est intégré jusqu'à T, puis on mesure:
- les distances de Cauchy entre membres consécutifs (normes fortes de
  différences, étiquetées « proxy »)
- les modules de compacité en temps et en espace de chaque trajectoire
- un verdict par champ: « contracting » ou « stalled »
"""

import json
import logging
import math
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from scipy.integrate import trapezoid

from constitutive import CoefficientSet, REFERENCE_COEFFICIENTS, mu_of
from dynamics import Progress, advance_until, strain_rate
from errors import MHDLabError, SequenceError, UsageError
from field_state import (DEFAULT_FLOORS, FieldState, Grid, apply_floors, dyadic_shell_ratio,
                         get_operators, low_pass, lp_norm, screened_poisson_norm)
from initial_profiles import build_profile

logger = logging.getLogger(__name__)

# Exposants retenus pour les normes de distance (espace, temps)
DISTANCE_NORMS = {
    'rho': {'space': 2.0, 'time': math.inf, 'label': 'd_rho_proxy[Linf_t L2_x]'},
    'momentum': {'space': 1.5, 'time': 2.0, 'label': 'd_momentum_proxy[L2_t L3/2_x]'},
    'theta': {'space': 3.0, 'time': 2.0, 'label': 'd_theta_proxy[L2_t L3_x]'},
    'H': {'space': 2.0, 'time': 2.0, 'label': 'd_H_proxy[L2_t L2_x]'},
}

VERDICT_WINDOW = 3
MIN_COMPACTNESS_OUTPUTS = 8
MODULUS_NAMES = ('time_modulus', 'space_modulus', 'density_time_modulus',
                 'density_space_modulus', 'magnetic_time_modulus')


@dataclass
class SequenceSpec:
    """
    Description d'une suite de données initiales mollifiées

    Args:
        profile (str): Profil de base (initial_profiles)
        params (dict): Paramètres du profil
        grid (Grid): Grille commune
        eps0 (float): Échelle de mollification du membre 0
        members (int): Nombre de membres (N + 1)
        coeffs (CoefficientSet): Coefficients communs
        t_final (float): Horizon T (0 = dynamique gelée)
        n_outputs (int): Nombre d'instants de sortie, t = 0 et T compris
        floor_fraction (float): Fraction maximale de points plancherisés
        h_bound (float): Borne signalée sur max|H|
    """

    profile: str
    grid: Grid
    params: Dict[str, object] = field(default_factory=dict)
    eps0: float = 0.5
    members: int = 4
    coeffs: CoefficientSet = REFERENCE_COEFFICIENTS
    t_final: float = 0.0
    n_outputs: int = 8
    cfl: float = 0.25
    floors: Dict[str, float] = field(default_factory=lambda: dict(DEFAULT_FLOORS))
    floor_fraction: float = 0.01
    h_bound: float = math.inf
    scheme: str = "spectral"

    def __post_init__(self):
        if self.members < 2:
            raise UsageError(f"members = {self.members}: au moins deux membres")
        if not self.eps0 > 0:
            raise UsageError(f"eps0 = {self.eps0} doit être > 0")
        if self.t_final < 0:
            raise UsageError(f"t_final = {self.t_final} doit être >= 0")
        if self.n_outputs < 1 or (self.t_final > 0 and self.n_outputs < 2):
            raise UsageError(f"n_outputs = {self.n_outputs} insuffisant")

    def eps(self, n: int) -> float:
        return self.eps0 / 2.0 ** n

    def output_times(self) -> List[float]:
        if self.t_final == 0:
            return [0.0]
        count = self.n_outputs - 1
        return [self.t_final * k / count for k in range(self.n_outputs)]


def mollify(state: FieldState, eps: float, spec: SequenceSpec) -> FieldState:
    """Filtre passe-bas à l'échelle eps, planchers puis projection de H"""
    grid = state.grid
    smoothed = state.replace(
        rho=low_pass(state.rho, grid, eps),
        u=low_pass(state.u, grid, eps),
        theta=low_pass(state.theta, grid, eps),
        H=get_operators(grid, spec.scheme).project(low_pass(state.H, grid, eps)),
    )
    floored, count = apply_floors(smoothed, spec.floors['rho'], spec.floors['theta'])
    fraction = count / (2.0 * smoothed.rho.size)
    if fraction > spec.floor_fraction:
        raise SequenceError(
            f"mollification à ε = {eps:.4g}: {fraction:.1%} des points plancherisés "
            f"(maximum {spec.floor_fraction:.1%})")
    if count:
        logger.warning(f"⚠️ Mollification à ε = {eps:.4g}: {count} point(s) plancherisé(s)")
    return floored


def make_sequence(spec: SequenceSpec) -> List[FieldState]:
    """
    Membres initiaux de la suite

    Returns:
        List[FieldState]: membre n = profil de base filtré à ε_n

    Raises:
        SequenceError: trop de points plancherisés
    """
    base = build_profile(spec.profile, spec.grid, spec.params)
    return [mollify(base, spec.eps(n), spec) for n in range(spec.members)]


@dataclass
class MemberTrajectory:
    """Trajectoire d'un membre aux instants de sortie"""

    index: int
    eps: float
    times: List[float] = field(default_factory=list)
    states: List[FieldState] = field(default_factory=list)
    steps: int = 0
    flooring_events: int = 0
    failure: Optional[str] = None

    @property
    def failed(self) -> bool:
        return self.failure is not None

    def max_H(self) -> float:
        if not self.states:
            return math.nan
        return max(s.max_abs()['H'] for s in self.states)


def _run_member(index: int, initial: FieldState, spec: SequenceSpec) -> MemberTrajectory:
    trajectory = MemberTrajectory(index=index, eps=spec.eps(index))
    progress = Progress()
    state = initial
    try:
        for t_out in spec.output_times():
            state = advance_until(state, spec.coeffs, t_out, spec.cfl, scheme=spec.scheme,
                                  floors=spec.floors, run_id=f"member-{index}", progress=progress)
            trajectory.times.append(t_out)
            trajectory.states.append(state)
    except MHDLabError as e:
        trajectory.failure = f"{type(e).__name__}: {e}"
        logger.error(f"❌ Membre {index} interrompu à t = {state.time:.6g}: {e}")
    trajectory.steps = progress.steps
    trajectory.flooring_events = progress.flooring_events
    return trajectory


# ---------------------------------------------------------------------------
# Distances
# ---------------------------------------------------------------------------

def time_norm(values: Sequence[float], times: Sequence[float], p: float) -> float:
    """Norme L^p en temps (trapèzes); valeur unique si un seul instant"""
    values = np.asarray(values, dtype=float)
    if values.size == 1:
        return float(values[0])
    if math.isinf(p):
        return float(np.max(values))
    return float(trapezoid(values ** p, np.asarray(times, dtype=float)) ** (1.0 / p))


def _field_difference(name: str, a: FieldState, b: FieldState) -> np.ndarray:
    if name == 'momentum':
        return a.rho * a.u - b.rho * b.u
    return getattr(a, name) - getattr(b, name)


def pair_distances(first: MemberTrajectory, second: MemberTrajectory) -> Dict[str, float]:
    """Distances entre deux trajectoires aux mêmes instants de sortie"""
    if first.failed or second.failed:
        return {name: math.nan for name in DISTANCE_NORMS}
    if first.times != second.times:
        raise UsageError("trajectoires échantillonnées à des instants différents")
    grid = first.states[0].grid
    distances = {}
    for name, norms in DISTANCE_NORMS.items():
        values = [lp_norm(_field_difference(name, a, b), norms['space'], grid)
                  for a, b in zip(first.states, second.states)]
        distances[name] = time_norm(values, first.times, norms['time'])
    return distances


def verdict(distances: Sequence[float]) -> str:
    """« contracting » si les dernières distances décroissent au sens large"""
    tail = list(distances)[-VERDICT_WINDOW:]
    if any(not math.isfinite(d) for d in tail):
        return "stalled"
    if all(later <= earlier for earlier, later in zip(tail, tail[1:])):
        return "contracting"
    return "stalled"


def measured_ratio(distances: Sequence[float]) -> float:
    """Plus grand rapport d(n+1)/d(n) parmi les distances non nulles"""
    ratios = [b / a for a, b in zip(distances, distances[1:])
              if math.isfinite(a) and math.isfinite(b) and a > 0]
    return max(ratios) if ratios else 0.0


# ---------------------------------------------------------------------------
# Modules de compacité
# ---------------------------------------------------------------------------

def compactness_check(states: Sequence[FieldState], m: float = REFERENCE_COEFFICIENTS.m,
                      scheme: str = "spectral") -> Dict[str, float]:
    """
    Modules de compacité d'une trajectoire

    Returns:
        Dict: time_modulus (H^{-1} de Δ(ρu)/δ), space_modulus (‖∇(ρu)‖_L¹),
        density_time_modulus et density_space_modulus (ρ^m en L^{3/2}),
        magnetic_time_modulus (H^{-1} de ΔH/δ)

    Raises:
        UsageError: moins de 8 instants ou instants non croissants
    """
    if len(states) < MIN_COMPACTNESS_OUTPUTS:
        raise UsageError(f"{len(states)} instants de sortie: au moins {MIN_COMPACTNESS_OUTPUTS} requis")
    grid = states[0].grid
    ops = get_operators(grid, scheme)
    moduli = {'time_modulus': 0.0, 'space_modulus': 0.0, 'density_time_modulus': 0.0,
              'density_space_modulus': 0.0, 'magnetic_time_modulus': 0.0}
    for state in states:
        momentum = state.rho * state.u
        moduli['space_modulus'] = max(moduli['space_modulus'],
                                      lp_norm(ops.vector_gradient(momentum), 1, grid))
        moduli['density_space_modulus'] = max(moduli['density_space_modulus'],
                                              lp_norm(ops.gradient(state.rho ** m), 1.5, grid))
    for before, after in zip(states, states[1:]):
        delta = after.time - before.time
        if not delta > 0:
            raise UsageError(f"instants non croissants: {before.time} puis {after.time}")
        moduli['time_modulus'] = max(moduli['time_modulus'], screened_poisson_norm(
            after.rho * after.u - before.rho * before.u, grid) / delta)
        moduli['density_time_modulus'] = max(moduli['density_time_modulus'], lp_norm(
            after.rho ** m - before.rho ** m, 1.5, grid) / delta)
        moduli['magnetic_time_modulus'] = max(moduli['magnetic_time_modulus'], screened_poisson_norm(
            after.H - before.H, grid) / delta)
    return moduli


def viscous_flux_split_residual(state: FieldState, coeffs: CoefficientSet, scheme: str = "spectral") -> float:
    """
    Écart relatif L² entre μD(u) et D(μu) − ½(√ρu⊗∇μ/√ρ + transposée)

    Les deux expressions coïncident au continu; l'écart mesure l'erreur du
    produit discret.
    """
    grid = state.grid
    ops = get_operators(grid, scheme)
    mu = mu_of(state.rho, coeffs)
    direct = mu * strain_rate(ops.vector_gradient(state.u))
    sqrt_rho = np.sqrt(state.rho)
    flux = np.einsum("i...,j...->ij...", sqrt_rho * state.u, ops.gradient(mu) / sqrt_rho)
    split = strain_rate(ops.vector_gradient(mu * state.u)) - 0.5 * (flux + np.swapaxes(flux, 0, 1))
    scale = lp_norm(direct, 2, grid)
    mismatch = lp_norm(direct - split, 2, grid)
    return mismatch / scale if scale > 0 else mismatch


# ---------------------------------------------------------------------------
# Rapport
# ---------------------------------------------------------------------------

@dataclass
class ConvergenceReport:
    """Distances par paire, modules par membre et verdicts par champ"""

    spec: SequenceSpec
    pairs: List[Dict[str, float]]
    members: List[Dict[str, object]]
    verdicts: Dict[str, str]
    ratios: Dict[str, float]
    tail_ratio: float
    failed_members: List[Tuple[int, str]] = field(default_factory=list)

    @property
    def complete(self) -> bool:
        return not self.failed_members

    def distances(self, name: str) -> List[float]:
        return [pair[name] for pair in self.pairs]

    def to_frame(self) -> pd.DataFrame:
        """Une ligne par paire puis une ligne par membre"""
        rows = []
        for n, pair in enumerate(self.pairs):
            row = {'kind': 'pair', 'index': n, 'eps': self.spec.eps(n)}
            row.update({DISTANCE_NORMS[name]['label']: value for name, value in pair.items()})
            rows.append(row)
        for member in self.members:
            row = {'kind': 'member'}
            row.update({f"{key}_proxy" if key in MODULUS_NAMES else key: value
                        for key, value in member.items()})
            rows.append(row)
        return pd.DataFrame(rows)

    def summary(self) -> Dict[str, object]:
        return {
            'profile': self.spec.profile,
            'params': self.spec.params,
            'eps0': self.spec.eps0,
            'members': self.spec.members,
            't_final': self.spec.t_final,
            'n_outputs': self.spec.n_outputs,
            'distance_norms': {name: {'space': n['space'], 'time': n['time']}
                               for name, n in DISTANCE_NORMS.items()},
            'verdicts': self.verdicts,
            'measured_ratios': self.ratios,
            'spectral_tail_ratio': self.tail_ratio,
            'failed_members': [{'index': i, 'cause': cause} for i, cause in self.failed_members],
        }

    def render(self) -> str:
        """Bloc de verdict lisible"""
        lines = [
            "╔" + "═" * 78 + "╗",
            "║" + "LABORATOIRE DE CONVERGENCE".center(78) + "║",
            "╚" + "═" * 78 + "╝",
            "",
            f"📋 Profil {self.spec.profile}, {self.spec.members} membres, ε₀ = {self.spec.eps0:g}, T = {self.spec.t_final:g}",
            "",
            "📐 NORMES DES DISTANCES (proxy):",
        ]
        for name, norms in DISTANCE_NORMS.items():
            lines.append(f"   • {name:<9} espace L^{norms['space']:g}, temps L^{norms['time']:g}")
        lines.append("")
        lines.append("📊 DISTANCES PAR PAIRE:")
        for n, pair in enumerate(self.pairs):
            values = " | ".join(f"{name} {value:.3e}" for name, value in pair.items())
            lines.append(f"   ({n}, {n + 1}) {values}")
        lines.append("")
        lines.append(f"🎯 VERDICTS (rapport spectral de la base: {self.tail_ratio:.4f}):")
        for name, outcome in self.verdicts.items():
            mark = "✅" if outcome == "contracting" else "⚠️"
            lines.append(f"   {mark} {name:<9} {outcome:<12} rapport mesuré {self.ratios[name]:.4f}")
        for index, cause in self.failed_members:
            lines.append(f"   ❌ membre {index}: {cause}")
        lines.append("=" * 80)
        return "\n".join(lines)

    def save(self, directory: str) -> Dict[str, str]:
        """Écrit convergence.csv et convergence_summary.json"""
        os.makedirs(directory, exist_ok=True)
        csv_path = os.path.join(directory, "convergence.csv")
        json_path = os.path.join(directory, "convergence_summary.json")
        self.to_frame().to_csv(csv_path, index=False, float_format="%.17g")
        with open(json_path, 'w', encoding='utf-8') as f:
            json.dump(self.summary(), f, ensure_ascii=False, indent=2, default=str)
        logger.info(f"📁 Rapport de convergence sauvegardé: {csv_path}")
        return {'csv': csv_path, 'summary': json_path}


def _member_row(trajectory: MemberTrajectory, spec: SequenceSpec) -> Dict[str, object]:
    row = {'index': trajectory.index, 'eps': trajectory.eps, 'steps': trajectory.steps,
           'flooring_events': trajectory.flooring_events, 'failure': trajectory.failure or "",
           'max_H': trajectory.max_H()}
    row['h_bound_exceeded'] = bool(row['max_H'] > spec.h_bound)
    if row['h_bound_exceeded']:
        logger.warning(f"⚠️ Membre {trajectory.index}: max|H| = {row['max_H']:.3e} dépasse {spec.h_bound:g}")
    if not trajectory.failed and len(trajectory.states) >= MIN_COMPACTNESS_OUTPUTS:
        row.update(compactness_check(trajectory.states, spec.coeffs.m, spec.scheme))
    if trajectory.states:
        row['viscous_flux_split_residual'] = viscous_flux_split_residual(
            trajectory.states[-1], spec.coeffs, spec.scheme)
    return row


def run_sequence(spec: SequenceSpec, threads: int = 1) -> ConvergenceReport:
    """
    Intègre chaque membre et assemble le rapport

    Les membres tournent en parallèle (threads); l'assemblage suit l'ordre
    des membres, donc le rapport ne dépend pas du nombre de threads.
    """
    spec.coeffs.check()
    initial = make_sequence(spec)
    logger.info(f"🔄 Suite {spec.profile}: {spec.members} membres jusqu'à T = {spec.t_final:g}")
    trajectories = Parallel(n_jobs=threads, prefer="threads")(
        delayed(_run_member)(n, state, spec) for n, state in enumerate(initial))

    pairs = [pair_distances(a, b) for a, b in zip(trajectories, trajectories[1:])]
    verdicts = {name: verdict([p[name] for p in pairs]) for name in DISTANCE_NORMS}
    ratios = {name: measured_ratio([p[name] for p in pairs]) for name in DISTANCE_NORMS}
    base = build_profile(spec.profile, spec.grid, spec.params)
    failed = [(t.index, t.failure) for t in trajectories if t.failed]
    for index, _ in failed:
        logger.warning(f"⚠️ Rapport partiel: membre {index} en échec")

    report = ConvergenceReport(
        spec=spec,
        pairs=pairs,
        members=[_member_row(t, spec) for t in trajectories],
        verdicts=verdicts,
        ratios=ratios,
        tail_ratio=dyadic_shell_ratio(base.rho, spec.grid),
        failed_members=failed,
    )
    logger.info(f"✅ Verdicts: {verdicts}")
    return report
