"""
Configuration, persistance et boucle de simulation
==================================================

- Format de configuration texte ``section.cle = valeur`` avec commentaires ``#``
- Séries temporelles CSV (une ligne par instant de sortie)
- Instantanés binaires little-endian ``.mhde``
- Manifeste JSON écrit même en cas d'échec
"""

import glob
import hashlib
import json
import logging
import math
import os
import re
import struct
from dataclasses import asdict, dataclass, field, fields
from datetime import datetime
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from constitutive import CoefficientSet
from convergence_lab import SequenceSpec
from diagnostics import (DEFAULT_ALPHA_FRACTIONS, DEFAULT_TAIL_TOLERANCE, DiagnosticRecord,
                         csv_columns, diagnose_state)
from dynamics import FIELD_NAMES, Progress, advance_until
from errors import (ConfigError, MHDLabError, SnapshotError, SnapshotGridMismatchError,
                    SnapshotMagicError, SnapshotTruncatedError, SnapshotVersionError, UsageError)
from field_state import SCHEMES, FieldState, Grid, apply_floors
from initial_profiles import PROFILES, build_profile, profile_defaults

logger = logging.getLogger(__name__)

__version__ = "1.0.0"

# ---------------------------------------------------------------------------
# Schéma de configuration
# ---------------------------------------------------------------------------

REQUIRED = object()

_COEFFICIENT_DEFAULTS = CoefficientSet()

# clé -> (type, défaut, description)
CONFIG_SCHEMA: Dict[str, Tuple[str, object, str]] = {
    'grid.dims': ('int_list', REQUIRED, "points par axe actif (1 à 3 entiers pairs >= 4)"),
    'grid.lengths': ('float_list', None, "longueurs des axes (défaut 2pi par axe)"),
    'initial.profile': ('str', 'constant', "profil initial nommé"),
    'initial.snapshot': ('str', '', "instantané initial (prioritaire sur le profil)"),
    'run.t_final': ('float', REQUIRED, "horizon T > 0"),
    'run.cfl': ('float', 0.25, "nombre CFL dans ]0, 1]"),
    'run.scheme': ('str', 'spectral', "schéma de dérivation (spectral, central)"),
    'run.frozen': ('str_list', (), "champs gelés parmi rho, u, theta, H"),
    'run.rng_seed': ('int', 0, "graine des tests aléatoires"),
    'output.every': ('float', None, "intervalle entre sorties (défaut T/10)"),
    'output.directory': ('str', 'runs/default', "répertoire de sortie"),
    'floors.rho': ('float', 1e-8, "plancher de densité"),
    'floors.theta': ('float', 1e-8, "plancher de température"),
    'diagnostics.alphas': ('float_list', DEFAULT_ALPHA_FRACTIONS, "exposants α en fraction de a, dans ]0, 1/2]"),
    'diagnostics.tail_tolerance': ('float', DEFAULT_TAIL_TOLERANCE, "queue spectrale maximale fiable"),
    'sequence.eps0': ('float', 0.5, "échelle de mollification du membre 0"),
    'sequence.members': ('int', 4, "nombre de membres de la suite"),
    'sequence.outputs': ('int', 8, "instants de sortie par membre"),
    'sequence.t_final': ('float', 0.0, "horizon des membres (0 = dynamique gelée)"),
    'sequence.h_bound': ('float', math.inf, "borne signalée sur max|H|"),
    'sequence.floor_fraction': ('float', 0.01, "fraction maximale de points plancherisés"),
}
for _item in fields(CoefficientSet):
    _default = getattr(_COEFFICIENT_DEFAULTS, _item.name)
    CONFIG_SCHEMA[f"coefficients.{_item.name}"] = (
        'str' if isinstance(_default, str) else 'float', _default, "paramètre constitutif")

_PI_PATTERN = re.compile(r"^([+-]?[0-9.eE+-]*)\s*\*?\s*pi$")


def _parse_float(text: str) -> float:
    text = text.strip()
    match = _PI_PATTERN.match(text)
    if match:
        factor = match.group(1)
        return (float(factor) if factor not in ("", "+", "-") else float(factor + "1")) * math.pi
    return float(text)


def _parse_value(kind: str, text: str):
    items = [t.strip() for t in text.split(",") if t.strip()]
    if kind == 'float':
        return _parse_float(text)
    if kind == 'int':
        return int(text)
    if kind == 'str':
        return text
    if kind == 'float_list':
        return tuple(_parse_float(t) for t in items)
    if kind == 'int_list':
        return tuple(int(t) for t in items)
    if kind == 'str_list':
        return tuple(items)
    raise ValueError(f"type {kind} inconnu")


def _format_value(value) -> str:
    if isinstance(value, tuple):
        return ", ".join(_format_value(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass
class RunConfig:
    """
    Configuration validée, sous forme canonique (toutes les clés présentes)

    Args:
        values (dict): clé pointée -> valeur typée
        lines (dict): clé -> numéro de ligne dans le texte source
    """

    values: Dict[str, object]
    lines: Dict[str, int] = field(default_factory=dict, compare=False)

    def __getitem__(self, key: str):
        return self.values[key]

    @property
    def grid(self) -> Grid:
        return Grid(self['grid.dims'], self['grid.lengths'])

    @property
    def coeffs(self) -> CoefficientSet:
        return CoefficientSet(**{item.name: self[f"coefficients.{item.name}"] for item in fields(CoefficientSet)})

    @property
    def profile_params(self) -> Dict[str, object]:
        prefix = "initial."
        return {key[len(prefix):]: value for key, value in self.values.items()
                if key.startswith(prefix) and key not in CONFIG_SCHEMA}

    @property
    def floors(self) -> Dict[str, float]:
        return {'rho': self['floors.rho'], 'theta': self['floors.theta']}

    def output_times(self) -> List[float]:
        count = int(round(self['run.t_final'] / self['output.every']))
        return [self['run.t_final'] * k / count for k in range(count + 1)]

    def sequence_spec(self) -> SequenceSpec:
        return SequenceSpec(
            profile=self['initial.profile'],
            grid=self.grid,
            params=self.profile_params,
            eps0=self['sequence.eps0'],
            members=self['sequence.members'],
            coeffs=self.coeffs,
            t_final=self['sequence.t_final'],
            n_outputs=self['sequence.outputs'],
            cfl=self['run.cfl'],
            floors=self.floors,
            floor_fraction=self['sequence.floor_fraction'],
            h_bound=self['sequence.h_bound'],
            scheme=self['run.scheme'],
        )


def _coefficient_line(problem: str, lines: Dict[str, int]) -> Optional[int]:
    name = problem.split(" ", 1)[0]
    return lines.get(f"coefficients.{name}")


def parse_config(text: str, strict: bool = True) -> RunConfig:
    """
    Analyse et valide un texte de configuration

    Args:
        text (str): Contenu UTF-8
        strict (bool): Vérifie aussi les invariants des coefficients

    Returns:
        RunConfig: Configuration complète, valeurs par défaut remplies

    Raises:
        ConfigError: clé inconnue, manquante ou dupliquée, type invalide,
            invariant violé; le numéro de ligne est donné quand il existe
    """
    raw: Dict[str, Tuple[str, int]] = {}
    for number, line in enumerate(text.splitlines(), start=1):
        content = line.split("#", 1)[0].strip()
        if not content:
            continue
        if "=" not in content:
            raise ConfigError(f"'clé = valeur' attendu, reçu {content!r}", number)
        key, value = (part.strip() for part in content.split("=", 1))
        if "." not in key:
            raise ConfigError(f"clé {key!r} sans section", number)
        if key in raw:
            raise ConfigError(f"clé {key!r} déjà définie ligne {raw[key][1]}", number)
        raw[key] = (value, number)
    lines = {key: number for key, (_, number) in raw.items()}

    values: Dict[str, object] = {}
    for key, (kind, default, _) in CONFIG_SCHEMA.items():
        if key not in raw:
            if default is REQUIRED:
                raise ConfigError(f"clé obligatoire {key!r} absente")
            values[key] = default
            continue
        text_value, number = raw[key]
        try:
            values[key] = _parse_value(kind, text_value)
        except ValueError:
            raise ConfigError(f"{key}: valeur {text_value!r} invalide (type {kind})", number)

    profile = values['initial.profile']
    if profile not in PROFILES:
        raise ConfigError(f"profil {profile!r} inconnu (choix: {', '.join(sorted(PROFILES))})",
                          lines.get('initial.profile'))
    defaults = profile_defaults(profile)
    for key, (text_value, number) in raw.items():
        if key in CONFIG_SCHEMA:
            continue
        name = key.split(".", 1)[1]
        if not key.startswith("initial.") or name not in defaults:
            raise ConfigError(f"clé inconnue {key!r}", number)
    for name, default in defaults.items():
        key = f"initial.{name}"
        if key not in raw:
            values[key] = default
            continue
        text_value, number = raw[key]
        try:
            values[key] = int(text_value) if isinstance(default, int) else _parse_float(text_value)
        except ValueError:
            raise ConfigError(f"{key}: valeur {text_value!r} invalide", number)

    _validate(values, lines, strict)
    return RunConfig(values=values, lines=lines)


def _validate(values: Dict[str, object], lines: Dict[str, int], strict: bool):
    dims = values['grid.dims']
    if values['grid.lengths'] is None:
        values['grid.lengths'] = tuple(2.0 * math.pi for _ in dims)
    try:
        Grid(dims, values['grid.lengths'])
    except UsageError as e:
        raise ConfigError(str(e), lines.get('grid.dims'))

    t_final = values['run.t_final']
    if not t_final > 0:
        raise ConfigError(f"run.t_final = {t_final} doit être > 0", lines.get('run.t_final'))
    if not 0 < values['run.cfl'] <= 1:
        raise ConfigError(f"run.cfl = {values['run.cfl']} hors de ]0, 1]", lines.get('run.cfl'))
    if values['run.scheme'] not in SCHEMES:
        raise ConfigError(f"schéma {values['run.scheme']!r} inconnu", lines.get('run.scheme'))
    unknown = set(values['run.frozen']) - set(FIELD_NAMES)
    if unknown:
        raise ConfigError(f"champs gelés inconnus: {sorted(unknown)}", lines.get('run.frozen'))
    values['run.frozen'] = tuple(name for name in FIELD_NAMES if name in values['run.frozen'])

    if values['output.every'] is None:
        values['output.every'] = t_final / 10.0
    every = values['output.every']
    intervals = t_final / every if every > 0 else 0.0
    if not (every > 0 and intervals >= 1 - 1e-9 and abs(intervals - round(intervals)) <= 1e-9 * intervals):
        raise ConfigError(f"output.every = {every} doit diviser T = {t_final} (au moins 2 sorties)",
                          lines.get('output.every'))

    for name in ('floors.rho', 'floors.theta', 'diagnostics.tail_tolerance'):
        if not values[name] > 0:
            raise ConfigError(f"{name} = {values[name]} doit être > 0", lines.get(name))
    for fraction in values['diagnostics.alphas']:
        if not 0 < fraction <= 0.5:
            raise ConfigError(f"alpha = {fraction}·a hors de ]0, 1/2]", lines.get('diagnostics.alphas'))
    if values['sequence.members'] < 2:
        raise ConfigError("sequence.members doit être >= 2", lines.get('sequence.members'))

    if strict:
        coeffs = CoefficientSet(**{item.name: values[f"coefficients.{item.name}"]
                                   for item in fields(CoefficientSet)})
        problems = coeffs.invariant_violations()
        if problems:
            raise ConfigError(problems[0], _coefficient_line(problems[0], lines))


def load_config(path: str, strict: bool = True) -> RunConfig:
    with open(path, 'r', encoding='utf-8') as f:
        return parse_config(f.read(), strict=strict)


def serialize_config(config: RunConfig, exclude: Sequence[str] = ()) -> str:
    """Texte canonique: clés triées, flottants en repr"""
    return "".join(f"{key} = {_format_value(config.values[key])}\n"
                   for key in sorted(config.values) if key not in exclude)


# Clés sans effet sur les résultats, exclues de l'empreinte
HASH_EXCLUDED_KEYS = ('output.directory',)


def config_hash(config: RunConfig) -> str:
    """Empreinte sha256 du texte canonique, hors clés de HASH_EXCLUDED_KEYS"""
    text = serialize_config(config, exclude=HASH_EXCLUDED_KEYS)
    return hashlib.sha256(text.encode('utf-8')).hexdigest()


# ---------------------------------------------------------------------------
# Séries temporelles
# ---------------------------------------------------------------------------

class TimeseriesWriter:
    """
    Écrivain CSV en ajout seul, une ligne par DiagnosticRecord

    Args:
        path (str): Fichier CSV
        columns (Sequence[str]): Colonnes dans l'ordre figé
        append (bool): Poursuit un fichier existant sans réécrire l'en-tête
    """

    def __init__(self, path: str, columns: Sequence[str], append: bool = False):
        self.path = path
        self.columns = list(columns)
        if not (append and os.path.exists(path)):
            with open(path, 'w', encoding='utf-8', newline='') as f:
                f.write(",".join(self.columns) + "\n")

    def append(self, record: DiagnosticRecord):
        row = record.to_row()
        if list(row) != self.columns:
            raise UsageError("colonnes de l'enregistrement différentes de l'en-tête du CSV")
        frame = pd.DataFrame([row], columns=self.columns)
        with open(self.path, 'a', encoding='utf-8', newline='') as f:
            frame.to_csv(f, header=False, index=False, float_format='%.17g')


def write_timeseries(records: Sequence[DiagnosticRecord], path: str) -> str:
    alphas = records[0].alpha_fractions if records else DEFAULT_ALPHA_FRACTIONS
    writer = TimeseriesWriter(path, csv_columns(alphas))
    for record in records:
        writer.append(record)
    return path


def read_timeseries(path: str, alpha_fractions: Sequence[float] = DEFAULT_ALPHA_FRACTIONS) -> pd.DataFrame:
    """
    Relit un CSV de séries temporelles

    Raises:
        UsageError: en-tête différent des colonnes attendues
    """
    frame = pd.read_csv(path)
    expected = csv_columns(alpha_fractions)
    if list(frame.columns) != expected:
        raise UsageError(f"en-tête inattendu dans {path}")
    return frame


# ---------------------------------------------------------------------------
# Instantanés
# ---------------------------------------------------------------------------

SNAPSHOT_MAGIC = b"MHDE"
SNAPSHOT_VERSION = 1
_HEADER = struct.Struct("<4sII3I3dd")


def write_snapshot(state: FieldState, path: str) -> str:
    """En-tête little-endian puis ρ, u₁, u₂, u₃, θ, H₁, H₂, H₃ en float64 ligne par ligne"""
    grid = state.grid
    dims = list(grid.dims) + [1] * (3 - grid.d)
    lengths = list(grid.lengths) + [0.0] * (3 - grid.d)
    header = _HEADER.pack(SNAPSHOT_MAGIC, SNAPSHOT_VERSION, grid.d, *dims, *lengths, state.time)
    arrays = [state.rho, *state.u, state.theta, *state.H]
    with open(path, 'wb') as f:
        f.write(header)
        for array in arrays:
            f.write(np.ascontiguousarray(array, dtype='<f8').tobytes(order='C'))
    return path


def read_snapshot(path: str, grid: Optional[Grid] = None) -> FieldState:
    """
    Relit un instantané

    Raises:
        SnapshotMagicError, SnapshotVersionError, SnapshotTruncatedError,
        SnapshotGridMismatchError: chacune pour sa cause
    """
    with open(path, 'rb') as f:
        data = f.read()
    if len(data) < 4 or data[:4] != SNAPSHOT_MAGIC:
        if len(data) < 4:
            raise SnapshotTruncatedError(f"{path}: fichier tronqué ({len(data)} octets)")
        raise SnapshotMagicError(f"{path}: nombre magique {data[:4]!r} invalide")
    if len(data) < _HEADER.size:
        raise SnapshotTruncatedError(f"{path}: en-tête tronqué")
    _, version, d, n1, n2, n3, l1, l2, l3, time = _HEADER.unpack_from(data)
    if version != SNAPSHOT_VERSION:
        raise SnapshotVersionError(f"{path}: version {version} non supportée (attendu {SNAPSHOT_VERSION})")
    if not 1 <= d <= 3:
        raise SnapshotError(f"{path}: dimension {d} invalide")
    try:
        stored = Grid((n1, n2, n3)[:d], (l1, l2, l3)[:d])
    except UsageError as e:
        raise SnapshotError(f"{path}: grille invalide: {e}")
    if grid is not None and (grid.dims != stored.dims or grid.lengths != stored.lengths):
        raise SnapshotGridMismatchError(
            f"{path}: grille {stored.dims}/{stored.lengths} différente de {grid.dims}/{grid.lengths}")
    size = math.prod(stored.dims)
    expected = _HEADER.size + 8 * 8 * size
    if len(data) < expected:
        raise SnapshotTruncatedError(f"{path}: {len(data)} octets, {expected} attendus")
    if len(data) > expected:
        raise SnapshotError(f"{path}: {len(data) - expected} octets excédentaires")
    values = np.frombuffer(data, dtype='<f8', offset=_HEADER.size).astype(np.float64)
    blocks = values.reshape((8,) + stored.dims)
    return FieldState(grid=stored, time=time, rho=blocks[0], u=blocks[1:4], theta=blocks[4], H=blocks[5:8])


# ---------------------------------------------------------------------------
# Manifeste
# ---------------------------------------------------------------------------

@dataclass
class RunManifest:
    """Traçabilité d'un run: configuration, version, durée, compteurs, fichiers"""

    config_hash: str
    version: str = __version__
    started: str = ""
    finished: str = ""
    status: str = "running"
    failure: Optional[str] = None
    step_count: int = 0
    flooring_total: int = 0
    threads: int = 1
    final_record: Dict[str, float] = field(default_factory=dict)
    files: List[str] = field(default_factory=list)

    def write(self, path: str) -> str:
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(asdict(self), f, ensure_ascii=False, indent=2)
        return path

    @classmethod
    def read(cls, path: str) -> "RunManifest":
        with open(path, 'r', encoding='utf-8') as f:
            return cls(**json.load(f))


def record_summary(record: DiagnosticRecord) -> Dict[str, float]:
    return {
        'time': record.time,
        'total_energy': record.total_energy,
        'entropy_total': record.entropy_total,
        'mass': record.mass,
        'max_abs_residual': max(abs(v) for v in record.residuals().values()),
        'trusted': record.trusted,
    }


# ---------------------------------------------------------------------------
# Boucle de simulation
# ---------------------------------------------------------------------------

def snapshot_name(index: int) -> str:
    return f"snap_{index:04d}.mhde"


def _diagnose(state: FieldState, config: RunConfig) -> DiagnosticRecord:
    return diagnose_state(state, config.coeffs, config['run.cfl'], scheme=config['run.scheme'],
                          floors=config.floors, frozen=config['run.frozen'],
                          alpha_fractions=config['diagnostics.alphas'],
                          tail_tolerance=config['diagnostics.tail_tolerance'])


def _diagnose_batch(states: Sequence[FieldState], config: RunConfig, threads: int) -> List[DiagnosticRecord]:
    """Diagnostics d'états indépendants, rendus dans l'ordre des états"""
    if threads <= 1 or len(states) <= 1:
        return [_diagnose(state, config) for state in states]
    return Parallel(n_jobs=threads, prefer="threads")(delayed(_diagnose)(state, config) for state in states)


def _initial_state(config: RunConfig, resume: Optional[str]) -> FieldState:
    grid = config.grid
    if resume:
        logger.info(f"🔄 Reprise depuis {resume}")
        return read_snapshot(resume, grid)
    if config['initial.snapshot']:
        return read_snapshot(config['initial.snapshot'], grid)
    return build_profile(config['initial.profile'], grid, config.profile_params)


def run_simulation(config: RunConfig, out_dir: Optional[str] = None, threads: int = 1,
                   resume: Optional[str] = None) -> RunManifest:
    """
    Intègre la configuration et écrit séries, instantanés et manifeste

    Le manifeste est écrit dans tous les cas; son champ ``status`` vaut
    'ok' ou 'failed' (avec la cause).
    """
    out_dir = out_dir or config['output.directory']
    os.makedirs(out_dir, exist_ok=True)
    manifest = RunManifest(config_hash=config_hash(config), started=datetime.now().isoformat(),
                           threads=threads)
    config_path = os.path.join(out_dir, "config.cfg")
    with open(config_path, 'w', encoding='utf-8') as f:
        f.write(serialize_config(config))
    manifest.files.append("config.cfg")
    progress = Progress()
    try:
        coeffs = config.coeffs.check()
        state, floored = apply_floors(_initial_state(config, resume), config['floors.rho'], config['floors.theta'])
        if floored:
            logger.warning(f"⚠️ {floored} point(s) plancherisé(s) dans l'état initial")
        progress.flooring_events += floored

        csv_path = os.path.join(out_dir, "timeseries.csv")
        writer = TimeseriesWriter(csv_path, csv_columns(config['diagnostics.alphas']), append=bool(resume))
        manifest.files.append("timeseries.csv")
        pending: List[FieldState] = []

        def flush():
            batch = list(pending)
            pending.clear()
            for record in _diagnose_batch(batch, config, threads):
                writer.append(record)
                manifest.final_record = record_summary(record)
                logger.info(f"📊 t = {record.time:.6g}: E = {record.total_energy:.12e}, "
                            f"∫ρs = {record.entropy_total:.12e}")
                if not record.trusted:
                    logger.warning(f"⚠️ Queue spectrale {record.spectral_tail:.2e} à t = {record.time:.6g}")

        start = state.time
        try:
            for index, t_out in enumerate(config.output_times()):
                if resume and t_out <= start:
                    continue
                state = advance_until(state, coeffs, t_out, config['run.cfl'], scheme=config['run.scheme'],
                                      floors=config.floors, frozen=config['run.frozen'],
                                      run_id=manifest.config_hash, progress=progress)
                name = snapshot_name(index)
                write_snapshot(state, os.path.join(out_dir, name))
                manifest.files.append(name)
                pending.append(state)
                if len(pending) >= threads:
                    flush()
        finally:
            # Les sorties déjà intégrées sont diagnostiquées même après un échec
            flush()
        manifest.status = "ok"
        logger.info(f"✅ Run terminé: {progress.steps} pas, {len(manifest.files)} fichiers dans {out_dir}")
    except (MHDLabError, OSError) as e:
        manifest.status = "failed"
        manifest.failure = f"{type(e).__name__}: {e}"
        logger.error(f"❌ Échec du run: {e}")
    finally:
        manifest.step_count = progress.steps
        manifest.flooring_total = progress.flooring_events
        manifest.finished = datetime.now().isoformat()
        manifest.write(os.path.join(out_dir, "manifest.json"))
    return manifest


def diagnose_directory(run_dir: str, threads: int = 1) -> Tuple[str, List[DiagnosticRecord]]:
    """
    Recalcule les diagnostics depuis les instantanés d'un run

    Returns:
        Tuple[str, List[DiagnosticRecord]]: chemin de timeseries_rediag.csv et enregistrements
    """
    config = load_config(os.path.join(run_dir, "config.cfg"))
    paths = sorted(glob.glob(os.path.join(run_dir, "snap_*.mhde")))
    if not paths:
        raise UsageError(f"aucun instantané dans {run_dir}")
    grid = config.grid
    logger.info(f"🔄 Diagnostic de {len(paths)} instantané(s) avec {threads} thread(s)")
    records = Parallel(n_jobs=threads, prefer="threads")(
        delayed(_diagnose)(read_snapshot(path, grid), config) for path in paths)
    path = write_timeseries(records, os.path.join(run_dir, "timeseries_rediag.csv"))
    logger.info(f"📁 Séries recalculées: {path}")
    return path, records
