#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Ligne de commande du laboratoire MHD
===================================

Sous-commandes:
    validate-coeffs  Vérifie les hypothèses de croissance d'un jeu de coefficients
    run              Intègre une configuration (séries, instantanés, manifeste)
    diagnose         Recalcule les diagnostics depuis les instantanés d'un run
    converge         Lance une suite mollifiée et émet le rapport de convergence

Codes de sortie: 0 succès, 1 échec d'exécution, 2 usage incorrect.
"""

import argparse
import logging
import os
import sys
from datetime import datetime
from typing import List, Optional

from constitutive import derived_exponents, validate_hypotheses
from convergence_lab import run_sequence
from diagnostics import render_record
from errors import ConfigError, MHDLabError
from runner_io import (RunManifest, __version__, diagnose_directory, load_config,
                       run_simulation)

logger = logging.getLogger(__name__)


def _config_path(args) -> str:
    path = args.config_option or args.config
    if not path:
        args.parser.error("chemin de configuration requis (positionnel ou --config)")
    return path


def cmd_validate_coeffs(args) -> int:
    config = load_config(_config_path(args), strict=False)
    coeffs = config.coeffs
    report = validate_hypotheses(coeffs)
    print(report.to_table())
    violations = coeffs.invariant_violations()
    for problem in violations:
        print(f"❌ {problem}")
    if not violations:
        exponents = derived_exponents(coeffs)
        print(f"\n📐 Exposants dérivés: p_density = {exponents.p_density:g}, "
              f"marge vitesse = {exponents.velocity_margin:.4g}")
    ok = report.all_passed and not violations
    logger.info("✅ Hypothèses satisfaites" if ok else "❌ Hypothèses violées")
    return 0 if ok else 1


def cmd_run(args) -> int:
    try:
        config = load_config(_config_path(args))
    except ConfigError as e:
        if args.out:
            os.makedirs(args.out, exist_ok=True)
            RunManifest(config_hash="", started=datetime.now().isoformat(), status="failed",
                        failure=f"ConfigError: {e}", finished=datetime.now().isoformat()
                        ).write(os.path.join(args.out, "manifest.json"))
        raise
    manifest = run_simulation(config, out_dir=args.out, threads=args.threads, resume=args.resume)
    if manifest.status != "ok":
        print(f"❌ {manifest.failure}")
        return 1
    print(f"✅ {manifest.step_count} pas, résumé final: {manifest.final_record}")
    return 0


def cmd_diagnose(args) -> int:
    path, records = diagnose_directory(args.run_dir, threads=args.threads)
    print(render_record(records[-1]))
    print(f"📁 {path}")
    return 0


def cmd_converge(args) -> int:
    config = load_config(_config_path(args))
    report = run_sequence(config.sequence_spec(), threads=args.threads)
    out_dir = args.out or os.path.join(config['output.directory'], "converge")
    report.save(out_dir)
    print(report.render())
    return 0 if report.complete else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mhd_entropy_cli",
                                     description="Laboratoire MHD compressible: entropie BD et diagnostics")
    parser.add_argument('--version', action='version', version=__version__)
    parser.add_argument('--verbose', action='store_true', help='Journalisation DEBUG')
    subparsers = parser.add_subparsers(dest='command', required=True)

    def with_config(sub):
        sub.add_argument('config', nargs='?', help='Fichier de configuration')
        sub.add_argument('--config', dest='config_option', help='Fichier de configuration')
        sub.set_defaults(parser=sub)

    sub = subparsers.add_parser('validate-coeffs', help='Vérifie les hypothèses des coefficients')
    with_config(sub)
    sub.set_defaults(handler=cmd_validate_coeffs)

    sub = subparsers.add_parser('run', help='Intègre une configuration')
    with_config(sub)
    sub.add_argument('--out', help='Répertoire de sortie (défaut output.directory)')
    sub.add_argument('--threads', type=int, default=1, help='Sorties diagnostiquées en parallèle (vitesse seulement)')
    sub.add_argument('--resume', help='Instantané de reprise')
    sub.set_defaults(handler=cmd_run)

    sub = subparsers.add_parser('diagnose', help='Recalcule les diagnostics d\'un run')
    sub.add_argument('run_dir', help='Répertoire du run')
    sub.add_argument('--threads', type=int, default=1, help='Threads (vitesse seulement)')
    sub.set_defaults(handler=cmd_diagnose, parser=sub)

    sub = subparsers.add_parser('converge', help='Suite mollifiée et rapport de convergence')
    with_config(sub)
    sub.add_argument('--out', help='Répertoire du rapport')
    sub.add_argument('--threads', type=int, default=1, help='Membres intégrés en parallèle')
    sub.set_defaults(handler=cmd_converge)
    return parser


def cli(argv: Optional[List[str]] = None) -> int:
    """Point d'entrée; renvoie le code de sortie"""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    logging.getLogger().setLevel(logging.DEBUG if args.verbose else logging.INFO)
    if getattr(args, 'threads', 1) < 1:
        print("❌ --threads doit être >= 1", file=sys.stderr)
        return 2
    try:
        return args.handler(args)
    except SystemExit as e:
        return int(e.code or 0)
    except (MHDLabError, OSError) as e:
        logger.error(f"❌ {type(e).__name__}: {e}")
        return 1


if __name__ == "__main__":
    logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(levelname)s - %(message)s')
    sys.exit(cli())
