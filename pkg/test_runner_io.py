#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Tests de la configuration, des instantanés et de la boucle de simulation
"""

import sys
import os
import math
import struct
import tempfile

import numpy as np
import pandas as pd
import pytest

# Ajouter le répertoire du projet au path pour importer les modules
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from diagnostics import CSV_COLUMNS
from errors import (ConfigError, SnapshotGridMismatchError, SnapshotMagicError,
                    SnapshotTruncatedError, SnapshotVersionError, UsageError)
from field_state import FieldState, Grid
from runner_io import (RunManifest, config_hash, diagnose_directory, load_config, parse_config,
                       read_snapshot, read_timeseries, run_simulation, serialize_config,
                       write_snapshot)

HERE = os.path.dirname(os.path.abspath(__file__))
CONFIGS = os.path.join(HERE, "configs")

MINIMAL = """\
grid.dims = 32
run.t_final = 1.0
"""


def random_state(seed: int) -> FieldState:
    rng = np.random.default_rng(seed)
    grid = Grid((8, 6), (1.0, 2.5))
    return FieldState(grid, 0.375, 1.0 + rng.random(grid.dims), rng.standard_normal(grid.vector_shape),
                      1.0 + rng.random(grid.dims), rng.standard_normal(grid.vector_shape))


def test_reference_config_loads():
    config = load_config(os.path.join(CONFIGS, "reference.cfg"))
    assert config.grid.dims == (64,)
    assert config.grid.lengths[0] == pytest.approx(2.0 * math.pi)
    assert config['initial.profile'] == "manufactured"
    assert config.profile_params == {'amplitude': 1.0, 'mode': 1}
    assert config.output_times() == pytest.approx([0.0, 0.05, 0.1])
    assert config.coeffs.beta == 0.8


def test_defaults_filled():
    config = parse_config(MINIMAL)
    assert config['grid.lengths'] == pytest.approx((2.0 * math.pi,))
    assert config['output.every'] == pytest.approx(0.1)
    assert config['run.cfl'] == 0.25
    assert config['run.frozen'] == ()


def test_pi_multiples_parsed():
    config = parse_config("grid.dims = 16, 16\ngrid.lengths = 2pi, 0.5*pi\nrun.t_final = 1\n")
    assert config['grid.lengths'] == pytest.approx((2.0 * math.pi, 0.5 * math.pi))


def test_errors_carry_line_numbers():
    cases = {
        MINIMAL + "run.colour = blue\n": "ligne 3",
        MINIMAL + "grid.dims = 16\n": "ligne 3",
        "grid.dims = 32\nrun.t_final = abc\n": "ligne 2",
        "grid.dims = 31\nrun.t_final = 1\n": "ligne 1",
        MINIMAL + "output.every = 0.3\n": "ligne 3",
        MINIMAL + "initial.profile = manufactured\ninitial.width = 2\n": "ligne 4",
    }
    for text, expected in cases.items():
        with pytest.raises(ConfigError, match=expected):
            parse_config(text)
    with pytest.raises(ConfigError):
        parse_config("grid.dims = 32\n")


def test_invalid_coefficients_rejected_with_line():
    with pytest.raises(ConfigError, match=r"ligne 4: beta = 0.5 .*\(2/3, 1\)"):
        load_config(os.path.join(CONFIGS, "bad_beta.cfg"))
    relaxed = load_config(os.path.join(CONFIGS, "bad_beta.cfg"), strict=False)
    assert relaxed.coeffs.beta == 0.5


def test_serialization_is_canonical():
    config = load_config(os.path.join(CONFIGS, "reference.cfg"))
    text = serialize_config(config)
    again = parse_config(text)
    assert serialize_config(again) == text
    assert config_hash(again) == config_hash(config)
    assert len(config_hash(config)) == 64


def test_config_hash_ignores_output_directory():
    """Même physique dans deux répertoires: même empreinte"""
    first = parse_config(MINIMAL + "output.directory = runs/a\n")
    second = parse_config(MINIMAL + "output.directory = runs/b\n")
    assert serialize_config(first) != serialize_config(second)
    assert config_hash(first) == config_hash(second)
    assert config_hash(parse_config(MINIMAL + "run.cfl = 0.2\n")) != config_hash(first)


def test_run_outputs_independent_of_thread_count():
    """Séries et instantanés identiques octet pour octet avec 1 ou 2 threads"""
    config = load_config(os.path.join(CONFIGS, "reference.cfg"))
    contents = {}
    with tempfile.TemporaryDirectory() as directory:
        for threads in (1, 2):
            out_dir = os.path.join(directory, f"threads_{threads}")
            manifest = run_simulation(config, out_dir=out_dir, threads=threads)
            assert manifest.status == "ok"
            assert manifest.threads == threads
            contents[threads] = {}
            for name in ["timeseries.csv"] + [f for f in manifest.files if f.endswith(".mhde")]:
                with open(os.path.join(out_dir, name), 'rb') as f:
                    contents[threads][name] = f.read()
        stored = [RunManifest.read(os.path.join(directory, f"threads_{n}", "manifest.json")) for n in (1, 2)]
    assert contents[1] == contents[2]
    assert len(contents[1]) == 4
    assert stored[0].config_hash == stored[1].config_hash
    assert stored[0].final_record == stored[1].final_record


def test_snapshot_round_trip_is_exact():
    config = parse_config(MINIMAL + "run.rng_seed = 7\n")
    state = random_state(config['run.rng_seed'])
    with tempfile.TemporaryDirectory() as directory:
        path = write_snapshot(state, os.path.join(directory, "s.mhde"))
        loaded = read_snapshot(path, state.grid)
    assert loaded.grid == state.grid
    assert loaded.time == state.time
    for name in ("rho", "u", "theta", "H"):
        assert np.array_equal(getattr(loaded, name), getattr(state, name))


def test_snapshot_errors_are_distinct():
    state = random_state(3)
    with tempfile.TemporaryDirectory() as directory:
        path = write_snapshot(state, os.path.join(directory, "s.mhde"))
        with open(path, 'rb') as f:
            data = f.read()

        def broken(content: bytes) -> str:
            target = os.path.join(directory, "broken.mhde")
            with open(target, 'wb') as f:
                f.write(content)
            return target

        with pytest.raises(SnapshotMagicError):
            read_snapshot(broken(b"XXXX" + data[4:]))
        with pytest.raises(SnapshotVersionError):
            read_snapshot(broken(data[:4] + struct.pack("<I", 2) + data[8:]))
        with pytest.raises(SnapshotTruncatedError):
            read_snapshot(broken(data[:-8]))
        with pytest.raises(SnapshotGridMismatchError):
            read_snapshot(path, Grid((8, 8), (1.0, 2.5)))


def test_run_then_diagnose_reproduces_timeseries():
    """Les diagnostics recalculés depuis les instantanés sont identiques octet pour octet"""
    config = load_config(os.path.join(CONFIGS, "reference.cfg"))
    with tempfile.TemporaryDirectory() as directory:
        manifest = run_simulation(config, out_dir=directory)
        assert manifest.status == "ok"
        assert manifest.step_count > 0
        assert "snap_0002.mhde" in manifest.files
        frame = read_timeseries(os.path.join(directory, "timeseries.csv"))
        assert list(frame.columns) == list(CSV_COLUMNS)
        assert len(frame) == 3
        with open(os.path.join(directory, "timeseries.csv"), 'rb') as f:
            original = f.read()
        for threads in (1, 2):
            path, records = diagnose_directory(directory, threads=threads)
            with open(path, 'rb') as f:
                assert f.read() == original
        assert len(records) == 3
        stored = RunManifest.read(os.path.join(directory, "manifest.json"))
        assert stored.config_hash == config_hash(config)
        assert stored.final_record['time'] == pytest.approx(0.1)


def test_resume_continues_the_series():
    config = load_config(os.path.join(CONFIGS, "reference.cfg"))
    with tempfile.TemporaryDirectory() as directory:
        run_simulation(config, out_dir=directory)
        reference = pd.read_csv(os.path.join(directory, "timeseries.csv"))
        resumed_dir = os.path.join(directory, "resumed")
        os.makedirs(resumed_dir)
        first = run_simulation(parse_config(serialize_config(config).replace(
            "run.t_final = 0.1", "run.t_final = 0.05").replace("output.every = 0.05", "output.every = 0.025")),
            out_dir=resumed_dir)
        assert first.status == "ok"
        manifest = run_simulation(config, out_dir=resumed_dir,
                                  resume=os.path.join(resumed_dir, "snap_0002.mhde"))
        assert manifest.status == "ok"
        resumed = pd.read_csv(os.path.join(resumed_dir, "timeseries.csv"))
    assert resumed['time_clock'].iloc[-1] == pytest.approx(0.1)
    assert resumed['mass_eq1a'].iloc[-1] == pytest.approx(reference['mass_eq1a'].iloc[-1], rel=1e-12)


def test_failed_run_still_writes_manifest():
    config = parse_config(MINIMAL + "initial.snapshot = /nonexistent/state.mhde\n")
    with tempfile.TemporaryDirectory() as directory:
        manifest = run_simulation(config, out_dir=directory)
        stored = RunManifest.read(os.path.join(directory, "manifest.json"))
    assert manifest.status == "failed"
    assert stored.status == "failed"
    assert stored.failure


def test_timeseries_header_checked():
    with tempfile.TemporaryDirectory() as directory:
        path = os.path.join(directory, "bad.csv")
        with open(path, 'w', encoding='utf-8') as f:
            f.write("a,b\n1,2\n")
        with pytest.raises(UsageError):
            read_timeseries(path)


def main():
    """Fonction principale de test"""
    print("🧪 Configuration et persistance - Tests")
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
