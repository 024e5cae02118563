#!/usr/bin/env python3
"""
Тесты конфигурации прогона, контрольных точек и CSV диагностики
"""

import os
import struct
import sys

import numpy as np
import pytest

sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from scripts.checkpoint_io import FORMAT_VERSION, HEADER, KIND_EPS, TRAILER, read_checkpoint, write_checkpoint
from scripts.diagnostics import (
    DiagnosticsRecord, acoustic_pair, eps_record, incompressible_component, limit_record, read_diagnostics_csv,
    write_diagnostics_csv,
)
from scripts.errors import CheckpointFormatError, ConfigError, ContractViolation, DimensionMismatchError
from scripts.norms import TripleNormAccumulator
from scripts.run_config import apply_overrides, load_config, parse_config, serialize
from scripts.spectral_fields import (
    Grid, ScalarField, VectorField, diff_op, l2_norm, leray_project, random_band_limited_scalar,
    random_band_limited_vector,
)
from solvers.acoustic.sponge import probe_mask
from solvers.mhd_eps.mhd_eps_state import EpsState, PhysParams
from solvers.mhd_limit.mhd_limit_solver import LimitState


# ---------------------------------------------------------------------------
# Конфигурация
# ---------------------------------------------------------------------------

def test_empty_config_gives_defaults():
    config = parse_config("")
    assert config['grid.n'] == 32
    assert config['phys.eps'] == 0.1
    assert config['init.perturbation'] == 1.0
    assert config['sweep.eps_list'] == [0.4, 0.2, 0.1, 0.05]
    assert config['acoustic.implicit'] is False
    assert config.grid().dealias_cutoff == 10


def test_comments_and_whitespace():
    config = parse_config("# header\n  grid.n = 16   # точек\n\nphys.eps=0.25\n")
    assert config['grid.n'] == 16
    assert config['phys.eps'] == 0.25
    assert config.phys_params().eps == 0.25


def test_all_errors_reported_with_line_numbers():
    text = "grid.n=16\nfoo.bar=1\nphys.mu=-1\ngrid.L=abc\n"
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    lines = [line for line, _ in info.value.errors]
    assert lines == [2, 3, 4]
    messages = [message for _, message in info.value.errors]
    assert "unknown key 'foo.bar'" in messages[0]
    assert "mu > 0" in messages[1]
    assert "grid.L" in messages[2]
    assert "line 3:" in str(info.value)


def test_duplicate_and_malformed_lines():
    with pytest.raises(ConfigError) as info:
        parse_config("grid.n=16\ngrid.n=32\njust text\n")
    messages = [m for _, m in info.value.errors]
    assert any('duplicate' in m for m in messages)
    assert any('malformed line' in m for m in messages)


@pytest.mark.parametrize("text, fragment", [
    ("grid.n=15\n", "n even"),
    ("sponge.inner=3.0\nsponge.outer=2.5\n", "inner < outer"),
    ("sponge.outer=4.0\n", "outer <= L/2"),
    ("sweep.probe_radius=2.5\n", "probe_radius < sponge.inner"),
    ("grid.n=8\n", "band <= dealias cutoff"),
    ("sweep.eps_list=0.1,0.2,0.4\n", "strictly descending"),
    ("sweep.eps_list=0.4,0.2\n", "length >= 3"),
    ("phys.mu=0.05\nphys.lambda=-0.1\n", "2*mu + 3*lambda > 0"),
    ("time.scheme=rk4\n", "scheme in"),
])
def test_constraint_violations(text, fragment):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert any(fragment in m for _, m in info.value.errors), info.value.errors


def test_serialize_round_trip():
    config = parse_config(
        "grid.n=16\nphys.eps=0.3\nphys.theta_bar=0.1\ninit.perturbation=0.5\n"
        "acoustic.implicit=true\nsweep.eps_list=0.5,0.25,0.125\nout.dir=results/run\n"
    )
    assert parse_config(serialize(config)) == config
    default = parse_config("")
    assert parse_config(serialize(default)) == default


def test_overrides_and_with_values():
    config = parse_config("grid.n=16\n")
    changed = apply_overrides(config, ['phys.eps=0.2', 'time.scheme=imexbdf2'])
    assert changed['phys.eps'] == 0.2
    assert changed['time.scheme'] == 'imexbdf2'
    assert changed['grid.n'] == 16
    with pytest.raises(ConfigError):
        apply_overrides(config, ['phys.eps'])
    with pytest.raises(ConfigError):
        apply_overrides(config, ['phys.mach=0.2'])
    with pytest.raises(ConfigError):
        apply_overrides(config, ['phys.eps=2'])

    assert config.with_values(phys__eps=0.05)['phys.eps'] == 0.05
    with pytest.raises(ConfigError):
        config.with_values(phys__eps=0.0)


def test_load_config(tmp_path):
    path = tmp_path / 'run.cfg'
    path.write_text("grid.n=16\ninit.seed=7\n", encoding='utf-8')
    assert load_config(path)['init.seed'] == 7
    with pytest.raises(ConfigError):
        load_config(tmp_path / 'missing.cfg')


# ---------------------------------------------------------------------------
# Контрольные точки
# ---------------------------------------------------------------------------

def _eps_state(grid, time=0.25):
    rng = np.random.default_rng(21)
    return EpsState(
        p=random_band_limited_scalar(grid, 2, rng),
        u=random_band_limited_vector(grid, 2, rng),
        H=random_band_limited_vector(grid, 2, rng),
        theta=random_band_limited_scalar(grid, 2, rng, l2=0.1),
        time=time,
    )


def _assert_same_fields(a, b):
    for (name_a, fa), (name_b, fb) in zip(a.named_fields(), b.named_fields()):
        assert name_a == name_b
        arrays_a = (fa.values,) if isinstance(fa, ScalarField) else fa.arrays()
        arrays_b = (fb.values,) if isinstance(fb, ScalarField) else fb.arrays()
        for xa, xb in zip(arrays_a, arrays_b):
            assert np.array_equal(xa, xb)


def test_eps_checkpoint_is_bitwise_exact(tmp_path):
    grid = Grid(8)
    state = _eps_state(grid)
    path = write_checkpoint(state, tmp_path / 'state.chk')
    assert path.stat().st_size == HEADER.size + 8 * 8 ** 3 * 8 + TRAILER.size
    loaded = read_checkpoint(path, grid)
    assert isinstance(loaded, EpsState)
    assert loaded.time == 0.25
    _assert_same_fields(state, loaded)
    assert not (tmp_path / 'state.chk.tmp').exists()


def test_checkpoint_byte_layout(tmp_path):
    grid = Grid(8, box_length=5.0)
    state = _eps_state(grid)
    data = write_checkpoint(state, tmp_path / 'state.chk').read_bytes()
    cells = grid.n ** 3
    assert HEADER.size == 20
    assert data[0:4] == b'MLIM'
    assert struct.unpack_from('<I', data, 4)[0] == FORMAT_VERSION
    assert struct.unpack_from('<I', data, 8)[0] == 8
    assert struct.unpack_from('<d', data, 12)[0] == 5.0
    p = np.frombuffer(data, dtype='<f8', count=cells, offset=20)
    assert np.array_equal(p, state.p.values.ravel())
    ux = np.frombuffer(data, dtype='<f8', count=cells, offset=20 + 8 * cells)
    assert np.array_equal(ux, state.u.arrays()[0].ravel())
    theta = np.frombuffer(data, dtype='<f8', count=cells, offset=20 + 7 * 8 * cells)
    assert np.array_equal(theta, state.theta.values.ravel())
    assert TRAILER.unpack_from(data, 20 + 8 * 8 * cells) == (KIND_EPS, 0.25)
    assert len(data) == 20 + 8 * 8 * cells + 12


def test_limit_checkpoint_round_trip(tmp_path):
    grid = Grid(8)
    eps_state = _eps_state(grid, time=1.5)
    state = LimitState(w=eps_state.u, h=eps_state.H, vartheta=eps_state.theta, pi=eps_state.p, time=1.5)
    loaded = read_checkpoint(write_checkpoint(state, tmp_path / 'limit.chk'))
    assert isinstance(loaded, LimitState)
    assert loaded.grid == grid
    _assert_same_fields(state, loaded)


def test_corrupted_checkpoints(tmp_path):
    grid = Grid(8)
    path = write_checkpoint(_eps_state(grid), tmp_path / 'state.chk')
    data = path.read_bytes()

    bad_magic = tmp_path / 'magic.chk'
    bad_magic.write_bytes(b'XXXX' + data[4:])
    with pytest.raises(CheckpointFormatError, match='magic'):
        read_checkpoint(bad_magic)

    truncated = tmp_path / 'short.chk'
    truncated.write_bytes(data[:-8])
    with pytest.raises(CheckpointFormatError, match='truncated'):
        read_checkpoint(truncated)

    header_only = tmp_path / 'header.chk'
    header_only.write_bytes(data[:10])
    with pytest.raises(CheckpointFormatError):
        read_checkpoint(header_only)

    with pytest.raises(DimensionMismatchError):
        read_checkpoint(path, Grid(16))
    with pytest.raises(DimensionMismatchError):
        read_checkpoint(path, Grid(8, box_length=4.0))


def test_checkpoint_rejects_foreign_objects(tmp_path):
    with pytest.raises(ContractViolation):
        write_checkpoint({'p': 1}, tmp_path / 'x.chk')


# ---------------------------------------------------------------------------
# Диагностика
# ---------------------------------------------------------------------------

def test_diagnostics_csv_round_trip(tmp_path):
    grid = Grid(8)
    params = PhysParams(eps=0.1)
    state = _eps_state(grid)
    mask, _ = probe_mask(grid, 1.0)
    acc = TripleNormAccumulator.start(state, params.eps, params.theta_bar, 4.0)
    records = [eps_record(state, params, acc, mask), eps_record(state, params, acc, mask, s=3.0)]
    path = write_diagnostics_csv(records, tmp_path / 'nested' / 'diag.csv')
    assert path.read_text(encoding='utf-8').splitlines()[0] == ','.join(DiagnosticsRecord.columns())
    assert read_diagnostics_csv(path) == records

    broken = tmp_path / 'broken.csv'
    broken.write_text("t,eps\n0,0.1\n", encoding='utf-8')
    with pytest.raises(ContractViolation):
        read_diagnostics_csv(broken)


def test_equilibrium_records_are_quiet():
    grid = Grid(8)
    params = PhysParams(eps=0.1, theta_bar=0.2)
    mask, _ = probe_mask(grid, 1.0)
    state = EpsState.equilibrium(grid, params)
    acc = TripleNormAccumulator.start(state, params.eps, params.theta_bar)
    record = eps_record(state, params, acc, mask)
    assert record.triple_norm == pytest.approx(0.0, abs=1e-12)
    assert record.constraint_res <= 1e-12
    assert record.acoustic_L2_local == 0.0
    assert record.energy_total == pytest.approx(grid.volume, rel=1e-12)

    rest = limit_record(LimitState.rest(grid, params), params, mask)
    assert rest.eps == 0.0
    assert rest.energy_total == 0.0
    assert rest.constraint_res <= 1e-12

def test_acoustic_pair_and_incompressible_component():
    grid = Grid(8)
    rng = np.random.default_rng(5)
    potential = random_band_limited_scalar(grid, 2, rng)
    gradient = diff_op('grad', potential)
    solenoidal = leray_project(random_band_limited_vector(grid, 2, rng))
    zero = ScalarField.zeros(grid)

    assert incompressible_component(gradient, zero).max_abs() <= 1e-10
    assert incompressible_component(solenoidal, zero).max_abs() > 1e-3

    quiet = EpsState(p=zero, u=solenoidal, H=VectorField.zeros(grid), theta=zero)
    div_u, grad_p = acoustic_pair(quiet)
    assert div_u <= 1e-10
    assert grad_p == 0.0
    loud = EpsState(p=potential, u=gradient, H=VectorField.zeros(grid), theta=zero)
    div_u, grad_p = acoustic_pair(loud)
    assert div_u > 1e-3
    assert grad_p == pytest.approx(l2_norm(gradient), rel=1e-12)



if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
