#!/usr/bin/env python3
"""
Тесты векторных тождеств
"""

import os
import sys

import numpy as np
import pytest

sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from scripts.errors import ContractViolation
from scripts.identities import IDENTITIES, check_identity, random_identity_inputs, run_identity_suite
from scripts.spectral_fields import Grid, ScalarField, VectorField


def test_suite_covers_seven_identities():
    assert len(IDENTITIES) == 7


def test_all_identities_hold_on_random_fields():
    cases = run_identity_suite(Grid(16), trials=3, seed=1)
    assert [c.name for c in cases] == list(IDENTITIES)
    for case in cases:
        assert case.passed(), f"{case.name}: {case.residual_norm:.3e}"
        assert case.input_norm > 0


def test_identity_on_zero_fields_has_zero_residual():
    grid = Grid(8)
    fields = {'f': ScalarField.zeros(grid), 'a': VectorField.zeros(grid), 'b': VectorField.zeros(grid)}
    case = check_identity('div_cross', fields)
    assert case.residual_norm == 0.0
    assert case.passed()


def test_missing_input_is_contract_violation():
    grid = Grid(8)
    with pytest.raises(ContractViolation):
        check_identity('div_fa', {'a': VectorField.zeros(grid)})
    with pytest.raises(ContractViolation):
        check_identity('div_fa', {'f': VectorField.zeros(grid), 'a': VectorField.zeros(grid)})
    with pytest.raises(ContractViolation):
        check_identity('no_such_identity', {})


def test_identities_hold_for_negated_inputs():
    grid = Grid(16)
    inputs = random_identity_inputs(grid, np.random.default_rng(0))
    negated = dict(inputs, b=-inputs["b"], f=-inputs["f"])
    for name in IDENTITIES:
        assert check_identity(name, negated).passed(), name


def test_csv_row_format():
    grid = Grid(8)
    case = check_identity('energy_exchange_1', {'H': VectorField.zeros(grid)})
    name, residual, norm, verdict = case.csv_row().split(',')
    assert name == 'energy_exchange_1'
    assert float(residual) == 0.0
    assert verdict == 'pass'


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
