from __future__ import annotations

import logging
from fractions import Fraction
from math import comb

import numpy as np
import pytest

import bergman
from bergman import c_q, density, fs_pullback, gram
from errors import PreconditionError
from geom import InvariantFunction, InvariantMetric, grid_size, integrate, moment_grid, random_potential


def test_c_q_is_exact() -> None:
    assert c_q(2) == Fraction(3, 2)
    assert c_q(64) == Fraction(65, 64)
    with pytest.raises(PreconditionError):
        c_q(0)


def test_fs_gram_entries(fs) -> None:
    assert gram(1, fs).values == pytest.approx([0.5, 0.5], abs=1e-12)
    assert gram(2, fs).values == pytest.approx([1 / 3, 1 / 6, 1 / 3], abs=1e-12)
    sg = gram(12, fs)
    exact = [1.0 / (13 * comb(12, i)) for i in range(13)]
    assert np.max(np.abs(sg.values - exact)) < 1e-12
    assert sg.n_sections == 13


@pytest.mark.parametrize("m", [1, 2, 8, 32, 64])
def test_fs_is_balanced(fs, m) -> None:
    profile = density(m, fs)
    assert profile.c_q == (m + 1) / m
    assert profile.sup_deviation() < 1e-12


def test_fs_is_balanced_in_log_space() -> None:
    g = InvariantMetric.fubini_study(moment_grid(grid_size(200)))
    assert density(200, g).sup_deviation() < 1e-10


@pytest.mark.parametrize("m", [8, 32, 64])
def test_doubling_the_nodes_leaves_gram_entries(bent, m) -> None:
    nodes = grid_size(m)
    coarse = gram(m, InvariantMetric(bent.potential, moment_grid(nodes))).values
    fine = gram(m, InvariantMetric(bent.potential, moment_grid(2 * nodes))).values
    assert np.max(np.abs(coarse - fine)) < 1e-10


def test_log_space_agrees_with_direct_sum(bent, monkeypatch) -> None:
    direct = density(40, bent).values
    monkeypatch.setattr(bergman, "LOG_SPACE_ABOVE", 0)
    logged = density(40, bent).values
    assert np.max(np.abs(direct - logged)) < 1e-12


def test_mean_identity_on_random_metrics(grid) -> None:
    rng = np.random.default_rng(11)
    for _ in range(3):
        g = InvariantMetric(random_potential(rng), grid)
        for m in (8, 32):
            assert integrate(density(m, g).values, g) == pytest.approx(float(c_q(m)), abs=1e-12)


def test_density_ignores_constant_shift(bent) -> None:
    shifted = InvariantMetric(bent.potential + InvariantFunction.constant(0.7), bent.grid)
    assert np.max(np.abs(density(16, bent).values - density(16, shifted).values)) < 1e-12


def test_perturbed_metric_is_not_balanced(bent) -> None:
    assert density(16, bent).sup_deviation() > 1e-3


def test_fs_is_a_fixed_point_of_pullback(fs) -> None:
    for m in (2, 8, 32):
        assert fs_pullback(m, fs).potential.sup_norm() < 1e-10


def test_pullback_approaches_the_metric(bent) -> None:
    distances = [(fs_pullback(m, bent).potential - bent.potential).sup_norm() for m in (8, 16, 32)]
    assert distances[0] > distances[1] > distances[2]


def test_pullback_projection_follows_the_degree_cap(bent) -> None:
    assert fs_pullback(32, bent).potential.degree_cap == 128
    assert fs_pullback(32, bent, degree=200).potential.degree_cap == 200
    assert fs_pullback(8, bent, degree=10).potential.degree_cap == 32


def test_power_beyond_design_warns(caplog) -> None:
    g = InvariantMetric.fubini_study(moment_grid(256))
    with caplog.at_level(logging.WARNING, logger="bergman"):
        density(40, g)
    assert any("design maximum" in r.getMessage() for r in caplog.records)
