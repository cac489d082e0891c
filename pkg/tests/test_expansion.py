from __future__ import annotations

import numpy as np
import pytest

from errors import FitError
from expansion import expansion_rows, fit_expansion, fit_powers, resolve_fit_order, verify_a1
from geom import InvariantFunction, InvariantMetric, integrate, scalar_curvature

FIT_POWERS = (16, 24, 32, 48, 64)
A1_POTENTIALS = [[(2, 0.02)], [(3, 0.005)]]


def test_fs_expansion_is_exactly_one_plus_q(fs) -> None:
    fit = fit_expansion(fs, [16, 32, 64])
    assert fit.order == 2
    assert np.max(np.abs(fit.a1 - 1.0)) < 1e-8
    assert np.max(np.abs(fit.a2)) < 1e-6
    assert fit.residual_norm < 1e-10
    assert fit.reliable
    assert verify_a1(fs, [16, 32, 64], fit=fit) < 1e-8


def test_fit_order_defaults() -> None:
    assert resolve_fit_order(3) == 2
    assert resolve_fit_order(5) == 3
    assert resolve_fit_order(5, 2) == 2
    with pytest.raises(FitError):
        resolve_fit_order(4, 3)


@pytest.mark.parametrize("pairs", A1_POTENTIALS)
def test_a1_is_half_scalar_curvature(grid, pairs) -> None:
    g = InvariantMetric(InvariantFunction.from_pairs(pairs), grid)
    fit = fit_expansion(g, FIT_POWERS)
    assert fit.order == 3
    assert verify_a1(g, FIT_POWERS, fit=fit) <= 2e-2
    assert integrate(fit.a1, g) == pytest.approx(1.0, abs=1e-2)
    assert fit.leading_error < 1e-3
    assert fit.reliable


@pytest.mark.parametrize("pairs", A1_POTENTIALS)
def test_more_powers_tighten_a1(grid, pairs) -> None:
    g = InvariantMetric(InvariantFunction.from_pairs(pairs), grid)
    capped = verify_a1(g, FIT_POWERS[:3])
    assert verify_a1(g, FIT_POWERS) < capped


def test_fit_needs_enough_distinct_powers(bent) -> None:
    with pytest.raises(FitError):
        fit_expansion(bent, [16, 32])
    with pytest.raises(FitError):
        fit_expansion(bent, [16, 16, 32])
    with pytest.raises(FitError):
        fit_expansion(bent, [4, 16, 32])


def test_ill_conditioned_fit_reports_condition(bent) -> None:
    with pytest.raises(FitError) as info:
        fit_expansion(bent, [64, 65, 66], max_condition=1e3)
    assert info.value.condition > 1e3


def test_fit_powers_solves_exact_data() -> None:
    q = 1.0 / np.array([10.0, 20.0, 40.0, 80.0])
    data = np.column_stack([2.0 + 3.0 * q - q ** 2, -1.0 + 0.5 * q])
    fit = fit_powers(q, data, [0, 1, 2])
    assert fit.coefficients[:, 0] == pytest.approx([2.0, 3.0, -1.0])
    assert fit.coefficients[:, 1] == pytest.approx([-1.0, 0.5, 0.0], abs=1e-10)
    assert np.max(np.abs(fit.residuals)) < 1e-12


def test_expansion_rows(bent) -> None:
    fit = fit_expansion(bent, FIT_POWERS)
    rows = expansion_rows(fit, bent)
    assert len(rows) == bent.grid.node_count
    x, a1, _, _, half_sigma, err = rows[10]
    assert x == bent.grid.nodes[10]
    assert half_sigma == pytest.approx(0.5 * scalar_curvature(bent)[10])
    assert err == pytest.approx(abs(a1 - half_sigma))
