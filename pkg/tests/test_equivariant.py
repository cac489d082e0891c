from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest

from equivariant import (
    Lift,
    character_check,
    chi,
    holomorphy_potential,
    lift_stability_check,
    max_character,
    obstruction,
    parse_rational,
    pullback_identity_defect,
    pullback_identity_sides,
    sl_weights,
)
from errors import HypothesisError, PreconditionError

ZERO = Lift.constant(0)


def test_sl_weights_are_a_centered_ladder() -> None:
    assert sl_weights(2).weights == (-1, 0, 1)
    assert sl_weights(3).weights == (Fraction(-3, 2), Fraction(-1, 2), Fraction(1, 2), Fraction(3, 2))
    for m in (1, 4, 7):
        w = sl_weights(m)
        assert w.trace() == 0
        assert all(b - a == 1 for a, b in zip(w.weights, w.weights[1:]))
    with pytest.raises(PreconditionError):
        sl_weights(0)


def test_parse_rational() -> None:
    assert parse_rational("sl") == Fraction(1, 2)
    assert parse_rational("1/3") == Fraction(1, 3)
    assert parse_rational("0.25") == Fraction(1, 4)
    with pytest.raises(PreconditionError):
        parse_rational("half")


def test_holomorphy_potential_at_fs(fs) -> None:
    x = fs.grid.nodes
    assert np.allclose(holomorphy_potential(fs, Lift.sl(), 4), 0.5 - x)
    assert np.allclose(holomorphy_potential(fs, ZERO, 4), -x)
    lift = Lift.constant("1/3")
    assert holomorphy_potential(fs, lift, 4, [0.0, 1.0]) == pytest.approx([1 / 3, 1 / 3 - 1])


def test_character_values(fs, bent, tilted) -> None:
    assert chi(Lift.sl(), 4, fs) == pytest.approx(0.0, abs=1e-15)
    assert chi(ZERO, 4, fs) == pytest.approx(-1.0, abs=1e-15)
    assert abs(chi(Lift.sl(), 8, bent)) < 1e-12
    assert abs(chi(Lift.sl(), 8, tilted)) < 1e-12
    assert chi(ZERO, 8, bent) == pytest.approx(chi(ZERO, 8, fs), abs=1e-12)


def test_obstruction_scales_and_is_affine(fs, tilted) -> None:
    assert obstruction(ZERO, 8, fs) == pytest.approx(-64.0, abs=1e-12)
    assert abs(obstruction(Lift.sl(), 8, fs)) < 1e-12
    for c in ("0", "1/3", "2"):
        expected = 2 * 8 ** 2 * (float(Fraction(c)) - 0.5)
        assert obstruction(Lift.constant(c), 8, tilted) == pytest.approx(expected, abs=1e-9)
    assert chi(Lift.constant("1/3"), 8, tilted) - chi(ZERO, 8, tilted) == pytest.approx(2 / 3, abs=1e-14)


def test_pullback_identity_at_fs(fs) -> None:
    lhs, rhs = pullback_identity_sides(2, fs, [0.5])
    assert lhs[0] == pytest.approx(0.0, abs=1e-12)
    assert rhs[0] == pytest.approx(0.0, abs=1e-15)
    for m in (2, 8, 32):
        assert pullback_identity_defect(m, fs) < 1e-8


def test_pullback_identity_near_the_pole(fs) -> None:
    lhs, rhs = pullback_identity_sides(8, fs, [1e-12])
    assert lhs[0] == pytest.approx(0.5, abs=1e-10)
    assert rhs[0] == pytest.approx(0.5, abs=1e-10)


@pytest.mark.parametrize("m", [2, 8])
def test_pullback_identity_on_perturbed_metric(bent, m) -> None:
    assert pullback_identity_defect(m, bent) < 1e-8


def test_max_character_vanishes_for_sl_lift(fs, bent) -> None:
    assert max_character(fs, Lift.sl(), [4, 8]) < 1e-15
    assert max_character(lambda m: bent, Lift.sl(), [4, 8]) < 1e-12
    assert max_character(fs, ZERO, [4, 8]) == pytest.approx(1.0)


def test_character_check_with_sl_lift(fs, bent) -> None:
    for g in (fs, bent):
        report = character_check(Lift.sl(), [4, 8, 16], g)
        assert report.passed
        assert report.is_sl and report.vanishing
        assert report.max_deviation <= 1e-8
        assert max(abs(o) for o in report.obstructions) <= 1e-8


def test_character_check_with_constant_zero_lift(bent) -> None:
    report = character_check(ZERO, [4, 8, 16], bent)
    assert report.chi_values == pytest.approx((-1.0, -1.0, -1.0), abs=1e-12)
    assert report.m_independent
    assert not report.vanishing
    assert report.obstructions == pytest.approx((-16.0, -64.0, -256.0), abs=1e-9)
    assert not report.passed
    assert report.reason == "nonzero character"


def test_character_check_rejects_mixed_lifts(fs) -> None:
    mixed = Lift(constants=((4, Fraction(1, 2)), (8, Fraction(1, 2)), (16, Fraction(0))))
    with pytest.raises(HypothesisError):
        character_check(mixed, [4, 8, 16], fs)
    with pytest.raises(PreconditionError):
        character_check(Lift.sl(), [4, 8], fs)


def test_lift_stability() -> None:
    powers = [2, 4, 8, 16]
    steady = lift_stability_check(Lift.sl(), powers)
    assert steady and steady.k0 == 1

    late = Lift.from_mapping({2: "0", 4: "1/2", 8: "1/2", 16: "1/2"})
    result = lift_stability_check(late, powers)
    assert result and result.k0 == 2

    drifting = Lift.from_mapping({m: Fraction(1, m) for m in powers})
    assert not lift_stability_check(drifting, powers)

    assert not lift_stability_check(Lift.sl(), [4, 2])
    assert not lift_stability_check(Lift.from_mapping({2: "1/2"}), [2, 4, 8])
