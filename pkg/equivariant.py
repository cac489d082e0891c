"""
Lifts of z∂/∂z to O(m), SL-normalized weights, and the obstruction character.

The holomorphy potential of X = z∂/∂z with respect to ω_φ is the moment map
x̃ up to a constant; a lift ρ_m fixes that constant as c_ρ(m), and the
character χ_m(X) = 2∫(c_ρ − x̃) ω_φ depends only on c_ρ by the
Duistermaat–Heckman barycenter identity ∫x̃ ω_φ = 1/2.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.special import softmax

from bergman import fs_pullback, gram, normalized_log_norms
from errors import HypothesisError, PreconditionError
from geom import DEFAULT_DEGREE, integrate, moment_map

logger = logging.getLogger("equivariant")

SL_CONSTANT = Fraction(1, 2)
CHARACTER_TOL = 1e-8
# n + 1 for the complex dimension n = 1
DIMENSION_FACTOR = 2


def parse_rational(text):
    """'sl' or any Fraction literal ('1/2', '0', '0.25')."""
    if isinstance(text, Fraction):
        return text
    text = str(text).strip()
    if text.lower() == "sl":
        return SL_CONSTANT
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError) as e:
        raise PreconditionError(f"not a rational lift constant: {text!r}") from e


@dataclass(frozen=True)
class Lift:
    """Per-power constants c_ρ(m); powers not listed fall back to default."""
    constants: tuple = ()
    default: Fraction = None

    @classmethod
    def sl(cls):
        return cls(default=SL_CONSTANT)

    @classmethod
    def constant(cls, value):
        return cls(default=parse_rational(value))

    @classmethod
    def from_mapping(cls, mapping, default=None):
        items = tuple(sorted((int(m), parse_rational(c)) for m, c in mapping.items()))
        return cls(constants=items, default=None if default is None else parse_rational(default))

    def constant_at(self, m):
        for power, c in self.constants:
            if power == m:
                return c
        if self.default is None:
            raise PreconditionError(f"lift has no constant for m={m}")
        return self.default

    def is_sl(self, m_list):
        return all(self.constant_at(m) == SL_CONSTANT for m in m_list)

    def describe(self):
        if not self.constants:
            return f"constant {self.default}"
        return ", ".join(f"m={m}: {c}" for m, c in self.constants)


@dataclass(frozen=True)
class WeightVector:
    m: int
    weights: tuple

    def trace(self):
        return sum(self.weights, Fraction(0))


@dataclass(frozen=True)
class CharacterReport:
    m_list: tuple
    lift_constant: Fraction
    chi_values: tuple
    max_deviation: float
    obstructions: tuple
    is_sl: bool
    m_independent: bool
    vanishing: bool
    passed: bool
    reason: str = ""


@dataclass(frozen=True)
class LiftStability:
    stable: bool
    k0: int = None

    def __bool__(self):
        return self.stable


def sl_weights(m):
    if m < 1:
        raise PreconditionError(f"power m must be positive, got {m}")
    return WeightVector(m=m, weights=tuple(Fraction(2 * i - m, 2) for i in range(m + 1)))


def holomorphy_potential(g, lift, m, x=None):
    """θ_X = c_ρ(m) − x̃, the normalized h^{−1}(Xh)_ρ for X = z∂/∂z."""
    return float(lift.constant_at(m)) - moment_map(g, x)


def chi(lift, m, g):
    return DIMENSION_FACTOR * integrate(holomorphy_potential(g, lift, m), g)


def obstruction(lift, m, g):
    """m^{n+1} χ_m with n = 1."""
    return m ** 2 * chi(lift, m, g)


def weighted_section_average(m, g, x=None):
    """−Σ α_i ‖τ_i‖² / (m Σ ‖τ_i‖²) with SL weights, from the Gram data of h^m."""
    sg = gram(m, g)
    logs = normalized_log_norms(m, g, x=x, sg=sg)
    alpha = np.array([float(a) for a in sl_weights(m).weights])
    share = softmax(logs, axis=1)
    return -(share @ alpha) / m


def pullback_identity_sides(m, g, x=None, degree=DEFAULT_DEGREE):
    """Both sides of the pulled-back holomorphy potential identity at x (grid nodes by default)."""
    pulled = fs_pullback(m, g, degree)
    lhs = holomorphy_potential(pulled, Lift.sl(), m, x)
    rhs = weighted_section_average(m, g, x)
    return lhs, rhs


def pullback_identity_defect(m, g, x=None, degree=DEFAULT_DEGREE):
    lhs, rhs = pullback_identity_sides(m, g, x, degree)
    return float(np.max(np.abs(lhs - rhs)))


def max_character(metric, lift, m_list):
    """max over m of |2∫θ_X ω(ℓ)|; metric is an InvariantMetric or a callable m -> InvariantMetric."""
    metric_at = metric if callable(metric) else (lambda m: metric)
    return max(abs(chi(lift, m, metric_at(m))) for m in m_list)


def character_check(lift, m_list, g, tol=CHARACTER_TOL):
    ms = tuple(sorted(set(int(m) for m in m_list)))
    if len(ms) < DIMENSION_FACTOR + 1:
        raise PreconditionError(f"need at least {DIMENSION_FACTOR + 1} distinct powers, got {list(ms)}")

    constants = {lift.constant_at(m) for m in ms}
    if len(constants) > 1:
        raise HypothesisError(
            f"lift constants differ across m={list(ms)}: {sorted(str(c) for c in constants)}"
        )
    constant = constants.pop()

    chi_values = tuple(chi(lift, m, g) for m in ms)
    obstructions = tuple(m ** 2 * c for m, c in zip(ms, chi_values))
    max_deviation = float(max(chi_values) - min(chi_values))
    is_sl = constant == SL_CONSTANT
    m_independent = max_deviation <= tol
    vanishing = all(abs(o) <= tol for o in obstructions)

    passed = m_independent and vanishing
    reason = ""
    if not m_independent:
        reason = f"character varies with m (spread {max_deviation:.3e})"
    elif not vanishing:
        reason = "nonzero character"
        if not is_sl:
            logger.warning(f"Lift constant {constant} is not SL-normalized; character is {chi_values[0]:.6g}")

    logger.info(
        f"Character check over m={list(ms)} with c={constant}: "
        f"chi={chi_values[0]:.6g}, spread={max_deviation:.3e}, passed={passed}"
    )
    return CharacterReport(
        m_list=ms,
        lift_constant=constant,
        chi_values=chi_values,
        max_deviation=max_deviation,
        obstructions=obstructions,
        is_sl=is_sl,
        m_independent=m_independent,
        vanishing=vanishing,
        passed=passed,
        reason=reason,
    )


def lift_stability_check(lift, sequence, min_tail=2):
    """Whether c_ρ(m(k)) is constant for all k ≥ k₀ (k₀ is 1-based); a tail must hold min_tail powers."""
    ms = list(sequence)
    if any(b <= a for a, b in zip(ms, ms[1:])):
        logger.warning(f"Lift stability needs a strictly increasing sequence, got {ms}")
        return LiftStability(stable=False)
    try:
        constants = [lift.constant_at(m) for m in ms]
    except PreconditionError as e:
        logger.warning(f"Lift stability over {ms}: {e}")
        return LiftStability(stable=False)
    if len(constants) < min_tail:
        return LiftStability(stable=False)
    k0 = len(constants)
    while k0 > 1 and constants[k0 - 2] == constants[-1]:
        k0 -= 1
    if len(constants) - k0 + 1 < min_tail:
        return LiftStability(stable=False)
    return LiftStability(stable=True, k0=k0)


def obstruction_rows(lift, m_list, g, degree=DEFAULT_DEGREE):
    """(m, c_ρ, χ, obstruction, pullback identity defect, |2∫θ ω|) per power."""
    rows = []
    for m in m_list:
        c = chi(lift, m, g)
        rows.append((m, float(lift.constant_at(m)), c, m ** 2 * c, pullback_identity_defect(m, g, degree=degree), abs(c)))
    return rows
