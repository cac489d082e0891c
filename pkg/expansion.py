"""
Large-m expansion of the Bergman density, K(q, h) ~ 1 + a_1 q + a_2 q² + a_3 q³,
recovered by a pointwise least-squares fit in q = 1/m across a list of powers.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from bergman import density
from errors import FitError
from geom import scalar_curvature
from worker import sweep

logger = logging.getLogger("expansion")

MIN_FIT_POWER = 8
DEFAULT_MAX_CONDITION = 1e10
DEFAULT_RESIDUAL_TOL = 1e-3


@dataclass(frozen=True, eq=False)
class PowerFit:
    coefficients: np.ndarray  # one row per exponent, one column per node
    residuals: np.ndarray
    condition: float


@dataclass(frozen=True, eq=False)
class ExpansionFit:
    m_list: tuple
    order: int
    a1: np.ndarray
    a2: np.ndarray
    a3: np.ndarray
    residual_norm: float
    leading_error: float
    condition: float
    reliable: bool


def fit_powers(q, data, exponents, max_condition=DEFAULT_MAX_CONDITION):
    """Least squares of data[j] ≈ Σ_e c_e q_j^e, independently per node.

    data has one row per q. Raises FitError when the design matrix is
    numerically singular or rank-deficient.
    """
    q = np.asarray(q, dtype=float)
    design = np.column_stack([q ** e for e in exponents])
    if design.shape[0] < design.shape[1]:
        raise FitError(
            f"{design.shape[0]} powers cannot determine {design.shape[1]} coefficients"
        )
    condition = float(np.linalg.cond(design))
    if not np.isfinite(condition) or condition > max_condition:
        raise FitError(
            f"q-power design matrix is ill-conditioned (cond={condition:.3e} > {max_condition:.1e})",
            condition=condition,
        )
    coefficients, _, rank, _ = np.linalg.lstsq(design, data, rcond=None)
    if rank < design.shape[1]:
        raise FitError(f"q-power design matrix has rank {rank}", condition=condition)
    return PowerFit(coefficients=coefficients, residuals=design @ coefficients - data, condition=condition)


def resolve_fit_order(n_powers, order=0):
    if order == 0:
        return 3 if n_powers >= 5 else 2
    if order not in (2, 3):
        raise FitError(f"fit order must be 2 or 3, got {order}")
    if order == 3 and n_powers < 5:
        raise FitError(f"a cubic fit needs at least 5 powers, got {n_powers}")
    return order


def check_power_list(m_list, minimum=3, floor=MIN_FIT_POWER):
    ms = tuple(int(m) for m in m_list)
    if len(set(ms)) != len(ms):
        raise FitError(f"powers must be distinct: {list(ms)}")
    if len(ms) < minimum:
        raise FitError(f"need at least {minimum} distinct powers, got {len(ms)}")
    if min(ms) < floor:
        raise FitError(f"powers below {floor} are outside the asymptotic regime: {list(ms)}")
    return tuple(sorted(ms))


def fit_expansion(g, m_list, order=0, max_condition=DEFAULT_MAX_CONDITION,
                  residual_tol=DEFAULT_RESIDUAL_TOL, workers=1):
    ms = check_power_list(m_list)
    order = resolve_fit_order(len(ms), order)
    logger.info(f"Fitting order-{order} expansion over m={list(ms)} ({g.grid.node_count} nodes)")

    profiles = sweep(lambda m: density(m, g).values, ms, workers)
    q = 1.0 / np.asarray(ms, dtype=float)
    data = np.vstack(profiles)

    # Fixed leading term 1; a second fit with a free constant exposes the leading coefficient.
    exponents = list(range(1, order + 1))
    fit = fit_powers(q, data - 1.0, exponents, max_condition)
    leading_fit = fit_powers(q, data, [0] + exponents, max_condition=np.inf)
    leading_error = float(np.max(np.abs(leading_fit.coefficients[0] - 1.0)))

    # Residual at the largest power, where truncation error is smallest.
    residual_norm = float(np.max(np.abs(fit.residuals[-1])))
    reliable = residual_norm <= residual_tol
    if not reliable:
        logger.warning(
            f"Expansion fit residual {residual_norm:.3e} exceeds {residual_tol:.1e}; "
            f"coefficients are unreliable"
        )

    a3 = fit.coefficients[2] if order >= 3 else np.zeros_like(fit.coefficients[0])
    return ExpansionFit(
        m_list=ms,
        order=order,
        a1=fit.coefficients[0],
        a2=fit.coefficients[1],
        a3=a3,
        residual_norm=residual_norm,
        leading_error=leading_error,
        condition=fit.condition,
        reliable=reliable,
    )


def verify_a1(g, m_list, fit=None, **kwargs):
    """sup |a_1 − σ/2| over the grid."""
    fit = fit or fit_expansion(g, m_list, **kwargs)
    return float(np.max(np.abs(fit.a1 - 0.5 * scalar_curvature(g))))


def expansion_rows(fit, g):
    """(x, a1, a2, a3, σ/2, |a1 − σ/2|) per node."""
    half_sigma = 0.5 * scalar_curvature(g)
    err = np.abs(fit.a1 - half_sigma)
    return [
        (float(x), float(a1), float(a2), float(a3), float(s), float(e))
        for x, a1, a2, a3, s, e in zip(g.grid.nodes, fit.a1, fit.a2, fit.a3, half_sigma, err)
    ]
