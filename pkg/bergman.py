"""
Bergman kernel density of (P¹, O(1), h_φ) at power m.

The monomials z^i, 0 ≤ i ≤ m, are L²-orthogonal for any circle-invariant
metric, so the Gram matrix is diagonal and the density is a finite sum:

    K(q, h) = (1/m) Σ_i |z^i|²_{h^m} / G_i,   |z^i|²_{h^m} = x^i (1−x)^{m−i} e^{−mφ}.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.special import logsumexp

from errors import PreconditionError
from geom import DEFAULT_DEGREE, InvariantFunction, InvariantMetric

logger = logging.getLogger("bergman")

# Above this power every sum over sections runs in log space.
LOG_SPACE_ABOVE = 128


@dataclass(frozen=True, eq=False)
class SectionGram:
    m: int
    values: np.ndarray
    log_values: np.ndarray

    @property
    def n_sections(self):
        return self.m + 1


@dataclass(frozen=True, eq=False)
class DensityProfile:
    m: int
    values: np.ndarray
    metric: InvariantMetric

    @property
    def q(self):
        return 1.0 / self.m

    @property
    def c_q(self):
        return float(c_q(self.m))

    @property
    def deviation(self):
        return self.values - self.c_q

    def sup_deviation(self):
        return float(np.max(np.abs(self.deviation)))


def c_q(m):
    """Average density (1/m) dim H⁰(O(m)) = (m+1)/m, exact."""
    _check_power(m)
    return Fraction(m + 1, m)


def _check_power(m, g=None):
    if isinstance(m, bool) or int(m) != m or m < 1:
        raise PreconditionError(f"power m must be a positive integer, got {m!r}")
    if g is not None and m > g.grid.design_m_max:
        logger.warning(
            f"m={m} exceeds the grid's design maximum {g.grid.design_m_max} "
            f"({g.grid.node_count} nodes); results may be unresolved"
        )


def log_section_norms(m, g, x=None, include_weight=True):
    """log |z^i|²_{h^m} for i = 0..m, shape (len(x), m+1)."""
    if x is None:
        x = g.grid.nodes
        phi = g.potential_values
    else:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        phi = g.potential(x)
    i = np.arange(m + 1)
    # 0·log 0 = 0 at the poles
    with np.errstate(divide="ignore", invalid="ignore"):
        log_x = np.log(x)[:, None]
        log_1mx = np.log1p(-x)[:, None]
        logs = np.where(i == 0, 0.0, i * log_x) + np.where(i == m, 0.0, (m - i) * log_1mx)
    if include_weight:
        logs = logs - m * phi[:, None]
    return logs


def gram(m, g):
    """Diagonal Gram entries G_i = ∫ |z^i|²_{h^m} ω_φ."""
    _check_power(m, g)
    logs = log_section_norms(m, g)
    measure = g.grid.weights * g.density
    if m > LOG_SPACE_ABOVE:
        log_g = logsumexp(logs + np.log(measure)[:, None], axis=0)
        values = np.exp(log_g)
    else:
        values = measure @ np.exp(logs)
        log_g = np.log(values)
    return SectionGram(m=m, values=values, log_values=log_g)


def normalized_log_norms(m, g, x=None, sg=None):
    """log ‖τ_i‖² for the orthonormal basis τ_i = z^i / √G_i."""
    sg = sg or gram(m, g)
    return log_section_norms(m, g, x) - sg.log_values[None, :]


def density(m, g, sg=None):
    sg = sg or gram(m, g)
    if m > LOG_SPACE_ABOVE:
        values = np.exp(logsumexp(normalized_log_norms(m, g, sg=sg), axis=1)) / m
    else:
        norms = np.exp(log_section_norms(m, g))
        values = (norms / sg.values[None, :]).sum(axis=1) / m
    return DensityProfile(m=m, values=values, metric=g)


def fs_pullback(m, g, degree=DEFAULT_DEGREE):
    """Pull back the Fubini–Study metric of P(H⁰) along the embedding given by
    the L²(h^m) orthonormal basis. The potential is projected onto Legendre and
    normalized to mean zero; its moment map obeys x̃_m = Σ i|τ_i|² / (m Σ|τ_i|²).

    degree is the Legendre cap of the projection. It is raised to 4m and to the
    cap of g when smaller, and lowered to the node count.
    """
    sg = gram(m, g)
    a = log_section_norms(m, g, include_weight=False) - sg.log_values[None, :]
    profile = logsumexp(a, axis=1) / m
    degree = min(max(g.potential.degree_cap, int(degree), 4 * m), g.grid.node_count - 1)
    f = InvariantFunction.from_profile(profile, g.grid, degree)
    f = f - InvariantFunction.constant(f.mean())
    return InvariantMetric(f, g.grid)


def balance_defect(m, g):
    return density(m, g).sup_deviation()
