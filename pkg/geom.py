"""
Circle-invariant Kähler geometry on (P¹, O(1)) in the moment coordinate.

Every invariant function is a truncated Legendre series in x = |z|²/(1+|z|²),
written in the basis P_k(2x − 1). In that basis the Fubini–Study Laplacian and
the Lichnérowicz operator at the round metric are diagonal, and integrals
against ω_φ reduce to Gauss–Legendre quadrature on (0, 1) with weight 1 + Δ₀φ.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.polynomial import legendre

from errors import GridMismatchError, KahlerConeError, PreconditionError

logger = logging.getLogger("geom")

DEFAULT_DEGREE = 64
MIN_NODES = 256
KERNEL_TOL = 1e-10

# Dense uniform sample used for sup-norms and admissibility of bare functions.
_SUP_SAMPLES = np.linspace(0.0, 1.0, 2001)


def grid_size(m_max, override=0):
    """Node count for a run whose largest power is m_max (override wins when > 0)."""
    if override:
        return int(override)
    return max(8 * int(m_max) + 64, MIN_NODES)


@dataclass(frozen=True, eq=False)
class MomentGrid:
    nodes: np.ndarray
    weights: np.ndarray
    node_count: int

    @property
    def design_m_max(self):
        # Inverse of the sizing rule: the largest power this grid was built for.
        return max((self.node_count - 64) // 8, 0)

    def same_as(self, other):
        return self.node_count == other.node_count


@lru_cache(maxsize=32)
def moment_grid(node_count):
    """Gauss–Legendre grid on (0, 1), reproducible from its node count alone."""
    if node_count < 2:
        raise PreconditionError(f"node_count must be at least 2, got {node_count}")
    y, w = legendre.leggauss(node_count)
    nodes = 0.5 * (y + 1.0)
    weights = 0.5 * w
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return MomentGrid(nodes=nodes, weights=weights, node_count=int(node_count))


@dataclass(frozen=True, eq=False)
class InvariantFunction:
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.coeffs, dtype=float)).copy()
        if c.ndim != 1 or c.size == 0:
            raise PreconditionError("Legendre coefficients must be a non-empty vector")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    # --- constructors ---

    @classmethod
    def zero(cls, degree=0):
        return cls(np.zeros(degree + 1))

    @classmethod
    def constant(cls, value):
        return cls([float(value)])

    @classmethod
    def basis(cls, k, scale=1.0):
        c = np.zeros(k + 1)
        c[k] = scale
        return cls(c)

    @classmethod
    def from_pairs(cls, pairs, degree=None):
        pairs = [(int(k), float(v)) for k, v in pairs]
        top = max([k for k, _ in pairs], default=0)
        if degree is not None:
            top = max(top, degree)
        c = np.zeros(top + 1)
        for k, v in pairs:
            if k < 0:
                raise PreconditionError(f"Legendre index must be nonnegative, got {k}")
            c[k] += v
        return cls(c)

    @classmethod
    def from_profile(cls, values, grid, degree):
        """Spectral projection of grid samples onto P_0..P_degree."""
        values = np.asarray(values, dtype=float)
        if values.shape != grid.nodes.shape:
            raise GridMismatchError(
                f"profile has {values.size} samples, grid has {grid.node_count} nodes"
            )
        degree = min(int(degree), grid.node_count - 1)
        vander = legendre.legvander(2.0 * grid.nodes - 1.0, degree)
        norms = 2.0 * np.arange(degree + 1) + 1.0
        return cls(norms * (vander.T @ (grid.weights * values)))

    # --- evaluation ---

    @property
    def degree_cap(self):
        return self.coeffs.size - 1

    def __call__(self, x):
        return legendre.legval(2.0 * np.asarray(x, dtype=float) - 1.0, self.coeffs)

    def derivative(self, x, order=1):
        """d^order f / dx^order; the chain rule through y = 2x − 1 gives 2^order."""
        if self.coeffs.size <= order:
            return np.zeros_like(np.asarray(x, dtype=float))
        dc = legendre.legder(self.coeffs, order)
        return (2.0 ** order) * legendre.legval(2.0 * np.asarray(x, dtype=float) - 1.0, dc)

    def mean(self):
        return float(self.coeffs[0])

    def coefficient(self, k):
        return float(self.coeffs[k]) if k < self.coeffs.size else 0.0

    def pairs(self):
        return [(k, float(v)) for k, v in enumerate(self.coeffs) if v != 0.0]

    def sup_norm(self):
        return float(np.max(np.abs(self(_SUP_SAMPLES))))

    # --- algebra ---

    def padded(self, degree):
        if degree <= self.degree_cap:
            return self
        c = np.zeros(degree + 1)
        c[: self.coeffs.size] = self.coeffs
        return InvariantFunction(c)

    def truncated(self, degree):
        return InvariantFunction(self.coeffs[: degree + 1])

    def _aligned(self, other):
        top = max(self.degree_cap, other.degree_cap)
        return self.padded(top).coeffs, other.padded(top).coeffs

    def __add__(self, other):
        if not isinstance(other, InvariantFunction):
            return NotImplemented
        a, b = self._aligned(other)
        return InvariantFunction(a + b)

    def __sub__(self, other):
        if not isinstance(other, InvariantFunction):
            return NotImplemented
        a, b = self._aligned(other)
        return InvariantFunction(a - b)

    def __neg__(self):
        return InvariantFunction(-self.coeffs)

    def __mul__(self, scalar):
        return InvariantFunction(float(scalar) * self.coeffs)

    __rmul__ = __mul__

    def __repr__(self):
        shown = ", ".join(f"P{k}:{v:.6g}" for k, v in self.pairs()[:6])
        more = "" if len(self.pairs()) <= 6 else ", ..."
        return f"InvariantFunction({shown}{more})"


@dataclass(frozen=True, eq=False)
class KernelSplit:
    kernel_part: InvariantFunction
    perp_part: InvariantFunction

    @property
    def kernel_coefficient(self):
        return self.kernel_part.coefficient(1)


# --- Diagonal operators ---

def laplace_eigenvalue(k):
    return -k * (k + 1)


def lichnerowicz_eigenvalue(k):
    return (k - 1) * k * (k + 1) * (k + 2)


def laplace_fs(f):
    """Δ₀f = d/dx(x(1−x) df/dx), diagonal on P_k with eigenvalue −k(k+1)."""
    k = np.arange(f.coeffs.size)
    return InvariantFunction(-(k * (k + 1)) * f.coeffs)


def lichnerowicz_fs(f, scale=1.0):
    """D₀ = Δ₀² + 2Δ₀ at the round metric; eigenvalue (k−1)k(k+1)(k+2) on P_k."""
    k = np.arange(f.coeffs.size)
    nu = (k - 1) * k * (k + 1) * (k + 2)
    return InvariantFunction(scale * nu * f.coeffs)


def project_ker(f):
    """Split f − mean(f) into its Ker D₀ component (span P_1) and the rest."""
    c1 = f.coefficient(1)
    perp = np.array(f.coeffs, dtype=float)
    perp[0] = 0.0
    if perp.size > 1:
        perp[1] = 0.0
    return KernelSplit(kernel_part=InvariantFunction([0.0, c1]), perp_part=InvariantFunction(perp))


def solve_lichnerowicz(u, scale=1.0, tol=KERNEL_TOL):
    """The unique φ ⊥ Ker D₀ with D₀φ = 2u."""
    c = u.coeffs
    limit = tol * max(1.0, float(np.max(np.abs(c))))
    residual = max(abs(u.coefficient(0)), abs(u.coefficient(1)))
    if residual > limit:
        raise PreconditionError(
            f"right-hand side has kernel/mean components {residual:.3e} above {limit:.3e}"
        )
    k = np.arange(c.size)
    nu = scale * (k - 1) * k * (k + 1) * (k + 2)
    phi = np.zeros(c.size)
    phi[2:] = 2.0 * c[2:] / nu[2:]
    return InvariantFunction(phi)


# --- Metrics ---

def density_function(potential):
    """1 + Δ₀φ as an invariant function."""
    return InvariantFunction.constant(1.0) + laplace_fs(potential)


def min_density(potential, grid=None):
    """Smallest value of 1 + Δ₀φ over the poles, a dense sample, and the grid nodes."""
    w = density_function(potential)
    samples = _SUP_SAMPLES if grid is None else np.concatenate([_SUP_SAMPLES, grid.nodes])
    return float(np.min(w(samples)))


@dataclass(frozen=True, eq=False)
class InvariantMetric:
    potential: InvariantFunction
    grid: MomentGrid
    density: np.ndarray = field(init=False, repr=False)
    potential_values: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        low = min_density(self.potential, self.grid)
        if not low > 0.0:
            raise KahlerConeError(
                f"1 + Δ₀φ reaches {low:.6g}; potential is outside the Kähler cone",
                min_density=low,
            )
        w = density_function(self.potential)(self.grid.nodes)
        phi = self.potential(self.grid.nodes)
        w.setflags(write=False)
        phi.setflags(write=False)
        object.__setattr__(self, "density", w)
        object.__setattr__(self, "potential_values", phi)

    @classmethod
    def fubini_study(cls, grid):
        return cls(InvariantFunction.zero(), grid)

    def volume(self):
        return float(np.sum(self.grid.weights * self.density))


def scalar_curvature(g):
    """σ_ω at the grid nodes, normalized so σ(ω_FS) = 2.

    σ = (2 − Δ₀ log w) / w with w = 1 + Δ₀φ; Δ₀ log w is expanded as
    Δ₀w / w − x(1−x) (w′/w)² so only exact series derivatives are needed.
    """
    x = g.grid.nodes
    w_fn = density_function(g.potential)
    w = g.density
    w1 = w_fn.derivative(x)
    lap_w = laplace_fs(w_fn)(x)
    lap_log_w = lap_w / w - x * (1.0 - x) * (w1 / w) ** 2
    return (2.0 - lap_log_w) / w


def moment_map(g, x=None):
    """x̃ = x + x(1−x) dφ/dx, at the grid nodes unless x is given."""
    x = g.grid.nodes if x is None else np.asarray(x, dtype=float)
    return x + x * (1.0 - x) * g.potential.derivative(x)


def integrate(f, g):
    """∫_M f ω_φ for a profile sampled at the metric's grid nodes."""
    f = np.asarray(f, dtype=float)
    if f.shape != g.grid.nodes.shape:
        raise GridMismatchError(
            f"profile has {f.size} samples but the metric's grid has {g.grid.node_count} nodes"
        )
    return float(np.sum(g.grid.weights * f * g.density))


def random_potential(rng, degree=6, min_weight=0.5):
    """Seeded admissible potential with decaying coefficients on P_1..P_degree."""
    c = np.zeros(degree + 1)
    k = np.arange(1, degree + 1)
    c[1:] = rng.standard_normal(degree) / (k * (k + 1))
    f = InvariantFunction(c)
    low = min_density(f)
    if low < min_weight:
        # 1 + s·Δ₀φ is affine in s, so this scale puts the minimum at min_weight.
        f = f * ((1.0 - min_weight) / (1.0 - low))
    return f
