"""
Order-by-order construction of approximately balanced metrics.

A state h(ℓ) = h(0) exp(−Σ_{k≤ℓ} q^k φ_k) is realized at each power m with
q = 1/m. The step to level ℓ reads the q^{ℓ+1} coefficient of K(q, h(ℓ−1)) − C_q
off a fit across powers, removes its Ker D₀ component and solves D₀φ_ℓ = 2u_ℓ,
so the deviation of h(ℓ) starts one order later.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from bergman import c_q, density
from config import parse_keyvalue
from errors import ConfigError, KahlerConeError, PreconditionError
from expansion import DEFAULT_MAX_CONDITION, check_power_list, fit_powers
from geom import (
    DEFAULT_DEGREE,
    InvariantFunction,
    InvariantMetric,
    lichnerowicz_fs,
    project_ker,
    solve_lichnerowicz,
)
from worker import sweep

logger = logging.getLogger("corrector")

EXACT_FLOOR = 1e-10
SLOPE_SLACK = 0.25
KERNEL_TOL = 1e-3
KERNEL_FLOOR = 1e-9
# Defect-correction sweeps stop once the re-extracted coefficient is this small.
REFINE_TOL = 1e-9
REFINE_SWEEPS = 4


@dataclass(frozen=True, eq=False)
class ApproxState:
    base: InvariantMetric
    corrections: tuple = ()
    injected: tuple = ()  # (order, InvariantFunction) perturbations added at q^order

    def __post_init__(self):
        for k, phi in enumerate(self.corrections, start=1):
            if phi.coefficient(0) != 0.0 or phi.coefficient(1) != 0.0:
                raise PreconditionError(f"correction φ_{k} has a component in Ker D₀")
        for order, _ in self.injected:
            if int(order) != order or order < 1:
                raise PreconditionError(f"injection order must be a positive integer, got {order}")

    @classmethod
    def from_base(cls, base, injected=()):
        return cls(base=base, corrections=(), injected=tuple(injected))

    @property
    def level(self):
        return len(self.corrections)

    @property
    def grid(self):
        return self.base.grid

    def with_correction(self, phi):
        return replace(self, corrections=self.corrections + (phi,))

    def potential_at(self, m):
        q = 1.0 / m
        potential = self.base.potential
        for k, phi in enumerate(self.corrections, start=1):
            potential = potential + (q ** k) * phi
        for order, psi in self.injected:
            potential = potential + (q ** order) * psi
        return potential

    def injected_at(self, order):
        total = InvariantFunction.zero()
        for o, psi in self.injected:
            if o == order:
                total = total + psi
        return total

    def degree_cap(self):
        caps = [self.base.potential.degree_cap]
        caps += [phi.degree_cap for phi in self.corrections]
        caps += [psi.degree_cap for _, psi in self.injected]
        return max(caps)


@dataclass(frozen=True, eq=False)
class DeviationCoefficient:
    order: int
    m_list: tuple
    coefficient: InvariantFunction
    u: InvariantFunction
    v: float
    guard_orders: int
    condition: float


@dataclass(frozen=True, eq=False)
class StepReport:
    state: ApproxState
    phi_first: InvariantFunction
    deviation: DeviationCoefficient
    sweeps: int
    refine_residual: float


@dataclass(frozen=True, eq=False)
class OrderReport:
    level: int
    m_list: tuple
    deviations: tuple
    slope: float
    exact: bool
    expected: int
    passed: bool


@dataclass(frozen=True, eq=False)
class LinearizationReport:
    phi: InvariantFunction
    ell: int
    limit: np.ndarray
    expected: np.ndarray
    sup_error: float
    relative_error: float


def realize(state, m):
    """The metric h(ℓ) at power m; leaving the Kähler cone is an error, never clipped."""
    try:
        return InvariantMetric(state.potential_at(m), state.grid)
    except KahlerConeError as e:
        raise KahlerConeError(
            f"realized state at m={m} leaves the Kähler cone: {e}", m=m, min_density=e.min_density
        ) from e


def resolve_guard_orders(n_powers, guard_orders=0):
    if guard_orders:
        return int(guard_orders)
    return 2 if n_powers >= 5 else 1


def deviation_coefficient(state, m_list, ell=None, guard_orders=0, degree=DEFAULT_DEGREE,
                          max_condition=DEFAULT_MAX_CONDITION, workers=1):
    """Coefficient u_ℓ of q^{ℓ+1} in K(q, h(ℓ−1)) − C_q, split into its Ker D₀ part v and the rest u.

    ℓ is the level being built and defaults to state.level + 1.

    (K − C_q)/q^{ℓ+1} is fitted against 1, q, …, q^{guard} per node; the
    constant term is projected onto P_0..P_degree, or onto the cap of the state
    when that is larger.
    """
    ell = state.level + 1 if ell is None else ell
    order = ell + 1
    ms = check_power_list(m_list, floor=1)
    guard = resolve_guard_orders(len(ms), guard_orders)

    def scaled_deviation(m):
        g = realize(state, m)
        return (density(m, g).values - float(c_q(m))) * float(m) ** order

    rows = sweep(scaled_deviation, ms, workers)
    q = 1.0 / np.asarray(ms, dtype=float)
    fit = fit_powers(q, np.vstack(rows), list(range(guard + 1)), max_condition)

    degree = max(int(degree), state.degree_cap())
    coefficient = InvariantFunction.from_profile(fit.coefficients[0], state.grid, degree)
    split = project_ker(coefficient)
    return DeviationCoefficient(
        order=order,
        m_list=ms,
        coefficient=coefficient,
        u=split.perp_part,
        v=split.kernel_coefficient,
        guard_orders=guard,
        condition=fit.condition,
    )


def step(state, m_list, d0_scale=1.0, guard_orders=0, refine_sweeps=REFINE_SWEEPS,
         refine_tol=REFINE_TOL, kernel_tol=KERNEL_TOL, kernel_floor=KERNEL_FLOOR,
         degree=DEFAULT_DEGREE, max_condition=DEFAULT_MAX_CONDITION, workers=1):
    """Advance h(ℓ) to h(ℓ+1).

    The first solve φ = 2u/D₀ is kept in the report; defect-correction sweeps
    then re-extract the coefficient at the trial state and add the solve of
    what remains, until it is below refine_tol.
    """
    ell = state.level + 1
    extract = dict(ell=ell, guard_orders=guard_orders, degree=degree,
                   max_condition=max_condition, workers=workers)

    dev = deviation_coefficient(state, m_list, **extract)
    u_norm = dev.u.sup_norm()
    limit = 10.0 * (kernel_tol * u_norm + kernel_floor)
    if abs(dev.v) > limit:
        raise PreconditionError(
            f"q^{dev.order} coefficient has Ker D₀ component {dev.v:.3e} "
            f"(limit {limit:.3e}); refusing to step"
        )

    phi_first = solve_lichnerowicz(dev.u, scale=d0_scale)
    phi = phi_first
    residual = float("nan")
    sweeps = 0
    while sweeps < refine_sweeps:
        check = deviation_coefficient(state.with_correction(phi), m_list, **extract)
        residual = check.u.sup_norm()
        if residual <= refine_tol:
            break
        phi = phi + solve_lichnerowicz(check.u, scale=d0_scale)
        sweeps += 1
    else:
        if refine_sweeps:
            logger.warning(
                f"Refinement at level {ell} stopped after {sweeps} sweeps "
                f"(last residual {residual:.3e} > {refine_tol:.1e})"
            )

    logger.info(
        f"Step to level {ell}: |u|={u_norm:.3e}, |v|={abs(dev.v):.3e}, "
        f"sweeps={sweeps}, residual={residual:.3e}"
    )
    return StepReport(
        state=state.with_correction(phi),
        phi_first=phi_first,
        deviation=dev,
        sweeps=sweeps,
        refine_residual=residual,
    )


def sup_deviations(state, m_list, workers=1):
    def sup_dev(m):
        return density(m, realize(state, m)).sup_deviation()
    return tuple(sweep(sup_dev, m_list, workers))


def verify_order(state, m_list, floor=EXACT_FLOOR, slack=SLOPE_SLACK, workers=1):
    """Log-log slope of sup|K − C_q| against q; expected ℓ + 2 at level ℓ."""
    ms = check_power_list(m_list, floor=1)
    deviations = sup_deviations(state, ms, workers)
    expected = state.level + 2
    if max(deviations) <= floor:
        return OrderReport(level=state.level, m_list=ms, deviations=deviations, slope=float("nan"),
                           exact=True, expected=expected, passed=True)
    log_q = -np.log(np.asarray(ms, dtype=float))
    log_d = np.log(np.maximum(np.asarray(deviations), np.finfo(float).tiny))
    slope = float(np.polyfit(log_q, log_d, 1)[0])
    return OrderReport(level=state.level, m_list=ms, deviations=deviations, slope=slope,
                       exact=False, expected=expected, passed=slope >= expected - slack)


def linearization_check(phi, ell, m_list, grid, amplitude=1e-3, d0_scale=1.0, guard_orders=0,
                        max_condition=DEFAULT_MAX_CONDITION, workers=1):
    """Compare lim_q [K(q, h₀e^{−q^ℓφ}) − K(q, h₀)]/q^{ℓ+1} with −D₀φ/2 at the round metric.

    The difference quotient is taken centrally in an amplitude ε, so the
    response is linear in φ up to O(ε²).
    """
    if phi.coefficient(0) != 0.0 or phi.coefficient(1) != 0.0:
        raise PreconditionError("linearization probe must be orthogonal to Ker D₀")
    ms = check_power_list(m_list, floor=1)
    guard = resolve_guard_orders(len(ms), guard_orders)

    def quotient(m):
        q = 1.0 / m
        bump = (amplitude * q ** ell) * phi
        plus = density(m, InvariantMetric(bump, grid)).values
        minus = density(m, InvariantMetric(-bump, grid)).values
        return (plus - minus) / (2.0 * amplitude * q ** (ell + 1))

    rows = sweep(quotient, ms, workers)
    q = 1.0 / np.asarray(ms, dtype=float)
    fit = fit_powers(q, np.vstack(rows), list(range(guard + 1)), max_condition)
    limit = fit.coefficients[0]
    expected = -0.5 * lichnerowicz_fs(phi, scale=d0_scale)(grid.nodes)
    sup_error = float(np.max(np.abs(limit - expected)))
    scale = float(np.max(np.abs(expected)))
    relative = sup_error / scale if scale > 0.0 else sup_error
    return LinearizationReport(phi=phi, ell=ell, limit=limit, expected=expected,
                               sup_error=sup_error, relative_error=relative)


# --- State serialization ---

def dump_state(state):
    """Plain-text key-value form of a state; floats keep 17 significant digits."""
    lines = ["# approximate solution state", f"level = {state.level}"]
    for k, value in state.base.potential.pairs():
        lines.append(f"base = {k} {value:.17g}")
    for order, phi in enumerate(state.corrections, start=1):
        pairs = phi.pairs() or [(2, 0.0)]
        for k, value in pairs:
            lines.append(f"correction = {order} {k} {value:.17g}")
    for order, psi in state.injected:
        for k, value in psi.pairs():
            lines.append(f"inject = {order} {k} {value:.17g}")
    return "\n".join(lines) + "\n"


def load_state(text, grid, path=None):
    level = None
    base = []
    corrections = {}
    injected = {}
    for lineno, key, raw in parse_keyvalue(text, path):
        parts = raw.split()
        try:
            if key == "level":
                level = int(raw)
            elif key == "base":
                base.append((int(parts[0]), float(parts[1])))
            elif key == "correction":
                corrections.setdefault(int(parts[0]), []).append((int(parts[1]), float(parts[2])))
            elif key == "inject":
                injected.setdefault(int(parts[0]), []).append((int(parts[1]), float(parts[2])))
            else:
                raise ConfigError("unknown field", path=path, line=lineno, field=key)
        except (ValueError, IndexError) as e:
            raise ConfigError(f"cannot parse {raw!r}", path=path, line=lineno, field=key) from e

    if level is None:
        level = len(corrections)
    if sorted(corrections) != list(range(1, level + 1)):
        raise ConfigError(f"corrections {sorted(corrections)} do not match level {level}", path=path)

    return ApproxState(
        base=InvariantMetric(InvariantFunction.from_pairs(base), grid),
        corrections=tuple(InvariantFunction.from_pairs(corrections[k]) for k in range(1, level + 1)),
        injected=tuple((order, InvariantFunction.from_pairs(injected[order])) for order in sorted(injected)),
    )
