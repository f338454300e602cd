"""Checks for the discrete estimates: energy, extremum, contraction, weak form.

The central bound: a chain family run from u0 with certified volume growth rate
c0 (so that vertex weights grow at most like exp(c0 * dt) along the run's grid)
satisfies, with a0 = ||u0||^2 weighted by the t=0 measure,

    max_j ||sample_j||^2_{m_{t_j}}              <= exp(c0 * horizon) * a0
    sum_{j>=1} delta * energy(sample_j, t_j)    <= exp(c0 * horizon) * a0

each on its own.  (The two left-hand sides do not admit the common bound jointly:
for a static metric the first alone already equals the right side at t = 0 while
the second is positive, so a summed form is unverifiable by design, not by bug.
What the step-by-step induction gives is ``a_l + 2 * sum_{k<=l} h*E(u_k) <=
exp(c0*l*h) * a0`` per index, of which the two bounds above are the corollaries.)
EnergyReport.passed is the conjunction of the two; margin measures the worse one.

The dissipation quadrature runs over the produced samples j = 1..N*m, which for
m = 1 is exactly the step-sequence sum sum_k h * energy(u_k, kh); including the
j = 0 sample would charge the scheme for the raw initial datum's Dirichlet
energy, which it does not control.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .geometry import (Scenario, TimeWeightedGraph, build_scenario, dirichlet_energy,
                       edge_conductances, vertex_weights, volume_decay_rate)
from .linalg import stiffness_apply
from .profiles import make_initial_data
from .scheme import (ChainFamily, DiscreteFunction, degiorgi_interpolate,
                     run_interpolated)

__all__ = [
    "weighted_l2_sq",
    "weighted_l2",
    "EnergyReport",
    "energy_estimate",
    "ExtremumReport",
    "extremum_check",
    "ContractionReport",
    "contraction_check",
    "OracleResult",
    "semidiscrete_oracle",
    "oracle_value_at",
    "ConvergenceRow",
    "chain_error_vs_oracle",
    "convergence_table",
    "fit_order",
    "TestFunction",
    "default_test_catalog",
    "WeakResidualRow",
    "weak_residual",
    "initial_attainment_check",
    "l2h1_interp_norm",
    "degiorgi_family",
]

_GRID_FUZZ = 1e-9


def weighted_l2_sq(values: np.ndarray, weights: np.ndarray) -> float:
    """sum_i w_i * v_i^2, the squared l2 norm against a discrete measure."""
    return float(np.dot(weights, values * values))


def weighted_l2(values: np.ndarray, weights: np.ndarray) -> float:
    return math.sqrt(weighted_l2_sq(values, weights))


# ---------------------------------------------------------------------------
# energy estimate
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EnergyReport:
    """Outcome of the energy estimate on one chain family.

    sup_l2      max over all grid samples of the weighted squared l2 norm
    dissipation sum_{j>=1} delta * energy(sample_j, t_j)
    rhs         exp(c0_used * horizon) * ||u0||^2_{m_0}
    margin      (rhs - max(sup_l2, dissipation)) / rhs  (0 when rhs == 0)
    passed      sup_l2 <= rhs*(1+slack) and dissipation <= rhs*(1+slack)
    """

    sup_l2: float
    dissipation: float
    rhs: float
    c0_used: float
    slack: float
    passed: bool
    margin: float

    def to_json_dict(self) -> dict:
        return {"sup_l2": self.sup_l2, "dissipation": self.dissipation,
                "rhs": self.rhs, "c0_used": self.c0_used, "slack": self.slack,
                "pass": self.passed, "margin": self.margin}


def energy_estimate(chain: ChainFamily, G: TimeWeightedGraph, u0: DiscreteFunction,
                    c0: float, slack: float = 1e-8) -> EnergyReport:
    """Evaluate both sides of the energy estimate for a chain family.

    ``c0`` must dominate the weight growth on the chain's own delta-grid
    (``volume_growth_bound`` over that grid certifies it); a larger value only
    slackens the bound.
    """
    if not np.array_equal(chain.samples[0].values, u0.values):
        raise ValueError("chain was not produced from the given initial value")
    if c0 < 0:
        raise ValueError(f"c0 must be nonnegative, got {c0}")
    rhs = math.exp(c0 * chain.horizon) * weighted_l2_sq(u0.values, vertex_weights(G, 0.0))
    sup_l2 = max(weighted_l2_sq(s.values, vertex_weights(G, s.time))
                 for s in chain.samples)
    delta = chain.delta
    dissipation = sum(delta * dirichlet_energy(G, s.time, s.values)
                      for s in chain.produced())
    lhs = max(sup_l2, dissipation)
    passed = lhs <= rhs * (1.0 + slack)
    margin = 0.0 if rhs == 0.0 else (rhs - lhs) / rhs
    return EnergyReport(sup_l2=sup_l2, dissipation=dissipation, rhs=rhs,
                        c0_used=float(c0), slack=float(slack), passed=bool(passed),
                        margin=margin)


# ---------------------------------------------------------------------------
# extremum (maximum principle)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExtremumReport:
    lo: float
    hi: float
    worst_violation: float
    tol: float
    passed: bool

    def to_json_dict(self) -> dict:
        return {"lo": self.lo, "hi": self.hi, "worst_violation": self.worst_violation,
                "tol": self.tol, "pass": self.passed}


def extremum_check(chain: ChainFamily, u0: DiscreteFunction) -> ExtremumReport:
    """Every sample must stay inside [min u0, max u0] up to solver noise."""
    lo = float(u0.values.min())
    hi = float(u0.values.max())
    worst = 0.0
    for s in chain.produced():
        worst = max(worst,
                    float(s.values.max()) - hi,
                    lo - float(s.values.min()))
    worst = max(worst, 0.0)
    tol = 1e-12 * (float(np.max(np.abs(u0.values))) + 1.0)
    return ExtremumReport(lo=lo, hi=hi, worst_violation=worst, tol=tol,
                          passed=worst <= tol)


# ---------------------------------------------------------------------------
# contraction / linearity
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ContractionReport:
    linearity_residual: float
    linearity_tol: float
    difference_energy: EnergyReport
    passed: bool

    def to_json_dict(self) -> dict:
        return {"linearity_residual": self.linearity_residual,
                "linearity_tol": self.linearity_tol,
                "difference_energy": self.difference_energy.to_json_dict(),
                "pass": self.passed}


def contraction_check(G: TimeWeightedGraph, u0: DiscreteFunction, v0: DiscreteFunction,
                      h: float, m: int, c0: float, slack: float = 1e-8,
                      rel_tol: float = 1e-10) -> ContractionReport:
    """Linearity of the scheme plus the energy estimate on the difference run.

    Runs chains from u0, v0 and u0 - v0; the sample-wise difference of the first
    two must match the third (the scheme is a fixed linear solve per step), and
    the difference run must satisfy the energy estimate with the same c0, which
    is the contraction bound between the two solutions.
    """
    chain_u = run_interpolated(G, u0, h, m, rel_tol=rel_tol)
    chain_v = run_interpolated(G, v0, h, m, rel_tol=rel_tol)
    d0 = DiscreteFunction(u0.values - v0.values, 0.0)
    chain_d = run_interpolated(G, d0, h, m, rel_tol=rel_tol)
    residual = max(
        float(np.max(np.abs((su.values - sv.values) - sd.values)))
        for su, sv, sd in zip(chain_u.samples, chain_v.samples, chain_d.samples))
    w0 = vertex_weights(G, 0.0)
    tol = 1e-9 * (weighted_l2(u0.values, w0) + weighted_l2(v0.values, w0))
    energy = energy_estimate(chain_d, G, d0, c0, slack)
    return ContractionReport(linearity_residual=residual, linearity_tol=tol,
                             difference_energy=energy,
                             passed=bool(energy.passed and residual <= tol))


# ---------------------------------------------------------------------------
# semi-discrete reference flow
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OracleResult:
    """Reference trajectory of u' = -M_t^{-1} S_t u on a uniform grid."""

    samples: list[DiscreteFunction]
    n_steps: int
    self_check: float


def _rk4_run(G: TimeWeightedGraph, y0: np.ndarray, T: float, n: int) -> list[np.ndarray]:
    def f(t: float, y: np.ndarray) -> np.ndarray:
        return -stiffness_apply(G.edges, edge_conductances(G, t), y) / vertex_weights(G, t)

    dt = T / n
    y = y0.copy()
    out = [y0.copy()]
    for i in range(n):
        t = i * dt
        k1 = f(t, y)
        k2 = f(t + 0.5 * dt, y + 0.5 * dt * k1)
        k3 = f(t + 0.5 * dt, y + 0.5 * dt * k2)
        k4 = f(t + dt, y + dt * k3)
        y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out.append(y)
    return out


def semidiscrete_oracle(G: TimeWeightedGraph, u0: DiscreteFunction, T: float,
                        n_steps: int = 4096, self_check_tol: float = 1e-10) -> OracleResult:
    """Classical RK4 integration of the exact-in-time flow u' = -M_t^{-1} S_t u.

    n_steps must be even and large enough that halving it moves the trajectory
    by less than ``self_check_tol`` in the weighted l2 norm at the coarse grid
    times (checked by actually running both; failure raises).  The step count
    also has to respect RK4's stability window for the stiffest graph mode, so
    err on the large side; the cost is linear in n_steps.
    """
    if u0.values.shape != (G.n_vertices,):
        raise ValueError(f"u0 has {len(u0.values)} entries, graph has {G.n_vertices}")
    if not (0 < T <= G.horizon + _GRID_FUZZ * max(1.0, G.horizon)):
        raise ValueError(f"T = {T} outside (0, {G.horizon}]")
    if n_steps < 2 or n_steps % 2:
        raise ValueError(f"n_steps must be even and >= 2, got {n_steps}")
    fine = _rk4_run(G, u0.values, T, n_steps)
    coarse = _rk4_run(G, u0.values, T, n_steps // 2)
    dt = T / n_steps
    self_check = 0.0
    for i, yc in enumerate(coarse):
        t = i * (2 * dt)
        self_check = max(self_check,
                         weighted_l2(fine[2 * i] - yc, vertex_weights(G, t)))
    if not (self_check < self_check_tol):  # also catches NaN from a blown-up run
        raise ValueError(
            f"oracle self-check failed: halving n_steps={n_steps} moves the "
            f"trajectory by {self_check:.3e} (tolerance {self_check_tol:.1e})")
    samples = [DiscreteFunction(y, i * dt) for i, y in enumerate(fine)]
    return OracleResult(samples=samples, n_steps=n_steps, self_check=self_check)


def oracle_value_at(oracle: OracleResult, t: float) -> np.ndarray:
    """Oracle trajectory at time t, linearly interpolated between grid samples."""
    dt = oracle.samples[1].time - oracle.samples[0].time
    pos = t / dt
    i = int(math.floor(pos + _GRID_FUZZ))
    i = min(max(i, 0), len(oracle.samples) - 1)
    frac = pos - i
    if frac <= _GRID_FUZZ or i == len(oracle.samples) - 1:
        return oracle.samples[i].values
    return (1.0 - frac) * oracle.samples[i].values + frac * oracle.samples[i + 1].values


# ---------------------------------------------------------------------------
# convergence table
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConvergenceRow:
    h: float
    m: int
    error: float
    observed_order: Optional[float]

    def to_json_dict(self) -> dict:
        return {"h": self.h, "m": self.m, "error": self.error,
                "observed_order": self.observed_order}


def chain_error_vs_oracle(chain: ChainFamily, G: TimeWeightedGraph,
                          oracle: OracleResult) -> float:
    """max over chain grid times of the weighted l2 distance to the oracle."""
    err = 0.0
    for s in chain.samples:
        ref = oracle_value_at(oracle, s.time)
        err = max(err, weighted_l2(s.values - ref, vertex_weights(G, s.time)))
    return err


def convergence_table(spec: Scenario, u0_spec: dict, h_list, m: int = 1,
                      oracle_steps: int = 4096, rel_tol: float = 1e-10) -> list[ConvergenceRow]:
    """Errors of chain runs against the semi-discrete oracle for each h.

    observed_order between consecutive rows is log(err ratio)/log(h ratio); it is
    None on the first row and whenever an error sits at rounding level (below
    1e-13), where the quotient measures noise.
    """
    G = build_scenario(spec)
    u0 = make_initial_data(G, u0_spec)
    oracle = semidiscrete_oracle(G, u0, G.horizon, oracle_steps)
    rows: list[ConvergenceRow] = []
    prev: Optional[ConvergenceRow] = None
    for h in h_list:
        chain = run_interpolated(G, u0, float(h), m, rel_tol=rel_tol)
        err = chain_error_vs_oracle(chain, G, oracle)
        order = None
        if prev is not None and prev.error > 1e-13 and err > 1e-13 and prev.h != h:
            order = math.log(prev.error / err) / math.log(prev.h / h)
        row = ConvergenceRow(h=float(h), m=int(m), error=err, observed_order=order)
        rows.append(row)
        prev = row
    return rows


def fit_order(rows: list[ConvergenceRow]) -> Optional[float]:
    """Least-squares slope of log error against log h; None if underdetermined."""
    pts = [(math.log(r.h), math.log(r.error)) for r in rows if r.error > 1e-13]
    if len(pts) < 2:
        return None
    xs = np.array([p[0] for p in pts])
    ys = np.array([p[1] for p in pts])
    xs = xs - xs.mean()
    return float(np.dot(xs, ys - ys.mean()) / np.dot(xs, xs))


# ---------------------------------------------------------------------------
# weak-form residual
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TestFunction:
    """Separable space-time test function psi(x) * phi(t) with exact phi'."""

    name: str
    space: np.ndarray
    profile: Callable[[float], float]
    profile_dt: Callable[[float], float]


def default_test_catalog(G: TimeWeightedGraph, T: float, ks=(1, 2)) -> list[TestFunction]:
    """Low spatial harmonics times {sin(pi t/T), t(T-t)/T^2}, both vanishing at 0 and T."""
    from .profiles import make_initial_data as _mk

    catalog = []
    for k in ks:
        psi = _mk(G, {"profile": "harmonic", "k": int(k)}).values
        catalog.append(TestFunction(
            name=f"k{k}_sin", space=psi,
            profile=lambda t, T=T: math.sin(math.pi * t / T),
            profile_dt=lambda t, T=T: (math.pi / T) * math.cos(math.pi * t / T)))
        catalog.append(TestFunction(
            name=f"k{k}_poly", space=psi,
            profile=lambda t, T=T: t * (T - t) / T ** 2,
            profile_dt=lambda t, T=T: (T - 2.0 * t) / T ** 2))
    return catalog


@dataclass(frozen=True)
class WeakResidualRow:
    name: str
    residual: float
    normalization: float

    def to_json_dict(self) -> dict:
        return {"name": self.name, "residual": self.residual,
                "normalization": self.normalization}


def weak_residual(chain: ChainFamily, G: TimeWeightedGraph,
                  test_fns: list[TestFunction]) -> list[WeakResidualRow]:
    """Defect of the chain family in the weak formulation, per test function.

    Left-endpoint quadrature over j = 0..N*m-1 of

        sum_i w_i(t_j) u_j,i (psi_i phi'(t_j) - psi_i phi(t_j) rate_j,i)
      - sum_e c_e(t_j) (u_j,i - u_j,i') (psi_i - psi_i') phi(t_j)

    where rate is the forward volume decay rate over one delta.  Shrinks like
    O(h) as the chain refines.  Profiles must vanish at t = 0 and the horizon.
    """
    delta = chain.delta
    T = chain.horizon
    nm = len(chain.samples) - 1
    w = [vertex_weights(G, j * delta) for j in range(nm)]
    rate = [volume_decay_rate(G, j * delta, delta) for j in range(nm)]
    cond = [edge_conductances(G, j * delta) for j in range(nm)]

    rows = []
    for fn in test_fns:
        phis = np.array([fn.profile(j * delta) for j in range(nm)])
        scale = float(np.max(np.abs(phis))) if nm else 0.0
        for endpoint in (0.0, T):
            if abs(fn.profile(endpoint)) > 1e-12 * (scale + 1.0):
                raise ValueError(f"test function {fn.name}: profile must vanish "
                                 f"at t={endpoint}, got {fn.profile(endpoint)}")
        acc = 0.0
        norm = 0.0
        psi = fn.space
        for j in range(nm):
            u = chain.samples[j].values
            phi = phis[j]
            dphi = fn.profile_dt(j * delta)
            mass_term = dphi * float(np.dot(w[j] * u, psi)) \
                - phi * float(np.dot(w[j] * rate[j] * u, psi))
            d_u = u[G.edges[:, 0]] - u[G.edges[:, 1]]
            d_psi = psi[G.edges[:, 0]] - psi[G.edges[:, 1]]
            energy_term = phi * float(np.dot(cond[j], d_u * d_psi))
            acc += delta * (mass_term - energy_term)
            norm += delta * abs(phi) * weighted_l2(psi, w[j])
        rows.append(WeakResidualRow(name=fn.name, residual=abs(acc), normalization=norm))
    return rows


# ---------------------------------------------------------------------------
# attainment of the initial value, interpolation norms
# ---------------------------------------------------------------------------

def initial_attainment_check(chain: ChainFamily, G: TimeWeightedGraph,
                             u0: DiscreteFunction, t_small: float) -> float:
    """Weighted l2 distance of the sample at t_small from the initial value.

    t_small must lie on the chain's delta-grid (within 1e-9).  Useful facts: the
    distance at fixed ratio t_small/h shrinks like sqrt(h) or better as h -> 0,
    and every first-chain sample obeys the minimality bound
    dist^2 <= h * energy(u0, t_small); for fixed h the distance does NOT tend to
    0 with t_small (samples near 0 are full steps from u0).
    """
    delta = chain.delta
    j = int(round(t_small / delta))
    if abs(j * delta - t_small) > _GRID_FUZZ * max(1.0, chain.horizon):
        raise ValueError(f"t_small = {t_small} is not on the delta-grid "
                         f"(delta = {delta})")
    if not (1 <= j < len(chain.samples)):
        raise ValueError(f"t_small = {t_small} outside the run (0, {chain.horizon}]")
    s = chain.samples[j]
    return weighted_l2(s.values - u0.values, vertex_weights(G, s.time))


def l2h1_interp_norm(samples: list[DiscreteFunction], G: TimeWeightedGraph,
                     dt: Optional[float] = None) -> float:
    """sum_j dt * energy(sample_j, t_j) over the provided samples.

    dt is inferred from the (uniform) time tags when not given; a single sample
    needs it explicitly.
    """
    if not samples:
        return 0.0
    if dt is None:
        if len(samples) < 2:
            raise ValueError("dt is required for a single sample")
        gaps = np.diff([s.time for s in samples])
        dt = float(gaps[0])
        if dt <= 0 or np.any(np.abs(gaps - dt) > _GRID_FUZZ * max(1.0, abs(dt))):
            raise ValueError("samples are not on a uniform time grid")
    return sum(dt * dirichlet_energy(G, s.time, s.values) for s in samples)


def degiorgi_family(G: TimeWeightedGraph, seq: list[DiscreteFunction], h: float,
                    m: int, rel_tol: float = 1e-10) -> list[DiscreteFunction]:
    """Resolvent interpolation of a step sequence on the delta-grid, j = 1..N*m."""
    N = len(seq) - 1
    delta = h / m
    return [degiorgi_interpolate(G, seq, h, j * delta, rel_tol=rel_tol)
            for j in range(1, N * m + 1)]
