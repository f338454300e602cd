"""Implicit Euler steps and the shifted-chain interpolation of the step sequence.

One step of length h at time t maps u_prev to the minimizer of

    energy(u, t) + (1/h) * ||u - u_prev||^2_{m_t}

which is the solution of (M_t + h S_t) u = M_t u_prev.  Because the system matrix
is an M-matrix and rows of (M_t + h S_t)^{-1} M_t sum to one, every step obeys the
maximum principle, preserves mass against the current measure, and is monotone in
the data; the scheme is linear in u_prev.

``run_interpolated`` materializes the step sequence on a finer grid of spacing
delta = h/m by running m independent chains: the sample at t = j*delta is a full
step of length h taken at time t from the sample at t - h, with the convention
that times below zero hold the initial value.  Chain j mod m never reads another
chain, so evaluation order cannot change results.  Samples at multiples of h
reproduce the plain step sequence.  This differs from resolvent-style
interpolation (``degiorgi_interpolate``), which shortens the step to reach
intermediate times; with moving coefficients the shortened step loses the uniform
energy bounds, which is the point of the comparison tooling in ``verify``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import TimeWeightedGraph, edge_conductances, vertex_weights
from .linalg import SpdOperator, cg_solve

__all__ = [
    "DiscreteFunction",
    "ChainFamily",
    "operator_at",
    "euler_step",
    "run_discrete",
    "run_interpolated",
    "degiorgi_interpolate",
    "steps_within_horizon",
    "truncate",
]

_TIME_FUZZ = 1e-9


@dataclass(frozen=True)
class DiscreteFunction:
    """A vertex function tagged with the time its measure refers to."""

    values: np.ndarray
    time: float

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1:
            raise ValueError(f"values must be a vector, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("values must be finite")
        object.__setattr__(self, "values", v)


def truncate(u: DiscreteFunction, n: float) -> DiscreteFunction:
    """Clamp values to [-n, n] entrywise.  Idempotent; keeps the time tag."""
    if n <= 0:
        raise ValueError(f"truncation level must be positive, got {n}")
    return DiscreteFunction(np.clip(u.values, -n, n), u.time)


def operator_at(G: TimeWeightedGraph, t: float, h: float) -> SpdOperator:
    """The step operator M_t + h * S_t."""
    return SpdOperator(vertex_weights(G, t), G.edges, edge_conductances(G, t), h)


def euler_step(G: TimeWeightedGraph, t: float, h: float, u_prev: DiscreteFunction,
               rel_tol: float = 1e-10, max_iter: int | None = None) -> DiscreteFunction:
    """One implicit step of length h, coefficients frozen at time t.

    Solves (M_t + h S_t) u = M_t u_prev and tags the result with time t.  The
    proximal weight is always 1/h regardless of how far u_prev's own time tag
    lies in the past; interpolation chains rely on exactly that.
    """
    if h <= 0:
        raise ValueError(f"h must be positive, got {h}")
    if not (0.0 < t <= G.horizon + _TIME_FUZZ * max(1.0, G.horizon)):
        raise ValueError(f"step time {t} outside (0, {G.horizon}]")
    if u_prev.values.shape != (G.n_vertices,):
        raise ValueError(f"u_prev has {len(u_prev.values)} entries, "
                         f"graph has {G.n_vertices} vertices")
    A = operator_at(G, t, h)
    x = cg_solve(A, A.mass * u_prev.values, rel_tol=rel_tol, max_iter=max_iter)
    return DiscreteFunction(x, t)


def _check_initial(u0: DiscreteFunction, G: TimeWeightedGraph) -> None:
    if u0.values.shape != (G.n_vertices,):
        raise ValueError(f"u0 has {len(u0.values)} entries, graph has {G.n_vertices}")
    if abs(u0.time) > _TIME_FUZZ:
        raise ValueError(f"u0 must be tagged with time 0, got {u0.time}")


def steps_within_horizon(T: float, h: float) -> int:
    """N = round(T/h), reduced if rounding would step past the horizon."""
    if h <= 0:
        raise ValueError(f"h must be positive, got {h}")
    N = int(round(T / h))
    if N * h > T + _TIME_FUZZ * max(1.0, T):
        N -= 1
    if N < 1:
        raise ValueError(f"step h={h} does not fit the horizon T={T}")
    return N


def run_discrete(G: TimeWeightedGraph, u0: DiscreteFunction, h: float, N: int,
                 rel_tol: float = 1e-10) -> list[DiscreteFunction]:
    """The step sequence u_1, ..., u_N with u_k computed at time k*h."""
    _check_initial(u0, G)
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    if N * h > G.horizon + _TIME_FUZZ * max(1.0, G.horizon):
        raise ValueError(f"N*h = {N * h} beyond graph horizon {G.horizon}")
    out = []
    prev = u0
    for k in range(1, N + 1):
        prev = euler_step(G, k * h, h, prev, rel_tol=rel_tol)
        out.append(prev)
    return out


@dataclass(frozen=True)
class ChainFamily:
    """Samples of the shifted interpolation on the grid t_j = j * delta.

    samples[j] lives at time j*delta for j = 0..N*m, delta = h/m, horizon = N*h.
    samples[0] is the initial value; samples at multiples of m are the plain step
    sequence; sample j with j >= 1 was produced by a full step of length h from
    samples[j - m] (the initial value when j < m).  Chain index = j mod m.
    """

    h: float
    m: int
    horizon: float
    samples: list[DiscreteFunction]

    @property
    def delta(self) -> float:
        return self.h / self.m

    @property
    def n_steps(self) -> int:
        return (len(self.samples) - 1) // self.m

    def times(self) -> np.ndarray:
        return np.array([s.time for s in self.samples])

    def produced(self) -> list[DiscreteFunction]:
        """The samples that came out of a minimization (everything past j = 0)."""
        return self.samples[1:]

    def discrete_sequence(self) -> list[DiscreteFunction]:
        """u_0, u_1, ..., u_N: the samples at multiples of h (chain 0)."""
        return self.samples[:: self.m]


def run_interpolated(G: TimeWeightedGraph, u0: DiscreteFunction, h: float,
                     m: int = 4, rel_tol: float = 1e-10) -> ChainFamily:
    """Run all m chains of the shifted interpolation up to the horizon.

    Every sample j >= 1 solves a full step of length h at its own time j*delta
    against the sample one h earlier (the initial value for j < m).  The chains
    are computed in a single j-sweep; since chain j mod m only ever reads its own
    past, this is identical to running them separately.
    """
    _check_initial(u0, G)
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    N = steps_within_horizon(G.horizon, h)
    delta = h / m
    samples = [DiscreteFunction(u0.values, 0.0)]
    for j in range(1, N * m + 1):
        prev = samples[j - m] if j - m >= 0 else u0
        samples.append(euler_step(G, j * delta, h, prev, rel_tol=rel_tol))
    return ChainFamily(h=float(h), m=int(m), horizon=N * h, samples=samples)


def degiorgi_interpolate(G: TimeWeightedGraph, seq: list[DiscreteFunction], h: float,
                         t: float, rel_tol: float = 1e-10) -> DiscreteFunction:
    """Resolvent interpolation of a step sequence at an intermediate time.

    ``seq`` is the full sequence [u_0, u_1, ..., u_N] (initial value included).
    For t = (k-1)*h + delta with delta in (0, h], solves the shortened step

        (M_t + delta * S_t) u = M_t u_{k-1}

    so delta -> 0 returns u_{k-1} and delta = h reproduces u_k's defining system
    but never the shifted chains' intermediate samples, whose proximal weight
    stays 1/h.
    """
    if h <= 0:
        raise ValueError(f"h must be positive, got {h}")
    N = len(seq) - 1
    if N < 1:
        raise ValueError("seq must contain the initial value and at least one step")
    if not (0.0 < t <= N * h + _TIME_FUZZ * max(1.0, N * h)):
        raise ValueError(f"t = {t} outside (0, {N * h}]")
    k = int(math.ceil(t / h - _TIME_FUZZ))
    k = min(max(k, 1), N)
    delta = t - (k - 1) * h
    A = operator_at(G, t, delta)
    x = cg_solve(A, A.mass * seq[k - 1].values, rel_tol=rel_tol)
    return DiscreteFunction(x, t)
