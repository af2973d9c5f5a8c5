"""Exact engine: rate generator, numerical stationary solve, closed forms.

The generator of the lattice process is stored as off-diagonal COO arrays
in a canonical (row, col) order; the diagonal is implied (negative exit
rate), so row sums are zero by construction.  Desk-scale models are solved
by a direct dense solve with one balance equation replaced by the
normalization constraint; larger models fall back to power iteration on
the uniformized transition operator.

The closed-form product distribution and its site marginals are computed
independently of the solver, so either side can serve as the oracle for
the other.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .model import ModelParams, state_space_size

__all__ = [
    "DEFAULT_STATE_CAP",
    "STATE_CAP_ENV",
    "DENSE_SOLVE_CUTOFF",
    "EDGE_ARRIVAL",
    "EDGE_DEPARTURE",
    "EDGE_HOP",
    "EDGE_CLASS_NAMES",
    "CapExceededError",
    "SolveError",
    "SingularSystemError",
    "NonConvergenceError",
    "Generator",
    "resolve_state_cap",
    "build_generator",
    "reverse_rates",
    "balance_residuals",
    "is_irreducible",
    "solve_stationary",
    "product_form",
    "normalization_constant",
    "site_marginal",
    "joint_from_marginals",
    "marginals_from_distribution",
]

DEFAULT_STATE_CAP = 1 << 24
STATE_CAP_ENV = "SEPSIM_STATE_CAP"
DENSE_SOLVE_CUTOFF = 4096

# Transition classes: an edge adds a particle, removes one, or moves one.
EDGE_ARRIVAL, EDGE_DEPARTURE, EDGE_HOP = 1, 2, 3
EDGE_CLASS_NAMES = {EDGE_ARRIVAL: "arrival", EDGE_DEPARTURE: "departure", EDGE_HOP: "hop"}


class CapExceededError(RuntimeError):
    """The state space is larger than the configured exact-engine cap."""

    def __init__(self, requested: int, cap: int):
        self.requested = requested
        self.cap = cap
        super().__init__(
            f"state space has {requested} states, exceeding the exact-engine cap of {cap}; "
            f"set {STATE_CAP_ENV} to raise the cap"
        )


class SolveError(RuntimeError):
    """The stationary solve failed."""


class SingularSystemError(SolveError):
    """The balance system is singular or too ill-conditioned to trust."""


class NonConvergenceError(SolveError):
    """Power iteration did not reach the residual tolerance."""


def resolve_state_cap(cap: int | None = None) -> int:
    """Effective exact-engine state cap: explicit argument, else the
    ``SEPSIM_STATE_CAP`` environment variable, else the built-in default."""
    if cap is None:
        raw = os.environ.get(STATE_CAP_ENV)
        cap = int(raw) if raw is not None else DEFAULT_STATE_CAP
    if cap < 1:
        raise ValueError(f"state cap must be >= 1, got {cap}")
    return cap


@dataclass(frozen=True, eq=False)
class Generator:
    """Off-diagonal transition rates of the lattice process.

    ``rows``, ``cols``, ``rates`` and ``kinds`` are parallel arrays holding
    one directed edge each, sorted by (row, col).  The diagonal entry of
    state ``i`` is implied as minus its exit rate, so every row of the full
    matrix sums to zero exactly.  ``params`` records the model the support
    was built from (perturbed copies keep it for state decoding even
    though their rates no longer follow the model).
    """

    dim: int
    rows: np.ndarray
    cols: np.ndarray
    rates: np.ndarray
    kinds: np.ndarray
    params: ModelParams | None = field(default=None)

    def __post_init__(self) -> None:
        rows = np.asarray(self.rows, dtype=np.int64)
        cols = np.asarray(self.cols, dtype=np.int64)
        rates = np.asarray(self.rates, dtype=np.float64)
        kinds = np.asarray(self.kinds, dtype=np.int8)
        if not (rows.shape == cols.shape == rates.shape == kinds.shape):
            raise ValueError("edge arrays must have identical shapes")
        if self.dim < 1:
            raise ValueError(f"dimension must be >= 1, got {self.dim}")
        if rows.size:
            if rows.min() < 0 or rows.max() >= self.dim or cols.min() < 0 or cols.max() >= self.dim:
                raise ValueError("edge endpoints outside the state space")
            if np.any(rows == cols):
                raise ValueError("diagonal entries are implied and must not be stored")
            if np.any(rates <= 0.0) or not np.all(np.isfinite(rates)):
                raise ValueError("stored rates must be positive and finite")
            if not np.all(np.isin(kinds, (EDGE_ARRIVAL, EDGE_DEPARTURE, EDGE_HOP))):
                raise ValueError("unknown edge class code")
        order = np.lexsort((cols, rows))
        rows, cols, rates, kinds = rows[order], cols[order], rates[order], kinds[order]
        if rows.size > 1 and np.any((rows[1:] == rows[:-1]) & (cols[1:] == cols[:-1])):
            raise ValueError("duplicate transition between the same state pair")
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "cols", cols)
        object.__setattr__(self, "rates", rates)
        object.__setattr__(self, "kinds", kinds)

    @property
    def n_edges(self) -> int:
        return int(self.rates.size)

    def exit_rates(self) -> np.ndarray:
        """Total rate out of each state (magnitude of the implied diagonal)."""
        return np.bincount(self.rows, weights=self.rates, minlength=self.dim)

    def rate_matrix(self) -> sp.csr_matrix:
        """Off-diagonal rates as a CSR matrix."""
        return sp.csr_matrix((self.rates, (self.rows, self.cols)), shape=(self.dim, self.dim))

    def to_dense(self) -> np.ndarray:
        """Full dense generator including the implied diagonal."""
        q = np.zeros((self.dim, self.dim))
        q[self.rows, self.cols] = self.rates
        q[np.arange(self.dim), np.arange(self.dim)] = -self.exit_rates()
        return q


def build_generator(params: ModelParams, *, cap: int | None = None) -> Generator:
    """Assemble the generator from the event rules, one edge per enabled event.

    Refuses models whose state count exceeds :func:`resolve_state_cap`.
    The construction is vectorised over the whole state space: each event
    family (arrival/departure per boundary site and type, hop per adjacent
    site pair and type) contributes one block of edges, and the canonical
    base-(n_types+1) encoding turns an event into a constant index shift.
    """
    m = state_space_size(params)
    limit = resolve_state_cap(cap)
    if m > limit:
        raise CapExceededError(m, limit)

    n, base = params.n_sites, params.n_types + 1
    pows = [base ** (n - 1 - i) for i in range(n)]
    idx = np.arange(m, dtype=np.int64)

    def digit(i0: int) -> np.ndarray:
        return (idx // pows[i0]) % base

    rows: list[np.ndarray] = []
    cols: list[np.ndarray] = []
    rates: list[np.ndarray] = []
    kinds: list[np.ndarray] = []

    def add(src: np.ndarray, dst: np.ndarray, rate: float, kind: int) -> None:
        rows.append(src)
        cols.append(dst)
        rates.append(np.full(src.size, rate))
        kinds.append(np.full(src.size, kind, dtype=np.int8))

    for i0 in (0, n - 1):
        d = digit(i0)
        vacant = idx[d == 0]
        for k in range(1, base):
            add(vacant, vacant + k * pows[i0], params.alpha[k - 1], EDGE_ARRIVAL)
        for k in range(1, base):
            occupied = idx[d == k]
            add(occupied, occupied - k * pows[i0], params.beta[k - 1], EDGE_DEPARTURE)

    # Hops: every adjacent pair unless the pair joins the two boundary
    # sites of a two-site lattice and boundary_hops is off.
    if params.boundary_hops or n > 2:
        for i0 in range(n - 1):
            d_src, d_dst = digit(i0), digit(i0 + 1)
            for k in range(1, base):
                rate = params.delta[k - 1]
                if rate <= 0.0:
                    continue
                src = idx[(d_src == k) & (d_dst == 0)]
                add(src, src - k * pows[i0] + k * pows[i0 + 1], rate, EDGE_HOP)
        for i0 in range(1, n):
            d_src, d_dst = digit(i0), digit(i0 - 1)
            for k in range(1, base):
                rate = params.delta[k - 1]
                if rate <= 0.0:
                    continue
                src = idx[(d_src == k) & (d_dst == 0)]
                add(src, src - k * pows[i0] + k * pows[i0 - 1], rate, EDGE_HOP)

    return Generator(
        dim=m,
        rows=np.concatenate(rows),
        cols=np.concatenate(cols),
        rates=np.concatenate(rates),
        kinds=np.concatenate(kinds),
        params=params,
    )


def reverse_rates(gen: Generator) -> np.ndarray:
    """Rate of the opposite-direction transition, aligned with each edge.

    Entry ``e`` holds the rate of ``cols[e] -> rows[e]``.  Requires the
    transition support to be structurally symmetric (an edge exists iff
    its reverse does), which holds for every generator built here.
    """
    perm = np.lexsort((gen.rows, gen.cols))
    if not (np.array_equal(gen.rows[perm], gen.cols) and np.array_equal(gen.cols[perm], gen.rows)):
        raise ValueError("transition support is not structurally symmetric")
    return gen.rates[perm]


def balance_residuals(gen: Generator, dist: np.ndarray) -> np.ndarray:
    """Global-balance residual per state: outflow minus inflow under ``dist``."""
    dist = np.asarray(dist, dtype=np.float64)
    if dist.shape != (gen.dim,):
        raise ValueError(f"distribution has shape {dist.shape}, expected ({gen.dim},)")
    inflow = np.bincount(gen.cols, weights=dist[gen.rows] * gen.rates, minlength=gen.dim)
    return dist * gen.exit_rates() - inflow


def is_irreducible(gen: Generator) -> bool:
    """True when the transition graph is strongly connected."""
    if gen.n_edges == 0:
        return gen.dim == 1
    adjacency = sp.csr_matrix(
        (np.ones(gen.n_edges, dtype=np.int8), (gen.rows, gen.cols)), shape=(gen.dim, gen.dim)
    )
    n_components, _ = connected_components(adjacency, directed=True, connection="strong")
    return n_components == 1


def solve_stationary(
    gen: Generator,
    *,
    dense_cutoff: int = DENSE_SOLVE_CUTOFF,
    residual_tol: float = 1e-10,
    power_tol: float = 1e-12,
    max_iterations: int = 200_000,
) -> np.ndarray:
    """Stationary distribution of an irreducible generator.

    Up to ``dense_cutoff`` states the balance system is solved directly,
    with the last balance equation replaced by the normalization
    constraint; above it, power iteration on the uniformized operator runs
    until the balance residual drops below ``power_tol``.  The returned
    vector sums to one, is strictly positive, and satisfies the balance
    equations with infinity-norm residual at most ``residual_tol``.
    """
    if not is_irreducible(gen):
        raise ValueError(
            "generator must be irreducible; note that a zero hop rate freezes "
            "interior occupancy of that type on lattices with more than two sites"
        )
    m = gen.dim
    exit_rates = gen.exit_rates()
    if m <= dense_cutoff:
        qt = np.zeros((m, m))
        qt[gen.cols, gen.rows] = gen.rates
        diag = np.arange(m)
        qt[diag, diag] = -exit_rates
        qt[-1, :] = 1.0
        rhs = np.zeros(m)
        rhs[-1] = 1.0
        try:
            p = np.linalg.solve(qt, rhs)
        except np.linalg.LinAlgError as exc:
            raise SingularSystemError(f"balance system is singular: {exc}") from exc
    else:
        lam = 1.05 * float(exit_rates.max())
        diag = np.arange(m)
        transition_t = sp.csr_matrix(
            (
                np.concatenate([gen.rates / lam, 1.0 - exit_rates / lam]),
                (np.concatenate([gen.cols, diag]), np.concatenate([gen.rows, diag])),
            ),
            shape=(m, m),
        )
        p = np.full(m, 1.0 / m)
        residual = np.inf
        for _ in range(max_iterations):
            p_next = transition_t @ p
            residual = lam * float(np.abs(p_next - p).max())
            p = p_next / p_next.sum()
            if residual <= power_tol:
                break
        else:
            raise NonConvergenceError(
                f"power iteration stopped after {max_iterations} iterations "
                f"with residual {residual:.3e} > {power_tol:.1e}"
            )

    p = p / p.sum()
    residual = float(np.abs(balance_residuals(gen, p)).max())
    if residual > residual_tol:
        raise SingularSystemError(
            f"stationary solve residual {residual:.3e} exceeds {residual_tol:.1e}; "
            "the system is too ill-conditioned to trust"
        )
    if p.min() <= 0.0:
        raise SingularSystemError("solve produced a non-positive probability")
    return p


def normalization_constant(params: ModelParams) -> float:
    """Probability of the all-vacant state in the closed form:
    ``(1 + sum_k alpha_k / beta_k) ** -n_sites``."""
    total = sum(a / b for a, b in zip(params.alpha, params.beta))
    return float((1.0 + total) ** (-params.n_sites))


def product_form(params: ModelParams) -> np.ndarray:
    """Closed-form stationary distribution, indexed by the canonical encoding.

    The probability of a state is the normalization constant times the
    product of ``alpha_k / beta_k`` over its occupied sites.  Independent
    of the hop rates and of ``boundary_hops``.
    """
    ratios = np.array([a / b for a, b in zip(params.alpha, params.beta)])
    weights = np.concatenate(([1.0], ratios))
    probs = weights
    for _ in range(params.n_sites - 1):
        probs = np.kron(probs, weights)
    return probs * normalization_constant(params)


def site_marginal(params: ModelParams, site: int) -> np.ndarray:
    """Stationary distribution of one site's occupancy.

    Entry 0 is the vacancy probability, entry k the probability of holding
    a type-k particle.  Identical for every site; ``site`` is validated
    but does not influence the value.
    """
    if not 1 <= site <= params.n_sites:
        raise ValueError(f"site {site} outside 1..{params.n_sites}")
    ratios = np.array([a / b for a, b in zip(params.alpha, params.beta)])
    denom = 1.0 + ratios.sum()
    return np.concatenate(([1.0 / denom], ratios / denom))


def joint_from_marginals(params: ModelParams) -> np.ndarray:
    """Joint distribution assembled as the product of the site marginals.

    Algebraically identical to :func:`product_form`; computed through the
    normalized marginals instead of the global constant so the identity
    can be asserted numerically.
    """
    marginal = site_marginal(params, 1)
    probs = marginal
    for _ in range(params.n_sites - 1):
        probs = np.kron(probs, marginal)
    return probs


def marginals_from_distribution(dist: np.ndarray, params: ModelParams) -> np.ndarray:
    """Per-site occupancy marginals of a full distribution.

    Returns an (n_sites, n_types + 1) matrix whose row i sums ``dist``
    over all states with the given value at site i+1.
    """
    dist = np.asarray(dist, dtype=np.float64)
    m = state_space_size(params)
    if dist.shape != (m,):
        raise ValueError(f"distribution has shape {dist.shape}, expected ({m},)")
    n, base = params.n_sites, params.n_types + 1
    idx = np.arange(m, dtype=np.int64)
    out = np.empty((n, base))
    for i0 in range(n):
        digit = (idx // base ** (n - 1 - i0)) % base
        out[i0] = np.bincount(digit, weights=dist, minlength=base)
    return out
