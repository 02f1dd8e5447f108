"""Mean-field SIS and SIR (Reed-Frost) chains, their Galton-Watson envelopes
and the red/blue couplings between the two.

Generation ``t -> t + 1`` of both chains draws the new infected count as a
single ``Binomial(S_t, 1 - (1 - p)**J_t)`` variate, which has the same law as
summing one Bernoulli variable per susceptible.  The coupled steps instead
work at the level of individual infection attempts, so they serve as an
independent construction of the same marginal laws.

Individuals are exchangeable, so the coupled state stores only counts.  At
the start of each generation the currently infected individuals are taken to
be labels ``0 .. red - 1`` and (SIR only) the retired ones the next
``retired`` labels; every attempt on one of those labels is blue.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .sampling import binomial, distinct

# duration and size exponents of the critical window: T ~ N**dur, U ~ N**size
SCALE_EXPONENTS = {"SIS": (0.5, 1.0), "SIR": (1.0 / 3.0, 2.0 / 3.0)}


def _kind(kind: str) -> str:
    k = str(kind).upper()
    if k not in SCALE_EXPONENTS:
        raise ValueError(f"kind must be 'SIS' or 'SIR', got {kind!r}")
    return k


def _check_p(p: float) -> float:
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"infection parameter must lie in [0, 1], got {p!r}")
    return p


@dataclass(frozen=True)
class MeanFieldState:
    t: int
    J: int
    S: int
    N: int
    R: int = 0

    def __post_init__(self):
        if min(self.t, self.J, self.S, self.R) < 0:
            raise ValueError(f"negative compartment in {self}")
        if self.J + self.S + self.R != self.N:
            raise ValueError(f"compartments of {self} do not sum to N")

    @classmethod
    def initial(cls, N: int, J0: int) -> MeanFieldState:
        return cls(t=0, J=J0, S=N - J0, N=N)


@dataclass(frozen=True)
class CoupledMeanFieldState:
    """Epidemic infectives (``red``) inside the envelope generation (``total``)."""

    red: int
    total: int
    N: int
    retired: int = 0
    t: int = 0

    @classmethod
    def initial(cls, N: int, J0: int) -> CoupledMeanFieldState:
        return cls(red=J0, total=J0, N=N)


@dataclass
class Trajectory:
    """Outcome of one run.

    ``J`` holds the infected (or envelope) counts ``J_0, J_1, ...`` when the
    run was recorded, ``R`` the recovered counts for SIR.  ``T`` is the first
    generation with ``J_T = 0`` and ``U`` the size ``sum_{t < T} J_t``; both are
    lower bounds when ``truncated`` is set.
    """

    kind: str
    N: int
    T: int
    U: int
    peak: int
    truncated: bool
    J: np.ndarray | None = None
    R: np.ndarray | None = None

    @property
    def states(self) -> list[MeanFieldState]:
        if self.J is None:
            raise ValueError("trajectory was run without recording")
        if self.kind == "GW":
            raise ValueError("envelope trajectories carry no compartments")
        out = []
        R = self.R if self.R is not None else np.zeros_like(self.J)
        for t, (j, r) in enumerate(zip(self.J.tolist(), R.tolist())):
            out.append(MeanFieldState(t=t, J=j, S=self.N - j - r, N=self.N, R=r))
        return out


@dataclass
class CoupledTrajectory:
    """Red (epidemic) and total (envelope) processes of one coupled run.

    ``T``/``U`` describe the red process.  The envelope figures
    ``envelope_T``/``envelope_U`` are filled only when the envelope was run
    on past the red extinction.
    """

    kind: str
    N: int
    T: int
    U: int
    truncated: bool
    violations: int
    red: np.ndarray | None = None
    total: np.ndarray | None = None
    envelope_T: int | None = None
    envelope_U: int | None = None
    envelope_truncated: bool = field(default=False)


def default_max_steps(kind: str, N: int) -> int:
    """Fifty times the critical duration scale ``N**(1/2)`` (SIS) or ``N**(1/3)`` (SIR)."""
    return int(math.ceil(50 * N ** SCALE_EXPONENTS[_kind(kind)][0]))


def critical_p(kind: str, N: int, a: float = 0.0) -> float:
    """Infection parameter ``1/N + a/N**(3/2)`` (SIS) or ``1/N + a/N**(4/3)`` (SIR)."""
    width = {"SIS": 1.5, "SIR": 4.0 / 3.0}[_kind(kind)]
    p = 1.0 / N + a / N**width
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"critical_p({kind}, N={N}, a={a}) = {p} is not a probability")
    return p


def infection_probability(p: float, j: int) -> float:
    """``1 - (1 - p)**j`` evaluated in the log domain."""
    p = _check_p(p)
    if j < 0:
        raise ValueError(f"infective count must be nonnegative, got {j}")
    return float(_infection_probability(p, int(j)))


@numba.njit(cache=True, inline="always")
def _infection_probability(p, j):
    if j == 0 or p == 0.0:
        return 0.0
    if p == 1.0:
        return 1.0
    return -math.expm1(j * math.log1p(-p))


@numba.njit(cache=True)
def _chain_step(rng, sir, p, J, S, R):
    if J == 0:
        return J, S, R
    Jn = binomial(rng, S, _infection_probability(p, J))
    if sir:
        return Jn, S - Jn, R + J
    return Jn, S + J - Jn, R


@numba.njit(cache=True)
def _run_chain(rng, sir, N, p, J0, max_steps, record):
    n_rec = max_steps + 1 if record else 0
    Jp = np.zeros(n_rec, np.int64)
    Rp = np.zeros(n_rec, np.int64)
    J, S, R = J0, N - J0, 0
    U = 0
    peak = J0
    t = 0
    while True:
        if record:
            Jp[t] = J
            Rp[t] = R
        if J == 0 or t == max_steps:
            break
        U += J
        J, S, R = _chain_step(rng, sir, p, J, S, R)
        if J > peak:
            peak = J
        t += 1
    return t, U, peak, J > 0, Jp[: t + 1], Rp[: t + 1]


def step_sis(state: MeanFieldState, p: float, rng: np.random.Generator) -> MeanFieldState:
    """One SIS generation: ``J' ~ Bin(S, 1 - (1-p)**J)``, ``S' = S + J - J'``."""
    J, S, R = _chain_step(rng, False, _check_p(p), state.J, state.S, state.R)
    return MeanFieldState(t=state.t + 1, J=int(J), S=int(S), N=state.N, R=int(R))


def step_sir(state: MeanFieldState, p: float, rng: np.random.Generator) -> MeanFieldState:
    """One Reed-Frost generation: ``J' ~ Bin(S, 1 - (1-p)**J)``, ``R' = R + J``."""
    J, S, R = _chain_step(rng, True, _check_p(p), state.J, state.S, state.R)
    return MeanFieldState(t=state.t + 1, J=int(J), S=int(S), N=state.N, R=int(R))


def run_meanfield(
    kind: str,
    N: int,
    p: float,
    J0: int,
    rng: np.random.Generator,
    max_steps: int | None = None,
    record: bool = True,
) -> Trajectory:
    """Run the SIS or SIR chain from ``J0`` infectives until extinction.

    The draws are exactly those of repeated :func:`step_sis` /
    :func:`step_sir` calls on the same stream.
    """
    kind = _kind(kind)
    if not 1 <= J0 <= N:
        raise ValueError(f"need 1 <= J0 <= N, got J0={J0}, N={N}")
    if max_steps is None:
        max_steps = default_max_steps(kind, N)
    T, U, peak, trunc, Jp, Rp = _run_chain(
        rng, kind == "SIR", int(N), _check_p(p), int(J0), int(max_steps), record
    )
    return Trajectory(
        kind=kind,
        N=N,
        T=int(T),
        U=int(U),
        peak=int(peak),
        truncated=bool(trunc),
        J=Jp if record else None,
        R=Rp if record and kind == "SIR" else None,
    )


# ---------------------------------------------------------------------------
# Galton-Watson envelope


@numba.njit(cache=True)
def _run_gw(rng, N, p, z0, max_steps, record):
    n_rec = max_steps + 1 if record else 0
    Zp = np.zeros(n_rec, np.int64)
    z = z0
    U = 0
    peak = z0
    t = 0
    while True:
        if record:
            Zp[t] = z
        if z == 0 or t == max_steps:
            break
        U += z
        z = binomial(rng, z * N, p)
        if z > peak:
            peak = z
        t += 1
    return t, U, peak, z, Zp[: t + 1]


def step_gw_envelope(z: int, N: int, p: float, rng: np.random.Generator) -> int:
    """Next generation of a Galton-Watson process with Binomial(N, p) offspring.

    The sum of ``z`` independent Binomial(N, p) counts is drawn as one
    Binomial(z * N, p) variate.
    """
    if z < 0:
        raise ValueError(f"generation size must be nonnegative, got {z}")
    return int(binomial(rng, int(z) * int(N), _check_p(p)))


def run_gw(
    z0: int,
    N: int,
    p: float,
    rng: np.random.Generator,
    max_steps: int,
    record: bool = True,
) -> Trajectory:
    """Run the Binomial(N, p) Galton-Watson chain from ``z0`` particles.

    ``T`` is the extinction generation and ``U`` the total progeny before it.
    With ``max_steps = n`` a truncated run is exactly one with ``Z_n > 0``.
    """
    T, U, peak, z, Zp = _run_gw(rng, int(N), _check_p(p), int(z0), int(max_steps), record)
    return Trajectory(
        kind="GW",
        N=N,
        T=int(T),
        U=int(U),
        peak=int(peak),
        truncated=bool(z > 0),
        J=Zp if record else None,
    )


# ---------------------------------------------------------------------------
# red/blue coupling


@numba.njit(cache=True)
def _coupled_step(rng, sir, N, p, red, total, retired, hit, touched, codes):
    # hit is all-zero on entry and on exit
    nonsus = red + retired if sir else red
    attempts = 0
    n_new = 0
    for _ in range(red):
        k = binomial(rng, N, p)
        distinct(rng, k, N, codes)
        attempts += k
        for j in range(k):
            i = codes[j]
            if i >= nonsus and hit[i] == 0:
                hit[i] = 1
                touched[n_new] = i
                n_new += 1
    for j in range(n_new):
        hit[touched[j]] = 0
    blue = binomial(rng, (total - red) * N, p)
    if sir:
        retired += red
    return n_new, attempts + blue, retired


@numba.njit(cache=True)
def _run_coupled(rng, sir, N, p, J0, max_steps, record, continue_envelope):
    hit = np.zeros(N, np.uint8)
    touched = np.empty(N, np.int64)
    codes = np.empty(N, np.int64)
    n_rec = max_steps + 1 if record else 0
    red_p = np.zeros(n_rec, np.int64)
    tot_p = np.zeros(n_rec, np.int64)
    red, total, retired = J0, J0, 0
    T = -1
    U = 0
    env_U = 0
    violations = 0
    t = 0
    while True:
        if record:
            red_p[t] = red
            tot_p[t] = total
        if red > total:
            violations += 1
        if red == 0 and T < 0:
            T = t
            if not continue_envelope:
                break
        if total == 0 or t == max_steps:
            break
        U += red
        env_U += total
        red, total, retired = _coupled_step(rng, sir, N, p, red, total, retired, hit, touched, codes)
        t += 1
    truncated = T < 0
    if truncated:
        T = t
    return T, U, truncated, violations, t, env_U, total > 0, red_p[: t + 1], tot_p[: t + 1]


def _coupled_step_py(cs, p, rng, sir):
    N = cs.N
    if cs.red > cs.total:
        raise ValueError(f"red exceeds total in {cs}")
    if cs.red + cs.retired > N:
        raise ValueError(f"more than N individuals infected or retired in {cs}")
    buf = np.zeros(N, np.uint8), np.empty(max(N, 1), np.int64), np.empty(max(N, 1), np.int64)
    red, total, retired = _coupled_step(
        rng, sir, N, _check_p(p), cs.red, cs.total, cs.retired, *buf
    )
    return CoupledMeanFieldState(
        red=int(red), total=int(total), N=N, retired=int(retired), t=cs.t + 1
    )


def step_coupled_sis(
    cs: CoupledMeanFieldState, p: float, rng: np.random.Generator
) -> CoupledMeanFieldState:
    """One generation of the SIS epidemic coupled with its envelope.

    Each red parent makes Binomial(N, p) attempts on distinct uniformly chosen
    individuals.  An attempt is red when it is the first to reach an
    individual that is not currently infected; every other attempt, and every
    offspring of a blue parent, is blue.  Draw order: red parents in turn
    (attempt count, then targets), then one Binomial((total - red) * N, p)
    draw for the blue parents.
    """
    return _coupled_step_py(cs, p, rng, False)


def step_coupled_sir(
    cs: CoupledMeanFieldState, p: float, rng: np.random.Generator
) -> CoupledMeanFieldState:
    """Coupled SIR generation; attempts on retired individuals are blue too."""
    return _coupled_step_py(cs, p, rng, True)


def run_coupled(
    kind: str,
    N: int,
    p: float,
    J0: int,
    rng: np.random.Generator,
    max_steps: int | None = None,
    record: bool = True,
    continue_envelope: bool = False,
) -> CoupledTrajectory:
    """Iterate the coupled step from ``red = total = J0``.

    The run stops when the red process dies out, unless
    ``continue_envelope`` is set, in which case the envelope is followed to
    its own extinction (or ``max_steps``).
    """
    kind = _kind(kind)
    if not 1 <= J0 <= N:
        raise ValueError(f"need 1 <= J0 <= N, got J0={J0}, N={N}")
    if max_steps is None:
        max_steps = default_max_steps(kind, N)
    T, U, trunc, viol, t_end, env_U, env_alive, red_p, tot_p = _run_coupled(
        rng, kind == "SIR", int(N), _check_p(p), int(J0), int(max_steps), record, continue_envelope
    )
    out = CoupledTrajectory(
        kind=kind,
        N=N,
        T=int(T),
        U=int(U),
        truncated=bool(trunc),
        violations=int(viol),
        red=red_p if record else None,
        total=tot_p if record else None,
    )
    if continue_envelope:
        out.envelope_T = int(t_end)
        out.envelope_U = int(env_U)
        out.envelope_truncated = bool(env_alive)
    return out


# ---------------------------------------------------------------------------
# random-graph construction of the SIR epidemic


@numba.njit(cache=True)
def _find(parent, i):
    while parent[i] != i:
        parent[i] = parent[parent[i]]
        i = parent[i]
    return i


@numba.njit(cache=True)
def _graph_component_mass(rng, N, p, initial):
    parent = np.arange(N)
    size = np.ones(N, np.int64)
    # Batagelj-Brandes geometric skipping over the pairs (v, w), w < v
    lq = math.log1p(-p)
    v = 1
    w = -1
    while v < N:
        w += 1 + int(math.floor(math.log1p(-rng.random()) / lq))
        while w >= v and v < N:
            w -= v
            v += 1
        if v < N:
            a = _find(parent, v)
            b = _find(parent, w)
            if a != b:
                if size[a] < size[b]:
                    a, b = b, a
                parent[b] = a
                size[a] += size[b]
    seen = np.zeros(N, np.uint8)
    total = 0
    for i in initial:
        r = _find(parent, i)
        if seen[r] == 0:
            seen[r] = 1
            total += size[r]
    return total


def _initial_set(initial, N: int) -> np.ndarray:
    if isinstance(initial, (int, np.integer)):
        idx = np.arange(int(initial), dtype=np.int64)
    else:
        idx = np.unique(np.asarray(list(initial), dtype=np.int64))
    if idx.size == 0 or idx.min() < 0 or idx.max() >= N:
        raise ValueError(f"initial set must be a nonempty subset of range({N})")
    return idx


def sir_size_via_graph(N: int, p: float, initial, rng: np.random.Generator) -> int:
    """Ever-infected count of the Reed-Frost epidemic read off a G(N, p) graph.

    ``initial`` is either a collection of 0-based individuals or an integer
    ``k`` meaning individuals ``0 .. k-1``.  The result is the number of
    vertices in connected components meeting the initial set, which has the
    law of ``U`` from :func:`run_meanfield` with ``kind='SIR'``.
    """
    p = _check_p(p)
    idx = _initial_set(initial, N)
    if p == 0.0:
        return int(idx.size)
    if p == 1.0:
        return int(N)
    return int(_graph_component_mass(rng, int(N), p, idx))


def exact_graph_size_pmf(N: int, p: float, n_initial: int) -> np.ndarray:
    """Law of the component mass of ``n_initial`` vertices, by enumerating all graphs.

    Feasible for ``N <= 6`` (``2**15`` graphs).  Entry ``k`` is the
    probability that exactly ``k`` vertices are connected to the initial set.
    """
    pairs = list(itertools.combinations(range(N), 2))
    if len(pairs) > 20:
        raise ValueError(f"enumeration over 2**{len(pairs)} graphs refused")
    pmf = np.zeros(N + 1)
    for mask in range(1 << len(pairs)):
        parent = list(range(N))

        def find(i):
            while parent[i] != i:
                i = parent[i]
            return i

        edges = 0
        for b, (u, v) in enumerate(pairs):
            if mask >> b & 1:
                edges += 1
                ru, rv = find(u), find(v)
                if ru != rv:
                    parent[ru] = rv
        roots = {find(i) for i in range(n_initial)}
        mass = sum(1 for i in range(N) if find(i) in roots)
        pmf[mass] += p**edges * (1 - p) ** (len(pairs) - edges)
    return pmf


def _binom_pmf(n: int, k: int, q: float) -> float:
    return math.comb(n, k) * q**k * (1 - q) ** (n - k)


def exact_sir_size_pmf(N: int, p: float, J0: int) -> np.ndarray:
    """Law of the ever-infected count ``U`` of the Reed-Frost chain, by exact recursion."""
    pmf = np.zeros(N + 1)
    frontier = {(N - J0, J0): 1.0}
    while frontier:
        nxt: dict[tuple[int, int], float] = {}
        for (S, J), w in frontier.items():
            if J == 0:
                pmf[N - S] += w
                continue
            q = 1 - (1 - p) ** J
            for k in range(S + 1):
                key = (S - k, k)
                nxt[key] = nxt.get(key, 0.0) + w * _binom_pmf(S, k, q)
        frontier = nxt
    return pmf
