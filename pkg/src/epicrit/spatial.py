"""Spatial SIS-d / SIR-d epidemics, their branching-random-walk envelope and
the density rescalings used to compare both with Dawson-Watanabe limits.

Every site of Z^d holds a village of ``N`` individuals.  An infective at
``x`` infects a susceptible at ``y`` with probability ``p`` when
``|x - y| <= 1`` (nearest neighbours and the site itself), independently over
pairs.  Lattice fields are stored densely on the bounding box of their
support together with the lattice coordinates of the box corner, so a field is
finite however far the epidemic wanders.

Draw order is part of the contract: destination sites are visited in
lexicographic order and a site consumes randomness only when something can
happen there.  The one-dimensional runners make exactly the draws of repeated
single-step calls, which the tests check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product

import numba
import numpy as np

from .meanfield import _infection_probability
from .sampling import binomial, distinct


def sigma2(d: int = 1) -> float:
    """Variance ``2d / (2d + 1)`` of one displacement of the nearest-neighbour walk."""
    return 2.0 * d / (2.0 * d + 1.0)


def critical_p_brw(N: int, M: float, a: float = 0.0, d: int = 1) -> float:
    """Infection parameter ``1/((2d+1) N) - a/(N M)``.

    The per-particle offspring mean in the envelope is then
    ``1 - a (2d + 1) / M``.
    """
    p = 1.0 / ((2 * d + 1) * N) - a / (N * M)
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"critical_p_brw(N={N}, M={M}, a={a}, d={d}) = {p} is not a probability")
    return p


def _kind(kind: str) -> str:
    k = str(kind).upper()
    if k not in ("SIS", "SIR"):
        raise ValueError(f"kind must be 'SIS' or 'SIR', got {kind!r}")
    return k


def _site(site, d: int) -> tuple[int, ...]:
    if isinstance(site, (int, np.integer)):
        site = (int(site),)
    site = tuple(int(s) for s in site)
    if len(site) != d:
        raise ValueError(f"site {site} does not have dimension {d}")
    return site


def stencil(d: int) -> list[tuple[int, ...]]:
    """Offsets ``v`` with ``|v| <= 1`` in lexicographic order."""
    offs = [tuple(0 for _ in range(d))]
    for k in range(d):
        for s in (-1, 1):
            offs.append(tuple(s if i == k else 0 for i in range(d)))
    return sorted(offs)


# ---------------------------------------------------------------------------
# box helpers


def _dense(mapping: dict, d: int) -> tuple[tuple[int, ...], np.ndarray]:
    sites = {_site(s, d): int(v) for s, v in mapping.items() if int(v) != 0}
    if any(v < 0 for v in sites.values()):
        raise ValueError("lattice counts must be nonnegative")
    if not sites:
        return (0,) * d, np.zeros((0,) * d, np.int64)
    lo = tuple(min(s[k] for s in sites) for k in range(d))
    hi = tuple(max(s[k] for s in sites) for k in range(d))
    arr = np.zeros(tuple(h - l + 1 for l, h in zip(lo, hi)), np.int64)
    for s, v in sites.items():
        arr[tuple(si - li for si, li in zip(s, lo))] = v
    return lo, arr


def _to_dict(origin, arr) -> dict:
    d = arr.ndim
    out = {}
    for idx in zip(*np.nonzero(arr)):
        site = tuple(int(o + i) for o, i in zip(origin, idx))
        out[site[0] if d == 1 else site] = int(arr[idx])
    return out


def _pad(origin, arrays, w):
    return tuple(o - w for o in origin), [np.pad(a, w) for a in arrays]


def _trim(origin, support, arrays):
    nz = np.nonzero(support)
    d = support.ndim
    if nz[0].size == 0:
        return (0,) * d, [np.zeros((0,) * d, np.int64) for _ in arrays]
    lo = [int(ix.min()) for ix in nz]
    hi = [int(ix.max()) + 1 for ix in nz]
    sl = tuple(slice(l, h) for l, h in zip(lo, hi))
    return tuple(o + l for o, l in zip(origin, lo)), [np.ascontiguousarray(a[sl]) for a in arrays]


def _neighbor_sum(A: np.ndarray) -> np.ndarray:
    K = A.copy()
    for ax in range(A.ndim):
        lo = [slice(None)] * A.ndim
        hi = [slice(None)] * A.ndim
        lo[ax] = slice(1, None)
        hi[ax] = slice(None, -1)
        K[tuple(lo)] += A[tuple(hi)]
        K[tuple(hi)] += A[tuple(lo)]
    return K


def _flat_offsets(shape, d):
    strides = np.array([int(np.prod(shape[k + 1 :])) for k in range(d)], np.int64)
    return np.array([int(np.dot(o, strides)) for o in stencil(d)], np.int64)


def _align(origin_a, a, origin_b, shape_b):
    """Embed ``a`` (corner ``origin_a``) into a zero box of ``shape_b`` at ``origin_b``."""
    out = np.zeros(shape_b, np.int64)
    if a.size:
        sl = tuple(slice(oa - ob, oa - ob + n) for oa, ob, n in zip(origin_a, origin_b, a.shape))
        out[sl] = a
    return out


# ---------------------------------------------------------------------------
# states


@dataclass
class SpatialState:
    """Infected and recovered fields of an SIS-d or SIR-d epidemic.

    ``J`` and ``R`` share the box whose lowest corner is ``origin``.  The
    susceptible count at a site is ``N - J - R``.
    """

    kind: str
    N: int
    d: int
    origin: tuple[int, ...]
    J: np.ndarray
    R: np.ndarray
    t: int = 0

    @classmethod
    def from_infected(cls, kind: str, N: int, infected: dict, d: int = 1, recovered: dict | None = None):
        kind = _kind(kind)
        merged = {**{_site(s, d): 1 for s in infected}, **{_site(s, d): 1 for s in (recovered or {})}}
        origin, box = _dense(merged, d)
        J = _align(*_dense(infected, d), origin, box.shape)
        R = _align(*_dense(recovered or {}, d), origin, box.shape)
        if kind == "SIS" and R.any():
            raise ValueError("SIS states carry no recovered individuals")
        if (J + R > N).any():
            raise ValueError(f"more than N={N} infected or recovered at a site")
        return cls(kind=kind, N=N, d=d, origin=origin, J=J, R=R)

    def infected(self) -> dict:
        return _to_dict(self.origin, self.J)

    def recovered(self) -> dict:
        return _to_dict(self.origin, self.R)

    def _at(self, arr, site):
        idx = tuple(s - o for s, o in zip(_site(site, self.d), self.origin))
        if all(0 <= i < n for i, n in zip(idx, arr.shape)):
            return int(arr[idx])
        return 0

    def infected_at(self, site) -> int:
        return self._at(self.J, site)

    def susceptible_at(self, site) -> int:
        return self.N - self._at(self.J, site) - self._at(self.R, site)

    @property
    def total_infected(self) -> int:
        return int(self.J.sum())


@dataclass
class BrwOccupancy:
    """Particle counts of a branching random walk on Z^d."""

    d: int
    origin: tuple[int, ...]
    counts: np.ndarray
    t: int = 0

    @classmethod
    def from_counts(cls, counts: dict, d: int = 1) -> BrwOccupancy:
        origin, arr = _dense(counts, d)
        return cls(d=d, origin=origin, counts=arr)

    def as_dict(self) -> dict:
        return _to_dict(self.origin, self.counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass
class CoupledSpatialState:
    """Epidemic (``red``) inside its envelope (``total``), site by site."""

    kind: str
    N: int
    d: int
    origin: tuple[int, ...]
    red: np.ndarray
    retired: np.ndarray
    total: np.ndarray
    t: int = 0

    @classmethod
    def from_infected(cls, kind: str, N: int, infected: dict, d: int = 1) -> CoupledSpatialState:
        origin, J = _dense(infected, d)
        return cls(kind=_kind(kind), N=N, d=d, origin=origin, red=J, retired=np.zeros_like(J), total=J.copy())

    def red_dict(self) -> dict:
        return _to_dict(self.origin, self.red)

    def total_dict(self) -> dict:
        return _to_dict(self.origin, self.total)


def neighbor_pressure(state: SpatialState, y) -> int:
    """Number of infectives within lattice distance one of ``y`` (``y`` included)."""
    y = _site(y, state.d)
    return sum(state.infected_at(tuple(a + b for a, b in zip(y, v))) for v in stencil(state.d))


# ---------------------------------------------------------------------------
# step kernels (flat arrays, any dimension)


@numba.njit(cache=True)
def _epi_draws(rng, N, p, J, R, K, reverse):
    n = J.size
    out = np.zeros(n, np.int64)
    for s in range(n):
        f = n - 1 - s if reverse else s
        if K[f] > 0:
            S = N - J[f] - R[f]
            if S > 0:
                out[f] = binomial(rng, S, _infection_probability(p, K[f]))
    return out


@numba.njit(cache=True)
def _brw_draws(rng, N, p, K, reverse):
    n = K.size
    out = np.zeros(n, np.int64)
    for s in range(n):
        f = n - 1 - s if reverse else s
        if K[f] > 0:
            out[f] = binomial(rng, K[f] * N, p)
    return out


@numba.njit(cache=True)
def _coupled_draws(rng, sir, N, p, red, retired, total, offs, blueK):
    n = red.size
    n_nb = offs.size
    codes = np.empty(n_nb * N, np.int64)
    new_total = np.zeros(n, np.int64)
    new_red = np.zeros(n, np.int64)
    buf = np.empty(64, np.int64)
    nbuf = 0
    violations = 0
    for x in range(n):
        for _ in range(red[x]):
            k = binomial(rng, n_nb * N, p)
            distinct(rng, k, n_nb * N, codes)
            for j in range(k):
                y = x + offs[codes[j] // N]
                i = codes[j] % N
                new_total[y] += 1
                nonsus = red[y] + retired[y] if sir else red[y]
                if i >= nonsus:
                    if nbuf == buf.size:
                        grown = np.empty(2 * buf.size, np.int64)
                        grown[:nbuf] = buf
                        buf = grown
                    buf[nbuf] = y * N + i
                    nbuf += 1
    hits = np.sort(buf[:nbuf])
    for j in range(nbuf):
        if j == 0 or hits[j] != hits[j - 1]:
            new_red[hits[j] // N] += 1
    for y in range(n):
        if blueK[y] > 0:
            new_total[y] += binomial(rng, blueK[y] * N, p)
        if new_red[y] > new_total[y]:
            violations += 1
    return new_red, new_total, violations


def step_spatial(kind: str, state: SpatialState, p: float, rng: np.random.Generator, _reverse: bool = False) -> SpatialState:
    """One generation of SIS-d / SIR-d.

    At each site ``y`` with pressure ``K(y) > 0`` and susceptibles present,
    ``J'(y) ~ Bin(S(y), 1 - (1 - p)**K(y))``.  SIS returns the previous
    infectives to the susceptible pool; SIR moves them to ``R``.
    """
    kind = _kind(kind)
    d = state.d
    origin, (J, R) = _pad(state.origin, [state.J, state.R], 2)
    K = _neighbor_sum(J)
    Jn = _epi_draws(rng, state.N, float(p), J.ravel(), R.ravel(), K.ravel(), _reverse).reshape(J.shape)
    if kind == "SIR":
        Rn = R + J
        origin, (Jn, Rn) = _trim(origin, Jn + Rn, [Jn, Rn])
    else:
        origin, (Jn,) = _trim(origin, Jn, [Jn])
        Rn = np.zeros_like(Jn)
    if Jn.size == 0 and Rn.size == 0:
        origin = (0,) * d
    return SpatialState(kind=kind, N=state.N, d=d, origin=origin, J=Jn, R=Rn, t=state.t + 1)


def step_brw(occ: BrwOccupancy, N: int, p: float, rng: np.random.Generator, _reverse: bool = False) -> BrwOccupancy:
    """One generation of the nearest-neighbour branching random walk.

    Every particle sends an independent Binomial(N, p) number of offspring to
    each of the ``2d + 1`` sites within distance one.  The new count at ``y``
    is drawn as one Binomial(K(y) N, p) variate, ``K(y)`` being the number of
    parents within distance one; this has the same joint law.
    """
    origin, (C,) = _pad(occ.origin, [occ.counts], 2)
    K = _neighbor_sum(C)
    Cn = _brw_draws(rng, int(N), float(p), K.ravel(), _reverse).reshape(C.shape)
    origin, (Cn,) = _trim(origin, Cn, [Cn])
    return BrwOccupancy(d=occ.d, origin=origin, counts=Cn, t=occ.t + 1)


def step_coupled_spatial(
    kind: str, cs: CoupledSpatialState, N: int, p: float, rng: np.random.Generator
) -> tuple[CoupledSpatialState, int]:
    """One generation of the spatial red/blue coupling.

    Each red parent at ``x`` tosses a ``p``-coin for every (neighbour site,
    individual) pair, drawn as Binomial((2d+1) N, p) distinct pairs.  The
    attempt is red if it is the first to reach a susceptible at that site.
    Blue parents' offspring are drawn per destination as in
    :func:`step_brw`.  Returns the new state and the number of sites where
    red exceeded total (always 0).
    """
    kind = _kind(kind)
    d = cs.d
    origin, (red, ret, tot) = _pad(cs.origin, [cs.red, cs.retired, cs.total], 2)
    offs = _flat_offsets(red.shape, d)
    blueK = _neighbor_sum(tot - red)
    new_red, new_tot, viol = _coupled_draws(
        rng, kind == "SIR", int(N), float(p), red.ravel(), ret.ravel(), tot.ravel(), offs, blueK.ravel()
    )
    new_red = new_red.reshape(red.shape)
    new_tot = new_tot.reshape(red.shape)
    new_ret = ret + red if kind == "SIR" else ret
    origin, (new_red, new_ret, new_tot) = _trim(origin, new_tot + new_ret, [new_red, new_ret, new_tot])
    out = CoupledSpatialState(
        kind=kind, N=int(N), d=d, origin=origin, red=new_red, retired=new_ret, total=new_tot, t=cs.t + 1
    )
    return out, int(viol)


# ---------------------------------------------------------------------------
# one-dimensional runners


@numba.njit(cache=True)
def _support(A, lo, hi):
    nlo = -1
    nhi = -2
    for y in range(lo, hi + 1):
        if A[y] != 0:
            if nlo < 0:
                nlo = y
            nhi = y
    return nlo, nhi


@numba.njit(cache=True)
def _frame_stats(A, lo, hi, shift):
    mass = 0
    m2 = 0.0
    for y in range(lo, hi + 1):
        mass += A[y]
        m2 += A[y] * float(y - shift) ** 2
    return mass, m2


@numba.njit(cache=True)
def _run_1d(rng, model, N, p, red0, site0, max_steps, stride, horizon):
    # model: 0 SIS, 1 SIR, 2 BRW, 3 coupled SIS, 4 coupled SIR
    n0 = red0.size
    pad = max_steps + 3
    W = n0 + 2 * pad
    coupled = model >= 3
    sir = model == 1 or model == 4
    A = np.zeros(W, np.int64)  # infected / particles / red
    R = np.zeros(W, np.int64)  # recovered / retired
    B = np.zeros(W, np.int64)  # envelope total (coupled only)
    An = np.zeros(W, np.int64)
    Bn = np.zeros(W, np.int64)
    A[pad : pad + n0] = red0
    if coupled:
        B[pad : pad + n0] = red0
    codes = np.empty(3 * N if coupled else 1, np.int64)
    buf = np.empty(64, np.int64)
    lo, hi = _support(A, pad, pad + n0 - 1)
    blo, bhi = lo, hi
    frames_t = []
    frames_lo = []
    frames_a = []
    frames_b = []
    T = -1
    U = 0
    Uh = 0
    mass_h = 0
    m2_h = 0.0
    env_T = -1
    env_U = 0
    env_Uh = 0
    env_mass_h = 0
    env_m2_h = 0.0
    violations = 0
    t = 0
    while True:
        # lattice site of array index y is y - pad + site0
        mass, m2 = _frame_stats(A, max(lo, 0), hi, pad - site0)
        bmass, bm2 = _frame_stats(B, max(blo, 0), bhi, pad - site0) if coupled else (0, 0.0)
        if stride > 0 and t % stride == 0:
            flo = min(lo, blo) if coupled else lo
            fhi = max(hi, bhi) if coupled else hi
            frames_t.append(t)
            frames_lo.append(flo - pad)
            if fhi >= flo:
                frames_a.append(A[flo : fhi + 1].copy())
                frames_b.append(B[flo : fhi + 1].copy())
            else:
                frames_a.append(np.zeros(0, np.int64))
                frames_b.append(np.zeros(0, np.int64))
        if t == horizon:
            mass_h = mass
            m2_h = m2
            env_mass_h = bmass
            env_m2_h = bm2
        if mass == 0 and T < 0:
            T = t
        if coupled and bmass == 0 and env_T < 0:
            env_T = t
        alive = bmass > 0 if coupled else mass > 0
        if not alive or t == max_steps:
            break
        U += mass
        env_U += bmass
        if t < horizon:
            Uh += mass
            env_Uh += bmass
        if model <= 1:
            for y in range(lo - 1, hi + 2):
                K = A[y - 1] + A[y] + A[y + 1]
                An[y] = 0
                if K > 0:
                    S = N - A[y] - R[y]
                    if S > 0:
                        An[y] = binomial(rng, S, _infection_probability(p, K))
            if sir:
                for y in range(lo, hi + 1):
                    R[y] += A[y]
            for y in range(lo - 1, hi + 2):
                A[y] = An[y]
            lo, hi = _support(A, lo - 1, hi + 1)
        elif model == 2:
            for y in range(lo - 1, hi + 2):
                K = A[y - 1] + A[y] + A[y + 1]
                An[y] = binomial(rng, K * N, p) if K > 0 else 0
            for y in range(lo - 1, hi + 2):
                A[y] = An[y]
            lo, hi = _support(A, lo - 1, hi + 1)
        else:
            for y in range(blo - 1, bhi + 2):
                An[y] = 0
                Bn[y] = 0
            nbuf = 0
            if hi >= lo:
                for x in range(lo, hi + 1):
                    for _ in range(A[x]):
                        k = binomial(rng, 3 * N, p)
                        distinct(rng, k, 3 * N, codes)
                        for j in range(k):
                            y = x + codes[j] // N - 1
                            i = codes[j] % N
                            Bn[y] += 1
                            nonsus = A[y] + R[y] if sir else A[y]
                            if i >= nonsus:
                                if nbuf == buf.size:
                                    grown = np.empty(2 * buf.size, np.int64)
                                    grown[:nbuf] = buf
                                    buf = grown
                                buf[nbuf] = y * N + i
                                nbuf += 1
            hits = np.sort(buf[:nbuf])
            for j in range(nbuf):
                if j == 0 or hits[j] != hits[j - 1]:
                    An[hits[j] // N] += 1
            for y in range(blo - 1, bhi + 2):
                Kb = (B[y - 1] - A[y - 1]) + (B[y] - A[y]) + (B[y + 1] - A[y + 1])
                if Kb > 0:
                    Bn[y] += binomial(rng, Kb * N, p)
                if An[y] > Bn[y]:
                    violations += 1
            if sir and hi >= lo:
                for y in range(lo, hi + 1):
                    R[y] += A[y]
            for y in range(blo - 1, bhi + 2):
                A[y] = An[y]
                B[y] = Bn[y]
            lo, hi = _support(A, blo - 1, bhi + 1)
            blo, bhi = _support(B, blo - 1, bhi + 1)
        t += 1
    if T < 0:
        T = t
    if coupled and env_T < 0:
        env_T = t
    truncated = mass > 0
    env_truncated = bmass > 0
    return (
        T, U, Uh, mass_h, m2_h, truncated,
        env_T, env_U, env_Uh, env_mass_h, env_m2_h, env_truncated,
        violations, frames_t, frames_lo, frames_a, frames_b,
    )


# ---------------------------------------------------------------------------
# trajectories


@dataclass
class Frame:
    t: int
    origin: tuple[int, ...]
    counts: np.ndarray


@dataclass
class SpatialTrajectory:
    """Summary (and optionally frames) of one spatial run.

    ``U_horizon`` sums the infected mass over generations ``t < horizon``;
    ``mass_horizon`` and ``m2_horizon`` (second moment in lattice units,
    normalised by mass, about the lattice origin) are taken at generation
    ``horizon``.  For coupled runs ``envelope`` holds the same summary for the
    total field and ``violations`` counts sites where red exceeded total.
    """

    model: str
    N: int
    d: int
    T: int
    U: int
    truncated: bool
    horizon: int
    U_horizon: int
    mass_horizon: int
    m2_horizon: float
    frames: list[Frame] = field(default_factory=list)
    envelope: SpatialTrajectory | None = None
    violations: int = 0


_MODELS = {"SIS": 0, "SIR": 1, "BRW": 2, "COUPLED-SIS": 3, "COUPLED-SIR": 4}


def default_stride(M: float) -> int:
    """Stride giving about 200 recorded frames per rescaled time unit."""
    return max(1, int(M // 200))


def uniform_initial(total: int, half_width: float, d: int = 1) -> dict:
    """``total`` particles spread as evenly as possible over sites with ``|x_i| <= half_width``."""
    h = int(math.floor(half_width))
    sites = list(product(range(-h, h + 1), repeat=d))
    cuts = np.round(np.linspace(0, total, len(sites) + 1)).astype(np.int64)
    counts = np.diff(cuts)
    return {(s[0] if d == 1 else s): int(c) for s, c in zip(sites, counts) if c > 0}


def standard_initial(M: float, b: float = 1.0, kappa: float = 1.0, d: int = 1) -> dict:
    """``round(b M)`` particles spread uniformly over ``[-kappa sqrt(M), kappa sqrt(M)]``."""
    return uniform_initial(int(round(b * M)), kappa * math.sqrt(M), d)


def run_spatial(
    model: str,
    N: int,
    p: float,
    initial: dict,
    rng: np.random.Generator,
    max_steps: int,
    stride: int = 0,
    horizon: int | None = None,
    d: int = 1,
) -> SpatialTrajectory:
    """Run an epidemic, its envelope, or the coupled pair from ``initial``.

    ``model`` is one of ``'SIS'``, ``'SIR'``, ``'BRW'``, ``'coupled-SIS'``,
    ``'coupled-SIR'``.  Frames are recorded every ``stride`` generations
    (``0`` records none).  Coupled runs follow the envelope after the epidemic
    dies out, until the envelope dies or ``max_steps``.
    """
    key = str(model).upper()
    if key not in _MODELS:
        raise ValueError(f"unknown spatial model {model!r}")
    if horizon is None:
        horizon = max_steps
    if not 0 <= horizon <= max_steps:
        raise ValueError("horizon must lie in [0, max_steps]")
    if d != 1:
        return _run_generic(key, N, p, initial, rng, max_steps, stride, horizon, d)
    origin, arr = _dense(initial, 1)
    if arr.size == 0:
        arr = np.zeros(1, np.int64)
        origin = (0,)
    out = _run_1d(rng, _MODELS[key], int(N), float(p), arr, int(origin[0]), int(max_steps), int(stride), int(horizon))
    (T, U, Uh, mh, m2, trunc, eT, eU, eUh, emh, em2, etrunc, viol, ft, flo, fa, fb) = out
    shift = origin[0]
    frames = [Frame(int(t), (int(lo) + shift,), a) for t, lo, a in zip(ft, flo, fa)]
    m2_h = float(m2) / mh if mh else math.nan
    traj = SpatialTrajectory(
        model=key, N=N, d=1, T=int(T), U=int(U), truncated=bool(trunc), horizon=horizon,
        U_horizon=int(Uh), mass_horizon=int(mh), m2_horizon=m2_h, frames=frames,
    )
    if key.startswith("COUPLED"):
        traj.violations = int(viol)
        traj.envelope = SpatialTrajectory(
            model="BRW", N=N, d=1, T=int(eT), U=int(eU), truncated=bool(etrunc), horizon=horizon,
            U_horizon=int(eUh), mass_horizon=int(emh), m2_horizon=float(em2) / emh if emh else math.nan,
            frames=[Frame(int(t), (int(lo) + shift,), b) for t, lo, b in zip(ft, flo, fb)],
        )
    return traj


def run_brw(N, p, initial, rng, max_steps, stride=0, horizon=None, d=1) -> SpatialTrajectory:
    """Shorthand for ``run_spatial('BRW', ...)``."""
    return run_spatial("BRW", N, p, initial, rng, max_steps, stride, horizon, d)


def _run_generic(key, N, p, initial, rng, max_steps, stride, horizon, d):
    # any dimension, by repeated single steps
    if key == "BRW":
        state = BrwOccupancy.from_counts(initial, d)
        field_of = lambda s: (s.origin, s.counts)  # noqa: E731
        step = lambda s: (step_brw(s, N, p, rng), 0)  # noqa: E731
    elif key.startswith("COUPLED"):
        kind = key.split("-")[1]
        state = CoupledSpatialState.from_infected(kind, N, initial, d)
        field_of = lambda s: (s.origin, s.red)  # noqa: E731
        step = lambda s: step_coupled_spatial(kind, s, N, p, rng)  # noqa: E731
    else:
        state = SpatialState.from_infected(key, N, initial, d)
        field_of = lambda s: (s.origin, s.J)  # noqa: E731
        step = lambda s: (step_spatial(key, s, p, rng), 0)  # noqa: E731
    coupled = key.startswith("COUPLED")
    summary = {"red": _Acc(horizon), "env": _Acc(horizon)}
    frames, env_frames = [], []
    violations = 0
    t = 0
    while True:
        origin, A = field_of(state)
        summary["red"].see(t, origin, A)
        if coupled:
            summary["env"].see(t, state.origin, state.total)
        if stride > 0 and t % stride == 0:
            frames.append(Frame(t, origin, A.copy()))
            if coupled:
                env_frames.append(Frame(t, state.origin, state.total.copy()))
        alive = (state.total.sum() if coupled else A.sum()) > 0
        if not alive or t == max_steps:
            break
        state, v = step(state)
        violations += v
        t += 1
    red = summary["red"].result(t)
    traj = SpatialTrajectory(model=key, N=N, d=d, horizon=horizon, frames=frames, **red)
    if coupled:
        traj.violations = violations
        traj.envelope = SpatialTrajectory(
            model="BRW", N=N, d=d, horizon=horizon, frames=env_frames, **summary["env"].result(t)
        )
    return traj


class _Acc:
    def __init__(self, horizon):
        self.horizon = horizon
        self.masses = []
        self.m2 = math.nan

    def see(self, t, origin, A):
        mass = int(A.sum())
        self.masses.append(mass)
        if t == self.horizon and mass:
            r2 = sum((g + o) ** 2 for g, o in zip(np.indices(A.shape), origin))
            self.m2 = float((r2 * A).sum()) / mass

    def result(self, t_end):
        m = self.masses
        zeros = [t for t, v in enumerate(m) if v == 0]
        return dict(
            T=zeros[0] if zeros else t_end,
            U=sum(m[:t_end]),
            truncated=m[t_end] > 0,
            U_horizon=sum(m[: min(self.horizon, t_end)]),
            mass_horizon=m[self.horizon] if self.horizon <= t_end else 0,
            m2_horizon=self.m2,
        )


# ---------------------------------------------------------------------------
# density rescaling


@dataclass
class DensityField:
    """Rescaled density ``X(t_i, x_j) = Y_{M t_i}(sqrt(M) x_j) / sqrt(M)`` on a grid.

    ``values[i, j]`` sits at time ``times[i]`` and position ``x[j]``; the grid
    is padded with one zero column on each side so that linear interpolation
    between lattice points reaches zero one lattice step outside the support.
    """

    scale: float
    times: np.ndarray
    sites: np.ndarray
    values: np.ndarray

    @property
    def dx(self) -> float:
        return 1.0 / math.sqrt(self.scale)

    @property
    def x(self) -> np.ndarray:
        return self.sites * self.dx

    def mass(self) -> np.ndarray:
        """``dx * sum_j X(t_i, x_j)`` for every recorded time."""
        return self.dx * self.values.sum(axis=1)

    def second_moment(self) -> np.ndarray:
        """Mass-normalised ``int x**2 X(t_i, x) dx`` (nan where the field is zero)."""
        w = self.values.sum(axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            return (self.values * self.x**2).sum(axis=1) / w

    def __call__(self, t: float, x) -> np.ndarray:
        """Piecewise-linear interpolation in ``x`` and ``t``."""
        rows = np.array([np.interp(x, self.x, v, left=0.0, right=0.0) for v in self.values])
        if len(self.times) == 1:
            return rows[0]
        i = int(np.clip(np.searchsorted(self.times, t, side="right") - 1, 0, len(self.times) - 2))
        w = (t - self.times[i]) / (self.times[i + 1] - self.times[i])
        return (1 - w) * rows[i] + w * rows[i + 1]


def rescale_brw_density(frames: list[Frame], M: float) -> DensityField:
    """Density field of one-dimensional frames recorded at integer generations."""
    if not frames:
        raise ValueError("no frames to rescale")
    if any(f.counts.ndim != 1 for f in frames):
        raise ValueError("density rescaling is defined for d = 1 only")
    nonempty = [f for f in frames if f.counts.size]
    lo = min((f.origin[0] for f in nonempty), default=0) - 1
    hi = max((f.origin[0] + f.counts.size - 1 for f in nonempty), default=0) + 1
    sites = np.arange(lo, hi + 1)
    vals = np.zeros((len(frames), sites.size))
    for i, f in enumerate(frames):
        if f.counts.size:
            j = f.origin[0] - lo
            vals[i, j : j + f.counts.size] = f.counts
    times = np.array([f.t for f in frames], float) / M
    return DensityField(scale=float(M), times=times, sites=sites, values=vals / math.sqrt(M))


def rescale_epidemic_measure(frames: list[Frame], N: int, alpha: float) -> DensityField:
    """Epidemic density with mass ``N**-alpha`` per infective at ``x / N**(alpha/2)``."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    return rescale_brw_density(frames, float(N) ** alpha)
