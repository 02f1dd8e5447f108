"""One-dimensional Dawson-Watanabe density with killing on a finite grid.

The field solves, in the sense of its martingale problem,

    dX = (sigma2 / 2) X'' dt - (theta + a) X dt + sqrt(X) dW(t, x)

with ``W`` space-time white noise, ``theta`` one of the state-dependent
killing rates of :func:`killing_rate` and ``a`` a constant killing rate.

Each time step is split in two.  First an explicit heat step
``X <- X + lam (X[j+1] - 2 X[j] + X[j-1])`` with ``lam = sigma2 dt / (2 dx**2)``,
which is mass preserving and positivity preserving under the stability guard.
Then every cell mass ``m = X dx`` is advanced by the exact transition of
``dm = -r m dt + sqrt(m) dW`` (a zero-dimension squared Bessel / CIR law) with
``r = theta + a`` frozen over the step.  That transition is a Poisson mixture
of Gamma variables, so positivity holds without truncation and the total mass
of the unkilled field is exactly a Feller diffusion on the grid times.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numba
import numpy as np

from .spatial import sigma2 as _sigma2

SIGMA2 = _sigma2(1)
DEFAULT_DX = 0.05
DEFAULT_DT = 1e-3

_MODES = {"none": 0, "sis": 1, "sir": 2}


@dataclass
class DwField:
    """Density ``X`` and its time integral ``A`` on ``x_j = j dx``, ``|j| <= L``."""

    X: np.ndarray
    A: np.ndarray
    dx: float
    dt: float
    t: float = 0.0
    sigma2: float = SIGMA2

    @property
    def L(self) -> int:
        return (self.X.size - 1) // 2

    @property
    def x(self) -> np.ndarray:
        return self.dx * np.arange(-self.L, self.L + 1)

    def mass(self) -> float:
        return float(self.dx * self.X.sum())

    def second_moment(self) -> float:
        """Mass-normalised ``int x**2 X dx`` (nan for the zero field)."""
        m = self.X.sum()
        return float((self.x**2 * self.X).sum() / m) if m > 0 else math.nan


def killing_rate(mode: str, X, A):
    """State-dependent killing rate: 0, ``X / 2`` (SIS) or ``X * A`` (SIR)."""
    if mode not in _MODES:
        raise ValueError(f"killing mode must be one of {sorted(_MODES)}, got {mode!r}")
    if mode == "none":
        return np.zeros_like(np.asarray(X, float)) if np.ndim(X) else 0.0
    if mode == "sis":
        return np.asarray(X, float) / 2 if np.ndim(X) else X / 2
    return np.asarray(X, float) * np.asarray(A, float) if np.ndim(X) else X * A


def check_stability(dx: float, dt: float, sigma2: float = SIGMA2) -> None:
    """Reject grids violating ``dt <= dx**2 / (2 sigma2)``."""
    if dx <= 0 or dt <= 0:
        raise ValueError("grid steps must be positive")
    if dt > dx * dx / (2 * sigma2) * (1 + 1e-12):
        raise ValueError(f"unstable grid: dt = {dt} exceeds dx^2/(2 sigma^2) = {dx * dx / (2 * sigma2)}")


def grid_half_width(support: float, horizon: float, dx: float = DEFAULT_DX, sigma2: float = SIGMA2) -> int:
    """Number of cells ``L`` on each side so that ``support + 6 sqrt(sigma2 horizon)`` fits."""
    return int(math.ceil((support + 6 * math.sqrt(sigma2 * horizon)) / dx)) + 1


def bump(mass: float = 1.0, width: float = 0.1, dx: float = DEFAULT_DX, L: int | None = None, horizon: float = 1.0):
    """Triangular profile of half-width ``width`` normalised to ``dx * sum(X) = mass``."""
    if L is None:
        L = grid_half_width(width, horizon, dx)
    x = dx * np.arange(-L, L + 1)
    X = np.maximum(0.0, 1.0 - np.abs(x) / max(width, dx))
    return X * (mass / (dx * X.sum()))


def initial_field(X0, dx: float = DEFAULT_DX, dt: float = DEFAULT_DT, sigma2: float = SIGMA2) -> DwField:
    """Wrap an initial profile (odd length, zero at both ends) as a field."""
    X0 = np.array(X0, float)
    if X0.ndim != 1 or X0.size % 2 == 0:
        raise ValueError("profile must be a 1-d array of odd length")
    if np.any(X0 < 0):
        raise ValueError("profile must be nonnegative")
    if X0.size < 3 or X0[0] != 0 or X0[-1] != 0:
        raise ValueError("profile must vanish at the grid boundary")
    check_stability(dx, dt, sigma2)
    return DwField(X=X0, A=np.zeros_like(X0), dx=float(dx), dt=float(dt), sigma2=float(sigma2))


@numba.njit(cache=True)
def _steps(rng, X, A, dx, dt, sigma2, mode, a, nsteps):
    n = X.size
    lam = sigma2 * dt / (2.0 * dx * dx)
    tmp = np.empty(n)
    for _ in range(nsteps):
        if mode == 2:
            theta_src = A.copy()
        for j in range(1, n - 1):
            tmp[j] = X[j] + lam * (X[j + 1] - 2.0 * X[j] + X[j - 1])
        for j in range(1, n - 1):
            # killing rate and clock are evaluated at the start of the step
            if mode == 0:
                r = a
            elif mode == 1:
                r = a + 0.5 * X[j]
            else:
                r = a + X[j] * theta_src[j]
            A[j] += X[j] * dt
            m = tmp[j] * dx
            if m <= 0.0:
                X[j] = 0.0
                continue
            if r > 0.0:
                e = math.exp(-r * dt)
                c = (1.0 - e) / (4.0 * r)
            else:
                e = 1.0
                c = dt / 4.0
            k = rng.poisson(m * e / (2.0 * c))
            X[j] = rng.gamma(k, 2.0 * c) / dx if k > 0 else 0.0
        X[0] = 0.0
        X[n - 1] = 0.0


def dw_step(field: DwField, mode: str, a: float, rng: np.random.Generator) -> DwField:
    """Advance ``field`` by one time step; the input is not modified."""
    return _advance(field, mode, a, rng, 1)


def _advance(field, mode, a, rng, nsteps):
    if mode not in _MODES:
        raise ValueError(f"killing mode must be one of {sorted(_MODES)}, got {mode!r}")
    if a < 0:
        raise ValueError("constant killing rate must be nonnegative")
    check_stability(field.dx, field.dt, field.sigma2)
    X = field.X.copy()
    A = field.A.copy()
    _steps(rng, X, A, field.dx, field.dt, field.sigma2, _MODES[mode], float(a), int(nsteps))
    return replace(field, X=X, A=A, t=field.t + nsteps * field.dt)


def dw_run(
    X0,
    mode: str = "none",
    a: float = 0.0,
    dx: float = DEFAULT_DX,
    dt: float = DEFAULT_DT,
    horizon: float = 1.0,
    rng: np.random.Generator | None = None,
    stride: int | None = None,
) -> list[DwField]:
    """Snapshots every ``stride`` steps (default: start and end only) up to ``horizon``."""
    rng = np.random.default_rng() if rng is None else rng
    field = initial_field(X0, dx, dt)
    n = int(round(horizon / dt))
    stride = n if not stride else int(stride)
    snaps = [field]
    done = 0
    while done < n:
        k = min(stride, n - done)
        field = _advance(field, mode, a, rng, k)
        done += k
        snaps.append(field)
    return snaps
