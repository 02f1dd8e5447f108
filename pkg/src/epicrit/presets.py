"""Named acceptance experiments.

Each preset builds its configs, runs them through :func:`run_experiment`
(so the CSV files are the data that is judged), prints one line per check
and returns a :class:`PresetResult`.  ``factor`` scales every replicate
count; values below 1 give quick smoke runs that are not acceptance runs.
"""

from __future__ import annotations

import filecmp
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import meanfield, spatial
from .config import resolve
from .experiment import compare_files, read_column, run_experiment
from .stats import mean_ci

SEED = 20240601


@dataclass
class PresetResult:
    name: str
    criterion: str
    passed: bool
    lines: list[str] = field(default_factory=list)

    def summary(self) -> str:
        return f"{self.criterion} {self.name}: {'PASS' if self.passed else 'FAIL'}"


class _Run:
    def __init__(self, name, criterion, root, factor, echo):
        self.res = PresetResult(name, criterion, True)
        self.root = Path(root) / name
        self.factor = factor
        self.echo = echo

    def n(self, reps):
        return max(1, int(round(reps * self.factor)))

    def run(self, sub, **raw):
        raw.setdefault("output", str(self.root / sub))
        raw.setdefault("workers", 1)
        return run_experiment(resolve(raw))

    def check(self, label, ok, detail):
        line = f"  {label}: {detail} -> {'PASS' if ok else 'FAIL'}"
        self.res.lines.append(line)
        self.res.passed &= bool(ok)
        if self.echo:
            print(line, flush=True)

    def ks(self, label, a, b, col, col_b=None, floor=0.0, alpha=0.01):
        A, B, v = compare_files(a.results, b.results, col, alpha, floor, col_b)
        self.check(label, v.passed, v.row())
        return A, B, v


def _values(run, col):
    return read_column(run.results, col)[0]


# ---------------------------------------------------------------------------


def sis_threshold(r: _Run):
    """U/N of the critical SIS chain against the OU passage tau(1; 0)."""
    N = 40000
    epi = r.run("epidemic", kind="meanfield", model="SIS", N=N, a=0, b=1, replicates=r.n(4000), base_seed=SEED + 11)
    ou = r.run("ou", kind="diffusion", model="ou", b=1, a=0, replicates=r.n(4000), base_seed=SEED + 12)
    A, B, v = r.ks("KS U/N vs tau(1;0)", epi, ou, "U_scaled", "time", floor=0.05)
    ok = A.censored_fraction < 0.005 and B.censored_fraction < 0.005
    r.check("censoring", ok, f"epidemic {A.censored_fraction:.4f}, OU {B.censored_fraction:.4f} (< 0.005)")


def sir_threshold(r: _Run):
    """U/N^(2/3) of the critical SIR chain against the parabolic passage T_1."""
    epi = r.run("epidemic", kind="meanfield", model="SIR", N=8000, a=0, b=1, replicates=r.n(4000), base_seed=SEED + 21)
    par = r.run("parabolic", kind="diffusion", model="parabolic", b=1, a=0, replicates=r.n(4000), base_seed=SEED + 22)
    r.ks("KS U/N^(2/3) vs T_1", epi, par, "U_scaled", "time", floor=0.07)


def feller_extinction(r: _Run):
    """Survival of the critical GW envelope and of the Feller diffusion at t = 2."""
    target = 1 - math.exp(-1)
    gw = r.run(
        "gw", kind="meanfield", model="GW", N=10_000, M=2000, b=1, a=0, max_steps=4000,
        replicates=r.n(100_000), base_seed=SEED + 31,
    )
    alive = read_column(gw.results, "T")[1]
    r.check("GW P(Z_2M > 0)", abs(alive.mean() - target) <= 0.01, f"{alive.mean():.5f} vs {target:.5f} (+-0.01)")
    fel = r.run(
        "feller", kind="diffusion", model="feller", b=1, a=0, horizon=2, at=2,
        replicates=r.n(100_000), base_seed=SEED + 32,
    )
    pos = (_values(fel, "value") > 0).mean()
    r.check("Feller P(Y_2 > 0)", abs(pos - target) <= 0.01, f"{pos:.5f} vs {target:.5f} (+-0.01)")


def coupling_domination(r: _Run):
    """Red never exceeds total in either coupling."""
    for kind in ("SIS", "SIR"):
        run = r.run(kind.lower(), kind="meanfield", model=f"coupled-{kind}", N=1000, replicates=r.n(10_000),
                    base_seed=SEED + 41)
        viol = int(_values(run, "violations").sum())
        r.check(f"{kind} violations", viol == 0, f"{viol} over {r.n(10_000)} replicates")


def coupling_marginals(r: _Run):
    """The coupled red process has the epidemic's law of (T, U)."""
    for N in (1000, 10_000):
        for kind in ("SIS", "SIR"):
            cp = r.run(f"coupled-{kind}-{N}", kind="meanfield", model=f"coupled-{kind}", N=N,
                       replicates=r.n(5000), base_seed=SEED + 43)
            ep = r.run(f"direct-{kind}-{N}", kind="meanfield", model=kind, N=N,
                       replicates=r.n(5000), base_seed=SEED + 44)
            for col in ("T", "U"):
                r.ks(f"{kind} N={N} {col}", cp, ep, col)
            viol = int(_values(cp, "violations").sum())
            r.check(f"{kind} N={N} domination", viol == 0, f"{viol} violations")


def graph_oracle(r: _Run):
    """The random-graph construction against the SIR chain."""
    g = meanfield.exact_graph_size_pmf(4, 0.5, 1)
    c = meanfield.exact_sir_size_pmf(4, 0.5, 1)
    err = float(np.max(np.abs(g - c)))
    r.check("exact N=4 pmf", err <= 1e-12, f"max atom difference {err:.3g} (<= 1e-12)")
    gr = r.run("graph", kind="meanfield", model="graph", N=200, p=1 / 200, J0=3, replicates=r.n(10_000),
               base_seed=SEED + 51)
    ch = r.run("chain", kind="meanfield", model="SIR", N=200, p=1 / 200, J0=3, replicates=r.n(10_000),
               base_seed=SEED + 52)
    r.ks("sampled N=200 U", gr, ch, "U")


def spatial_envelope(r: _Run):
    """Below threshold the spatial epidemic dies like its BRW envelope."""
    for kind in ("SIS", "SIR"):
        common = dict(kind="spatial", N=10_000, alpha=1 / 3, replicates=r.n(2000))
        ep = r.run(kind.lower(), model=kind, base_seed=SEED + 61, **common)
        env = r.run(f"brw-{kind.lower()}", model="BRW", base_seed=SEED + 62, **common)
        r.ks(f"{kind}-1 vs BRW extinction time", ep, env, "T")


def spatial_attrition(r: _Run):
    """Envelope progeny minus epidemic infections over one rescaled time unit."""
    cases = [("SIS", 2 / 3, "below"), ("SIR", 2 / 5, "below"), ("SIS", 1 / 3, "equal"), ("SIR", 1 / 3, "equal")]
    for kind, alpha, expect in cases:
        M = 10_000**alpha
        run = r.run(
            f"{kind.lower()}-{alpha:.3f}", kind="spatial", model=f"coupled-{kind}", N=10_000, alpha=alpha,
            horizon=1, max_steps=int(math.ceil(M)), replicates=r.n(2000), base_seed=SEED + 71,
        )
        diff = _values(run, "envelope_U_horizon") - _values(run, "U_horizon")
        env = _values(run, "envelope_U_horizon").mean()
        m, h = mean_ci(diff, 0.99)
        rel = m / env if env > 0 else math.nan
        detail = f"alpha={alpha:.4f} diff={m:.5g} +- {h:.3g} (99%), relative {rel:.4f}"
        if expect == "below":
            r.check(f"{kind}-1 attrition", m - h > 0, detail)
        else:
            r.check(f"{kind}-1 no attrition", (m - h <= 0 <= m + h) or abs(rel) < 0.02, detail)


def watanabe_moments(r: _Run):
    """Mass and conditional spread of the rescaled BRW at t = 1."""
    M = 10_000
    brw = r.run("brw", kind="spatial", model="BRW", N=10_000, M=M, b=1, kappa=1, a=0, horizon=1, max_steps=M,
                replicates=r.n(3000), base_seed=SEED + 81)
    fel = r.run("feller", kind="diffusion", model="feller", b=1, a=0, horizon=1, at=1, replicates=r.n(3000),
                base_seed=SEED + 82)
    r.ks("mass at t=1 vs Feller", brw, fel, "mass_horizon", "value")
    init = spatial.standard_initial(M, 1.0, 1.0)
    m20 = sum(c * x * x for x, c in init.items()) / sum(init.values()) / M
    mass = _values(brw, "mass_horizon")
    m2 = read_column(brw.results, "m2_horizon")[0]
    target = m20 + spatial.sigma2(1)
    got = float(np.mean(m2))
    r.check(
        "second moment | survival",
        abs(got / target - 1) < 0.05,
        f"{got:.5f} vs {m20:.5f} + 2/3 = {target:.5f} over {int((mass > 0).sum())} survivors (5%)",
    )


def spde_particle(r: _Run):
    """Total mass of the Dawson-Watanabe field against Feller, and constant killing."""
    dw = r.run("dw", kind="spde", model="none", a=0, horizon=1, replicates=r.n(5000), base_seed=SEED + 91)
    fel = r.run("feller", kind="diffusion", model="feller", b=1, a=0, horizon=1, at=1, replicates=r.n(5000),
                base_seed=SEED + 92)
    r.ks("mass at t=1 vs Feller", dw, fel, "mass", "value")
    kill = r.run("killed", kind="spde", model="none", a=0.5, horizon=1, replicates=r.n(5000), base_seed=SEED + 93)
    m = float(_values(kill, "mass").mean())
    r.check("a=0.5 mean mass", abs(m / math.exp(-0.5) - 1) <= 0.05, f"{m:.5f} vs e^-0.5 = {math.exp(-0.5):.5f} (5%)")


DETERMINISM_CONFIGS = [
    dict(kind="meanfield", model="SIS", N=400, replicates=30),
    dict(kind="meanfield", model="coupled-SIR", N=500, replicates=30),
    dict(kind="meanfield", model="GW", N=100, M=20, replicates=30),
    dict(kind="meanfield", model="graph", N=60, p=1 / 60, J0=2, replicates=30),
    dict(kind="spatial", model="coupled-SIS", N=50, alpha=0.5, stride=2, replicates=10, frame_replicates=3),
    dict(kind="spatial", model="BRW", N=50, M=9, stride=3, replicates=10, frame_replicates=2),
    dict(kind="spatial", model="SIR", N=30, M=4, d=2, horizon=2, replicates=5),
    dict(kind="diffusion", model="ou", b=1, a=0.3, replicates=30),
    dict(kind="diffusion", model="sir", b=1, a=0, horizon=5, at=1, replicates=30),
    dict(kind="spde", model="sis", a=0.1, stride=100, horizon=0.3, replicates=4, frame_replicates=2),
    dict(kind="meanfield", model="SIR", N=300, replicates=40, workers=2),
]


def determinism(r: _Run):
    """Byte-identical reruns and manifest round trips."""
    from .config import load

    for i, raw in enumerate(DETERMINISM_CONFIGS):
        raw = {**raw, "base_seed": SEED + 100 + i}
        raw["replicates"] = r.n(raw["replicates"])
        workers = raw.pop("workers", 1)
        a = r.run(f"{i}/a", workers=workers, **raw)
        b = r.run(f"{i}/b", workers=1, **raw)
        c = run_experiment(load(a.manifest, [f"output={r.root / f'{i}/c'}", "workers=1"]))
        names = ["results.csv"] + (["frames.csv"] if a.frames else [])
        same = all(filecmp.cmp(a.output / f, b.output / f, shallow=False) for f in names)
        trip = all(filecmp.cmp(a.output / f, c.output / f, shallow=False) for f in names)
        label = f"{raw['kind']}/{raw['model']}" + (f" workers={workers}" if workers != 1 else "")
        r.check(label, same and trip, f"rerun identical={same}, manifest round trip identical={trip}")


PRESETS = {
    "sis-threshold": ("C1", sis_threshold),
    "sir-threshold": ("C2", sir_threshold),
    "feller-extinction": ("C3", feller_extinction),
    "coupling-domination": ("C4", coupling_domination),
    "coupling-marginals": ("C4", coupling_marginals),
    "graph-oracle": ("C5", graph_oracle),
    "spatial-envelope": ("C6", spatial_envelope),
    "spatial-attrition": ("C7", spatial_attrition),
    "watanabe-moments": ("C8", watanabe_moments),
    "spde-particle": ("C9", spde_particle),
    "determinism": ("C10", determinism),
}


def describe(name: str) -> str:
    return (PRESETS[name][1].__doc__ or "").strip().splitlines()[0]


def run_preset(name: str, root=None, factor: float = 1.0, echo: bool = True) -> PresetResult:
    """Run preset ``name`` with outputs under ``root`` (default ``$EPI_OUTPUT_DIR/presets``)."""
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}")
    if root is None:
        root = Path(os.environ.get("EPI_OUTPUT_DIR", "epi_output")) / "presets"
    criterion, fn = PRESETS[name]
    r = _Run(name, criterion, root, factor, echo)
    if echo:
        print(f"{criterion} {name}: {describe(name)}", flush=True)
    fn(r)
    if echo:
        print(r.res.summary(), flush=True)
    return r.res
