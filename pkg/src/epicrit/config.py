"""Experiment configuration: a flat ``key = value`` text format.

Grammar, one statement per line::

    line    := blank | comment | key "=" value [comment]
    comment := "#" any text
    key     := [a-z_][a-z0-9_]*

Values are parsed according to the key's declared type.  Unknown keys,
duplicate keys and keys that do not apply to the chosen experiment ``kind``
are errors.  A JSON run manifest is also accepted as a config: its
``config`` object is read back key by key, which is how runs are reproduced.

Every key, its type, default and the experiment kinds it applies to are in
:data:`SCHEMA`.  Defaults that depend on other keys (``J0``, ``M``, ``p``,
``max_steps``, ...) resolve to ``None`` here and are filled in by
:func:`resolve`, and the resolved values are what the manifest records.
"""

from __future__ import annotations

import json
import math
import os
import re
from dataclasses import dataclass
from pathlib import Path

KINDS = ("meanfield", "spatial", "diffusion", "spde", "compare")

MODELS = {
    "meanfield": ("SIS", "SIR", "GW", "coupled-SIS", "coupled-SIR", "graph"),
    "spatial": ("SIS", "SIR", "BRW", "coupled-SIS", "coupled-SIR"),
    "diffusion": ("feller", "sis", "sir", "parabolic", "ou"),
    "spde": ("none", "sis", "sir"),
}

_ALL = KINDS
_SIM = ("meanfield", "spatial", "diffusion", "spde")


@dataclass(frozen=True)
class Key:
    type: type
    default: object
    kinds: tuple[str, ...]
    doc: str


SCHEMA: dict[str, Key] = {
    "kind": Key(str, None, _ALL, "experiment kind"),
    "name": Key(str, None, _ALL, "run name; default output directory is $EPI_OUTPUT_DIR/<name>"),
    "output": Key(str, None, _ALL, "output directory (overrides name)"),
    "replicates": Key(int, 100, _SIM, "number of replicates"),
    "base_seed": Key(int, 0, _SIM, "base seed; replicate r uses stream r"),
    "first_stream": Key(int, 0, _SIM, "stream id of replicate 0"),
    "workers": Key(int, 0, _SIM, "worker processes (0: available cores)"),
    "model": Key(str, None, _SIM, "model within the kind"),
    "N": Key(int, None, ("meanfield", "spatial"), "village size"),
    "a": Key(float, 0.0, _SIM, "window drift / killing rate"),
    "b": Key(float, 1.0, _SIM, "initial mass in scaled units"),
    "J0": Key(int, None, ("meanfield",), "initial infectives (default ceil(b N^alpha))"),
    "alpha": Key(float, None, ("meanfield", "spatial"), "initial-scale exponent"),
    "M": Key(float, None, ("meanfield", "spatial"), "scaling mass (spatial default N^alpha)"),
    "d": Key(int, 1, ("spatial",), "lattice dimension"),
    "kappa": Key(float, 1.0, ("spatial",), "half-width of the initial interval in units of sqrt(M)"),
    "p": Key(float, None, ("meanfield", "spatial"), "infection probability override"),
    "max_steps": Key(int, None, ("meanfield", "spatial"), "generation cap"),
    "horizon": Key(float, None, ("spatial", "diffusion", "spde"), "horizon in rescaled time"),
    "stride": Key(int, 0, ("spatial", "spde"), "frame stride in steps (0: no frames)"),
    "frame_replicates": Key(int, 1, ("spatial", "spde"), "replicates whose frames are written"),
    "dt": Key(float, None, ("diffusion", "spde"), "time step"),
    "at": Key(float, None, ("diffusion",), "time at which the path value is reported"),
    "reversion": Key(float, 1.0, ("diffusion",), "OU mean reversion"),
    "noise": Key(int, 1, ("diffusion",), "1: stochastic, 0: deterministic skeleton"),
    "dx": Key(float, None, ("spde",), "space step"),
    "width": Key(float, 0.1, ("spde",), "half-width of the initial bump"),
    "file_a": Key(str, None, ("compare",), "first results CSV"),
    "file_b": Key(str, None, ("compare",), "second results CSV"),
    "column": Key(str, None, ("compare",), "column to compare"),
    "column_b": Key(str, None, ("compare",), "column in file_b (default: column)"),
    "alpha_ks": Key(float, 0.01, ("compare",), "KS level"),
    "floor": Key(float, 0.0, ("compare",), "minimum KS threshold"),
}

_KEY_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


class ConfigError(ValueError):
    """Invalid configuration; the message is a single line."""


def _convert(key: str, raw, spec: Key):
    if raw is None:
        return None
    try:
        if spec.type is int:
            if isinstance(raw, bool):
                raise ValueError
            if isinstance(raw, float):
                if not raw.is_integer():
                    raise ValueError
                return int(raw)
            return int(str(raw).strip())
        if spec.type is float:
            v = float(raw)
            if math.isnan(v):
                raise ValueError
            return v
        return str(raw).strip()
    except (TypeError, ValueError):
        raise ConfigError(f"key {key!r} expects {spec.type.__name__}, got {raw!r}") from None


def parse_text(text: str) -> dict:
    """Parse the ``key = value`` format into a raw dict of strings."""
    out: dict[str, str] = {}
    for n, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {n}: expected 'key = value', got {line.strip()!r}")
        key, value = (s.strip() for s in body.split("=", 1))
        if not _KEY_RE.match(key):
            raise ConfigError(f"line {n}: bad key {key!r}")
        if key in out:
            raise ConfigError(f"line {n}: duplicate key {key!r}")
        out[key] = value
    return out


def load(path, overrides=()) -> dict:
    """Read a config file (or manifest), apply ``key=value`` overrides and resolve it."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {str(path)!r}: {exc.strerror}") from None
    if text.lstrip().startswith("{"):
        try:
            raw = json.loads(text)["config"]
        except (json.JSONDecodeError, KeyError, TypeError):
            raise ConfigError(f"{str(path)!r} is not a run manifest") from None
        raw = {k: v for k, v in raw.items() if v is not None}
    else:
        raw = parse_text(text)
    given = {}
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        k, v = (s.strip() for s in item.split("=", 1))
        given[k] = v
    if "name" in given and "output" not in given:
        # a manifest records the resolved directory, which a new name replaces
        raw.pop("output", None)
    raw.update(given)
    return resolve(raw)


def _output_dir(cfg: dict) -> str:
    if cfg.get("output"):
        return cfg["output"]
    base = os.environ.get("EPI_OUTPUT_DIR", "epi_output")
    return str(Path(base) / (cfg.get("name") or cfg["kind"]))


def resolve(raw: dict) -> dict:
    """Validate a raw mapping and fill in every default.

    The result maps every applicable key to a concrete value and can be fed
    back to :func:`resolve` unchanged.
    """
    kind = raw.get("kind")
    if kind not in KINDS:
        raise ConfigError(f"kind must be one of {', '.join(KINDS)}, got {kind!r}")
    for k in raw:
        if k not in SCHEMA:
            raise ConfigError(f"unknown key {k!r}")
        if kind not in SCHEMA[k].kinds:
            raise ConfigError(f"key {k!r} does not apply to kind {kind!r}")
    cfg = {k: _convert(k, raw.get(k, s.default), s) for k, s in SCHEMA.items() if kind in s.kinds}
    cfg["output"] = _output_dir(cfg)
    if cfg["name"] is None:
        cfg["name"] = kind
    if kind == "compare":
        for k in ("file_a", "file_b", "column"):
            if not cfg[k]:
                raise ConfigError(f"compare needs {k!r}")
        cfg["column_b"] = cfg["column_b"] or cfg["column"]
        if not 0 < cfg["alpha_ks"] < 1:
            raise ConfigError("alpha_ks must lie in (0, 1)")
        return cfg
    _resolve_sim(cfg)
    return cfg


def _need(cfg, key, cond, msg):
    if not cond:
        raise ConfigError(f"{key}: {msg}")


def _ceil_scale(x: float) -> int:
    # N**(1/3) with N = 8000 is 19.999999999999996
    return int(math.ceil(x - 1e-9))


def _resolve_sim(cfg: dict) -> None:
    from . import diffusion, meanfield, spatial, spde

    kind = cfg["kind"]
    models = MODELS[kind]
    if cfg["model"] is None:
        raise ConfigError(f"kind {kind!r} needs a model ({', '.join(models)})")
    match = [m for m in models if m.lower() == cfg["model"].lower()]
    _need(cfg, "model", match, f"must be one of {', '.join(models)}, got {cfg['model']!r}")
    model = cfg["model"] = match[0]
    _need(cfg, "replicates", cfg["replicates"] >= 0, "must be nonnegative")
    _need(cfg, "first_stream", cfg["first_stream"] >= 0, "must be nonnegative")
    _need(cfg, "workers", cfg["workers"] >= 0, "must be nonnegative")
    _need(cfg, "b", cfg["b"] >= 0, "must be nonnegative")
    if "stride" in cfg:
        _need(cfg, "stride", cfg["stride"] >= 0, "must be nonnegative")

    if kind == "meanfield":
        N = cfg["N"]
        _need(cfg, "N", N is not None and N >= 1, "a positive village size is required")
        base = model.split("-")[-1] if model != "graph" else "SIR"
        if model == "GW":
            M = cfg["M"] if cfg["M"] is not None else math.sqrt(N)
            _need(cfg, "M", M > 0, "must be positive")
            cfg["M"] = float(M)
            cfg["alpha"] = None
            if cfg["J0"] is None:
                cfg["J0"] = int(round(cfg["b"] * M))
            if cfg["p"] is None:
                cfg["p"] = 1.0 / N + cfg["a"] / (N * M)
            if cfg["max_steps"] is None:
                cfg["max_steps"] = int(math.ceil(50 * M))
        else:
            alpha = cfg["alpha"] if cfg["alpha"] is not None else meanfield.SCALE_EXPONENTS[base][0]
            cfg["alpha"] = float(alpha)
            cfg["M"] = None
            if cfg["J0"] is None:
                cfg["J0"] = _ceil_scale(cfg["b"] * N**alpha)
            if cfg["p"] is None:
                try:
                    cfg["p"] = meanfield.critical_p(base, N, cfg["a"])
                except ValueError as exc:
                    raise ConfigError(str(exc)) from None
            if cfg["max_steps"] is None:
                cfg["max_steps"] = meanfield.default_max_steps(base, N)
        _need(cfg, "J0", 1 <= cfg["J0"] <= (N if model != "GW" else 10**12), "must lie in [1, N]")
        _need(cfg, "p", 0 <= cfg["p"] <= 1, "must be a probability")
        _need(cfg, "max_steps", cfg["max_steps"] >= 0, "must be nonnegative")

    elif kind == "spatial":
        N, d = cfg["N"], cfg["d"]
        _need(cfg, "N", N is not None and N >= 1, "a positive village size is required")
        _need(cfg, "d", d >= 1, "must be positive")
        if cfg["M"] is None:
            _need(cfg, "alpha", cfg["alpha"] is not None and cfg["alpha"] > 0, "give alpha > 0 or M")
            cfg["M"] = float(N) ** cfg["alpha"]
        _need(cfg, "M", cfg["M"] > 0, "must be positive")
        M = cfg["M"]
        if cfg["p"] is None:
            try:
                cfg["p"] = spatial.critical_p_brw(N, M, cfg["a"], d)
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
        _need(cfg, "p", 0 <= cfg["p"] <= 1, "must be a probability")
        if cfg["max_steps"] is None:
            cfg["max_steps"] = int(math.ceil(50 * M))
        if cfg["horizon"] is None:
            cfg["horizon"] = cfg["max_steps"] / M
        _need(cfg, "horizon", 0 <= round(cfg["horizon"] * M) <= cfg["max_steps"], "must lie within max_steps / M")
        _need(cfg, "kappa", cfg["kappa"] >= 0, "must be nonnegative")

    elif kind == "diffusion":
        if cfg["dt"] is None:
            cfg["dt"] = diffusion.DEFAULT_DT
        if cfg["horizon"] is None:
            cfg["horizon"] = diffusion.DEFAULT_HORIZON
        _need(cfg, "dt", 0 < cfg["dt"] < diffusion.MAX_DT, f"must lie in (0, {diffusion.MAX_DT})")
        _need(cfg, "horizon", cfg["horizon"] >= 0, "must be nonnegative")
        if cfg["at"] is None:
            cfg["at"] = cfg["horizon"]
        _need(cfg, "at", 0 <= cfg["at"] <= cfg["horizon"], "must lie in [0, horizon]")
        _need(cfg, "reversion", cfg["reversion"] >= 0, "must be nonnegative")
        _need(cfg, "noise", cfg["noise"] in (0, 1), "must be 0 or 1")

    elif kind == "spde":
        if cfg["dx"] is None:
            cfg["dx"] = spde.DEFAULT_DX
        if cfg["dt"] is None:
            cfg["dt"] = spde.DEFAULT_DT
        if cfg["horizon"] is None:
            cfg["horizon"] = 1.0
        try:
            spde.check_stability(cfg["dx"], cfg["dt"])
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        _need(cfg, "a", cfg["a"] >= 0, "constant killing must be nonnegative")
        _need(cfg, "width", cfg["width"] > 0, "must be positive")
        _need(cfg, "horizon", cfg["horizon"] >= 0, "must be nonnegative")


def to_text(cfg: dict) -> str:
    """Render a resolved config in the ``key = value`` format."""
    lines = [f"{k} = {v}" for k, v in cfg.items() if v is not None]
    return "\n".join(lines) + "\n"
