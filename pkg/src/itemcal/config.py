"""Flat key=value study configuration files.

One assignment per line, ``#`` starts a comment, unknown keys are errors.
Keys mirror the study, design, pool and stopping options; a/b/c grids are
comma-separated value lists crossed into the item grid.
"""

from __future__ import annotations

from .design import DesignConfig
from .errors import ConfigError
from .harness import Strategy, StudyConfig
from .model import ItemParams
from .pool import PoolConfig
from .sequential import StoppingConfig


def _parse_float(v):
    try:
        return float(v)
    except ValueError as exc:
        raise ConfigError(f"expected a number, got {v!r}") from exc


def _parse_int(v):
    try:
        return int(v)
    except ValueError as exc:
        raise ConfigError(f"expected an integer, got {v!r}") from exc


def _parse_float_list(v):
    items = [s.strip() for s in v.split(",") if s.strip()]
    if not items:
        raise ConfigError("expected a comma-separated list of numbers")
    return tuple(_parse_float(s) for s in items)


def parse_strategy(v) -> Strategy:
    try:
        return Strategy(v.strip().upper())
    except ValueError as exc:
        raise ConfigError(
            f"unknown strategy {v!r} (expected TWO_STAGE, STRICT_DOPT or RANDOM)"
        ) from exc


_PARSERS = {
    "strategy": parse_strategy,
    "replications": _parse_int,
    "master_seed": _parse_int,
    "threads": _parse_int,
    "max_examinees": _parse_int,
    "max_failure_rate": _parse_float,
    "a_grid": _parse_float_list,
    "b_grid": _parse_float_list,
    "c_grid": _parse_float_list,
    "d": _parse_float,
    "alpha": _parse_float,
    "n0": _parse_int,
    "p0": _parse_float,
    "theta_c": _parse_float,
    "pool_min": _parse_float,
    "pool_max": _parse_float,
    "n_init_ab": _parse_int,
    "n_init_c": _parse_int,
    "batch_ab": _parse_int,
    "batch_c": _parse_int,
    "dopt_batch": _parse_int,
    "random_sd": _parse_float,
    "error_scale": _parse_float,
    "error_log_exponent": _parse_float,
}


def parse_config_text(text, source="<config>") -> dict:
    """Parse key=value lines into a typed option dict."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key not in _PARSERS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        values[key] = _PARSERS[key](val)
    return values


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return parse_config_text(text, source=str(path))


def build_study_config(options: dict) -> StudyConfig:
    """Assemble a StudyConfig from parsed options (defaults fill the rest)."""
    opts = dict(options)

    def take(key, default):
        return opts.pop(key) if key in opts else default

    design_kwargs = {}
    for key in ("p0", "theta_c", "pool_min", "pool_max", "n_init_ab", "n_init_c",
                "batch_ab", "batch_c", "dopt_batch", "random_sd"):
        if key in opts:
            design_kwargs[key] = opts.pop(key)
    design = DesignConfig(**design_kwargs)

    pool_kwargs = {"pool_min": design.pool_min, "pool_max": design.pool_max}
    for key in ("error_scale", "error_log_exponent"):
        if key in opts:
            pool_kwargs[key] = opts.pop(key)
    pool = PoolConfig(**pool_kwargs)

    n0 = take("n0", design.n_init_ab + design.n_init_c)
    stopping = StoppingConfig(d=take("d", 0.5), alpha=take("alpha", 0.05), n0=n0)

    a_grid = take("a_grid", (0.5, 1.0, 1.5, 2.0))
    b_grid = take("b_grid", (-2.0, -1.0, 0.0, 1.0, 2.0))
    c_grid = take("c_grid", (0.1,))
    try:
        grid = tuple(ItemParams(a, b, c) for a in a_grid for b in b_grid for c in c_grid)
    except ValueError as exc:
        raise ConfigError(f"invalid grid item: {exc}") from exc

    kwargs = dict(
        grid=grid,
        stopping=stopping,
        design=design,
        pool=pool,
        strategy=take("strategy", Strategy.TWO_STAGE),
        replications=take("replications", 200),
        max_examinees=take("max_examinees", 50_000),
        master_seed=take("master_seed", 20100501),
        threads=take("threads", 1),
        max_failure_rate=take("max_failure_rate", 0.1),
    )
    assert not opts, f"unconsumed config keys: {sorted(opts)}"
    try:
        return StudyConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
