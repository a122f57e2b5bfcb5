"""Run configuration: JSON schema, parsing, validation, serialization.

Schema (JSON object; unknown keys rejected):

    technology_panel  path to the technology panel CSV        (required)
    product_panel     path to the product panel CSV           (required)
    delta             aggregation window length in years      (default 5)
    samples           null-ensemble size N                    (default 10000)
    seed              master random seed                      (default 0)
    tier              significance tier: 90|95|99|99.9        (default "95")
    digits            product code prefix length to aggregate (default null)
    output_dir        where artifacts are written             (default "out")
    lags              list of {"delta_t": int, "pairs": [[t1, t2], ...]}
                      (default: one entry, delta_t 0, pairs derived from the
                      product panel: its two most recent non-overlapping
                      delta-year windows)

When a lag entry omits "pairs", the pairs are derived the same way: product
window end-years first, technology end-year = t2 - delta_t. Every explicit
pair must satisfy t2 - t1 = delta_t.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from .errors import ConfigError
from .validate import TIER_LEVELS

_CONFIG_KEYS = {
    "technology_panel",
    "product_panel",
    "delta",
    "samples",
    "seed",
    "tier",
    "digits",
    "output_dir",
    "lags",
}


@dataclass(frozen=True)
class LagSpec:
    """One time lag and its (technology end-year, product end-year) pairs.

    Empty ``pairs`` means "derive from the product panel at run time".
    """

    delta_t: int
    pairs: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        for t1, t2 in self.pairs:
            if t2 - t1 != self.delta_t:
                raise ConfigError(
                    f"pair ({t1}, {t2}) does not match lag {self.delta_t}"
                )


@dataclass(frozen=True)
class RunConfig:
    technology_panel: str
    product_panel: str
    delta: int = 5
    samples: int = 10_000
    seed: int = 0
    tier: str = "95"
    digits: Optional[int] = None
    output_dir: str = "out"
    lags: tuple[LagSpec, ...] = (LagSpec(0),)

    def __post_init__(self):
        if self.delta < 1:
            raise ConfigError(f"delta must be >= 1, got {self.delta}")
        if self.samples < 1:
            raise ConfigError(f"samples must be >= 1, got {self.samples}")
        if str(self.tier) not in TIER_LEVELS:
            raise ConfigError(
                f"tier must be one of {sorted(TIER_LEVELS)}, got {self.tier!r}"
            )
        if self.digits is not None and self.digits < 1:
            raise ConfigError(f"digits must be >= 1, got {self.digits}")
        if not self.lags:
            raise ConfigError("at least one lag must be configured")
        seen = set()
        for lag in self.lags:
            if lag.delta_t in seen:
                raise ConfigError(f"duplicate lag {lag.delta_t}")
            seen.add(lag.delta_t)

    def replace(self, **overrides) -> "RunConfig":
        return dataclasses.replace(self, **overrides)


def default_pairs(product_years: Sequence[int], delta: int, delta_t: int) -> tuple[tuple[int, int], ...]:
    """Two most recent non-overlapping product windows, technology lagging behind.

    Product end-years are the panel's last year and the year delta before it;
    each pairs with a technology window ending delta_t earlier.
    """
    if not product_years:
        raise ConfigError("product panel has no years")
    last = max(product_years)
    ends = [last - delta, last]
    return tuple((t2 - delta_t, t2) for t2 in ends)


def resolve_lag(lag: LagSpec, product_years: Sequence[int], delta: int) -> LagSpec:
    if lag.pairs:
        return lag
    return LagSpec(lag.delta_t, default_pairs(product_years, delta, lag.delta_t))


def _parse_lags(raw, where: str) -> tuple[LagSpec, ...]:
    if not isinstance(raw, list):
        raise ConfigError(f"{where}: lags must be a list")
    lags = []
    for entry in raw:
        if not isinstance(entry, dict) or "delta_t" not in entry:
            raise ConfigError(f"{where}: each lag needs a delta_t")
        unknown = set(entry) - {"delta_t", "pairs"}
        if unknown:
            raise ConfigError(f"{where}: unknown lag keys {sorted(unknown)}")
        pairs = entry.get("pairs", [])
        try:
            parsed = tuple((int(t1), int(t2)) for t1, t2 in pairs)
        except (TypeError, ValueError):
            raise ConfigError(f"{where}: pairs must be [t1, t2] integer lists")
        lags.append(LagSpec(int(entry["delta_t"]), parsed))
    return tuple(lags)


def config_from_dict(data: dict, where: str = "config") -> RunConfig:
    unknown = set(data) - _CONFIG_KEYS
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    for key in ("technology_panel", "product_panel"):
        if key not in data:
            raise ConfigError(f"{where}: missing required key {key!r}")
    kwargs = dict(
        technology_panel=str(data["technology_panel"]),
        product_panel=str(data["product_panel"]),
    )
    if "delta" in data:
        kwargs["delta"] = int(data["delta"])
    if "samples" in data:
        kwargs["samples"] = int(data["samples"])
    if "seed" in data:
        kwargs["seed"] = int(data["seed"])
    if "tier" in data:
        kwargs["tier"] = str(data["tier"])
    if "digits" in data and data["digits"] is not None:
        kwargs["digits"] = int(data["digits"])
    if "output_dir" in data:
        kwargs["output_dir"] = str(data["output_dir"])
    if "lags" in data:
        kwargs["lags"] = _parse_lags(data["lags"], where)
    return RunConfig(**kwargs)


def parse_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})")
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    return config_from_dict(data, where=str(path))


def config_to_dict(cfg: RunConfig) -> dict:
    return {
        "technology_panel": cfg.technology_panel,
        "product_panel": cfg.product_panel,
        "delta": cfg.delta,
        "samples": cfg.samples,
        "seed": cfg.seed,
        "tier": cfg.tier,
        "digits": cfg.digits,
        "output_dir": cfg.output_dir,
        "lags": [
            {"delta_t": lag.delta_t, "pairs": [list(p) for p in lag.pairs]}
            for lag in cfg.lags
        ],
    }


def serialize_config(cfg: RunConfig, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(config_to_dict(cfg), sort_keys=True, indent=2) + "\n",
        encoding="utf-8",
    )
