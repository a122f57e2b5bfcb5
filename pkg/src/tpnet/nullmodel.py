"""Maximum-entropy null model for binary bipartite layers.

Fits one positive multiplier per country and per activity so that under
independent links with probability p = x*y / (1 + x*y) the expected row and
column degrees match the observed ones. The solve runs on a reduced system:
zero-degree nodes are pinned to probability 0, full rows/columns to
probability 1 (stripping repeats until no degenerate nodes remain), and
remaining nodes are grouped by degree value so equal degrees share one
multiplier.

Sampling draws every matrix entry as an independent Bernoulli variable. Each
sample index derives its own random substream from (seed, stream_key, index),
so ensembles are reproducible bit-for-bit and order-insensitive: accumulating
over samples can be parallelized across indices without changing any result.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .assist import AssistMatrix, _assist_values
from .errors import AxisMismatchError, FitError, PanelError
from .rca import BinaryMatrix

DEFAULT_TOLERANCE = 1e-8
DEFAULT_MAX_ITERATIONS = 10_000


@dataclass(frozen=True)
class BiCMModel:
    """Fitted degree-constrained link-probability model for one binary layer."""

    layer_kind: str
    country_ids: tuple[str, ...]
    activity_ids: tuple[str, ...]
    row_multipliers: np.ndarray
    col_multipliers: np.ndarray
    link_probabilities: np.ndarray
    fit_residual: float

    def __post_init__(self):
        p = np.asarray(self.link_probabilities, dtype=np.float64)
        if p.shape != (len(self.country_ids), len(self.activity_ids)):
            raise PanelError("probability matrix shape does not match axes")
        object.__setattr__(self, "link_probabilities", p)
        object.__setattr__(self, "row_multipliers", np.asarray(self.row_multipliers, dtype=np.float64))
        object.__setattr__(self, "col_multipliers", np.asarray(self.col_multipliers, dtype=np.float64))

    @property
    def shape(self) -> tuple[int, int]:
        return self.link_probabilities.shape

    def expected_degrees(self) -> tuple[np.ndarray, np.ndarray]:
        p = self.link_probabilities
        return p.sum(axis=1), p.sum(axis=0)


def _solve_reduced(
    row_deg: np.ndarray,
    row_mult: np.ndarray,
    col_deg: np.ndarray,
    col_mult: np.ndarray,
    tolerance: float,
    max_iterations: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Damped fixed-point solve on distinct-degree classes.

    Updates x then y from the constraint equations; on a residual increase the
    step is halved and retried, resetting to full steps after any accepted
    move.
    """

    def residual(x: np.ndarray, y: np.ndarray) -> float:
        q = np.outer(x, y)
        p = q / (1.0 + q)
        row_err = np.abs(p @ col_mult - row_deg).max()
        col_err = np.abs(row_mult @ p - col_deg).max()
        return max(row_err, col_err)

    total = float(row_deg @ row_mult)
    x = row_deg / math.sqrt(total)
    y = col_deg / math.sqrt(total)
    best = residual(x, y)
    step = 1.0
    for _ in range(max_iterations):
        if best <= tolerance:
            return x, y
        denom_x = (col_mult * y / (1.0 + np.outer(x, y))).sum(axis=1)
        x_prop = row_deg / denom_x
        x_try = x + step * (x_prop - x)
        denom_y = (row_mult[:, None] * x_try[:, None] / (1.0 + np.outer(x_try, y))).sum(axis=0)
        y_prop = col_deg / denom_y
        y_try = y + step * (y_prop - y)
        res = residual(x_try, y_try)
        if res <= best:
            x, y, best = x_try, y_try, res
            step = min(1.0, step * 2.0)
        else:
            step *= 0.5
            if step < 1e-12:
                raise FitError(
                    f"fixed-point stalled at residual {best:.3e} (tolerance {tolerance:.1e})",
                    residual=best,
                )
    if best <= tolerance:
        return x, y
    raise FitError(
        f"no convergence within {max_iterations} iterations; residual {best:.3e} "
        f"(tolerance {tolerance:.1e})",
        residual=best,
    )


def fit_bicm(
    m: BinaryMatrix,
    tolerance: float = DEFAULT_TOLERANCE,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
) -> BiCMModel:
    """Fit the null model so expected degrees match observed within tolerance.

    Deterministic given inputs. Degenerate nodes never reach the solver:
    zero-degree rows/columns get multiplier 0, full rows/columns multiplier
    inf with their entries pinned to probability 1 against the nodes active
    when they were stripped.
    """
    observed = np.asarray(m.values, dtype=np.int64)
    n_rows, n_cols = observed.shape
    if n_rows == 0 or n_cols == 0:
        raise PanelError("cannot fit a null model to an empty matrix")
    p = np.zeros((n_rows, n_cols))
    x = np.zeros(n_rows)
    y = np.zeros(n_cols)

    active_rows = np.arange(n_rows)
    active_cols = np.arange(n_cols)
    block = observed.copy()
    while block.size:
        row_deg = block.sum(axis=1)
        col_deg = block.sum(axis=0)
        zero_r = row_deg == 0
        full_r = row_deg == block.shape[1]
        zero_c = col_deg == 0
        full_c = col_deg == block.shape[0]
        if not (zero_r.any() or full_r.any() or zero_c.any() or full_c.any()):
            break
        if full_r.any():
            p[np.ix_(active_rows[full_r], active_cols)] = 1.0
            x[active_rows[full_r]] = np.inf
        if full_c.any():
            p[np.ix_(active_rows, active_cols[full_c])] = 1.0
            y[active_cols[full_c]] = np.inf
        keep_r = ~(zero_r | full_r)
        keep_c = ~(zero_c | full_c)
        active_rows = active_rows[keep_r]
        active_cols = active_cols[keep_c]
        block = block[keep_r][:, keep_c]

    if block.size:
        row_deg = block.sum(axis=1).astype(np.float64)
        col_deg = block.sum(axis=0).astype(np.float64)
        uniq_r, inv_r, mult_r = np.unique(row_deg, return_inverse=True, return_counts=True)
        uniq_c, inv_c, mult_c = np.unique(col_deg, return_inverse=True, return_counts=True)
        xr, yr = _solve_reduced(
            uniq_r, mult_r.astype(np.float64), uniq_c, mult_c.astype(np.float64),
            tolerance, max_iterations,
        )
        x_block = xr[inv_r]
        y_block = yr[inv_c]
        x[active_rows] = x_block
        y[active_cols] = y_block
        q = np.outer(x_block, y_block)
        p[np.ix_(active_rows, active_cols)] = q / (1.0 + q)

    row_err = np.abs(p.sum(axis=1) - observed.sum(axis=1)).max() if n_rows else 0.0
    col_err = np.abs(p.sum(axis=0) - observed.sum(axis=0)).max() if n_cols else 0.0
    return BiCMModel(
        layer_kind=m.layer_kind,
        country_ids=m.country_ids,
        activity_ids=m.activity_ids,
        row_multipliers=x,
        col_multipliers=y,
        link_probabilities=p,
        fit_residual=float(max(row_err, col_err)),
    )


def _rng(seed: int, key: tuple[int, ...]) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=key))


def _draw(model: BiCMModel, rng: np.random.Generator) -> np.ndarray:
    return (rng.random(model.shape) < model.link_probabilities).astype(np.int8)


@dataclass(frozen=True)
class NullEnsemble:
    """Replayable stream of Bernoulli samples from one fitted model.

    Iterating yields int8 matrices; iterating again replays the identical
    sequence, because sample i depends only on (seed, stream_key, i).
    """

    model: BiCMModel
    n: int
    seed: int
    stream_key: tuple[int, ...] = ()

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"sample count must be >= 1, got {self.n}")

    def __len__(self) -> int:
        return self.n

    def __iter__(self) -> Iterator[np.ndarray]:
        for i in range(self.n):
            yield _draw(self.model, _rng(self.seed, (*self.stream_key, i)))

    def sample_mean(self) -> np.ndarray:
        total = np.zeros(self.model.shape)
        for sample in self:
            total += sample
        return total / self.n


def sample_ensemble(
    model: BiCMModel, n: int, seed: int, stream_key: tuple[int, ...] = ()
) -> NullEnsemble:
    """Stream of n independent entrywise-Bernoulli draws from the model."""
    return NullEnsemble(model=model, n=n, seed=seed, stream_key=stream_key)


def null_assist_ensemble(
    tech_model: BiCMModel,
    prod_model: BiCMModel,
    n: int,
    seed: int,
    stream_key: tuple[int, ...] = (),
) -> Iterator[AssistMatrix]:
    """Stream of n null contractions from fresh independent layer pairs.

    Draw i samples the technology layer from substream (seed, stream_key, i, 0)
    and the product layer from (seed, stream_key, i, 1), then contracts them
    with the same kernel and degeneracy conventions as the empirical path.
    """
    if n < 1:
        raise ValueError(f"sample count must be >= 1, got {n}")
    if tech_model.country_ids != prod_model.country_ids:
        raise AxisMismatchError(
            "technology and product models must share the same country axis"
        )
    for i in range(n):
        tech_draw = _draw(tech_model, _rng(seed, (*stream_key, i, 0)))
        prod_draw = _draw(prod_model, _rng(seed, (*stream_key, i, 1)))
        values, u, _ = _assist_values(tech_draw, prod_draw)
        yield AssistMatrix(
            tech_ids=tech_model.activity_ids,
            product_ids=prod_model.activity_ids,
            values=values,
            common_country_ids=tech_model.country_ids,
            inactive_tech_ids=tuple(
                t for t, k in zip(tech_model.activity_ids, u) if k == 0
            ),
        )


def null_assist_degree_zscores(
    tech_model: BiCMModel,
    prod_model: BiCMModel,
    n: int,
    seed: int,
    stream_key: tuple[int, ...] = (),
) -> tuple[tuple[np.ndarray, np.ndarray], ...]:
    """Degree-bias z-scores over the exact substreams the paired null
    contraction stream consumes, one (row, column) pair per layer."""
    results = []
    for layer_index, model in enumerate((tech_model, prod_model)):
        draws = (
            _draw(model, _rng(seed, (*stream_key, i, layer_index)))
            for i in range(n)
        )
        results.append(ensemble_degree_zscores(model, draws))
    return tuple(results)


def ensemble_degree_zscores(model: BiCMModel, ensemble: Iterable[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    """Z-scores of mean sampled degrees against their expectations.

    Diagnostic for sampling bias; values beyond ~4 sigma deserve a warning
    but are not an error (they occur with small probability by chance).
    """
    p = model.link_probabilities
    var = (p * (1.0 - p))
    count = 0
    row_sum = np.zeros(p.shape[0])
    col_sum = np.zeros(p.shape[1])
    for sample in ensemble:
        row_sum += sample.sum(axis=1)
        col_sum += sample.sum(axis=0)
        count += 1
    if count == 0:
        raise ValueError("empty ensemble")
    row_sd = np.sqrt(var.sum(axis=1) / count)
    col_sd = np.sqrt(var.sum(axis=0) / count)
    row_z = np.divide(
        row_sum / count - p.sum(axis=1), row_sd,
        out=np.zeros(p.shape[0]), where=row_sd > 0,
    )
    col_z = np.divide(
        col_sum / count - p.sum(axis=0), col_sd,
        out=np.zeros(p.shape[1]), where=col_sd > 0,
    )
    return row_z, col_z


def save_model(model: BiCMModel, path: str | Path) -> None:
    """Write the fitted model as a JSON text artifact.

    Stores multipliers, the residual, and the full probability matrix: pinned
    degenerate entries are not recoverable from multipliers alone, so the
    probabilities are the authoritative payload for resuming a run.
    """
    payload = {
        "layer_kind": model.layer_kind,
        "country_ids": list(model.country_ids),
        "activity_ids": list(model.activity_ids),
        "row_multipliers": [float(v) for v in model.row_multipliers],
        "col_multipliers": [float(v) for v in model.col_multipliers],
        "link_probabilities": [[float(v) for v in row] for row in model.link_probabilities],
        "fit_residual": float(model.fit_residual),
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True), encoding="utf-8")


def load_model(path: str | Path) -> BiCMModel:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    return BiCMModel(
        layer_kind=payload["layer_kind"],
        country_ids=tuple(payload["country_ids"]),
        activity_ids=tuple(payload["activity_ids"]),
        row_multipliers=np.array(payload["row_multipliers"]),
        col_multipliers=np.array(payload["col_multipliers"]),
        link_probabilities=np.array(payload["link_probabilities"]),
        fit_residual=float(payload["fit_residual"]),
    )
