"""End-to-end orchestration: ingest, windows, RCA, contraction, null-model
validation, ranking, reports, and the window-robustness harness.

Runs are deterministic given (config, seed): every random substream is derived
from the master seed plus a structural key (lag index, pair index, sample
index, layer), and all writers are deterministic. Expensive intermediates
(binary matrices, fitted models, contraction matrices, exceedance counts) are
cached on disk keyed by a content hash of their inputs, so rerunning any stage
from a cached intermediate reproduces identical downstream results. A manifest
in the output directory records which stages completed.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import exports
from .assist import AssistMatrix, compute_assist
from .config import LagSpec, RunConfig, config_to_dict, resolve_lag
from .efc import (
    ActivityRanking,
    FitnessComplexity,
    LinkDifferenceCurve,
    cumulative_link_difference,
    rank_activities,
)
from .errors import ConfigError, StageError, TpnetError
from .nullmodel import (
    BiCMModel,
    fit_bicm,
    null_assist_degree_zscores,
    null_assist_ensemble,
)
from .panels import (
    ActivityPanel,
    aggregate_activities,
    aggregate_window,
    align_countries,
    read_panel_csv,
)
from .rca import BinaryMatrix, binarize, compute_rca
from .validate import (
    PairValidation,
    ValidatedNetwork,
    compute_pvalues,
    degree_report,
    intersect_pairs,
    load_hs_sections,
    significance_profile,
)

logger = logging.getLogger(__name__)

LAX_TIER = "90"


class ArtifactCache:
    """Write-once npz store keyed by a content hash of each artifact's inputs."""

    def __init__(self, root: Optional[Path]):
        self.root = Path(root) if root is not None else None
        if self.root is not None:
            self.root.mkdir(parents=True, exist_ok=True)

    @staticmethod
    def key(*parts) -> str:
        digest = hashlib.sha256()
        for part in parts:
            if isinstance(part, np.ndarray):
                arr = np.ascontiguousarray(part)
                digest.update(str(arr.dtype).encode())
                digest.update(str(arr.shape).encode())
                digest.update(arr.tobytes())
            else:
                digest.update(str(part).encode())
            digest.update(b"\x1f")
        return digest.hexdigest()

    def _path(self, kind: str, key: str) -> Optional[Path]:
        if self.root is None:
            return None
        return self.root / f"{kind}-{key}.npz"

    def load(self, kind: str, key: str) -> Optional[dict[str, np.ndarray]]:
        path = self._path(kind, key)
        if path is None or not path.exists():
            return None
        with np.load(path, allow_pickle=False) as data:
            return {name: data[name] for name in data.files}

    def store(self, kind: str, key: str, **arrays: np.ndarray) -> None:
        path = self._path(kind, key)
        if path is None or path.exists():
            return
        tmp = path.with_suffix(".tmp.npz")
        np.savez(tmp, **arrays)
        tmp.replace(path)


@dataclass(frozen=True)
class LagResult:
    spec: LagSpec
    validations: tuple[PairValidation, ...]
    network: ValidatedNetwork


@dataclass(frozen=True)
class PipelineResult:
    config: RunConfig
    lag_results: tuple[LagResult, ...]
    tech_ranking: Optional[ActivityRanking] = None
    product_ranking: Optional[ActivityRanking] = None
    tech_fit: Optional[FitnessComplexity] = None
    product_fit: Optional[FitnessComplexity] = None
    curves: tuple[LinkDifferenceCurve, ...] = ()

    def network(self, delta_t: int) -> ValidatedNetwork:
        for result in self.lag_results:
            if result.spec.delta_t == delta_t:
                return result.network
        raise KeyError(f"no network for lag {delta_t}")


def _stage(stage: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except StageError:
        raise
    except TpnetError as exc:
        raise StageError(stage, str(exc)) from exc


class Manifest:
    """Stage-completion record kept next to the outputs."""

    def __init__(self, out_dir: Path, cfg: RunConfig):
        self.path = out_dir / "manifest.json"
        snapshot = config_to_dict(cfg)
        snapshot.pop("output_dir", None)
        if self.path.exists():
            previous = json.loads(self.path.read_text(encoding="utf-8"))
            if previous.get("config") == snapshot:
                self.data = previous
            else:
                self.data = {"config": snapshot, "stages": {}, "outputs": []}
        else:
            self.data = {"config": snapshot, "stages": {}, "outputs": []}

    def complete(self, stage: str, **info) -> None:
        self.data["stages"][stage] = dict(sorted(info.items()))
        self._write()

    def add_output(self, path: Path, out_dir: Path) -> None:
        rel = str(path.relative_to(out_dir))
        if rel not in self.data["outputs"]:
            self.data["outputs"].append(rel)
            self.data["outputs"].sort()
        self._write()

    def _write(self) -> None:
        self.path.write_text(
            json.dumps(self.data, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )


def load_panels(cfg: RunConfig) -> tuple[ActivityPanel, ActivityPanel]:
    tech = read_panel_csv(cfg.technology_panel, "technology")
    prod = read_panel_csv(cfg.product_panel, "product")
    if cfg.digits is not None:
        prod = aggregate_activities(prod, cfg.digits)
    logger.info(
        "loaded panels: technology %s, product %s", tech.shape, prod.shape
    )
    return tech, prod


def resolve_lags(cfg: RunConfig, tech: ActivityPanel, prod: ActivityPanel) -> tuple[LagSpec, ...]:
    """Fill in default period pairs and check every window fits the panels."""
    resolved = []
    for lag in cfg.lags:
        spec = resolve_lag(lag, prod.years, cfg.delta)
        for t1, t2 in spec.pairs:
            for panel, end in ((tech, t1), (prod, t2)):
                missing = sorted(
                    set(range(end - cfg.delta + 1, end + 1)) - set(panel.years)
                )
                if missing:
                    raise ConfigError(
                        f"lag {spec.delta_t} pair ({t1}, {t2}): {panel.layer_kind} "
                        f"panel is missing years {missing}"
                    )
        resolved.append(spec)
    return tuple(resolved)


def _binary_for_window(
    panel: ActivityPanel, delta: int, end_year: int, cache: ArtifactCache
) -> BinaryMatrix:
    window = aggregate_window(panel, delta, end_year)
    key = cache.key(
        "binary", panel.layer_kind, *window.country_ids, *window.activity_ids,
        window.values,
    )
    cached = cache.load("binary", key)
    if cached is not None:
        return BinaryMatrix(
            layer_kind=panel.layer_kind,
            country_ids=window.country_ids,
            activity_ids=window.activity_ids,
            values=cached["values"],
            delta=delta,
            end_year=end_year,
        )
    binary = binarize(compute_rca(window))
    cache.store("binary", key, values=binary.values)
    return binary


def _fit_model(binary: BinaryMatrix, cache: ArtifactCache) -> BiCMModel:
    key = cache.key(
        "model", binary.layer_kind, *binary.country_ids, *binary.activity_ids,
        binary.values,
    )
    cached = cache.load("model", key)
    if cached is not None:
        return BiCMModel(
            layer_kind=binary.layer_kind,
            country_ids=binary.country_ids,
            activity_ids=binary.activity_ids,
            row_multipliers=cached["x"],
            col_multipliers=cached["y"],
            link_probabilities=cached["p"],
            fit_residual=float(cached["residual"][0]),
        )
    model = fit_bicm(binary)
    cache.store(
        "model", key,
        x=model.row_multipliers, y=model.col_multipliers,
        p=model.link_probabilities, residual=np.array([model.fit_residual]),
    )
    return model


def _assist_for_pair(
    tech_bin: BinaryMatrix, prod_bin: BinaryMatrix, cache: ArtifactCache
) -> AssistMatrix:
    key = cache.key(
        "assist", *tech_bin.country_ids, *tech_bin.activity_ids,
        *prod_bin.activity_ids, tech_bin.values, prod_bin.values,
    )
    cached = cache.load("assist", key)
    assist = compute_assist(tech_bin, prod_bin)
    if cached is None:
        cache.store("assist", key, values=assist.values)
    return assist


def _flag_sampling_bias(
    cfg: RunConfig,
    tech_model: BiCMModel,
    prod_model: BiCMModel,
    stream_key: tuple[int, ...],
    pair: tuple[int, int],
    limit: int = 1000,
) -> None:
    """Warn (never fail) when sampled degrees drift past 4 sigma.

    Audits the same substreams the validation consumed; a 4-sigma excursion
    happens by chance now and then, so it is a flag for the log only.
    """
    n = min(limit, cfg.samples)
    for layer, (row_z, col_z) in zip(
        ("technology", "product"),
        null_assist_degree_zscores(tech_model, prod_model, n, cfg.seed, stream_key),
    ):
        worst = max(
            float(np.abs(row_z).max(initial=0.0)),
            float(np.abs(col_z).max(initial=0.0)),
        )
        if worst > 4.0:
            logger.warning(
                "pair %s: %s layer sampled degrees drift %.2f sigma from "
                "expectation over %d draws",
                pair, layer, worst, n,
            )


def validate_pair(
    cfg: RunConfig,
    tech_panel: ActivityPanel,
    prod_panel: ActivityPanel,
    pair: tuple[int, int],
    stream_key: tuple[int, ...],
    cache: ArtifactCache,
) -> PairValidation:
    """Full single-pair chain: windows, RCA, alignment, contraction, nulls."""
    t1, t2 = pair
    tech_bin = _binary_for_window(tech_panel, cfg.delta, t1, cache)
    prod_bin = _binary_for_window(prod_panel, cfg.delta, t2, cache)
    tech_bin, prod_bin, common = align_countries(tech_bin, prod_bin)
    logger.info("pair (%s, %s): %d common countries", t1, t2, len(common))
    empirical = _assist_for_pair(tech_bin, prod_bin, cache)
    tech_model = _fit_model(tech_bin, cache)
    prod_model = _fit_model(prod_bin, cache)
    counts_key = cache.key(
        "counts", empirical.values, tech_model.link_probabilities,
        prod_model.link_probabilities, cfg.samples, cfg.seed, *stream_key,
    )
    cached = cache.load("counts", counts_key)
    if cached is not None:
        return PairValidation(
            tech_ids=empirical.tech_ids,
            product_ids=empirical.product_ids,
            empirical=empirical.values,
            exceed_counts=cached["counts"],
            n_samples=int(cached["n"][0]),
            t1=t1,
            t2=t2,
        )
    nulls = null_assist_ensemble(
        tech_model, prod_model, cfg.samples, cfg.seed, stream_key
    )
    validation = compute_pvalues(empirical, nulls)
    _flag_sampling_bias(cfg, tech_model, prod_model, stream_key, (t1, t2))
    validation = PairValidation(
        tech_ids=validation.tech_ids,
        product_ids=validation.product_ids,
        empirical=validation.empirical,
        exceed_counts=validation.exceed_counts,
        n_samples=validation.n_samples,
        t1=t1,
        t2=t2,
    )
    cache.store(
        "counts", counts_key,
        counts=validation.exceed_counts, n=np.array([validation.n_samples]),
    )
    return validation


def run_lag(
    cfg: RunConfig,
    tech_panel: ActivityPanel,
    prod_panel: ActivityPanel,
    spec: LagSpec,
    lag_index: int,
    cache: ArtifactCache,
) -> LagResult:
    validations = tuple(
        validate_pair(
            cfg, tech_panel, prod_panel, pair, (0, lag_index, pair_index), cache
        )
        for pair_index, pair in enumerate(spec.pairs)
    )
    network = intersect_pairs(validations, cfg.tier)
    logger.info(
        "lag %d: %d edges at tier %s across %d pairs",
        spec.delta_t, network.edge_count, cfg.tier, len(spec.pairs),
    )
    return LagResult(spec=spec, validations=validations, network=network)


def compute_rankings(
    cfg: RunConfig,
    tech_panel: ActivityPanel,
    prod_panel: ActivityPanel,
    lags: Sequence[LagSpec],
    cache: ArtifactCache,
) -> tuple[ActivityRanking, FitnessComplexity, ActivityRanking, FitnessComplexity]:
    """Complexity rankings on the most recent configured window of each layer."""
    tech_end = max(t1 for spec in lags for t1, _ in spec.pairs)
    prod_end = max(t2 for spec in lags for _, t2 in spec.pairs)
    tech_bin = _binary_for_window(tech_panel, cfg.delta, tech_end, cache)
    prod_bin = _binary_for_window(prod_panel, cfg.delta, prod_end, cache)
    tech_ranking, tech_fit = rank_activities(tech_bin)
    prod_ranking, prod_fit = rank_activities(prod_bin)
    return tech_ranking, tech_fit, prod_ranking, prod_fit


def _write_lag_outputs(
    out_dir: Path,
    manifest: Manifest,
    cfg: RunConfig,
    result: LagResult,
    sections: dict[str, str],
    reports: bool,
) -> None:
    lag_dir = out_dir / f"lag_{result.spec.delta_t}"
    lag_dir.mkdir(parents=True, exist_ok=True)
    net = result.network
    edge_path = lag_dir / "edges.csv"
    exports.write_edge_csv(net, edge_path)
    graphml_path = lag_dir / "network.graphml"
    exports.write_graphml(net, graphml_path, sections)
    written = [edge_path, graphml_path]
    if reports:
        report = degree_report(net, sections)
        profiles = {
            product: significance_profile(product, result.validations)
            for product, deg in net.product_degrees().items()
            if deg > 0
        }
        meta = {
            "delta": cfg.delta,
            "samples": cfg.samples,
            "seed": cfg.seed,
            "tier": cfg.tier,
            "digits": cfg.digits,
        }
        report_path = lag_dir / "report.json"
        exports.write_json(
            exports.network_report(
                net, report, profiles, exports.tech_subclass_degrees(net), meta
            ),
            report_path,
        )
        written.append(report_path)
    for path in written:
        manifest.add_output(path, out_dir)


def run_pipeline(
    cfg: RunConfig, write: bool = True, reports: bool = True
) -> PipelineResult:
    """Execute every configured lag end to end and write all artifacts.

    With ``write=False`` the run stays in memory (no outputs, no manifest);
    the on-disk cache under the output directory is still used. With
    ``reports=False`` only the per-lag network files are written, not the
    JSON reports, rankings, or curves.
    """
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cache = ArtifactCache(out_dir / "cache")
    manifest = Manifest(out_dir, cfg) if write else None

    tech_panel, prod_panel = _stage("ingest", load_panels, cfg)
    if manifest:
        manifest.complete(
            "ingest",
            technology_shape=list(tech_panel.shape),
            product_shape=list(prod_panel.shape),
        )
    lags = _stage("configure", resolve_lags, cfg, tech_panel, prod_panel)
    if manifest:
        manifest.complete(
            "configure",
            lags=[
                {"delta_t": spec.delta_t, "pairs": [list(p) for p in spec.pairs]}
                for spec in lags
            ],
        )

    lag_results = []
    for lag_index, spec in enumerate(lags):
        result = _stage(
            f"validate_lag_{spec.delta_t}",
            run_lag, cfg, tech_panel, prod_panel, spec, lag_index, cache,
        )
        lag_results.append(result)
        if manifest:
            manifest.complete(
                f"validate_lag_{spec.delta_t}",
                pairs=[list(p) for p in spec.pairs],
                edges=result.network.edge_count,
            )

    tech_ranking, tech_fit, prod_ranking, prod_fit = _stage(
        "efc", compute_rankings, cfg, tech_panel, prod_panel, lags, cache
    )
    if manifest:
        manifest.complete(
            "efc",
            technology_activities=len(tech_ranking),
            product_activities=len(prod_ranking),
        )

    curves: list[LinkDifferenceCurve] = []
    if len(lag_results) >= 2:
        ordered = sorted(lag_results, key=lambda r: r.spec.delta_t)
        base, lagged = ordered[0], ordered[-1]
        curves = [
            cumulative_link_difference(
                base.network, lagged.network, tech_ranking, "technology"
            ),
            cumulative_link_difference(
                base.network, lagged.network, prod_ranking, "product"
            ),
        ]

    if write:
        sections = load_hs_sections()
        for result in lag_results:
            _stage(
                f"report_lag_{result.spec.delta_t}",
                _write_lag_outputs,
                out_dir, manifest, cfg, result, sections, reports,
            )
            manifest.complete(f"report_lag_{result.spec.delta_t}")
        if reports:
            rank_dir = out_dir / "rankings"
            rank_dir.mkdir(exist_ok=True)
            for name, ranking in (
                ("technology", tech_ranking), ("product", prod_ranking)
            ):
                path = rank_dir / f"{name}_ranks.csv"
                exports.write_ranking_csv(ranking, path)
                manifest.add_output(path, out_dir)
            if curves:
                curve_dir = out_dir / "curves"
                curve_dir.mkdir(exist_ok=True)
                for curve in curves:
                    path = curve_dir / f"{curve.side}_curve.csv"
                    exports.write_curve_csv(curve, path)
                    manifest.add_output(path, out_dir)
            manifest.complete("report")

    return PipelineResult(
        config=cfg,
        lag_results=tuple(lag_results),
        tech_ranking=tech_ranking,
        product_ranking=prod_ranking,
        tech_fit=tech_fit,
        product_fit=prod_fit,
        curves=tuple(curves),
    )


@dataclass(frozen=True)
class RobustnessRow:
    delta: int
    end_year: int
    t1: int
    t2: int
    edges_at_tier: int
    overlap_at_tier: float
    edges_at_lax: int
    overlap_at_lax: float
    outside_benchmark_span: bool


@dataclass(frozen=True)
class RobustnessReport:
    """Benchmark-edge recovery across alternative window configurations."""

    benchmark_tier: str
    lax_tier: str
    benchmark_edges: int
    delta_t: int
    rows: tuple[RobustnessRow, ...]

    @property
    def configurations(self) -> int:
        return len(self.rows)

    def mean_overlaps(self) -> dict[int, dict[str, float]]:
        by_delta: dict[int, list[RobustnessRow]] = {}
        for row in self.rows:
            by_delta.setdefault(row.delta, []).append(row)
        return {
            delta: {
                "tier": sum(r.overlap_at_tier for r in rows) / len(rows),
                "lax": sum(r.overlap_at_lax for r in rows) / len(rows),
            }
            for delta, rows in sorted(by_delta.items())
        }

    def to_dict(self) -> dict:
        return {
            "benchmark_tier": self.benchmark_tier,
            "lax_tier": self.lax_tier,
            "benchmark_edges": self.benchmark_edges,
            "delta_t": self.delta_t,
            "configurations": self.configurations,
            "rows": [
                {
                    "delta": r.delta,
                    "end_year": r.end_year,
                    "t1": r.t1,
                    "t2": r.t2,
                    "edges_at_tier": r.edges_at_tier,
                    "overlap_at_tier": r.overlap_at_tier,
                    "edges_at_lax": r.edges_at_lax,
                    "overlap_at_lax": r.overlap_at_lax,
                    "outside_benchmark_span": r.outside_benchmark_span,
                }
                for r in self.rows
            ],
            "mean_overlaps": {
                str(d): v for d, v in self.mean_overlaps().items()
            },
        }


def enumerate_windows(
    tech_panel: ActivityPanel,
    prod_panel: ActivityPanel,
    delta: int,
    delta_t: int,
) -> list[tuple[int, int]]:
    """All (t1, t2) with both delta-year windows inside their panels."""
    tech_years = set(tech_panel.years)
    prod_years = set(prod_panel.years)
    pairs = []
    for t2 in sorted(prod_years):
        t1 = t2 - delta_t
        if set(range(t2 - delta + 1, t2 + 1)) <= prod_years and set(
            range(t1 - delta + 1, t1 + 1)
        ) <= tech_years:
            pairs.append((t1, t2))
    return pairs


def run_robustness(
    cfg: RunConfig,
    benchmark: ValidatedNetwork,
    deltas: Sequence[int] = (3, 4, 10),
    write: bool = True,
) -> RobustnessReport:
    """Rerun the single-pair pipeline over alternative windows and report the
    fraction of benchmark edges each configuration recovers.

    Every window length in ``deltas`` is tried at every end-year it fits, at
    the benchmark's tier and at the laxer 90% tier. Windows reaching outside
    the span covered by the benchmark's own product windows are flagged.
    """
    if benchmark.edge_count == 0:
        raise ConfigError("benchmark network has no edges to recover")
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cache = ArtifactCache(out_dir / "cache")
    tech_panel, prod_panel = _stage("ingest", load_panels, cfg)
    if (
        benchmark.tech_ids != tech_panel.activity_ids
        or benchmark.product_ids != prod_panel.activity_ids
    ):
        raise ConfigError("benchmark axes do not match the configured panels")
    delta_t = benchmark.lag if benchmark.lag is not None else cfg.lags[0].delta_t
    bench_t2 = [t2 for _, t2 in benchmark.pairs if t2 is not None]
    span = (
        (min(bench_t2) - cfg.delta + 1, max(bench_t2)) if bench_t2 else None
    )
    benchmark_edges = benchmark.edge_set()
    tier = benchmark.tier

    rows = []
    for delta in deltas:
        for t1, t2 in enumerate_windows(tech_panel, prod_panel, delta, delta_t):
            run_cfg = cfg.replace(delta=delta)
            validation = _stage(
                f"robustness_d{delta}_{t2}",
                validate_pair,
                run_cfg, tech_panel, prod_panel, (t1, t2), (1, delta, t2), cache,
            )
            edges_tier = intersect_pairs([validation], tier).edge_set()
            edges_lax = intersect_pairs([validation], LAX_TIER).edge_set()
            outside = span is not None and not (
                span[0] <= t2 - delta + 1 and t2 <= span[1]
            )
            rows.append(
                RobustnessRow(
                    delta=delta,
                    end_year=t2,
                    t1=t1,
                    t2=t2,
                    edges_at_tier=len(edges_tier),
                    overlap_at_tier=len(edges_tier & benchmark_edges) / len(benchmark_edges),
                    edges_at_lax=len(edges_lax),
                    overlap_at_lax=len(edges_lax & benchmark_edges) / len(benchmark_edges),
                    outside_benchmark_span=outside,
                )
            )
            logger.info(
                "robustness delta=%d end=%d: overlap %.3f at %s",
                delta, t2, rows[-1].overlap_at_tier, tier,
            )
    report = RobustnessReport(
        benchmark_tier=tier,
        lax_tier=LAX_TIER,
        benchmark_edges=len(benchmark_edges),
        delta_t=delta_t,
        rows=tuple(rows),
    )
    if write:
        rob_dir = out_dir / "robustness"
        rob_dir.mkdir(exist_ok=True)
        exports.write_json(report.to_dict(), rob_dir / "report.json")
    return report
