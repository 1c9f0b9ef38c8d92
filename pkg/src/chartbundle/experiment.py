"""Multi-seed experiment orchestration and report emission.

A run samples a manifold, builds the configured cover, decomposes overlaps,
trains the atlas with retries, computes the full diagnostic suite, the sign
cocycle, and the gated orientability verdict, once per seed. Seeds are
isolated: one failing seed is recorded and the others still emit.
"""

from __future__ import annotations

import dataclasses
import json
import os
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import bundle, cohomology, cover as cover_mod, geometry
from .cohomology import Gates, SignCocycle, Verdict
from .train import TrainConfig, train_atlas

GROUND_TRUTH_ORIENTABLE = {
    "sphere": True,
    "mobius": False,
    "klein": False,
    "rp2_patches": False,
}


@dataclass
class CoverSpec:
    method: str  # tetrahedral | slab | landmark
    eps: float = 0.3  # tetrahedral margin
    axis: int = 1  # slab coordinate
    lo: float = -0.3
    hi: float = 0.3
    n_charts: int = 8  # landmark parameters
    k: int = 100
    percentile: float = 0.20


@dataclass
class OverlapSpec:
    eps_cluster: float = 0.5
    min_size: int = 10


@dataclass
class ExperimentConfig:
    manifold: str
    cover: CoverSpec
    train: TrainConfig = field(default_factory=TrainConfig)
    overlap: OverlapSpec = field(default_factory=OverlapSpec)
    seeds: list[int] = field(default_factory=lambda: [42, 43, 44, 45, 46])
    gates: Gates = field(default_factory=Gates)
    consistency: float = 0.95
    output_dir: str = "results"
    n_points: int = 1000
    klein_m: float = 4.0
    n_angles: int = 75  # rp2_patches grid
    n_offsets: int = 75
    blur: float = 0.5

    def __post_init__(self) -> None:
        if self.manifold not in GROUND_TRUTH_ORIENTABLE:
            raise ValueError(f"unknown manifold {self.manifold!r}")
        if not self.seeds:
            raise ValueError("need at least one seed")


def config_to_dict(cfg: ExperimentConfig) -> dict:
    d = dataclasses.asdict(cfg)
    d["train"]["hidden_dims"] = list(d["train"]["hidden_dims"])
    return d


def config_from_dict(obj: dict) -> ExperimentConfig:
    obj = dict(obj)
    cov = CoverSpec(**obj.pop("cover"))
    tr = obj.pop("train", {})
    tr["hidden_dims"] = tuple(tr.get("hidden_dims", (32, 16)))
    train = TrainConfig(**tr)
    overlap = OverlapSpec(**obj.pop("overlap", {}))
    gates = Gates(**obj.pop("gates", {}))
    return ExperimentConfig(
        cover=cov, train=train, overlap=overlap, gates=gates, **obj
    )


def load_config(path: str) -> ExperimentConfig:
    with open(path) as f:
        return config_from_dict(json.load(f))


@dataclass
class SeedResult:
    seed: int
    error: str | None = None
    train_converged: bool = False
    retry_count: int = 0
    nerve: tuple[int, int, int, bool] | None = None
    degenerate_pairs: list[tuple[int, int]] = field(default_factory=list)
    diagnostics: bundle.DiagnosticsReport | None = None
    cocycle: SignCocycle | None = None
    cocycle_check: float = 0.0
    verdict: Verdict | None = None
    gates_passed: bool = False
    correct: bool | None = None  # vs ground truth, None when inconclusive
    runtime: float = 0.0
    artifacts: dict = field(default_factory=dict)  # filename -> text content


@dataclass
class RunReport:
    config: ExperimentConfig
    results: list[SeedResult]
    aggregate: dict


def _sample(cfg: ExperimentConfig, seed: int) -> geometry.PointCloud:
    if cfg.manifold == "sphere":
        return geometry.sample_sphere(cfg.n_points, seed)
    if cfg.manifold == "mobius":
        return geometry.sample_mobius(cfg.n_points, seed)
    if cfg.manifold == "klein":
        return geometry.sample_klein(cfg.n_points, cfg.klein_m, seed)
    return geometry.sample_line_patches(cfg.n_angles, cfg.n_offsets, cfg.blur)


def _build_cover(cfg: ExperimentConfig, cloud, seed: int) -> cover_mod.Cover:
    c = cfg.cover
    if c.method == "tetrahedral":
        return cover_mod.tetrahedral_cover(cloud, c.eps)
    if c.method == "slab":
        return cover_mod.slab_cover(cloud, c.axis, c.lo, c.hi)
    if c.method == "landmark":
        return cover_mod.landmark_cover(cloud, c.n_charts, c.k, c.percentile, seed)
    raise ValueError(f"unknown cover method {c.method!r}")


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _csv_lines(header: list[str], rows: list[list]) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(
            ",".join(_fmt(v) if isinstance(v, float) else str(v) for v in row)
        )
    return "\n".join(lines) + "\n"


def _seed_artifacts(atlas, cloud, components, samples, log, seed: int) -> dict:
    """Latent embeddings per chart and transition source/image pairs per
    overlap component, as CSV text; plus the serialized atlas, per-point
    transition samples, and the training log."""
    from .net import forward
    from .train import training_log_to_csv, training_log_to_json

    files = {
        f"training_log_seed{seed}.csv": training_log_to_csv(log),
        f"training_summary_seed{seed}.json": training_log_to_json(log),
        f"transition_samples_seed{seed}.csv": bundle.samples_to_csv(samples),
    }
    for i, chart in enumerate(atlas.charts):
        idx = atlas.cover.charts[i]
        z = forward(chart.encoder, cloud.points[idx])
        rows = [[int(p), *map(float, zrow)] for p, zrow in zip(idx, z)]
        header = ["point_index"] + [f"z{a}" for a in range(atlas.latent_dim)]
        files[f"latent_seed{seed}_chart{i}.csv"] = _csv_lines(header, rows)
    for comp in components:
        i, j = comp.pair
        pts = cloud.points[comp.point_indices]
        src = forward(atlas.charts[i].encoder, pts)
        img = bundle.transition_map(atlas, i, j, src)
        by_point = {
            s.point_index: s
            for s in samples
            if s.pair == comp.pair and s.component_id == comp.component_id
        }
        rows = []
        for p, s_row, t_row in zip(comp.point_indices, src, img):
            samp = by_point[int(p)]
            rows.append(
                [int(p), *map(float, s_row), *map(float, t_row),
                 float(samp.det), samp.sign]
            )
        header = (
            ["point_index"]
            + [f"src{a}" for a in range(atlas.latent_dim)]
            + [f"img{a}" for a in range(atlas.latent_dim)]
            + ["det", "sign"]
        )
        name = f"transitions_seed{seed}_pair{i}-{j}_comp{comp.component_id}.csv"
        files[name] = _csv_lines(header, rows)
    files[f"atlas_seed{seed}.json"] = bundle.atlas_to_json(atlas)
    return files


def run_seed(cfg: ExperimentConfig, seed: int) -> SeedResult:
    """One full pipeline pass; exceptions are captured in the result."""
    t0 = time.perf_counter()
    res = SeedResult(seed=seed)
    try:
        cloud = _sample(cfg, seed)
        cov = _build_cover(cfg, cloud, seed)
        res.nerve = cover_mod.nerve_stats(cov)
        decomp = cover_mod.decompose_overlaps(
            cloud, cov, cfg.overlap.eps_cluster, cfg.overlap.min_size
        )
        res.degenerate_pairs = decomp.degenerate_pairs
        triples = cover_mod.triple_overlaps(cov)

        train_cfg = dataclasses.replace(cfg.train, seed=seed)
        atlas, log = train_atlas(cloud, cov, train_cfg)
        res.train_converged = log.converged
        res.retry_count = log.retry_count

        samples = bundle.compute_transition_samples(atlas, cloud, decomp.components)
        res.diagnostics = bundle.diagnostics(atlas, cloud, samples, triples)
        res.cocycle = cohomology.compute_sign_cocycle(
            samples, cov.n_charts, cfg.consistency
        )
        res.cocycle_check = cohomology.verify_cocycle_condition(
            atlas, cloud, triples
        )
        res.verdict = cohomology.orientability_report(
            res.diagnostics, res.cocycle, res.cocycle_check, cfg.gates
        )
        res.gates_passed = res.verdict.verdict != "inconclusive"
        if res.gates_passed:
            want = GROUND_TRUTH_ORIENTABLE[cfg.manifold]
            res.correct = (res.verdict.verdict == "orientable") == want
        res.artifacts = _seed_artifacts(
            atlas, cloud, decomp.components, samples, log, seed
        )
    except Exception:
        res.error = traceback.format_exc()
    res.runtime = time.perf_counter() - t0
    return res


_METRICS = [
    ("recon_sup", lambda r: r.diagnostics.recon_sup),
    ("recon_mean", lambda r: r.diagnostics.recon_mean),
    ("diff_err_max", lambda r: r.diagnostics.diff_err_max),
    ("gap", lambda r: r.diagnostics.gap),
    ("cocycle_defect_mean", lambda r: r.diagnostics.cocycle_defect_mean),
    ("enc_sigma_min", lambda r: r.diagnostics.enc_sigma_min),
    ("cocycle_check", lambda r: r.cocycle_check),
]


def _aggregate(results: list[SeedResult]) -> dict:
    ok = [r for r in results if r.error is None and r.diagnostics is not None]
    passing = [r for r in ok if r.gates_passed]
    agg: dict = {
        "n_seeds": len(results),
        "n_errors": sum(1 for r in results if r.error is not None),
        "n_train_converged": sum(1 for r in ok if r.train_converged),
        "n_gates_passed": len(passing),
        "metrics": {},
    }
    for name, get in _METRICS:
        vals = [get(r) for r in passing if get(r) is not None]
        agg["metrics"][name] = {
            "mean": float(np.mean(vals)) if vals else None,
            "std": float(np.std(vals)) if vals else None,
            "n": len(vals),
        }
    n_correct = sum(1 for r in passing if r.correct)
    agg["accuracy_over_gated"] = n_correct / len(passing) if passing else None
    agg["verdicts"] = {
        str(r.seed): (r.verdict.verdict if r.verdict else "error") for r in results
    }
    return agg


def run_experiment(cfg: ExperimentConfig, jobs: int = 1) -> RunReport:
    if jobs > 1 and len(cfg.seeds) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run_seed, [cfg] * len(cfg.seeds), cfg.seeds))
    else:
        results = [run_seed(cfg, s) for s in cfg.seeds]
    return RunReport(config=cfg, results=results, aggregate=_aggregate(results))


def _verdict_dict(v: Verdict | None) -> dict | None:
    if v is None:
        return None
    cb = None
    if v.coboundary is not None:
        cb = {
            "is_coboundary": v.coboundary.is_coboundary,
            "assignment": v.coboundary.assignment,
            "witness_cycle": v.coboundary.witness_cycle,
            "witness_edges": v.coboundary.witness_edges,
            "components": v.coboundary.components,
        }
    return {
        "verdict": v.verdict,
        "reasons": v.reasons,
        "cocycle_check": v.cocycle_check,
        "coboundary": cb,
    }


def _result_dict(r: SeedResult) -> dict:
    return {
        "seed": r.seed,
        "error": r.error,
        "train_converged": r.train_converged,
        "retry_count": r.retry_count,
        "nerve": list(r.nerve) if r.nerve else None,
        "degenerate_pairs": [list(p) for p in r.degenerate_pairs],
        "diagnostics": r.diagnostics.to_dict() if r.diagnostics else None,
        "cocycle_edges": [
            {
                "pair": list(e.pair),
                "component_id": e.component_id,
                "sign": e.sign,
                "agreement": e.agreement,
                "n_points": e.n_points,
                "degenerate": e.degenerate,
            }
            for e in (r.cocycle.edges if r.cocycle else [])
        ],
        "cocycle_check": r.cocycle_check,
        "verdict": _verdict_dict(r.verdict),
        "gates_passed": r.gates_passed,
        "correct": r.correct,
    }


def emit_tables(report: RunReport, out_dir: str) -> list[str]:
    """Write report.json, the three CSV tables, and all per-seed artifacts.

    Everything except the "timing" key of report.json is a pure function of
    the config, so reruns are byte-identical up to that key.
    """
    os.makedirs(out_dir, exist_ok=True)
    written = []

    obj = {
        "config": config_to_dict(report.config),
        "aggregate": report.aggregate,
        "results": [_result_dict(r) for r in report.results],
        "timing": {
            "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S"),
            "seed_runtimes": {str(r.seed): r.runtime for r in report.results},
        },
    }
    path = os.path.join(out_dir, "report.json")
    with open(path, "w") as f:
        json.dump(obj, f, indent=1, sort_keys=True)
    written.append(path)

    rows = []
    for name, _ in _METRICS:
        m = report.aggregate["metrics"][name]
        rows.append(
            [name, m["mean"] if m["mean"] is not None else "",
             m["std"] if m["std"] is not None else ""]
        )
    path = os.path.join(out_dir, "metrics_summary.csv")
    with open(path, "w") as f:
        f.write(_csv_lines(["metric", "mean", "std"], rows))
    written.append(path)

    per_trial_header = [
        "seed", "train_converged", "retry_count", "gates_passed", "verdict",
        "recon_sup", "recon_mean", "diff_err_max", "gap",
        "cocycle_defect_mean", "enc_sigma_min", "cocycle_check", "correct",
    ]
    rows = []
    for r in report.results:
        if r.error is not None or r.diagnostics is None:
            rows.append([r.seed, "", "", "", "error"] + [""] * 8)
            continue
        d = r.diagnostics
        rows.append([
            r.seed, r.train_converged, r.retry_count, r.gates_passed,
            r.verdict.verdict if r.verdict else "",
            d.recon_sup, d.recon_mean, d.diff_err_max,
            d.gap if d.gap is not None else "",
            d.cocycle_defect_mean if d.cocycle_defect_mean is not None else "",
            d.enc_sigma_min, r.cocycle_check,
            "" if r.correct is None else r.correct,
        ])
    path = os.path.join(out_dir, "per_trial.csv")
    with open(path, "w") as f:
        f.write(_csv_lines(per_trial_header, rows))
    written.append(path)

    rows = []
    for r in report.results:
        for e in (r.cocycle.edges if r.cocycle else []):
            rows.append([
                r.seed, e.pair[0], e.pair[1], e.component_id, e.sign,
                e.agreement, e.n_points, e.degenerate,
            ])
    path = os.path.join(out_dir, "signs_per_component.csv")
    with open(path, "w") as f:
        f.write(_csv_lines(
            ["seed", "chart_i", "chart_j", "component_id", "sign",
             "agreement", "n_points", "degenerate"],
            rows,
        ))
    written.append(path)

    for r in report.results:
        for name, text in r.artifacts.items():
            path = os.path.join(out_dir, name)
            with open(path, "w") as f:
                f.write(text)
            written.append(path)
    return written
