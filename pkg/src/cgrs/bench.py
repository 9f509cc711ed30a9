"""Experiment runner: paired GRS / CGRS evaluation over synthesized groups."""
from __future__ import annotations

import csv
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .conformal import candidate_pool, recommend_cgrs, recommend_grs
from .corpus import FORMATS, Dataset, load_dataset
from .errors import ConfigError, DegenerateProfileError, NoHomogeneousGroupError, RunFailure, UndefinedMetricError
from .grouping import (
    PROFILE_STRATEGIES,
    SAMPLERS,
    Group,
    HomogeneousSampler,
    build_virtual_profile,
    form_random_group,
    format_manifest_line,
    is_homogeneous,
)
from .metrics import MetricReport, evaluate
from .stats import StatIndex, build_index

log = logging.getLogger(__name__)

SETTINGS = ("homogeneous", "random")
SYSTEMS = ("GRS", "CGRS")


def _as_tuple(value, cast) -> tuple:
    if isinstance(value, str):
        value = value.strip()
        if "-" in value and "," not in value and value.count("-") == 1 and not value.startswith("-"):
            lo, hi = value.split("-")
            return tuple(cast(v) for v in range(int(lo), int(hi) + 1))
        return tuple(cast(v) for v in value.split(",") if v.strip())
    if isinstance(value, (int, float)):
        return (cast(value),)
    return tuple(cast(v) for v in value)


@dataclass
class ExperimentConfig:
    dataset: str = ""
    format: str = "tab_data"
    dataset_name: str = ""
    setting: str = "homogeneous"
    group_sizes: tuple[int, ...] = (2, 3, 4, 5, 6)
    n_instances: int = 500
    epsilons: tuple[float, ...] = (0.01, 0.05, 0.1, 0.2)
    tau: float = 0.1
    train_fraction: float = 0.6
    calib_fraction: float = 0.25
    min_profile: int = 20
    topk: tuple[int, ...] = tuple(range(1, 21))
    seed: int = 0
    model: str = "am"
    profile_strategy: str = "hybrid"
    sampler: str = "auto"
    max_attempts: int = 10_000
    jobs: int = 1

    _TUPLES = {"group_sizes": int, "epsilons": float, "topk": int}

    def __post_init__(self):
        for name, cast in self._TUPLES.items():
            setattr(self, name, _as_tuple(getattr(self, name), cast))
        for f in fields(self):
            if f.name in self._TUPLES:
                continue
            val = getattr(self, f.name)
            if isinstance(val, str) and f.type in ("int", "float"):
                try:
                    setattr(self, f.name, int(val) if f.type == "int" else float(val))
                except ValueError:
                    raise ConfigError(f"{f.name}: cannot parse {val!r}") from None
        if not self.dataset_name and self.dataset:
            path = Path(self.dataset)
            self.dataset_name = path.parent.name if path.stem in ("u", "ratings", "profiles") else path.stem
        self.validate()

    def validate(self) -> None:
        if self.format not in FORMATS + ("profiles",):
            raise ConfigError(f"unknown format {self.format!r}")
        if self.setting not in SETTINGS:
            raise ConfigError(f"setting must be one of {SETTINGS}")
        if self.model not in ("am", "pm"):
            raise ConfigError("model must be 'am' or 'pm'")
        if self.profile_strategy not in PROFILE_STRATEGIES:
            raise ConfigError(f"profile_strategy must be one of {PROFILE_STRATEGIES}")
        if self.sampler not in SAMPLERS:
            raise ConfigError(f"sampler must be one of {SAMPLERS}")
        for name in ("train_fraction", "calib_fraction"):
            if not 0.0 < getattr(self, name) < 1.0:
                raise ConfigError(f"{name} must lie in (0, 1)")
        if self.n_instances < 1:
            raise ConfigError("n_instances must be at least 1")
        if any(not 0.0 <= e <= 1.0 for e in self.epsilons):
            raise ConfigError("epsilon values must lie in [0, 1]")
        if any(g < 2 for g in self.group_sizes) or not self.group_sizes:
            raise ConfigError("group sizes must be at least 2")
        if any(k < 1 for k in self.topk):
            raise ConfigError("top-K values must be at least 1")

    @classmethod
    def from_file(cls, path: str | Path, **overrides) -> "ExperimentConfig":
        """Read a flat ``key = value`` file; ``overrides`` (e.g. CLI flags) win."""
        values: dict[str, Any] = {}
        known = {f.name for f in fields(cls)}
        for line_no, line in enumerate(Path(path).read_text().splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{line_no}: expected key = value")
            key, val = (s.strip() for s in line.split("=", 1))
            if key not in known:
                raise ConfigError(f"{path}:{line_no}: unknown key {key!r}")
            values[key] = val
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)

    def to_dict(self) -> dict:
        return {f.name: (list(v) if isinstance(v := getattr(self, f.name), tuple) else v) for f in fields(self)}

    def dumps(self) -> str:
        out = []
        for k, v in self.to_dict().items():
            out.append(f"{k} = {','.join(map(str, v)) if isinstance(v, list) else v}")
        return "\n".join(out) + "\n"


def instance_seed(global_seed: int, group_size: int, instance: int) -> int:
    return int(np.random.SeedSequence([global_seed, group_size, instance]).generate_state(1)[0])


@dataclass
class InstanceResult:
    group_size: int
    instance: int
    seed: int
    members: tuple[int, ...] = ()
    homogeneous: bool = False
    reports: dict[str, MetricReport] = field(default_factory=dict)
    validity: list[tuple[float, float, int]] = field(default_factory=list)
    skip_reason: str = ""


@dataclass
class RunArtifact:
    config: dict
    results: list[InstanceResult]
    timings: dict[str, float] = field(default_factory=dict)

    def evaluated(self, group_size: int) -> list[InstanceResult]:
        return [r for r in self.results if r.group_size == group_size and not r.skip_reason]

    def skip_count(self, group_size: int) -> int:
        return sum(1 for r in self.results if r.group_size == group_size and r.skip_reason)

    def to_json(self) -> str:
        def enc(r: InstanceResult):
            d = asdict(r)
            d["members"] = list(r.members)
            return d

        return json.dumps({"config": self.config, "timings": self.timings,
                           "results": [enc(r) for r in self.results]}, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "RunArtifact":
        raw = json.loads(text)
        results = []
        for d in raw["results"]:
            reports = {}
            for system, rep in d["reports"].items():
                reports[system] = MetricReport(
                    precision_at={int(k): v for k, v in rep["precision_at"].items()},
                    recall_at={int(k): v for k, v in rep["recall_at"].items()},
                    f1_at={int(k): v for k, v in rep["f1_at"].items()},
                    ndcg=rep["ndcg"], rr=rep["rr"], ap=rep["ap"], auc=rep["auc"],
                )
            results.append(InstanceResult(
                d["group_size"], d["instance"], d["seed"], tuple(d["members"]), d["homogeneous"],
                reports, [tuple(v) for v in d["validity"]], d["skip_reason"],
            ))
        return cls(raw["config"], results, raw.get("timings", {}))


def ground_truth(dataset: Dataset, group: Group, pool) -> set[int]:
    """Union of members' test items that are still candidates."""
    pool = set(np.asarray(pool).tolist())
    return {i for m in group.members for i in dataset.profiles[m].test_items if i in pool}


def evaluate_group(cfg: ExperimentConfig, dataset: Dataset, index: StatIndex, group: Group, seed: int,
                   result: InstanceResult) -> InstanceResult:
    """Build the virtual profile, run both systems and score them.  Fills ``result`` in place."""
    result.members = group.members
    result.homogeneous = is_homogeneous(group)
    split_rng = np.random.default_rng([seed, 1])
    try:
        virtual = build_virtual_profile(index, group, cfg.tau, cfg.calib_fraction, split_rng,
                                        cfg.profile_strategy, cfg.model)
        pool = candidate_pool(index, group)
        truth = ground_truth(dataset, group, pool)
        grs = recommend_grs(index, virtual, pool, cfg.model)
        cgrs = recommend_cgrs(index, virtual, pool, max(cfg.epsilons, default=0.0), cfg.model)
        ks = [k for k in cfg.topk]
        result.reports = {"GRS": evaluate(grs, truth, ks), "CGRS": evaluate(cgrs.ranking, truth, ks)}
    except (DegenerateProfileError, UndefinedMetricError) as exc:
        result.skip_reason = f"{type(exc).__name__}: {exc}"
        return result
    truth_arr = np.fromiter(truth, dtype=np.int64)
    pv = cgrs.candidate_pvalues
    truth_p = np.array([pv[t] for t in sorted(truth_arr.tolist())])
    for eps in cfg.epsilons:
        result.validity.append((eps, float(np.mean(truth_p <= eps)), int(np.sum(cgrs.pvalues > eps))))
    return result


def run_instance(cfg: ExperimentConfig, dataset: Dataset, index: StatIndex, sampler: HomogeneousSampler | None,
                 group_size: int, instance: int) -> InstanceResult:
    seed = instance_seed(cfg.seed, group_size, instance)
    result = InstanceResult(group_size, instance, seed)
    group_rng = np.random.default_rng([seed, 0])
    try:
        if cfg.setting == "homogeneous":
            group = sampler.sample(group_size, group_rng, cfg.max_attempts, cfg.sampler)
        else:
            group = form_random_group(dataset, group_size, group_rng)
    except NoHomogeneousGroupError as exc:
        result.skip_reason = f"NoHomogeneousGroupError: {exc}"
        return result
    return evaluate_group(cfg, dataset, index, group, seed, result)


def replay_instance(cfg: ExperimentConfig, dataset: Dataset, index: StatIndex, seed: int,
                    members) -> InstanceResult:
    """Recompute one instance from a manifest line (seed + members)."""
    group = Group.of(dataset, members)
    return evaluate_group(cfg, dataset, index, group, seed, InstanceResult(group.size, -1, seed))


_WORKER: dict = {}


def _init_worker(cfg, dataset, index):
    _WORKER.update(cfg=cfg, dataset=dataset, index=index,
                   sampler=HomogeneousSampler(dataset) if cfg.setting == "homogeneous" else None)


def _work(task):
    w = _WORKER
    return run_instance(w["cfg"], w["dataset"], w["index"], w["sampler"], *task)


def run_experiment(cfg: ExperimentConfig, dataset: Dataset | None = None, index: StatIndex | None = None) -> RunArtifact:
    """Run ``n_instances`` paired GRS/CGRS evaluations per group size."""
    timings = {}
    t0 = time.perf_counter()
    if dataset is None:
        dataset = load_dataset(cfg.dataset, cfg.format, cfg.min_profile, cfg.train_fraction)
    timings["load_s"] = time.perf_counter() - t0
    if dataset.n_users == 0:
        raise RunFailure("dataset has no users after filtering")
    if max(cfg.group_sizes) > dataset.n_users:
        raise ConfigError(f"group size {max(cfg.group_sizes)} exceeds {dataset.n_users} users")
    t0 = time.perf_counter()
    if index is None:
        index = build_index(dataset, with_precedence=cfg.model == "pm")
    timings["index_s"] = time.perf_counter() - t0

    tasks = [(g, i) for g in cfg.group_sizes for i in range(cfg.n_instances)]
    t0 = time.perf_counter()
    if cfg.jobs > 1:
        with ProcessPoolExecutor(cfg.jobs, initializer=_init_worker, initargs=(cfg, dataset, index)) as pool:
            results = list(pool.map(_work, tasks, chunksize=8))
    else:
        sampler = HomogeneousSampler(dataset) if cfg.setting == "homogeneous" else None
        results = [run_instance(cfg, dataset, index, sampler, g, i) for g, i in tasks]
    timings["instances_s"] = time.perf_counter() - t0
    results.sort(key=lambda r: (r.group_size, r.instance))

    art = RunArtifact(cfg.to_dict(), results, timings)
    for g in cfg.group_sizes:
        log.info("group size %d: %d evaluated, %d skipped", g, len(art.evaluated(g)), art.skip_count(g))
    if not any(not r.skip_reason for r in results):
        raise RunFailure("no instance could be evaluated")
    return art


def _fmt(x: float) -> str:
    return f"{x:.5f}"


def _mean(values) -> float:
    values = list(values)
    return math.fsum(values) / len(values) if values else float("nan")


def summary_rows(art: RunArtifact) -> list[dict]:
    cfg = art.config
    rows = []
    for g in cfg["group_sizes"]:
        done = art.evaluated(g)
        total = len(done) + art.skip_count(g)
        for system in SYSTEMS:
            reps = [r.reports[system] for r in done]
            rows.append(dict(
                dataset=cfg["dataset_name"], setting=cfg["setting"], group_size=g, system=system,
                ap=_mean(r.ap for r in reps), rr=_mean(r.rr for r in reps),
                auc=_mean(r.auc for r in reps), ndcg=_mean(r.ndcg for r in reps),
                skip_rate=art.skip_count(g) / total if total else 0.0, n_eval=len(done),
            ))
    return rows


def emit_reports(art: RunArtifact, out_dir: str | Path) -> list[Path]:
    """Write summary.csv, topk.csv, validity.csv, manifest.txt and artifact.json."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = art.config
    written = []

    path = out / "summary.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["dataset", "setting", "group_size", "system", "ap", "rr", "auc", "ndcg", "skip_rate", "n_eval"])
        for r in summary_rows(art):
            w.writerow([r["dataset"], r["setting"], r["group_size"], r["system"], _fmt(r["ap"]), _fmt(r["rr"]),
                        _fmt(r["auc"]), _fmt(r["ndcg"]), _fmt(r["skip_rate"]), r["n_eval"]])
    written.append(path)

    path = out / "topk.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["dataset", "setting", "group_size", "system", "k", "precision", "recall", "f1"])
        for g in cfg["group_sizes"]:
            done = art.evaluated(g)
            for system in SYSTEMS:
                reps = [r.reports[system] for r in done]
                for k in cfg["topk"]:
                    w.writerow([cfg["dataset_name"], cfg["setting"], g, system, k,
                                _fmt(_mean(r.precision_at[k] for r in reps)),
                                _fmt(_mean(r.recall_at[k] for r in reps)),
                                _fmt(_mean(r.f1_at[k] for r in reps))])
    written.append(path)

    path = out / "validity.csv"
    done = [r for r in art.results if not r.skip_reason]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epsilon", "empirical_error", "region_size_mean"])
        for j, eps in enumerate(cfg["epsilons"]):
            w.writerow([_fmt(eps), _fmt(_mean(r.validity[j][1] for r in done)),
                        _fmt(_mean(r.validity[j][2] for r in done))])
    written.append(path)

    path = out / "manifest.txt"
    lines = [f"# {line}" for line in ExperimentConfig(**cfg).dumps().splitlines()]
    lines.append("# columns: seed<TAB>members<TAB>homogeneous")
    for r in art.results:
        if r.members:
            lines.append(format_manifest_line(r.seed, r.members, r.homogeneous))
    path.write_text("\n".join(lines) + "\n")
    written.append(path)

    path = out / "artifact.json"
    path.write_text(art.to_json())
    written.append(path)
    return written


def load_artifact(path: str | Path) -> RunArtifact:
    path = Path(path)
    if path.is_dir():
        path = path / "artifact.json"
    return RunArtifact.from_json(path.read_text())


def config_from_manifest(path: str | Path) -> ExperimentConfig:
    """Recover the config echoed in a manifest's comment header."""
    body = []
    for line in Path(path).read_text().splitlines():
        if line.startswith("# ") and " = " in line:
            body.append(line[2:])
    values = dict(l.split(" = ", 1) for l in body)
    return ExperimentConfig(**values)
