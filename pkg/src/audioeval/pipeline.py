"""End-to-end orchestration: load, filter, shard, run engines, score, report."""

from __future__ import annotations

import logging
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .client import send_request
from .config import EndpointSpec, FilterSpec, RunConfig, TaskSpec, config_fingerprint
from .dataset import SampleRecord, apply_filters, load_manifest, render_turn, shard_dataset
from .engine import EngineRun, RawPrediction, run_engine
from .errors import Exhausted, MetricError, SchemaError, TransportError
from .metrics.efficiency import EfficiencyRecord, rtf, samples_per_second, scenario_runtimes
from .metrics.judge import TEMPLATE_VERSION, Judge
from .metrics.registry import METRICS, reported_name, score_text_metric
from .report import MetricValue, RunReport, SampleResult, aggregate_all
from .scheduler import PermitPool

log = logging.getLogger(__name__)


@dataclass
class TaskRun:
    task: TaskSpec
    samples: list[SampleRecord]
    engines: list[EngineRun] = field(default_factory=list)
    predictions: list[RawPrediction] = field(default_factory=list)

    @property
    def wall_s(self) -> float:
        ran = [e for e in self.engines if e.started_at is not None and e.finished_at is not None]
        if not ran:
            return 0.0
        return max(e.finished_at for e in ran) - min(e.started_at for e in ran)


def model_groups(endpoints) -> dict[str, list[EndpointSpec]]:
    """Endpoints sharing a model_id are replicas of one model."""
    groups: dict[str, list[EndpointSpec]] = {}
    for ep in endpoints:
        groups.setdefault(ep.model_id, []).append(ep)
    return groups


def plan_engines(task: TaskSpec, samples, endpoints) -> list[EngineRun]:
    """Shard per model across its replicas; shards with identical samples share an engine."""
    by_samples: dict[tuple, tuple] = {}
    for replicas in model_groups(endpoints).values():
        for shard in shard_dataset(samples, replicas):
            if not shard.samples:
                continue
            key = tuple(s.sample_id for s in shard.samples)
            if key in by_samples:
                first, models = by_samples[key]
                by_samples[key] = (first, models + [shard.endpoint_name])
            else:
                by_samples[key] = (shard, [shard.endpoint_name])
    lookup = {ep.name: ep for ep in endpoints}
    return [
        EngineRun(task, shard, tuple(lookup[n] for n in names))
        for shard, names in by_samples.values()
    ]


def check_reference_kinds(task: TaskSpec, kinds, where: str = "") -> None:
    for metric in task.metric_names:
        allowed = METRICS[metric].reference_kinds
        bad = sorted(set(kinds) - allowed)
        if bad:
            raise SchemaError(
                f"metric {metric} needs reference kind in {sorted(allowed)}, found {bad[0]!r}",
                where or f"task {task.task_name}",
            )


def prepare_tasks(cfg: RunConfig, categories=None) -> list[TaskRun]:
    runs = []
    for task in cfg.tasks:
        if categories and task.category not in categories:
            continue
        samples = load_manifest(task.dataset_path)
        samples = apply_filters(samples, cfg.filters.get(task.task_name, FilterSpec()), cfg.seed)
        check_reference_kinds(task, {s.reference.kind for s in samples})
        run = TaskRun(task, samples)
        if samples:
            run.engines = plan_engines(task, samples, cfg.endpoints)
        runs.append(run)
    return runs


def run_inference(cfg: RunConfig, task_runs, sender=send_request, progress=None) -> None:
    """Run every engine of every task concurrently under one shared permit pool."""
    pool = PermitPool(cfg.global_permit_limit, name="global")
    endpoint_pools = {ep.name: PermitPool(ep.capacity, name=f"endpoint:{ep.name}") for ep in cfg.endpoints}
    lock = threading.Lock()

    def drive(task_run: TaskRun, engine: EngineRun) -> None:
        preds = run_engine(engine, pool, endpoint_pools=endpoint_pools, stagger_ms=cfg.stagger_ms,
                           sender=sender)
        with lock:
            task_run.predictions.extend(preds)
        if progress is not None:
            errored = sum(1 for p in preds if p.error)
            progress(f"[{task_run.task.task_name}] engine {engine.shard.endpoint_name}: "
                     f"{len(preds)} predictions, {errored} errored, "
                     f"{engine.finished_at - engine.started_at:.2f}s")

    jobs = [(tr, e) for tr in task_runs for e in tr.engines]
    if not jobs:
        return
    with ThreadPoolExecutor(max_workers=len(jobs), thread_name_prefix="engine") as ex:
        for f in [ex.submit(drive, tr, e) for tr, e in jobs]:
            f.result()
    for tr in task_runs:
        tr.predictions.sort(key=lambda p: (p.sample_id, p.model_name, p.endpoint_name))


def _question(sample: SampleRecord, task: TaskSpec) -> str:
    texts = []
    for k, turn in enumerate(sample.user_turns):
        try:
            texts.append(render_turn(task.prompt_template, sample, turn, k))
        except Exception:
            texts.append(turn.text or "")
    return "\n".join(t for t in texts if t)


def build_results(task_runs) -> list[SampleResult]:
    out = []
    for tr in task_runs:
        by_id = {s.sample_id: s for s in tr.samples}
        for p in tr.predictions:
            s = by_id[p.sample_id]
            out.append(SampleResult(
                sample_id=p.sample_id,
                model_name=p.model_name,
                task_name=tr.task.task_name,
                category=tr.task.category,
                latency_s=p.latency_s,
                audio_duration_s=p.audio_duration_s,
                error=p.error,
                endpoint_name=p.endpoint_name,
                attempts=p.attempts,
                turn_outputs=list(p.turn_outputs),
                reference_kind=s.reference.kind,
                reference=s.reference.value,
                question=_question(s, tr.task),
            ))
    return out


def score_results(cfg: RunConfig, results: list[SampleResult], sender=send_request) -> None:
    """Fill metric values in place. Errored predictions get no metric values."""
    judges = {t.task_name: Judge(t.judge, sender) for t in cfg.tasks if t.judge is not None}
    reported = {
        t.task_name: [(m, reported_name(m, t.judge.judge_mode if t.judge else None)) for m in t.metric_names]
        for t in cfg.tasks
    }
    judge_jobs = []
    for r in results:
        task = cfg.task(r.task_name)
        r.metric_values, r.metric_errors = [], {}
        names = reported[r.task_name]
        if r.error:
            r.metric_errors = {rep: "prediction failed" for _, rep in names}
            continue
        hypothesis = r.turn_outputs[-1] if r.turn_outputs else ""
        for metric, rep in names:
            mdef = METRICS[metric]
            if mdef.judge_mode:
                mode = task.judge.judge_mode if mdef.judge_mode == "task" else mdef.judge_mode
                judge_jobs.append((r, rep, mode, judges[task.task_name], hypothesis))
                continue
            try:
                value = score_text_metric(metric, r.reference_kind, r.reference, hypothesis)
                r.metric_values.append(MetricValue(rep, value, mdef.scale))
            except MetricError as exc:
                r.metric_errors[rep] = f"{type(exc).__name__}: {exc}"

    def judge_one(job):
        r, rep, mode, judge, hypothesis = job
        try:
            return job, judge.score(r.question, r.reference, hypothesis, mode), None
        except (MetricError, TransportError, Exhausted) as exc:
            err = exc.last_error if isinstance(exc, Exhausted) else exc
            return job, None, f"{type(err).__name__}: {err}"

    if judge_jobs:
        width = max(j.spec.judge_concurrency for j in judges.values())
        with ThreadPoolExecutor(max_workers=min(len(judge_jobs), width * max(1, len(judges)))) as ex:
            done = list(ex.map(judge_one, judge_jobs))
        for (r, rep, mode, _, _), value, err in done:
            if err is None:
                r.metric_values.append(MetricValue(rep, value, "percent"))
            else:
                r.metric_errors[rep] = err
    for r in results:
        order = [rep for _, rep in reported[r.task_name]]
        r.metric_values.sort(key=lambda m: order.index(m.metric_name))


def efficiency_table(task_runs) -> dict[str, dict]:
    table = {}
    for tr in task_runs:
        starts = {}
        for e in tr.engines:
            if e.started_at is None:
                continue
            for m in e.models:
                starts[m.model_id] = min(starts.get(m.model_id, e.started_at), e.started_at)
        by_model: dict[str, list[RawPrediction]] = {}
        for p in tr.predictions:
            by_model.setdefault(p.model_name, []).append(p)
        for model, preds in sorted(by_model.items()):
            ok = [p for p in preds if not p.error]
            wall = max(p.finished_at for p in preds) - starts[model]
            rec = EfficiencyRecord(sum(p.audio_duration_s for p in ok), wall, len(ok))
            entry = {"total_audio_s": rec.total_audio_s, "wall_clock_s": rec.wall_clock_s,
                     "samples_processed": rec.samples_processed, "rtf": None,
                     "samples_per_second": None}
            if rec.total_audio_s > 0:
                entry["rtf"] = rtf(rec)
            if rec.wall_clock_s > 0:
                entry["samples_per_second"] = samples_per_second(rec)
            table[f"{tr.task.task_name}/{model}"] = entry
    return table


def finalize(cfg: RunConfig, results, task_walls=None, efficiency=None) -> RunReport:
    walls = dict(sorted((task_walls or {}).items()))
    return RunReport(
        per_sample=sorted(results, key=SampleResult.sort_key),
        aggregates=aggregate_all(results, cfg.aggregations),
        efficiency=efficiency or {},
        scenario=scenario_runtimes(walls.values()) if walls else None,
        task_walls=walls,
        config_fingerprint=config_fingerprint(cfg),
        seed=cfg.seed,
        judge_template_version=TEMPLATE_VERSION,
    )


def run_evaluation(cfg: RunConfig, categories=None, sender=send_request, progress=None):
    """Full pipeline. Returns (report, task_runs)."""
    task_runs = prepare_tasks(cfg, categories)
    t0 = time.monotonic()
    run_inference(cfg, task_runs, sender, progress)
    log.info("inference finished in %.2fs", time.monotonic() - t0)
    results = build_results(task_runs)
    score_results(cfg, results, sender)
    walls = {tr.task.task_name: tr.wall_s for tr in task_runs if tr.engines}
    report = finalize(cfg, results, walls, efficiency_table(task_runs))
    return report, task_runs
