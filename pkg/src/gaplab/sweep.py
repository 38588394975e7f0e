"""Alpha-target sweeps: train one model per (alpha_target, seed), evaluate it,
and tabulate the results.

Each run is fully independent (its own data, initialization, and batch order,
all derived from its seed), so runs may execute in parallel worker processes.
The GAPLAB_THREADS environment variable caps the worker count; 1 forces a
plain in-process loop. Output rows keep the input order regardless of
completion order: per-seed rows first, then one mean row per alpha block.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

from .evalkit import (
    SWEEP_FIELDS,
    SweepRecord,
    interchangeability_probe,
    joint_clustering_eval,
    recall_at_k,
)
from .geometry import gap_report
from .trainkit import (
    SynthConfig,
    TrainConfig,
    encode_pairs,
    synth_dataset,
    train,
    train_constant_alpha,
)

__all__ = [
    "run_single",
    "run_sweep",
    "mean_record",
    "sweep_to_csv",
    "SweepRunError",
    "worker_count",
]

CSV_HEADER = "seed," + ",".join(SWEEP_FIELDS)


class SweepRunError(RuntimeError):
    """One run failed; carries the rows completed before the failure."""

    def __init__(self, alpha: float, seed: int, cause: BaseException, rows: list):
        self.alpha = alpha
        self.seed = seed
        self.cause = cause
        self.rows = rows
        super().__init__(f"run (alpha_target={alpha}, seed={seed}) failed: {cause}")


def worker_count() -> int:
    """Sweep parallelism: GAPLAB_THREADS if set, else the logical CPU count."""
    raw = os.environ.get("GAPLAB_THREADS", "").strip()
    if raw:
        try:
            value = int(raw)
        except ValueError as exc:
            raise ValueError(f"GAPLAB_THREADS must be an integer, got {raw!r}") from exc
        if value < 1:
            raise ValueError(f"GAPLAB_THREADS must be >= 1, got {value}")
        return value
    return os.cpu_count() or 1


def run_single(train_cfg: TrainConfig, synth_cfg: SynthConfig, alpha_target: float,
               seed: int, scheduled: bool = True) -> SweepRecord:
    """Train one model and evaluate every sweep metric on its eval split.

    The seed overrides both the data seed and the training seed; alpha_target
    overrides the curriculum target. scheduled=False trains with alpha pinned
    at alpha_target from the first step (the curriculum ablation).
    """
    tc = replace(
        train_cfg,
        seed=seed,
        curriculum=replace(train_cfg.curriculum, alpha_target=alpha_target),
    )
    sc = replace(synth_cfg, seed=seed)
    if scheduled:
        (img_enc, txt_enc), _, _ = train(tc, sc)
    else:
        (img_enc, txt_enc), _, _ = train_constant_alpha(tc, sc, alpha_target)

    data = synth_dataset(sc)
    images, texts = encode_pairs(img_enc, txt_enc, data, data.eval_idx)
    report = gap_report(images, texts)
    cluster = joint_clustering_eval(images, texts, seed=seed)
    i2t, t2i = recall_at_k(images.vectors, texts.vectors, 1)
    probe = interchangeability_probe(texts, images)
    return SweepRecord(
        alpha_target=float(alpha_target),
        raw_gap=report.raw_gap,
        centroid_gap=report.centroid_gap,
        distribution_gap=report.distribution_gap,
        ari=cluster.ari,
        v_measure=cluster.v_measure,
        i2t_r1=i2t,
        t2i_r1=t2i,
        probe_accuracy=probe,
        erank_image=report.erank_image,
        erank_text=report.erank_text,
        fusion_index=report.fusion_index,
    )


def mean_record(records: list) -> SweepRecord:
    """Field-wise arithmetic mean of several records (one alpha block)."""
    if not records:
        raise ValueError("cannot average zero records")
    values = {
        name: sum(getattr(r, name) for r in records) / len(records)
        for name in SWEEP_FIELDS
    }
    return SweepRecord(**values)


def _worker(args):
    train_cfg, synth_cfg, alpha, seed, scheduled = args
    return run_single(train_cfg, synth_cfg, alpha, seed, scheduled)


def run_sweep(train_cfg: TrainConfig, synth_cfg: SynthConfig, alphas, seeds,
              scheduled: bool = True, max_workers: int | None = None) -> list:
    """All (alpha, seed) runs, as ordered rows of (seed_label, SweepRecord).

    Per alpha block: one row per seed (labels are the seed values as strings)
    followed by a "mean" row. A failing run raises SweepRunError carrying the
    rows that completed before it, so callers can persist a partial table.
    """
    alphas = [float(a) for a in alphas]
    seeds = [int(s) for s in seeds]
    if not alphas or not seeds:
        raise ValueError("need at least one alpha and one seed")
    for a in alphas:
        if not 0.0 <= a <= 1.0:
            raise ValueError(f"alpha_target must be in [0, 1], got {a}")
    if max_workers is None:
        max_workers = worker_count()
    max_workers = min(max_workers, len(alphas) * len(seeds))

    jobs = [(train_cfg, synth_cfg, a, s, scheduled) for a in alphas for s in seeds]
    rows: list = []

    def consume(results_iter):
        it = iter(results_iter)
        for a in alphas:
            block = []
            for s in seeds:
                try:
                    record = next(it)
                except Exception as exc:
                    raise SweepRunError(a, s, exc, rows) from exc
                block.append(record)
                rows.append((str(s), record))
            rows.append(("mean", mean_record(block)))
        return rows

    if max_workers <= 1:
        return consume(_worker(job) for job in jobs)
    with ProcessPoolExecutor(max_workers=max_workers) as pool:
        futures = [pool.submit(_worker, job) for job in jobs]

        def results():
            for f in futures:
                yield f.result()

        return consume(results())


def sweep_to_csv(rows, failure: tuple | None = None) -> str:
    """Render ordered (seed_label, SweepRecord) rows as the sweep CSV.

    failure, when given, is (alpha, seed) of an aborted run; it becomes a
    trailing marker row with label "failed" and only the alpha column filled.
    """
    lines = [CSV_HEADER]
    for label, record in rows:
        values = [repr(float(getattr(record, name))) for name in SWEEP_FIELDS]
        lines.append(",".join([label, *values]))
    if failure is not None:
        alpha, seed = failure
        blanks = [""] * (len(SWEEP_FIELDS) - 1)
        lines.append(",".join([f"failed:seed={seed}", repr(float(alpha)), *blanks]))
    return "\n".join(lines) + "\n"
