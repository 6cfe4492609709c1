"""Sweep execution: one RunRecord per (seed, beta), resumable."""

from __future__ import annotations

import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .. import baselines
from ..datasets import ShapesDataset, load_dataset
from ..dmetric import metric_score
from ..fid import fid_score, make_extractor
from ..rng import Rng
from ..vae import TrainingDiverged, build_model, load_model, save_model, train
from ..viz import TraversalSpec, gt_traversal_embedding, latent_traversal, write_embedding_csv, write_image_grid
from .config import ExperimentConfig
from .records import RunRecord, load_record, record_key, save_record


class Workspace:
    """Output layout of one experiment directory."""

    def __init__(self, config: ExperimentConfig):
        self.config = config
        self.root = Path(config.out)
        self.hash = config.hash()

    @property
    def records(self) -> Path:
        return self.root / "records"

    def record_path(self, seed, beta) -> Path:
        return self.records / f"{record_key(self.hash, seed, beta)}.json"

    def checkpoint(self, seed, beta) -> Path:
        return self.root / "checkpoints" / f"{record_key(self.hash, seed, beta)}.bvae"

    def viz(self, seed, beta, suffix) -> Path:
        return self.root / "viz" / f"{record_key(self.hash, seed, beta)}{suffix}"


def load_data(config: ExperimentConfig):
    """(dataset handle, training images) for the configured source."""
    ds_spec = config.dataset
    if ds_spec.kind == "shapes2d":
        dataset = ShapesDataset()
    else:
        dataset = load_dataset(ds_spec.path)
    n = ds_spec.subset or len(dataset)
    if n > len(dataset):
        raise ValueError(f"subset of {n} exceeds dataset size {len(dataset)}")
    _, images = dataset.subset(n, Rng(ds_spec.subset_seed))
    return dataset, images


def model_label(config: ExperimentConfig, beta: float) -> str:
    if config.is_baseline:
        return config.model.arch.upper()
    return f"{beta:g}-VAE"


def _fit(config: ExperimentConfig, images, seed: int, beta: float, record: RunRecord):
    m = config.model
    if config.is_baseline:
        kw = {"max_iter": m.ica_max_iter, "tol": m.ica_tol} if m.arch == "ica" else {}
        return baselines.fit_baseline(m.arch, images, k=m.latent_dim, seed=seed, **kw)
    model = build_model(m.arch, m.latent_dim, images.shape[1:], seed=seed, hidden=m.hidden)
    _, curves = train(model, images, config.train_config(beta, seed))
    record.recon_curve, record.kl_curve = curves.recon, curves.kl
    record.recon, record.kl = curves.recon[-1], curves.kl[-1]
    return model


def _load(ws: Workspace, seed, beta):
    path = ws.checkpoint(seed, beta)
    if not path.exists():
        raise FileNotFoundError(f"no checkpoint {path}; run the train stage first")
    if ws.config.is_baseline:
        return baselines.load_linear_model(path)
    return load_model(path)


def _save(ws: Workspace, model, seed, beta):
    path = ws.checkpoint(seed, beta)
    path.parent.mkdir(parents=True, exist_ok=True)
    if ws.config.is_baseline:
        baselines.save_linear_model(model, path)
    else:
        save_model(model, path)


def _reconstruct(model, images):
    if hasattr(model, "reconstruct"):
        return model.reconstruct(images)
    return model.inverse_transform(model.transform(images)).reshape(images.shape)


def run_one(config: ExperimentConfig, seed: int, beta: float, stages=None, data=None) -> RunRecord:
    """Execute the configured stages for one (seed, beta); never raises."""
    stages = tuple(stages or config.sweep.stages)
    ws = Workspace(config)
    mcfg = config.metric_config()
    record = RunRecord(ws.hash, seed, float(beta), model_label(config, beta))
    prev = ws.record_path(seed, beta)
    if prev.exists():
        old = load_record(prev)
        if old.status == "ok":
            record = old
    start = time.perf_counter()
    try:
        dataset, images = data if data is not None else load_data(config)
        space = mcfg.space_for(dataset.space)
        record.n_factors = space.K
        if "train" in stages:
            model = _fit(config, images, seed, beta, record)
            _save(ws, model, seed, beta)
        else:
            model = _load(ws, seed, beta)
        if "metric" in stages:
            record.accuracy = metric_score(model, dataset.with_space(space), space, mcfg, seed)
        if "fid" in stages:
            real = images[:config.fid.n_images]
            record.fid = fid_score(make_extractor(config.fid.extractor), real, _reconstruct(model, real))
        if "viz" in stages and not config.is_baseline:
            median = dataset.space.median_tuple()
            grid = latent_traversal(model, TraversalSpec(median), dataset=dataset)
            write_image_grid(grid, _ensure(ws.viz(seed, beta, ".pgm")))
            emb = gt_traversal_embedding(model, space, dataset.with_space(space))
            write_embedding_csv(emb, _ensure(ws.viz(seed, beta, "_embedding.csv")))
        record.status, record.diverged, record.error = "ok", False, ""
    except TrainingDiverged as exc:
        record.status, record.diverged, record.error = "diverged", True, str(exc)
    except Exception as exc:  # recorded, not fatal to the sweep
        record.status, record.error = "failed", f"{type(exc).__name__}: {exc}"
        record.error += "\n" + traceback.format_exc(limit=3)
    record.wall_time = time.perf_counter() - start
    save_record(record, ws.records)
    return record


def _ensure(path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _task(args):
    config, seed, beta, stages = args
    return run_one(config, seed, beta, stages)


def run(config: ExperimentConfig, resume: bool = True, stages=None, workers: int | None = None,
        log=None) -> list[RunRecord]:
    """All (seed, beta) runs of a config. With ``resume``, finished records are reused untouched."""
    ws = Workspace(config)
    ws.root.mkdir(parents=True, exist_ok=True)
    stages = tuple(stages or config.sweep.stages)
    betas = (0.0,) if config.is_baseline else config.sweep.betas
    todo, done = [], {}
    for seed in config.sweep.seeds:
        for beta in betas:
            path = ws.record_path(seed, beta)
            if resume and path.exists():
                rec = load_record(path)
                if rec.status != "failed" and _has_stages(rec, stages):
                    done[(seed, beta)] = rec
                    continue
            todo.append((seed, beta))
    workers = workers or config.sweep.workers
    if todo and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_task, [(config, s, b, stages) for s, b in todo]))
    else:
        data = load_data(config) if todo else None
        results = []
        for s, b in todo:
            results.append(run_one(config, s, b, stages, data=data))
            if log:
                r = results[-1]
                log(f"seed {s} beta {b:g}: {r.status} accuracy={r.accuracy} fid={r.fid} ({r.wall_time:.1f}s)")
    for (s, b), r in zip(todo, results):
        done[(s, b)] = r
    return [done[(s, b)] for s in config.sweep.seeds for b in betas]


def _has_stages(rec: RunRecord, stages) -> bool:
    if rec.diverged:
        return True
    need = {"metric": rec.accuracy, "fid": rec.fid}
    return all(need[s] is not None for s in stages if s in need)


def check_record(rec: RunRecord) -> list[str]:
    """Internal invariants of a finished record; returns violations."""
    problems = []
    if rec.diverged != (rec.status == "diverged"):
        problems.append("divergence flag disagrees with status")
    if rec.accuracy is not None and not 0.0 <= rec.accuracy <= 1.0:
        problems.append(f"accuracy {rec.accuracy} outside [0, 1]")
    if rec.fid is not None and not rec.fid >= 0.0:
        problems.append(f"negative FID {rec.fid}")
    if len(rec.recon_curve) != len(rec.kl_curve):
        problems.append("curve lengths differ")
    if any(not np.isfinite(v) for v in rec.recon_curve + rec.kl_curve):
        problems.append("non-finite curve value")
    return problems
