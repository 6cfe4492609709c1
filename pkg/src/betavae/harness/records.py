"""Run records, aggregation and export."""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

MODES = ("mean_std", "median", "top_half_mean")
# metrics where larger is better; the rest (fid, recon, kl) are smaller-is-better
HIGHER_IS_BETTER = {"accuracy"}


@dataclass
class RunRecord:
    config_hash: str
    seed: int
    beta: float
    model: str = ""  # row label, e.g. "4-VAE" or "PCA"
    n_factors: int = 0
    accuracy: float | None = None
    fid: float | None = None
    recon: float | None = None
    kl: float | None = None
    recon_curve: list = field(default_factory=list)
    kl_curve: list = field(default_factory=list)
    wall_time: float = 0.0
    diverged: bool = False
    status: str = "ok"  # ok | diverged | failed
    error: str = ""

    @property
    def key(self) -> str:
        return record_key(self.config_hash, self.seed, self.beta)

    def to_flat(self) -> dict:
        d = asdict(self)
        d["recon_curve"] = ";".join(repr(float(v)) for v in self.recon_curve)
        d["kl_curve"] = ";".join(repr(float(v)) for v in self.kl_curve)
        return d

    @classmethod
    def from_flat(cls, d: dict) -> "RunRecord":
        def opt_float(v):
            return None if v in (None, "", "None") else float(v)

        def curve(v):
            if isinstance(v, list):
                return [float(x) for x in v]
            return [float(x) for x in v.split(";")] if v else []

        diverged = d["diverged"]
        if isinstance(diverged, str):
            diverged = diverged == "True"
        return cls(
            config_hash=str(d["config_hash"]), seed=int(d["seed"]), beta=float(d["beta"]),
            model=str(d.get("model", "")), n_factors=int(d.get("n_factors", 0)),
            accuracy=opt_float(d.get("accuracy")), fid=opt_float(d.get("fid")),
            recon=opt_float(d.get("recon")), kl=opt_float(d.get("kl")),
            recon_curve=curve(d.get("recon_curve", "")), kl_curve=curve(d.get("kl_curve", "")),
            wall_time=float(d.get("wall_time", 0.0)), diverged=bool(diverged),
            status=str(d.get("status", "ok")), error=str(d.get("error", "")))

    def metrics(self) -> dict:
        """Every value the determinism contract covers (all but wall time)."""
        d = asdict(self)
        d.pop("wall_time")
        return d


COLUMNS = tuple(f.name for f in fields(RunRecord))


def record_key(config_hash: str, seed: int, beta: float) -> str:
    return f"{config_hash}_s{seed}_b{beta:g}"


def _atomic_write(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.{os.getpid()}.tmp")
    tmp.write_text(text)
    os.replace(tmp, path)
    return path


def save_record(record: RunRecord, directory) -> Path:
    return _atomic_write(Path(directory) / f"{record.key}.json", json.dumps(record.to_flat(), indent=1))


def load_record(path) -> RunRecord:
    return RunRecord.from_flat(json.loads(Path(path).read_text()))


def load_records(directory, config_hash: str | None = None) -> list[RunRecord]:
    recs = [load_record(p) for p in sorted(Path(directory).glob("*.json"))]
    if config_hash is not None:
        recs = [r for r in recs if r.config_hash == config_hash]
    return recs


# aggregation ---------------------------------------------------------------

class EmptyGroupError(ValueError):
    pass


def _worst(metric: str, finite: list[float]) -> float:
    if metric in HIGHER_IS_BETTER:
        return 0.0
    return max(finite) if finite else math.inf


def summarize(values: list[float], diverged: list[bool], mode: str, metric: str = "accuracy") -> dict:
    """One statistic over a group.

    Divergent runs are dropped for ``median`` and ``top_half_mean``; for
    ``mean_std`` they count at the worst value (0 accuracy, or the largest
    finite value of a smaller-is-better metric).
    """
    if mode not in MODES:
        raise ValueError(f"unknown aggregation mode {mode!r}")
    ok = [v for v, d in zip(values, diverged) if not d and v is not None]
    if mode == "mean_std":
        worst = _worst(metric, ok)
        vals = [worst if (d or v is None) else v for v, d in zip(values, diverged)]
        if not vals:
            raise EmptyGroupError("empty group")
        arr = np.array(vals, dtype=np.float64)
        return {"value": float(arr.mean()), "std": float(arr.std()), "n": len(vals)}
    if not ok:
        raise EmptyGroupError("no non-divergent records in group")
    arr = np.array(ok, dtype=np.float64)
    if mode == "median":
        return {"value": float(np.median(arr)), "std": None, "n": len(ok)}
    better_first = np.sort(arr)[::-1] if metric in HIGHER_IS_BETTER else np.sort(arr)
    keep = better_first[:math.ceil(len(arr) / 2)]
    return {"value": float(keep.mean()), "std": None, "n": len(keep)}


def aggregate(records, mode: str, metric: str = "accuracy") -> list[dict]:
    """Rows {model, beta, n_factors, metric, mode, value, std, n}, one per group."""
    records = list(records)
    if not records:
        raise EmptyGroupError("no records to aggregate")
    groups: dict[tuple, list[RunRecord]] = {}
    for r in records:
        if r.status == "failed":
            continue
        groups.setdefault((r.model, r.beta, r.n_factors), []).append(r)
    rows = []
    for (model, beta, nf), rs in sorted(groups.items(), key=lambda kv: (kv[0][1], kv[0][0], kv[0][2])):
        s = summarize([getattr(r, metric) for r in rs], [r.diverged for r in rs], mode, metric)
        rows.append({"model": model, "beta": beta, "n_factors": nf, "metric": metric, "mode": mode, **s})
    return rows


def summary_table(records, metric: str = "accuracy") -> list[dict]:
    """Rows of model x factor-count with one column per statistic."""
    out: dict[tuple, dict] = {}
    for mode in MODES:
        for row in aggregate(records, mode, metric):
            key = (row["model"], row["n_factors"])
            entry = out.setdefault(key, {"model": row["model"], "n_factors": row["n_factors"]})
            if mode == "mean_std":
                entry["mean"], entry["std"] = row["value"], row["std"]
            else:
                entry[mode] = row["value"]
    return list(out.values())


def format_summary(rows, scale: float = 100.0) -> str:
    head = f"{'model':<10} {'factors':>7} {'mean +- std':>16} {'median':>8} {'top half':>9}"
    lines = [head, "-" * len(head)]
    for r in rows:
        ms = f"{scale * r['mean']:.2f} +- {scale * r['std']:.2f}"
        lines.append(f"{r['model']:<10} {r['n_factors']:>7} {ms:>16} "
                     f"{scale * r['median']:>8.2f} {scale * r['top_half_mean']:>9.2f}")
    return "\n".join(lines)


# export ----------------------------------------------------------------------

def export_records(records, path, fmt: str = "csv") -> Path:
    path = Path(path)
    flat = [r.to_flat() for r in records]
    if fmt == "json":
        return _atomic_write(path, json.dumps(flat, indent=1))
    if fmt != "csv":
        raise ValueError(f"unknown export format {fmt!r}")
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.tmp")
    with open(tmp, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=COLUMNS)
        w.writeheader()
        w.writerows(flat)
    os.replace(tmp, path)
    return path


def import_records(path) -> list[RunRecord]:
    path = Path(path)
    if path.suffix == ".json":
        return [RunRecord.from_flat(d) for d in json.loads(path.read_text())]
    with open(path, newline="") as fh:
        return [RunRecord.from_flat(d) for d in csv.DictReader(fh)]
