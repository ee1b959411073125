"""normalize -> align -> evaluate, run records, and result tables."""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import logging
import platform
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .align import (
    LinearMap,
    RcslsConfig,
    RefineConfig,
    procrustes_fit,
    rcsls_train,
    refine,
    save_map,
)
from .embeddings import EmbeddingSpace, MultiDictionary, SeedDictionary, load_vec, read_dictionary
from .errors import DataError, XlignError
from .normalize import NormalizationMethod, NormalizationReport, length_normalize, normalize
from .retrieval import EvaluationReport, evaluate_p1, parse_criterion

logger = logging.getLogger(__name__)

ALIGN_METHODS = ("procrustes", "procrustes-refine", "rcsls")
METHOD_LABELS = {"procrustes": "Procrustes", "procrustes-refine": "Procrustes + refine", "rcsls": "RCSLS"}
NORM_LABELS = {"none": "None", "cl": "C+L", "iternorm": "IN"}


class PipelineStageError(XlignError):
    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        super().__init__(f"{stage} stage failed: {cause}")


@dataclass
class PipelineConfig:
    src_path: str = ""
    tgt_path: str = ""
    train_dict_path: str = ""
    test_dict_path: str = ""
    out_dir: str = "run"
    valid_dict_path: str | None = None
    normalization: NormalizationMethod = field(default_factory=NormalizationMethod)
    alignment: str = "procrustes"
    refine: RefineConfig = field(default_factory=RefineConfig)
    rcsls: RcslsConfig = field(default_factory=RcslsConfig)
    criterion: str = "csls"
    knn: int = 10
    seed: int = 0
    max_vocab: int | None = None
    perturb_zeros: bool = False
    tag: str = "run"

    def __post_init__(self):
        if self.alignment not in ALIGN_METHODS:
            raise ValueError(f"unknown alignment {self.alignment!r}; expected one of {ALIGN_METHODS}")
        parse_criterion(self.criterion, self.knn)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        data = dict(data)
        data["normalization"] = NormalizationMethod(**data.get("normalization", {}))
        data["refine"] = RefineConfig(**data.get("refine", {}))
        rc = dict(data.get("rcsls", {}))
        for key in ("learning_rates", "epoch_candidates"):
            if key in rc:
                rc[key] = tuple(rc[key])
        data["rcsls"] = RcslsConfig(**rc)
        return cls(**data)

    def hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()


@dataclass
class RunResult:
    evaluation: EvaluationReport
    normalization: dict[str, NormalizationReport]
    map: LinearMap
    details: dict = field(default_factory=dict)


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except PipelineStageError:
        raise
    except (XlignError, ValueError, OSError, ArithmeticError) as exc:
        raise PipelineStageError(name, exc) from exc


def fit_map(
    src: EmbeddingSpace,
    tgt: EmbeddingSpace,
    train: SeedDictionary,
    alignment: str,
    refine_cfg: RefineConfig = RefineConfig(),
    rcsls_cfg: RcslsConfig = RcslsConfig(),
    valid: MultiDictionary | None = None,
) -> tuple[LinearMap, dict]:
    if alignment == "procrustes":
        return procrustes_fit(src, tgt, train), {}
    if alignment == "procrustes-refine":
        pool = min(refine_cfg.synthetic_pool, src.n, tgt.n)
        cfg = dataclasses.replace(refine_cfg, synthetic_pool=pool)
        W, sizes = refine(src, tgt, train, cfg)
        return W, {"synthetic_dictionary_sizes": sizes}
    if alignment == "rcsls":
        res = rcsls_train(src, tgt, train, valid, rcsls_cfg)
        return res.map, {
            "learning_rate": res.learning_rate,
            "epochs": res.epochs,
            "loss_trace": res.loss_trace,
            "grid": [dataclasses.asdict(g) for g in res.grid],
        }
    raise ValueError(f"unknown alignment {alignment!r}")


def run_experiment(
    src: EmbeddingSpace,
    tgt: EmbeddingSpace,
    train: SeedDictionary,
    test: MultiDictionary,
    normalization: NormalizationMethod = NormalizationMethod(),
    alignment: str = "procrustes",
    criterion: str = "csls",
    knn: int = 10,
    refine_cfg: RefineConfig = RefineConfig(),
    rcsls_cfg: RcslsConfig = RcslsConfig(),
    valid: MultiDictionary | None = None,
    perturb_zeros: bool = False,
    seed: int = 0,
) -> RunResult:
    """In-memory pipeline: the same normalization on both sides, then fit and evaluate."""
    src_n, src_report = _stage("normalize", normalize, src, normalization, perturb_zeros, seed)
    tgt_n, tgt_report = _stage("normalize", normalize, tgt, normalization, perturb_zeros, seed)
    src_fit, tgt_fit = src_n, tgt_n
    if alignment == "rcsls" and normalization.name == "none":
        # unnormalized RCSLS is a legitimate grid cell; skip the unit-length precondition
        rcsls_cfg = dataclasses.replace(rcsls_cfg, strict_lengths=False)
    elif alignment == "rcsls":
        # a finite IterNorm run ends on centering, so lengths are only near 1;
        # project once more for training (cosine retrieval ignores length)
        src_fit = _stage("normalize", length_normalize, src_n)
        tgt_fit = _stage("normalize", length_normalize, tgt_n)
    rcsls_cfg = dataclasses.replace(rcsls_cfg, seed=seed, knn=knn)
    W, details = _stage("align", fit_map, src_fit, tgt_fit, train, alignment, refine_cfg, rcsls_cfg, valid)
    report = _stage("evaluate", evaluate_p1, W, src_n, tgt_n, test, parse_criterion(criterion, knn))
    return RunResult(report, {"src": src_report, "tgt": tgt_report}, W, details)


def map_digest(W: LinearMap) -> str:
    return hashlib.sha256(np.ascontiguousarray(W.matrix).tobytes()).hexdigest()


def run_record(cfg: PipelineConfig, result: RunResult, artifacts: dict | None = None) -> dict:
    """Everything needed to re-execute and compare a run."""
    ev = result.evaluation
    return {
        "config": cfg.to_dict(),
        "config_hash": cfg.hash(),
        "seed": cfg.seed,
        "versions": {
            "xlign": __version__,
            "numpy": np.__version__,
            "python": platform.python_version(),
        },
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "tag": cfg.tag,
        "method": cfg.alignment,
        "normalization": cfg.normalization.name,
        "accuracy": ev.accuracy,
        "correct": ev.correct,
        "total_queries": ev.total_queries,
        "criterion": ev.criterion,
        "map": {
            "orthogonal": result.map.orthogonal,
            "orthogonality_residual": result.map.orthogonality_residual,
            "sha256": map_digest(result.map),
        },
        "normalization_reports": {k: v.to_dict() for k, v in result.normalization.items()},
        "details": result.details,
        "artifacts": artifacts or {},
    }


def _dump_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=float) + "\n", encoding="utf-8")


def run_pipeline(cfg: PipelineConfig) -> RunResult:
    """File-backed pipeline. Writes ``W.map``, ``evaluation.json``, ``normalization.json``
    and ``run.json`` into ``cfg.out_dir``; on failure, removes whatever it wrote."""
    src = _stage("load", load_vec, cfg.src_path, cfg.max_vocab)
    tgt = _stage("load", load_vec, cfg.tgt_path, cfg.max_vocab)
    train, _, skipped_train = _stage("load", read_dictionary, cfg.train_dict_path, src, tgt)
    _, test, skipped_test = _stage("load", read_dictionary, cfg.test_dict_path, src, tgt)
    valid = None
    if cfg.valid_dict_path:
        valid = _stage("load", read_dictionary, cfg.valid_dict_path, src, tgt)[1]
    if skipped_train or skipped_test:
        logger.info("skipped %d train / %d test OOV dictionary lines", skipped_train, skipped_test)

    result = run_experiment(
        src, tgt, train, test, cfg.normalization, cfg.alignment, cfg.criterion, cfg.knn,
        cfg.refine, cfg.rcsls, valid, cfg.perturb_zeros, cfg.seed,
    )
    result.details.update(skipped_train=skipped_train, skipped_test=skipped_test)

    out = Path(cfg.out_dir)
    created_dir = not out.exists()
    paths = {
        "map": out / "W.map",
        "evaluation": out / "evaluation.json",
        "normalization": out / "normalization.json",
        "record": out / "run.json",
    }
    written = []
    try:
        out.mkdir(parents=True, exist_ok=True)
        save_map(result.map, paths["map"])
        written.append(paths["map"])
        _dump_json(result.evaluation.to_dict(), paths["evaluation"])
        written.append(paths["evaluation"])
        _dump_json({k: v.to_dict() for k, v in result.normalization.items()}, paths["normalization"])
        written.append(paths["normalization"])
        record = run_record(cfg, result, {k: str(v) for k, v in paths.items()})
        _dump_json(record, paths["record"])
    except OSError as exc:
        for p in written:
            p.unlink(missing_ok=True)
        if created_dir and out.exists() and not any(out.iterdir()):
            out.rmdir()
        raise PipelineStageError("write", exc) from exc
    return result


# --------------------------------------------------------------------------
# tables


def _ordered(values, preferred):
    known = [v for v in preferred if v in values]
    return known + sorted(v for v in values if v not in preferred)


def _collect(records):
    if not records:
        raise DataError("no run records to tabulate")
    cells: dict[tuple[str, str], dict[str, float]] = {}
    tags: list[str] = []
    for rec in records:
        key = (rec["method"], rec["normalization"])
        row = cells.setdefault(key, {})
        if rec["tag"] in row:
            raise DataError(f"duplicate record for {key} / {rec['tag']}")
        row[rec["tag"]] = float(rec["accuracy"])
        if rec["tag"] not in tags:
            tags.append(rec["tag"])
    for key, row in cells.items():
        if set(row) != set(tags):
            raise DataError(f"row {key} has columns {sorted(row)}, expected {sorted(tags)}")
    methods = _ordered({m for m, _ in cells}, ALIGN_METHODS)
    norms = _ordered({n for _, n in cells}, tuple(NORM_LABELS))
    rows = [(m, n) for m in methods for n in norms if (m, n) in cells]
    return cells, rows, tags


def format_cell(accuracy: float) -> str:
    return f"{100.0 * accuracy:.1f}"


def emit_table(records: list[dict], average: bool = False) -> tuple[str, str]:
    """Text table (best normalization per method and column starred) and CSV.

    Rows are method x normalization, columns are run tags, cells are accuracy
    x 100 with one decimal.
    """
    cells, rows, tags = _collect(records)
    columns = list(tags)
    if average:
        for key in cells:
            cells[key]["Average"] = float(np.mean([cells[key][t] for t in tags]))
        columns.append("Average")

    best = {}
    for m in {m for m, _ in rows}:
        for col in columns:
            best[m, col] = max(round(100 * cells[k][col], 1) for k in rows if k[0] == m)

    header = ["Method", "Normalization"] + columns
    body = []
    last_method = None
    for m, n in rows:
        label = METHOD_LABELS.get(m, m) if m != last_method else ""
        last_method = m
        line = [label, NORM_LABELS.get(n, n)]
        for col in columns:
            text = format_cell(cells[m, n][col])
            line.append(text + ("*" if float(text) == best[m, col] else " "))
        body.append(line)
    widths = [max(len(str(r[c])) for r in [header] + body) for c in range(len(header))]
    fmt = lambda r: "  ".join(str(v).ljust(w) if i < 2 else str(v).rjust(w) for i, (v, w) in enumerate(zip(r, widths)))
    rule = "-" * len(fmt(header))
    text = "\n".join([fmt(header), rule] + [fmt(r).rstrip() for r in body]) + "\n"

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["method", "normalization"] + columns)
    for m, n in rows:
        writer.writerow([m, n] + [format_cell(cells[m, n][c]) for c in columns])
    return text, buf.getvalue()


def parse_table_csv(text: str) -> list[dict]:
    """Inverse of the CSV half of :func:`emit_table` (accuracies rounded to 0.1 point)."""
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if header[:2] != ["method", "normalization"]:
        raise DataError("not an xlign results CSV")
    records = []
    for row in reader:
        for tag, cell in zip(header[2:], row[2:]):
            records.append(
                {"method": row[0], "normalization": row[1], "tag": tag, "accuracy": float(cell) / 100.0}
            )
    return records


def load_records(paths) -> list[dict]:
    records = []
    for p in paths:
        data = json.loads(Path(p).read_text(encoding="utf-8"))
        records.extend(data if isinstance(data, list) else [data])
    return records
