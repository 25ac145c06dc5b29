"""Corpus and judgment loaders plus report persistence.

JSONL is the canonical interchange; TSV is supported for WMT-style
inputs. Column orders are fixed: DARR = segment_id, better_system,
worse_system; MQM = system, segment_id, score (both headerless).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

from .analysis import RefinementTrace
from .errors import DataError, ParseError
from .metaeval import DarrJudgment
from .metric import ErrorReport

PathLike = Union[str, Path]


class SampleFormat(Enum):
    JSONL = "jsonl"
    TSV = "tsv"


@dataclass(frozen=True)
class EvalSample:
    id: str
    hypothesis: str
    system: str
    source: Optional[str] = None
    references: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.hypothesis:
            raise DataError(f"sample {self.id!r} has an empty hypothesis")


_TSV_REQUIRED = ("id", "system", "hyp")
_TSV_OPTIONAL = ("src", "ref")


def _merge_sample(existing: EvalSample, other: EvalSample) -> EvalSample:
    """Rows sharing an (id, system) pair contribute extra references."""
    for attr in ("hypothesis", "source"):
        if getattr(existing, attr) != getattr(other, attr):
            raise DataError(
                f"duplicate sample id {existing.id!r} with conflicting {attr}"
            )
    merged = existing.references + tuple(
        r for r in other.references if r not in existing.references
    )
    return EvalSample(existing.id, existing.hypothesis, existing.system,
                      existing.source, merged)


def _sample_from_json(obj: dict, path: PathLike, line: int) -> EvalSample:
    try:
        return EvalSample(
            id=str(obj["id"]),
            hypothesis=obj["hyp"],
            system=obj["system"],
            source=obj.get("src"),
            references=tuple(obj.get("refs", ())),
        )
    except KeyError as exc:
        raise ParseError(f"sample row missing field {exc}", path, line)


def load_samples(path: PathLike, format: SampleFormat = SampleFormat.JSONL) -> list[EvalSample]:
    """Parse an evaluation corpus; rows sharing (id, system) aggregate references."""
    by_key: dict[tuple[str, str], EvalSample] = {}
    order: list[tuple[str, str]] = []
    for line_no, sample in _iter_samples(path, format):
        key = (sample.id, sample.system)
        if key in by_key:
            by_key[key] = _merge_sample(by_key[key], sample)
        else:
            by_key[key] = sample
            order.append(key)
    return [by_key[k] for k in order]


def _iter_samples(path: PathLike, format: SampleFormat) -> Iterable[tuple[int, EvalSample]]:
    lines = _read_lines(path)
    if format is SampleFormat.JSONL:
        for line_no, line in enumerate(lines, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON: {exc.msg}", path, line_no)
            yield line_no, _sample_from_json(obj, path, line_no)
        return
    if not lines:
        return
    header = lines[0].rstrip("\n").split("\t")
    missing = [c for c in _TSV_REQUIRED if c not in header]
    if missing:
        raise ParseError(f"TSV header missing column(s) {missing}", path, 1)
    col = {name: header.index(name) for name in header}
    for line_no, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cells = line.rstrip("\n").split("\t")
        if len(cells) != len(header):
            raise ParseError(
                f"expected {len(header)} columns, found {len(cells)}", path, line_no
            )
        ref = cells[col["ref"]] if "ref" in col else ""
        yield line_no, EvalSample(
            id=cells[col["id"]],
            hypothesis=cells[col["hyp"]],
            system=cells[col["system"]],
            source=cells[col["src"]] if "src" in col else None,
            references=(ref,) if ref else (),
        )


def _read_lines(path: PathLike) -> list[str]:
    try:
        return Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}")
    except UnicodeDecodeError as exc:
        raise ParseError(f"not valid UTF-8: {exc}", path)


def load_darr(path: PathLike) -> list[DarrJudgment]:
    """Headerless TSV: segment_id, better_system, worse_system."""
    judgments = []
    for line_no, line in enumerate(_read_lines(path), start=1):
        if not line.strip():
            continue
        cells = line.split("\t")
        if len(cells) != 3:
            raise ParseError(f"expected 3 columns, found {len(cells)}", path, line_no)
        try:
            judgments.append(DarrJudgment(*cells))
        except DataError as exc:
            raise ParseError(str(exc), path, line_no)
    return judgments


def write_darr(judgments: Sequence[DarrJudgment], path: PathLike) -> None:
    lines = [
        f"{j.segment_id}\t{j.system_better}\t{j.system_worse}" for j in judgments
    ]
    _write_text(path, "".join(line + "\n" for line in lines))


def load_mqm(path: PathLike) -> dict[tuple[str, str], float]:
    """Headerless TSV: system, segment_id, score. Duplicate keys average."""
    sums: dict[tuple[str, str], list[float]] = {}
    for line_no, line in enumerate(_read_lines(path), start=1):
        if not line.strip():
            continue
        cells = line.split("\t")
        if len(cells) != 3:
            raise ParseError(f"expected 3 columns, found {len(cells)}", path, line_no)
        system, segment_id, raw = cells
        try:
            score = float(raw)
        except ValueError:
            raise ParseError(f"non-numeric score {raw!r}", path, line_no)
        sums.setdefault((system, segment_id), []).append(score)
    return {key: sum(vals) / len(vals) for key, vals in sums.items()}


def report_to_dict(report: ErrorReport) -> dict:
    return {
        "score_hyp": report.score_hyp,
        "score_refined": report.score_refined,
        "score_ref_self": report.score_ref_self,
        "dist_exp": report.dist_exp,
        "dist_imp": report.dist_imp,
        "final_score": report.final_score,
        "refined_text": report.refined_text,
        "trace": report.trace.to_dict(),
        "non_translation": report.non_translation,
    }


def report_from_dict(data: dict) -> ErrorReport:
    return ErrorReport(
        score_hyp=data["score_hyp"],
        score_refined=data["score_refined"],
        score_ref_self=data["score_ref_self"],
        dist_exp=data["dist_exp"],
        dist_imp=data["dist_imp"],
        final_score=data["final_score"],
        refined_text=data["refined_text"],
        trace=RefinementTrace.from_dict(data["trace"]),
        non_translation=data["non_translation"],
    )


_SCORE_FIELDS = ("score_hyp", "score_refined", "score_ref_self",
                 "dist_exp", "dist_imp", "final_score")


def _check_finite(report: ErrorReport) -> None:
    for name in _SCORE_FIELDS:
        if not math.isfinite(getattr(report, name)):
            raise DataError(f"refusing to serialize non-finite {name}")


def write_reports(reports: Sequence[ErrorReport], path: PathLike) -> None:
    """JSONL, one report per line, full round-trip float precision."""
    for report in reports:
        _check_finite(report)
    text = "".join(
        json.dumps(report_to_dict(r), sort_keys=True, ensure_ascii=False) + "\n"
        for r in reports
    )
    _write_text(path, text)


def load_reports(path: PathLike) -> list[ErrorReport]:
    reports = []
    for line_no, line in enumerate(_read_lines(path), start=1):
        if not line.strip():
            continue
        try:
            reports.append(report_from_dict(json.loads(line)))
        except (json.JSONDecodeError, KeyError) as exc:
            raise ParseError(f"invalid report row: {exc}", path, line_no)
    return reports


def write_scored_corpus(
    samples: Sequence[EvalSample],
    reports: Sequence[ErrorReport],
    path: PathLike,
    include_trace: bool = False,
) -> None:
    """Reports keyed by sample id/system, ready for meta-evaluation."""
    if len(samples) != len(reports):
        raise DataError("samples and reports must align one-to-one")
    rows = []
    for sample, report in zip(samples, reports):
        _check_finite(report)
        row = {"id": sample.id, "system": sample.system, **report_to_dict(report)}
        if not include_trace:
            del row["trace"]
        rows.append(json.dumps(row, sort_keys=True, ensure_ascii=False))
    _write_text(path, "".join(r + "\n" for r in rows))


def load_scores(path: PathLike) -> dict[tuple[str, str], float]:
    """(system, id) -> final_score from a scored-corpus JSONL file."""
    scores: dict[tuple[str, str], float] = {}
    for line_no, line in enumerate(_read_lines(path), start=1):
        if not line.strip():
            continue
        try:
            row = json.loads(line)
            key = (row["system"], row["id"])
            value = float(row["final_score"])
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"invalid score row: {exc}", path, line_no)
        if key in scores:
            raise DataError(f"duplicate score for system={key[0]!r} id={key[1]!r}")
        scores[key] = value
    return scores


def load_distances(path: PathLike) -> dict[tuple[str, str], tuple[float, float]]:
    """(system, id) -> (dist_exp, dist_imp) from a scored-corpus JSONL file."""
    distances: dict[tuple[str, str], tuple[float, float]] = {}
    for line_no, line in enumerate(_read_lines(path), start=1):
        if not line.strip():
            continue
        try:
            row = json.loads(line)
            key = (row["system"], row["id"])
            value = (float(row["dist_exp"]), float(row["dist_imp"]))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"invalid distance row: {exc}", path, line_no)
        distances[key] = value
    return distances


def _write_text(path: PathLike, text: str) -> None:
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot write {path}: {exc}")
