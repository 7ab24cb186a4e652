"""Append-only JSONL persistence for explanations and ratings.

Two files under the store directory: explanations.jsonl (content-hash
ids, duplicate posts are dropped on write) and ratings.jsonl (appended
verbatim; replay keeps the last record per (explanationId, raterId,
metric), which gives resubmission-overwrites without a compaction
step). Writes go through one lock; reads serve from the in-memory maps.
"""

from __future__ import annotations

import json
import threading
from dataclasses import asdict, dataclass
from pathlib import Path

from ..model import Method, SubjectKind

METRICS_BY_SUBJECT = {
    SubjectKind.INPUT_DATA: ("correctness", "usefulness"),
    SubjectKind.OUTPUT_DATA: ("quality",),
}


@dataclass(frozen=True)
class StoredExplanation:
    id: str
    subject_kind: SubjectKind
    method: Method
    model_id: str | None
    text: str
    source_ref: str
    prompt: str | None
    payload: dict
    created_at: str

    def to_json(self) -> dict:
        row = asdict(self)
        row["subject_kind"] = self.subject_kind.value
        row["method"] = self.method.value
        return row

    @classmethod
    def from_json(cls, row: dict) -> "StoredExplanation":
        return cls(
            id=row["id"],
            subject_kind=SubjectKind(row["subject_kind"]),
            method=Method(row["method"]),
            model_id=row.get("model_id"),
            text=row["text"],
            source_ref=row["source_ref"],
            prompt=row.get("prompt"),
            payload=row.get("payload", {}),
            created_at=row["created_at"],
        )


@dataclass(frozen=True)
class StoredRating:
    explanation_id: str
    rater_id: str
    metric: str
    value: int
    submitted_at: str

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.explanation_id, self.rater_id, self.metric)


class JsonlStore:
    def __init__(self, directory: str | Path) -> None:
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self._explanations_path = self.directory / "explanations.jsonl"
        self._ratings_path = self.directory / "ratings.jsonl"
        self._lock = threading.Lock()
        self._explanations: dict[str, StoredExplanation] = {}
        self._ratings: dict[tuple[str, str, str], StoredRating] = {}
        self._replay()

    def _replay(self) -> None:
        if self._explanations_path.exists():
            for line in self._explanations_path.read_text(encoding="utf-8").splitlines():
                if not line.strip():
                    continue
                record = StoredExplanation.from_json(json.loads(line))
                self._explanations[record.id] = record
        if self._ratings_path.exists():
            for line in self._ratings_path.read_text(encoding="utf-8").splitlines():
                if not line.strip():
                    continue
                record = StoredRating(**json.loads(line))
                self._ratings[record.key] = record

    @staticmethod
    def _append(path: Path, row: dict) -> None:
        with path.open("a", encoding="utf-8") as handle:
            handle.write(json.dumps(row, sort_keys=True) + "\n")

    def put_explanation(self, record: StoredExplanation) -> StoredExplanation:
        """Idempotent on id: a repeated post returns the stored record."""
        with self._lock:
            existing = self._explanations.get(record.id)
            if existing is not None:
                return existing
            self._append(self._explanations_path, record.to_json())
            self._explanations[record.id] = record
            return record

    def get_explanation(self, explanation_id: str) -> StoredExplanation | None:
        return self._explanations.get(explanation_id)

    def list_explanations(
        self,
        method: Method | None = None,
        subject_kind: SubjectKind | None = None,
        component: str | None = None,
    ) -> list[StoredExplanation]:
        rows = sorted(self._explanations.values(), key=lambda r: (r.created_at, r.id))
        if method is not None:
            rows = [r for r in rows if r.method is method]
        if subject_kind is not None:
            rows = [r for r in rows if r.subject_kind is subject_kind]
        if component is not None:
            rows = [
                r
                for r in rows
                if r.payload.get("component") == component
                or (r.payload.get("component") or "").rsplit("/", 1)[-1].rsplit(":", 1)[-1] == component
            ]
        return rows

    def put_rating(self, record: StoredRating) -> StoredRating:
        with self._lock:
            self._append(
                self._ratings_path,
                {
                    "explanation_id": record.explanation_id,
                    "rater_id": record.rater_id,
                    "metric": record.metric,
                    "value": record.value,
                    "submitted_at": record.submitted_at,
                },
            )
            self._ratings[record.key] = record
            return record

    def ratings_for(self, explanation_id: str, rater_id: str | None = None) -> list[StoredRating]:
        rows = [r for r in self._ratings.values() if r.explanation_id == explanation_id]
        if rater_id is not None:
            rows = [r for r in rows if r.rater_id == rater_id]
        return sorted(rows, key=lambda r: (r.rater_id, r.metric))

    def all_ratings(self) -> list[StoredRating]:
        return sorted(self._ratings.values(), key=lambda r: r.key)

    def aggregate_ratings(self) -> list[dict]:
        """Mean rating per (metric, method) over current records."""
        groups: dict[tuple[str, str], list[int]] = {}
        for rating in self._ratings.values():
            explanation = self._explanations.get(rating.explanation_id)
            if explanation is None:
                continue
            key = (rating.metric, explanation.method.value)
            groups.setdefault(key, []).append(rating.value)
        return [
            {
                "metric": metric,
                "method": method,
                "count": len(values),
                "mean": sum(values) / len(values),
            }
            for (metric, method), values in sorted(groups.items())
        ]
