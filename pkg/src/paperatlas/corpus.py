"""Paper-record data model, line-delimited ingestion, and metadata filtering.

The on-disk corpus format is UTF-8 JSON lines, one record per line. A
store directory holds ``records.jsonl`` plus derived ``stats.json`` and
``errors.log``. Loaded stores are treated as immutable and are safe to
read from concurrent tasks; ingestion is single-writer.
"""

from __future__ import annotations

import hashlib
import json
import logging
from collections import Counter
from dataclasses import dataclass, field, fields
from pathlib import Path

from .errors import RecordParseError, StoreError, ValidationError

logger = logging.getLogger(__name__)

#: The fixed venue codes accepted by metadata filters and query plans.
VENUES = (
    "AAAI", "ACL", "COLM", "COLT", "CoRL", "CVPR", "ECCV", "EMNLP",
    "ICCV", "ICLR", "ICML", "IJCAI", "INTERSPEECH", "IWSLT", "MLSYS",
    "NAACL", "NDSS", "NeurIPS", "OSDI", "UAI", "USENIX-Fast", "USENIX-Sec",
)

#: Label assigned to records that belong to no topic cluster.
NOISE_TOPIC_ID = -1
NOISE_TOPIC_NAME = "Outliers"


@dataclass
class PaperRecord:
    """One paper's structured profile: metadata, parsed fields, and topic tag.

    Unknown input fields are preserved verbatim in ``extra`` so that
    records round-trip through parse/serialize unchanged.
    """

    paper_name: str
    year: int
    conference: str = ""
    authors: list[str] = field(default_factory=list)
    citations: int = 0
    keywords: list[str] = field(default_factory=list)
    keywords_description: dict[str, str] = field(default_factory=dict)
    abstract_ori: str = ""
    abstract_summary: str = ""
    problem_statement: str = ""
    contributions: list[str] = field(default_factory=list)
    methods: str = ""
    architecture: str = ""
    loss_function: str = ""
    training_setup: str = ""
    datasets: list[str] = field(default_factory=list)
    metrics: list[str] = field(default_factory=list)
    gpu_info: str = ""
    limitations: list[str] = field(default_factory=list)
    field_positioning: str = ""
    novelty_type: str = ""
    institution: list[str] = field(default_factory=list)
    topic_id: int = NOISE_TOPIC_ID
    topic_name: str = ""
    record_id: str = ""
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.paper_name:
            raise ValidationError("paper_name: must be non-empty")
        if self.year is None:
            raise ValidationError("year: must be present")
        if self.citations < 0:
            raise ValidationError(f"citations: must be >= 0, got {self.citations}")
        if not self.record_id:
            self.record_id = _derive_record_id(self.paper_name, self.year, self.conference)

    def embedding_text(self) -> str:
        """Title plus summary text used for document embedding."""
        return f"{self.paper_name}. {self.abstract_summary}"


# Canonical field order for serialization; matches the schema documentation
# order so serialized lines diff cleanly against upstream exports.
_SCHEMA_FIELDS = [
    f.name for f in fields(PaperRecord) if f.name != "extra"
]

_LIST_FIELDS = {
    "authors", "keywords", "contributions", "datasets", "metrics",
    "limitations", "institution",
}
_TEXT_FIELDS = {
    "paper_name", "conference", "abstract_ori", "abstract_summary",
    "problem_statement", "methods", "architecture", "loss_function",
    "training_setup", "gpu_info", "field_positioning", "novelty_type",
    "topic_name", "record_id",
}


def _derive_record_id(paper_name: str, year: int, conference: str) -> str:
    digest = hashlib.sha1(f"{paper_name}\x1f{year}\x1f{conference}".encode("utf-8"))
    return digest.hexdigest()[:16]


def _coerce_text(name: str, value) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    raise ValidationError(f"{name}: expected text, got {type(value).__name__}")


def _coerce_list(name: str, value) -> list[str]:
    if value is None:
        return []
    if isinstance(value, list):
        return [str(v) for v in value]
    if isinstance(value, str):
        # Tolerate a bare string where a list is documented.
        return [value] if value else []
    raise ValidationError(f"{name}: expected list, got {type(value).__name__}")


def parse_record(json_text: str) -> PaperRecord:
    """Parse one JSON object into a :class:`PaperRecord`.

    Absent optional fields take empty defaults; unknown fields are kept
    in ``record.extra``. Raises :class:`RecordParseError` (with byte
    offset) on malformed JSON and :class:`ValidationError` when
    ``paper_name`` or ``year`` is missing.
    """
    try:
        obj = json.loads(json_text)
    except json.JSONDecodeError as exc:
        offset = len(json_text[: exc.pos].encode("utf-8"))
        raise RecordParseError(
            f"malformed JSON at byte {offset}: {exc.msg}", byte_offset=offset
        ) from exc
    if not isinstance(obj, dict):
        raise RecordParseError("record line must be a JSON object", byte_offset=0)
    return record_from_dict(obj)


def record_from_dict(obj: dict) -> PaperRecord:
    """Build a record from an already-decoded JSON object."""
    if not obj.get("paper_name"):
        raise ValidationError("paper_name: missing required field")
    if "year" not in obj or obj["year"] is None:
        raise ValidationError("year: missing required field")

    kwargs: dict = {}
    extra: dict = {}
    for key, value in obj.items():
        if key in _TEXT_FIELDS:
            kwargs[key] = _coerce_text(key, value)
        elif key in _LIST_FIELDS:
            kwargs[key] = _coerce_list(key, value)
        elif key == "year":
            try:
                kwargs[key] = int(value)
            except (TypeError, ValueError):
                raise ValidationError(f"year: expected integer, got {value!r}")
        elif key in ("citations", "topic_id"):
            try:
                kwargs[key] = int(value)
            except (TypeError, ValueError):
                raise ValidationError(f"{key}: expected integer, got {value!r}")
        elif key == "keywords_description":
            if value is None:
                value = {}
            if not isinstance(value, dict):
                raise ValidationError("keywords_description: expected object")
            kwargs[key] = {str(k): str(v) for k, v in value.items()}
        else:
            extra[key] = value
    kwargs["extra"] = extra
    return PaperRecord(**kwargs)


def record_to_dict(record: PaperRecord) -> dict:
    """Canonical JSON-ready dict: schema fields in order, extras last (sorted)."""
    out = {name: getattr(record, name) for name in _SCHEMA_FIELDS}
    for key in sorted(record.extra):
        out[key] = record.extra[key]
    return out


def serialize_record(record: PaperRecord) -> str:
    """Canonical single-line serialization; inverse of :func:`parse_record`."""
    return json.dumps(record_to_dict(record), ensure_ascii=False, separators=(",", ":"))


@dataclass
class IngestReport:
    """Per-line failures collected while ingesting a record file."""

    failures: list[tuple[int, str]] = field(default_factory=list)

    def add(self, line_no: int, message: str) -> None:
        self.failures.append((line_no, message))

    def __len__(self) -> int:
        return len(self.failures)


@dataclass
class MetadataFilter:
    """Conjunction of optional record constraints; empty filter matches all.

    Venue codes must come from :data:`VENUES`. Author and paper-name
    matching is case-insensitive substring; keyword matching is exact
    term equality (case-insensitive unless ``case_sensitive_keywords``).
    """

    conferences: set[str] | None = None
    years: set[int] | None = None
    authors: list[str] | None = None
    paper_names: list[str] | None = None
    keywords: list[str] | None = None
    case_sensitive_keywords: bool = False

    def __post_init__(self):
        if self.conferences:
            bad = sorted(set(self.conferences) - set(VENUES))
            if bad:
                raise ValidationError(
                    f"unknown venue code(s): {', '.join(bad)}; "
                    f"must be one of the {len(VENUES)} fixed venues"
                )

    def is_empty(self) -> bool:
        return not (
            self.conferences or self.years or self.authors
            or self.paper_names or self.keywords
        )

    def matches(self, record: PaperRecord) -> bool:
        if self.conferences and record.conference not in self.conferences:
            return False
        if self.years and record.year not in self.years:
            return False
        if self.authors:
            hay = [a.lower() for a in record.authors]
            if not any(any(q.lower() in a for a in hay) for q in self.authors):
                return False
        if self.paper_names:
            name = record.paper_name.lower()
            if not any(q.lower() in name for q in self.paper_names):
                return False
        if self.keywords:
            if self.case_sensitive_keywords:
                have = set(record.keywords)
                want = self.keywords
            else:
                have = {k.lower() for k in record.keywords}
                want = [k.lower() for k in self.keywords]
            if not any(q in have for q in want):
                return False
        return True


@dataclass
class CorpusStore:
    """An ordered, immutable-once-loaded collection of paper records."""

    records: list[PaperRecord] = field(default_factory=list)
    report: IngestReport = field(default_factory=IngestReport)
    location: Path | None = None

    def __len__(self) -> int:
        return len(self.records)

    @property
    def ids(self) -> list[str]:
        return [r.record_id for r in self.records]

    def stats(self) -> dict:
        by_year = Counter(r.year for r in self.records)
        by_venue = Counter(r.conference for r in self.records)
        return {
            "total": len(self.records),
            "by_year": {str(y): by_year[y] for y in sorted(by_year)},
            "by_venue": {v: by_venue[v] for v in sorted(by_venue)},
            "failures": len(self.report),
        }

    def by_id(self, record_id: str) -> PaperRecord:
        try:
            return self._index[record_id]
        except AttributeError:
            self._index = {r.record_id: r for r in self.records}
            return self._index[record_id]

    @classmethod
    def ingest(cls, path: str | Path) -> "CorpusStore":
        """Read a line-delimited record file, collecting per-line failures.

        Every valid line is stored; malformed lines, records failing
        validation, and duplicate record_ids are skipped and reported,
        so len(records) + len(report) equals the number of input lines.
        """
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise StoreError(f"cannot read {path}: {exc}") from exc

        store = cls()
        seen: set[str] = set()
        for line_no, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                store.report.add(line_no, "empty line")
                continue
            try:
                record = parse_record(line)
            except (RecordParseError, ValidationError) as exc:
                store.report.add(line_no, str(exc))
                continue
            if record.record_id in seen:
                store.report.add(
                    line_no, f"duplicate record_id: {record.record_id}"
                )
                continue
            seen.add(record.record_id)
            store.records.append(record)
        if store.report:
            logger.warning(
                "ingest: %d of %d lines failed", len(store.report),
                len(store.records) + len(store.report),
            )
        return store

    def save(self, store_dir: str | Path) -> Path:
        """Write records.jsonl, stats.json, and errors.log under store_dir."""
        store_dir = Path(store_dir)
        store_dir.mkdir(parents=True, exist_ok=True)
        with open(store_dir / "records.jsonl", "w", encoding="utf-8") as fh:
            for record in self.records:
                fh.write(serialize_record(record) + "\n")
        with open(store_dir / "stats.json", "w", encoding="utf-8") as fh:
            json.dump(self.stats(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        with open(store_dir / "errors.log", "w", encoding="utf-8") as fh:
            for line_no, message in self.report.failures:
                fh.write(f"line {line_no}: {message}\n")
        self.location = store_dir
        return store_dir

    @classmethod
    def load(cls, store_dir: str | Path) -> "CorpusStore":
        store_dir = Path(store_dir)
        records_path = store_dir / "records.jsonl"
        if not records_path.exists():
            raise StoreError(f"no records.jsonl in {store_dir}; run ingest first")
        store = cls.ingest(records_path)
        if store.report:
            raise StoreError(
                f"corrupt store {store_dir}: {len(store.report)} unreadable lines"
            )
        store.location = store_dir
        return store


def ingest_corpus(path: str | Path) -> CorpusStore:
    """Read a line-delimited record file; see :meth:`CorpusStore.ingest`."""
    return CorpusStore.ingest(path)


def filter_metadata(store: CorpusStore, f: MetadataFilter) -> list[PaperRecord]:
    """Records satisfying every present constraint, in original order."""
    if f.is_empty():
        return list(store.records)
    return [r for r in store.records if f.matches(r)]
