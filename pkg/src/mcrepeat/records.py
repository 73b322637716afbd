"""Prediction records: the data model shared by evaluation and simulation.

A record is one image's post-activation model output for one forward pass.
MC dropout samples carry ``mc_index >= 0``; a dropout-disabled pass carries
the ``DETERMINISTIC`` sentinel, stored as ``-1`` in files.
"""

from __future__ import annotations

import csv
import json
import math
from collections import defaultdict
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator, Sequence

from .errors import SchemaError

DETERMINISTIC = -1
PROB_TOL = 1e-6

BASE_COLUMNS = ("subject_id", "session_id", "image_id", "head", "k", "mc_index")
LABEL_COLUMNS = ("subject_id", "session_id", "image_id", "label")


class HeadType(str, Enum):
    BINARY = "binary"
    MULTICLASS = "multiclass"
    ORDINAL = "ordinal"
    REGRESSION = "regression"


@dataclass(frozen=True)
class HeadKind:
    """Output head of a predictor: its variant and number of classes ``k``."""

    variant: HeadType
    k: int

    def __post_init__(self):
        object.__setattr__(self, "variant", HeadType(self.variant))
        if not isinstance(self.k, int) or self.k < 2:
            raise SchemaError(f"k must be an integer >= 2, got {self.k!r}")
        if self.variant is HeadType.BINARY and self.k != 2:
            raise SchemaError(f"binary head requires k=2, got k={self.k}")

    @classmethod
    def binary(cls):
        return cls(HeadType.BINARY, 2)

    @classmethod
    def multiclass(cls, k):
        return cls(HeadType.MULTICLASS, k)

    @classmethod
    def ordinal(cls, k):
        return cls(HeadType.ORDINAL, k)

    @classmethod
    def regression(cls, k):
        return cls(HeadType.REGRESSION, k)

    @property
    def n_outputs(self) -> int:
        if self.variant is HeadType.MULTICLASS:
            return self.k
        if self.variant is HeadType.ORDINAL:
            return self.k - 1
        return 1

    @property
    def value_range(self) -> tuple[float, float]:
        """Nominal range of the severity score."""
        if self.variant is HeadType.BINARY:
            return 0.0, 1.0
        return 0.0, float(self.k - 1)

    @property
    def is_probabilistic(self) -> bool:
        return self.variant is not HeadType.REGRESSION

    def __str__(self):
        return f"{self.variant.value}(k={self.k})"


@dataclass(frozen=True)
class PredictionRecord:
    subject_id: str
    session_id: str
    image_id: str
    head: HeadKind
    mc_index: int
    outputs: tuple[float, ...]

    @property
    def deterministic(self) -> bool:
        return self.mc_index == DETERMINISTIC

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.subject_id, self.session_id, self.image_id)


def validate_record(record: PredictionRecord) -> None:
    """Raise :class:`SchemaError` if ``record`` violates the head's output contract."""
    head = record.head
    outs = record.outputs
    if not isinstance(record.mc_index, int) or record.mc_index < DETERMINISTIC:
        raise SchemaError(f"mc_index must be an integer >= 0 or {DETERMINISTIC}, got {record.mc_index!r}")
    if len(outs) != head.n_outputs:
        raise SchemaError(
            f"{head} expects {head.n_outputs} output(s), got {len(outs)}"
        )
    if not all(math.isfinite(v) for v in outs):
        raise SchemaError("outputs must be finite")
    if head.is_probabilistic:
        for v in outs:
            if v < 0.0 or v > 1.0:
                raise SchemaError(f"probability {v!r} outside [0, 1]")
    if head.variant is HeadType.MULTICLASS:
        total = math.fsum(outs)
        if abs(total - 1.0) > PROB_TOL:
            raise SchemaError(f"multiclass probabilities sum to {total!r}, expected 1")


class RecordSet(Sequence[PredictionRecord]):
    """Immutable, validated sequence of records sharing one head."""

    def __init__(self, records: Iterable[PredictionRecord] = (), head: HeadKind | None = None):
        recs = tuple(records)
        for i, rec in enumerate(recs):
            if head is None:
                head = rec.head
            elif rec.head != head:
                raise SchemaError(f"record {i}: mixed heads in one record set ({rec.head} vs {head})")
            try:
                validate_record(rec)
            except SchemaError as exc:
                raise SchemaError(f"record {i}: {exc}") from None
        self._records = recs
        self.head = head

    def __getitem__(self, i):
        return self._records[i]

    def __len__(self):
        return len(self._records)

    def __iter__(self) -> Iterator[PredictionRecord]:
        return iter(self._records)

    def __eq__(self, other):
        if not isinstance(other, RecordSet):
            return NotImplemented
        return self._records == other._records

    def __repr__(self):
        return f"RecordSet({len(self)} records, head={self.head})"


@dataclass(frozen=True)
class SessionGroup:
    """All images of one subject acquired in one session."""

    subject_id: str
    session_id: str
    head: HeadKind
    images: tuple[tuple[str, tuple[PredictionRecord, ...]], ...]

    @property
    def image_ids(self) -> tuple[str, ...]:
        return tuple(image_id for image_id, _ in self.images)

    @property
    def is_test_retest(self) -> bool:
        return len(self.images) >= 2


def group_by_session(records: Iterable[PredictionRecord]) -> list[SessionGroup]:
    """Partition records into session groups ordered by (subject, session, image)."""
    buckets: dict[tuple[str, str], dict[str, list[PredictionRecord]]] = defaultdict(lambda: defaultdict(list))
    heads = {}
    for rec in records:
        buckets[(rec.subject_id, rec.session_id)][rec.image_id].append(rec)
        heads[(rec.subject_id, rec.session_id)] = rec.head
    groups = []
    for key in sorted(buckets):
        images = buckets[key]
        groups.append(
            SessionGroup(
                subject_id=key[0],
                session_id=key[1],
                head=heads[key],
                images=tuple((img, tuple(images[img])) for img in sorted(images)),
            )
        )
    return groups


# -- file I/O -----------------------------------------------------------------


def _parse_float(text, row, column):
    try:
        return float(text)
    except (TypeError, ValueError):
        raise SchemaError(f"row {row}: column {column!r} is not a number: {text!r}") from None


def _parse_int(text, row, column):
    try:
        return int(text)
    except (TypeError, ValueError):
        raise SchemaError(f"row {row}: column {column!r} is not an integer: {text!r}") from None


def _make_record(fields: dict, outputs: list, row: int) -> PredictionRecord:
    for name in BASE_COLUMNS:
        if fields.get(name) in (None, ""):
            raise SchemaError(f"row {row}: missing field {name!r}")
    try:
        head = HeadKind(HeadType(str(fields["head"]).strip().lower()), _parse_int(fields["k"], row, "k"))
    except ValueError as exc:
        raise SchemaError(f"row {row}: {exc}") from None
    rec = PredictionRecord(
        subject_id=str(fields["subject_id"]),
        session_id=str(fields["session_id"]),
        image_id=str(fields["image_id"]),
        head=head,
        mc_index=_parse_int(fields["mc_index"], row, "mc_index"),
        outputs=tuple(outputs),
    )
    try:
        validate_record(rec)
    except SchemaError as exc:
        raise SchemaError(f"row {row}: {exc}") from None
    return rec


def _finish(records: list[PredictionRecord], path) -> RecordSet:
    head = None
    for i, rec in enumerate(records):
        if head is None:
            head = rec.head
        elif rec.head != head:
            raise SchemaError(f"{path}: row {i + 1}: mixed heads in one file ({rec.head} vs {head})")
    return RecordSet(records, head=head)


def _read_csv(path: Path) -> RecordSet:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            return RecordSet()
        header = [h.strip() for h in header]
        missing = [c for c in BASE_COLUMNS if c not in header]
        if missing:
            raise SchemaError(f"{path}: header is missing columns {missing}")
        out_cols = sorted(
            (c for c in header if c.startswith("out_")), key=lambda c: _parse_int(c[4:], 0, c)
        )
        if [c for c in out_cols] != [f"out_{i}" for i in range(len(out_cols))]:
            raise SchemaError(f"{path}: output columns must be out_0..out_N without gaps")
        index = {name: header.index(name) for name in header}
        records = []
        for row_no, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) != len(header):
                raise SchemaError(f"{path}: row {row_no}: expected {len(header)} columns, got {len(row)}")
            fields = {name: row[index[name]].strip() for name in BASE_COLUMNS}
            cells = [row[index[c]].strip() for c in out_cols]
            n_used = len(cells)
            while n_used and cells[n_used - 1] == "":
                n_used -= 1
            if any(c == "" for c in cells[:n_used]):
                raise SchemaError(f"{path}: row {row_no}: empty output column before a filled one")
            outputs = [_parse_float(c, row_no, f"out_{i}") for i, c in enumerate(cells[:n_used])]
            try:
                records.append(_make_record(fields, outputs, row_no))
            except SchemaError as exc:
                raise SchemaError(f"{path}: {exc}") from None
    return _finish(records, path)


def _read_json(path: Path) -> RecordSet:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if not text.strip():
        return RecordSet()
    data = json.loads(text)
    if not isinstance(data, list):
        raise SchemaError(f"{path}: expected a JSON array of records")
    records = []
    for row_no, obj in enumerate(data, start=1):
        if not isinstance(obj, dict):
            raise SchemaError(f"{path}: row {row_no}: expected an object")
        outputs = obj.get("outputs")
        if not isinstance(outputs, list):
            raise SchemaError(f"{path}: row {row_no}: missing field 'outputs'")
        try:
            values = [_parse_float(v, row_no, "outputs") for v in outputs]
            records.append(_make_record(obj, values, row_no))
        except SchemaError as exc:
            raise SchemaError(f"{path}: {exc}") from None
    return _finish(records, path)


def _infer_format(path: Path, fmt: str | None) -> str:
    if fmt is None:
        fmt = path.suffix.lstrip(".").lower()
    fmt = fmt.lower()
    if fmt not in ("csv", "json"):
        raise SchemaError(f"unsupported record format {fmt!r} (use csv or json)")
    return fmt


def load_records(path, format: str | None = None) -> RecordSet:
    """Load and validate a prediction file.

    The format is taken from the file suffix unless given explicitly.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    if _infer_format(path, format) == "csv":
        return _read_csv(path)
    return _read_json(path)


def write_records(records: Iterable[PredictionRecord], path, format: str | None = None) -> Path:
    path = Path(path)
    records = list(records)
    if _infer_format(path, format) == "json":
        rows = [
            {
                "subject_id": r.subject_id,
                "session_id": r.session_id,
                "image_id": r.image_id,
                "head": r.head.variant.value,
                "k": r.head.k,
                "mc_index": r.mc_index,
                "outputs": list(r.outputs),
            }
            for r in records
        ]
        path.write_text(json.dumps(rows, indent=1) + "\n", encoding="utf-8")
        return path
    width = max((len(r.outputs) for r in records), default=1)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(list(BASE_COLUMNS) + [f"out_{i}" for i in range(width)])
        for r in records:
            outs = [repr(float(v)) for v in r.outputs]
            outs += [""] * (width - len(outs))
            writer.writerow(
                [r.subject_id, r.session_id, r.image_id, r.head.variant.value, r.head.k, r.mc_index] + outs
            )
    return path


def load_labels(path) -> dict[tuple[str, str, str], int]:
    """Read a label CSV into a mapping ``(subject, session, image) -> label``."""
    path = Path(path)
    labels = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            return labels
        missing = [c for c in LABEL_COLUMNS if c not in [f.strip() for f in reader.fieldnames]]
        if missing:
            raise SchemaError(f"{path}: label header is missing columns {missing}")
        for row_no, row in enumerate(reader, start=1):
            row = {k.strip(): (v or "").strip() for k, v in row.items()}
            key = (row["subject_id"], row["session_id"], row["image_id"])
            if key in labels:
                raise SchemaError(f"{path}: row {row_no}: duplicate label for image {key}")
            labels[key] = _parse_int(row["label"], row_no, "label")
    return labels


def write_labels(labels: dict[tuple[str, str, str], int], path) -> Path:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(LABEL_COLUMNS)
        for key in sorted(labels):
            writer.writerow([*key, int(labels[key])])
    return path
