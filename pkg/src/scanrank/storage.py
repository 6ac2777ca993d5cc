"""Bit-exact file formats: scan archives, dataset manifests, results files.

Archive layout (all little-endian):
    magic "SGV1" | N:u32 | d':u32 | d:u32 | id_len:u32 | id bytes (UTF-8) |
    points N*3 f32 row-major | features N*d' f32 row-major | descriptor d f32 |
    gt_pose 16 f32 row-major 4x4 homogeneous | geo_location 3 f32

Manifest: UTF-8 text, one `<role> <id> <relative-path>` record per line with
role `db` or `query`; `#` starts a comment line.

Results file: newline-delimited JSON records with deterministic key order; a
leading header record carries the run configuration, per-query records follow,
and a summary record closes the file.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    DimMismatchError,
    DuplicateIdError,
    InconsistentDimsError,
    IoError,
    MagicMismatchError,
    MissingFileError,
    TruncatedFileError,
)
from .geometry import ROTATION_TOL_F32, RigidTransform, ScanRecord

MAGIC = b"SGV1"
_HEADER = struct.Struct("<4sIIII")


def write_scan(path, record: ScanRecord) -> None:
    """Serialize one record; floats are stored exactly as the record holds them."""
    path = Path(path)
    id_bytes = record.id.encode("utf-8")
    n, dp = record.local_features.shape
    d = record.global_descriptor.shape[0]
    pose32 = record.gt_pose.matrix4().astype(np.float32)
    parts = [
        _HEADER.pack(MAGIC, n, dp, d, len(id_bytes)),
        id_bytes,
        np.ascontiguousarray(record.cloud, dtype="<f4").tobytes(),
        np.ascontiguousarray(record.local_features, dtype="<f4").tobytes(),
        np.ascontiguousarray(record.global_descriptor, dtype="<f4").tobytes(),
        np.ascontiguousarray(pose32, dtype="<f4").tobytes(),
        np.ascontiguousarray(record.geo_location, dtype="<f4").tobytes(),
    ]
    try:
        path.write_bytes(b"".join(parts))
    except OSError as exc:
        raise IoError(f"cannot write scan archive {path}: {exc}") from exc


def read_scan(path) -> ScanRecord:
    path = Path(path)
    if not path.exists():
        raise MissingFileError(f"scan archive not found: {path}")
    data = path.read_bytes()
    if len(data) < _HEADER.size:
        raise TruncatedFileError(f"{path}: shorter than header")
    magic, n, dp, d, id_len = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise MagicMismatchError(f"{path}: bad magic {magic!r}")
    if n < 1 or dp < 1 or d < 1:
        raise DimMismatchError(f"{path}: non-positive dims N={n} d'={dp} d={d}")
    off = _HEADER.size
    if len(data) < off + id_len:
        raise TruncatedFileError(f"{path}: id truncated")
    scan_id = data[off:off + id_len].decode("utf-8")
    off += id_len

    counts = (n * 3, n * dp, d, 16, 3)
    total = sum(counts) * 4
    if len(data) - off < total:
        raise TruncatedFileError(
            f"{path}: payload has {len(data) - off} bytes, header declares {total}"
        )
    if len(data) - off > total:
        raise DimMismatchError(
            f"{path}: payload has {len(data) - off} bytes, header declares {total}"
        )

    def take(count, shape):
        nonlocal off
        a = np.frombuffer(data, dtype="<f4", count=count, offset=off).reshape(shape)
        off += count * 4
        return a

    cloud = take(n * 3, (n, 3))
    feats = take(n * dp, (n, dp))
    desc = take(d, (d,))
    pose = take(16, (4, 4)).astype(np.float64)
    geo = take(3, (3,))
    gt_pose = RigidTransform.from_matrix(pose, orthonormal_tol=ROTATION_TOL_F32)
    return ScanRecord(scan_id, cloud, feats, desc, gt_pose, geo)


@dataclass(frozen=True)
class DatasetManifest:
    """Parsed manifest: ordered (id, path) per role, plus declared dims."""

    database: tuple[tuple[str, Path], ...]
    queries: tuple[tuple[str, Path], ...]

    @property
    def database_ids(self) -> tuple[str, ...]:
        return tuple(i for i, _ in self.database)

    @property
    def query_ids(self) -> tuple[str, ...]:
        return tuple(i for i, _ in self.queries)


def read_manifest(path) -> DatasetManifest:
    path = Path(path)
    if not path.exists():
        raise MissingFileError(f"manifest not found: {path}")
    base = path.parent
    db: list[tuple[str, Path]] = []
    queries: list[tuple[str, Path]] = []
    seen: set[str] = set()
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        if len(fields) != 3:
            raise IoError(f"{path}:{lineno}: expected '<role> <id> <path>', got {raw!r}")
        role, scan_id, rel = fields
        if scan_id in seen:
            raise DuplicateIdError(f"{path}:{lineno}: duplicate id {scan_id!r}")
        seen.add(scan_id)
        target = base / rel
        if role == "db":
            db.append((scan_id, target))
        elif role == "query":
            queries.append((scan_id, target))
        else:
            raise IoError(f"{path}:{lineno}: unknown role {role!r}")
    return DatasetManifest(tuple(db), tuple(queries))


def load_dataset(manifest_path) -> tuple[list[ScanRecord], list[ScanRecord]]:
    """Load all scans in manifest order; checks ids and dim consistency."""
    manifest = read_manifest(manifest_path)

    def load(entries):
        records = []
        for scan_id, p in entries:
            if not p.exists():
                raise MissingFileError(f"scan file missing for {scan_id!r}: {p}")
            rec = read_scan(p)
            if rec.id != scan_id:
                raise IoError(f"{p}: archive id {rec.id!r} != manifest id {scan_id!r}")
            records.append(rec)
        return records

    database = load(manifest.database)
    queries = load(manifest.queries)
    dims = {(r.feature_dim, r.descriptor_dim) for r in database + queries}
    if len(dims) > 1:
        raise InconsistentDimsError(f"mixed (d', d) across dataset: {sorted(dims)}")
    return database, queries


@dataclass
class ResultsReport:
    """In-memory form of a results file."""

    config: dict
    per_query: list[dict] = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    timing: dict = field(default_factory=dict)


def _dump(kind: str, payload: dict) -> str:
    return json.dumps({"kind": kind, **payload}, sort_keys=True)


def write_results(path, report: ResultsReport) -> None:
    """Write header, per-query, timing and summary records, one JSON per line.

    Key order is sorted so identical reports produce identical bytes. The
    summary record carries no timing fields; aggregate timings go into a
    separate record so summaries compare bytewise across hosts.
    """
    lines = [_dump("header", {"config": report.config})]
    lines += [_dump("query", q) for q in report.per_query]
    if report.timing:
        lines.append(_dump("timing", report.timing))
    lines.append(_dump("summary", {"summary": report.summary}))
    try:
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot write results to {path}: {exc}") from exc


def read_results(path) -> ResultsReport:
    path = Path(path)
    if not path.exists():
        raise MissingFileError(f"results file not found: {path}")
    config: dict = {}
    summary: dict = {}
    timing: dict = {}
    per_query: list[dict] = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise IoError(f"{path}:{lineno}: invalid record: {exc}") from exc
        kind = rec.pop("kind", None)
        if kind == "header":
            config = rec["config"]
        elif kind == "query":
            per_query.append(rec)
        elif kind == "timing":
            timing = rec
        elif kind == "summary":
            summary = rec["summary"]
        else:
            raise IoError(f"{path}:{lineno}: unknown record kind {kind!r}")
    return ResultsReport(config=config, per_query=per_query, summary=summary, timing=timing)


def summary_line(path) -> str:
    """Return the raw summary record line (used for byte-level comparisons)."""
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.startswith('{"kind": "summary"'):
            return line
    raise IoError(f"{path}: no summary record")
