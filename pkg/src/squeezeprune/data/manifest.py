"""Dataset manifest: CSV with header ``path,identity,pose,split``."""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

POSES = ("frontal", "threequarter", "profile")
SPLITS = ("train", "test")
HEADER = ["path", "identity", "pose", "split"]


class DataError(ValueError):
    """Bad dataset content: manifest, images or class counts."""


@dataclass(frozen=True)
class ManifestRow:
    path: str
    identity: str
    pose: str
    split: str


@dataclass
class Manifest:
    rows: list[ManifestRow]
    root: Path = field(default_factory=Path)

    def __len__(self) -> int:
        return len(self.rows)

    def select(self, split: str) -> list[ManifestRow]:
        return [r for r in self.rows if r.split == split]

    def identities(self, split: str | None = None) -> list[str]:
        """Identities in order of first appearance."""
        seen = {}
        for r in self.rows:
            if split is None or r.split == split:
                seen.setdefault(r.identity, None)
        return list(seen)

    def counts(self, split: str | None = None) -> Counter:
        return Counter((r.identity, r.pose) for r in self.rows if split is None or r.split == split)

    def resolve(self, row: ManifestRow) -> Path:
        return self.root / row.path


def validate_rows(rows: list[ManifestRow], line_numbers: list[int] | None = None) -> None:
    if not rows:
        raise DataError("manifest has no rows")
    line_numbers = line_numbers or list(range(2, len(rows) + 2))
    paths: dict[str, int] = {}
    splits_of: dict[str, tuple[str, int]] = {}
    for row, line in zip(rows, line_numbers):
        if row.path in paths:
            raise DataError(f"row {line}: duplicate path {row.path!r} (first at row {paths[row.path]})")
        paths[row.path] = line
        if row.pose not in POSES:
            raise DataError(f"row {line}: unknown pose tag {row.pose!r}")
        if row.split not in SPLITS:
            raise DataError(f"row {line}: unknown split tag {row.split!r}")
        prev = splits_of.setdefault(row.identity, (row.split, line))
        if prev[0] != row.split:
            raise DataError(f"row {line}: identity {row.identity!r} is in split {row.split!r} "
                            f"but row {prev[1]} puts it in {prev[0]!r}")


def load_manifest(path) -> Manifest:
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [h.strip() for h in header] != HEADER:
                raise DataError(f"{path}: header must be {','.join(HEADER)}, got {header}")
            rows, lines = [], []
            for line, rec in enumerate(reader, start=2):
                if not rec:
                    continue
                if len(rec) != 4:
                    raise DataError(f"{path}: row {line}: expected 4 fields, got {len(rec)}")
                rows.append(ManifestRow(*(v.strip() for v in rec)))
                lines.append(line)
    except OSError as exc:
        raise DataError(f"cannot read manifest {path}: {exc}") from exc
    except UnicodeDecodeError as exc:
        raise DataError(f"{path}: not UTF-8: {exc}") from exc
    validate_rows(rows, lines)
    return Manifest(rows, path.parent)


def write_manifest(path, rows: list[ManifestRow]) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(HEADER)
        for r in rows:
            writer.writerow([r.path, r.identity, r.pose, r.split])


def check_pose_set(manifest: Manifest, split: str = "test", n_per_pose: int | None = None) -> int:
    """Verify every identity of ``split`` has all poses with equal image counts.

    Returns the per-pose count.
    """
    counts = manifest.counts(split)
    ids = manifest.identities(split)
    if not ids:
        raise DataError(f"no identities in split {split!r}")
    expected = n_per_pose if n_per_pose is not None else counts[(ids[0], POSES[0])]
    for ident in ids:
        for pose in POSES:
            if counts[(ident, pose)] != expected:
                raise DataError(f"identity {ident!r} pose {pose!r}: {counts[(ident, pose)]} images, "
                                f"expected {expected}")
    return expected
