"""Corpus manifests: map image files to patients, sequences, sites and labels.

A manifest is one UTF-8 CSV file with columns image_id, path, patient_id,
sequence_id, dataset_id, site, label; lines starting with '#' are comments.
Image paths are resolved relative to the manifest file's directory, so a
corpus directory can be moved or shared as a unit. Labels are stored per
image row but are semantically per sequence (one sequence is acquired at one
site on one patient) and are cross-checked at load time.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, NamedTuple, Optional, Sequence

import numpy as np
from PIL import Image, UnidentifiedImageError

from . import LABELS, MANIFEST_COLUMNS

log = logging.getLogger(__name__)

# corpus shapes reported for the two clinical datasets; other corpora only warn
PAPER_SHAPES = {"OC": (12, 116), "VC": (5, 73)}


class ManifestError(ValueError):
    """Unreadable, malformed or internally inconsistent manifest."""


@dataclass(frozen=True)
class ImageRecord:
    """One labeled image of a corpus."""

    image_id: str
    path: Path
    patient_id: str
    sequence_id: str
    dataset_id: str
    site: str
    label: str


class DatasetSummary(NamedTuple):
    n_patients: int
    n_sequences: int
    n_images: int


@dataclass(frozen=True)
class Manifest:
    """Immutable, validated collection of image records."""

    records: tuple[ImageRecord, ...]

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def dataset_ids(self) -> list[str]:
        seen = dict.fromkeys(r.dataset_id for r in self.records)
        return list(seen)

    def patients(self, dataset_ids: Optional[Iterable[str]] = None) -> list[str]:
        """Sorted distinct patient ids, optionally restricted to datasets."""
        wanted = None if dataset_ids is None else set(dataset_ids)
        return sorted({r.patient_id for r in self.records
                       if wanted is None or r.dataset_id in wanted})

    def summaries(self) -> dict[str, DatasetSummary]:
        """Per-dataset (patients, sequences, images), recomputed from records."""
        out: dict[str, DatasetSummary] = {}
        for ds in self.dataset_ids():
            recs = [r for r in self.records if r.dataset_id == ds]
            out[ds] = DatasetSummary(
                n_patients=len({r.patient_id for r in recs}),
                n_sequences=len({r.sequence_id for r in recs}),
                n_images=len(recs),
            )
        return out

    def validate(self) -> list[str]:
        """Check invariants; returns advisory warnings, raises on violations."""
        seen_ids: set[str] = set()
        seq_patient: dict[str, str] = {}
        seq_label: dict[str, str] = {}
        for i, rec in enumerate(self.records):
            where = f"record {i} ({rec.image_id})"
            if rec.image_id in seen_ids:
                raise ManifestError(f"{where}: duplicate image_id")
            seen_ids.add(rec.image_id)
            if rec.label not in LABELS:
                raise ManifestError(
                    f"{where}: label {rec.label!r} not in {LABELS}")
            if not rec.patient_id or not rec.sequence_id or not rec.dataset_id:
                raise ManifestError(f"{where}: empty patient/sequence/dataset id")
            prev = seq_patient.setdefault(rec.sequence_id, rec.patient_id)
            if prev != rec.patient_id:
                raise ManifestError(
                    f"{where}: sequence maps to two patients "
                    f"({prev!r} and {rec.patient_id!r})")
            prev = seq_label.setdefault(rec.sequence_id, rec.label)
            if prev != rec.label:
                raise ManifestError(
                    f"{where}: sequence maps to two labels "
                    f"({prev!r} and {rec.label!r})")

        warnings = []
        for ds, (patients, sequences) in PAPER_SHAPES.items():
            summary = self.summaries().get(ds)
            if summary and (summary.n_patients, summary.n_sequences) != (patients, sequences):
                warnings.append(
                    f"dataset {ds}: {summary.n_patients} patients / "
                    f"{summary.n_sequences} sequences, clinical reference shape "
                    f"is {patients} / {sequences}")
        return warnings


def load_image(path: Path) -> np.ndarray:
    """Read a single-channel 8-bit image as a (H, W) uint8 array."""
    try:
        with Image.open(path) as img:
            if img.mode != "L":
                raise ManifestError(
                    f"{path}: mode {img.mode!r}, expected 8-bit grayscale ('L')")
            return np.asarray(img, dtype=np.uint8)
    except (OSError, UnidentifiedImageError) as exc:
        raise ManifestError(f"{path}: cannot decode image ({exc})") from exc


def save_image(path: Path, pixels: np.ndarray) -> None:
    if pixels.dtype != np.uint8 or pixels.ndim != 2:
        raise ValueError("expected a 2-D uint8 array")
    Image.fromarray(pixels, mode="L").save(path)


def load_manifest(path, check_images: bool = True) -> Manifest:
    """Load and validate a manifest CSV.

    Parameters
    ----------
    path : str or Path
        Manifest file; image paths inside are taken relative to its parent.
    check_images : bool
        Also verify that every referenced file exists and decodes as 8-bit
        grayscale. Disable for speed when the corpus is known-good.
    """
    path = Path(path)
    if not path.is_file():
        raise ManifestError(f"manifest not found: {path}")
    base = path.resolve().parent

    records = []
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [(i + 1, row) for i, row in enumerate(csv.reader(fh))
                if row and not row[0].lstrip().startswith("#")]
    if not rows:
        raise ManifestError(f"{path}: empty manifest")
    header_no, header = rows[0]
    if tuple(h.strip() for h in header) != MANIFEST_COLUMNS:
        raise ManifestError(
            f"{path} line {header_no}: header {header} does not match "
            f"{list(MANIFEST_COLUMNS)}")
    for line_no, row in rows[1:]:
        if len(row) != len(MANIFEST_COLUMNS):
            raise ManifestError(
                f"{path} line {line_no}: expected {len(MANIFEST_COLUMNS)} "
                f"columns, got {len(row)}")
        values = [v.strip() for v in row]
        rec = ImageRecord(
            image_id=values[0],
            path=(base / values[1]).resolve(),
            patient_id=values[2],
            sequence_id=values[3],
            dataset_id=values[4],
            site=values[5],
            label=values[6],
        )
        if check_images:
            if not rec.path.is_file():
                raise ManifestError(
                    f"{path} line {line_no}: missing image file {rec.path}")
            load_image(rec.path)
        records.append(rec)

    manifest = Manifest(records=tuple(records))
    for warning in manifest.validate():
        log.warning("%s: %s", path, warning)
    return manifest


def save_manifest(manifest: Manifest, path) -> None:
    """Write a manifest CSV with paths relative to its directory."""
    path = Path(path)
    base = path.resolve().parent
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(MANIFEST_COLUMNS)
        for rec in manifest.records:
            try:
                rel = rec.path.relative_to(base)
            except ValueError:
                rel = Path(os_relpath(rec.path, base))
            writer.writerow([rec.image_id, rel.as_posix(), rec.patient_id,
                             rec.sequence_id, rec.dataset_id, rec.site,
                             rec.label])


def os_relpath(target: Path, base: Path) -> str:
    import os

    return os.path.relpath(target, base)


def select(manifest: Manifest, dataset_ids: Iterable[str],
           patient_ids: Optional[Iterable[str]] = None) -> Manifest:
    """Filter a manifest by dataset ids (and optionally patients).

    Record order is preserved. Selecting datasets not present in the manifest
    is an error; an empty result only warns.
    """
    wanted = set(dataset_ids)
    present = set(manifest.dataset_ids())
    unknown = wanted - present
    if unknown:
        raise ManifestError(f"unknown dataset_id(s): {sorted(unknown)}")
    patients = None if patient_ids is None else set(patient_ids)
    records = tuple(
        r for r in manifest.records
        if r.dataset_id in wanted and (patients is None or r.patient_id in patients)
    )
    if not records:
        log.warning("selection %s / %s is empty", sorted(wanted),
                    "all patients" if patients is None else sorted(patients))
    return Manifest(records=records)
