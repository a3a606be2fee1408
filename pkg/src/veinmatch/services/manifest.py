"""Dataset manifest loading from CSV files or filename-pattern rules."""

import csv
import re
from pathlib import Path

import structlog
from pydantic import ValidationError

from veinmatch.errors import ConfigError, ProtocolError
from veinmatch.models.evaluation import DatasetManifest, ManifestEntry
from veinmatch.vision.image_io import SUPPORTED_SUFFIXES

MANIFEST_HEADER = ("path", "subject", "hand", "sample")
CASIA_PATTERN = r"(?P<subject>\d+)_(?P<hand>[lr])_\d+_(?P<sample>\d+)"
_REQUIRED_GROUPS = frozenset({"subject", "hand", "sample"})


class ManifestLoader:
    """Builds a DatasetManifest and checks that every referenced image exists.

    Relative CSV paths resolve against the CSV file's directory.
    """

    def __init__(
        self,
        check_paths: bool = True,
        logger: structlog.stdlib.BoundLogger | None = None,
    ) -> None:
        self._check_paths = check_paths
        self._logger = logger or structlog.get_logger(__name__)

    def load(self, source: Path, pattern: str | None = None) -> DatasetManifest:
        """Load a CSV manifest, or scan a directory with ``pattern`` (CASIA naming by default)."""
        if source.is_dir():
            return self.from_directory(source, pattern or CASIA_PATTERN)
        return self.load_csv(source)

    def load_csv(self, path: Path) -> DatasetManifest:
        if not path.is_file():
            raise ProtocolError(f"manifest not found: {path}")
        with path.open(newline="", encoding="utf-8") as handle:
            reader = csv.DictReader(handle)
            if reader.fieldnames is None or tuple(reader.fieldnames) != MANIFEST_HEADER:
                raise ProtocolError(f"manifest header must be {','.join(MANIFEST_HEADER)}, got {reader.fieldnames}")
            rows = list(reader)

        entries = []
        for line, row in enumerate(rows, start=2):
            image_path = Path(row["path"])
            if not image_path.is_absolute():
                image_path = path.parent / image_path
            entries.append(self._entry(str(image_path), row["subject"], row["hand"], row["sample"], f"line {line}"))
        manifest = self._build(entries, parsing_rule="csv")
        self._logger.info(
            "manifest_loaded",
            source=str(path),
            entries=len(manifest),
            identities=len(manifest.identities()),
        )
        return manifest

    def from_directory(self, directory: Path, pattern: str = CASIA_PATTERN) -> DatasetManifest:
        """Parse subject, hand and sample out of every image file name under ``directory``."""
        try:
            rule = re.compile(pattern)
        except re.error as exc:
            raise ConfigError(f"invalid filename pattern '{pattern}': {exc}") from exc
        missing = _REQUIRED_GROUPS - set(rule.groupindex)
        if missing:
            raise ConfigError(f"filename pattern lacks named groups: {', '.join(sorted(missing))}")

        entries = []
        skipped = 0
        for image_path in sorted(directory.rglob("*")):
            if not image_path.is_file() or image_path.suffix.lower() not in SUPPORTED_SUFFIXES:
                continue
            found = rule.fullmatch(image_path.stem)
            if found is None:
                skipped += 1
                continue
            entries.append(
                self._entry(str(image_path), found["subject"], found["hand"], found["sample"], image_path.name)
            )
        manifest = self._build(entries, parsing_rule=pattern)
        self._logger.info(
            "manifest_scanned",
            directory=str(directory),
            entries=len(manifest),
            skipped=skipped,
        )
        return manifest

    def _entry(self, image_path: str, subject: str, hand: str, sample: str, where: str) -> ManifestEntry:
        if self._check_paths and not Path(image_path).is_file():
            raise ProtocolError(f"{where}: image not found: {image_path}")
        try:
            return ManifestEntry(image_path=image_path, subject_id=subject.strip(), hand=hand, sample_index=int(sample))
        except (ValueError, ValidationError) as exc:
            raise ProtocolError(f"{where}: invalid manifest entry: {exc}") from exc

    def _build(self, entries: list[ManifestEntry], parsing_rule: str) -> DatasetManifest:
        try:
            return DatasetManifest(entries=entries, parsing_rule=parsing_rule)
        except ValidationError as exc:
            raise ProtocolError(f"invalid manifest: {exc.errors()[0]['msg']}") from exc


def write_manifest_csv(manifest: DatasetManifest, path: Path) -> None:
    """Write ``path,subject,hand,sample`` rows; image paths are stored relative to the CSV when possible."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(MANIFEST_HEADER)
        for entry in manifest.entries:
            image_path = Path(entry.image_path)
            if image_path.is_relative_to(path.parent):
                image_path = image_path.relative_to(path.parent)
            writer.writerow([image_path.as_posix(), entry.subject_id, entry.hand.value, entry.sample_index])
