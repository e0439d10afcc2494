"""File storage for matrices, manifests, result bundles and benchmark tables."""

import csv
import hashlib
import json
import logging
from collections.abc import Sequence
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Optional

import frontmatter
import numpy as np
from pydantic import BaseModel, ValidationError
from slugify import slugify

from . import __version__
from .errors import StorageError
from .models import BenchmarkCell, EvalResult, Manifest, ReplicateRecord, ResultBundle

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"


def write_matrix(path: Path, A: np.ndarray) -> Path:
    """Write a matrix as `# rows cols` followed by comma-delimited rows."""
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    lines = [f"# {A.shape[0]} {A.shape[1]}"]
    lines.extend(",".join("%.17g" % value for value in row) for row in A)
    try:
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError as e:
        raise StorageError(f"Cannot write matrix file {path}: {e}") from e
    return Path(path)


def read_matrix(path: Path) -> np.ndarray:
    """Read a matrix file and check it against its declared shape."""
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise StorageError(f"Cannot read matrix file {path}: {e}") from e

    lines = [line.strip() for line in lines if line.strip()]
    if not lines or not lines[0].startswith("#"):
        raise StorageError(f"{path}: missing '# rows cols' header")
    try:
        rows, cols = (int(token) for token in lines[0].lstrip("#").split())
        values = [[float(token) for token in line.split(",")] for line in lines[1:]]
    except ValueError as e:
        raise StorageError(f"{path}: malformed matrix file: {e}") from e

    if len(values) != rows or any(len(row) != cols for row in values):
        raise StorageError(f"{path}: content does not match the declared shape {rows} x {cols}")
    return np.array(values, dtype=np.float64).reshape(rows, cols)


def _canonical(data: Any) -> str:
    return json.dumps(data, sort_keys=True, separators=(",", ":"), default=str)


def payload_hash(manifest: Manifest) -> str:
    """SHA-256 of the manifest without its timestamp and hash fields."""
    payload = manifest.model_dump(mode="json", exclude={"created_at", "payload_hash"})
    return hashlib.sha256(_canonical(payload).encode("utf-8")).hexdigest()


def _write_json(path: Path, data: Any) -> Path:
    try:
        path.write_text(json.dumps(data, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    except OSError as e:
        raise StorageError(f"Cannot write {path}: {e}") from e
    return path


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return "%.17g" % value
    return str(value)


class RunStorage:
    """Writes the files of one command run into an output directory.

    Every written file is recorded so the manifest can list them.
    """

    def __init__(self, out_dir: Path):
        self.out_dir = Path(out_dir)
        try:
            self.out_dir.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise StorageError(f"Cannot create output directory {out_dir}: {e}") from e
        self.files: list[str] = []

    def _record(self, path: Path) -> Path:
        if path.name not in self.files:
            self.files.append(path.name)
        return path

    def save_matrix(self, name: str, A: np.ndarray) -> Path:
        return self._record(write_matrix(self.out_dir / name, A))

    def save_json(self, name: str, data: Any) -> Path:
        if isinstance(data, BaseModel):
            data = data.model_dump(mode="json")
        return self._record(_write_json(self.out_dir / name, data))

    def save_table(self, name: str, header: Sequence[str], rows: Sequence[Sequence[Any]]) -> Path:
        """Tab-separated table with a header row."""
        path = self.out_dir / name
        try:
            with open(path, "w", encoding="utf-8", newline="") as f:
                writer = csv.writer(f, delimiter="\t", lineterminator="\n")
                writer.writerow(header)
                writer.writerows([_cell(value) for value in row] for row in rows)
        except OSError as e:
            raise StorageError(f"Cannot write {path}: {e}") from e
        return self._record(path)

    def save_result(self, bundle: ResultBundle) -> list[Path]:
        """result.json, A_hat.txt and, when present, S_hat.txt and nmi.tsv.

        Timing is left out of result.json so identical runs give identical files.
        """
        data = bundle.model_dump(
            exclude={"A_hat": True, "S_hat": True, "diagnostics": {"elapsed_seconds"}}
        )
        data["A_hat_file"] = "A_hat.txt"
        data["S_hat_file"] = "S_hat.txt" if bundle.S_hat is not None else None
        paths = [self.save_json("result.json", data), self.save_matrix("A_hat.txt", bundle.A_hat)]
        if bundle.S_hat is not None:
            paths.append(self.save_matrix("S_hat.txt", bundle.S_hat))
        if bundle.nmi_profile is not None:
            profile = bundle.nmi_profile
            paths.append(
                self.save_table("nmi.tsv", ["K", "NMI"], list(zip(profile.k_range, profile.nmi)))
            )
        return paths

    def save_summary(self, bundle: ResultBundle, created_at: Optional[datetime] = None) -> Path:
        """Human-readable markdown summary with YAML front matter, angles in degrees."""
        created_at = created_at or datetime.now(timezone.utc)
        diag = bundle.diagnostics
        lines = [
            f"# Decomposition: K = {bundle.chosen_K}",
            "",
            f"Fit error: {np.degrees(bundle.fit_error):.4f} degrees (sector-size weighted)",
            "",
            "| column | selected ray | "
            + " | ".join(f"x{i}" for i in range(bundle.A_hat.shape[0]))
            + " |",
            "|---|---|" + "---|" * bundle.A_hat.shape[0],
        ]
        for k, ray in enumerate(bundle.selected_edges):
            values = " | ".join(f"{v:.4f}" for v in bundle.A_hat[:, k])
            lines.append(f"| {k} | {ray} | {values} |")
        if bundle.nmi_profile is not None:
            lines += ["", "| K | NMI |", "|---|---|"]
            lines += [
                f"| {k} | {v:.4f} |"
                for k, v in zip(bundle.nmi_profile.k_range, bundle.nmi_profile.nmi)
            ]
        if bundle.S_hat is None:
            lines += ["", "Sources were not recovered (mixing matrix not invertible)."]

        post = frontmatter.Post(
            content="\n".join(lines),
            chosen_K=bundle.chosen_K,
            fit_error_degrees=float(np.degrees(bundle.fit_error)),
            edges_detected=diag.edges_detected,
            distortion=diag.distortion,
            under_determined=diag.under_determined,
            elapsed_seconds=round(diag.elapsed_seconds, 3),
            created_at=created_at.isoformat(),
        )
        path = self.out_dir / "summary.md"
        try:
            path.write_text(frontmatter.dumps(post) + "\n", encoding="utf-8")
        except OSError as e:
            raise StorageError(f"Cannot write {path}: {e}") from e
        return self._record(path)

    def save_evaluation(self, result: EvalResult) -> Path:
        return self.save_json("metrics.json", result)

    def save_benchmark(
        self,
        scenario: str,
        records: Sequence[ReplicateRecord],
        cells: Sequence[BenchmarkCell],
    ) -> list[Path]:
        """Per-replicate log and per-SNR summary table."""
        stem = slugify(f"benchmark {scenario}")
        replicate_fields = list(ReplicateRecord.model_fields)
        cell_fields = list(BenchmarkCell.model_fields)
        return [
            self.save_table(
                f"{stem}-replicates.tsv",
                replicate_fields,
                [[getattr(r, name) for name in replicate_fields] for r in records],
            ),
            self.save_table(
                f"{stem}-summary.tsv",
                cell_fields,
                [[getattr(c, name) for name in cell_fields] for c in cells],
            ),
        ]

    def save_manifest(
        self,
        command: str,
        subcommand: Optional[str] = None,
        seed: int = 0,
        parameters: Optional[dict[str, Any]] = None,
    ) -> Manifest:
        """Write manifest.json listing every file written so far."""
        manifest = Manifest(
            command=command,
            subcommand=subcommand,
            seed=seed,
            parameters=json.loads(_canonical(parameters or {})),
            files=list(self.files),
            version=__version__,
            created_at=datetime.now(timezone.utc),
        )
        manifest.payload_hash = payload_hash(manifest)
        _write_json(self.out_dir / MANIFEST_NAME, manifest.model_dump(mode="json"))
        logger.info(f"Wrote {len(self.files)} files and {MANIFEST_NAME} to {self.out_dir}")
        return manifest


def load_manifest(path: Path) -> Manifest:
    """Read a manifest file or the manifest inside a run directory."""
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    try:
        return Manifest(**json.loads(path.read_text(encoding="utf-8")))
    except OSError as e:
        raise StorageError(f"Cannot read manifest {path}: {e}") from e
    except (json.JSONDecodeError, ValidationError) as e:
        raise StorageError(f"Malformed manifest {path}: {e}") from e


def load_summary(path: Path) -> frontmatter.Post:
    """Read a run summary back with its front matter."""
    try:
        with open(path, encoding="utf-8") as f:
            return frontmatter.load(f)
    except OSError as e:
        raise StorageError(f"Cannot read summary {path}: {e}") from e


def read_table(path: Path) -> list[dict[str, str]]:
    """Read a tab-separated table written by `RunStorage.save_table`."""
    try:
        with open(path, encoding="utf-8", newline="") as f:
            return list(csv.DictReader(f, delimiter="\t"))
    except OSError as e:
        raise StorageError(f"Cannot read table {path}: {e}") from e
