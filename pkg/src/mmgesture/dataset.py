"""Dataset manifest, sample loading and deterministic splits.

A manifest is a JSON file listing every simulated sample (id, label,
preset, seed, anchor, noise level, CSV path) plus the chirp profile hash.
It is written atomically after all CSVs exist, so an interrupted run never
leaves a loadable manifest behind.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidArgumentError, ManifestError
from .pointcloud import GestureSample, build_sample, read_frames_csv
from .scene import GESTURE_LABELS, INTERFERENCE_LABELS  # canonical class order

MANIFEST_VERSION = 1
TRAINABLE_LABELS = GESTURE_LABELS + INTERFERENCE_LABELS


@dataclass
class ManifestEntry:
    sample_id: str
    label: str
    preset: str
    seed: int
    anchor: tuple[float, float, float]
    noise_std: float
    csv_path: str


@dataclass
class Manifest:
    config_hash: str
    entries: list[ManifestEntry] = field(default_factory=list)
    version: int = MANIFEST_VERSION
    chirp: dict = field(default_factory=dict)

    def labels(self) -> list[str]:
        return [e.label for e in self.entries]


def save_manifest(path, manifest: Manifest) -> None:
    """Write-to-temp then rename; partial runs leave no valid manifest."""
    path = Path(path)
    ids = [e.sample_id for e in manifest.entries]
    if len(set(ids)) != len(ids):
        raise ManifestError("duplicate sample ids in manifest")
    doc = {
        "version": manifest.version,
        "config_hash": manifest.config_hash,
        "chirp": manifest.chirp,
        "entries": [asdict(e) | {"anchor": list(e.anchor)} for e in manifest.entries],
    }
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n")
    os.replace(tmp, path)


def load_manifest(path) -> Manifest:
    """Parse and validate; every referenced CSV must exist or loading fails."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except FileNotFoundError:
        raise ManifestError(f"manifest {path} does not exist")
    except json.JSONDecodeError as exc:
        raise ManifestError(f"manifest {path} is not valid JSON: {exc}")
    if doc.get("version") != MANIFEST_VERSION:
        raise ManifestError(f"unsupported manifest version {doc.get('version')!r}")
    entries = [ManifestEntry(
        sample_id=e["sample_id"], label=e["label"], preset=e["preset"],
        seed=int(e["seed"]), anchor=tuple(e["anchor"]),
        noise_std=float(e["noise_std"]), csv_path=e["csv_path"],
    ) for e in doc["entries"]]
    ids = [e.sample_id for e in entries]
    if len(set(ids)) != len(ids):
        raise ManifestError(f"manifest {path} has duplicate sample ids")
    missing = [e.csv_path for e in entries
               if not (path.parent / e.csv_path).is_file()]
    if missing:
        raise ManifestError(
            f"manifest {path} references missing CSVs: {missing[:3]}"
            + ("..." if len(missing) > 3 else ""))
    return Manifest(config_hash=doc["config_hash"], entries=entries,
                    version=doc["version"], chirp=doc.get("chirp", {}))


def load_samples(manifest: Manifest, manifest_dir) -> list[GestureSample]:
    """Build one gesture tensor per manifest entry, validating as it goes."""
    manifest_dir = Path(manifest_dir)
    samples = []
    for entry in manifest.entries:
        sid, label, frames = read_frames_csv(manifest_dir / entry.csv_path)
        if label != entry.label:
            raise ManifestError(
                f"{entry.csv_path}: label {label!r} disagrees with manifest "
                f"{entry.label!r}")
        sample = build_sample(frames, label,
                              meta={"sample_id": entry.sample_id,
                                    "seed": entry.seed,
                                    "anchor": list(entry.anchor)})
        if not np.isfinite(sample.tensor).all():
            raise ManifestError(f"{entry.csv_path}: non-finite tensor values")
        samples.append(sample)
    return samples


def class_names_for(labels) -> list[str]:
    """Canonically ordered class list for the labels present in a dataset."""
    present = set(labels)
    unknown = present - set(TRAINABLE_LABELS)
    if unknown:
        raise InvalidArgumentError(
            f"labels {sorted(unknown)} are not trainable classes "
            f"(expected among {TRAINABLE_LABELS})")
    return [name for name in TRAINABLE_LABELS if name in present]


def tensors_from_samples(samples, class_names) -> tuple[np.ndarray, np.ndarray]:
    index = {name: i for i, name in enumerate(class_names)}
    bad = [s.label for s in samples if s.label not in index]
    if bad:
        raise InvalidArgumentError(f"sample labels {sorted(set(bad))} not in class set")
    tensors = np.stack([s.tensor for s in samples])
    labels = np.array([index[s.label] for s in samples], dtype=int)
    return tensors, labels


def stratified_split(labels, test_fraction: float, seed: int):
    """(train_idx, test_idx); per-class shuffle, deterministic per seed."""
    if not 0.0 < test_fraction < 1.0:
        raise InvalidArgumentError("test_fraction must lie in (0, 1)")
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    train_idx, test_idx = [], []
    for value in sorted(set(labels.tolist())):
        members = np.flatnonzero(labels == value)
        members = members[rng.permutation(members.size)]
        n_test = int(round(test_fraction * members.size))
        if members.size > 1:
            n_test = min(max(n_test, 1), members.size - 1)
        test_idx.extend(members[:n_test])
        train_idx.extend(members[n_test:])
    return np.sort(np.array(train_idx, dtype=int)), np.sort(np.array(test_idx, dtype=int))
