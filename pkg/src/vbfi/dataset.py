"""Core domain types and file ingestion for image-preference trait data.

A dataset couples three plain files:

* ``images.jsonl``   -- one JSON object per line:
  ``{"image_id": str, "features": [d reals], "concepts": [str, ...]}``
* ``favorites.csv``  -- header ``user_id,image_id``, one edge per row
* ``traits.csv``     -- header ``user_id,O,C,E,A,N``, real scores

Everything is validated at load time; the resulting :class:`Dataset` is
treated as immutable afterwards.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

#: Canonical trait order: Openness, Conscientiousness, Extraversion,
#: Agreeableness, Neuroticism.
TRAITS: tuple[str, ...] = ("O", "C", "E", "A", "N")

#: Inclusive range every trait score must fall in.
TRAIT_MIN = -4.0
TRAIT_MAX = 4.0


class DataError(ValueError):
    """Malformed or inconsistent input data.

    Carries enough context (file, line) to point at the offending record.
    """

    def __init__(self, message: str, *, path: str | Path | None = None,
                 line: int | None = None):
        self.path = str(path) if path is not None else None
        self.line = line
        prefix = ""
        if self.path is not None:
            prefix = self.path if line is None else f"{self.path}:{line}"
            prefix += ": "
        super().__init__(prefix + message)


@dataclass(frozen=True)
class ImageRecord:
    image_id: str
    features: np.ndarray
    detected_concepts: frozenset[str]

    def __post_init__(self):
        object.__setattr__(self, "features",
                           np.asarray(self.features, dtype=np.float64))


@dataclass(frozen=True)
class UserRecord:
    user_id: str
    favorite_image_ids: tuple[str, ...]
    traits: dict[str, float]


@dataclass(frozen=True)
class Dataset:
    """Validated container of images, users and their favorite edges."""

    images: dict[str, ImageRecord]
    users: dict[str, UserRecord]
    feature_dim: int

    def user_ids(self) -> list[str]:
        return sorted(self.users)

    def image_ids(self) -> list[str]:
        return sorted(self.images)


def _check_trait_map(user_id: str, traits: dict[str, float]) -> list[str]:
    problems = []
    for t in TRAITS:
        if t not in traits:
            problems.append(f"user {user_id!r}: missing trait {t}")
            continue
        v = traits[t]
        if not math.isfinite(v):
            problems.append(f"user {user_id!r}: trait {t} not finite")
        elif not (TRAIT_MIN <= v <= TRAIT_MAX):
            problems.append(
                f"user {user_id!r}: trait {t}={v} out of range "
                f"[{TRAIT_MIN}, {TRAIT_MAX}]")
    return problems


def validate_dataset(ds: Dataset) -> list[str]:
    """Return a list of invariant violations; empty when the dataset is sound.

    Violations are returned (not raised) so callers can report all of them
    at once.
    """
    violations: list[str] = []
    for image_id, img in ds.images.items():
        if img.features.shape != (ds.feature_dim,):
            violations.append(
                f"image {image_id!r}: {img.features.shape[0] if img.features.ndim == 1 else '?'}"
                f" features, expected {ds.feature_dim}")
        if not np.all(np.isfinite(img.features)):
            violations.append(f"image {image_id!r}: non-finite feature value")
        if not img.detected_concepts:
            violations.append(f"image {image_id!r}: empty concept set")
    for user_id, user in ds.users.items():
        if not user.favorite_image_ids:
            violations.append(f"user {user_id!r}: empty favorites list")
        for image_id in user.favorite_image_ids:
            if image_id not in ds.images:
                violations.append(
                    f"user {user_id!r}: dangling reference to image {image_id!r}")
        violations.extend(_check_trait_map(user_id, user.traits))
    return violations


def _read_images(path: Path) -> tuple[dict[str, ImageRecord], int]:
    images: dict[str, ImageRecord] = {}
    feature_dim = -1
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"invalid JSON ({exc.msg})",
                                path=path, line=lineno) from exc
            try:
                image_id = obj["image_id"]
                features = obj["features"]
                concepts = obj["concepts"]
            except (KeyError, TypeError) as exc:
                raise DataError(f"missing key {exc}", path=path,
                                line=lineno) from exc
            if not isinstance(image_id, str):
                raise DataError("image_id must be a string", path=path,
                                line=lineno)
            if image_id in images:
                raise DataError(f"duplicate image_id {image_id!r}",
                                path=path, line=lineno)
            vec = np.asarray(features, dtype=np.float64)
            if vec.ndim != 1 or vec.size == 0:
                raise DataError("features must be a non-empty flat list",
                                path=path, line=lineno)
            if not np.all(np.isfinite(vec)):
                raise DataError("non-finite feature value", path=path,
                                line=lineno)
            if feature_dim < 0:
                feature_dim = vec.size
            elif vec.size != feature_dim:
                raise DataError(
                    f"inconsistent feature dimension: {vec.size} != {feature_dim}",
                    path=path, line=lineno)
            concept_set = frozenset(str(c) for c in concepts)
            if not concept_set:
                raise DataError("empty concept list", path=path, line=lineno)
            images[image_id] = ImageRecord(image_id, vec, concept_set)
    if not images:
        raise DataError("no images", path=path)
    return images, feature_dim


def _read_favorites(path: Path, images: dict[str, ImageRecord],
                    ) -> dict[str, list[str]]:
    favorites: dict[str, list[str]] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["user_id", "image_id"]:
            raise DataError("expected header 'user_id,image_id'",
                            path=path, line=1)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise DataError(f"expected 2 columns, got {len(row)}",
                                path=path, line=lineno)
            user_id, image_id = row[0].strip(), row[1].strip()
            if image_id not in images:
                raise DataError(
                    f"dangling reference: user {user_id!r} favorites unknown "
                    f"image {image_id!r}", path=path, line=lineno)
            seen = favorites.setdefault(user_id, [])
            if image_id not in seen:
                seen.append(image_id)
    if not favorites:
        raise DataError("no favorite edges", path=path)
    return favorites


def _read_traits(path: Path) -> dict[str, dict[str, float]]:
    traits: dict[str, dict[str, float]] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        expected = ["user_id", *TRAITS]
        if header is None or [h.strip() for h in header] != expected:
            raise DataError(f"expected header '{','.join(expected)}'",
                            path=path, line=1)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 6:
                raise DataError(f"expected 6 columns, got {len(row)}",
                                path=path, line=lineno)
            user_id = row[0].strip()
            if user_id in traits:
                raise DataError(f"duplicate traits row for user {user_id!r}",
                                path=path, line=lineno)
            scores: dict[str, float] = {}
            for trait, cell in zip(TRAITS, row[1:]):
                try:
                    value = float(cell)
                except ValueError as exc:
                    raise DataError(
                        f"trait {trait} for user {user_id!r} is not a number: "
                        f"{cell!r}", path=path, line=lineno) from exc
                if not math.isfinite(value):
                    raise DataError(
                        f"trait {trait} for user {user_id!r} not finite",
                        path=path, line=lineno)
                if not (TRAIT_MIN <= value <= TRAIT_MAX):
                    raise DataError(
                        f"trait out of range: {trait}={value} for user "
                        f"{user_id!r} (allowed [{TRAIT_MIN}, {TRAIT_MAX}])",
                        path=path, line=lineno)
                scores[trait] = value
            traits[user_id] = scores
    return traits


def load_dataset(images_path: str | Path, favorites_path: str | Path,
                 traits_path: str | Path) -> Dataset:
    """Load and validate a dataset from its three files.

    Raises :class:`DataError` on the first malformed record, dangling
    reference, out-of-range trait score, or inconsistent feature dimension.
    """
    images_path = Path(images_path)
    favorites_path = Path(favorites_path)
    traits_path = Path(traits_path)
    images, feature_dim = _read_images(images_path)
    favorites = _read_favorites(favorites_path, images)
    traits = _read_traits(traits_path)

    users: dict[str, UserRecord] = {}
    for user_id, fav in favorites.items():
        if user_id not in traits:
            raise DataError(f"user {user_id!r} has favorites but no traits row",
                            path=traits_path)
        users[user_id] = UserRecord(user_id, tuple(fav), traits[user_id])
    extra = set(traits) - set(favorites)
    if extra:
        raise DataError(
            f"user {sorted(extra)[0]!r} has traits but no favorites",
            path=favorites_path)

    ds = Dataset(images=images, users=users, feature_dim=feature_dim)
    problems = validate_dataset(ds)
    if problems:
        raise DataError("; ".join(problems))
    return ds


def save_dataset(ds: Dataset, images_path: str | Path,
                 favorites_path: str | Path, traits_path: str | Path) -> None:
    """Write a dataset back to the three-file format, deterministically.

    ``load_dataset`` of the written files reproduces the dataset exactly
    (floats round-trip through ``repr``).
    """
    with open(images_path, "w", encoding="utf-8") as fh:
        for image_id in sorted(ds.images):
            img = ds.images[image_id]
            fh.write(json.dumps({
                "image_id": img.image_id,
                "features": [float(v) for v in img.features],
                "concepts": sorted(img.detected_concepts),
            }) + "\n")
    with open(favorites_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["user_id", "image_id"])
        for user_id in sorted(ds.users):
            for image_id in ds.users[user_id].favorite_image_ids:
                writer.writerow([user_id, image_id])
    with open(traits_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["user_id", *TRAITS])
        for user_id in sorted(ds.users):
            user = ds.users[user_id]
            writer.writerow([user_id, *[repr(user.traits[t]) for t in TRAITS]])
