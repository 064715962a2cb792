"""Synthetic dataset generator with planted per-view step signal.

Builds a desk-scale dataset shaped like the real pipeline's input: every
user favorites a few images under each of K concepts, and each trait score
is a sum of step functions of the user's planted "level" in a handful of
informative views, plus Gaussian noise, clamped to the trait range.

The construction keeps the planted truth verifiable end to end:

* Per-image jitter is antithetic within each (user, concept) pool, so a
  user's mean feature vector equals the planted prototype exactly. Trees
  trained on user means therefore split only on planted dimensions, and
  every leaf region contains images (>= 10 per level at default sizes),
  which questionnaire design requires.
* Informative view blocks vary only on one driver dimension with
  ``levels`` distinct values; level assignment tiles the full factorial
  over the informative views, so at divisible user counts each view's step
  is exactly orthogonal to the others in-sample and a booster with one
  round per informative view (at unit shrinkage) recovers noise-free
  labels exactly.
* Non-informative view blocks carry one binary per-user noise dimension:
  label-free by construction, and with too few distinct values to soak up
  residual variance in-sample.
* Per concept, images additionally fall into ``num_clusters`` widely
  separated clusters (a large offset on one feature), which exercises
  cluster-ranked option picking.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .concepts import ViewMatrix, build_views
from .dataset import TRAIT_MAX, TRAIT_MIN, TRAITS, Dataset, ImageRecord, UserRecord

_MAX_FACTORIAL_CELLS = 4096
_DRIVER_DIM = 0
_CLUSTER_DIM = 1


@dataclass(frozen=True)
class SynthSpec:
    seed: int = 42
    num_users: int = 104
    num_views: int = 36
    feature_dim: int = 8
    informative_views: tuple[int, ...] = (0, 1, 2, 3, 4)
    step_amplitudes: tuple[float, ...] = (1.0, 0.9, 0.8, 0.7, 0.5)
    levels: int = 5
    noise_std: float = 0.5
    images_per_concept: int = 2
    cluster_gap: float = 6.0
    num_clusters: int = 2
    noise_concepts: int = 0
    noise_concept_users: int = 50
    trait_range: tuple[float, float] = (TRAIT_MIN, TRAIT_MAX)

    def validate(self) -> None:
        if self.num_users < 1 or self.num_views < 1:
            raise ValueError("num_users and num_views must be >= 1")
        if self.feature_dim < 2:
            raise ValueError("feature_dim must be >= 2 (driver + cluster dims)")
        if any(not (0 <= v < self.num_views) for v in self.informative_views):
            raise ValueError("informative_views must be view indices in range")
        if len(set(self.informative_views)) != len(self.informative_views):
            raise ValueError("informative_views must be distinct")
        if self.informative_views and (
                len(self.step_amplitudes) != len(self.informative_views)):
            raise ValueError("need one step amplitude per informative view")
        if self.levels < 2:
            raise ValueError("levels must be >= 2")
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")
        if self.images_per_concept < 1:
            raise ValueError("images_per_concept must be >= 1")
        if self.num_clusters < 1:
            raise ValueError("num_clusters must be >= 1")
        lo, hi = self.trait_range
        if not lo < hi:
            raise ValueError("empty trait range")
        reach = sum(abs(a) for a in self.step_amplitudes)
        if self.informative_views and reach > (hi - lo) / 2.0:
            raise ValueError(
                f"infeasible spec: planted signal reaches ±{reach}, which the "
                f"trait range clamp [{lo}, {hi}] would destroy")

    def concept_names(self) -> list[str]:
        width = max(2, len(str(self.num_views - 1)))
        return [f"c{v:0{width}d}" for v in range(self.num_views)]


def _rng(spec: SynthSpec, stream: int) -> np.random.Generator:
    return np.random.default_rng([spec.seed, stream])


def _level_assignment(spec: SynthSpec) -> np.ndarray:
    """(num_users, n_informative) planted levels, factorial-balanced."""
    v = len(spec.informative_views)
    if v == 0:
        return np.zeros((spec.num_users, 0), dtype=np.int64)
    cells = spec.levels ** v
    rng = _rng(spec, 1)
    if cells <= _MAX_FACTORIAL_CELLS:
        table = np.array(list(itertools.product(range(spec.levels), repeat=v)),
                         dtype=np.int64)
        reps = spec.num_users // cells
        rows = [np.tile(table, (reps, 1))] if reps else []
        tail = spec.num_users - reps * cells
        if tail:
            rows.append(rng.integers(0, spec.levels, size=(tail, v)))
        return np.vstack(rows)
    return rng.integers(0, spec.levels, size=(spec.num_users, v))


def _step_values(spec: SynthSpec) -> np.ndarray:
    """(n_traits, n_informative, levels) planted leaf values per trait/view."""
    v = len(spec.informative_views)
    rng = _rng(spec, 2)
    signs = rng.integers(0, 2, size=(len(TRAITS), v)) * 2 - 1
    grid = np.linspace(-1.0, 1.0, spec.levels)
    amps = np.asarray(spec.step_amplitudes, dtype=np.float64)
    return signs[:, :, None] * amps[None, :, None] * grid[None, None, :]


def _antithetic_jitter(rng: np.random.Generator, count: int, dim: int,
                       std: float) -> np.ndarray:
    """(count, dim) jitters that sum to exactly zero across the pool."""
    if std <= 0:
        return np.zeros((count, dim))
    jit = np.zeros((count, dim))
    for k in range(0, count - 1, 2):
        draw = rng.normal(0.0, std, dim)
        jit[k] = draw
        jit[k + 1] = -draw
    return jit


def generate_synthetic(spec: SynthSpec = SynthSpec(),
                       ) -> tuple[Dataset, ViewMatrix, dict[str, np.ndarray]]:
    """Deterministic per seed. Returns the dataset, its view matrix over the
    planted concepts, and per-trait label vectors aligned with sorted users."""
    spec.validate()
    concepts = spec.concept_names()
    user_ids = [f"u{i:03d}" for i in range(spec.num_users)]
    levels = _level_assignment(spec)
    steps = _step_values(spec)
    info_pos = {view: i for i, view in enumerate(spec.informative_views)}

    jitter_std = 0.2 * spec.noise_std
    feat_rng = _rng(spec, 3)
    label_rng = _rng(spec, 4)
    noise_rng = _rng(spec, 5)

    images: dict[str, ImageRecord] = {}
    favorites: dict[str, list[str]] = {u: [] for u in user_ids}
    for u, user_id in enumerate(user_ids):
        for view, concept in enumerate(concepts):
            base = np.zeros(spec.feature_dim)
            if view in info_pos:
                base[_DRIVER_DIM] = (levels[u, info_pos[view]]
                                     - (spec.levels - 1) / 2.0)
            else:
                noise_dim = 2 if spec.feature_dim > 2 else _DRIVER_DIM
                base[noise_dim] = float(feat_rng.integers(0, 2))
            jit = _antithetic_jitter(feat_rng, spec.images_per_concept,
                                     spec.feature_dim, jitter_std)
            for k in range(spec.images_per_concept):
                vec = base + jit[k]
                vec[_CLUSTER_DIM] += spec.cluster_gap * (k % spec.num_clusters)
                image_id = f"{concept}_{user_id}_{k}"
                images[image_id] = ImageRecord(image_id, vec,
                                               frozenset({concept}))
                favorites[user_id].append(image_id)

    width = max(2, len(str(max(spec.noise_concepts, 1) - 1)))
    for j in range(spec.noise_concepts):
        concept = f"noise{j:0{width}d}"
        chosen = noise_rng.choice(spec.num_users,
                                  size=min(spec.noise_concept_users,
                                           spec.num_users),
                                  replace=False)
        for u in sorted(chosen):
            user_id = user_ids[u]
            vec = noise_rng.normal(0.0, 0.5, spec.feature_dim)
            image_id = f"{concept}_{user_id}_0"
            images[image_id] = ImageRecord(image_id, vec, frozenset({concept}))
            favorites[user_id].append(image_id)

    lo, hi = spec.trait_range
    labels: dict[str, np.ndarray] = {}
    base_scores = np.zeros((len(TRAITS), spec.num_users))
    for t in range(len(TRAITS)):
        for i in range(len(spec.informative_views)):
            base_scores[t] += steps[t, i, levels[:, i]]
    for t, trait in enumerate(TRAITS):
        noisy = base_scores[t] + (label_rng.normal(0.0, spec.noise_std,
                                                   spec.num_users)
                                  if spec.noise_std > 0 else 0.0)
        labels[trait] = np.clip(noisy, lo, hi)

    users = {
        user_id: UserRecord(
            user_id, tuple(favorites[user_id]),
            {trait: float(labels[trait][u]) for trait in TRAITS})
        for u, user_id in enumerate(user_ids)
    }
    ds = Dataset(images=images, users=users, feature_dim=spec.feature_dim)
    vm = build_views(ds, concepts, set(user_ids))
    # labels aligned with the sorted user order used by vm.matrix()
    order = np.argsort(user_ids)
    aligned = {trait: labels[trait][order] for trait in TRAITS}
    return ds, vm, aligned
