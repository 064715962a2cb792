"""Concept universe construction and per-user multi-view features.

Starting from the per-image detected concepts, this module expands the
concept set along a hypernym hierarchy, indexes which images and users fall
under each concept, selects concept subsets (minimum-audience and co-favored
criteria) and assembles the per-user view matrix whose block ``i`` is the
user's aggregated image-feature vector under concept ``i``.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import DataError, Dataset, ImageRecord


@dataclass(frozen=True)
class ConceptHierarchy:
    """Acyclic child -> parents relation with level bookkeeping.

    Level 1 concepts are the detection-time concepts (never a parent of
    anything, unless explicitly declared); a parent's level is one more than
    the shortest path from any level-1 concept.
    """

    parents: dict[str, tuple[str, ...]]
    level: dict[str, int]

    @classmethod
    def from_edges(cls, edges: list[tuple[str, str]],
                   level1: set[str] | None = None) -> "ConceptHierarchy":
        """Build a hierarchy from (child, parent) pairs.

        Raises ``ValueError`` when the relation contains a cycle. ``level1``
        pins the base concepts; by default every concept that is not a parent
        of another concept is level 1.
        """
        parents: dict[str, list[str]] = {}
        all_concepts: set[str] = set()
        parent_side: set[str] = set()
        for child, parent in edges:
            if child == parent:
                raise ValueError(f"self-loop at concept {child!r}")
            lst = parents.setdefault(child, [])
            if parent not in lst:
                lst.append(parent)
            all_concepts.update((child, parent))
            parent_side.add(parent)

        _check_acyclic(parents)

        if level1 is None:
            level1 = all_concepts - parent_side
        level: dict[str, int] = {c: 1 for c in level1}
        queue = deque(sorted(level1))
        while queue:
            concept = queue.popleft()
            for parent in parents.get(concept, ()):
                candidate = level[concept] + 1
                if parent not in level or candidate < level[parent]:
                    level[parent] = candidate
                    queue.append(parent)
        for concept in all_concepts:
            level.setdefault(concept, 1)
        return cls(parents={c: tuple(p) for c, p in parents.items()},
                   level=level)

    @classmethod
    def load(cls, path: str | Path) -> "ConceptHierarchy":
        """Read ``hierarchy.json``: ``{"edges": [{"child":…, "parent":…}]}``."""
        with open(path, encoding="utf-8") as fh:
            try:
                obj = json.load(fh)
            except json.JSONDecodeError as exc:
                raise DataError(f"invalid JSON ({exc.msg})", path=path) from exc
        try:
            edges = [(e["child"], e["parent"]) for e in obj["edges"]]
        except (KeyError, TypeError) as exc:
            raise DataError("expected {'edges': [{'child', 'parent'}, ...]}",
                            path=path) from exc
        return cls.from_edges(edges)

    def ancestors_within(self, concept: str, max_steps: int) -> set[str]:
        """All concepts reachable from ``concept`` in <= max_steps parent hops."""
        found: set[str] = set()
        frontier = {concept}
        for _ in range(max_steps):
            nxt: set[str] = set()
            for c in frontier:
                for parent in self.parents.get(c, ()):
                    if parent not in found:
                        found.add(parent)
                        nxt.add(parent)
            if not nxt:
                break
            frontier = nxt
        return found


def _check_acyclic(parents: dict[str, list[str]]) -> None:
    state: dict[str, int] = {}  # 0=visiting, 1=done

    def visit(node: str, stack: list[str]) -> None:
        status = state.get(node)
        if status == 1:
            return
        if status == 0:
            cycle = " -> ".join(stack[stack.index(node):] + [node])
            raise ValueError(f"cycle detected in hierarchy: {cycle}")
        state[node] = 0
        stack.append(node)
        for parent in parents.get(node, ()):
            visit(parent, stack)
        stack.pop()
        state[node] = 1

    for start in sorted(parents):
        visit(start, [])


def expand_concepts(ds: Dataset, hierarchy: ConceptHierarchy,
                    extra_levels: int) -> Dataset:
    """Augment every image's concepts with ancestors within ``extra_levels``.

    Original concepts are retained; the result is a new dataset (the input
    is not mutated).
    """
    if extra_levels < 0:
        raise ValueError("extra_levels must be >= 0")
    cache: dict[str, set[str]] = {}
    images: dict[str, ImageRecord] = {}
    for image_id, img in ds.images.items():
        expanded = set(img.detected_concepts)
        for concept in img.detected_concepts:
            if concept not in cache:
                cache[concept] = hierarchy.ancestors_within(concept, extra_levels)
            expanded |= cache[concept]
        images[image_id] = ImageRecord(image_id, img.features,
                                       frozenset(expanded))
    return Dataset(images=images, users=ds.users, feature_dim=ds.feature_dim)


@dataclass(frozen=True)
class ConceptIndex:
    """Per-concept image and user sets.

    ``user_sets[c]`` holds exactly the users favoriting at least one image
    of ``image_sets[c]``; concepts carried by no image are absent from both.
    """

    image_sets: dict[str, frozenset[str]]
    user_sets: dict[str, frozenset[str]]

    def concepts(self) -> list[str]:
        return sorted(self.image_sets)


def build_index(ds: Dataset) -> ConceptIndex:
    image_sets: dict[str, set[str]] = {}
    for image_id, img in ds.images.items():
        for concept in img.detected_concepts:
            image_sets.setdefault(concept, set()).add(image_id)
    user_sets: dict[str, set[str]] = {c: set() for c in image_sets}
    for user_id, user in ds.users.items():
        for image_id in user.favorite_image_ids:
            for concept in ds.images[image_id].detected_concepts:
                user_sets[concept].add(user_id)
    return ConceptIndex(
        image_sets={c: frozenset(s) for c, s in image_sets.items()},
        user_sets={c: frozenset(s) for c, s in user_sets.items()})


def _concept_rng(seed: int, concept: str) -> np.random.Generator:
    # Stable per-(seed, concept) stream so concepts can be sampled in any order.
    return np.random.default_rng([seed, *concept.encode("utf-8")])


def eligible_concepts(idx: ConceptIndex, min_users: int, sample_to: int,
                      seed: int) -> dict[str, frozenset[str]]:
    """Concepts with a large enough audience, each with a sampled user subset.

    Keeps exactly the concepts with ``|users| >= min_users`` and returns, per
    kept concept, a uniform random subset of ``sample_to`` users drawn from a
    stream keyed by ``(seed, concept)`` so results do not depend on
    iteration order.
    """
    if min_users < 1:
        raise ValueError("min_users must be >= 1")
    if sample_to > min_users:
        raise ValueError("sample_to must be <= min_users")
    out: dict[str, frozenset[str]] = {}
    for concept in sorted(idx.user_sets):
        users = idx.user_sets[concept]
        if len(users) < min_users:
            continue
        ordered = sorted(users)
        rng = _concept_rng(seed, concept)
        picked = rng.choice(len(ordered), size=sample_to, replace=False)
        out[concept] = frozenset(ordered[i] for i in picked)
    return out


def co_favored_concepts(idx: ConceptIndex, min_common_users: int,
                        ) -> tuple[list[str], frozenset[str]]:
    """Greedily grow a concept list whose user sets share a common audience.

    Concepts are considered in descending audience size; at each step the
    concept preserving the largest intersection is added, stopping before
    the intersection would fall below ``min_common_users``. Returns the
    selected concepts (in selection order) and the final common user set.
    """
    if min_common_users < 1:
        raise ValueError("min_common_users must be >= 1")
    remaining = sorted(idx.user_sets, key=lambda c: (-len(idx.user_sets[c]), c))
    if not remaining or len(idx.user_sets[remaining[0]]) < min_common_users:
        raise ValueError(
            f"no concept is favored by {min_common_users} or more users")
    selected = [remaining.pop(0)]
    common = set(idx.user_sets[selected[0]])
    while remaining:
        best_concept = None
        best_size = -1
        for concept in remaining:
            size = len(common & idx.user_sets[concept])
            if size > best_size:
                best_concept, best_size = concept, size
        if best_size < min_common_users:
            break
        remaining.remove(best_concept)
        selected.append(best_concept)
        common &= idx.user_sets[best_concept]
    return selected, frozenset(common)


def load_concept_list(path: str | Path) -> list[str]:
    """Read a concept-list override file: one concept per line."""
    with open(path, encoding="utf-8") as fh:
        concepts = [line.strip() for line in fh if line.strip()]
    if not concepts:
        raise DataError("empty concept list", path=path)
    return concepts


@dataclass(frozen=True)
class ViewMatrix:
    """Per-user concatenated view features.

    ``rows[u]`` has length ``K*d``; block ``i`` is the user's representation
    under ``concept_order[i]``. ``coverage[(u, c)]`` counts the favorite
    images that contributed to the block.
    """

    concept_order: tuple[str, ...]
    rows: dict[str, np.ndarray]
    coverage: dict[tuple[str, str], int]
    feature_dim: int

    @property
    def num_views(self) -> int:
        return len(self.concept_order)

    def user_ids(self) -> list[str]:
        return sorted(self.rows)

    def block(self, user_id: str, view: int) -> np.ndarray:
        d = self.feature_dim
        return self.rows[user_id][view * d:(view + 1) * d]

    def matrix(self, user_order: list[str] | None = None,
               ) -> tuple[np.ndarray, list[str]]:
        """Stack rows into an ``(n, K*d)`` array in a fixed user order."""
        order = list(user_order) if user_order is not None else self.user_ids()
        return np.stack([self.rows[u] for u in order]), order


def build_views(ds: Dataset, concepts: list[str], common_users,
                view_agg: str = "mean") -> ViewMatrix:
    """Assemble the view matrix for ``common_users`` over ``concepts``.

    ``view_agg`` selects how a user's several favorite images under one
    concept collapse to a block: element-wise ``mean`` (default) or
    ``first`` (the first favorite carrying the concept, in favorite order).
    """
    if view_agg not in ("mean", "first"):
        raise ValueError(f"unknown view_agg {view_agg!r}")
    concept_order = tuple(concepts)
    d = ds.feature_dim
    rows: dict[str, np.ndarray] = {}
    coverage: dict[tuple[str, str], int] = {}
    for user_id in sorted(common_users):
        user = ds.users[user_id]
        row = np.empty(len(concept_order) * d, dtype=np.float64)
        for i, concept in enumerate(concept_order):
            hits = [ds.images[img_id].features
                    for img_id in user.favorite_image_ids
                    if concept in ds.images[img_id].detected_concepts]
            if not hits:
                raise ValueError(
                    f"user {user_id!r} has no favorite image under concept "
                    f"{concept!r}")
            if view_agg == "first":
                block = hits[0]
            else:
                block = np.mean(hits, axis=0)
            row[i * d:(i + 1) * d] = block
            coverage[(user_id, concept)] = len(hits)
        rows[user_id] = row
    return ViewMatrix(concept_order=concept_order, rows=rows,
                      coverage=coverage, feature_dim=d)
