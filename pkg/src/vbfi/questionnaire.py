"""Compile trained ensembles into an image-choice questionnaire and score it.

Each trained round contributes one question tied to its concept. The
question's options are images drawn from the concept's pool, one per leaf
of the round's tree, picked as close as possible to an affinity-propagation
exemplar so the options look homogeneous. A subject's trait score is the
ensemble constant plus the shrunken sum of the chosen options' leaf values,
which makes answering the questionnaire arithmetically identical to running
the ensemble on a user whose images route to the chosen leaves.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path

import numpy as np

from .boosting import VgbdtModel, model_to_dict
from .clustering import ApConfig, cluster_features
from .concepts import ConceptIndex
from .dataset import TRAITS, Dataset

MANIFEST_SCHEMA_VERSION = 1


class DesignError(ValueError):
    """Questionnaire design cannot produce a complete answer bucket."""


@dataclass(frozen=True)
class ImageOption:
    image_id: str
    leaf_index: int
    leaf_value: float
    cluster_rank: int  # 1 = largest cluster supplied the image


@dataclass(frozen=True)
class Question:
    trait: str
    round: int  # 1-based boosting round
    concept: str
    options: tuple[ImageOption, ...]
    display_order: tuple[int, ...]

    def option_by_leaf(self, leaf_index: int) -> ImageOption:
        for opt in self.options:
            if opt.leaf_index == leaf_index:
                return opt
        raise KeyError(
            f"question (trait {self.trait}, round {self.round}) has no "
            f"option for leaf {leaf_index}")


@dataclass(frozen=True)
class TraitSection:
    f0: float
    shrinkage: float
    questions: tuple[Question, ...]


@dataclass(frozen=True)
class Questionnaire:
    version_id: str
    cluster_choice: int
    traits: dict[str, TraitSection]
    seed: int
    model_hashes: dict[str, str]

    def num_questions(self) -> int:
        return sum(len(s.questions) for s in self.traits.values())


@dataclass(frozen=True)
class ResponseSheet:
    """One subject's choices: leaf index per (trait, round)."""

    subject_id: str
    version_id: str
    choices: dict[tuple[str, int], int]
    self_rating: int | None = None
    started_at: str | None = None
    finished_at: str | None = None

    def __post_init__(self):
        if self.self_rating is not None and not (1 <= self.self_rating <= 7):
            raise ValueError(
                f"self_rating must be in 1..7, got {self.self_rating}")


def model_hash(model: VgbdtModel) -> str:
    payload = json.dumps(model_to_dict(model), sort_keys=True,
                         separators=(",", ":"))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


def _pick_option(image_ids, similarities, used: set[str]) -> int:
    """Index of the best option image: nearest to the exemplar, preferring
    unused then lexicographically smaller ids on ties."""
    best = None
    best_key = None
    for i, image_id in enumerate(image_ids):
        key = (-similarities[i], image_id in used, image_id)
        if best_key is None or key < best_key:
            best, best_key = i, key
    return best


def design_questionnaire(models: dict[str, VgbdtModel], ds: Dataset,
                         idx: ConceptIndex, cluster_choice: int = 1,
                         ap_cfg: ApConfig = ApConfig(), seed: int = 42,
                         version_id: str | None = None) -> Questionnaire:
    """Build the questionnaire for a set of per-trait models.

    For every (trait, round): label the concept's images with the round
    tree's leaves, cluster the images, and pick one image per leaf from the
    cluster of rank ``cluster_choice`` (1 = largest). Leaves missing from
    that cluster fall back to the remaining clusters in decreasing size
    order; a leaf covered by no image of the concept at all is a
    :class:`DesignError`.
    """
    if cluster_choice < 1:
        raise ValueError("cluster_choice must be >= 1")
    if version_id is None:
        version_id = f"vbfi_{cluster_choice}"

    ap_cache: dict[str, tuple] = {}
    used_images: set[str] = set()
    sections: dict[str, TraitSection] = {}
    for trait_pos, trait in enumerate(TRAITS):
        if trait not in models:
            raise ValueError(f"no model supplied for trait {trait}")
        model = models[trait]
        questions = []
        for m, rnd in enumerate(model.rounds, start=1):
            concept = rnd.concept
            pool = sorted(idx.image_sets.get(concept, frozenset()))
            if not pool:
                raise DesignError(
                    f"trait {trait} round {m}: concept {concept!r} has no images")
            if concept not in ap_cache:
                feats = np.stack([ds.images[i].features for i in pool])
                ap_cache[concept] = cluster_features(feats, ap_cfg)
            result, S = ap_cache[concept]

            leaf_of = {image_id: rnd.tree.assign_leaf(ds.images[image_id].features)
                       for image_id in pool}
            required = sorted(leaf.leaf_index for leaf in rnd.tree.leaves())
            missing = sorted(set(required) - set(leaf_of.values()))
            if missing:
                raise DesignError(
                    f"trait {trait} round {m}: no image of concept "
                    f"{concept!r} reaches leaf(s) {missing}; every answer "
                    f"bucket needs at least one image")

            ranks = list(range(1, len(result.clusters) + 1))
            search_order = ([cluster_choice] if cluster_choice in ranks else [])
            search_order += [r for r in ranks if r != cluster_choice]
            options = []
            for leaf_index in required:
                placed = False
                for rank in search_order:
                    exemplar, members = result.clusters[rank - 1]
                    candidates = [i for i in members
                                  if leaf_of[pool[i]] == leaf_index]
                    if not candidates:
                        continue
                    sims = [0.0 if i == exemplar else S[i, exemplar]
                            for i in candidates]
                    ids = [pool[i] for i in candidates]
                    pick = _pick_option(ids, sims, used_images)
                    options.append(ImageOption(
                        image_id=ids[pick], leaf_index=leaf_index,
                        leaf_value=rnd.tree.leaf_value(leaf_index),
                        cluster_rank=rank))
                    used_images.add(ids[pick])
                    placed = True
                    break
                if not placed:  # unreachable: coverage was checked above
                    raise DesignError(
                        f"trait {trait} round {m}: leaf {leaf_index} not "
                        f"reachable from any cluster")
            order_rng = np.random.default_rng([seed, trait_pos, m])
            display_order = tuple(int(i) for i in
                                  order_rng.permutation(len(options)))
            questions.append(Question(trait=trait, round=m, concept=concept,
                                      options=tuple(options),
                                      display_order=display_order))
        sections[trait] = TraitSection(f0=model.f0, shrinkage=model.shrinkage,
                                       questions=tuple(questions))
    hashes = {trait: model_hash(models[trait]) for trait in TRAITS}
    return Questionnaire(version_id=version_id, cluster_choice=cluster_choice,
                         traits=sections, seed=seed, model_hashes=hashes)


def score_response(q: Questionnaire, sheet: ResponseSheet) -> dict[str, float]:
    """Per-trait scores for a complete response.

    Accumulates exactly like ensemble prediction: start from F0 and add the
    shrunken leaf value of each round's chosen option in round order.
    """
    scores: dict[str, float] = {}
    for trait, section in q.traits.items():
        score = section.f0
        for question in section.questions:
            key = (trait, question.round)
            if key not in sheet.choices:
                raise ValueError(
                    f"response {sheet.subject_id!r} is missing a choice for "
                    f"trait {trait}, round {question.round}")
            leaf_index = sheet.choices[key]
            try:
                option = question.option_by_leaf(leaf_index)
            except KeyError as exc:
                raise ValueError(str(exc)) from exc
            score += section.shrinkage * option.leaf_value
        scores[trait] = score
    return scores


def questionnaire_to_dict(q: Questionnaire) -> dict:
    return {
        "version": MANIFEST_SCHEMA_VERSION,
        "version_id": q.version_id,
        "cluster_choice": q.cluster_choice,
        "metadata": {"seed": q.seed, "model_hashes": dict(q.model_hashes)},
        "traits": {
            trait: {
                "F0": section.f0,
                "shrinkage": section.shrinkage,
                "questions": [
                    {
                        "round": question.round,
                        "concept": question.concept,
                        "options": [
                            {"image_id": opt.image_id,
                             "leaf_index": opt.leaf_index,
                             "leaf_value": opt.leaf_value,
                             "cluster_rank": opt.cluster_rank}
                            for opt in question.options
                        ],
                        "display_order": list(question.display_order),
                    }
                    for question in section.questions
                ],
            }
            for trait, section in q.traits.items()
        },
    }


def questionnaire_from_dict(obj: dict) -> Questionnaire:
    version = obj.get("version")
    if version != MANIFEST_SCHEMA_VERSION:
        raise ValueError(
            f"unsupported questionnaire schema version {version!r}")
    try:
        sections: dict[str, TraitSection] = {}
        for trait, sec in obj["traits"].items():
            questions = tuple(
                Question(
                    trait=trait,
                    round=int(qd["round"]),
                    concept=str(qd["concept"]),
                    options=tuple(
                        ImageOption(image_id=str(o["image_id"]),
                                    leaf_index=int(o["leaf_index"]),
                                    leaf_value=float(o["leaf_value"]),
                                    cluster_rank=int(o["cluster_rank"]))
                        for o in qd["options"]),
                    display_order=tuple(int(i) for i in qd["display_order"]),
                )
                for qd in sec["questions"])
            sections[trait] = TraitSection(f0=float(sec["F0"]),
                                           shrinkage=float(sec["shrinkage"]),
                                           questions=questions)
        metadata = obj.get("metadata", {})
        return Questionnaire(version_id=str(obj["version_id"]),
                             cluster_choice=int(obj["cluster_choice"]),
                             traits=sections,
                             seed=int(metadata.get("seed", 0)),
                             model_hashes=dict(metadata.get("model_hashes", {})))
    except (KeyError, TypeError) as exc:
        raise ValueError(f"corrupt questionnaire manifest: {exc}") from exc


def render_manifest(q: Questionnaire) -> bytes:
    """Serialize deterministically; parse(render(q)) scores identically."""
    return (json.dumps(questionnaire_to_dict(q), indent=2) + "\n").encode("utf-8")


def parse_manifest(data: bytes | str) -> Questionnaire:
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        obj = json.loads(data)
    except json.JSONDecodeError as exc:
        raise ValueError(f"corrupt questionnaire manifest: {exc.msg}") from exc
    return questionnaire_from_dict(obj)


def save_questionnaire(q: Questionnaire, path: str | Path) -> None:
    Path(path).write_bytes(render_manifest(q))


def load_questionnaire(path: str | Path) -> Questionnaire:
    return parse_manifest(Path(path).read_bytes())


def response_to_dict(sheet: ResponseSheet) -> dict:
    return {
        "subject_id": sheet.subject_id,
        "version_id": sheet.version_id,
        "choices": [{"trait": trait, "round": rnd, "leaf_index": leaf}
                    for (trait, rnd), leaf in sorted(sheet.choices.items())],
        "self_rating": sheet.self_rating,
        "started_at": sheet.started_at,
        "finished_at": sheet.finished_at,
    }


def response_from_dict(obj: dict) -> ResponseSheet:
    try:
        choices = {(str(c["trait"]), int(c["round"])): int(c["leaf_index"])
                   for c in obj["choices"]}
        return ResponseSheet(subject_id=str(obj["subject_id"]),
                             version_id=str(obj.get("version_id", "")),
                             choices=choices,
                             self_rating=obj.get("self_rating"),
                             started_at=obj.get("started_at"),
                             finished_at=obj.get("finished_at"))
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed response record: {exc}") from exc


def read_responses(path: str | Path) -> list[ResponseSheet]:
    """Read a responses journal (one JSON response per line).

    A session may append an amended row (e.g. a late self-rating); the last
    row per subject wins.
    """
    latest: dict[str, ResponseSheet] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                sheet = response_from_dict(json.loads(line))
            except (json.JSONDecodeError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from exc
            latest[sheet.subject_id] = sheet
    return list(latest.values())


def append_response(path: str | Path, sheet: ResponseSheet) -> None:
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(json.dumps(response_to_dict(sheet)) + "\n")
        fh.flush()
