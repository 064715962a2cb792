"""View-restricted gradient boosting and ensemble model serialization.

Each boosting round fits one fixed-budget regression tree per candidate
view on the current residuals and keeps the tree of the view with the
smallest residual SSE. The final regressor is

    F(x) = F0 + shrinkage * sum_m T_m(block(x, V_m))

where F0 is the training-label mean and every tree reads only its selected
view's feature block. Stored leaf values are raw residual means; shrinkage
is kept as a separate model field and applied at prediction/scoring time.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .tree import RegressionTree, fit_tree, tree_from_dict, tree_to_dict

MODEL_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class BoostingConfig:
    """Hyperparameters of one boosted ensemble."""

    n_rounds: int = 5        # M: boosting rounds == concept-questions
    n_leaves: int = 5        # J: leaves per tree == options per question
    shrinkage: float = 0.5
    min_leaf: int = 2
    distinct_views: bool = False

    def __post_init__(self):
        if self.n_rounds < 0:
            raise ValueError("n_rounds must be >= 0")
        if self.n_leaves < 1:
            raise ValueError("n_leaves must be >= 1")
        if not (0.0 < self.shrinkage <= 1.0):
            raise ValueError("shrinkage must be in (0, 1]")
        if self.min_leaf < 1:
            raise ValueError("min_leaf must be >= 1")


@dataclass(frozen=True)
class BoostingRound:
    view: int
    concept: str
    tree: RegressionTree


@dataclass
class VgbdtModel:
    """Trained per-trait ensemble. Immutable after training."""

    trait: str
    f0: float
    shrinkage: float
    feature_dim: int
    view_names: tuple[str, ...]
    rounds: tuple[BoostingRound, ...]

    @property
    def num_views(self) -> int:
        return len(self.view_names)

    def _check_width(self, x: np.ndarray) -> None:
        expected = self.num_views * self.feature_dim
        if x.shape[-1] != expected:
            raise ValueError(
                f"input has {x.shape[-1]} features, model expects "
                f"{self.num_views} views x {self.feature_dim} dims = {expected}")

    def block(self, x: np.ndarray, view: int) -> np.ndarray:
        d = self.feature_dim
        return x[..., view * d:(view + 1) * d]

    def predict_one(self, x) -> float:
        """Shrunken ensemble sum, accumulated round by round.

        The accumulation order matches training exactly, so re-predicting a
        training row reproduces its final training-time value bit for bit.
        """
        x = np.asarray(x, dtype=np.float64)
        self._check_width(x)
        score = self.f0
        for rnd in self.rounds:
            score += self.shrinkage * rnd.tree.predict_one(self.block(x, rnd.view))
        return score

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            return np.array([self.predict_one(X)])
        self._check_width(X)
        pred = np.full(X.shape[0], self.f0, dtype=np.float64)
        for rnd in self.rounds:
            pred += self.shrinkage * rnd.tree.predict(self.block(X, rnd.view))
        return pred

    def route(self, x) -> list[int]:
        """Per-round leaf index the input lands in (one entry per round)."""
        x = np.asarray(x, dtype=np.float64)
        self._check_width(x)
        return [rnd.tree.assign_leaf(self.block(x, rnd.view))
                for rnd in self.rounds]

    def score_leaf_choices(self, leaf_choices) -> float:
        """Ensemble value for explicit per-round leaf picks.

        Same arithmetic as :meth:`predict_one` with the tree outputs replaced
        by the chosen leaves' stored values.
        """
        if len(leaf_choices) != len(self.rounds):
            raise ValueError(
                f"expected {len(self.rounds)} choices, got {len(leaf_choices)}")
        score = self.f0
        for rnd, leaf_index in zip(self.rounds, leaf_choices):
            score += self.shrinkage * rnd.tree.leaf_value(leaf_index)
        return score


def train_vgbdt(X: np.ndarray, y: np.ndarray, num_views: int,
                config: BoostingConfig = BoostingConfig(),
                view_names: list[str] | None = None,
                trait: str = "") -> VgbdtModel:
    """Fit a view-restricted boosted ensemble on an ``(n, K*d)`` matrix.

    Per round: residuals against the current ensemble are computed, one tree
    per candidate view is fitted on its block, and the view with the lowest
    residual SSE wins (ties go to the lowest view index). With
    ``distinct_views`` a view is used at most once and ``n_rounds`` may not
    exceed the number of views.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    if y.size == 0:
        raise ValueError("empty label set")
    if X.ndim != 2 or X.shape[0] != y.size:
        raise ValueError("X must be (n_samples, num_views * feature_dim)")
    if num_views < 1 or X.shape[1] % num_views != 0:
        raise ValueError(
            f"feature count {X.shape[1]} is not a multiple of num_views={num_views}")
    d = X.shape[1] // num_views
    if view_names is None:
        view_names = [f"view_{k}" for k in range(num_views)]
    if len(view_names) != num_views:
        raise ValueError("view_names length must equal num_views")
    if config.distinct_views and config.n_rounds > num_views:
        raise ValueError(
            f"distinct_views: cannot pick {config.n_rounds} distinct views "
            f"out of {num_views}")

    f0 = float(y.mean())
    pred = np.full(y.size, f0, dtype=np.float64)
    available = list(range(num_views))
    rounds: list[BoostingRound] = []
    for _ in range(config.n_rounds):
        residual = y - pred
        best_view = None
        best_tree = None
        for k in available:
            tree = fit_tree(X[:, k * d:(k + 1) * d], residual,
                            config.n_leaves, config.min_leaf)
            if best_tree is None or tree.training_sse < best_tree.training_sse:
                best_view, best_tree = k, tree
        rounds.append(BoostingRound(view=best_view, concept=view_names[best_view],
                                    tree=best_tree))
        pred += config.shrinkage * best_tree.predict(
            X[:, best_view * d:(best_view + 1) * d])
        if config.distinct_views:
            available.remove(best_view)
    return VgbdtModel(trait=trait, f0=f0, shrinkage=config.shrinkage,
                      feature_dim=d, view_names=tuple(view_names),
                      rounds=tuple(rounds))


def training_sse_path(model: VgbdtModel, X: np.ndarray, y: np.ndarray,
                      ) -> list[float]:
    """Training SSE after round 0 (constant model) through round M.

    Replays the training accumulation, so entry ``m`` equals the SSE the
    trainer saw after applying ``m`` trees.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    pred = np.full(y.size, model.f0, dtype=np.float64)
    path = [float(np.sum((y - pred) ** 2))]
    for rnd in model.rounds:
        pred += model.shrinkage * rnd.tree.predict(model.block(X, rnd.view))
        path.append(float(np.sum((y - pred) ** 2)))
    return path


def model_to_dict(model: VgbdtModel) -> dict:
    return {
        "version": MODEL_SCHEMA_VERSION,
        "trait": model.trait,
        "F0": model.f0,
        "shrinkage": model.shrinkage,
        "feature_dim": model.feature_dim,
        "views": list(model.view_names),
        "rounds": [{"view": rnd.view, "concept": rnd.concept,
                    "tree": tree_to_dict(rnd.tree)} for rnd in model.rounds],
    }


def model_from_dict(obj: dict) -> VgbdtModel:
    version = obj.get("version")
    if version != MODEL_SCHEMA_VERSION:
        raise ValueError(
            f"unsupported model schema version {version!r}, "
            f"expected {MODEL_SCHEMA_VERSION}")
    try:
        rounds = tuple(
            BoostingRound(view=int(r["view"]), concept=str(r["concept"]),
                          tree=tree_from_dict(r["tree"]))
            for r in obj["rounds"])
        return VgbdtModel(trait=str(obj["trait"]), f0=float(obj["F0"]),
                          shrinkage=float(obj["shrinkage"]),
                          feature_dim=int(obj["feature_dim"]),
                          view_names=tuple(str(v) for v in obj["views"]),
                          rounds=rounds)
    except (KeyError, TypeError) as exc:
        raise ValueError(f"corrupt model file: missing {exc}") from exc


def save_model(model: VgbdtModel, path: str | Path) -> None:
    payload = json.dumps(model_to_dict(model), indent=2)
    Path(path).write_text(payload + "\n", encoding="utf-8")


def load_model(path: str | Path) -> VgbdtModel:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValueError(f"corrupt model file {path}: {exc.msg}") from exc
    return model_from_dict(obj)


class VgbdtRegressor(RegressorMixin, BaseEstimator):
    """Estimator interface over :func:`train_vgbdt`.

    ``X`` rows are concatenations of ``num_views`` feature blocks of equal
    width. After :meth:`fit`, ``model_`` holds the serializable ensemble and
    ``selected_views_`` the per-round view choices.
    """

    def __init__(self, num_views: int = 1, n_rounds: int = 5, n_leaves: int = 5,
                 shrinkage: float = 0.5, min_leaf: int = 2,
                 distinct_views: bool = False, view_names: list[str] | None = None):
        self.num_views = num_views
        self.n_rounds = n_rounds
        self.n_leaves = n_leaves
        self.shrinkage = shrinkage
        self.min_leaf = min_leaf
        self.distinct_views = distinct_views
        self.view_names = view_names

    def _config(self) -> BoostingConfig:
        return BoostingConfig(n_rounds=self.n_rounds, n_leaves=self.n_leaves,
                              shrinkage=self.shrinkage, min_leaf=self.min_leaf,
                              distinct_views=self.distinct_views)

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        self.model_ = train_vgbdt(X, y, self.num_views, self._config(),
                                  view_names=self.view_names)
        self.selected_views_ = [rnd.view for rnd in self.model_.rounds]
        self.train_sse_path_ = training_sse_path(self.model_, X, y)
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "model_")
        X = check_array(X)
        return self.model_.predict(X)

    def route(self, X):
        """(n, n_rounds) leaf indices of each sample, one column per round."""
        check_is_fitted(self, "model_")
        X = check_array(X)
        return np.array([self.model_.route(row) for row in X], dtype=np.int64)
