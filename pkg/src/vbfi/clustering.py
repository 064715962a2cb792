"""Exemplar clustering via affinity propagation message passing.

Used to group a concept's images into visually homogeneous clusters before
picking option images. Similarity is negative squared Euclidean distance;
the shared preference (self-similarity) defaults to the median off-diagonal
similarity. Message updates are damped and iterated until the exemplar set
stays unchanged for a configured number of sweeps.

Determinism: a tiny (<= 1e-12) seeded per-entry jitter breaks exact
symmetry, and items at exactly zero distance are collapsed to one
representative before message passing, which keeps degenerate duplicate
inputs stable.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.utils.validation import check_array

logger = logging.getLogger(__name__)

_NOISE_SEED = 1786350149
_NOISE_SCALE = 1e-13


@dataclass(frozen=True)
class ApConfig:
    damping: float = 0.9
    max_iter: int = 500
    convergence_iter: int = 25
    preference: float | str = "median"

    def __post_init__(self):
        if not (0.5 <= self.damping < 1.0):
            raise ValueError("damping must be in [0.5, 1)")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.convergence_iter < 1:
            raise ValueError("convergence_iter must be >= 1")
        if isinstance(self.preference, str) and self.preference != "median":
            raise ValueError("preference must be a real value or 'median'")


@dataclass(frozen=True)
class ApResult:
    """Clustering outcome over items 0..n-1.

    ``clusters`` is sorted by size descending, then exemplar index; every
    exemplar maps to itself in ``exemplar_of``.
    """

    exemplar_of: dict[int, int]
    clusters: tuple[tuple[int, tuple[int, ...]], ...]
    converged: bool
    iterations: int

    @property
    def exemplars(self) -> list[int]:
        return [e for e, _ in self.clusters]

    def labels(self) -> np.ndarray:
        """Cluster rank (0-based, largest first) per item."""
        n = len(self.exemplar_of)
        out = np.empty(n, dtype=np.int64)
        for rank, (_, members) in enumerate(self.clusters):
            for i in members:
                out[i] = rank
        return out


def similarity_matrix(features: np.ndarray,
                      preference: float | str = "median") -> np.ndarray:
    """Pairwise negative squared Euclidean distances, preference on the diagonal.

    ``preference="median"`` uses the median off-diagonal similarity (0 for a
    single item).
    """
    features = np.asarray(features, dtype=np.float64)
    if features.ndim == 1:
        features = features.reshape(-1, 1)
    n = features.shape[0]
    if n < 1:
        raise ValueError("need at least one item")
    sq = np.sum(features ** 2, axis=1)
    S = -(sq[:, None] + sq[None, :] - 2.0 * features @ features.T)
    np.fill_diagonal(S, 0.0)
    S = np.minimum(S, 0.0)  # clamp FP residue above zero
    if preference == "median":
        if n == 1:
            pref = 0.0
        else:
            off = S[~np.eye(n, dtype=bool)]
            pref = float(np.median(off))
    else:
        pref = float(preference)
    np.fill_diagonal(S, pref)
    return S


def net_similarity(S: np.ndarray, exemplar_of: dict[int, int]) -> float:
    """Objective value of an assignment: sum of S[i, exemplar(i)].

    Exemplars contribute their own preference S[e, e].
    """
    return float(sum(S[i, e] for i, e in exemplar_of.items()))


def _collapse_duplicates(S: np.ndarray) -> tuple[list[int], dict[int, int]]:
    """Map items at mutual similarity exactly 0 (zero distance) onto one rep.

    Returns (representatives, item -> representative). Only collapses pairs
    whose similarity profiles agree everywhere, so it is exact for any S.
    """
    n = S.shape[0]
    rep: dict[int, int] = {}
    reps: list[int] = []
    for i in range(n):
        assigned = None
        for r in reps:
            if S[i, r] == 0.0 and S[r, i] == 0.0:
                row_i, row_r = S[i].copy(), S[r].copy()
                # their mutual/self entries legitimately differ in position
                row_i[[i, r]] = 0.0
                row_r[[i, r]] = 0.0
                col_i, col_r = S[:, i].copy(), S[:, r].copy()
                col_i[[i, r]] = 0.0
                col_r[[i, r]] = 0.0
                if np.array_equal(row_i, row_r) and np.array_equal(col_i, col_r):
                    assigned = r
                    break
        if assigned is None:
            reps.append(i)
            rep[i] = i
        else:
            rep[i] = assigned
    return reps, rep


def _message_pass(S: np.ndarray, cfg: ApConfig) -> tuple[np.ndarray, bool, int]:
    """Damped responsibility/availability sweeps; returns (A+R diag basis, ...).

    Convergence requires the exemplar set to stay unchanged for
    ``convergence_iter`` sweeps *after the damped messages have stopped
    moving*: with heavy damping the exemplar set can linger mid-transient
    for dozens of sweeps while the messages are still drifting toward a
    different fixed point, and stopping there reports wrong clusters as
    converged.
    """
    n = S.shape[0]
    ind = np.arange(n)
    A = np.zeros((n, n))
    R = np.zeros((n, n))
    settle_tol = 1e-6 * max(float(S.max() - S.min()), 1e-300)
    last_exemplars: np.ndarray | None = None
    stable = 0
    converged = False
    iterations = 0
    for iterations in range(1, cfg.max_iter + 1):
        # responsibilities: r(i,k) = s(i,k) - max_{k'!=k} (a(i,k') + s(i,k'))
        AS = A + S
        top = AS.argmax(axis=1)
        best = AS[ind, top]
        AS[ind, top] = -np.inf
        second = AS.max(axis=1)
        Rnew = S - best[:, None]
        Rnew[ind, top] = S[ind, top] - second
        Rnew = cfg.damping * R + (1.0 - cfg.damping) * Rnew
        r_delta = float(np.max(np.abs(Rnew - R)))
        R = Rnew
        # availabilities: a(i,k) = min(0, r(k,k) + sum_{i' not in {i,k}} max(0, r(i',k)))
        Rp = np.maximum(R, 0.0)
        Rp[ind, ind] = R[ind, ind]
        colsum = Rp.sum(axis=0)
        Anew = colsum[None, :] - Rp
        diag = Anew[ind, ind].copy()
        Anew = np.minimum(Anew, 0.0)
        Anew[ind, ind] = diag
        Anew = cfg.damping * A + (1.0 - cfg.damping) * Anew
        a_delta = float(np.max(np.abs(Anew - A)))
        A = Anew

        settled = max(r_delta, a_delta) <= settle_tol
        exemplars = np.flatnonzero(np.diag(A) + np.diag(R) > 0.0)
        if (settled and exemplars.size > 0
                and last_exemplars is not None
                and np.array_equal(exemplars, last_exemplars)):
            stable += 1
        else:
            stable = 1 if settled and exemplars.size > 0 else 0
        last_exemplars = exemplars
        if stable >= cfg.convergence_iter:
            converged = True
            break
    return np.diag(A) + np.diag(R), converged, iterations


def affinity_propagation(S: np.ndarray, cfg: ApConfig = ApConfig()) -> ApResult:
    """Cluster items given a square similarity matrix with preferences set.

    Non-convergence at ``max_iter`` is not an error: the current exemplar
    estimate is returned with ``converged=False`` and a warning log.
    """
    S = np.asarray(S, dtype=np.float64)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError("S must be a square matrix")
    n = S.shape[0]
    if n == 0:
        raise ValueError("cannot cluster zero items")
    if not np.all(np.isfinite(S)):
        raise ValueError("S must be finite")
    if n == 1:
        return ApResult(exemplar_of={0: 0}, clusters=((0, (0,)),),
                        converged=True, iterations=0)

    reps, rep_of = _collapse_duplicates(S)
    idx = np.array(reps)
    Sr = S[np.ix_(idx, idx)].copy()
    m = len(reps)
    if m == 1:
        exemplar_of = {i: reps[0] for i in range(n)}
        return ApResult(exemplar_of=exemplar_of,
                        clusters=((reps[0], tuple(range(n))),),
                        converged=True, iterations=0)

    # noise must be resolvable at the similarity magnitude or it cannot
    # break symmetry; keep it <= 1e-12 relative to the similarity span
    rng = np.random.default_rng(_NOISE_SEED)
    span = max(float(Sr.max() - Sr.min()), 1.0)
    Sr += rng.uniform(-1.0, 1.0, size=Sr.shape) * (_NOISE_SCALE * span)

    evidence, converged, iterations = _message_pass(Sr, cfg)
    exemplars = np.flatnonzero(evidence > 0.0)
    if exemplars.size == 0:
        exemplars = np.array([int(np.argmax(evidence))])
        converged = False
    if not converged:
        logger.warning(
            "affinity propagation did not converge after %d iterations "
            "(%d exemplars at termination)", iterations, exemplars.size)

    # assign to most similar exemplar, then refine exemplars to cluster medoids
    labels = np.argmax(Sr[:, exemplars], axis=1)
    labels[exemplars] = np.arange(exemplars.size)
    for k in range(exemplars.size):
        members = np.flatnonzero(labels == k)
        within = Sr[np.ix_(members, members)].sum(axis=0)
        exemplars[k] = members[int(np.argmax(within))]
    exemplars = np.unique(exemplars)
    labels = np.argmax(Sr[:, exemplars], axis=1)
    labels[exemplars] = np.arange(exemplars.size)

    pos_of = {r: p for p, r in enumerate(reps)}
    exemplar_of: dict[int, int] = {}
    for i in range(n):
        pos = pos_of[rep_of[i]]
        exemplar_of[i] = int(idx[exemplars[labels[pos]]])

    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(exemplar_of[i], []).append(i)
    clusters = tuple(
        (e, tuple(members))
        for e, members in sorted(groups.items(),
                                 key=lambda kv: (-len(kv[1]), kv[0])))
    return ApResult(exemplar_of=exemplar_of, clusters=clusters,
                    converged=converged, iterations=iterations)


def cluster_features(features: np.ndarray, cfg: ApConfig = ApConfig(),
                     ) -> tuple[ApResult, np.ndarray]:
    """Convenience: similarity matrix (per cfg.preference) + propagation.

    Returns the result together with the noise-free similarity matrix so
    callers can rank members by similarity to their exemplar.
    """
    S = similarity_matrix(features, preference=cfg.preference)
    return affinity_propagation(S, cfg), S


class ApCluster(ClusterMixin, BaseEstimator):
    """Estimator wrapper: fit(X) labels rows by affinity-propagation cluster.

    ``labels_`` are cluster ranks (0 = largest cluster); exemplar row
    indices are exposed as ``exemplar_indices_``.
    """

    def __init__(self, damping: float = 0.9, max_iter: int = 500,
                 convergence_iter: int = 25,
                 preference: float | str = "median"):
        self.damping = damping
        self.max_iter = max_iter
        self.convergence_iter = convergence_iter
        self.preference = preference

    def fit(self, X, y=None):
        X = check_array(X)
        cfg = ApConfig(damping=self.damping, max_iter=self.max_iter,
                       convergence_iter=self.convergence_iter,
                       preference=self.preference)
        result, S = cluster_features(X, cfg)
        self.result_ = result
        self.similarity_ = S
        self.labels_ = result.labels()
        self.exemplar_indices_ = result.exemplars
        self.n_features_in_ = X.shape[1]
        return self
