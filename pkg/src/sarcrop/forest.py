"""From-scratch CART trees and random forest, plus randomized-search CV.

Trees are grown on Gini impurity with midpoint thresholds between
consecutive sorted feature values, a random feature subset per node
(sqrt or log2 of the feature count), and bootstrap resampling per tree.
Every random stream is derived from (seed, tree index), so serial and
parallel training produce identical forests and a forest's first n trees
do not depend on how many more are grown.
"""

from __future__ import annotations

import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

_GAIN_EPS = 1e-12  # a split must beat the parent impurity by more than float noise


class ForestError(ValueError):
    """Invalid training data, hyperparameters, or model file."""


@dataclass(frozen=True)
class Hyperparams:
    n_estimators: int = 100
    max_features_rule: str = "sqrt"
    min_samples_leaf: int = 1
    min_samples_split: int = 2
    max_depth: int | None = None
    criterion: str = "gini"
    bootstrap: bool = True

    def __post_init__(self):
        if self.n_estimators < 1:
            raise ForestError("n_estimators must be >= 1")
        if self.min_samples_split < 2:
            raise ForestError("min_samples_split must be >= 2")
        if self.min_samples_leaf < 1:
            raise ForestError("min_samples_leaf must be >= 1")
        if self.max_features_rule not in ("sqrt", "log2"):
            raise ForestError(f"unknown max_features_rule {self.max_features_rule!r}")
        if self.criterion != "gini":
            raise ForestError(f"unsupported criterion {self.criterion!r}")
        if self.max_depth is not None and self.max_depth < 1:
            raise ForestError("max_depth must be >= 1 or None")

    def max_features(self, n_features: int) -> int:
        if self.max_features_rule == "sqrt":
            m = int(math.sqrt(n_features))
        else:
            m = int(math.log2(n_features)) if n_features > 1 else 1
        return max(1, min(m, n_features))


def gini(counts) -> float:
    """Gini impurity 1 - sum((c_i/n)^2) of a class-count vector."""
    counts = np.asarray(counts, dtype=np.float64)
    if np.any(counts < 0):
        raise ForestError("class counts must be >= 0")
    total = counts.sum()
    if total <= 0:
        raise ForestError("gini of an empty count vector is undefined")
    p = counts / total
    return float(1.0 - np.dot(p, p))


@dataclass
class Tree:
    """Binary decision tree in pre-order arrays.

    feature[i] == -1 marks a leaf; counts holds the training class counts
    reaching each leaf (zero rows for internal nodes).
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    counts: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def leaf_proportions(self, X: np.ndarray) -> np.ndarray:
        """Per-sample class-proportion vector of the leaf each sample reaches."""
        node = np.zeros(len(X), dtype=np.int64)
        active = self.feature[node] >= 0
        while np.any(active):
            idx = np.nonzero(active)[0]
            nd = node[idx]
            f = self.feature[nd]
            go_left = X[idx, f] <= self.threshold[nd]
            node[idx] = np.where(go_left, self.left[nd], self.right[nd])
            active[idx] = self.feature[node[idx]] >= 0
        leaf_counts = self.counts[node].astype(np.float64)
        return leaf_counts / leaf_counts.sum(axis=1, keepdims=True)


def _grow_tree(
    X: np.ndarray,
    y_idx: np.ndarray,
    n_classes: int,
    hp: Hyperparams,
    rng: np.random.Generator,
) -> tuple[Tree, np.ndarray]:
    """Grow one tree; returns the tree and the in-bag count per sample."""
    n, n_features = X.shape
    if hp.bootstrap:
        bag = rng.integers(0, n, size=n)
        inbag = np.bincount(bag, minlength=n)
        idx0 = np.nonzero(inbag)[0].astype(np.int64)
        w0 = inbag[idx0].astype(np.int64)
    else:
        inbag = np.ones(n, dtype=np.int64)
        idx0 = np.arange(n, dtype=np.int64)
        w0 = np.ones(n, dtype=np.int64)

    mtry = hp.max_features(n_features)
    msl = hp.min_samples_leaf

    features: list[int] = []
    thresholds: list[float] = []
    lefts: list[int] = []
    rights: list[int] = []
    counts_rows: list[np.ndarray] = []

    # explicit stack gives pre-order: node, left subtree, right subtree
    stack: list[tuple[int, int, np.ndarray, np.ndarray, int]] = [(-1, 0, idx0, w0, 0)]
    while stack:
        parent, side, idx, w, depth = stack.pop()
        me = len(features)
        if parent >= 0:
            (lefts if side == 0 else rights)[parent] = me

        yv = y_idx[idx]
        counts = np.zeros(n_classes, dtype=np.int64)
        np.add.at(counts, yv, w)
        total = int(counts.sum())
        pure = counts.max() == total
        depth_stop = hp.max_depth is not None and depth >= hp.max_depth

        split = None
        if not pure and not depth_stop and total >= hp.min_samples_split:
            split = _best_split(X, idx, w, yv, counts, total, mtry, msl, rng)
        if split is None:
            features.append(-1)
            thresholds.append(0.0)
            lefts.append(-1)
            rights.append(-1)
            counts_rows.append(counts)
            continue

        f, thr = split
        features.append(f)
        thresholds.append(thr)
        lefts.append(-1)
        rights.append(-1)
        counts_rows.append(np.zeros(n_classes, dtype=np.int64))
        go_left = X[idx, f] <= thr
        # push right first so the left subtree is emitted first (pre-order)
        stack.append((me, 1, idx[~go_left], w[~go_left], depth + 1))
        stack.append((me, 0, idx[go_left], w[go_left], depth + 1))

    tree = Tree(
        feature=np.array(features, dtype=np.int32),
        threshold=np.array(thresholds, dtype=np.float64),
        left=np.array(lefts, dtype=np.int32),
        right=np.array(rights, dtype=np.int32),
        counts=np.vstack(counts_rows).astype(np.int64),
    )
    return tree, inbag


def _best_split(X, idx, w, yv, counts, total, mtry, msl, rng):
    """Best (feature, threshold) by weighted Gini over a random feature subset.

    Candidate thresholds are midpoints between consecutive distinct sorted
    values. Returns None when no candidate strictly decreases impurity.
    Ties break to the lowest feature index, then the lowest threshold.
    """
    n_features = X.shape[1]
    feats = np.sort(rng.choice(n_features, size=mtry, replace=False))
    Xn = X[np.ix_(idx, feats)]
    n = len(idx)
    n_classes = len(counts)

    order = np.argsort(Xn, axis=0, kind="stable")
    Xs = np.take_along_axis(Xn, order, axis=0)
    # weighted one-hot class matrix, gathered into each feature's sort order
    Y1 = np.zeros((n, n_classes), dtype=np.float64)
    Y1[np.arange(n), yv] = w
    L = np.cumsum(Y1[order], axis=0)                     # (n, mtry, n_classes)

    NL = L[:-1].sum(axis=2)                              # samples on the left
    NR = total - NL
    SSL = np.einsum("pfc,pfc->pf", L[:-1], L[:-1])
    R = counts[None, None, :] - L[:-1]
    SSR = np.einsum("pfc,pfc->pf", R, R)
    with np.errstate(divide="ignore", invalid="ignore"):
        weighted = ((NL - SSL / NL) + (NR - SSR / NR)) / total

    ok = (Xs[1:] > Xs[:-1]) & (NL >= msl) & (NR >= msl)
    parent = 1.0 - float(np.dot(counts, counts)) / (total * total)
    ok &= (parent - weighted) > _GAIN_EPS
    if not ok.any():
        return None
    weighted = np.where(ok, weighted, np.inf)
    # feature-major argmin: ties fall to the lowest feature, then lowest threshold
    flat = np.argmin(weighted.T.ravel())
    fi, pos = divmod(flat, weighted.shape[0])
    lo, hi = Xs[pos, fi], Xs[pos + 1, fi]
    thr = (lo + hi) / 2.0
    if thr >= hi:  # midpoint rounded up to the right value; fall back
        thr = lo
    return int(feats[fi]), float(thr)


@dataclass
class ForestModel:
    """Trained ensemble with enough metadata to reproduce and apply it."""

    trees: list[Tree]
    classes: np.ndarray
    hyperparams: Hyperparams
    seed: int
    n_features: int
    level: int | None = None
    stratum: int | None = None
    window: str | None = None
    feature_names: tuple[str, ...] | None = None
    oob_accuracy: float | None = None

    @property
    def n_classes(self) -> int:
        return len(self.classes)


def _tree_rng(seed: int, tree_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(tree_index,)))


def _resolve_xy(samples, labels):
    if labels is None and hasattr(samples, "features"):
        return (
            np.asarray(samples.features, dtype=np.float64),
            np.asarray(samples.labels),
            getattr(samples, "window", None),
        )
    return np.asarray(samples, dtype=np.float64), np.asarray(labels), None


def train(
    samples,
    labels=None,
    hp: Hyperparams = Hyperparams(),
    seed: int = 0,
    n_jobs: int = 1,
    level: int | None = None,
    stratum: int | None = None,
    compute_oob: bool = True,
) -> ForestModel:
    """Fit a forest on (features, labels) arrays or a SampleSet.

    Deterministic for a given seed: tree t draws from a stream keyed by
    (seed, t) regardless of n_jobs or n_estimators.
    """
    X, y, window = _resolve_xy(samples, labels)
    if X.ndim != 2 or len(X) == 0:
        raise ForestError("training needs a non-empty 2-D feature matrix")
    if len(X) != len(y):
        raise ForestError("features and labels disagree in length")
    if not np.all(np.isfinite(X)):
        raise ForestError("training features must be finite (no NaN/inf)")
    classes = np.unique(y)
    if len(classes) < 2:
        raise ForestError(f"training needs at least 2 classes, got {classes.tolist()}")
    y_idx = np.searchsorted(classes, y)

    def build(t: int):
        return _grow_tree(X, y_idx, len(classes), hp, _tree_rng(seed, t))

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            grown = list(pool.map(build, range(hp.n_estimators)))
    else:
        grown = [build(t) for t in range(hp.n_estimators)]
    trees = [g[0] for g in grown]

    oob_accuracy = None
    if hp.bootstrap and compute_oob:
        votes = np.zeros((len(X), len(classes)), dtype=np.float64)
        seen = np.zeros(len(X), dtype=np.int64)
        for tree, inbag in grown:
            oob = inbag == 0
            if oob.any():
                votes[oob] += tree.leaf_proportions(X[oob])
                seen[oob] += 1
        covered = seen > 0
        if covered.any():
            pred = np.argmax(votes[covered], axis=1)
            oob_accuracy = float(np.mean(pred == y_idx[covered]))

    return ForestModel(
        trees=trees,
        classes=classes.astype(np.int64),
        hyperparams=hp,
        seed=seed,
        n_features=X.shape[1],
        level=level,
        stratum=stratum,
        window=window.describe() if window is not None else None,
        feature_names=tuple(window.feature_names()) if window is not None else None,
        oob_accuracy=oob_accuracy,
    )


def predict(model: ForestModel, features: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(class codes, per-class vote fractions) for a batch of feature rows.

    The class is the argmax of leaf class-proportions summed over trees;
    exact ties go to the lowest class code.
    """
    X = np.atleast_2d(np.asarray(features, dtype=np.float64))
    if X.shape[1] != model.n_features:
        raise ForestError(
            f"feature length {X.shape[1]} does not match model ({model.n_features})"
        )
    votes = np.zeros((len(X), model.n_classes), dtype=np.float64)
    for tree in model.trees:
        votes += tree.leaf_proportions(X)
    votes /= len(model.trees)
    # classes are sorted ascending, so argmax's first-hit rule is the tie-break
    return model.classes[np.argmax(votes, axis=1)], votes


# ---------------------------------------------------------------------------
# Randomized-search k-fold cross-validation (folds grouped on polygon ids)
# ---------------------------------------------------------------------------

@dataclass
class CVResult:
    candidates: list[Hyperparams]
    fold_scores: np.ndarray
    mean_scores: np.ndarray
    best_index: int
    n_fits: int

    @property
    def best(self) -> Hyperparams:
        return self.candidates[self.best_index]


def _sample_candidates(grid: dict, n_candidates: int, rng: np.random.Generator) -> list[Hyperparams]:
    # independent uniform draws per parameter (duplicates possible and kept:
    # the fit budget is n_candidates * k by contract)
    keys = sorted(grid)
    for k in keys:
        if not isinstance(grid[k], (list, tuple)) or not grid[k]:
            raise ForestError(f"grid entry {k!r} must be a non-empty list")
    out = []
    for _ in range(n_candidates):
        chosen = {k: grid[k][int(rng.integers(len(grid[k])))] for k in keys}
        out.append(Hyperparams(**chosen))
    return out


def grouped_folds(groups: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Fold index per row, constant within each group (polygon)."""
    uniq = np.unique(groups)
    if len(uniq) < k:
        raise ForestError(f"{len(uniq)} polygons cannot form {k} folds")
    perm = rng.permutation(uniq)
    fold_of = {g: i % k for i, g in enumerate(perm)}
    return np.array([fold_of[g] for g in groups], dtype=np.int64)


def random_search_cv(
    samples,
    labels=None,
    groups=None,
    *,
    grid: dict,
    n_candidates: int = 100,
    k_folds: int = 3,
    seed: int = 0,
    n_jobs: int = 1,
) -> CVResult:
    """Sample hyperparameter combinations and rank them by k-fold accuracy.

    Folds split on polygon ids, never on pixels, so no polygon's rows
    appear in both sides of a fold. Scoring is overall accuracy. Exactly
    n_candidates * k_folds model fits are executed.
    """
    X, y, _ = _resolve_xy(samples, labels)
    if groups is None:
        if hasattr(samples, "polygon_ids"):
            groups = np.asarray(samples.polygon_ids)
        else:
            raise ForestError("random_search_cv needs polygon group ids")
    if k_folds < 2:
        raise ForestError("k_folds must be >= 2")
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(0xC5,)))
    candidates = _sample_candidates(grid, n_candidates, rng)
    folds = grouped_folds(np.asarray(groups), k_folds, rng)

    fold_scores = np.zeros((n_candidates, k_folds), dtype=np.float64)
    n_fits = 0
    for ci, hp in enumerate(candidates):
        for fi in range(k_folds):
            test = folds == fi
            model = train(
                X[~test], y[~test], hp=hp,
                seed=int(np.random.SeedSequence(entropy=seed, spawn_key=(ci, fi)).generate_state(1)[0]),
                n_jobs=n_jobs, compute_oob=False,
            )
            n_fits += 1
            pred, _ = predict(model, X[test])
            fold_scores[ci, fi] = float(np.mean(pred == y[test]))
    mean_scores = fold_scores.mean(axis=1)
    best_index = int(np.argmax(mean_scores))
    return CVResult(
        candidates=candidates,
        fold_scores=fold_scores,
        mean_scores=mean_scores,
        best_index=best_index,
        n_fits=n_fits,
    )


# ---------------------------------------------------------------------------
# Model file: text header + pre-order little-endian binary tree blocks
# ---------------------------------------------------------------------------

_MAGIC = b"sarcrop-forest v1\n"


def serialize_model(model: ForestModel) -> bytes:
    hp = model.hyperparams
    header = [
        f"level={model.level if model.level is not None else '-'}",
        f"stratum={model.stratum if model.stratum is not None else '-'}",
        "classes=" + ",".join(str(c) for c in model.classes),
        f"n_features={model.n_features}",
        f"window={model.window or '-'}",
        f"feature_names={','.join(model.feature_names) if model.feature_names else '-'}",
        f"n_estimators={hp.n_estimators}",
        f"max_features_rule={hp.max_features_rule}",
        f"min_samples_leaf={hp.min_samples_leaf}",
        f"min_samples_split={hp.min_samples_split}",
        f"max_depth={hp.max_depth if hp.max_depth is not None else 'none'}",
        f"criterion={hp.criterion}",
        f"bootstrap={'true' if hp.bootstrap else 'false'}",
        f"seed={model.seed}",
        f"oob_accuracy={repr(model.oob_accuracy) if model.oob_accuracy is not None else 'none'}",
        f"n_trees={len(model.trees)}",
        "end-header",
    ]
    buf = io.BytesIO()
    buf.write(_MAGIC)
    buf.write(("\n".join(header) + "\n").encode())
    for tree in model.trees:
        buf.write(np.array([tree.n_nodes], dtype="<u4").tobytes())
        buf.write(tree.feature.astype("<i4").tobytes())
        buf.write(tree.threshold.astype("<f8").tobytes())
        buf.write(tree.left.astype("<i4").tobytes())
        buf.write(tree.right.astype("<i4").tobytes())
        buf.write(tree.counts.astype("<i8").tobytes())
    return buf.getvalue()


def deserialize_model(raw: bytes) -> ForestModel:
    if not raw.startswith(_MAGIC):
        raise ForestError("not a sarcrop forest model file")
    head_end = raw.index(b"end-header\n") + len(b"end-header\n")
    fields = {}
    for line in raw[len(_MAGIC):head_end].decode().splitlines():
        if line == "end-header":
            break
        k, v = line.split("=", 1)
        fields[k] = v
    classes = np.array([int(c) for c in fields["classes"].split(",")], dtype=np.int64)
    n_classes = len(classes)
    hp = Hyperparams(
        n_estimators=int(fields["n_estimators"]),
        max_features_rule=fields["max_features_rule"],
        min_samples_leaf=int(fields["min_samples_leaf"]),
        min_samples_split=int(fields["min_samples_split"]),
        max_depth=None if fields["max_depth"] == "none" else int(fields["max_depth"]),
        criterion=fields["criterion"],
        bootstrap=fields["bootstrap"] == "true",
    )
    trees = []
    off = head_end
    for _ in range(int(fields["n_trees"])):
        n_nodes = int(np.frombuffer(raw, dtype="<u4", count=1, offset=off)[0])
        off += 4
        feature = np.frombuffer(raw, dtype="<i4", count=n_nodes, offset=off).copy()
        off += 4 * n_nodes
        threshold = np.frombuffer(raw, dtype="<f8", count=n_nodes, offset=off).copy()
        off += 8 * n_nodes
        left = np.frombuffer(raw, dtype="<i4", count=n_nodes, offset=off).copy()
        off += 4 * n_nodes
        right = np.frombuffer(raw, dtype="<i4", count=n_nodes, offset=off).copy()
        off += 4 * n_nodes
        counts = np.frombuffer(raw, dtype="<i8", count=n_nodes * n_classes, offset=off).copy()
        off += 8 * n_nodes * n_classes
        trees.append(
            Tree(feature, threshold, left, right, counts.reshape(n_nodes, n_classes))
        )
    names = fields.get("feature_names", "-")
    return ForestModel(
        trees=trees,
        classes=classes,
        hyperparams=hp,
        seed=int(fields["seed"]),
        n_features=int(fields["n_features"]),
        level=None if fields["level"] == "-" else int(fields["level"]),
        stratum=None if fields["stratum"] == "-" else int(fields["stratum"]),
        window=None if fields["window"] == "-" else fields["window"],
        feature_names=None if names == "-" else tuple(names.split(",")),
        oob_accuracy=None if fields["oob_accuracy"] == "none" else float(fields["oob_accuracy"]),
    )


def save_model(model: ForestModel, path: str | Path):
    Path(path).write_bytes(serialize_model(model))


def load_model(path: str | Path) -> ForestModel:
    return deserialize_model(Path(path).read_bytes())
