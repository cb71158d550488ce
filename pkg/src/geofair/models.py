"""Predictors for village development indicators.

Two model families over the same feature recipes:

  * lin-log OLS: target on an intercept plus log(1 + ntl) and optionally the
    village coordinates; solved by a numerically stable orthogonal
    decomposition (numpy lstsq), never by explicit normal-equations
    inversion. Binary electricity is fit with the same machinery (linear
    probability model), predictions unclipped.
  * random-forest regression on raw ntl (trees are scale-invariant, no
    transform needed) and optionally coordinates.

Hyperparameters are tuned by grid search with spatial k-fold CV: folds are
whole states, scored by mean out-of-fold R^2, ties broken toward the
simpler model (smaller depth, then fewer trees, then larger leaves).
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .data import Dataset
from .errors import ConstantTarget, InsufficientData, RankDeficient
from .forest import ForestParams, TreeArrays, fit_forest, predict_forest
from .splitting import FoldAssignment

TARGETS = ("poverty_rate", "electricity")

MODEL_FORMAT = "geofair-model"
MODEL_VERSION = 1


@dataclass(frozen=True)
class FeatureRecipe:
    use_ntl: bool = True
    use_coords: bool = False

    def validate(self) -> None:
        if not (self.use_ntl or self.use_coords):
            raise ValueError("recipe must enable at least one feature")

    @property
    def n_features(self) -> int:
        return int(self.use_ntl) + 2 * int(self.use_coords)

    def matrix(self, ds: Dataset, log_ntl: bool) -> np.ndarray:
        """Feature columns in fixed order: ntl (raw or log1p), lat, lon."""
        cols = []
        if self.use_ntl:
            ntl = ds.column("ntl")
            cols.append(np.log1p(ntl) if log_ntl else ntl)
        if self.use_coords:
            cols.append(ds.column("lat"))
            cols.append(ds.column("lon"))
        return np.column_stack(cols).astype(np.float64)


@dataclass(frozen=True)
class OlsModel:
    coefficients: np.ndarray  # [intercept, per-feature slopes]


@dataclass(frozen=True)
class RandomForestModel:
    trees: tuple  # of TreeArrays
    params: ForestParams
    seed: int
    bootstrap: bool = True


@dataclass(frozen=True)
class TrainedModel:
    kind: str  # "ols" | "rf"
    payload: Union[OlsModel, RandomForestModel]
    recipe: FeatureRecipe
    target: str
    train_states: tuple  # sorted state ids the model saw


def _target_rows(ds: Dataset, target: str):
    if target not in TARGETS:
        raise ValueError(f"unknown target {target!r}; expected one of {TARGETS}")
    y = ds.column(target).astype(np.float64)
    mask = ~np.isnan(y)
    return y, mask


def fit_ols(train: Dataset, recipe: FeatureRecipe, target: str) -> TrainedModel:
    """Least-squares fit of target on [1, recipe features]; ntl enters as
    log(1 + ntl). Raises RankDeficient on collinear designs."""
    recipe.validate()
    y, mask = _target_rows(train, target)
    X = recipe.matrix(train, log_ntl=True)[mask]
    y = y[mask]
    ncols = recipe.n_features + 1
    if y.size < ncols:
        raise InsufficientData(
            f"{y.size} usable rows < {ncols} required for target {target!r}")
    design = np.column_stack([np.ones(y.size), X])
    coef, _, rank, _ = np.linalg.lstsq(design, y, rcond=None)
    if rank < ncols:
        raise RankDeficient(f"design matrix rank {rank} < {ncols} columns")
    if not np.all(np.isfinite(coef)):
        raise RankDeficient("non-finite coefficients")
    return TrainedModel(kind="ols", payload=OlsModel(coefficients=coef),
                        recipe=recipe, target=target,
                        train_states=tuple(train.states()))


def fit_rf(train: Dataset, recipe: FeatureRecipe, target: str,
           params: Optional[ForestParams] = None, seed: int = 0,
           bootstrap: bool = True, n_jobs: int = 1) -> TrainedModel:
    """Random-forest fit on raw features; deterministic in (data, params, seed)."""
    recipe.validate()
    params = params or ForestParams()
    y, mask = _target_rows(train, target)
    X = recipe.matrix(train, log_ntl=False)[mask]
    y = y[mask]
    if y.size < recipe.n_features + 1:
        raise InsufficientData(
            f"{y.size} usable rows < {recipe.n_features + 1} required")
    trees = fit_forest(X, y, params, seed=seed, bootstrap=bootstrap,
                       n_jobs=n_jobs)
    payload = RandomForestModel(trees=trees, params=params, seed=seed,
                                bootstrap=bootstrap)
    return TrainedModel(kind="rf", payload=payload, recipe=recipe,
                        target=target, train_states=tuple(train.states()))


def predict(model: TrainedModel, ds: Dataset) -> np.ndarray:
    """One finite prediction per record, aligned with ds order."""
    if model.kind == "ols":
        X = model.recipe.matrix(ds, log_ntl=True)
        design = np.column_stack([np.ones(len(ds)), X])
        return design @ model.payload.coefficients
    if model.kind == "rf":
        X = model.recipe.matrix(ds, log_ntl=False)
        return predict_forest(model.payload.trees, X)
    raise ValueError(f"unknown model kind {model.kind!r}")


def r_squared(y, y_hat) -> float:
    """1 - SS_res/SS_tot about the mean of y; may be negative."""
    y = np.asarray(y, dtype=np.float64)
    y_hat = np.asarray(y_hat, dtype=np.float64)
    if y.shape != y_hat.shape or y.ndim != 1 or y.size < 2:
        raise ValueError("r_squared needs two equal-length vectors of size >= 2")
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    if ss_tot == 0.0:
        raise ConstantTarget("R^2 undefined: target vector is constant")
    ss_res = float(np.sum((y - y_hat) ** 2))
    return 1.0 - ss_res / ss_tot


# ---------------------------------------------------------------------------
# spatial-CV grid search
# ---------------------------------------------------------------------------

DEFAULT_GRID_DEPTHS = (2, 4, 8, 16, None)
DEFAULT_GRID_ESTIMATORS = (50, 100, 200)
DEFAULT_GRID_MIN_LEAF = (1, 5, 25)


def default_grid() -> list:
    return [ForestParams(n_estimators=n, max_depth=d, min_samples_leaf=m)
            for d, n, m in itertools.product(
                DEFAULT_GRID_DEPTHS, DEFAULT_GRID_ESTIMATORS, DEFAULT_GRID_MIN_LEAF)]


@dataclass(frozen=True)
class GridSearchResult:
    best: ForestParams
    table: tuple  # of (ForestParams, mean_r2, per-fold r2 tuple)


def _simpler(a: ForestParams, b: ForestParams) -> bool:
    """True if a is preferred over b on an exact score tie."""
    da = math.inf if a.max_depth is None else a.max_depth
    db = math.inf if b.max_depth is None else b.max_depth
    return (da, a.n_estimators, -a.min_samples_leaf) < (db, b.n_estimators, -b.min_samples_leaf)


def _fold_fit_seed(seed: int, combo: int, fold: int) -> int:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(combo, fold))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def grid_search(train: Dataset, folds: FoldAssignment, recipe: FeatureRecipe,
                target: str, grid=None, seed: int = 0) -> GridSearchResult:
    """Mean out-of-fold R^2 per hyperparameter combination; returns the argmax
    with ties broken toward the simpler model."""
    grid = list(grid) if grid is not None else default_grid()
    if not grid:
        raise ValueError("grid must be non-empty")
    fold_ids = sorted(set(folds.fold_of_state.values()))
    fold_sets = []
    for fid in fold_ids:
        held = {s for s, f in folds.fold_of_state.items() if f == fid}
        kept = set(folds.fold_of_state) - held
        fold_sets.append((train.restrict_states(kept), train.restrict_states(held)))

    best_params = None
    best_score = -math.inf
    table = []
    for ci, params in enumerate(grid):
        fold_scores = []
        for fi, (fit_ds, val_ds) in enumerate(fold_sets):
            model = fit_rf(fit_ds, recipe, target, params,
                           seed=_fold_fit_seed(seed, ci, fi))
            y_val, mask = _target_rows(val_ds, target)
            score = r_squared(y_val[mask], predict(model, val_ds)[mask])
            fold_scores.append(score)
        mean_score = float(np.mean(fold_scores))
        table.append((params, mean_score, tuple(fold_scores)))
        if mean_score > best_score or (
                mean_score == best_score and _simpler(params, best_params)):
            best_score = mean_score
            best_params = params
    return GridSearchResult(best=best_params, table=tuple(table))


# ---------------------------------------------------------------------------
# model (de)serialization
# ---------------------------------------------------------------------------

def model_to_json(model: TrainedModel) -> str:
    doc = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "kind": model.kind,
        "target": model.target,
        "recipe": {"use_ntl": model.recipe.use_ntl,
                   "use_coords": model.recipe.use_coords},
        "train_states": list(model.train_states),
    }
    if model.kind == "ols":
        doc["coefficients"] = [float(c) for c in model.payload.coefficients]
    else:
        p = model.payload
        doc["seed"] = p.seed
        doc["bootstrap"] = p.bootstrap
        doc["params"] = {"n_estimators": p.params.n_estimators,
                         "max_depth": p.params.max_depth,
                         "min_samples_leaf": p.params.min_samples_leaf}
        doc["trees"] = [{
            "feature": t.feature.tolist(),
            "threshold": t.threshold.tolist(),
            "left": t.left.tolist(),
            "right": t.right.tolist(),
            "value": t.value.tolist(),
            "n_samples": t.n_samples.tolist(),
        } for t in p.trees]
    return json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"


def model_from_json(text: str) -> TrainedModel:
    doc = json.loads(text)
    if doc.get("format") != MODEL_FORMAT or doc.get("version") != MODEL_VERSION:
        raise ValueError("not a recognized geofair model document")
    recipe = FeatureRecipe(**doc["recipe"])
    if doc["kind"] == "ols":
        payload: Union[OlsModel, RandomForestModel] = OlsModel(
            coefficients=np.asarray(doc["coefficients"], dtype=np.float64))
    elif doc["kind"] == "rf":
        trees = tuple(TreeArrays(
            feature=np.asarray(t["feature"], dtype=np.int32),
            threshold=np.asarray(t["threshold"], dtype=np.float64),
            left=np.asarray(t["left"], dtype=np.int32),
            right=np.asarray(t["right"], dtype=np.int32),
            value=np.asarray(t["value"], dtype=np.float64),
            n_samples=np.asarray(t["n_samples"], dtype=np.int32),
        ) for t in doc["trees"])
        payload = RandomForestModel(
            trees=trees,
            params=ForestParams(**doc["params"]),
            seed=doc["seed"],
            bootstrap=doc["bootstrap"])
    else:
        raise ValueError(f"unknown model kind {doc['kind']!r}")
    return TrainedModel(kind=doc["kind"], payload=payload, recipe=recipe,
                        target=doc["target"],
                        train_states=tuple(doc["train_states"]))


def save_model(model: TrainedModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(model_to_json(model))


def load_model(path) -> TrainedModel:
    with open(path, encoding="utf-8") as fh:
        return model_from_json(fh.read())
