"""Counterfactual matching: treatment villages paired with their nearest
control village, with replacement, in a standardized covariate space.

Group rule: a village is treatment for a community when its population share
exceeds the community's median share over the audited subset; everything at
or below the median is control. Matching runs on five covariates (latitude,
longitude, poverty rate, electrification, population), z-standardized with
pooled mean/std, under Euclidean distance (Mahalanobis available as an
option). Nearest neighbors are exact; ties go to the lexicographically
smallest control village id. Controls are reusable, so dropping one
treatment village never changes anyone else's match.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import backends
from .data import Dataset
from .errors import AllControl, AllTreatment, MissingFeature

logger = logging.getLogger(__name__)

MATCH_FEATURES = ("lat", "lon", "poverty_rate", "electricity", "population")
COMMUNITIES = ("SC", "ST")
_SHARE_COLUMN = {"SC": "share_sc", "ST": "share_st"}


@dataclass(frozen=True)
class GroupAssignment:
    """Treatment/control labels for one community over an audited subset."""
    community: str
    median_share: float
    is_treatment: np.ndarray  # bool, aligned with the audited subset


@dataclass(frozen=True)
class MatchSpace:
    """Standardization parameters estimated on the pooled audited subset."""
    features: tuple
    mean: np.ndarray
    std: np.ndarray
    metric: str = "euclidean"
    dropped: tuple = ()  # zero-variance features removed with a warning
    whitener: Optional[np.ndarray] = None  # mahalanobis only


@dataclass(frozen=True)
class MatchedPairSet:
    treatment_ids: tuple
    control_ids: tuple
    distances: np.ndarray
    n_treatment: int
    n_control_pool: int

    @property
    def n_pairs(self) -> int:
        return len(self.treatment_ids)

    def control_reuse(self) -> dict:
        """Histogram: control village id -> number of treatment villages served."""
        reuse: dict = {}
        for cid in self.control_ids:
            reuse[cid] = reuse.get(cid, 0) + 1
        return reuse

    def n_control_unique(self) -> int:
        return len(set(self.control_ids))

    def to_csv(self) -> str:
        lines = ["treatment_id,control_id,distance"]
        for tid, cid, d in zip(self.treatment_ids, self.control_ids, self.distances):
            lines.append(f"{tid},{cid},{d!r}")
        return "\n".join(lines) + "\n"


def assign_groups(ds: Dataset, community: str) -> GroupAssignment:
    """Label every village treatment (share > median) or control (share <=
    median); the median is the linear-interpolation median of the audited
    subset itself."""
    if community not in COMMUNITIES:
        raise ValueError(f"community must be one of {COMMUNITIES}, got {community!r}")
    shares = ds.column(_SHARE_COLUMN[community])
    median = float(np.median(shares))
    is_treatment = shares > median
    n_t = int(is_treatment.sum())
    if n_t == 0:
        raise AllControl(f"{community}: no village has share above the median "
                         f"({median!r}); audit aborted")
    if n_t == len(ds):
        raise AllTreatment(f"{community}: every village is above the median; "
                           "audit aborted")
    return GroupAssignment(community=community, median_share=median,
                           is_treatment=is_treatment)


def _feature_block(ds: Dataset) -> np.ndarray:
    cols = []
    for name in MATCH_FEATURES:
        col = ds.column(name).astype(np.float64)
        if np.isnan(col).any():
            i = int(np.nonzero(np.isnan(col))[0][0])
            raise MissingFeature(ds[i].village_id, name)
        cols.append(col)
    return np.column_stack(cols)


def build_match_space(pooled: Dataset, metric: str = "euclidean") -> MatchSpace:
    """Estimate per-feature mean/std (population std) on the pooled subset."""
    if metric not in ("euclidean", "mahalanobis"):
        raise ValueError(f"unknown metric {metric!r}")
    block = _feature_block(pooled)
    mean = block.mean(axis=0)
    std = block.std(axis=0)
    keep = std > 0.0
    dropped = tuple(f for f, k in zip(MATCH_FEATURES, keep) if not k)
    if dropped:
        logger.warning("match space: dropping zero-variance features %s", dropped)
    features = tuple(f for f, k in zip(MATCH_FEATURES, keep) if k)
    if not features:
        raise ValueError("all match features have zero variance")
    whitener = None
    if metric == "mahalanobis":
        z = (block[:, keep] - mean[keep]) / std[keep]
        cov = np.cov(z, rowvar=False)
        cov = np.atleast_2d(cov)
        # inverse Cholesky factor: Euclidean distance in the whitened space
        # equals Mahalanobis distance in the standardized one
        whitener = np.linalg.inv(np.linalg.cholesky(cov)).T
    return MatchSpace(features=features, mean=mean[keep], std=std[keep],
                      metric=metric, dropped=dropped, whitener=whitener)


def _standardize(ds: Dataset, space: MatchSpace) -> np.ndarray:
    cols = []
    for name in MATCH_FEATURES:
        if name not in space.features:
            continue
        col = ds.column(name).astype(np.float64)
        if np.isnan(col).any():
            i = int(np.nonzero(np.isnan(col))[0][0])
            raise MissingFeature(ds[i].village_id, name)
        cols.append(col)
    z = (np.column_stack(cols) - space.mean) / space.std
    if space.metric == "mahalanobis":
        z = z @ space.whitener
    return np.ascontiguousarray(z)


def match(treatment: Dataset, control: Dataset, space: MatchSpace) -> MatchedPairSet:
    """Exact nearest control for every treatment village, with replacement.

    Controls are presented to the KD-tree sorted by village id, so the
    smallest-index tie-break of the kernel realizes the smallest-id contract.
    """
    t_pts = _standardize(treatment, space)
    c_pts = _standardize(control, space)

    control_ids = control.village_ids()
    id_order = sorted(range(len(control_ids)), key=lambda i: control_ids[i])
    c_sorted = np.ascontiguousarray(c_pts[id_order])
    sorted_ids = [control_ids[i] for i in id_order]

    tree = backends.kdtree_build(c_sorted)
    idx, d2 = backends.kdtree_query(tree, t_pts)
    distances = np.sqrt(d2)
    return MatchedPairSet(
        treatment_ids=tuple(treatment.village_ids()),
        control_ids=tuple(sorted_ids[int(i)] for i in idx),
        distances=distances,
        n_treatment=len(treatment),
        n_control_pool=len(control),
    )
