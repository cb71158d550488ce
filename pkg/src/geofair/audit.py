"""Fairness audit pipeline: residuals on held-out villages, group assignment,
counterfactual matching, and the matched two-sample comparison.

The audit statistic is the difference between the mean prediction residual
of treatment villages and the mean residual of their matched controls (with
multiplicity: one control entry per pair). A nonzero mean residual for the
community alone is never flagged; only the matched comparison is, because an
overall over- or under-prediction pattern may hit comparable villages
outside the community just as hard. Both the t-test and the Mann-Whitney U
are always computed so their agreement can be checked.

Residual sign convention: prediction minus truth, so a positive poverty
residual means poverty was overestimated.

Matching requires electrification, so villages missing it are excluded from
both sides of every audit. Audits refuse to run on villages from the model's
own training states unless explicitly overridden.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .errors import EmptyDataset, GeofairError, MissingTarget, TrainTestOverlap
from .matching import assign_groups, build_match_space, match
from .models import TrainedModel, predict
from .stats import TestResult, mann_whitney_u, mean_diff, welch_t

logger = logging.getLogger(__name__)

PANELS = (("lr", "Panel 1: Linear Regression"),
          ("rf", "Panel 2: Random Forest"))
DEFAULT_COMMUNITIES = ("ST", "SC")
DEFAULT_TARGETS = ("poverty_rate", "electricity")

REPORT_CSV_HEADER = "panel,community,target,mean_diff,t_abs,p_t,u,p_u,n_pairs"


def significance_stars(p: float) -> str:
    if p < 0.01:
        return "***"
    if p < 0.05:
        return "**"
    if p < 0.1:
        return "*"
    return ""


@dataclass(frozen=True)
class AuditReport:
    panel: str       # "lr" | "rf"
    community: str   # "SC" | "ST"
    target: str
    mean_residual_diff: float
    t_abs: float
    t_sign: str      # "+", "-", or "0"
    t_df: float
    p_t: float
    u_statistic: float
    p_u: float
    n_pairs: int
    n_treatment: int
    n_control_pool: int
    n_control_unique: int
    distance_p50: float
    distance_p90: float
    distance_max: float
    control_reuse_max: int

    @property
    def stars(self) -> str:
        return significance_stars(self.p_t)

    def csv_row(self) -> str:
        return ",".join([
            self.panel, self.community, self.target,
            repr(self.mean_residual_diff), repr(self.t_abs), repr(self.p_t),
            repr(self.u_statistic), repr(self.p_u), str(self.n_pairs),
        ])


def residuals(model: TrainedModel, ds: Dataset) -> np.ndarray:
    """Per-village prediction minus truth for the model's target."""
    y = ds.column(model.target)
    if np.isnan(y).any():
        i = int(np.nonzero(np.isnan(y))[0][0])
        raise MissingTarget(
            f"village {ds[i].village_id!r} has no {model.target!r} value")
    return predict(model, ds) - y


def feature_complete(ds: Dataset) -> Dataset:
    """Villages usable for matching: every match feature present."""
    elec = ds.column("electricity")
    keep = np.nonzero(~np.isnan(elec))[0]
    if keep.size == 0:
        raise EmptyDataset("no feature-complete villages to audit")
    return ds.subset(keep)


def _check_leakage(model: TrainedModel, ds: Dataset, allow_in_sample: bool) -> None:
    overlap = set(model.train_states) & set(ds.states())
    if overlap and not allow_in_sample:
        raise TrainTestOverlap(overlap)


@dataclass(frozen=True)
class _CommunityMatch:
    """Pairing for one community, shared by every model/target cell."""
    treatment_rows: np.ndarray   # row indices into the audited subset
    matched_rows: np.ndarray     # audited-subset row of each pair's control
    n_control_pool: int
    n_control_unique: int
    distance_p50: float
    distance_p90: float
    distance_max: float
    control_reuse_max: int


def _match_community(audited: Dataset, community: str,
                     metric: str = "euclidean") -> _CommunityMatch:
    groups = assign_groups(audited, community)
    t_rows = np.nonzero(groups.is_treatment)[0]
    c_rows = np.nonzero(~groups.is_treatment)[0]
    treatment = audited.subset(t_rows)
    control = audited.subset(c_rows)
    space = build_match_space(audited, metric=metric)
    pairs = match(treatment, control, space)
    row_of_id = {vid: i for i, vid in enumerate(audited.village_ids())}
    matched_rows = np.asarray([row_of_id[cid] for cid in pairs.control_ids],
                              dtype=np.int64)
    d = pairs.distances
    reuse = pairs.control_reuse()
    return _CommunityMatch(
        treatment_rows=t_rows,
        matched_rows=matched_rows,
        n_control_pool=len(control),
        n_control_unique=pairs.n_control_unique(),
        distance_p50=float(np.percentile(d, 50)),
        distance_p90=float(np.percentile(d, 90)),
        distance_max=float(d.max()),
        control_reuse_max=max(reuse.values()),
    )


def _cell_report(model: TrainedModel, audited: Dataset,
                 community: str, cm: _CommunityMatch) -> AuditReport:
    eps = residuals(model, audited)
    eps_s = eps[cm.treatment_rows]
    eps_cf = eps[cm.matched_rows]
    diff = mean_diff(eps_s, eps_cf)
    t_res: TestResult = welch_t(eps_s, eps_cf)
    u_res: TestResult = mann_whitney_u(eps_s, eps_cf)
    sign = "+" if diff > 0 else "-" if diff < 0 else "0"
    panel = {"ols": "lr", "rf": "rf"}[model.kind]
    return AuditReport(
        panel=panel,
        community=community,
        target=model.target,
        mean_residual_diff=diff,
        t_abs=abs(t_res.statistic),
        t_sign=sign,
        t_df=t_res.degrees_of_freedom,
        p_t=t_res.p_two_sided,
        u_statistic=u_res.statistic,
        p_u=u_res.p_two_sided,
        n_pairs=len(cm.treatment_rows),
        n_treatment=len(cm.treatment_rows),
        n_control_pool=cm.n_control_pool,
        n_control_unique=cm.n_control_unique,
        distance_p50=cm.distance_p50,
        distance_p90=cm.distance_p90,
        distance_max=cm.distance_max,
        control_reuse_max=cm.control_reuse_max,
    )


def run_audit(test_ds: Dataset, model: TrainedModel, community: str,
              metric: str = "euclidean",
              allow_in_sample: bool = False) -> AuditReport:
    """Audit one (model, community) cell on held-out villages."""
    _check_leakage(model, test_ds, allow_in_sample)
    audited = feature_complete(test_ds)
    cm = _match_community(audited, community, metric=metric)
    return _cell_report(model, audited, community, cm)


@dataclass(frozen=True)
class AuditMatrix:
    reports: tuple  # of AuditReport, panel-major order

    def cell(self, panel: str, community: str, target: str) -> AuditReport:
        for r in self.reports:
            if (r.panel, r.community, r.target) == (panel, community, target):
                return r
        raise KeyError((panel, community, target))

    def to_csv(self) -> str:
        lines = [REPORT_CSV_HEADER]
        lines.extend(r.csv_row() for r in self.reports)
        return "\n".join(lines) + "\n"

    def to_text(self) -> str:
        out = [
            "Counterfactual audit: prediction-residual difference relative to",
            "matched comparison villages (positive = overestimated for the",
            "community group).",
            "",
        ]
        fmt = "  {:<10} {:<13} {:>14} {:>10} {:>8} {:>12} {:>8} {:>8}"
        for kind, title in PANELS:
            rows = [r for r in self.reports if r.panel == kind]
            if not rows:
                continue
            out.append(title)
            out.append("  " + "-" * 88)
            out.append(fmt.format("community", "target", "mean_diff", "|t|",
                                  "p(t)", "U", "p(U)", "pairs"))
            for r in rows:
                out.append(fmt.format(
                    r.community, r.target,
                    f"{r.mean_residual_diff:+.4f}{r.stars}",
                    f"{r.t_abs:.4f}", f"{r.p_t:.4f}",
                    f"{r.u_statistic:.1f}", f"{r.p_u:.4f}",
                    str(r.n_pairs)))
            out.append("")
        out.append("Significance: * p<0.1, ** p<0.05, *** p<0.01")
        out.append("")
        return "\n".join(out)


def audit_matrix(test_ds: Dataset, models: dict,
                 communities=DEFAULT_COMMUNITIES,
                 targets=DEFAULT_TARGETS,
                 metric: str = "euclidean",
                 allow_in_sample: bool = False) -> AuditMatrix:
    """Full audit grid: (lr, rf) panels x communities x targets.

    models maps (kind, target) -> TrainedModel with kind in {"ols", "rf"}.
    All requested cells must be coverable before any work starts; a missing
    or mismatched model aborts the whole matrix.
    """
    needed = [(kind, target) for kind in ("ols", "rf") for target in targets]
    for key in needed:
        if key not in models:
            raise GeofairError(f"audit matrix incomplete: no model for {key}")
        if models[key].target != key[1] or models[key].kind != key[0]:
            raise GeofairError(f"model registered under {key} is a "
                               f"({models[key].kind}, {models[key].target})")
    for m in models.values():
        _check_leakage(m, test_ds, allow_in_sample)

    audited = feature_complete(test_ds)
    # the pairing depends only on the community, so share it across cells
    matches = {c: _match_community(audited, c, metric=metric)
               for c in communities}
    reports = []
    for kind in ("ols", "rf"):
        for community in communities:
            for target in targets:
                reports.append(_cell_report(models[(kind, target)], audited,
                                            community, matches[community]))
    return AuditMatrix(reports=tuple(reports))
