import numpy as np
import pytest

from geofair.audit import (REPORT_CSV_HEADER, audit_matrix, feature_complete,
                           residuals, run_audit, significance_stars)
from geofair.data import Dataset
from geofair.errors import GeofairError, MissingTarget, TrainTestOverlap
from geofair.forest import ForestParams
from geofair.models import (FeatureRecipe, OlsModel, TrainedModel, fit_ols,
                            fit_rf)
from geofair.splitting import spatial_split
from geofair.synth import SynthConfig, generate, ground_truth_bias

RECIPE = FeatureRecipe(use_ntl=True, use_coords=True)


def exact_linear_dataset(village_factory, n=400, states=("T0", "T1")):
    """poverty_rate equals log1p(ntl) exactly, so an identity OLS model has
    zero residual everywhere."""
    rng = np.random.default_rng(14)
    records = []
    for i in range(n):
        ntl = float(rng.uniform(0.0, np.e - 1.0))
        records.append(village_factory(
            i, state=states[i % len(states)],
            ntl=ntl, poverty_rate=float(np.log1p(ntl)),
            lat=float(rng.uniform(8, 32)), lon=float(rng.uniform(70, 90)),
            population=int(rng.integers(100, 5000)),
            electricity=int(rng.integers(0, 2)),
            share_st=float(rng.uniform(0, 0.9)) if i % 3 else 0.0,
            share_sc=float(rng.uniform(0, 0.9)),
        ))
    return Dataset(records)


def identity_model(bias=0.0, train_states=("S_ELSEWHERE",)):
    return TrainedModel(
        kind="ols",
        payload=OlsModel(coefficients=np.array([bias, 1.0])),
        recipe=FeatureRecipe(use_ntl=True, use_coords=False),
        target="poverty_rate",
        train_states=tuple(train_states),
    )


def test_residual_sign_convention(village_factory):
    # yhat = 0.5 against y = 0.3 must give +0.2: positive = overestimated
    ds = Dataset([village_factory(0, ntl=np.e - 1.0, poverty_rate=0.3)])
    model = TrainedModel(kind="ols", payload=OlsModel(np.array([-0.5, 1.0])),
                         recipe=FeatureRecipe(use_ntl=True),
                         target="poverty_rate", train_states=("X",))
    eps = residuals(model, ds)  # yhat = -0.5 + log1p(e-1) = 0.5
    assert eps[0] == pytest.approx(0.2, abs=1e-12)


def test_residuals_missing_target(village_factory):
    ds = Dataset([village_factory(0, electricity=None)])
    model = TrainedModel(kind="ols", payload=OlsModel(np.array([0.0, 1.0])),
                         recipe=FeatureRecipe(use_ntl=True),
                         target="electricity", train_states=("X",))
    with pytest.raises(MissingTarget):
        residuals(model, ds)


def test_perfect_predictor_is_fair(village_factory):
    ds = exact_linear_dataset(village_factory)
    report = run_audit(ds, identity_model(), "ST")
    assert report.mean_residual_diff == 0.0
    assert report.p_t == 1.0
    assert report.t_sign == "0"


def test_uniform_bias_alone_is_not_flagged(village_factory):
    # every treatment village has an exact control twin (same features, same
    # ntl, same target), so the matched residuals cancel bitwise even though
    # the model overpredicts everyone by 0.1: a large group mean residual is
    # not a bias flag on its own
    rng = np.random.default_rng(15)
    records = []
    for i in range(150):
        fields = dict(
            lat=float(rng.uniform(8, 32)), lon=float(rng.uniform(70, 90)),
            ntl=float(rng.uniform(0, 40)),
            poverty_rate=float(rng.uniform(0, 1)),
            electricity=int(rng.integers(0, 2)),
            population=int(rng.integers(100, 9000)),
        )
        records.append(village_factory(2 * i, state="A", share_st=0.5, **fields))
        records.append(village_factory(2 * i + 1, state="A", share_st=0.0, **fields))
    ds = Dataset(records)
    report = run_audit(ds, identity_model(bias=0.1), "ST")
    eps = residuals(identity_model(bias=0.1), ds)
    assert abs(float(np.mean(eps))) > 0.05  # the raw group residual is large
    assert report.distance_max == 0.0       # every pair is an exact twin
    assert report.mean_residual_diff == 0.0
    assert report.p_t == 1.0


def test_anti_leakage_guard(village_factory):
    ds = exact_linear_dataset(village_factory, states=("T0", "T1"))
    model = identity_model(train_states=("T1", "ELSE"))
    with pytest.raises(TrainTestOverlap) as err:
        run_audit(ds, model, "ST")
    assert "T1" in str(err.value)
    report = run_audit(ds, model, "ST", allow_in_sample=True)
    assert report.n_pairs > 0


def test_feature_complete_drops_missing_electricity(village_factory):
    recs = [village_factory(i, electricity=None if i < 3 else 1)
            for i in range(10)]
    audited = feature_complete(Dataset(recs))
    assert len(audited) == 7
    assert all(r.electricity is not None for r in audited)


def test_significance_stars():
    assert significance_stars(0.005) == "***"
    assert significance_stars(0.02) == "**"
    assert significance_stars(0.07) == "*"
    assert significance_stars(0.2) == ""


# ---------------------------------------------------------------------------
# end-to-end on synthetic data
# ---------------------------------------------------------------------------

def pipeline(seed, delta_st=0.0, delta_sc=0.0, n_villages=8000, n_states=8,
             rf_params=ForestParams(n_estimators=15, max_depth=6,
                                    min_samples_leaf=25)):
    cfg = SynthConfig(seed=seed, n_states=n_states, n_villages=n_villages,
                      delta_st=delta_st, delta_sc=delta_sc)
    ds = generate(cfg)
    split = spatial_split(ds, seed=seed)
    train = ds.restrict_states(split.train_states)
    test = ds.restrict_states(split.test_states)
    models = {}
    for target in ("poverty_rate", "electricity"):
        models[("ols", target)] = fit_ols(train, RECIPE, target)
        models[("rf", target)] = fit_rf(train, RECIPE, target, rf_params,
                                        seed=seed)
    return cfg, test, models


def test_injected_tribe_bias_recovered_with_expected_signs():
    cfg, test, models = pipeline(seed=42, delta_st=0.6)
    expected = ground_truth_bias(cfg)["ST"]
    matrix = audit_matrix(test, models, communities=("ST",))
    for panel in ("lr", "rf"):
        pov = matrix.cell(panel, "ST", "poverty_rate")
        ele = matrix.cell(panel, "ST", "electricity")
        assert pov.t_sign == expected["poverty_rate"] == "+"
        assert ele.t_sign == expected["electricity"] == "-"
        assert pov.p_t < 0.01
        assert ele.p_t < 0.01


def test_injected_caste_inflation_flips_signs():
    cfg, test, models = pipeline(seed=43, delta_sc=0.6)
    expected = ground_truth_bias(cfg)["SC"]
    matrix = audit_matrix(test, models, communities=("SC",))
    for panel in ("lr", "rf"):
        assert matrix.cell(panel, "SC", "poverty_rate").t_sign == \
            expected["poverty_rate"] == "-"
        assert matrix.cell(panel, "SC", "electricity").t_sign == \
            expected["electricity"] == "+"


def test_null_pipeline_not_significant_pinned_seed():
    _, test, models = pipeline(seed=44)
    matrix = audit_matrix(test, models)
    for report in matrix.reports:
        assert report.p_t > 0.01


def test_audit_matrix_shape_and_determinism():
    _, test, models = pipeline(seed=45, delta_st=0.4, n_villages=4000,
                               n_states=5)
    m1 = audit_matrix(test, models)
    m2 = audit_matrix(test, models)
    assert len(m1.reports) == 8
    assert m1.to_csv() == m2.to_csv()
    assert m1.to_text() == m2.to_text()
    lines = m1.to_csv().strip().split("\n")
    assert lines[0] == REPORT_CSV_HEADER
    assert len(lines) == 9
    text = m1.to_text()
    assert "Panel 1: Linear Regression" in text
    assert "Panel 2: Random Forest" in text
    assert "Significance: * p<0.1, ** p<0.05, *** p<0.01" in text


def test_audit_matrix_atomicity():
    _, test, models = pipeline(seed=46, n_villages=2000, n_states=4)
    incomplete = dict(models)
    del incomplete[("rf", "electricity")]
    with pytest.raises(GeofairError):
        audit_matrix(test, incomplete)


def test_audit_matrix_n_accounting():
    _, test, models = pipeline(seed=47, n_villages=4000, n_states=5)
    for report in audit_matrix(test, models).reports:
        assert report.n_pairs == report.n_treatment
        assert report.n_control_unique <= report.n_control_pool
        assert 0.0 <= report.p_t <= 1.0
        assert 0.0 <= report.p_u <= 1.0
        assert report.control_reuse_max >= 1
        assert report.distance_p50 <= report.distance_p90 <= report.distance_max
