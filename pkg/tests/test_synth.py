import numpy as np
import pytest

from geofair.data import summarize
from geofair.errors import InvalidConfig
from geofair.stats import welch_t
from geofair.synth import (SIGN_NEGATIVE, SIGN_NONE, SIGN_POSITIVE,
                           SynthConfig, generate, ground_truth_bias,
                           log_ntl_signal)


def small(seed, **kw):
    defaults = dict(n_states=5, n_villages=1000)
    defaults.update(kw)
    return SynthConfig(seed=seed, **defaults)


def test_determinism_same_seed_bit_identical():
    a = generate(small(1))
    b = generate(small(1))
    assert len(a) == len(b)
    for ra, rb in zip(a, b):
        assert ra == rb


def test_different_seeds_differ():
    a = generate(small(1))
    b = generate(small(2))
    assert any(ra != rb for ra, rb in zip(a, b))


def test_noise_free_ntl_is_closed_form():
    ds = generate(small(9, noise_sd=0.0))
    ntl = ds.column("ntl")
    elec0 = np.nan_to_num(ds.column("electricity"), nan=0.0)
    expected = np.clip(np.expm1(log_ntl_signal(
        ds.column("poverty_rate"), elec0, ds.column("population"))), 0.0, 63.0)
    assert np.allclose(ntl, expected, atol=1e-12, rtol=0)


def test_noise_free_with_deltas_shifts_log_scale():
    base = generate(small(9, noise_sd=0.0))
    shifted = generate(small(9, noise_sd=0.0, delta_st=0.3))
    st_mask = base.column("share_st") > 0
    log_base = np.log1p(base.column("ntl"))
    log_shift = np.log1p(shifted.column("ntl"))
    # unclipped villages with tribe presence drop by exactly 0.3 in log space
    clipped = (shifted.column("ntl") == 0.0) | (base.column("ntl") == 63.0)
    ok = st_mask & ~clipped
    assert np.allclose(log_base[ok] - log_shift[ok], 0.3, atol=1e-9)
    assert np.allclose(log_base[~st_mask], log_shift[~st_mask], atol=1e-12)


def test_invalid_configs_rejected():
    with pytest.raises(InvalidConfig):
        generate(SynthConfig(seed=1, n_states=2, n_villages=100))
    with pytest.raises(InvalidConfig):
        generate(SynthConfig(seed=1, n_states=10, n_villages=50))
    with pytest.raises(InvalidConfig):
        generate(SynthConfig(seed=1, noise_sd=-0.1))


def test_records_satisfy_invariants_over_many_seeds():
    # property run: >= 100 seeds at n_villages = 1000
    for seed in range(100):
        ds = generate(small(seed))
        for r in ds:
            r.validate()  # raises on any violated field invariant
        assert len(ds) == 1000
        assert len({r.village_id for r in ds}) == 1000


def test_calibration_anchors_default_config():
    table = summarize(generate(SynthConfig(seed=4)))
    assert table.row("poverty_rate").mean == pytest.approx(0.35, abs=0.02)
    assert table.row("share_st").p50 == 0.0
    assert table.row("share_sc").mean == pytest.approx(0.18, abs=0.03)
    assert table.row("electricity").mean == pytest.approx(0.60, abs=0.05)
    # ~70% of villages report electricity
    assert table.row("electricity").n == pytest.approx(0.7 * 50_000, rel=0.05)


def test_ground_truth_bias_signs():
    assert ground_truth_bias(SynthConfig(seed=0, delta_st=0.3)) == {
        "ST": {"poverty_rate": SIGN_POSITIVE, "electricity": SIGN_NEGATIVE},
        "SC": {"poverty_rate": SIGN_NONE, "electricity": SIGN_NONE},
    }
    assert ground_truth_bias(SynthConfig(seed=0)) == {
        "ST": {"poverty_rate": SIGN_NONE, "electricity": SIGN_NONE},
        "SC": {"poverty_rate": SIGN_NONE, "electricity": SIGN_NONE},
    }
    assert ground_truth_bias(SynthConfig(seed=0, delta_sc=0.3))["SC"] == {
        "poverty_rate": SIGN_NEGATIVE, "electricity": SIGN_POSITIVE}
    # suppression coded as a negative inflation flips the scheduled-caste signs
    assert ground_truth_bias(SynthConfig(seed=0, delta_sc=-0.2))["SC"] == {
        "poverty_rate": SIGN_POSITIVE, "electricity": SIGN_NEGATIVE}


def test_unbiased_generator_does_not_leak_group_signal():
    """With deltas zero, log nightlights conditional on (poverty band,
    electricity, population band) are indistinguishable between villages with
    and without tribe presence. Two-sample t at alpha=0.01 per cell; the
    rejection rate over 20 seeds must stay at chance level (<= 0.05)."""
    tests = 0
    rejections = 0
    for seed in range(20):
        ds = generate(SynthConfig(seed=seed, n_states=8, n_villages=8000))
        elec = ds.column("electricity")
        present = ~np.isnan(elec)
        log_ntl = np.log1p(ds.column("ntl"))[present]
        pov = ds.column("poverty_rate")[present]
        pop = ds.column("population")[present]
        st = ds.column("share_st")[present] > 0
        e = elec[present]
        pov_band = np.digitize(pov, np.quantile(pov, [0.25, 0.5, 0.75]))
        pop_band = np.digitize(pop, np.quantile(pop, [0.25, 0.5, 0.75]))
        for pb in range(4):
            for eb in (0.0, 1.0):
                for qb in range(4):
                    cell = (pov_band == pb) & (e == eb) & (pop_band == qb)
                    a = log_ntl[cell & st]
                    b = log_ntl[cell & ~st]
                    if a.size < 30 or b.size < 30:
                        continue
                    tests += 1
                    if welch_t(a, b).p_two_sided < 0.01:
                        rejections += 1
    assert tests > 200
    assert rejections / tests <= 0.05
