import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import CELL_VALUES, CUTOFF, STUDY, cell_dataset, linear_dataset
from oracles import cell_means_did
from pddid.errors import CollinearTrend, EmptyCell, InconsistentArm
from pddid.panel import (
    GAMMA,
    ModelSpec,
    ObservationRecord,
    PanelDataset,
    build_design,
    estimate_did,
    gamma_identity_check,
)

ORIGINAL = ModelSpec(method="original")
DETREND = ModelSpec(method="detrending")


def random_dataset(seed, n=120, n_groups=4, k_cov=0):
    rng = np.random.default_rng(seed)
    groups = rng.integers(0, n_groups, size=n)
    treated = groups < n_groups // 2
    time = rng.integers(0, 366, size=n).astype(float)
    # guarantee all four arm x period cells
    time[:4] = [10, 300, 10, 300]
    groups[:4] = [0, 0, n_groups - 1, n_groups - 1]
    treated = groups < n_groups // 2
    y = rng.normal(size=n) + 0.3 * treated
    cov = rng.normal(size=(n, k_cov))
    return PanelDataset([f"u{i}" for i in range(n)], [f"g{g}" for g in groups], treated,
                        time, y, cov, study_length=STUDY, cutoff=CUTOFF,
                        covariate_names=[f"c{k}" for k in range(k_cov)])


class TestPanelDataset:
    def test_records_round_trip(self):
        ds = random_dataset(0, k_cov=2)
        again = PanelDataset.from_records(ds.records, study_length=STUDY, cutoff=CUTOFF,
                                          covariate_names=ds.covariate_names)
        assert again == ds
        assert isinstance(ds.records[0], ObservationRecord)
        assert ds.records[0].arm in ("intervention", "reference")

    def test_group_in_both_arms(self):
        with pytest.raises(InconsistentArm):
            PanelDataset(["a", "b"], ["g", "g"], [True, False], [1, 2], [0, 0],
                         study_length=10, cutoff=5)

    @pytest.mark.parametrize("cutoff", [0.0, 10.0, -1.0])
    def test_cutoff_inside_window(self, cutoff):
        with pytest.raises(ValueError):
            PanelDataset(["a"], ["g"], [True], [1], [0], study_length=10, cutoff=cutoff)

    def test_time_inside_window(self):
        with pytest.raises(ValueError):
            PanelDataset(["a"], ["g"], [True], [11], [0], study_length=10, cutoff=5)

    def test_immutable(self):
        ds = random_dataset(1)
        with pytest.raises(AttributeError):
            ds.cutoff = 3
        with pytest.raises(ValueError):
            ds.outcome[0] = 1.0


class TestBuildDesign:
    def test_saturated_two_by_two(self):
        ds = cell_dataset(CELL_VALUES)
        X, y = build_design(ds, ORIGINAL)
        assert X.column_labels == ("intercept", "arm", "post", "gamma")
        # record order: I pre, I post, R pre, R post
        np.testing.assert_array_equal(
            X.values, [[1, 1, 0, 0], [1, 1, 1, 1], [1, 0, 0, 0], [1, 0, 1, 0]])
        np.testing.assert_array_equal(y, [0, 3, 0, 1])

    def test_per_group_trend_columns(self):
        ds = cell_dataset(CELL_VALUES, reps=2)
        X, _ = build_design(ds, DETREND)
        assert X.p == 6
        trend = [X.index("trend[I1]"), X.index("trend[R1]")]
        for col, mask in zip(trend, (ds.treated, ~ds.treated)):
            assert np.all(X.values[~mask, col] == 0)
            np.testing.assert_allclose(X.values[mask, col], ds.time[mask] / STUDY)

    def test_cutoff_is_pre_period(self):
        ds = PanelDataset(list("abcde"), ["I", "I", "I", "R", "R"], [1, 1, 1, 0, 0],
                          [182, 183, 10, 182, 300], [0] * 5, study_length=365, cutoff=182)
        np.testing.assert_array_equal(ds.post, [False, True, False, False, True])

    @pytest.mark.parametrize("seed, spec", [
        (0, ModelSpec(method="detrending", trend_degree=2)),
        (1, ModelSpec(method="detrending", trend_granularity="per_arm", trend_degree=3,
                      include_covariates=True)),
        (2, ModelSpec(method="original", trend_degree=4, include_covariates=True)),
    ])
    def test_column_count(self, seed, spec):
        ds = random_dataset(seed, n_groups=6, k_cov=2)
        X, _ = build_design(ds, spec)
        # hand count: 4 DID columns, 6 groups or 2 arms of trends, 2 covariates
        expected = {0: 4 + 2 * 6, 1: 4 + 3 * 2 + 2, 2: 4 + 2}[seed]
        assert X.p == expected
        labels = list(X.column_labels)
        assert labels[:4] == ["intercept", "arm", "post", GAMMA]
        if spec.include_covariates:
            assert labels[-2:] == ["z_c0", "z_c1"]

    def test_empty_cell(self):
        ds = PanelDataset(list("abc"), ["I", "I", "R"], [1, 1, 0], [10, 300, 10], [0, 1, 0],
                          study_length=365, cutoff=182)
        with pytest.raises(EmptyCell):
            build_design(ds, ORIGINAL)

    def test_covariates_requested_but_absent(self):
        with pytest.raises(ValueError):
            build_design(random_dataset(0), ModelSpec(include_covariates=True))

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            ModelSpec(method="bogus")
        with pytest.raises(ValueError):
            ModelSpec(trend_degree=6)
        with pytest.raises(ValueError):
            ModelSpec(trend_granularity="per_unit")


class TestEstimateDid:
    def test_cell_means_example(self, cell_means_dataset):
        est = estimate_did(cell_means_dataset, ORIGINAL)
        assert est.gamma_hat == pytest.approx(2.0, abs=1e-12)
        assert est.gamma_hat == pytest.approx(
            cell_means_did(cell_means_dataset.treated, cell_means_dataset.post,
                           cell_means_dataset.outcome), abs=1e-12)
        assert est.fit.coef(GAMMA) == est.gamma_hat

    def test_noiseless_detrending_recovers_gamma(self):
        ds = linear_dataset(gamma=0.3, l=0.2)
        assert estimate_did(ds, DETREND).gamma_hat == pytest.approx(0.3, abs=1e-8)
        # arm trends of +-l over the window bias the original estimate by about l
        biased = estimate_did(ds, ORIGINAL).gamma_hat
        assert biased - 0.3 == pytest.approx(0.2, rel=0.05)

    def test_null_data(self):
        ds = linear_dataset(gamma=0.0, l=0.0)
        for spec in (ORIGINAL, DETREND):
            assert estimate_did(ds, spec).gamma_hat == pytest.approx(0.0, abs=1e-10)

    @settings(max_examples=25, deadline=None)
    @given(gamma=st.floats(-2, 2), slopes=st.lists(st.floats(-3, 3), min_size=4, max_size=4),
           mu=st.lists(st.floats(-2, 2), min_size=2, max_size=2), seed=st.integers(0, 10**6))
    def test_exact_recovery_with_covariates(self, gamma, slopes, mu, seed):
        days = range(1, 366, 8)
        n = 4 * len(days)
        cov = np.random.default_rng(seed).normal(size=(n, 2))
        ds = linear_dataset(gamma, 0.0, days=days, covariates=cov, mu=mu, slopes=slopes)
        est = estimate_did(ds, ModelSpec(include_covariates=True))
        assert est.gamma_hat == pytest.approx(gamma, abs=1e-8)

    def test_polynomial_trend(self):
        days = range(1, 366, 3)
        ds = linear_dataset(0.4, 0.0, days=days)
        y = ds.outcome + 0.7 * (ds.time / STUDY) ** 2 * ds.treated
        est = estimate_did(ds.with_values(y), ModelSpec(trend_degree=2))
        assert est.gamma_hat == pytest.approx(0.4, abs=1e-8)

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 10**6))
    def test_record_order_invariance(self, seed):
        ds = random_dataset(seed % 997)
        perm = np.random.default_rng(seed).permutation(len(ds))
        shuffled = PanelDataset(ds.unit_id[perm], ds.group_id[perm], ds.treated[perm],
                                ds.time[perm], ds.outcome[perm], study_length=STUDY, cutoff=CUTOFF)
        for spec in (ORIGINAL, DETREND):
            a, b = estimate_did(ds, spec), estimate_did(shuffled, spec)
            assert b.gamma_hat == pytest.approx(a.gamma_hat, abs=1e-10)
            assert b.se == pytest.approx(a.se, abs=1e-10)
            assert b.p_value == pytest.approx(a.p_value, abs=1e-10)

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 10**6), c=st.floats(-100, 100))
    def test_constant_shift(self, seed, c):
        ds = random_dataset(seed % 997)
        shifted = ds.with_values(ds.outcome + c)
        for spec in (ORIGINAL, DETREND):
            a, b = estimate_did(ds, spec), estimate_did(shifted, spec)
            assert b.gamma_hat == pytest.approx(a.gamma_hat, abs=1e-10)
            assert b.se == pytest.approx(a.se, abs=1e-10)
            assert b.p_value == pytest.approx(a.p_value, abs=1e-10)

    def test_collinear_trend(self):
        # one pre and one post time per arm: each trend column is a mix of the arm and gamma dummies
        ds = cell_dataset(CELL_VALUES, reps=3)
        with pytest.raises(CollinearTrend) as exc:
            estimate_did(ds, DETREND)
        assert exc.value.columns

    def test_binomial_family(self):
        rng = np.random.default_rng(3)
        ds = random_dataset(3, n=400)
        y = (rng.uniform(size=len(ds)) < 0.3 + 0.2 * ds.treated).astype(float)
        est = estimate_did(ds.with_values(y), ModelSpec(family="binomial"))
        assert est.fit.family == "binomial" and est.fit.converged
        assert 0 < est.p_value <= 1

    def test_binomial_needs_binary(self):
        with pytest.raises(ValueError):
            estimate_did(random_dataset(0), ModelSpec(family="binomial"))


class TestGammaIdentity:
    def test_cell_means(self, cell_means_dataset):
        b1, b0, g = gamma_identity_check(cell_means_dataset)
        assert (b1, b0, g) == pytest.approx((3.0, 1.0, 2.0), abs=1e-12)

    def test_constant_outcomes(self):
        ds = cell_dataset({k: 5.0 for k in CELL_VALUES}, reps=3)
        assert gamma_identity_check(ds) == pytest.approx((0.0, 0.0, 0.0), abs=1e-12)

    @pytest.mark.parametrize("seed", range(50))
    def test_matches_joint_fit(self, seed):
        ds = random_dataset(seed)
        _, _, g = gamma_identity_check(ds)
        assert g == pytest.approx(estimate_did(ds, ORIGINAL).gamma_hat, abs=1e-8)
