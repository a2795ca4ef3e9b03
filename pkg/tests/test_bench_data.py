"""Tests for the synthetic domain-shift generator.

Oracles here are closed-form population statistics computed directly in
the tests from the documented sampling model: class clouds are unit
Gaussians around centered means, so the source covariance is
I + mean-scatter, and the target covariance is M Sigma_S M^T + noise^2 I
where M applies the per-axis scales in the rotated frame.
"""

import numpy as np
import pytest

from coralign.bench.data import (
    Dataset,
    ShiftSpec,
    generate_shift,
    rotated_anisotropic_spec,
)
from coralign.errors import InvalidInputError
from coralign.linalg import mean_and_covariance
from coralign import coral


def make_spec(**kw):
    base = dict(
        d=4,
        K=2,
        n_source=200,
        n_target=200,
        separation=1.0,
        scales=(1.0, 1.0, 1.0, 1.0),
        mean_shift=(0.0, 0.0, 0.0, 0.0),
        noise_std=0.0,
        seed=0,
        rotation_angles=(),
    )
    base.update(kw)
    return ShiftSpec(**base)


class TestDataset:
    def test_label_length_must_match(self):
        with pytest.raises(InvalidInputError):
            Dataset(
                features=np.zeros((3, 2)),
                labels=np.array([0, 1]),
                domain_name="x",
            )

    def test_class_indices_must_start_at_zero(self):
        with pytest.raises(InvalidInputError):
            Dataset(
                features=np.zeros((3, 2)),
                labels=np.array([1, 2, 1]),
                domain_name="x",
            )

    def test_class_indices_must_be_contiguous(self):
        with pytest.raises(InvalidInputError):
            Dataset(
                features=np.zeros((3, 2)),
                labels=np.array([0, 2, 0]),
                domain_name="x",
            )

    def test_unlabeled_allowed(self):
        ds = Dataset(features=np.zeros((3, 2)), labels=None, domain_name="t")
        assert ds.n == 3 and ds.d == 2


class TestShiftSpecValidation:
    def test_counts_below_twice_classes_rejected(self):
        with pytest.raises(InvalidInputError):
            make_spec(n_source=3)
        with pytest.raises(InvalidInputError):
            make_spec(n_target=3)

    def test_nonpositive_scale_rejected(self):
        with pytest.raises(InvalidInputError):
            make_spec(scales=(1.0, 0.0, 1.0, 1.0))
        with pytest.raises(InvalidInputError):
            make_spec(scales=(1.0, -2.0, 1.0, 1.0))

    def test_scale_length_must_match_dimension(self):
        with pytest.raises(InvalidInputError):
            make_spec(scales=(1.0, 1.0))

    def test_mean_shift_length_must_match_dimension(self):
        with pytest.raises(InvalidInputError):
            make_spec(mean_shift=(0.0,))

    def test_angles_and_rotation_seed_are_exclusive(self):
        with pytest.raises(InvalidInputError):
            make_spec(rotation_angles=(0.5,), rotation_seed=3)

    def test_needs_at_least_two_classes(self):
        with pytest.raises(InvalidInputError):
            make_spec(K=1, n_source=10, n_target=10)

    def test_dimension_must_fit_simplex(self):
        # K class means span a (K-1)-dimensional simplex
        with pytest.raises(InvalidInputError):
            make_spec(d=2, K=4, n_source=20, n_target=20,
                      scales=(1.0, 1.0), mean_shift=(0.0, 0.0))

    def test_negative_noise_rejected(self):
        with pytest.raises(InvalidInputError):
            make_spec(noise_std=-0.1)


class TestGenerateShift:
    def test_bit_identical_repeatability(self):
        spec = make_spec(seed=11, noise_std=0.3)
        a_src, a_tgt = generate_shift(spec)
        b_src, b_tgt = generate_shift(spec)
        np.testing.assert_array_equal(a_src.features, b_src.features)
        np.testing.assert_array_equal(a_tgt.features, b_tgt.features)
        np.testing.assert_array_equal(a_src.labels, b_src.labels)
        np.testing.assert_array_equal(a_tgt.labels, b_tgt.labels)

    def test_shapes_names_and_balanced_priors(self):
        spec = make_spec(n_source=203, n_target=101, K=2)
        src, tgt = generate_shift(spec)
        assert src.features.shape == (203, 4)
        assert tgt.features.shape == (101, 4)
        assert src.domain_name == "source" and tgt.domain_name == "target"
        for ds in (src, tgt):
            counts = np.bincount(ds.labels, minlength=2)
            assert counts.max() - counts.min() <= 1
            assert counts.sum() == ds.n

    def test_identity_shift_matches_source_distribution(self):
        # identity rotation, unit scales, zero shift, zero noise: both
        # domains sample the same population, so empirical covariances
        # agree within sampling concentration (bound sized for a
        # near-unit covariance, hence the modest separation)
        spec = make_spec(n_source=2000, n_target=2000, seed=5, separation=0.5)
        src, tgt = generate_shift(spec)
        cs = mean_and_covariance(src.features)
        ct = mean_and_covariance(tgt.features)
        gap = np.linalg.norm(cs.cov - ct.cov)
        assert gap < 0.2
        assert np.linalg.norm(cs.mean - ct.mean) < 0.15

    def test_identity_shift_matches_population_covariance(self):
        # population oracle: cov = I + sep^2 * u u^T with u the single
        # simplex direction (first rotated axis; rotation here is I)
        spec = make_spec(n_source=2000, n_target=2000, seed=6, separation=1.5)
        src, _ = generate_shift(spec)
        u = np.array([1.0, 0.0, 0.0, 0.0])
        pop = np.eye(4) + spec.separation**2 * np.outer(u, u)
        cs = mean_and_covariance(src.features)
        assert np.linalg.norm(cs.cov - pop) < 0.35

    def test_quarter_turn_anisotropic_population_oracle(self):
        # 2-D, 90 degree rotation, scales (4, 1).  Build the target map
        # in the test by hand: M = R diag(scales) R^T.
        n = 4000
        spec = ShiftSpec(
            d=2, K=2, n_source=n, n_target=n,
            separation=1.5, scales=(4.0, 1.0), mean_shift=(0.0, 0.0),
            noise_std=0.1, seed=21, rotation_angles=(np.pi / 2,),
        )
        R = np.array([[0.0, -1.0], [1.0, 0.0]])
        u = R[:, 0]
        sigma_s = np.eye(2) + spec.separation**2 * np.outer(u, u)
        M = R @ np.diag([4.0, 1.0]) @ R.T
        sigma_t = M @ sigma_s @ M.T + spec.noise_std**2 * np.eye(2)

        src, tgt = generate_shift(spec)
        cs = mean_and_covariance(src.features)
        ct = mean_and_covariance(tgt.features)
        assert np.linalg.norm(cs.cov - sigma_s) / np.linalg.norm(sigma_s) < 0.1
        assert np.linalg.norm(ct.cov - sigma_t) / np.linalg.norm(sigma_t) < 0.1
        # populations genuinely differ
        assert np.linalg.norm(sigma_s - sigma_t) > 1.0

    def test_quarter_turn_alignment_restores_covariance(self):
        n = 4000
        spec = ShiftSpec(
            d=2, K=2, n_source=n, n_target=n,
            separation=1.5, scales=(4.0, 1.0), mean_shift=(0.0, 0.0),
            noise_std=0.1, seed=22, rotation_angles=(np.pi / 2,),
        )
        src, tgt = generate_shift(spec)
        cs = mean_and_covariance(src.features)
        ct = mean_and_covariance(tgt.features)
        pre = np.linalg.norm(cs.cov - ct.cov)
        tr = coral.fit_analytical(src.features, tgt.features)
        aligned = coral.apply_to_features(tr, src.features)
        post = np.linalg.norm(mean_and_covariance(aligned).cov - ct.cov)
        assert post < 0.05 * pre

    def test_mean_shift_moves_target(self):
        shift = (3.0, -2.0, 0.0, 1.0)
        spec = make_spec(n_source=2000, n_target=2000, mean_shift=shift, seed=9)
        _, tgt = generate_shift(spec)
        got = mean_and_covariance(tgt.features).mean
        np.testing.assert_allclose(got, shift, atol=0.2)

    def test_random_rotation_seed_is_deterministic_and_orthogonal_effect(self):
        # same data seed, same rotation seed -> identical; different
        # rotation seed -> different target geometry
        a = make_spec(rotation_angles=None, rotation_seed=5, seed=3,
                      scales=(4.0, 1.0, 0.5, 2.0))
        b = make_spec(rotation_angles=None, rotation_seed=5, seed=3,
                      scales=(4.0, 1.0, 0.5, 2.0))
        c = make_spec(rotation_angles=None, rotation_seed=6, seed=3,
                      scales=(4.0, 1.0, 0.5, 2.0))
        ta = generate_shift(a)[1].features
        tb = generate_shift(b)[1].features
        tc = generate_shift(c)[1].features
        np.testing.assert_array_equal(ta, tb)
        assert not np.array_equal(ta, tc)


class TestRotatedAnisotropicSpec:
    def test_frozen_benchmark_shape(self):
        spec = rotated_anisotropic_spec(seed=0)
        assert spec.d == 20 and spec.K == 3
        assert spec.n_source == 1000 and spec.n_target == 1000
        assert len(spec.scales) == 20
        assert min(spec.scales) > 0

    def test_generates_a_real_covariance_gap(self):
        spec = rotated_anisotropic_spec(seed=4)
        src, tgt = generate_shift(spec)
        cs = mean_and_covariance(src.features)
        ct = mean_and_covariance(tgt.features)
        assert np.linalg.norm(cs.cov - ct.cov) > 5.0

    def test_different_seeds_differ(self):
        a = generate_shift(rotated_anisotropic_spec(seed=1))[0].features
        b = generate_shift(rotated_anisotropic_spec(seed=2))[0].features
        assert not np.array_equal(a, b)
