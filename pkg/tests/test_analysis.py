"""Artifact diagnostics: series extraction, correlations, noise baselines.

Deterministic values are checked bit-exactly (dyadic inputs make Pearson
numerators and denominators exact). Monte-Carlo checks run on fixed seeds
with bounds validated against the estimator's sampling distribution, so
each is a deterministic rerun of one pre-validated draw.
"""

import numpy as np
import pytest
from scipy import stats

from kimoi.analysis import (
    CorrelationMatrix,
    artifact_series,
    block_structure_score,
    correlation_matrix,
    correlation_heatmap_png,
    correlation_to_csv,
    iid_noise_baseline,
    multivariate_noise_baseline,
    region_l1_breakdown,
    rigid_region_fixture,
    step_covariance,
)
from kimoi.errors import InvalidInputError, SequenceMismatchError
from kimoi.geometry import LandmarkSequence, TemporalArtifact, artifact_l1, temporal_artifacts
from kimoi.perturb import PerturbationSpec, generate_pseudofake_landmarks
from kimoi.regions import INNER_REGION_GROUPS, N_LANDMARKS, inner_group_indices
from kimoi.template import mean_face_template

from conftest import random_sequence

GROUPS = tuple(INNER_REGION_GROUPS)
INNER = list(inner_group_indices(GROUPS))
OUTER = [j for j in range(N_LANDMARKS) if j not in INNER]


def _static_seq(n_frames):
    return LandmarkSequence(np.repeat(mean_face_template()[None], n_frames, axis=0))


def _block_correlation(rho=0.6):
    """68x68 landmark correlation: `rho` within each inner group, 0 across."""
    mat = np.eye(N_LANDMARKS)
    for name in GROUPS:
        idx = np.array(inner_group_indices([name]))
        mat[np.ix_(idx, idx)] = rho
    np.fill_diagonal(mat, 1.0)
    return mat


def _interleaved_covariance(landmark_corr, sigma):
    """Flattened (x0, y0, x1, y1, ...) covariance with independent x/y."""
    cov = np.zeros((2 * N_LANDMARKS, 2 * N_LANDMARKS))
    cov[0::2, 0::2] = landmark_corr * sigma**2
    cov[1::2, 1::2] = landmark_corr * sigma**2
    return cov


# --- artifact_series -------------------------------------------------------


def test_series_zero_artifacts_all_zero():
    art = TemporalArtifact(np.zeros((5, N_LANDMARKS, 2)))
    series = artifact_series([art])
    assert series.shape == (5, N_LANDMARKS)
    assert np.all(series == 0.0)


def test_series_three_four_five():
    steps = np.zeros((1, N_LANDMARKS, 2))
    steps[0, 10] = (3.0, 4.0)
    series = artifact_series([TemporalArtifact(steps)])
    assert series[0, 10] == 5.0
    assert np.count_nonzero(series) == 1


def test_series_matches_loop_oracle(rng):
    arts = []
    for _ in range(3):
        seq = LandmarkSequence(random_sequence(rng, n_frames=9))
        ref = LandmarkSequence(random_sequence(rng, n_frames=9))
        arts.append(temporal_artifacts(seq, ref))
    series = artifact_series(arts)
    row = 0
    for art in arts:
        for s in range(art.steps.shape[0]):
            for j in range(N_LANDMARKS):
                expected = np.hypot(art.steps[s, j, 0], art.steps[s, j, 1])
                assert series[row, j] == pytest.approx(expected, rel=1e-12)
            row += 1
    assert row == series.shape[0]


def test_series_component_modes(rng):
    art = temporal_artifacts(
        LandmarkSequence(random_sequence(rng)), LandmarkSequence(random_sequence(rng))
    )
    assert np.array_equal(artifact_series([art], mode="x"), art.steps[..., 0])
    assert np.array_equal(artifact_series([art], mode="y"), art.steps[..., 1])


def test_series_validation(rng):
    with pytest.raises(InvalidInputError):
        artifact_series([])
    art = TemporalArtifact(np.zeros((2, N_LANDMARKS, 2)))
    with pytest.raises(InvalidInputError):
        artifact_series([art], mode="norm")
    small = TemporalArtifact(np.zeros((2, 5, 2)))
    with pytest.raises(SequenceMismatchError):
        artifact_series([art, small])


# --- correlation_matrix ----------------------------------------------------


def test_correlation_co_moving_is_exactly_one():
    # Centered columns of +-1 and +-2 have perfect-square norms, so every
    # sqrt, product, and ratio is exact and the entries are exactly +-1.
    base = np.array([2.0, 2.0, 0.0, 0.0])
    series = np.stack([base, 2.0 * base, -base], axis=1)
    corr = correlation_matrix(series)
    assert corr.values[0, 1] == 1.0
    assert corr.values[0, 2] == -1.0
    assert corr.values[1, 2] == -1.0
    assert corr.sample_count == 4


def test_correlation_matches_loop_oracle(rng):
    series = rng.normal(size=(9, 6))
    corr = correlation_matrix(series)
    for i in range(6):
        for j in range(6):
            xi = series[:, i] - series[:, i].mean()
            xj = series[:, j] - series[:, j].mean()
            expected = float(xi @ xj / np.sqrt((xi @ xi) * (xj @ xj)))
            assert corr.values[i, j] == pytest.approx(expected, abs=1e-12)


def test_correlation_invariants_random(rng):
    corr = correlation_matrix(rng.normal(size=(40, 20)))
    assert np.abs(corr.values - corr.values.T).max() <= 1e-12
    assert np.array_equal(np.diag(corr.values), np.ones(20))
    assert np.all(corr.values >= -1.0) and np.all(corr.values <= 1.0)
    assert not corr.zero_variance.any()


def test_correlation_zero_variance_flagged(rng):
    series = rng.normal(size=(30, 4))
    series[:, 2] = 7.5
    corr = correlation_matrix(series)
    assert corr.zero_variance.tolist() == [False, False, True, False]
    assert corr.values[2, 2] == 1.0
    off = [corr.values[2, j] for j in (0, 1, 3)]
    assert off == [0.0, 0.0, 0.0]


def test_correlation_needs_two_observations():
    with pytest.raises(InvalidInputError):
        correlation_matrix(np.zeros((1, 5)))
    with pytest.raises(InvalidInputError):
        correlation_matrix(np.zeros((4, 5, 2)))


def test_correlation_matrix_validation():
    with pytest.raises(InvalidInputError):
        CorrelationMatrix(np.zeros((3, 4)), sample_count=5, zero_variance=np.zeros(3, bool))
    with pytest.raises(InvalidInputError):
        CorrelationMatrix(np.eye(3), sample_count=5, zero_variance=np.zeros(4, bool))
    corr = CorrelationMatrix(np.eye(3), sample_count=5, zero_variance=np.zeros(3, bool))
    with pytest.raises(ValueError):
        corr.values[0, 0] = 2.0


# --- iid baseline ----------------------------------------------------------


def test_iid_baseline_sigma_zero_identity():
    seq = _static_seq(10)
    out = iid_noise_baseline(seq, 0.0, GROUPS, np.random.default_rng(0))
    assert np.array_equal(out.points, seq.points)


def test_iid_baseline_negative_sigma_raises():
    with pytest.raises(InvalidInputError):
        iid_noise_baseline(_static_seq(4), -0.01, GROUPS, np.random.default_rng(0))


def test_iid_baseline_variance():
    # 100 frames x 51 inner landmarks x 2 = 10,200 draws; the sample
    # variance of N(0, s^2) has relative sd sqrt(2/n) ~ 1.4%, so the 5%
    # budget sits at 3.5 sigma.
    sigma = 0.003
    seq = _static_seq(100)
    out = iid_noise_baseline(seq, sigma, GROUPS, np.random.default_rng(13))
    deltas = (out.points - seq.points)[:, INNER, :]
    assert deltas.size == 10_200
    assert abs(np.var(deltas) - sigma**2) <= 0.05 * sigma**2
    assert np.array_equal(out.points[:, OUTER, :], seq.points[:, OUTER, :])


def test_iid_corr_off_diagonal_small():
    # Independent landmarks: each off-diagonal Pearson estimate has
    # sd ~ 1.06/sqrt(S) (the step series is MA(1) in time), so the max
    # over the 1,275 inner pairs stays below 0.05 at S = 10,000.
    seq = _static_seq(10_001)
    noised = iid_noise_baseline(seq, 0.003, GROUPS, np.random.default_rng(11))
    corr = correlation_matrix(artifact_series([temporal_artifacts(noised, seq)]))
    assert corr.sample_count == 10_000
    off = corr.values.copy()
    np.fill_diagonal(off, 0.0)
    assert np.abs(off).max() < 0.05
    # Untouched outer landmarks carry no variance and are flagged.
    assert corr.zero_variance[OUTER].all()
    assert not corr.zero_variance[INNER].any()


# --- multivariate baseline -------------------------------------------------


def test_multivariate_known_covariance_recovered():
    # Signed x components of the steps are linear in the injected noise,
    # so their correlation matrix equals the landmark block of Sigma.
    target = _block_correlation(rho=0.6)
    cov = _interleaved_covariance(target, sigma=0.004)
    seq = _static_seq(10_001)
    noised = multivariate_noise_baseline(seq, cov, GROUPS, np.random.default_rng(17))
    corr = correlation_matrix(artifact_series([temporal_artifacts(noised, seq)], mode="x"))
    emp = corr.values[np.ix_(INNER, INNER)]
    assert np.abs(emp - target[np.ix_(INNER, INNER)]).max() < 0.05


def test_multivariate_rank_one_perfect_correlation():
    v = np.zeros(2 * N_LANDMARKS)
    v[np.array(INNER) * 2] = 0.005
    seq = _static_seq(2_001)
    noised = multivariate_noise_baseline(seq, np.outer(v, v), GROUPS, np.random.default_rng(19))
    corr = correlation_matrix(artifact_series([temporal_artifacts(noised, seq)], mode="x"))
    sub = corr.values[np.ix_(INNER, INNER)]
    assert sub.min() > 0.999


def test_multivariate_diagonal_reduces_to_iid():
    # Same per-component law as the iid baseline; two-sample KS per inner
    # landmark on the magnitude series, alpha = 0.01.
    sigma = 0.003
    seq = _static_seq(10_001)
    a = iid_noise_baseline(seq, sigma, GROUPS, np.random.default_rng(59))
    b = multivariate_noise_baseline(
        seq, np.eye(2 * N_LANDMARKS) * sigma**2, GROUPS, np.random.default_rng(61)
    )
    sa = artifact_series([temporal_artifacts(a, seq)])
    sb = artifact_series([temporal_artifacts(b, seq)])
    for j in INNER:
        assert stats.ks_2samp(sa[:, j], sb[:, j]).pvalue > 0.01


def test_multivariate_validation():
    seq = _static_seq(4)
    rng = np.random.default_rng(0)
    with pytest.raises(InvalidInputError):
        multivariate_noise_baseline(seq, np.eye(10), GROUPS, rng)
    asym = np.eye(2 * N_LANDMARKS)
    asym[0, 1] = 0.5
    with pytest.raises(InvalidInputError):
        multivariate_noise_baseline(seq, asym, GROUPS, rng)
    with pytest.raises(InvalidInputError):
        multivariate_noise_baseline(seq, -np.eye(2 * N_LANDMARKS), GROUPS, rng)


# --- step covariance and the estimate -> sample round trip -----------------


def test_step_covariance_matches_loop_oracle(rng):
    steps = rng.normal(size=(6, N_LANDMARKS, 2))
    cov = step_covariance([TemporalArtifact(steps)])
    flat = steps.reshape(6, -1)
    mean = flat.mean(axis=0)
    expected = np.zeros((2 * N_LANDMARKS, 2 * N_LANDMARKS))
    for s in range(6):
        d = flat[s] - mean
        expected += np.outer(d, d)
    expected /= 5.0
    assert np.allclose(cov, expected, atol=1e-12)


def test_step_covariance_validation():
    with pytest.raises(InvalidInputError):
        step_covariance([])
    with pytest.raises(InvalidInputError):
        step_covariance([TemporalArtifact(np.zeros((1, N_LANDMARKS, 2)))])


def test_covariance_round_trip_reproduces_correlation():
    # Estimate the step covariance of a reference corpus, drive the
    # multivariate baseline with it, and recover the reference magnitude
    # correlations. Both processes are Gaussian with proportional
    # covariance, and magnitude correlations are scale invariant.
    cov = _interleaved_covariance(_block_correlation(rho=0.6), sigma=0.004)
    seq = _static_seq(10_001)
    ref = multivariate_noise_baseline(seq, cov, GROUPS, np.random.default_rng(23))
    ref_art = temporal_artifacts(ref, seq)
    ref_corr = correlation_matrix(artifact_series([ref_art]))

    estimated = step_covariance([ref_art])
    resampled = multivariate_noise_baseline(seq, estimated, GROUPS, np.random.default_rng(29))
    new_corr = correlation_matrix(artifact_series([temporal_artifacts(resampled, seq)]))

    err = np.abs(
        ref_corr.values[np.ix_(INNER, INNER)] - new_corr.values[np.ix_(INNER, INNER)]
    ).max()
    assert err < 0.1


# --- rigid fixture ---------------------------------------------------------


def test_rigid_fixture_zero_amplitude_identity(rng):
    seq = _static_seq(6)
    out = rigid_region_fixture(seq, 0.0, rng)
    assert np.allclose(out.points, seq.points, atol=1e-15)
    with pytest.raises(InvalidInputError):
        rigid_region_fixture(seq, -1.0, rng)


def test_rigid_fixture_groups_move_affinely(rng):
    # Every group output must fit one affine map of its input per frame.
    seq = LandmarkSequence(random_sequence(rng, n_frames=5))
    out = rigid_region_fixture(seq, 0.01, np.random.default_rng(3))
    for t in range(5):
        for name in GROUPS:
            idx = list(inner_group_indices([name]))
            src = seq.points[t, idx, :]
            dst = out.points[t, idx, :]
            design = np.column_stack([src, np.ones(len(idx))])
            _, residual, _, _ = np.linalg.lstsq(design, dst, rcond=None)
            assert residual.size == 0 or residual.max() < 1e-20


# --- block structure score -------------------------------------------------


def test_block_score_identity_is_zero():
    corr = CorrelationMatrix(
        np.eye(N_LANDMARKS), sample_count=10, zero_variance=np.zeros(N_LANDMARKS, bool)
    )
    assert block_structure_score(corr, GROUPS) == 0.0


def test_block_score_block_constant_is_one():
    values = np.eye(N_LANDMARKS)
    for name in GROUPS:
        idx = np.array(inner_group_indices([name]))
        values[np.ix_(idx, idx)] = 1.0
    corr = CorrelationMatrix(values, sample_count=10, zero_variance=np.zeros(N_LANDMARKS, bool))
    assert block_structure_score(corr, GROUPS) == 1.0


def test_block_score_rigid_beats_lpn(trained_tiny_model):
    clip_rng = np.random.default_rng(7)
    clips = [LandmarkSequence(random_sequence(clip_rng)) for _ in range(40)]

    lpn_arts = []
    for i, clip in enumerate(clips):
        spec = PerturbationSpec(sigma=0.007, seed=1000 + i, regions=GROUPS)
        _, art, _ = generate_pseudofake_landmarks(trained_tiny_model, clip, spec)
        lpn_arts.append(art)
    rigid_rng = np.random.default_rng(99)
    rigid_arts = [temporal_artifacts(rigid_region_fixture(c, 0.003, rigid_rng), c) for c in clips]

    lpn_score = block_structure_score(correlation_matrix(artifact_series(lpn_arts)), GROUPS)
    rigid_score = block_structure_score(correlation_matrix(artifact_series(rigid_arts)), GROUPS)
    print(f"block structure score: rigid={rigid_score:.4f} lpn={lpn_score:.4f}")
    assert rigid_score > lpn_score


# --- reporting -------------------------------------------------------------


def test_region_l1_breakdown_mouth_only():
    steps = np.zeros((4, N_LANDMARKS, 2))
    mouth = list(inner_group_indices(["mouth"]))
    steps[:, mouth, :] = 0.25
    art = TemporalArtifact(steps)
    breakdown = region_l1_breakdown(art)
    assert breakdown["mouth"] == artifact_l1(art)
    assert breakdown["total"] == artifact_l1(art)
    for name in ("eyebrows", "eyes", "nose"):
        assert breakdown[name] == 0.0


def test_correlation_csv_round_trip(tmp_path, rng):
    corr = correlation_matrix(rng.normal(size=(12, 10)))
    path = tmp_path / "corr.csv"
    correlation_to_csv(corr, path)
    loaded = np.loadtxt(path, delimiter=",")
    assert np.array_equal(loaded, corr.values)


def test_heatmap_png_written(tmp_path, rng):
    corr = correlation_matrix(rng.normal(size=(12, 10)))
    path = tmp_path / "corr.png"
    correlation_heatmap_png(corr, path, title="artifacts")
    data = path.read_bytes()
    assert data[:8] == b"\x89PNG\r\n\x1a\n"
    assert len(data) > 1000
