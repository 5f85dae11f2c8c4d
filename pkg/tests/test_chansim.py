"""Scene simulator: algebraic identities, independent oracles, format round trips."""

import math

import numpy as np
import pytest

from misac.chansim import (
    BS_POSITION,
    ConfigError,
    CorruptionSpec,
    Dataset,
    DatasetFormatError,
    DegenerateChannelError,
    MODALITIES,
    MODALITY_WIDTHS,
    PathSet,
    PowerConstraintError,
    ScenarioConfig,
    array_response,
    config_hash,
    dft_codebook,
    generate_dataset,
    generate_trajectory,
    optimal_beam,
    path_loss_db,
    read_dataset,
    sum_rate,
    synthesize_channel,
    write_dataset,
)


# --- independent oracles -----------------------------------------------------


def sum_rate_oracle(H, V, noise, _power):
    # Scalar-by-scalar re-evaluation of the SINR sum rate.
    K = H.shape[0]
    total = 0.0
    for k in range(K):
        sig = abs(sum(H[k][a].conjugate() * V[a, k] for a in range(H.shape[1]))) ** 2
        interf = 0.0
        for j in range(K):
            if j == k:
                continue
            interf += abs(sum(H[k][a].conjugate() * V[a, j] for a in range(H.shape[1]))) ** 2
        total += math.log2(1.0 + sig / (interf + noise))
    return total


def brute_force_beam(h, codebook):
    best, best_gain = 0, -1.0
    for b in range(codebook.shape[0]):
        gain = abs(np.vdot(h, codebook[b])) ** 2
        if gain > best_gain + 0.0:
            best, best_gain = b, gain
    return best


# --- array response and channel ----------------------------------------------


def test_array_response_norm_is_element_count():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        theta = rng.uniform(-np.pi / 2 + 1e-6, np.pi / 2 - 1e-6)
        a = array_response(theta, 32, 0.0253, 0.0507)
        assert abs(np.linalg.norm(a) ** 2 - 32.0) < 1e-12


def test_channel_is_linear_in_path_gains():
    rng = np.random.default_rng(1)
    M, spacing, lam, fc = 16, 0.0253, 0.0507, 5.915e9
    for _ in range(50):
        delays = rng.uniform(1e-7, 1e-6, size=3)
        aods = rng.uniform(-1.4, 1.4, size=3)
        g1 = rng.normal(size=3) * 0.1
        g2 = rng.normal(size=3) * 0.1
        gains1 = np.array([1.0 + 0j, g1[1], g1[2]])
        gains2 = np.array([1.0 + 0j, g2[1], g2[2]])
        h1 = synthesize_channel(PathSet(gains1, delays, aods), M, spacing, lam, fc)
        h2 = synthesize_channel(PathSet(gains2, delays, aods), M, spacing, lam, fc)
        hsum = synthesize_channel(PathSet(gains1 + gains2, delays, aods), M, spacing, lam, fc)
        assert np.max(np.abs(hsum - (h1 + h2))) < 1e-12


def test_codebook_unit_norm_and_grid():
    cb = dft_codebook(32, 32)
    np.testing.assert_allclose(np.linalg.norm(cb, axis=1), 1.0, atol=1e-12)
    cb = dft_codebook(8, 16)
    assert cb.shape == (16, 8)


def test_optimal_beam_matches_brute_force():
    rng = np.random.default_rng(2)
    cb = dft_codebook(32, 32)
    hits = 0
    for _ in range(100):
        h = rng.normal(size=32) + 1j * rng.normal(size=32)
        if optimal_beam(h, cb) == brute_force_beam(h, cb):
            hits += 1
    assert hits == 100


def test_optimal_beam_tie_takes_lowest_index():
    # A zero-angle steering vector correlates equally with the two beams
    # straddling broadside; the lower index must win.
    cb = dft_codebook(4, 4)
    h = array_response(0.0, 4, 0.0253, 0.0507)
    gains = np.abs(cb @ np.conj(h)) ** 2
    top = np.flatnonzero(np.isclose(gains, gains.max(), rtol=0, atol=1e-9))
    assert len(top) == 2
    assert optimal_beam(h, cb) == top[0]


def test_degenerate_channel_errors():
    cb = dft_codebook(8, 8)
    with pytest.raises(DegenerateChannelError):
        optimal_beam(np.zeros(8, dtype=complex), cb)
    with pytest.raises(DegenerateChannelError):
        path_loss_db(np.zeros(8, dtype=complex), 8)


def test_path_set_invariants():
    with pytest.raises(ValueError):
        PathSet(np.array([0.1 + 0j, 1.0]), np.array([1e-7, 1e-7]), np.array([0.0, 0.1]))
    with pytest.raises(ValueError):
        PathSet(np.array([1.0 + 0j]), np.array([0.0]), np.array([0.0]))
    with pytest.raises(ValueError):
        PathSet(np.array([1.0 + 0j]), np.array([1e-7]), np.array([np.pi / 2]))


def test_sum_rate_against_scalar_oracle():
    rng = np.random.default_rng(3)
    for trial in range(100):
        K = int(rng.integers(1, 4))
        M = int(rng.integers(2, 9))
        H = rng.normal(size=(K, M)) + 1j * rng.normal(size=(K, M))
        V = rng.normal(size=(M, K)) + 1j * rng.normal(size=(M, K))
        budget = float(np.sum(np.abs(V) ** 2)) * 1.01
        noise = float(rng.uniform(0.01, 1.0))
        got = sum_rate(H, V, noise, budget)
        want = sum_rate_oracle(H, V, noise, budget)
        assert abs(got - want) < 1e-10


def test_sum_rate_power_budget_enforced():
    H = np.ones((1, 4), dtype=complex)
    V = np.ones((4, 1), dtype=complex)  # power 4
    with pytest.raises(PowerConstraintError):
        sum_rate(H, V, 1e-3, 1.0)
    assert sum_rate(H, V, 1e-3, 4.0) > 0.0


def test_single_user_rate_value():
    # One user, one antenna: rate = log2(1 + |h v|^2 / noise).
    H = np.array([[2.0 + 0j]])
    V = np.array([[0.5 + 0j]])
    assert sum_rate(H, V, 0.5, 1.0) == pytest.approx(math.log2(1.0 + 2.0), rel=1e-12)


# --- trajectory ---------------------------------------------------------------


def _arena_contains(cfg, positions):
    lows = np.array([ax[0] for ax in cfg.arena])
    highs = np.array([ax[1] for ax in cfg.arena])
    return np.all(positions >= lows - 1e-9) and np.all(positions <= highs + 1e-9)


def test_trajectory_velocity_matches_position_differences():
    cfg = ScenarioConfig(num_slots=1000, rng_seed=7)
    pos, vel = generate_trajectory(cfg, np.random.default_rng(7))
    # Central differences of sampled positions vs the analytic derivative.
    fd = (pos[2:] - pos[:-2]) / (2.0 * cfg.slot_duration_s)
    err = np.linalg.norm(fd - vel[1:-1], axis=1).max()
    assert err < 1e-3 * cfg.v_max_ms


def test_trajectory_speed_bounded_and_inside_arena():
    for seed in range(5):
        cfg = ScenarioConfig(num_slots=1000, rng_seed=seed)
        pos, vel = generate_trajectory(cfg, np.random.default_rng(seed))
        assert np.linalg.norm(vel, axis=1).max() <= cfg.v_max_ms + 1e-9
        assert _arena_contains(cfg, pos)


def test_single_waypoint_is_stationary():
    cfg = ScenarioConfig(num_slots=64, rng_seed=0)
    pos, vel = generate_trajectory(cfg, np.random.default_rng(0),
                                   waypoints=np.array([[0.0, 100.0, 50.0]]))
    assert np.all(pos == pos[0])
    assert np.all(vel == 0.0)


# --- modalities ----------------------------------------------------------------


def test_position_modality_noise_std():
    # Monte-Carlo: with sigma_pos = 0.1 m the empirical error std sits near 0.1.
    cfg = ScenarioConfig(num_slots=10_000, rng_seed=11, position_noise_m=0.1)
    ds = generate_dataset(cfg)
    err = ds.features["position"][:, :3] - ds.positions
    std = err.std()
    assert 0.09 <= std <= 0.11


def test_zero_noise_position_is_exact():
    cfg = ScenarioConfig(num_slots=256, rng_seed=5, noise_scale=0.0)
    ds = generate_dataset(cfg)
    np.testing.assert_array_equal(ds.features["position"][:, :3], ds.positions)
    np.testing.assert_array_equal(ds.features["position"][:, 3:], ds.velocities)


def test_dropout_corruption_zeroes_vision_and_flags():
    cfg = ScenarioConfig(
        num_slots=2000, rng_seed=9,
        corruption={"vision": CorruptionSpec(0.05, 10, "dropout_to_zero")})
    ds = generate_dataset(cfg)
    bad = ~ds.reliability["vision"]
    assert bad.any() and (~bad).any()
    assert np.all(ds.features["vision"][bad] == 0.0)
    assert not np.any(np.all(ds.features["vision"][~bad] == 0.0, axis=1))
    for m in MODALITIES[1:]:
        assert ds.reliability[m].all()


def test_corruption_episode_lengths():
    cfg = ScenarioConfig(
        num_slots=5000, rng_seed=13,
        corruption={"lidar": CorruptionSpec(0.01, 7, "gaussian_noise", 5.0)})
    ds = generate_dataset(cfg)
    flags = ~ds.reliability["lidar"]
    # Every maximal corrupted stretch is a multiple of 7 (back-to-back
    # episodes merge), except possibly one truncated at the end.
    runs, t = [], 0
    while t < len(flags):
        if flags[t]:
            start = t
            while t < len(flags) and flags[t]:
                t += 1
            runs.append(t - start)
        else:
            t += 1
    assert runs, "expected at least one episode at this probability"
    for r in runs[:-1]:
        assert r % 7 == 0
    assert runs[-1] % 7 == 0 or flags[-1]


def test_bias_drift_shifts_mean():
    spec = {"position": CorruptionSpec(0.03, 15, "bias_drift", 10.0)}
    cfg = ScenarioConfig(num_slots=4000, rng_seed=17, corruption=spec)
    ds = generate_dataset(cfg)
    bad = ~ds.reliability["position"]
    err = ds.features["position"][:, :3] - ds.positions
    assert bad.any()
    # Drifted slots carry a bias far outside the base noise.
    assert np.abs(err[bad]).max() > 4 * cfg.position_noise_m


def test_rf_history_reflects_previous_slot():
    cfg = ScenarioConfig(num_slots=128, rng_seed=21, noise_scale=0.0)
    ds = generate_dataset(cfg)
    proj = ds.manifest.projection("rf_history")
    rf = ds.features["rf_history"]
    np.testing.assert_array_equal(rf[0], np.zeros(8))
    np.testing.assert_allclose(rf[1:, :6], proj[ds.beam_labels[:-1]], atol=1e-12)
    np.testing.assert_allclose(rf[1:, 7], ds.path_loss_db[:-1], atol=1e-12)


def test_feature_widths_match_registry():
    cfg = ScenarioConfig(num_slots=32, rng_seed=1)
    ds = generate_dataset(cfg)
    for m in MODALITIES:
        assert ds.features[m].shape == (32, MODALITY_WIDTHS[m])
    rec = ds.record(5)
    assert rec.slot == 5
    assert set(rec.features) == set(MODALITIES)
    assert abs(rec.paths.gains[0]) >= np.abs(rec.paths.gains[1:]).max()


# --- dataset plumbing -----------------------------------------------------------


def test_dataset_deterministic_and_round_trip(tmp_path):
    cfg = ScenarioConfig(num_slots=200, rng_seed=42,
                         corruption={"vision": CorruptionSpec(0.05, 5, "dropout_to_zero")})
    d1 = generate_dataset(cfg)
    d2 = generate_dataset(cfg)
    np.testing.assert_array_equal(d1.channels, d2.channels)
    np.testing.assert_array_equal(d1.features["lidar"], d2.features["lidar"])

    p1 = tmp_path / "a"
    p2 = tmp_path / "b"
    write_dataset(d1, p1)
    write_dataset(d2, p2)
    assert (p1 / "dataset.bin").read_bytes() == (p2 / "dataset.bin").read_bytes()
    assert (p1 / "manifest.json").read_text() == (p2 / "manifest.json").read_text()

    back = read_dataset(p1)
    np.testing.assert_array_equal(back.channels, d1.channels)
    np.testing.assert_array_equal(back.beam_labels, d1.beam_labels)
    np.testing.assert_array_equal(back.features["position"], d1.features["position"])
    np.testing.assert_array_equal(back.reliability["vision"], d1.reliability["vision"])
    assert back.manifest.to_json() == d1.manifest.to_json()

    # Round trip again: writing what was read is byte-identical.
    p3 = tmp_path / "c"
    write_dataset(back, p3)
    assert (p3 / "dataset.bin").read_bytes() == (p1 / "dataset.bin").read_bytes()


def test_different_seed_changes_bytes(tmp_path):
    a = generate_dataset(ScenarioConfig(num_slots=64, rng_seed=1))
    b = generate_dataset(ScenarioConfig(num_slots=64, rng_seed=2))
    write_dataset(a, tmp_path / "a")
    write_dataset(b, tmp_path / "b")
    assert (tmp_path / "a/dataset.bin").read_bytes() != (tmp_path / "b/dataset.bin").read_bytes()


def test_corrupt_magic_rejected(tmp_path):
    ds = generate_dataset(ScenarioConfig(num_slots=16, rng_seed=3))
    write_dataset(ds, tmp_path)
    raw = bytearray((tmp_path / "dataset.bin").read_bytes())
    raw[0] ^= 0xFF
    (tmp_path / "dataset.bin").write_bytes(bytes(raw))
    with pytest.raises(DatasetFormatError):
        read_dataset(tmp_path)


def test_truncated_records_rejected(tmp_path):
    ds = generate_dataset(ScenarioConfig(num_slots=16, rng_seed=3))
    write_dataset(ds, tmp_path)
    raw = (tmp_path / "dataset.bin").read_bytes()
    (tmp_path / "dataset.bin").write_bytes(raw[:-8])
    with pytest.raises(DatasetFormatError):
        read_dataset(tmp_path)


def test_split_is_disjoint_and_sized():
    cfg = ScenarioConfig(num_slots=100, rng_seed=8, split_fraction=0.7)
    ds = generate_dataset(cfg)
    train, test = ds.train_indices, ds.test_indices
    assert len(train) == math.ceil(0.7 * 100)
    assert len(test) == 100 - len(train)
    assert set(train).isdisjoint(test)
    assert set(train) | set(test) == set(range(100))


def test_normalization_stats_come_from_train_split_only():
    cfg = ScenarioConfig(num_slots=300, rng_seed=4)
    ds = generate_dataset(cfg)
    mean, std = ds.manifest.normalizer("radar")
    feats = ds.features["radar"][ds.train_indices]
    np.testing.assert_allclose(mean, feats.mean(axis=0), atol=1e-12)
    np.testing.assert_allclose(std, np.maximum(feats.std(axis=0), 1e-8), atol=1e-12)


def test_config_validation_and_hash_stability():
    with pytest.raises(ConfigError):
        ScenarioConfig(codebook_beams=1)
    with pytest.raises(ConfigError):
        ScenarioConfig(split_fraction=1.0)
    with pytest.raises(ConfigError):
        ScenarioConfig.from_dict({"num_antennas": 4, "bogus_key": 1})
    with pytest.raises(ConfigError):
        CorruptionSpec(mode="melt")
    c1 = ScenarioConfig(num_slots=64, rng_seed=9)
    c2 = ScenarioConfig.from_dict(c1.to_dict())
    assert config_hash(c1) == config_hash(c2)
    assert config_hash(c1) != config_hash(ScenarioConfig(num_slots=65, rng_seed=9))


def test_multi_uav_generation_refused():
    with pytest.raises(ConfigError):
        generate_dataset(ScenarioConfig(num_uavs=2, num_slots=16))


def test_los_path_dominates_in_generated_data():
    ds = generate_dataset(ScenarioConfig(num_slots=128, rng_seed=31))
    mags = np.abs(ds.path_gains)
    assert np.all(mags[:, :1] >= mags[:, 1:])
    assert np.all(ds.path_delays > 0)
    assert np.all(np.abs(ds.path_aods) < np.pi / 2)
