import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rslp.channel import (
    QPSK_PHASES,
    SymbolFrame,
    build_rotated_channel,
    generate_channels,
    random_phases,
    read_dataset,
    rotate_channels,
    sample_csi_error,
    sample_csi_errors,
    stack_real,
    write_dataset,
)
from rslp.errors import DimensionError, FormatError, ModulationError, ParameterError


def test_empty_channel_set():
    ch = generate_channels(4, 4, 0, 7)
    assert len(ch) == 0 and ch.M == 4 and ch.K == 4
    assert ch.samples.shape == (0, 4, 4)


def test_unit_average_power():
    ch = generate_channels(4, 4, 100_000, 1)
    p = np.mean(np.abs(ch.samples) ** 2)
    assert 0.95 <= p <= 1.05
    # circular symmetry: real and imaginary parts carry half the power each
    assert abs(np.mean(ch.samples.real ** 2) - 0.5) < 0.01


def test_channels_are_deterministic():
    a = generate_channels(3, 2, 50, 5).samples
    b = generate_channels(3, 2, 50, 5).samples
    assert a.tobytes() == b.tobytes()
    assert not np.array_equal(a, generate_channels(3, 2, 50, 6).samples)


@pytest.mark.parametrize("dims", [(0, 4, 1), (4, 0, 1), (4, 4, -1), (2.5, 4, 1)])
def test_invalid_dimensions(dims):
    with pytest.raises(DimensionError):
        generate_channels(*dims, seed=0)


def test_zero_radius_error_is_zero():
    e = sample_csi_error(4, 0.0, 3)
    assert np.array_equal(e.e, np.zeros(4))


def test_error_sampler_respects_bound():
    delta = np.sqrt(2e-4)
    e = sample_csi_errors(4, delta, 10_000, np.random.default_rng(0))
    n = np.linalg.norm(e, axis=1)
    assert n.max() <= delta
    assert (n > 0.9 * delta).any()


def test_error_sampler_radial_law():
    # uniform in a 2M-ball: P(||e|| <= r) = (r / delta)^(2M)
    e = sample_csi_errors(2, 1.0, 40_000, np.random.default_rng(1))
    n = np.linalg.norm(e, axis=1)
    assert abs(np.mean(n <= 0.8) - 0.8**4) < 0.01


@given(st.integers(1, 6), st.floats(0, 10, allow_subnormal=False), st.integers(0, 2**32 - 1))
@settings(max_examples=50, deadline=None)
def test_error_bound_property(M, delta, seed):
    e = sample_csi_errors(M, delta, 64, np.random.default_rng(seed))
    if delta == 0:
        assert not e.any()
    else:
        # scale-free, so that squaring tiny radii cannot underflow
        assert np.all(np.linalg.norm(e / delta, axis=1) <= 1.0)


def test_error_bound_tiny_radius():
    delta = 9.652994344111968e-162
    e = sample_csi_errors(1, delta, 64, np.random.default_rng(0))
    assert np.all(np.linalg.norm(e / delta, axis=1) <= 1.0)


def test_negative_bound_rejected():
    with pytest.raises(ParameterError):
        sample_csi_error(4, -0.1, 0)


def test_common_symbol_scales_by_k():
    h = np.array([[1 + 2j, -0.5j], [0.3, 1.0 + 1j], [2.0, -1.0]])
    frame = SymbolFrame.from_phases([np.pi / 4] * 3)
    for i in range(3):
        np.testing.assert_allclose(build_rotated_channel(h[i], frame, i), 3 * h[i], atol=1e-14)


def test_single_user_identity():
    h = np.array([0.2 - 1j, 1.5 + 0.1j])
    frame = SymbolFrame.from_phases([5 * np.pi / 4])
    np.testing.assert_allclose(build_rotated_channel(h, frame, 0), h, atol=1e-15)


def test_two_user_rotation():
    h1 = np.array([1 + 0j, 0.5 - 0.25j])
    frame = SymbolFrame.from_phases([np.pi / 4, 3 * np.pi / 4])
    expected = h1 * (1 + np.exp(1j * np.pi / 2))
    np.testing.assert_allclose(build_rotated_channel(h1, frame, 0), expected, atol=1e-15)


def test_non_unit_symbol_rejected():
    frame = SymbolFrame(np.array([1.0, 0.9j]))
    with pytest.raises(ModulationError):
        build_rotated_channel(np.ones(2), frame, 0)


def test_vectorized_rotation_matches_scalar():
    rng = np.random.default_rng(2)
    ch = generate_channels(3, 4, 5, 9).samples
    ph = random_phases(5, 4, rng)
    rot = rotate_channels(ch, ph)
    for s in range(5):
        frame = SymbolFrame.from_phases(ph[s])
        for i in range(4):
            np.testing.assert_allclose(rot[s, i], build_rotated_channel(ch[s, i], frame, i), atol=1e-14)


def test_stacking_preserves_norm():
    h = generate_channels(4, 3, 20, 0).samples
    np.testing.assert_allclose(np.linalg.norm(stack_real(h), axis=-1), np.linalg.norm(h, axis=-1))


def test_gray_mapping_and_phase_set():
    frame = SymbolFrame.from_bits([0, 0, 0, 1, 1, 1, 1, 0])
    np.testing.assert_allclose(frame.phases, QPSK_PHASES)
    np.testing.assert_allclose(np.abs(frame.d), 1.0)


def test_null_frames_are_redrawn():
    ph = random_phases(5000, 4, np.random.default_rng(4))
    sums = np.abs(np.exp(1j * ph).sum(axis=1))
    assert sums.min() > 1e-6
    assert np.all(np.isin(np.round(ph, 12), np.round(QPSK_PHASES, 12)))
    raw = random_phases(5000, 4, np.random.default_rng(4), exclude_null_frames=False)
    frac = np.mean(np.abs(np.exp(1j * raw).sum(axis=1)) < 1e-9)
    assert 0.10 < frac < 0.18  # 36/256 of uniform K=4 frames


def test_dataset_roundtrip(tmp_path):
    ch = generate_channels(4, 3, 10, 42)
    path = tmp_path / "d.slpd"
    write_dataset(path, ch)
    back = read_dataset(path)
    assert (back.M, back.K, back.seed, len(back)) == (4, 3, 42, 10)
    np.testing.assert_allclose(back.samples, ch.samples, atol=1e-6)
    assert path.stat().st_size == 32 + 10 * 3 * 4 * 8


def test_dataset_corruption(tmp_path):
    ch = generate_channels(2, 2, 3, 1)
    path = tmp_path / "d.slpd"
    write_dataset(path, ch)
    raw = path.read_bytes()
    path.write_bytes(b"XXXX" + raw[4:])
    with pytest.raises(FormatError) as err:
        read_dataset(path)
    assert err.value.offset == 0
    path.write_bytes(raw[:-5])
    with pytest.raises(FormatError):
        read_dataset(path)
