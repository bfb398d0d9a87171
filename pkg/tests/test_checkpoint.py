import numpy as np
import pytest

from utils import CheckpointContainer, CheckpointError, SeedStreams, load_ppm, save_ppm


@pytest.fixture
def container():
    return CheckpointContainer(
        {
            "weights": np.linspace(-1, 1, 12, dtype=np.float32).reshape(3, 4),
            "frames": np.arange(24, dtype=np.uint8).reshape(2, 3, 4),
            "exact": np.array([0.1, 1 / 3]),
            "scalar": np.array(2.5, dtype=np.float32),
        },
        {"kind": "test", "config_hash": "0123456789abcdef", "seed": 4},
    )


def test_round_trip_preserves_values_and_dtypes(container, tmp_path):
    loaded = CheckpointContainer.load(container.save(tmp_path / "c.dpab"))
    assert loaded.metadata == container.metadata
    assert loaded.tensors["frames"].dtype == np.uint8
    assert loaded.tensors["exact"].dtype == np.float64
    for name, array in container.tensors.items():
        np.testing.assert_array_equal(loaded.tensors[name], array)


def test_other_dtypes_are_stored_as_f32(tmp_path):
    loaded = CheckpointContainer.from_bytes(CheckpointContainer({"i": np.arange(3)}).to_bytes())
    assert loaded.tensors["i"].dtype == np.float32


def test_serialization_is_byte_stable(container):
    assert container.to_bytes() == container.to_bytes()


@pytest.mark.parametrize("index", [0, 10, -5, -1])
def test_flipped_byte_is_detected(container, index):
    raw = bytearray(container.to_bytes())
    raw[index] ^= 0x01
    with pytest.raises(CheckpointError):
        CheckpointContainer.from_bytes(bytes(raw))


def test_truncated_file_is_rejected(container):
    with pytest.raises(CheckpointError):
        CheckpointContainer.from_bytes(container.to_bytes()[:8])


def test_seed_streams_are_reproducible_and_independent():
    a, b = SeedStreams(3), SeedStreams(3)
    np.testing.assert_array_equal(a.generator("env", 1).random(4), b.generator("env", 1).random(4))
    assert a.seed("env", 1) == b.seed("env", 1)
    assert a.seed("env", 1) != a.seed("env", 2)
    assert a.seed("env", 1) != a.seed("attack", 1)
    assert a.seed("env", 1) != SeedStreams(4).seed("env", 1)


def test_ppm_round_trip(tmp_path):
    image = np.random.default_rng(0).uniform(0, 1, (3, 5, 7))
    path = save_ppm(tmp_path / "frame.ppm", image)
    assert path.read_bytes().startswith(b"P6")
    loaded = load_ppm(path)
    assert loaded.shape == (3, 5, 7)
    np.testing.assert_array_equal(loaded, np.round(image * 255).astype(np.uint8))
