import numpy as np
import pytest

from apps.abstract.choices import Phase
from apps.abstract.exceptions import ConfigurationError, DataError
from apps.networks import build_models
from apps.training import (
    Checkpoint,
    TrainConfig,
    inspect_checkpoint,
    latest_checkpoint,
    load_checkpoint,
    read_checkpoint_manifest,
    save_checkpoint,
)
from apps.training.checkpoint import MAGIC, PREAMBLE


@pytest.fixture
def checkpoint(toy_models):
    return Checkpoint(
        arch=toy_models.config,
        train=TrainConfig(seed=3),
        phase=Phase.PHASE1,
        step=7,
        tensors=toy_models.state(),
        optimizer_steps={"phase1": 7},
        rng_state={"seed": 3, "next_step": 7},
    )


@pytest.fixture
def saved(tmp_path, checkpoint):
    return save_checkpoint(checkpoint, tmp_path / "run" / "phase1.ssrc")


def test_round_trip_is_bit_exact(saved, checkpoint):
    """Test that a saved checkpoint loads back bit for bit"""
    loaded = load_checkpoint(saved)
    assert loaded.tensors.keys() == checkpoint.tensors.keys()
    for name, array in checkpoint.tensors.items():
        assert loaded.tensors[name].dtype == array.dtype
        np.testing.assert_array_equal(loaded.tensors[name], array)
    assert loaded.arch == checkpoint.arch
    assert loaded.train == checkpoint.train
    assert (loaded.phase, loaded.step) == (Phase.PHASE1, 7)
    assert loaded.rng_state == {"seed": 3, "next_step": 7}


def test_loaded_state_restores_networks(saved, toy_config):
    """Test that loaded tensors restore the saved network state"""
    models = build_models(toy_config, seed=11)
    models.load_state(load_checkpoint(saved).tensors)
    reference = load_checkpoint(saved).tensors
    for name, array in models.state().items():
        np.testing.assert_array_equal(array, reference[name])


def test_file_starts_with_magic_and_version(saved):
    """Test that a checkpoint starts with the magic and format version"""
    magic, version, length = PREAMBLE.unpack(saved.read_bytes()[: PREAMBLE.size])
    assert magic == MAGIC and version == 1 and length > 0


def test_inspect_is_stable_and_lists_tensors(saved, checkpoint):
    """Test that inspection output is stable and lists every tensor"""
    first, second = inspect_checkpoint(saved), inspect_checkpoint(saved)
    assert first == second
    assert "phase: phase1 (step 7, in progress)" in first
    assert "theta.encoder.0.conv.weight" in first
    assert f"tensors: {len(checkpoint.tensors)}" in first


def test_truncated_file_rejected(saved):
    """Test that a truncated checkpoint is a data error"""
    raw = saved.read_bytes()
    saved.write_bytes(raw[:-10])
    with pytest.raises(DataError) as excinfo:
        load_checkpoint(saved)
    assert excinfo.value.offset == len(raw) - 10


def test_truncated_preamble_rejected(saved):
    """Test that a file shorter than the preamble is a data error"""
    saved.write_bytes(saved.read_bytes()[:5])
    with pytest.raises(DataError):
        read_checkpoint_manifest(saved)


def test_bad_magic_rejected(saved):
    """Test that a file with the wrong magic is a data error"""
    raw = bytearray(saved.read_bytes())
    raw[:4] = b"XXXX"
    saved.write_bytes(bytes(raw))
    with pytest.raises(DataError) as excinfo:
        load_checkpoint(saved)
    assert excinfo.value.offset == 0


def test_corrupt_payload_fails_checksum(saved):
    """Test that a flipped payload byte fails the checksum"""
    raw = bytearray(saved.read_bytes())
    raw[-1] ^= 0xFF
    saved.write_bytes(bytes(raw))
    with pytest.raises(DataError, match="checksum"):
        load_checkpoint(saved)


def test_unsupported_version_rejected(saved):
    """Test that an unknown format version is a data error"""
    raw = bytearray(saved.read_bytes())
    raw[4:8] = (99).to_bytes(4, "little")
    saved.write_bytes(bytes(raw))
    with pytest.raises(DataError, match="version"):
        read_checkpoint_manifest(saved)


def test_incomplete_phase1_is_not_trained(checkpoint):
    """Test that only a complete phase-1 checkpoint counts as trained"""
    with pytest.raises(ConfigurationError):
        checkpoint.require_trained("theta", "phi")
    checkpoint.complete = True
    checkpoint.require_trained("theta", "phi")
    with pytest.raises(ConfigurationError):
        checkpoint.require_trained("omega")


def test_latest_checkpoint_orders_by_step(tmp_path, checkpoint):
    """Test that the latest checkpoint is the one with the highest step"""
    run = tmp_path / "run"
    save_checkpoint(checkpoint, run / "a.ssrc")
    checkpoint.step = 9
    save_checkpoint(checkpoint, run / "b.ssrc")
    (run / "junk.ssrc").write_bytes(b"nope")
    assert latest_checkpoint(run).name == "b.ssrc"
    assert latest_checkpoint(run, Phase.PHASE2) is None


def test_save_under_a_regular_file_is_a_configuration_error(tmp_path, checkpoint):
    """Test that an unwritable checkpoint path raises ConfigurationError"""
    wall = tmp_path / "wall"
    wall.write_text("not a directory")
    with pytest.raises(ConfigurationError, match="cannot write checkpoint"):
        save_checkpoint(checkpoint, wall / "phase1.ssrc")
