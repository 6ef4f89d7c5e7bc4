import pytest

from core.cli import main


@pytest.fixture
def run_cli(capsys):
    """Run a command, returning (exit code, stdout, stderr)."""

    def _run(*argv):
        code = main([str(arg) for arg in argv])
        captured = capsys.readouterr()
        return code, captured.out, captured.err

    return _run


@pytest.fixture
def train_data(tmp_path, run_cli):
    """Four 32px training faces at x4."""
    code, _, _ = run_cli("gen-data", "--seed", 1, "--count", 4, "--out", tmp_path / "train")
    assert code == 0
    return tmp_path / "train"


@pytest.fixture
def tiny_run(tmp_path):
    return [
        "--set", "steps_phase1=2",
        "--set", "steps_phase2=2",
        "--set", "batch_size=2",
        "--set", "checkpoint_interval=1",
        "--set", "log_interval=1",
    ]


@pytest.fixture
def trained_run(tmp_path, run_cli, train_data, tiny_run):
    run_dir = tmp_path / "run"
    code, _, err = run_cli("train", "--data", train_data, "--run-dir", run_dir, *tiny_run)
    assert code == 0, err
    return run_dir
