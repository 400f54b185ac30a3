"""
Unit Tests for the Command Line Interface

Tests for argument parsing, settings layering, exit codes and a tiny
train-ram -> run -> resume -> analyze session
"""

import sys
from pathlib import Path
sys.path.insert(0, str(Path(__file__).parent.parent.parent / 'src'))

import pandas as pd
import pytest

from engine.cli import build_parser, flag_overrides, main, resolve_config
from utils.logging import configure_logging

TINY_SETTINGS = """\
# small enough to train and run in seconds
ram.image_size=16
ram.patch_size=4
ram.num_scales=2
ram.num_glimpses=2
ram.glimpse_hidden=16
ram.location_hidden=8
ram.hidden_size=16
ram.batch_size=4
ram.epochs=1
corpus.size=12
environment.image_size=16
environment.num_natural=2
predictor.hidden_channels=2
predictor.kernel_size=3
predictor.train_iterations=1
ddpg.state_image_size=8
ddpg.actor_hidden=[16, 8, 4]
ddpg.critic_hidden=[16, 8]
ddpg.batch_size=4
ddpg.warmup=4
ddpg.buffer_size=20
homeostasis.window=10
run.t_lstm=3
run.t_l2=6
run.checkpoint_every=6
run.epochs=12
"""


@pytest.fixture(autouse=True)
def release_log_files():
    yield
    configure_logging('WARNING')


@pytest.fixture(autouse=True)
def clean_environment(monkeypatch):
    import os
    for name in list(os.environ):
        if name.startswith('EMOTION__'):
            monkeypatch.delenv(name)


class TestParser:
    """Tests for argument parsing"""

    def test_run_flags_become_overrides(self):
        args = build_parser().parse_args(['run', '--out', 'x', '--condition', 'face-natural',
                                          '--second-layer', 'off', '--epochs', '5', '--seed', '3',
                                          '--ram', 'ram.h5'])
        assert flag_overrides(args) == {
            'run.seed': 3,
            'run.epochs': 5,
            'environment.condition': 'face_plus_natural',
            'run.with_second_layer': False,
            'run.ram_checkpoint': 'ram.h5',
        }

    def test_train_ram_epochs(self):
        args = build_parser().parse_args(['train-ram', '--out', 'x', '--epochs', '7'])
        assert flag_overrides(args) == {'ram.epochs': 7}

    def test_set_lines_layer_under_flags(self):
        args = build_parser().parse_args(['run', '--out', 'x', '--set', 'ddpg.gamma=0.5',
                                          '--set', 'run.epochs=9', '--epochs', '4'])
        config = resolve_config(args)
        assert config.ddpg.gamma == 0.5
        assert config.run.epochs == 4

    def test_environment_variables(self, monkeypatch):
        monkeypatch.setenv('EMOTION__MEMORY__GAMMA', '0.25')
        config = resolve_config(build_parser().parse_args(['run', '--out', 'x']))
        assert config.memory.gamma == 0.25

    def test_unknown_command(self):
        with pytest.raises(SystemExit) as excinfo:
            build_parser().parse_args(['dance'])
        assert excinfo.value.code == 2

    def test_bad_condition(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args(['run', '--out', 'x', '--condition', 'outdoors'])


class TestExitCodes:
    """Tests for diagnosed failures"""

    def test_run_without_ram(self, tmp_path, capsys):
        assert main(['run', '--out', str(tmp_path / 'run')]) == 1
        assert 'ram_checkpoint' in capsys.readouterr().err

    def test_unknown_setting(self, tmp_path, capsys):
        assert main(['run', '--out', str(tmp_path / 'run'), '--set', 'ddpg.gama=0.5']) == 1
        assert 'ddpg.gama' in capsys.readouterr().err

    def test_analyze_missing_run(self, tmp_path):
        assert main(['analyze', '--runs', str(tmp_path / 'nothing'), '--out', str(tmp_path / 'reports')]) == 1

    def test_resume_missing_checkpoint(self, tmp_path):
        assert main(['resume', str(tmp_path / 'checkpoints' / 'epoch_5.h5')]) == 1


class TestSession:
    """Tests for the whole command sequence on a tiny configuration"""

    def test_train_run_resume_analyze(self, tmp_path, capsys):
        settings = tmp_path / 'tiny.conf'
        settings.write_text(TINY_SETTINGS)
        ram_dir = tmp_path / 'ram'
        run_dir = tmp_path / 'runs' / 'a'
        reports = tmp_path / 'reports'

        assert main(['train-ram', '--config', str(settings), '--out', str(ram_dir), '--seed', '1']) == 0
        for name in ('ram.h5', 'ram_loss.csv', 'attention.svg', 'config.json', 'train_ram.log'):
            assert (ram_dir / name).exists(), name
        assert (ram_dir / 'corpus' / 'manifest.jsonl').exists()

        assert main(['run', '--config', str(settings), '--ram', str(ram_dir / 'ram.h5'),
                     '--condition', 'face-natural', '--out', str(run_dir)]) == 0
        assert len(pd.read_csv(run_dir / 'run_log.csv')) == 12

        assert main(['resume', str(run_dir / 'checkpoints' / 'epoch_12.h5'), '--epochs', '18']) == 0
        frame = pd.read_csv(run_dir / 'run_log.csv')
        assert frame['epoch'].tolist() == list(range(1, 19))
        assert (run_dir / 'checkpoints' / 'epoch_18.h5').exists()

        assert main(['analyze', '--runs', str(run_dir), '--out', str(reports), '--bands', '3']) == 0
        assert (reports / 'freq.csv').exists()
        assert (reports / 'a' / 'pca_band_2.svg').exists()
        assert 'single run' in capsys.readouterr().out


# Run tests if executed directly
if __name__ == "__main__":
    pytest.main([__file__, "-v"])
