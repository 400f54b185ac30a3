"""
Emotion Runner - The interaction loop end to end

Per epoch n (1-based):
    1. act: controls = mu(s) + OU noise; dump the actor's middle layer
    2. environment: mother mirrors (or a natural image, or black)
    3. internal appraisal: classify action, update fatigue, IA(t)
    4. interoception: a(t) = RAM(I) + L(k) + IA(t)
    5. reward: R = C - ||m - a||^2
    6. forecast the next (I, a) with the ConvLSTM; build s'
    7. store (s, action, R, s'); DDPG update once warm
    8. every T_LSTM: train the predictor on the last T_LSTM pairs
    9. every T_L2:   update mood, then the compensation table
An optional evaluation phase follows with noise and learning off.

Every stochastic component draws from its own seeded stream and every
piece of mutable state goes into the checkpoint, so a resumed run
continues bit-identically.
"""

from collections import deque
from pathlib import Path
from typing import Any, Deque, Dict, List, Optional, Tuple, Union
import logging
import math
import time

import numpy as np
import torch

from appraisal.affect import AffectVector
from appraisal.internal import FatigueState, classify_action, combine_appraisals, ia_update, ia_value
from appraisal.ram import RecurrentAttentionModel, load_ram
from decision.ddpg import ActorCritic, AgentState, select_action
from decision.homeostasis import MoodTracker, reward
from decision.noise import OuNoise
from decision.predictor import ConvLstmPredictor, PredictorBatch, PredictorState, train_predictor
from decision.replay import ReplayBuffer, Transition
from engine.config import RunConfig
from engine.rng import RngStreams, torch_generator
from engine.run_log import CODE_VERSION, ActivationDump, RunLog
from memory.emotional_memory import CompensationTable, EpisodeStore
from numeric.checkpoint import Container, load_container, load_module_blocks, load_optimizer_blocks, \
    module_blocks, optimizer_blocks, save_container
from numeric.optim import AdamOptimizer
from utils.errors import CheckpointError, ConfigError, EmotionModelError, NonFiniteError, RunHaltedError
from utils.logging import get_logger, log_event
from world.environment import MirroringEnvironment
from world.faces import ExpressionLabel, FaceControls
from world.stimuli import Stimulus, build_stimulus_set, save_stimuli

logger = get_logger(__name__)

RUN_KIND = 'run'
NAN = float('nan')


def checkpoint_path(out_dir: Union[str, Path], epoch: int) -> Path:
    return Path(out_dir) / 'checkpoints' / f"epoch_{epoch}.h5"


class EmotionRunner:
    """
    Owns every component of one run and steps them in order

    Args:
        config: validated run configuration
        out_dir: run directory (created)
        ram_model: frozen first layer; loaded from run.ram_checkpoint when omitted
        verbose: print progress banners
    """

    def __init__(self, config: RunConfig, out_dir: Union[str, Path],
                 ram_model: Optional[RecurrentAttentionModel] = None, verbose: bool = False):
        self.config = config
        self.out_dir = Path(out_dir)
        self.verbose = verbose
        torch.set_num_threads(config.run.num_threads)

        if ram_model is None:
            if not config.run.ram_checkpoint:
                raise ConfigError('run.ram_checkpoint', 'a trained RAM checkpoint is required')
            ram_model = load_ram(config.run.ram_checkpoint)
        self.ram = ram_model.eval()
        for param in self.ram.parameters():
            param.requires_grad_(False)
        if self.ram.config.image_size != config.environment.image_size:
            raise ConfigError('environment.image_size',
                              f"RAM expects {self.ram.config.image_size}px images")

        self._ram_cache: Dict[str, AffectVector] = {}
        self._build(RngStreams(config.run.seed))

    # Construction

    def _build(self, streams: RngStreams) -> None:
        cfg = self.config
        self.streams = streams
        self.stimuli = build_stimulus_set(cfg.environment.num_natural, cfg.environment.image_size)
        self.env = MirroringEnvironment.from_settings(cfg.environment, streams['env'], self.stimuli)

        self.table = CompensationTable(cfg.memory.gamma, frozen=not cfg.run.with_second_layer)
        self.store = EpisodeStore(capacity=cfg.run.t_l2)
        self.fatigue = FatigueState.from_settings(cfg.appraisal)
        self.mood = MoodTracker.from_settings(cfg.homeostasis)

        generator = torch_generator(streams['init'])
        pcfg = cfg.predictor
        self.predictor = ConvLstmPredictor.from_settings(pcfg, cfg.environment.image_size, generator)
        self.predictor_optimizer = AdamOptimizer(self.predictor, lr=pcfg.learning_rate,
                                                 beta1=pcfg.beta1, beta2=pcfg.beta2, eps=pcfg.eps)
        self.interoception_range = (pcfg.interoception_min, pcfg.interoception_max)

        self.state_dim = AgentState.dim(cfg.ddpg.state_image_size)
        self.agent = ActorCritic.from_settings(cfg.ddpg, self.state_dim, generator)
        self.noise = OuNoise.from_settings(cfg.ddpg, streams['noise'])
        self.replay = ReplayBuffer(cfg.ddpg.buffer_size)

        self.log = RunLog()
        self.activations = ActivationDump()
        self.pairs: Deque[Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]] = deque(maxlen=cfg.run.t_lstm)
        self.epoch = 0
        self._observe_initial()

    def _observe_initial(self) -> None:
        """Before the first step the infant sees the mother's neutral face"""
        stimulus = self.stimuli.faces[ExpressionLabel.NEUTRAL][0]
        self.image = stimulus.image
        self.interoception = self.combine(stimulus, ia_value(self.fatigue))[1]
        self.predictor_state = self.predictor.initial_state(1)
        self._forecast()

    # Per-step pieces

    def appraise(self, stimulus: Stimulus) -> AffectVector:
        """Frozen, deterministic RAM output (cached per stimulus)"""
        if stimulus.stimulus_id not in self._ram_cache:
            self._ram_cache[stimulus.stimulus_id] = self.ram.appraise(stimulus.image)
        return self._ram_cache[stimulus.stimulus_id]

    def combine(self, stimulus: Stimulus, ia: float) -> Tuple[AffectVector, AffectVector, AffectVector]:
        """(RAM output, external appraisal a', interoception a)"""
        ram_output = self.appraise(stimulus)
        external = self.table.compensate(ram_output, stimulus.category)
        return ram_output, external, combine_appraisals(external, ia, self.config.appraisal.ia_mode)

    def _forecast(self) -> None:
        image, interoception, self.predictor_state = self.predictor.predict(
            self.image, self.interoception, self.predictor_state)
        self.predicted_image, self.predicted_interoception = image, interoception
        self.agent_state = AgentState.build(self.image, self.interoception, image, interoception,
                                            self.config.ddpg.state_image_size)

    def _prediction_error(self, image: np.ndarray, interoception: AffectVector) -> float:
        low, high = self.interoception_range
        image_mse = float(np.mean((self.predicted_image - image) ** 2))
        scaled = (self.predicted_interoception.to_array() - interoception.to_array()) / (high - low)
        return image_mse + float(np.mean(scaled ** 2))

    def _train_predictor(self) -> float:
        """Adam steps on the last T_LSTM pairs; returns the first pre-step loss"""
        batch = PredictorBatch.from_pairs(list(self.pairs), self.config.predictor.bptt_length)
        losses = [train_predictor(self.predictor, self.predictor_optimizer, batch)
                  for _ in range(self.config.predictor.train_iterations)]
        return losses[0]

    def step(self, training: bool = True) -> Dict[str, Any]:
        """Run one epoch; returns its log record"""
        cfg = self.config
        epoch = self.epoch + 1
        state_vector = self.agent_state.to_vector(self.interoception_range)

        controls = select_action(self.agent.actor, state_vector, self.noise if training else None)
        middle = self.agent.actor.middle_activation(state_vector)
        outcome = self.env.step(controls)

        action_class = classify_action(controls, outcome.expression,
                                       cfg.environment.eyelid_closed_threshold)
        self.fatigue = ia_update(self.fatigue, action_class, outcome.action_cost)
        ia = ia_value(self.fatigue)
        ram_output, external, interoception = self.combine(outcome.stimulus, ia)

        image = outcome.stimulus.image
        prediction_error = self._prediction_error(image, interoception)
        value = reward(interoception, self.mood.current, cfg.homeostasis.constant)

        self.pairs.append((self.image, self.interoception.to_array(), image, interoception.to_array()))
        self.image, self.interoception = image, interoception
        self._forecast()
        next_vector = self.agent_state.to_vector(self.interoception_range)

        critic_loss = NAN
        lstm_loss = NAN
        if training:
            self.replay.store_transition(Transition(state_vector, controls.to_array(),
                                                    value * cfg.ddpg.reward_scale, next_vector))
            if len(self.replay) >= cfg.ddpg.warmup:
                batch = self.replay.sample(cfg.ddpg.batch_size, self.streams['replay'])
                critic_loss = self.agent.update(batch)['critic_loss']

        self.store.record(epoch, outcome.category, interoception)
        self.mood.push(interoception)

        if training and epoch % cfg.run.t_lstm == 0:
            lstm_loss = self._train_predictor()
            recent = [r["reward"] for r in self.log.tail(cfg.run.t_lstm - 1)] + [value]
            log_event(logger, "lstm_update", epoch=epoch, loss=lstm_loss, mean_reward=float(np.mean(recent)))
        if training and epoch % cfg.run.t_l2 == 0:
            mood = self.mood.update()
            self.table.update_table(self.store)
            log_event(logger, "mood_update", epoch=epoch, valence=mood.valence, arousal=mood.arousal,
                      table_size=len(self.table.categories()))

        record = {
            'phase': 'train' if training else 'eval',
            'epoch': epoch,
            'stimulus_id': outcome.stimulus.stimulus_id,
            'category': outcome.category,
            'natural': int(outcome.natural),
            'eyes_closed': int(outcome.eyes_closed),
            'expression': outcome.expression.value,
            'action_class': action_class.value,
            'action_eyelid_open': controls.eyelid_open,
            'action_eyebrow_knit': controls.eyebrow_knit,
            'action_mouth_open': controls.mouth_open,
            'action_mouth_corner': controls.mouth_corner,
            'action_cost': outcome.action_cost,
            'ram_valence': ram_output.valence,
            'ram_arousal': ram_output.arousal,
            'external_valence': external.valence,
            'external_arousal': external.arousal,
            'ia': ia,
            'interoception_valence': interoception.valence,
            'interoception_arousal': interoception.arousal,
            'mood_valence': self.mood.current.valence,
            'mood_arousal': self.mood.current.arousal,
            'reward': value,
            'critic_loss': critic_loss,
            'lstm_loss': lstm_loss,
            'prediction_error': prediction_error,
        }
        self._check_finite(epoch, record, middle)
        log_event(logger, "epoch", level=logging.DEBUG, epoch=epoch, reward=value, ia=ia)
        self.log.append(record)
        self.activations.append(epoch, middle, outcome.expression.value, record['phase'])
        self.epoch = epoch
        return record

    @staticmethod
    def _check_finite(epoch: int, record: Dict[str, Any], middle: np.ndarray) -> None:
        optional = ('critic_loss', 'lstm_loss')
        for key, value in record.items():
            if isinstance(value, float) and not math.isfinite(value):
                if key in optional and math.isnan(value):
                    continue
                raise RunHaltedError(epoch, f"{key} is {value}")
        if not np.all(np.isfinite(middle)):
            raise RunHaltedError(epoch, "actor middle layer is not finite")

    # Driving

    def run(self) -> RunLog:
        """Train to run.epochs, then the evaluation phase; writes all artifacts"""
        cfg = self.config
        total = cfg.run.epochs + cfg.run.evaluation_epochs
        self._prepare_directory()
        if self.epoch == 0:
            self.save_checkpoint()

        if self.verbose:
            print(f"\n{'='*70}")
            print(f"🧠 EMOTION RUN: {cfg.environment.condition}, second layer "
                  f"{'on' if cfg.run.with_second_layer else 'off'}, seed {cfg.run.seed}")
            print(f"{'='*70}")
        log_event(logger, "run_start", epoch=self.epoch, epochs=cfg.run.epochs,
                  evaluation=cfg.run.evaluation_epochs, condition=cfg.environment.condition)
        started = time.time()

        while self.epoch < total:
            training = self.epoch < cfg.run.epochs
            try:
                record = self.step(training=training)
            except RunHaltedError:
                self.write_artifacts()
                raise
            except (NonFiniteError, FloatingPointError) as exc:
                self.write_artifacts()
                raise RunHaltedError(self.epoch + 1, str(exc), exc) from exc

            if training and self.epoch % cfg.run.checkpoint_every == 0:
                self.save_checkpoint()
            if self.verbose and self.epoch % max(1, cfg.run.t_l2) == 0:
                print(f"   Epoch {self.epoch:6d}: reward={record['reward']:.3f} "
                      f"IA={record['ia']:.3f} mood=({record['mood_valence']:.2f}, {record['mood_arousal']:.2f})")

        if self.epoch > 0 and self.epoch % cfg.run.checkpoint_every != 0:
            self.save_checkpoint()
        self.write_artifacts()
        log_event(logger, "run_done", epochs=self.epoch, seconds=time.time() - started)
        if self.verbose:
            print(f"\n✅ Run complete: {self.epoch} epochs -> {self.out_dir}")
        return self.log

    def _prepare_directory(self) -> None:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.config.to_json_file(self.out_dir / 'config.json')
        (self.out_dir / 'VERSION').write_text(CODE_VERSION + '\n')
        if not (self.out_dir / 'stimuli' / 'manifest.jsonl').exists():
            save_stimuli(self.out_dir / 'stimuli', list(self.stimuli))

    def write_artifacts(self) -> None:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.log.write_csv(self.out_dir / 'run_log.csv')
        self.activations.save(self.out_dir / 'activations.h5')
        self.table.to_frame().to_csv(self.out_dir / 'compensation_table.csv', index=False,
                                     float_format='%.17g')

    # Checkpoints

    def state_blocks(self) -> Dict[str, Any]:
        current = {
            'image': self.image,
            'interoception': self.interoception.to_array(),
            'predicted_image': self.predicted_image,
            'predicted_interoception': self.predicted_interoception.to_array(),
        }
        pairs = list(self.pairs)
        pair_blocks: Dict[str, Any] = {'count': np.asarray(len(pairs))}
        if pairs:
            for i, name in enumerate(('image', 'interoception', 'next_image', 'next_interoception')):
                pair_blocks[name] = np.stack([p[i] for p in pairs])
        return {
            'agent': self.agent.state_blocks(),
            'predictor': module_blocks(self.predictor),
            'predictor_optimizer': optimizer_blocks(self.predictor_optimizer.optimizer),
            'predictor_state': self.predictor_state.to_blocks(),
            'replay': self.replay.state_dict(),
            'noise': self.noise.state_dict(),
            'fatigue': self.fatigue.to_array(),
            'mood': self.mood.state_dict(),
            'table': self.table.state_dict(),
            'store': self.store.state_dict(),
            'environment': self.env.state_dict(),
            'rng': self.streams.state_dict(),
            'current': current,
            'pairs': pair_blocks,
            'log': self.log.to_csv_text(),
            'activations': self.activations.to_blocks(),
        }

    def save_checkpoint(self) -> Path:
        path = checkpoint_path(self.out_dir, self.epoch)
        container = Container(
            kind=RUN_KIND,
            blocks=self.state_blocks(),
            metadata={'epoch': self.epoch, 'config': self.config.to_dict(), 'version': CODE_VERSION,
                      'ram_checkpoint': self.config.run.ram_checkpoint},
        )
        save_container(path, container)
        log_event(logger, "checkpoint", epoch=self.epoch, path=str(path))
        return path

    def load_state_blocks(self, blocks: Dict[str, Any], epoch: int) -> None:
        self.agent.load_state_blocks(blocks['agent'])
        load_module_blocks(self.predictor, blocks['predictor'])
        load_optimizer_blocks(self.predictor_optimizer.optimizer, blocks['predictor_optimizer'])
        self.predictor_state = PredictorState.from_blocks(blocks['predictor_state'])
        self.replay.load_state_dict(blocks['replay'])
        self.noise.load_state_dict(blocks['noise'])
        self.fatigue = FatigueState.from_settings(self.config.appraisal,
                                                  tuple(np.asarray(blocks['fatigue']).reshape(-1)))
        self.mood.load_state_dict(blocks['mood'])
        self.table.load_state_dict(blocks['table'])
        self.store.load_state_dict(blocks['store'])
        self.env.load_state_dict(blocks['environment'])
        self.streams.load_state_dict(blocks['rng'])

        current = blocks['current']
        self.image = np.array(current['image'])
        self.interoception = AffectVector.from_array(current['interoception'])
        self.predicted_image = np.array(current['predicted_image'])
        self.predicted_interoception = AffectVector.from_array(current['predicted_interoception'])
        self.agent_state = AgentState.build(self.image, self.interoception, self.predicted_image,
                                            self.predicted_interoception, self.config.ddpg.state_image_size)

        self.pairs.clear()
        pair_blocks = blocks['pairs']
        for n in range(int(np.asarray(pair_blocks['count']))):
            self.pairs.append(tuple(np.array(pair_blocks[name][n]) for name in
                                    ('image', 'interoception', 'next_image', 'next_interoception')))
        self.log = RunLog.from_csv_text(blocks['log'])
        self.activations = ActivationDump.from_blocks(blocks['activations'])
        self.epoch = epoch

    @classmethod
    def resume(cls, path: Union[str, Path], out_dir: Optional[Union[str, Path]] = None,
               epochs: Optional[int] = None, seed: Optional[int] = None,
               ram_model: Optional[RecurrentAttentionModel] = None,
               verbose: bool = False) -> 'EmotionRunner':
        """
        Rebuild a runner from a run checkpoint

        `epochs` extends the training horizon; `seed` re-derives every
        random stream from a new master seed instead of the saved positions.
        """
        container = load_container(path, expected_kind=RUN_KIND)
        if container.metadata.get('version') != CODE_VERSION:
            raise CheckpointError(f"{path}: written by version {container.metadata.get('version')}, "
                                  f"this is {CODE_VERSION}")
        config = RunConfig.from_dict(container.metadata['config'])
        if epochs is not None:
            config = config.with_overrides({'run.epochs': epochs})
        out_dir = Path(out_dir) if out_dir is not None else Path(path).parent.parent

        runner = cls(config, out_dir, ram_model=ram_model, verbose=verbose)
        runner.load_state_blocks(container.blocks, int(container.metadata['epoch']))
        if seed is not None:
            runner.streams = RngStreams(seed)
            runner.env.rng = runner.streams['env']
            runner.noise.rng = runner.streams['noise']
        log_event(logger, "resumed", epoch=runner.epoch, path=str(path), reseeded=seed is not None)
        return runner


def run(config: RunConfig, out_dir: Union[str, Path], ram_model: Optional[RecurrentAttentionModel] = None,
        verbose: bool = False) -> RunLog:
    return EmotionRunner(config, out_dir, ram_model=ram_model, verbose=verbose).run()


def resume(path: Union[str, Path], out_dir: Optional[Union[str, Path]] = None, epochs: Optional[int] = None,
           seed: Optional[int] = None, ram_model: Optional[RecurrentAttentionModel] = None,
           verbose: bool = False) -> RunLog:
    return EmotionRunner.resume(path, out_dir, epochs, seed, ram_model, verbose).run()
