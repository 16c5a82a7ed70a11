# -*- coding: utf-8 -*-
# Copyright (c) 2020, IMOC Development Team
# Distributed under the terms of the Apache License 2.0
"""
Training
###################################
Training loops for the base model (global features only) and the extension
model (global plus projected local features). Each batch draws N normal
training samples, builds their 2N augmented views in paired order, encodes
them, evaluates the entropy regularized loss and takes one optimizer step.

Everything random is derived from the run seed: the epoch permutation from
``(seed, epoch)``, each view pair from ``(seed, epoch, sample index)`` and
the initial weights from ``seed``. Two runs with the same configuration and
data therefore produce identical histories.

.. code-block:: python

    cfg = load_config('run.yml')
    task = make_one_class_task(load_dataset(cfg), cfg.normal_class)
    encoder, history = train_base(cfg, task)
"""
import time
import numpy as np
from imoc.core.error import DomainError, NonFiniteLossError
from imoc.core.numerical import DataFrame, Numerical
from imoc.core.tensor import backward
from imoc.core.optim import make_optimizer
from imoc.core.gradcheck import finite_difference_check, primitive_suite
from imoc.models import EncoderConfig, build_encoder, encode
from imoc.augment import paired_views
from imoc.estimators import SimilarityConfig, total_loss_base, total_loss_extension
from imoc.evaluate import evaluate_encoder
from imoc.util.utility import run_stream
from imoc.util.io import checkpoint_save


GRAD_TOL = 1e-4


class TrainHistory(DataFrame):
    """
    One row per evaluation: the untrained model (epoch 0), every
    ``eval_every`` epochs and the final epoch. Loss columns are means over the
    epoch's batches (empty for epoch 0).

    +------------------+-------+-------------------------------------------+
    | Column           | Type  | Description                               |
    +==================+=======+===========================================+
    | epoch            | int   | Completed epochs                          |
    +------------------+-------+-------------------------------------------+
    | loss_total       | float | Mutual information loss + beta * entropy  |
    +------------------+-------+-------------------------------------------+
    | loss_nce         | float | Mutual information loss                   |
    +------------------+-------+-------------------------------------------+
    | loss_entropy     | float | Entropy regularizer (unweighted)          |
    +------------------+-------+-------------------------------------------+
    | auroc            | float | Test AUROC                                |
    +------------------+-------+-------------------------------------------+
    | mean_norm_normal | float | Mean latent L2 norm, normal test samples  |
    +------------------+-------+-------------------------------------------+
    | mean_norm_anom   | float | Mean latent L2 norm, anomalous samples    |
    +------------------+-------+-------------------------------------------+
    | wall_time_s      | float | Seconds since start (0 unless recorded)   |
    +------------------+-------+-------------------------------------------+

    The extension model adds ``loss_gvg`` and ``loss_gvl``.
    """
    _schema = 'history'
    _columns = ['epoch', 'loss_total', 'loss_nce', 'loss_entropy', 'auroc',
                'mean_norm_normal', 'mean_norm_anom', 'wall_time_s']


class Trainer(Numerical):
    """
    Stateful training run over a one-class task.

    Args:
        cfg (RunConfig): Hyperparameters
        task (OneClassTask): Normal training data and labeled test split
        checkpoint_path (str): Where to keep the last good parameters if the
            loss becomes non-finite (optional)
    """
    def batches(self, epoch):
        """Sample index batches of one epoch (a trailing single sample is dropped)."""
        n = len(self.task.x_train)
        order = run_stream(self.cfg.seed, 'permutation', epoch).permutation(n)
        size = self.cfg.batch_size
        return [order[i:i + size] for i in range(0, n, size) if len(order[i:i + size]) >= 2]

    def batch_loss(self, views):
        """Loss breakdown of one paired-view batch."""
        cfg = self.cfg
        out = encode(self.encoder, views)
        if not cfg.extension:
            return total_loss_base(out.z_global, cfg.beta, cfg.p_norm, self.sim,
                                   cfg.estimator, cfg.entropy_squared)
        local = self.encoder.project_local(out.z_local)
        local = local.reshape(local.shape[0], local.shape[1], -1)
        return total_loss_extension(out.z_global, local, cfg.beta, cfg.p_norm, self.sim,
                                    cfg.estimator, cfg.entropy_squared)

    def evaluate(self):
        return evaluate_encoder(self.encoder, self.task, self.sim, score=self.score,
                                batch=self.cfg.eval_batch)

    def _abort(self, loss, epoch, index, good):
        self.encoder.load_state_dict(good)
        if self.checkpoint_path is not None:
            checkpoint_save(self.encoder, self.cfg, self.checkpoint_path)
        raise NonFiniteLossError(loss, epoch, index)

    def run_epoch(self, epoch):
        """Train one epoch; returns mean loss components."""
        records = []
        params = self.encoder.parameters()
        for index, batch in enumerate(self.batches(epoch)):
            views = paired_views(self.task.x_train, batch, self.cfg.seed, epoch, self.policy)
            breakdown = self.batch_loss(views)
            loss = breakdown.total.item()
            if not np.isfinite(loss):
                self._abort(loss, epoch, index, self._good)
            self._good = {k: v.copy() for k, v in self.encoder.state_dict().items()}
            self.optimizer.zero_grad()
            backward(breakdown.total, params)
            self.optimizer.step()
            records.append(breakdown.as_record())
            self.log.debug('epoch {} batch {}: {}'.format(epoch, index, breakdown))
        return {k: float(np.mean([r[k] for r in records])) for k in records[0]}

    def record(self, epoch, losses):
        result = self.evaluate()
        row = dict(epoch=epoch, **losses, **result.as_record())
        row['wall_time_s'] = time.perf_counter() - self._start if self.cfg.record_wall_time else 0.0
        self.rows.append(row)
        self.log.info('epoch {} loss {:.6g} (mi {:.6g}, entropy {:.6g}) auroc {:.4f} norm gap {:.4g}'.format(
            epoch, losses['loss_total'], losses['loss_nce'], losses['loss_entropy'],
            result.auroc, result.norm_gap))

    def fit(self):
        """
        Run every epoch.

        Returns:
            encoder (Encoder): Trained model
            history (TrainHistory): Evaluation records

        Raises:
            NonFiniteLossError: Loss became NaN/Inf (parameters restored)
        """
        cfg = self.cfg
        self._start = time.perf_counter()
        self._good = {k: v.copy() for k, v in self.encoder.state_dict().items()}
        empty = dict.fromkeys(['loss_total', 'loss_nce', 'loss_entropy', 'loss_gvg', 'loss_gvl'], np.nan)
        self.record(0, empty)
        for epoch in range(1, cfg.epochs + 1):
            losses = self.run_epoch(epoch)
            if epoch % cfg.eval_every == 0 or epoch == cfg.epochs:
                self.record(epoch, losses)
        history = TrainHistory(self.rows)
        if not cfg.extension:
            history = TrainHistory(history.drop(columns=['loss_gvg', 'loss_gvl']))
        return self.encoder, history

    def __init__(self, cfg, task, checkpoint_path=None):
        if len(task.x_train) < 2:
            raise DomainError('train', 'need at least two normal training samples')
        self.cfg = cfg
        self.task = task
        self.checkpoint_path = checkpoint_path
        enc_cfg = cfg.encoder_config(task.x_train.shape[1:])
        self.encoder = build_encoder(enc_cfg, seed=cfg.seed, precision=cfg.precision)
        self.sim = cfg.similarity(self.encoder.latent_dim)
        self.policy = cfg.policy(task.grayscale)
        self.optimizer = make_optimizer(cfg.optimizer, self.encoder.parameters(), cfg.lr, cfg.momentum)
        self.score = 'extension' if cfg.extension else 'ori'
        self.rows = []
        self.log.info('{} on {} normal samples, {} test samples'.format(
            self.encoder, len(task.x_train), len(task.x_test)))


def train_base(cfg, task, checkpoint_path=None):
    """
    Train the base model.

    Returns:
        encoder (Encoder): Trained model
        history (TrainHistory): Evaluation records
    """
    if cfg.extension:
        raise DomainError('train_base', 'configuration requests the extension model')
    return Trainer(cfg, task, checkpoint_path).fit()


def train_extension(cfg, task, checkpoint_path=None):
    """Train the extension model; evaluation uses the extension score."""
    if not cfg.extension:
        raise DomainError('train_extension', 'configuration requests the base model')
    return Trainer(cfg, task, checkpoint_path).fit()


def train(cfg, task, checkpoint_path=None):
    """Train whichever model the configuration names."""
    fn = train_extension if cfg.extension else train_base
    return fn(cfg, task, checkpoint_path)


class GradientReport(DataFrame):
    """
    Worst finite-difference relative error per primitive op and per loss.

    Columns: name, kind ('op' or 'loss'), max_rel_error, passed.
    """
    _schema = 'gradcheck'
    _columns = ['name', 'kind', 'max_rel_error', 'passed']


def _loss_cases(rng, n=4, d_in=8, per_weight=12):
    """
    (name, fn, params, entries) for the full losses through a 64-bit tiny
    encoder: every bias entry plus ``per_weight`` sampled entries of each
    weight tensor.
    """
    cases = []
    x = rng.uniform(-1, 1, size=(2*n, d_in))
    for extension in (False, True):
        enc = build_encoder(EncoderConfig(variant='tiny', input_shape=(d_in, ), projection=extension),
                            seed=int(rng.integers(2**31)), precision=64)
        sim = SimilarityConfig(c1=enc.latent_dim)
        params = [p for _, p in enc.named_parameters()]
        entries = [None if name.endswith('bias') else rng.choice(p.data.size, per_weight, replace=False)
                   for name, p in enc.named_parameters()]
        settings = [('nce', 1), ('nce', 2), ('jsd', 1)] if not extension else [('nce', 1), ('jsd', 2)]
        for estimator, p in settings:
            if extension:
                def fn(enc=enc, sim=sim, estimator=estimator, p=p):
                    out = enc(x)
                    local = enc.project_local(out.z_local)
                    local = local.reshape(local.shape[0], local.shape[1], -1)
                    return total_loss_extension(out.z_global, local, 20.0, p, sim, estimator).total
                name = 'extension-{}-p{}'.format(estimator, p)
            else:
                def fn(enc=enc, sim=sim, estimator=estimator, p=p):
                    return total_loss_base(enc(x).z_global, 20.0, p, sim, estimator).total
                name = 'base-{}-p{}'.format(estimator, p)
            cases.append((name, fn, params, entries))
    return cases


def gradient_report(seed=0, trials=100):
    """
    Finite-difference checks (64-bit, step 1e-5) of every primitive op and of
    the base and extension losses through the tiny encoder.

    Returns:
        report (GradientReport): One row per op or loss
    """
    rows = [dict(name=k, kind='op', max_rel_error=v) for k, v in primitive_suite(seed, trials).items()]
    rng = np.random.default_rng(seed)
    for name, fn, params, entries in _loss_cases(rng):
        err = finite_difference_check(fn, params, entries=entries)
        rows.append(dict(name=name, kind='loss', max_rel_error=err))
    for row in rows:
        row['passed'] = bool(row['max_rel_error'] < GRAD_TOL)
    return GradientReport(rows)


class SweepTable(DataFrame):
    """
    Final evaluation per entropy weight (AUROC versus beta, norm gap versus beta).

    Columns: beta, auroc, loss_total, loss_nce, loss_entropy,
    mean_norm_normal, mean_norm_anom, norm_gap.
    """
    _schema = 'sweep'
    _columns = ['beta', 'auroc', 'loss_total', 'loss_nce', 'loss_entropy',
                'mean_norm_normal', 'mean_norm_anom', 'norm_gap']


def sweep_beta(cfg, task, betas=None, callback=None):
    """
    Train one model per entropy weight with otherwise identical settings.

    Args:
        betas (iterable): Weights (default ``cfg.sweep_betas``)
        callback (callable): Called as ``callback(beta, encoder, history)``
            after each run (e.g. to write artifacts)

    Returns:
        table (SweepTable): One row per beta, from the final history record
    """
    rows = []
    for beta in (cfg.sweep_betas if betas is None else betas):
        run = cfg.replace(beta=float(beta))
        encoder, history = train(run, task)
        last = history.iloc[-1]
        rows.append(dict(beta=float(beta), auroc=last['auroc'], loss_total=last['loss_total'],
                         loss_nce=last['loss_nce'], loss_entropy=last['loss_entropy'],
                         mean_norm_normal=last['mean_norm_normal'],
                         mean_norm_anom=last['mean_norm_anom'],
                         norm_gap=last['mean_norm_normal'] - last['mean_norm_anom']))
        if callback is not None:
            callback(float(beta), encoder, history)
    return SweepTable(rows)
