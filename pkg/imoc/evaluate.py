# -*- coding: utf-8 -*-
# Copyright (c) 2020, IMOC Development Team
# Distributed under the terms of the Apache License 2.0
"""
Normal Scores and AUROC
###################################
Higher scores mean "more normal". Four scores are available:

- ``ori``: clamped squared norm of the latent of the raw input, deterministic
- ``rand``: clamped similarity of the latents of one random view pair
- ``mc``: sum of ``H`` clamped view-pair similarities (Monte Carlo)
- ``extension``: ``g'g`` plus the spatially summed dot products of the
  global feature with its projected local map, clamped after the sum

Scores are computed batch-wise without graph history. AUROC is the exact
Mann-Whitney statistic with midranks, so ties count one half.

.. code-block:: python

    scores = score_ori(encoder, task.x_test, sim)
    auroc(scores, task.y_test)
"""
import logging
import numpy as np
from scipy.stats import rankdata
from imoc.core.error import DomainError, ShapeError
from imoc.core.numerical import DataFrame
from imoc.core.tensor import no_grad
from imoc.estimators import clamp_similarity
from imoc.models import encode
from imoc.augment import make_views
from imoc.util.utility import sample_stream


log = logging.getLogger(__name__)
EVAL_BATCH = 256


class ScoreTable(DataFrame):
    """
    Per-sample normal scores of one evaluation.

    +-----------+-------+------------------------------------------+
    | Column    | Type  | Description                              |
    +===========+=======+==========================================+
    | sample_id | int   | Row of the sample in the test split      |
    +-----------+-------+------------------------------------------+
    | score     | float | Normal score (higher is more normal)     |
    +-----------+-------+------------------------------------------+
    | label     | int   | 1 = normal, 0 = anomalous                |
    +-----------+-------+------------------------------------------+
    """
    _schema = 'scores'
    _index = 'sample_id'
    _columns = ['score', 'label']

    @classmethod
    def from_scores(cls, scores, labels):
        scores, labels = np.asarray(scores, dtype=np.float64), np.asarray(labels, dtype=np.int64)
        if scores.shape != labels.shape:
            raise ShapeError('ScoreTable', scores.shape, labels.shape)
        if not np.all(np.isfinite(scores)):
            raise DomainError('ScoreTable', 'scores must be finite')
        table = cls({'score': scores, 'label': labels})
        table.index.name = 'sample_id'
        return table


def _batches(n, size):
    for start in range(0, n, size):
        yield slice(start, min(n, start + size))


def global_features(encoder, x, batch=EVAL_BATCH):
    """Global latents of a batch of inputs, as float64 (N, d)."""
    with no_grad():
        return np.concatenate([encode(encoder, x[s]).z_global.data.astype(np.float64)
                               for s in _batches(len(x), batch)])


def score_ori(encoder, x, sim, batch=EVAL_BATCH):
    """
    Deterministic score: clamp(z'z) with z the latent of the raw input.

    Args:
        encoder (Encoder): Trained base model
        x (array): (N, ...) normalized inputs
        sim (SimilarityConfig): Clamp constants

    Returns:
        scores (array): (N, ) float64
    """
    z = global_features(encoder, x, batch)
    return clamp_similarity((z*z).sum(axis=1), sim)


def _view_pair_scores(encoder, x, sim, policy, seed, repeat, h, indices, batch):
    """(N, h) clamped similarities of h view pairs per sample."""
    n = len(indices)
    per_chunk = max(1, batch // (2*h))
    out = np.empty((n, h))
    with no_grad():
        for s in _batches(n, per_chunk):
            views = []
            for index in indices[s]:
                rng = sample_stream(seed, repeat, index, 'score')
                for _ in range(h):
                    views.extend(make_views(x[index], rng, policy))
            z = encode(encoder, np.stack(views)).z_global.data.astype(np.float64)
            z = z.reshape(-1, h, 2, z.shape[1])
            out[s] = clamp_similarity((z[:, :, 0]*z[:, :, 1]).sum(axis=2), sim)
    return out


def score_rand(encoder, x, sim, policy, seed=0, repeat=0, batch=EVAL_BATCH):
    """
    Stochastic score: clamped similarity of the latents of one random view
    pair per sample. The pair of sample ``i`` is drawn from the stream of
    (seed, repeat, i), so a fixed (seed, repeat) reproduces the scores.
    """
    indices = np.arange(len(x))
    return _view_pair_scores(encoder, x, sim, policy, seed, repeat, 1, indices, batch)[:, 0]


def score_mc(encoder, x, sim, policy, H=100, seed=0, repeat=0, batch=EVAL_BATCH):
    """
    Monte Carlo score: the sum of H clamped view-pair similarities. H=1
    reproduces :func:`~imoc.evaluate.score_rand` for the same stream.

    Raises:
        DomainError: If H < 1
    """
    if int(H) < 1:
        raise DomainError('score_mc', 'H must be at least 1, got {}'.format(H))
    indices = np.arange(len(x))
    return _view_pair_scores(encoder, x, sim, policy, seed, repeat, int(H), indices, batch).sum(axis=1)


def extension_similarity(g, l):
    """
    Unclamped extension score: g'g plus the dot products of g with every
    local position.

    Args:
        g (array): (N, d) global features
        l (array): (N, d, n) projected local features
    """
    return (g*g).sum(axis=1) + np.einsum('nd,ndk->n', g, l)


def score_extension(encoder, x, sim, batch=EVAL_BATCH):
    """
    Deterministic extension score, clamped after summing both terms.

    Raises:
        EncoderError: If the encoder has no projection head
    """
    parts = []
    with no_grad():
        for s in _batches(len(x), batch):
            out = encode(encoder, x[s])
            local = encoder.project_local(out.z_local).data.astype(np.float64)
            g = out.z_global.data.astype(np.float64)
            parts.append(extension_similarity(g, local.reshape(local.shape[0], local.shape[1], -1)))
    return clamp_similarity(np.concatenate(parts), sim)


def auroc(scores, labels=None):
    """
    Exact area under the ROC curve, P(s_normal > s_anomalous) + 0.5 P(tie).

    Args:
        scores: Array of scores, or a :class:`~imoc.evaluate.ScoreTable`
        labels (array): 1 = normal, 0 = anomalous (omit for a ScoreTable)

    Raises:
        DomainError: If only one class is present
    """
    if labels is None:
        scores, labels = scores['score'].values, scores['label'].values
    scores = np.asarray(scores, dtype=np.float64)
    positive = np.asarray(labels).astype(bool)
    if scores.shape != positive.shape or scores.ndim != 1:
        raise ShapeError('auroc', scores.shape, positive.shape)
    n_pos = int(positive.sum())
    n_neg = positive.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DomainError('auroc', 'need both normal and anomalous records')
    ranks = rankdata(scores, method='average')
    u = ranks[positive].sum() - n_pos*(n_pos + 1)/2.0
    return float(u / (n_pos*n_neg))


class Evaluation(object):
    """
    Result of scoring one test split.

    Attributes:
        auroc (float): Area under the ROC curve
        mean_norm_normal (float): Mean L2 norm of global latents of normal test samples
        mean_norm_anom (float): Same for anomalous samples
        table (ScoreTable): Per-sample scores
    """
    @property
    def norm_gap(self):
        return self.mean_norm_normal - self.mean_norm_anom

    def as_record(self):
        return dict(auroc=self.auroc, mean_norm_normal=self.mean_norm_normal,
                    mean_norm_anom=self.mean_norm_anom)

    def __repr__(self):
        return 'Evaluation(auroc={:.4f}, norm gap={:.4g})'.format(self.auroc, self.norm_gap)

    def __init__(self, auroc, mean_norm_normal, mean_norm_anom, table):
        self.auroc = auroc
        self.mean_norm_normal = mean_norm_normal
        self.mean_norm_anom = mean_norm_anom
        self.table = table


def evaluate_encoder(encoder, task, sim, score='ori', policy=None, H=100, seed=0, repeat=0,
                     batch=EVAL_BATCH):
    """
    Score a task's test split and compute AUROC plus the norm gap.

    Args:
        score (str): 'ori', 'rand', 'mc' or 'extension'
        policy (AugmentPolicy): View policy of the stochastic scores
        H (int): Monte Carlo pairs
        repeat (int): Repeat index selecting the score streams
    """
    z = global_features(encoder, task.x_test, batch)
    norms = np.sqrt((z*z).sum(axis=1))
    normal = task.y_test == 1
    if score == 'ori':
        scores = clamp_similarity((z*z).sum(axis=1), sim)
    elif score == 'rand':
        scores = score_rand(encoder, task.x_test, sim, policy, seed, repeat, batch)
    elif score == 'mc':
        scores = score_mc(encoder, task.x_test, sim, policy, H, seed, repeat, batch)
    elif score == 'extension':
        scores = score_extension(encoder, task.x_test, sim, batch)
    else:
        raise DomainError('evaluate', 'unknown score {!r}'.format(score))
    table = ScoreTable.from_scores(scores, task.y_test)
    result = Evaluation(auroc(table), float(norms[normal].mean()), float(norms[~normal].mean()), table)
    log.debug('{} score: {}'.format(score, result))
    return result


class RepeatTable(DataFrame):
    """
    One row per repeated test evaluation (score variance comparison).

    Columns: repeat, score, auroc, mean_norm_normal, mean_norm_anom.
    """
    _schema = 'repeats'
    _columns = ['repeat', 'score', 'auroc', 'mean_norm_normal', 'mean_norm_anom']


def evaluate_repeats(encoder, task, sim, score='ori', repeats=10, policy=None, H=100, seed=0,
                     batch=EVAL_BATCH):
    """
    Repeat a test evaluation with fresh score streams.

    Returns:
        table (RepeatTable): Per-repeat AUROC
        first (Evaluation): The repeat-0 evaluation (with its score table)
    """
    rows, first = [], None
    for repeat in range(repeats):
        result = evaluate_encoder(encoder, task, sim, score, policy, H, seed, repeat, batch)
        first = result if first is None else first
        rows.append(dict(repeat=repeat, score=score, **result.as_record()))
    table = RepeatTable(rows)
    log.info('{} score over {} repeats: auroc {:.4f} +/- {:.4g}'.format(
        score, repeats, table['auroc'].mean(), table['auroc'].std(ddof=0)))
    return table, first
