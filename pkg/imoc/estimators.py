# -*- coding: utf-8 -*-
# Copyright (c) 2020, IMOC Development Team
# Distributed under the terms of the Apache License 2.0
"""
Mutual Information and Entropy Losses
#######################################
Sample based losses for the entropy regularized objective
``max I(x, z) - beta * H(z)``.

Batches hold two augmented views per sample in paired order: rows ``2k`` and
``2k + 1`` (zero based) are the views of sample ``k``. Similarities are dot
products squashed by

.. math::

    s' = c_2 \\tanh(s / (c_1 c_2))

with ``c2 = 20``. ``c1`` sets where squashing starts. The latent dimension is
the natural scale, but a large ``beta`` keeps latents far smaller than that,
so runs use the calibrated ``c1`` of ``defaults.yml``. The InfoNCE loss is
the softmax cross entropy of each anchor's positive against every other row
(self excluded); the constant ``1/K`` inside the bound is dropped, it does not
change gradients. The Jensen-Shannon alternative uses the same clamped dot
product as its critic.

Entropy is bounded by a reference density: a Laplace reference gives the mean
L1 norm, a Gaussian reference the mean squared L2 norm.
"""
import numpy as np
from imoc.typed import Typed, TypedClass
from imoc.core.error import DomainError, ShapeError
from imoc.core.tensor import Tensor, as_tensor, stack


def _positive(value):
    return value > 0


class SimilarityConfig(TypedClass):
    """Constants of the similarity clamp."""
    c1 = Typed(float, check=_positive, doc="Similarity scale")
    c2 = Typed(float, default=20.0, check=_positive, doc="Clamp bound")

    def __init__(self, c1, c2=20.0):
        super(SimilarityConfig, self).__init__(c1=c1, c2=c2)


class LossBreakdown(object):
    """
    Components of one batch loss.

    Attributes:
        total (Tensor): Scalar to back-propagate
        nce (float): Mutual information term (gvg + gvl for the extension model)
        entropy (float): Entropy regularizer (before the beta weight)
        gvg (float): Global-vs-global term (extension only, else 0)
        gvl (float): Global-vs-local term (extension only, else 0)
    """
    def as_record(self):
        return dict(loss_total=self.total.item(), loss_nce=self.nce,
                    loss_entropy=self.entropy, loss_gvg=self.gvg, loss_gvl=self.gvl)

    def __repr__(self):
        return 'LossBreakdown(total={:.6g}, nce={:.6g}, entropy={:.6g})'.format(
            self.total.item(), self.nce, self.entropy)

    def __init__(self, total, nce, entropy, gvg=0.0, gvl=0.0):
        self.total = total
        self.nce = float(nce)
        self.entropy = float(entropy)
        self.gvg = float(gvg)
        self.gvl = float(gvl)


def clamp_similarity(s, cfg):
    """
    Bounded, strictly increasing squash of raw similarities (|result| < c2).

    Works on tensors (differentiable), arrays and scalars.
    """
    scale = cfg.c1 * cfg.c2
    if isinstance(s, Tensor):
        return (s * (1.0/scale)).tanh() * cfg.c2
    return cfg.c2 * np.tanh(np.asarray(s, dtype=np.float64) / scale)


def _pair_layout(m):
    """Index arrays for positives and for every off-diagonal entry."""
    rows = np.arange(m)
    positive = rows ^ 1
    cols = np.array([[j for j in range(m) if j != i] for i in range(m)])
    return rows, positive, cols


def _check_pairs(op, m):
    if m % 2 or m < 4:
        raise DomainError(op, 'need an even number of rows with N >= 2 samples, got {} rows'.format(m))


def nce_from_similarity(S, cfg):
    """
    InfoNCE over a (2N, 2N) raw similarity matrix in paired-view order.
    """
    m = S.shape[0]
    _check_pairs('nce', m)
    clamped = clamp_similarity(S, cfg)
    shifted = clamped - float(clamped.data.max())
    rows, positive, cols = _pair_layout(m)
    others = shifted[rows[:, None], cols]
    return (others.logsumexp(axis=1) - shifted[rows, positive]).mean()


def jsd_from_similarity(S, cfg):
    """
    Jensen-Shannon loss over a (2N, 2N) raw similarity matrix: positives are
    the view pairs, negatives every entry that is neither self nor positive.
    """
    m = S.shape[0]
    _check_pairs('jsd', m)
    clamped = clamp_similarity(S, cfg)
    rows, positive, _ = _pair_layout(m)
    neg = np.array([[j for j in range(m) if j != i and j != (i ^ 1)] for i in range(m)])
    return jsd_mi_loss(clamped[rows, positive], clamped[rows[:, None], neg].reshape(-1))


def nce_pair_loss(Z, cfg):
    """
    InfoNCE loss of a paired batch.

    Args:
        Z (Tensor): (2N, d) latents, rows 2k and 2k+1 are views of sample k
        cfg (SimilarityConfig): Clamp constants

    Returns:
        loss (Tensor): Scalar in [0, 4 c2 + ln(2N - 1)]
    """
    Z = as_tensor(Z)
    if Z.ndim != 2:
        raise ShapeError('nce_pair_loss', Z.shape)
    return nce_from_similarity(Z @ Z.T, cfg)


def interleave_maps(phi1, phi2):
    """
    Spatially sum two (N, d, n) map batches and interleave them into (2N, d)
    rows: phi1[k] at row 2k, phi2[k] at row 2k+1.
    """
    phi1, phi2 = as_tensor(phi1), as_tensor(phi2)
    if phi1.ndim != 3 or phi2.ndim != 3 or phi1.shape[:2] != phi2.shape[:2]:
        raise ShapeError('nce_map_loss', phi1.shape, phi2.shape)
    n, d = phi1.shape[:2]
    return stack([phi1.sum(axis=2), phi2.sum(axis=2)], axis=1).reshape(2*n, d)


def nce_map_loss(phi1, phi2, cfg):
    """
    InfoNCE where the similarity of two rows is the sum of dot products over
    every pair of spatial locations.

    Args:
        phi1 (Tensor): (N, d, n1) maps of the first views
        phi2 (Tensor): (N, d, n2) maps of the second views
    """
    Z = interleave_maps(phi1, phi2)
    return nce_from_similarity(Z @ Z.T, cfg)


def jsd_map_loss(phi1, phi2, cfg):
    """Jensen-Shannon counterpart of :func:`~imoc.estimators.nce_map_loss`."""
    Z = interleave_maps(phi1, phi2)
    return jsd_from_similarity(Z @ Z.T, cfg)


def jsd_pair_loss(Z, cfg):
    """Jensen-Shannon counterpart of :func:`~imoc.estimators.nce_pair_loss`."""
    Z = as_tensor(Z)
    if Z.ndim != 2:
        raise ShapeError('jsd_pair_loss', Z.shape)
    return jsd_from_similarity(Z @ Z.T, cfg)


def jsd_mi_loss(scores_pos, scores_neg):
    """
    Negated Jensen-Shannon estimator: mean softplus(-f_pos) + mean softplus(f_neg).

    The loss is non-negative; the estimator value is its negation.
    """
    scores_pos, scores_neg = as_tensor(scores_pos), as_tensor(scores_neg)
    if scores_pos.size == 0 or scores_neg.size == 0:
        raise DomainError('jsd_mi_loss', 'empty score set')
    return (-scores_pos).softplus().mean() + scores_neg.softplus().mean()


def entropy_regularizer(Z, p=1, squared=None):
    """
    Mean norm of latent rows (entropy upper bound up to constants).

    Args:
        Z (Tensor): (M, d) latents
        p (int): 1 (Laplace reference) or 2 (Gaussian reference)
        squared (bool): Square the norm; defaults to True for p=2, False for p=1

    Returns:
        reg (Tensor): Scalar, zero iff Z is zero
    """
    if p not in (1, 2):
        raise DomainError('entropy_regularizer', 'p must be 1 or 2, got {!r}'.format(p))
    Z = as_tensor(Z)
    if Z.ndim != 2 or Z.shape[0] < 1:
        raise ShapeError('entropy_regularizer', Z.shape)
    if squared is None:
        squared = p == 2
    if p == 2 and squared:
        return Z.sqnorm().mean()
    norms = Z.norm(p)
    return (norms * norms).mean() if squared else norms.mean()


def _mi_losses(estimator):
    if estimator == 'nce':
        return nce_pair_loss, nce_map_loss
    if estimator == 'jsd':
        return jsd_pair_loss, jsd_map_loss
    raise DomainError('estimator', 'unknown estimator {!r}'.format(estimator))


def total_loss_base(Z, beta, p, cfg, estimator='nce', squared=None):
    """
    Base objective: mutual information loss + beta * entropy over all 2N rows.

    Returns:
        breakdown (LossBreakdown): total = nce + beta * entropy
    """
    if beta < 0:
        raise DomainError('total_loss_base', 'beta must be non-negative')
    pair_loss, _ = _mi_losses(estimator)
    mi = pair_loss(Z, cfg)
    ent = entropy_regularizer(Z, p, squared)
    total = mi + ent * float(beta) if beta else mi
    return LossBreakdown(total, mi.item(), ent.item())


def total_loss_extension(G, L, beta, p, cfg, estimator='nce', squared=None):
    """
    Extension objective: global-vs-global plus global-vs-local terms and the
    entropy of globals and projected locals.

    Args:
        G (Tensor): (2N, d) global features in paired-view order
        L (Tensor): (2N, d, n) projected local features, same order

    Returns:
        breakdown (LossBreakdown): total = gvg + gvl + beta * entropy
    """
    if beta < 0:
        raise DomainError('total_loss_extension', 'beta must be non-negative')
    G, L = as_tensor(G), as_tensor(L)
    if L.ndim != 3 or G.ndim != 2 or L.shape[:2] != G.shape:
        raise ShapeError('total_loss_extension', G.shape, L.shape)
    pair_loss, map_loss = _mi_losses(estimator)
    m, d = G.shape
    gvg = pair_loss(G, cfg)
    first, second = slice(0, m, 2), slice(1, m, 2)
    g1 = G[first].reshape(m//2, d, 1)
    g2 = G[second].reshape(m//2, d, 1)
    gvl = (map_loss(g2, L[first], cfg) + map_loss(g1, L[second], cfg)) * 0.5
    ent = entropy_regularizer(G, p, squared) + entropy_regularizer(L.reshape(m, -1), p, squared)
    total = gvg + gvl + ent * float(beta) if beta else gvg + gvl
    return LossBreakdown(total, gvg.item() + gvl.item(), ent.item(), gvg.item(), gvl.item())
