# -*- coding: utf-8 -*-
# Copyright (c) 2020, IMOC Development Team
# Distributed under the terms of the Apache License 2.0
"""
Discrete Information Theory Oracle
#####################################
Exact (summation based) information quantities on small finite joint
distributions p(x, z), used to check the KL decomposition behind the training
objective:

.. math::

    KL[p_n(x,z) || p_a(x,z)] = I_n(x,z) - H_n(z)
        + E_{p_n(x)}[H(p_n(z|x), p_a(z|x))] + KL[p_n(x) || p_a(x)]

and the lower bound ``KL >= I_n - H_n`` that holds whenever
``p_a(z|x) <= p_n(z)`` on the support of p_n. Everything is in nats with
``0 ln 0 = 0``.

.. code-block:: python

    rng = np.random.default_rng(0)
    pn, pa = DiscreteJoint.random(rng, 4, 5), DiscreteJoint.random(rng, 4, 5)
    decomposition_residual(pn, pa)      # ~1e-16
    report, line = verify()             # line == 'PASS, max residual < 1e-10'
"""
import logging
import numpy as np
from scipy.special import rel_entr, entr, xlogy
from imoc.core.error import SupportError, ShapeError, DomainError
from imoc.core.numerical import DataFrame


log = logging.getLogger(__name__)
MAX_ALPHABET = 64
SUM_TOL = 1e-12


class DiscreteJoint(object):
    """
    Finite joint probability table p(x, z) with rows indexed by x and columns
    by z.

    Args:
        table (array): |X| x |Z| non-negative entries summing to one

    Attributes:
        px (array): Marginal p(x)
        pz (array): Marginal p(z)
        z_given_x (array): Conditional p(z|x) (rows with p(x) = 0 are zero)
    """
    @property
    def shape(self):
        return self.table.shape

    @classmethod
    def random(cls, rng, nx, nz):
        """Strictly positive table with Dirichlet(1) distributed entries."""
        table = rng.dirichlet(np.ones(nx*nz)).reshape(nx, nz)
        return cls(table / table.sum())

    @classmethod
    def independent(cls, px, pz):
        """Product distribution p(x)p(z)."""
        return cls(np.outer(px, pz))

    def __repr__(self):
        return 'DiscreteJoint{}'.format(self.shape)

    def __init__(self, table):
        table = np.asarray(table, dtype=np.float64)
        if table.ndim != 2:
            raise ShapeError('DiscreteJoint', table.shape)
        if table.shape[0] > MAX_ALPHABET or table.shape[1] > MAX_ALPHABET:
            raise DomainError('DiscreteJoint', 'alphabet sizes are capped at {0}x{0}'.format(MAX_ALPHABET))
        if not np.all(np.isfinite(table)) or np.any(table < 0):
            raise DomainError('DiscreteJoint', 'entries must be finite and non-negative')
        if abs(table.sum() - 1.0) > SUM_TOL:
            raise DomainError('DiscreteJoint', 'entries sum to {!r}, not 1'.format(table.sum()))
        self.table = table
        self.px = table.sum(axis=1)
        self.pz = table.sum(axis=0)
        self.z_given_x = np.divide(table, self.px[:, None], out=np.zeros_like(table),
                                   where=self.px[:, None] > 0)


def _as_array(p):
    return p.table if isinstance(p, DiscreteJoint) else np.asarray(p, dtype=np.float64)


def _check_support(p, q):
    bad = (p > 0) & ~(q > 0)
    if bad.any():
        index = np.unravel_index(np.argmax(bad), p.shape)
        raise SupportError(index, p[index], q[index])


def kl_divergence(p, q):
    """
    KL[p || q] in nats.

    Args:
        p: :class:`~imoc.infotheory.DiscreteJoint` or probability array
        q: Same-shape distribution, positive wherever p is

    Raises:
        SupportError: If p > 0 where q = 0 (names the index)
    """
    p, q = _as_array(p), _as_array(q)
    if p.shape != q.shape:
        raise ShapeError('kl_divergence', p.shape, q.shape)
    _check_support(p, q)
    return float(rel_entr(p, q).sum())


def mutual_information(p):
    """I(x, z) = KL[p(x,z) || p(x)p(z)]."""
    return kl_divergence(p.table, np.outer(p.px, p.pz))


def entropy(p, which='z'):
    """
    Shannon entropy in nats.

    Args:
        p: Probability array, or a :class:`~imoc.infotheory.DiscreteJoint`
        which (str): For joints, 'z' (marginal), 'x' (marginal) or 'z|x'
            (conditional entropy H(z|x))
    """
    if not isinstance(p, DiscreteJoint):
        return float(entr(np.asarray(p, dtype=np.float64)).sum())
    if which == 'z':
        return float(entr(p.pz).sum())
    if which == 'x':
        return float(entr(p.px).sum())
    if which == 'z|x':
        return float(-xlogy(p.table, p.z_given_x).sum())
    raise ValueError("which must be one of 'z', 'x', 'z|x', got {!r}".format(which))


def expected_conditional_cross_entropy(pn, pa):
    """E_{p_n(x)}[H(p_n(z|x), p_a(z|x))] = -sum p_n(x,z) ln p_a(z|x)."""
    if pn.shape != pa.shape:
        raise ShapeError('expected_conditional_cross_entropy', pn.shape, pa.shape)
    _check_support(pn.table, pa.z_given_x)
    return float(-xlogy(pn.table, pa.z_given_x).sum())


def decomposition_residual(pn, pa):
    """
    Joint KL minus its four-component reformulation; zero up to rounding.
    """
    kl = kl_divergence(pn, pa)
    parts = (mutual_information(pn) - entropy(pn, 'z')
             + expected_conditional_cross_entropy(pn, pa)
             + kl_divergence(pn.px, pa.px))
    return kl - parts


def chain_rule_residual(pn, pa):
    """KL[joint] - (KL[p_n(x)||p_a(x)] + E_{p_n(x)} KL[p_n(z|x)||p_a(z|x)])."""
    kl = kl_divergence(pn, pa)
    _check_support(pn.table, pa.z_given_x)
    conditional = float((pn.px[:, None] * rel_entr(pn.z_given_x, pa.z_given_x)).sum())
    return kl - (kl_divergence(pn.px, pa.px) + conditional)


def assumption_holds(pn, pa):
    """True iff p_a(z|x) <= p_n(z) and p_a(z|x) <= 1 wherever p_n(x,z) > 0 (to rounding)."""
    support = pn.table > 0
    cond = pa.z_given_x[support]
    bound = np.broadcast_to(pn.pz, pn.shape)[support]
    return bool(np.all(cond <= bound + SUM_TOL) and np.all(cond <= 1.0 + SUM_TOL))


def lower_bound_check(pn, pa):
    """
    Check KL[p_n || p_a] >= I_n(x,z) - H_n(z).

    Returns:
        holds (bool): Whether the density assumption is satisfied
        gap (float): KL - (I_n - H_n); non-negative when holds is true
    """
    gap = kl_divergence(pn, pa) - (mutual_information(pn) - entropy(pn, 'z'))
    return assumption_holds(pn, pa), gap


def random_bound_pair(rng, nx, nz, full=None, max_tries=10000):
    """
    Draw a pair satisfying the lower-bound assumption.

    With ``full`` p_n is a strictly positive Dirichlet table. The assumption
    then forces p_a(z|x) = p_n(z) for every x (both sides sum to one over z),
    so p_a is built as p_a(x) p_n(z) with a random p_a(x). Otherwise p_n
    concentrates every row on at most two z symbols and a near uniform,
    strictly positive p_a is rejection sampled. ``full=None`` picks either
    kind with equal probability.
    """
    if full is None:
        full = bool(rng.random() < 0.5)
    if full:
        pn = DiscreteJoint.random(rng, nx, nz)
        return pn, DiscreteJoint.independent(rng.dirichlet(np.ones(nx)), pn.pz)
    for _ in range(max_tries):
        keep = rng.choice(nz, size=min(2, nz - 1) if nz > 2 else 1, replace=False)
        table = np.zeros((nx, nz))
        table[:, keep] = rng.dirichlet(np.ones(nx*len(keep))).reshape(nx, len(keep))
        pn = DiscreteJoint(table / table.sum())
        pa_table = rng.dirichlet(np.full(nx*nz, 5.0)).reshape(nx, nz)
        pa = DiscreteJoint(pa_table / pa_table.sum())
        if assumption_holds(pn, pa):
            return pn, pa
    raise RuntimeError("No assumption-satisfying pair after {} tries.".format(max_tries))


class TheoryReport(DataFrame):
    """
    One row per verified identity or inequality.

    +-----------+-------+------------------------------------------------+
    | Column    | Type  | Description                                    |
    +===========+=======+================================================+
    | check     | str   | Identity or inequality name                    |
    +-----------+-------+------------------------------------------------+
    | n         | int   | Number of random distributions checked         |
    +-----------+-------+------------------------------------------------+
    | worst     | float | Largest residual (or violation) observed       |
    +-----------+-------+------------------------------------------------+
    | tolerance | float | Threshold the worst value must stay below      |
    +-----------+-------+------------------------------------------------+
    | passed    | bool  | worst < tolerance                              |
    +-----------+-------+------------------------------------------------+
    """
    _schema = 'theory'
    _columns = ['check', 'n', 'worst', 'tolerance', 'passed']


def verify(n_pairs=1000, n_bound=100, max_alphabet=8, seed=0):
    """
    Run every identity and inequality over random distributions.

    Args:
        n_pairs (int): Strictly positive random pairs for the identities
        n_bound (int): Assumption-satisfying pairs for the lower bound
        max_alphabet (int): Largest alphabet size drawn
        seed (int): Generator seed

    Returns:
        report (TheoryReport): One row per check
        line (str): 'PASS, max residual < 1e-10' or a FAIL summary
    """
    rng = np.random.default_rng(seed)
    decomposition, chain, negativity, mi_excess = 0.0, 0.0, 0.0, 0.0
    for _ in range(n_pairs):
        nx, nz = rng.integers(2, max_alphabet + 1, size=2)
        pn, pa = DiscreteJoint.random(rng, nx, nz), DiscreteJoint.random(rng, nx, nz)
        decomposition = max(decomposition, abs(decomposition_residual(pn, pa)))
        chain = max(chain, abs(chain_rule_residual(pn, pa)))
        mi = mutual_information(pn)
        values = [kl_divergence(pn, pa), mi, entropy(pn, 'z'), entropy(pn, 'x')]
        negativity = max(negativity, -min(values))
        mi_excess = max(mi_excess, mi - min(entropy(pn, 'x'), entropy(pn, 'z')))
    violation = 0.0
    for _ in range(n_bound):
        nx, nz = rng.integers(2, max_alphabet + 1, size=2)
        pn, pa = random_bound_pair(rng, nx, max(nz, 3))
        _, gap = lower_bound_check(pn, pa)
        violation = max(violation, -gap)
    rows = [('decomposition', n_pairs, decomposition, 1e-10),
            ('chain_rule', n_pairs, chain, 1e-12),
            ('non_negativity', n_pairs, max(negativity, 0.0), 1e-12),
            ('mi_below_entropy', n_pairs, max(mi_excess, 0.0), 1e-12),
            ('lower_bound', n_bound, max(violation, 0.0), 1e-12)]
    report = TheoryReport([dict(check=c, n=n, worst=w, tolerance=t, passed=bool(w < t))
                           for c, n, w, t in rows])
    if report['passed'].all():
        line = 'PASS, max residual < 1e-10'
    else:
        failed = ', '.join(report.loc[~report['passed'], 'check'])
        line = 'FAIL: {}'.format(failed)
    log.info('{} (decomposition {:.3e}, chain rule {:.3e})'.format(line, decomposition, chain))
    return report, line
