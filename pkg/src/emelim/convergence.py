"""Observed convergence orders from error sequences over refinement levels."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass
class ConvergenceReport:
    """Pairwise and averaged orders of an error sequence.

    Attributes
    ----------
    errors, h : list of float
        Errors and spacings per level, coarse to fine.
    pair_orders : list of float
        ``log(e_i / e_{i+1}) / log(h_i / h_{i+1})`` for adjacent levels.
    order : float
        Mean of ``pair_orders``.
    non_monotone : bool
        Errors fail to decrease strictly somewhere (the pairwise order is
        then zero or negative). Reported, never raised.
    """

    errors: list
    h: list
    pair_orders: list
    order: float
    non_monotone: bool

    @property
    def strictly_decreasing(self):
        return not self.non_monotone

    def within(self, lo, hi):
        return lo <= self.order <= hi


def convergence_report(errors, h=None):
    """Estimate the convergence order of ``errors`` measured at spacings ``h``.

    Parameters
    ----------
    errors : sequence of float
        Positive errors, coarse level first.
    h : sequence of float, optional
        Lattice spacings; by default each level halves the spacing, so the
        pairwise order is ``log2(e_i / e_{i+1})``.

    Examples
    --------
    >>> convergence_report([4e-2, 1e-2, 2.5e-3]).order
    2.0
    """
    e = [float(v) for v in errors]
    if len(e) < 2:
        raise ValueError("need at least two refinement levels")
    if any(not math.isfinite(v) or v <= 0.0 for v in e):
        raise ValueError("errors must be positive and finite")
    hs = [2.0 ** -i for i in range(len(e))] if h is None else [float(v) for v in h]
    if len(hs) != len(e):
        raise ValueError("errors and h differ in length")
    pairs = [math.log(e[i] / e[i + 1]) / math.log(hs[i] / hs[i + 1]) for i in range(len(e) - 1)]
    non_monotone = any(e[i + 1] >= e[i] for i in range(len(e) - 1))
    return ConvergenceReport(e, hs, pairs, float(np.mean(pairs)), non_monotone)


__all__ = ["ConvergenceReport", "convergence_report"]
