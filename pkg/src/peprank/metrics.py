"""Mass-deviation metrics between peptide sequences.

Two complementary supervision signals:

* peptide mass deviation (PMD): a Needleman-Wunsch style alignment over
  residue masses, where substituting residue a for residue b costs
  |M(a) - M(b)| and a gap costs the expected divergence between two
  distinct residues. The optimal alignment cost divided by the gap
  penalty is the score; it is zero exactly when the two peptides agree
  mass-for-mass, token position by token position.
* residue mass deviation (RMD): for each query prefix mass, the signed
  difference to the nearest target prefix mass.
"""

from __future__ import annotations

import itertools

import numpy as np

from .masses import MassTable, Peptide, cumulative_masses, residue_masses

BRUTEFORCE_MAX_TOTAL_LEN = 12


def divergence_matrix(table: MassTable) -> np.ndarray:
    """Pairwise absolute residue-mass differences, in token order.

    Symmetric with a zero diagonal. Requires at least two residue types.
    """
    if len(table) < 2:
        raise ValueError("divergence matrix needs a table with at least 2 tokens")
    masses = table.mass_array()
    return np.abs(masses[:, None] - masses[None, :])


def gap_penalty(table: MassTable) -> float:
    """Mean absolute mass difference over all ordered pairs of distinct residues.

    Used as the alignment gap cost and the PMD normalizer; a table whose
    residues all share one mass is rejected because the penalty degenerates
    to zero.
    """
    n = len(table)
    if n < 2:
        raise ValueError("gap penalty needs a table with at least 2 tokens")
    div = divergence_matrix(table)
    g = float(div.sum() / (n * (n - 1)))
    if g == 0.0:
        raise ValueError("degenerate mass table: all residue masses identical")
    return g


def pmd(query: Peptide, target: Peptide, table: MassTable, gap: float | None = None) -> float:
    """Peptide mass deviation between query and target.

    Fills the (|query|+1) x (|target|+1) alignment matrix with gap
    multiples on the first row and column and the three-way minimum of
    diagonal substitution, up-gap, and left-gap in the interior, then
    normalizes the corner value by the gap penalty. ``gap`` may be passed
    to reuse a precomputed penalty for the same table.
    """
    g = gap_penalty(table) if gap is None else gap
    qm = residue_masses(query, table)
    km = residue_masses(target, table)
    n, m = len(qm), len(km)
    prev = [g * j for j in range(m + 1)]
    for i in range(1, n + 1):
        cur = [g * i] + [0.0] * m
        qi = qm[i - 1]
        for j in range(1, m + 1):
            sub = prev[j - 1] + abs(qi - km[j - 1])
            cur[j] = min(sub, prev[j] + g, cur[j - 1] + g)
        prev = cur
    return float(prev[m] / g)


def pmd_bruteforce(query: Peptide, target: Peptide, table: MassTable) -> float:
    """Exhaustive-alignment oracle for :func:`pmd`.

    Enumerates every monotone alignment directly: each alignment is a
    choice of t matched index pairs, strictly increasing on both sides,
    with all unmatched residues gapped. No recurrence is shared with the
    dynamic program it checks. Limited to |query| + |target| <= 12.
    """
    n, m = len(query), len(target)
    if n + m > BRUTEFORCE_MAX_TOTAL_LEN:
        raise ValueError(
            f"brute-force alignment limited to total length {BRUTEFORCE_MAX_TOTAL_LEN}, "
            f"got {n + m}"
        )
    g = gap_penalty(table)
    qm = residue_masses(query, table)
    km = residue_masses(target, table)
    best = (n + m) * g  # all-gap alignment
    for t in range(1, min(n, m) + 1):
        gap_cost = g * (n - t) + g * (m - t)
        for qs in itertools.combinations(range(n), t):
            for ks in itertools.combinations(range(m), t):
                cost = gap_cost + sum(abs(qm[i] - km[j]) for i, j in zip(qs, ks))
                if cost < best:
                    best = cost
    return float(best / g)


def rmd(query: Peptide, target: Peptide, table: MassTable) -> np.ndarray:
    """Residue mass deviation vector: one signed Da value per query residue.

    Entry i is the query's i-th prefix mass minus the nearest target
    prefix mass; ties between equidistant target prefixes resolve to the
    smaller target index.
    """
    if len(target) == 0:
        raise ValueError("rmd requires a non-empty target peptide")
    if len(query) == 0:
        raise ValueError("rmd requires a non-empty query peptide")
    qp = cumulative_masses(query, table, "prefix")
    kp = cumulative_masses(target, table, "prefix")
    diffs = qp[:, None] - kp[None, :]
    nearest = np.argmin(np.abs(diffs), axis=1)  # first minimum = smaller index
    return diffs[np.arange(len(qp)), nearest]
