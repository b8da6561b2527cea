#!/usr/bin/env python3
"""Walk through the mass-deviation metrics on small peptide pairs.

Two scores quantify how far a candidate peptide is from a reference:
a peptide-level alignment score (PMD) and a per-residue prefix-mass
deviation vector (RMD). Both work purely on residue masses, so
near-isobaric substitutions cost almost nothing while insertions and
deletions cost a full gap.
"""

import numpy as np

from peprank import default_mass_table, parse_peptide, pmd, pmd_bruteforce, rmd
from peprank.metrics import divergence_matrix, gap_penalty

table = default_mass_table()
print(f"residue vocabulary: {len(table)} tokens")
print(f"G = {table.mass('G')} Da, M(O) = {table.mass('M(O)')} Da")

# The divergence matrix holds |M(a) - M(b)| for every residue pair; the
# gap penalty is its off-diagonal mean and normalizes all PMD scores.
P = divergence_matrix(table)
g = gap_penalty(table)
print(f"\ngap penalty g = {g:.5f} Da")
print(f"divergence K vs Q = {P[table.tokens.index('K'), table.tokens.index('Q')]:.5f} Da")

pairs = [
    ("GAVKPW", "GAVKPW"),   # identical -> 0
    ("GAVKPW", "GAVQPW"),   # K -> Q, tiny mass change
    ("GAVKPW", "GAVPW"),    # deletion, one gap
    ("GAVKPW", "GAVKPWG"),  # insertion, one gap
    ("GAVKPW", "WPKVAG"),   # reversal, heavily penalized
]
print("\nquery          target         PMD")
for query_text, target_text in pairs:
    query = parse_peptide(query_text, table)
    target = parse_peptide(target_text, table)
    score = pmd(query, target, table, gap=g)
    print(f"{query_text:<14} {target_text:<14} {score:.6f}")

# The dynamic program agrees with exhaustive enumeration of every
# monotone alignment (feasible for short peptides).
q = parse_peptide("GAVK", table)
k = parse_peptide("GAKV", table)
print(f"\nDP vs exhaustive on GAVK/GAKV: {pmd(q, k, table):.8f}"
      f" vs {pmd_bruteforce(q, k, table):.8f}")

# RMD aligns each query prefix mass to the nearest target prefix mass
# and keeps the signed difference: a residue-resolution fingerprint of
# where the sequences diverge.
query = parse_peptide("GAVKPW", table)
target = parse_peptide("GAVQPW", table)
values = rmd(query, target, table)
print("\nper-residue deviations GAVKPW vs GAVQPW (Da):")
print(np.array2string(values, precision=5))
