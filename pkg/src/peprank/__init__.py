"""Mass-deviation metrics and axial-attention reranking for de novo
peptide sequencing candidates."""

from .masses import (
    MassTable,
    Peptide,
    Precursor,
    default_mass_table,
    load_mass_table,
    parse_peptide,
)
from .metrics import divergence_matrix, gap_penalty, pmd, pmd_bruteforce, rmd

__version__ = "0.1.0"

__all__ = [
    "MassTable",
    "Peptide",
    "Precursor",
    "default_mass_table",
    "load_mass_table",
    "parse_peptide",
    "divergence_matrix",
    "gap_penalty",
    "pmd",
    "pmd_bruteforce",
    "rmd",
    "__version__",
]
