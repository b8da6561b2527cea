"""Residue mass table, peptide tokenization, and precursor mass arithmetic.

Every other module builds on the primitives here: residue tokens of the
form ``X`` or ``X(mod)``, monoisotopic mass lookups, cumulative prefix /
suffix masses, and the neutral-mass / m-z relations for precursor ions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from importlib import resources
from typing import Iterable, Iterator, Mapping, TextIO

import numpy as np

WATER_MASS = 18.010565  # Da, monoisotopic H2O
PROTON_MASS = 1.007276  # Da


class MassTable:
    """Ordered token -> monoisotopic residue mass lookup.

    Token order is preserved from the source; it defines the residue
    indexing used by the divergence matrix and the model vocabulary.
    """

    def __init__(self, entries: Mapping[str, float] | Iterable[tuple[str, float]]):
        items = list(entries.items()) if isinstance(entries, Mapping) else list(entries)
        if not items:
            raise ValueError("mass table is empty")
        masses: dict[str, float] = {}
        for token, mass in items:
            if not token:
                raise ValueError("empty residue token")
            if token in masses:
                raise ValueError(f"duplicate residue token {token!r}")
            mass = float(mass)
            if not math.isfinite(mass) or mass <= 0.0:
                raise ValueError(f"mass for {token!r} must be a positive number, got {mass}")
            masses[token] = mass
        self._masses = masses
        self._tokens = tuple(masses)

    @property
    def tokens(self) -> tuple[str, ...]:
        return self._tokens

    def __len__(self) -> int:
        return len(self._tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._masses

    def __iter__(self) -> Iterator[str]:
        return iter(self._tokens)

    def mass(self, token: str) -> float:
        try:
            return self._masses[token]
        except KeyError:
            raise ValueError(f"unknown residue token {token!r}") from None

    def mass_array(self) -> np.ndarray:
        """Masses as a float64 vector in token order."""
        return np.array([self._masses[t] for t in self._tokens], dtype=np.float64)

    def __repr__(self) -> str:
        return f"MassTable({len(self)} tokens)"


@dataclass(frozen=True)
class Peptide:
    """Immutable ordered sequence of residue tokens."""

    residues: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.residues)

    def __iter__(self) -> Iterator[str]:
        return iter(self.residues)

    def __bool__(self) -> bool:
        return bool(self.residues)

    def render(self) -> str:
        return "".join(self.residues)

    def __str__(self) -> str:
        return self.render()


@dataclass(frozen=True)
class Precursor:
    """Precursor ion observation: m/z, charge, and derived neutral mass."""

    mz: float
    charge: int
    neutral_mass: float

    def __post_init__(self):
        if self.charge < 1:
            raise ValueError(f"precursor charge must be >= 1, got {self.charge}")
        expected = (self.mz - PROTON_MASS) * self.charge
        if abs(expected - self.neutral_mass) > 1e-6:
            raise ValueError(
                f"inconsistent precursor: neutral mass {self.neutral_mass} vs "
                f"(mz - proton) * charge = {expected}"
            )

    @classmethod
    def from_mz(cls, mz: float, charge: int) -> "Precursor":
        return cls(mz=mz, charge=charge, neutral_mass=precursor_neutral_mass(mz, charge))


def load_mass_table(source: TextIO | Iterable[str]) -> MassTable:
    """Parse a line-oriented ``token<TAB>mass`` stream into a MassTable.

    Blank lines and ``#`` comments are skipped. Duplicate tokens and
    non-positive or unparseable masses raise ValueError.
    """
    entries: list[tuple[str, float]] = []
    for lineno, line in enumerate(source, start=1):
        text = line.strip()
        if not text or text.startswith("#"):
            continue
        parts = text.split("\t")
        if len(parts) != 2:
            raise ValueError(f"line {lineno}: expected 'token<TAB>mass', got {text!r}")
        token, raw_mass = parts[0].strip(), parts[1].strip()
        try:
            mass = float(raw_mass)
        except ValueError:
            raise ValueError(f"line {lineno}: unparseable mass {raw_mass!r}") from None
        if not math.isfinite(mass) or mass <= 0.0:
            raise ValueError(f"line {lineno}: mass for {token!r} must be positive, got {mass}")
        if any(token == t for t, _ in entries):
            raise ValueError(f"line {lineno}: duplicate residue token {token!r}")
        entries.append((token, mass))
    if not entries:
        raise ValueError("mass table is empty")
    return MassTable(entries)


def default_mass_table() -> MassTable:
    """The packaged default vocabulary: 20 canonical residues + M(O), N(D), Q(D)."""
    ref = resources.files("peprank.data").joinpath("residue_masses.tsv")
    with ref.open("r", encoding="utf-8") as handle:
        return load_mass_table(handle)


def parse_peptide(text: str, table: MassTable, max_len: int | None = None) -> Peptide:
    """Tokenize peptide text greedily left to right.

    A parenthesized group binds to the immediately preceding base letter,
    forming a single token, e.g. ``"M(O)K"`` -> ``[M(O), K]``. Unknown
    tokens and dangling parentheses raise ValueError. ``max_len`` truncates
    the token sequence after parsing (ingestion rule).
    """
    tokens: list[str] = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch == "(":
            raise ValueError(f"modification group without a preceding residue in {text!r}")
        if ch == ")":
            raise ValueError(f"unmatched ')' in {text!r}")
        token = ch
        i += 1
        if i < n and text[i] == "(":
            end = text.find(")", i + 1)
            if end < 0:
                raise ValueError(f"unterminated modification group in {text!r}")
            token += text[i : end + 1]
            i = end + 1
        if token not in table:
            raise ValueError(f"unknown residue token {token!r} in {text!r}")
        tokens.append(token)
    if max_len is not None and len(tokens) > max_len:
        tokens = tokens[:max_len]
    return Peptide(tuple(tokens))


def residue_masses(peptide: Peptide, table: MassTable) -> np.ndarray:
    """Per-residue masses of a peptide as a float64 vector."""
    return np.array([table.mass(t) for t in peptide], dtype=np.float64)


def cumulative_masses(peptide: Peptide, table: MassTable, direction: str = "prefix") -> np.ndarray:
    """Cumulative residue masses.

    ``prefix[i]`` sums residues 0..i; ``suffix[i]`` sums residues i..end.
    An empty peptide yields an empty vector.
    """
    masses = residue_masses(peptide, table)
    if direction == "prefix":
        return np.cumsum(masses)
    if direction == "suffix":
        return np.cumsum(masses[::-1])[::-1].copy()
    raise ValueError(f"direction must be 'prefix' or 'suffix', got {direction!r}")


def peptide_neutral_mass(peptide: Peptide, table: MassTable) -> float:
    """Neutral monoisotopic mass: residue masses plus one water."""
    return float(residue_masses(peptide, table).sum()) + WATER_MASS


def peptide_mz(peptide: Peptide, table: MassTable, charge: int) -> float:
    """Theoretical precursor m/z of a peptide at a given charge."""
    if charge < 1:
        raise ValueError(f"charge must be >= 1, got {charge}")
    return (peptide_neutral_mass(peptide, table) + charge * PROTON_MASS) / charge


def precursor_neutral_mass(mz: float, charge: int) -> float:
    """Neutral mass from observed precursor m/z and charge."""
    if charge < 1:
        raise ValueError(f"charge must be >= 1, got {charge}")
    if mz <= PROTON_MASS:
        raise ValueError(f"precursor m/z must exceed the proton mass, got {mz}")
    return (mz - PROTON_MASS) * charge
