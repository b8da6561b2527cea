import io

import numpy as np
import pytest

from peprank.masses import (
    PROTON_MASS,
    WATER_MASS,
    MassTable,
    Peptide,
    Precursor,
    cumulative_masses,
    load_mass_table,
    parse_peptide,
    peptide_neutral_mass,
    precursor_neutral_mass,
)


class TestLoadMassTable:
    def test_single_entry_line(self):
        table = load_mass_table(io.StringIO("G\t57.02146\n"))
        assert table.mass("G") == 57.02146

    def test_comments_and_blanks_skipped(self):
        text = "# header\n\nG\t57.02146\nA\t71.03711\n"
        table = load_mass_table(io.StringIO(text))
        assert len(table) == 2

    def test_duplicate_token_rejected(self):
        with pytest.raises(ValueError, match="duplicate"):
            load_mass_table(io.StringIO("G\t57.0\nG\t58.0\n"))

    def test_negative_mass_rejected(self):
        with pytest.raises(ValueError, match="positive"):
            load_mass_table(io.StringIO("X\t-1.0\n"))

    def test_unparseable_mass_rejected(self):
        with pytest.raises(ValueError, match="unparseable"):
            load_mass_table(io.StringIO("X\tabc\n"))

    def test_empty_table_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            load_mass_table(io.StringIO("# nothing here\n"))

    def test_default_table_has_modifications(self, table):
        for token in ("M(O)", "N(D)", "Q(D)"):
            assert token in table
        assert len(table) == 23


class TestParsePeptide:
    def test_plain_letters(self, table):
        assert parse_peptide("GAV", table).residues == ("G", "A", "V")

    def test_modification_binds_to_previous_letter(self, table):
        assert parse_peptide("M(O)K", table).residues == ("M(O)", "K")

    def test_unknown_token(self, table):
        with pytest.raises(ValueError, match="unknown residue token 'Z'"):
            parse_peptide("GZ", table)

    def test_dangling_open_paren(self, table):
        with pytest.raises(ValueError, match="unterminated"):
            parse_peptide("M(O", table)

    def test_leading_paren(self, table):
        with pytest.raises(ValueError, match="preceding"):
            parse_peptide("(O)M", table)

    def test_unmatched_close_paren(self, table):
        with pytest.raises(ValueError, match="unmatched"):
            parse_peptide("G)A", table)

    def test_empty_text_gives_empty_peptide(self, table):
        assert len(parse_peptide("", table)) == 0

    def test_truncation(self, table):
        long = "G" * 120
        assert len(parse_peptide(long, table, max_len=100)) == 100

    def test_render_round_trip(self, table):
        rng = np.random.default_rng(11)
        tokens = table.tokens
        for _ in range(200):
            length = rng.integers(1, 30)
            peptide = Peptide(tuple(tokens[i] for i in rng.integers(len(tokens), size=length)))
            assert parse_peptide(peptide.render(), table) == peptide


class TestCumulativeMasses:
    def test_prefix_single(self, table):
        np.testing.assert_allclose(
            cumulative_masses(parse_peptide("G", table), table, "prefix"), [57.02146]
        )

    def test_prefix_empty(self, table):
        assert cumulative_masses(Peptide(()), table, "prefix").size == 0

    def test_prefix_pair(self, table):
        np.testing.assert_allclose(
            cumulative_masses(parse_peptide("GA", table), table, "prefix"),
            [57.02146, 128.05857],
        )

    def test_suffix_is_reversed_prefix_of_reverse(self, table):
        rng = np.random.default_rng(5)
        tokens = table.tokens
        for _ in range(100):
            length = rng.integers(1, 20)
            seq = tuple(tokens[i] for i in rng.integers(len(tokens), size=length))
            peptide = Peptide(seq)
            reverse = Peptide(seq[::-1])
            np.testing.assert_allclose(
                cumulative_masses(peptide, table, "suffix"),
                cumulative_masses(reverse, table, "prefix")[::-1],
            )

    def test_last_prefix_equals_last_suffix_equals_residue_total(self, table):
        rng = np.random.default_rng(6)
        tokens = table.tokens
        for _ in range(100):
            length = rng.integers(1, 25)
            peptide = Peptide(tuple(tokens[i] for i in rng.integers(len(tokens), size=length)))
            prefix = cumulative_masses(peptide, table, "prefix")
            suffix = cumulative_masses(peptide, table, "suffix")
            total = peptide_neutral_mass(peptide, table) - WATER_MASS
            assert abs(prefix[-1] - total) <= 1e-9 * max(1.0, abs(total))
            assert abs(suffix[0] - total) <= 1e-9 * max(1.0, abs(total))

    def test_bad_direction(self, table):
        with pytest.raises(ValueError, match="direction"):
            cumulative_masses(parse_peptide("G", table), table, "sideways")


class TestNeutralMass:
    def test_single_residue(self, table):
        assert peptide_neutral_mass(parse_peptide("G", table), table) == pytest.approx(
            75.032025, abs=1e-9
        )

    def test_empty_is_water(self, table):
        assert peptide_neutral_mass(Peptide(()), table) == pytest.approx(WATER_MASS)

    def test_two_residues(self, table):
        assert peptide_neutral_mass(parse_peptide("GA", table), table) == pytest.approx(
            146.069135, abs=1e-9
        )


class TestPrecursor:
    def test_single_charge(self):
        assert precursor_neutral_mass(PROTON_MASS + 100.0, 1) == pytest.approx(100.0)

    def test_double_charge(self):
        assert precursor_neutral_mass(PROTON_MASS + 50.0, 2) == pytest.approx(100.0)

    def test_zero_charge_rejected(self):
        with pytest.raises(ValueError, match="charge"):
            precursor_neutral_mass(100.0, 0)

    def test_sub_proton_mz_rejected(self):
        with pytest.raises(ValueError, match="proton"):
            precursor_neutral_mass(0.5, 1)

    def test_precursor_consistency_enforced(self):
        with pytest.raises(ValueError, match="inconsistent"):
            Precursor(mz=500.0, charge=2, neutral_mass=123.0)

    def test_from_mz(self):
        p = Precursor.from_mz(500.0, 2)
        assert p.neutral_mass == pytest.approx((500.0 - PROTON_MASS) * 2)


class TestMassTable:
    def test_tokens_preserve_order(self):
        table = MassTable({"B1": 10.0, "A2": 20.0})
        assert table.tokens == ("B1", "A2")

    def test_unknown_token_error(self, table):
        with pytest.raises(ValueError, match="unknown residue token"):
            table.mass("Z")

    def test_nonpositive_mass_rejected(self):
        with pytest.raises(ValueError, match="positive"):
            MassTable({"X": 0.0})
