import io
import json

import numpy as np
import pytest

from peprank import pipeline
from peprank.encoders import EmbeddingConfig
from peprank.masses import PROTON_MASS, parse_peptide
from peprank.metrics import pmd, rmd
from peprank.model import ModelConfig, RerankModel
from peprank.pipeline import (
    CandidateSet,
    Checkpoint,
    SynthConfig,
    TrainConfig,
    build_training_set,
    learning_rate,
    load_candidates,
    load_checkpoint,
    read_selections,
    rerank_run,
    save_checkpoint,
    synthesize_dataset,
    train,
    write_candidates,
    write_selections,
    zero_shot_eval,
)
from peprank.spectra import write_mgf


def small_config(table, **overrides):
    model = ModelConfig(
        d=16,
        n_layers=1,
        n_heads=2,
        ff_dim=32,
        dropout_rate=0.0,
        embedding=EmbeddingConfig(d=16, max_len=30, max_charge=4),
        vocab=table.tokens,
    )
    defaults = dict(model=model, lr=1e-3, batch_size=4, epochs=2)
    defaults.update(overrides)
    return TrainConfig(**defaults)


def candidate_line(spectrum_id="s1", peptides=("GAV", "GAK"), label="GAV"):
    return json.dumps(
        {
            "spectrum_id": spectrum_id,
            "candidates": [
                {"model": f"m{i + 1}", "peptide": p} for i, p in enumerate(peptides)
            ],
            "label": label,
        }
    )


class TestLoadCandidates:
    def test_valid_record(self):
        sets = load_candidates(io.StringIO(candidate_line() + "\n"))
        assert len(sets) == 1
        assert sets[0].spectrum_id == "s1"
        assert sets[0].candidates == [("m1", "GAV"), ("m2", "GAK")]
        assert sets[0].label == "GAV"

    def test_duplicate_spectrum_id(self):
        text = candidate_line() + "\n" + candidate_line() + "\n"
        with pytest.raises(ValueError, match="duplicate spectrum_id"):
            load_candidates(io.StringIO(text))

    def test_empty_candidate_list(self):
        record = json.dumps({"spectrum_id": "x", "candidates": []})
        with pytest.raises(ValueError, match="non-empty"):
            load_candidates(io.StringIO(record))

    def test_missing_field_reports_line(self):
        record = json.dumps({"spectrum_id": "x"})
        with pytest.raises(ValueError, match="line 1"):
            load_candidates(io.StringIO(record))

    def test_malformed_json_reports_line(self):
        with pytest.raises(ValueError, match="line 2"):
            load_candidates(io.StringIO(candidate_line() + "\n{oops\n"))

    def test_duplicate_peptides_preserved(self):
        sets = load_candidates(io.StringIO(candidate_line(peptides=("GAV", "GAV"))))
        assert sets[0].peptides == ["GAV", "GAV"]

    def test_round_trip(self):
        sets = load_candidates(io.StringIO(candidate_line()))
        sink = io.StringIO()
        write_candidates(sets, sink)
        again = load_candidates(io.StringIO(sink.getvalue()))
        assert again == sets


class TestSynthesizeDataset:
    def test_deterministic_from_seed(self, table):
        a_spec, a_cands = synthesize_dataset(table, seed=7, n_spectra=5)
        b_spec, b_cands = synthesize_dataset(table, seed=7, n_spectra=5)
        for sa, sb in zip(a_spec, b_spec):
            np.testing.assert_array_equal(sa.mz, sb.mz)
            np.testing.assert_array_equal(sa.intensity, sb.intensity)
        assert a_cands == b_cands

    def test_different_seed_differs(self, table):
        a_spec, _ = synthesize_dataset(table, seed=7, n_spectra=3)
        b_spec, _ = synthesize_dataset(table, seed=8, n_spectra=3)
        assert any(sa.mz.size != sb.mz.size or not np.array_equal(sa.mz, sb.mz)
                   for sa, sb in zip(a_spec, b_spec))

    def test_byte_identical_files(self, table):
        def render(seed):
            spectra, cands = synthesize_dataset(table, seed=seed, n_spectra=4)
            mgf, jsonl = io.StringIO(), io.StringIO()
            write_mgf(spectra, mgf)
            write_candidates(cands, jsonl)
            return mgf.getvalue(), jsonl.getvalue()

        assert render(3) == render(3)

    def test_b_ions_are_prefix_plus_proton(self, table):
        config = SynthConfig(peak_dropout=0.0, noise_peaks=0)
        spectra, cands = synthesize_dataset(table, seed=1, n_spectra=5, config=config)
        from peprank.masses import cumulative_masses

        for spectrum, cs in zip(spectra, cands):
            label = parse_peptide(cs.label, table)
            prefixes = cumulative_masses(label, table, "prefix")
            expected_b = prefixes[: len(label) - 1] + PROTON_MASS
            for b in expected_b:
                assert np.min(np.abs(spectrum.mz - b)) < 1e-9

    def test_label_present_and_mutants_have_positive_pmd(self, table):
        spectra, cands = synthesize_dataset(table, seed=2, n_spectra=10)
        for cs in cands:
            label = parse_peptide(cs.label, table)
            scores = [
                pmd(parse_peptide(text, table), label, table) for text in cs.peptides
            ]
            assert sum(1 for s in scores if s == 0.0) == 1  # exactly the label slot
            assert all(s > 0.0 for s in scores if s != 0.0)

    def test_label_slot_is_shuffled(self, table):
        _, cands = synthesize_dataset(table, seed=4, n_spectra=40)
        slots = set()
        for cs in cands:
            label = cs.label
            slots.add(cs.peptides.index(label))
        assert len(slots) > 1  # not always the same candidate slot

    def test_precursor_consistent_with_label(self, table):
        from peprank.spectra import validate_precursor

        spectra, cands = synthesize_dataset(table, seed=5, n_spectra=10)
        for spectrum, cs in zip(spectra, cands):
            assert validate_precursor(spectrum, parse_peptide(cs.label, table), table)


class TestBuildTrainingSet:
    def test_targets_match_metric_calls(self, table):
        spectra, cands = synthesize_dataset(table, seed=6, n_spectra=6)
        instances, _ = build_training_set(spectra, cands, table)
        assert instances
        for inst, cs in zip(instances, cands):
            label = parse_peptide(cs.label, table)
            for i, candidate in enumerate(inst.candidates):
                assert inst.pmd_targets[i] == pytest.approx(
                    pmd(candidate, label, table), rel=1e-12
                )
                np.testing.assert_allclose(
                    inst.rmd_targets[i], rmd(candidate, label, table)
                )

    def test_label_candidate_has_zero_targets(self, table):
        spectra, cands = synthesize_dataset(table, seed=6, n_spectra=4)
        instances, _ = build_training_set(spectra, cands, table)
        for inst, cs in zip(instances, cands):
            slot = cs.peptides.index(cs.label)
            assert inst.pmd_targets[slot] == 0.0
            np.testing.assert_array_equal(inst.rmd_targets[slot], 0.0)

    def test_all_correct_instance_excluded(self, table):
        spectra, cands = synthesize_dataset(table, seed=6, n_spectra=2)
        all_correct = CandidateSet(
            spectrum_id=cands[0].spectrum_id,
            candidates=[("m1", cands[0].label), ("m2", cands[0].label)],
            label=cands[0].label,
        )
        instances, excluded = build_training_set(spectra[:1], [all_correct], table)
        assert not instances
        assert excluded == [(cands[0].spectrum_id, "all_candidates_correct")]

    def test_unjoinable_id_errors(self, table):
        spectra, cands = synthesize_dataset(table, seed=6, n_spectra=1)
        orphan = CandidateSet("missing", [("m1", "GAV")], label="GAV")
        with pytest.raises(ValueError, match="no matching spectrum"):
            build_training_set(spectra, [orphan], table)

    def test_missing_label_errors(self, table):
        spectra, cands = synthesize_dataset(table, seed=6, n_spectra=1)
        spectra[0].label = None
        unlabeled = CandidateSet(cands[0].spectrum_id, cands[0].candidates, label=None)
        with pytest.raises(ValueError, match="no label"):
            build_training_set(spectra, [unlabeled], table)

    def test_precursor_mismatch_excluded(self, table):
        spectra, cands = synthesize_dataset(table, seed=6, n_spectra=1)
        bad = CandidateSet(cands[0].spectrum_id, cands[0].candidates, label="GGGG")
        instances, excluded = build_training_set(spectra, [bad], table)
        assert not instances
        assert excluded[0][1] == "precursor_mismatch"


class TestSchedule:
    def test_warmup_starts_at_zero(self):
        assert learning_rate(0, 1e-3, warmup_steps=10, total_steps=100) == 0.0

    def test_warmup_is_linear(self):
        assert learning_rate(5, 1e-3, 10, 100) == pytest.approx(5e-4)

    def test_cosine_reaches_zero(self):
        assert learning_rate(100, 1e-3, 10, 100) == pytest.approx(0.0, abs=1e-12)

    def test_peak_after_warmup(self):
        assert learning_rate(10, 1e-3, 10, 100) == pytest.approx(1e-3)


class TestTrain:
    def test_one_step_decreases_single_instance_loss(self, table):
        spectra, cands = synthesize_dataset(table, seed=9, n_spectra=1)
        instances, _ = build_training_set(spectra, cands, table)
        for seed in (0, 1, 2):
            config = small_config(
                table, epochs=1, batch_size=1, lr=1e-3, warmup_epochs=0.0
            )
            checkpoint, history = train(config, instances, table, seed=seed)
            assert len(history) == 1
            model = checkpoint.build_model(table)
            after = float(
                pipeline._instance_loss(model, instances[0], False, None).data
            )
            assert after < history[0].loss

    def test_loss_decreases_over_epochs(self, table):
        spectra, cands = synthesize_dataset(table, seed=9, n_spectra=1)
        instances, _ = build_training_set(spectra, cands, table)
        config = small_config(table, epochs=8, batch_size=1, lr=3e-3, warmup_epochs=1)
        _, history = train(config, instances, table, seed=0)
        assert history[-1].loss < history[0].loss

    def test_reproducible_loss_trajectory(self, table):
        spectra, cands = synthesize_dataset(table, seed=10, n_spectra=4)
        instances, _ = build_training_set(spectra, cands, table)
        config = small_config(table)
        _, h1 = train(config, instances, table, seed=3)
        _, h2 = train(config, instances, table, seed=3)
        assert len(h1) == len(h2)
        for a, b in zip(h1, h2):
            assert abs(a.loss - b.loss) <= 1e-9
            assert a.lr == b.lr

    def test_gradient_clipping_bounds_applied_norm(self, table):
        spectra, cands = synthesize_dataset(table, seed=11, n_spectra=2)
        instances, _ = build_training_set(spectra, cands, table)
        model = RerankModel(small_config(table).model, table, seed=0)
        model.store.zero_grad()
        loss = pipeline._instance_loss(model, instances[0], training=False, rng=None)
        loss.backward()
        raw = model.store.clip_grad_norm(1.5)
        if raw > 1.5:
            assert model.store.grad_norm() == pytest.approx(1.5)

    def test_empty_training_set_rejected(self, table):
        with pytest.raises(ValueError, match="empty"):
            train(small_config(table), [], table)

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_divergence_detector(self, table):
        spectra, cands = synthesize_dataset(table, seed=12, n_spectra=2)
        instances, _ = build_training_set(spectra, cands, table)
        instances[0].pmd_targets[:] = np.nan
        with pytest.raises(RuntimeError, match="diverged"):
            train(small_config(table), instances, table)

    def test_loss_log_format(self, table):
        spectra, cands = synthesize_dataset(table, seed=13, n_spectra=2)
        instances, _ = build_training_set(spectra, cands, table)
        sink = io.StringIO()
        train(small_config(table, epochs=1), instances, table, log_sink=sink)
        lines = sink.getvalue().strip().splitlines()
        assert lines[0] == "step\tlr\tloss\tgrad_norm"
        assert len(lines) >= 2


class TestRerankRun:
    def test_single_candidate_selected(self, table):
        spectra, cands = synthesize_dataset(table, seed=14, n_spectra=2)
        solo = [CandidateSet(c.spectrum_id, c.candidates[:1], c.label) for c in cands]
        model = RerankModel(small_config(table).model, table, seed=0)
        selections = rerank_run(model, spectra, solo)
        assert all(sel.index == 0 for sel in selections)

    def test_duplicate_candidates_tie_to_lowest_index(self, table):
        spectra, cands = synthesize_dataset(table, seed=15, n_spectra=2)
        dup = [
            CandidateSet(c.spectrum_id, [c.candidates[0], c.candidates[0]], c.label)
            for c in cands
        ]
        model = RerankModel(small_config(table).model, table, seed=0)
        selections = rerank_run(model, spectra, dup)
        assert all(sel.index == 0 for sel in selections)

    def test_row_order_only_affects_ties(self, table):
        spectra, cands = synthesize_dataset(table, seed=16, n_spectra=3)
        model = RerankModel(small_config(table).model, table, seed=0)
        base = rerank_run(model, spectra, cands)
        reversed_sets = [
            CandidateSet(c.spectrum_id, list(reversed(c.candidates)), c.label)
            for c in cands
        ]
        flipped = rerank_run(model, spectra, reversed_sets)
        for sel_a, sel_b in zip(base, flipped):
            assert sel_a.peptide == sel_b.peptide

    def test_unjoinable_id_errors(self, table):
        spectra, cands = synthesize_dataset(table, seed=17, n_spectra=1)
        model = RerankModel(small_config(table).model, table, seed=0)
        orphan = CandidateSet("missing", [("m1", "GAV")], None)
        with pytest.raises(ValueError, match="no matching spectrum"):
            rerank_run(model, spectra, [orphan])

    def test_over_length_candidate_errors(self, table):
        spectra, cands = synthesize_dataset(table, seed=18, n_spectra=1)
        config = small_config(table)
        model = RerankModel(config.model, table, seed=0)
        long_text = "G" * (config.model.embedding.max_len + 1)
        bad = CandidateSet(cands[0].spectrum_id, [("m1", long_text)], cands[0].label)
        with pytest.raises(ValueError, match="max_len"):
            rerank_run(model, spectra, [bad])

    def test_selection_round_trip(self, table):
        spectra, cands = synthesize_dataset(table, seed=19, n_spectra=3)
        model = RerankModel(small_config(table).model, table, seed=0)
        selections = rerank_run(model, spectra, cands)
        sink = io.StringIO()
        write_selections(selections, sink)
        again = read_selections(io.StringIO(sink.getvalue()))
        assert again == selections


class TestZeroShotEval:
    def test_all_models_equals_plain_run(self, table):
        spectra, cands = synthesize_dataset(table, seed=20, n_spectra=5)
        model = RerankModel(small_config(table).model, table, seed=0)
        names = cands[0].model_names
        reports = zero_shot_eval(model, spectra, cands, [names], table)
        selections = rerank_run(model, spectra, cands)
        from peprank.evaluation import corpus_stats

        pairs = [
            (parse_peptide(sel.peptide, table), parse_peptide(cs.label, table))
            for sel, cs in zip(selections, cands)
        ]
        assert reports[0].peptide_recall == pytest.approx(
            corpus_stats(pairs, table).peptide_recall
        )

    def test_single_model_subset_forces_selection(self, table):
        spectra, cands = synthesize_dataset(table, seed=21, n_spectra=5)
        model = RerankModel(small_config(table).model, table, seed=0)
        reports = zero_shot_eval(model, spectra, cands, [["model_2"]], table)
        # recall equals that model's standalone recall
        from peprank.evaluation import aa_match

        expected = np.mean(
            [
                aa_match(
                    parse_peptide(dict(cs.candidates)["model_2"], table),
                    parse_peptide(cs.label, table),
                    table,
                ).peptide_matched
                for cs in cands
            ]
        )
        assert reports[0].peptide_recall == pytest.approx(expected)

    def test_empty_subset_errors(self, table):
        spectra, cands = synthesize_dataset(table, seed=22, n_spectra=2)
        model = RerankModel(small_config(table).model, table, seed=0)
        with pytest.raises(ValueError, match="no candidates from subset"):
            zero_shot_eval(model, spectra, cands, [["nonexistent"]], table)


class TestCheckpointIo:
    def test_round_trip_bit_identical(self, table, tmp_path):
        config = small_config(table)
        model = RerankModel(config.model, table, seed=5)
        checkpoint = Checkpoint(
            config=config.model,
            params=model.store.export_arrays(),
            seed=5,
            step_count=17,
        )
        path = str(tmp_path / "model.ckpt")
        save_checkpoint(checkpoint, path)
        loaded = load_checkpoint(path)
        assert loaded.config == checkpoint.config
        assert loaded.seed == 5 and loaded.step_count == 17
        assert set(loaded.params) == set(checkpoint.params)
        for name, array in checkpoint.params.items():
            np.testing.assert_array_equal(loaded.params[name], array)

    def test_corrupted_magic(self, table, tmp_path):
        path = tmp_path / "bad.ckpt"
        path.write_bytes(b"XXXX" + b"\x00" * 16)
        with pytest.raises(ValueError, match="magic"):
            load_checkpoint(str(path))

    def test_truncated_payload(self, table, tmp_path):
        config = small_config(table)
        model = RerankModel(config.model, table, seed=0)
        checkpoint = Checkpoint(config.model, model.store.export_arrays(), 0, 0)
        path = tmp_path / "model.ckpt"
        save_checkpoint(checkpoint, str(path))
        data = path.read_bytes()
        path.write_bytes(data[: len(data) // 2])
        with pytest.raises(ValueError, match="truncated"):
            load_checkpoint(str(path))

    def test_shape_mismatch_names_parameter(self, table, tmp_path):
        config = small_config(table)
        model = RerankModel(config.model, table, seed=0)
        params = model.store.export_arrays()
        params["head/pmd_w"] = np.zeros((3, 3))
        checkpoint = Checkpoint(config.model, params, 0, 0)
        path = str(tmp_path / "model.ckpt")
        save_checkpoint(checkpoint, path)
        loaded = load_checkpoint(path)
        with pytest.raises(ValueError, match="head/pmd_w"):
            loaded.build_model(table)

    def test_build_model_reproduces_outputs(self, table, tmp_path):
        spectra, cands = synthesize_dataset(table, seed=23, n_spectra=2)
        config = small_config(table, epochs=1)
        instances, _ = build_training_set(spectra, cands, table)
        checkpoint, _ = train(config, instances, table, seed=1)
        path = str(tmp_path / "model.ckpt")
        save_checkpoint(checkpoint, path)
        model = load_checkpoint(path).build_model(table)
        a = rerank_run(model, spectra, cands)
        b = rerank_run(checkpoint.build_model(table), spectra, cands)
        assert a == b
