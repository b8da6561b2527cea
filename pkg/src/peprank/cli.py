"""Command-line interface.

One executable with subcommands covering the toolkit: metric
computation, spectrum preprocessing, synthetic data generation,
training, reranking, evaluation, and the analysis reports. Exit codes:
0 success, 1 usage error, 2 data or validation error, 3 runtime
failure. Every run echoes its resolved configuration and seed to
stderr; all reports are TSV with a header row.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from typing import Sequence

from . import pipeline
from .evaluation import (
    contribution_analysis,
    corpus_stats,
    length_binned_recall,
    residue_confusion,
)
from .masses import MassTable, default_mass_table, load_mass_table, parse_peptide
from .metrics import gap_penalty, pmd, rmd
from .spectra import parse_mgf, preprocess_spectra, validate_precursor, write_mgf


class CliParser(argparse.ArgumentParser):
    """argparse parser whose usage errors exit with code 1, not 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _echo(args: argparse.Namespace, resolved: dict) -> None:
    payload = dict(resolved)
    if hasattr(args, "seed"):
        payload.setdefault("seed", args.seed)
    print(f"# resolved: {json.dumps(payload, sort_keys=True)}", file=sys.stderr)


def _load_table(args: argparse.Namespace) -> MassTable:
    if getattr(args, "mass_table", None):
        with open(args.mass_table, "r", encoding="utf-8") as handle:
            return load_mass_table(handle)
    return default_mass_table()


def _open_out(path: str | None):
    if path is None or path == "-":
        return sys.stdout, False
    return open(path, "w", encoding="utf-8"), True


# ---------------------------------------------------------------------------
# subcommand handlers


def _cmd_metrics(args) -> int:
    table = _load_table(args)
    _echo(args, {"subcommand": "metrics", "pairs": args.pairs})
    gap = gap_penalty(table)
    sink, owned = _open_out(args.out)
    try:
        sink.write("query\ttarget\tpmd\trmd\n")
        with open(args.pairs, "r", encoding="utf-8") as handle:
            for lineno, line in enumerate(handle, start=1):
                text = line.rstrip("\n")
                if not text or text.startswith("#"):
                    continue
                parts = text.split("\t")
                if len(parts) != 2:
                    raise ValueError(
                        f"{args.pairs}:{lineno}: expected 'query<TAB>target'"
                    )
                if lineno == 1 and parts == ["query", "target"]:
                    continue
                query = parse_peptide(parts[0], table)
                target = parse_peptide(parts[1], table)
                score = pmd(query, target, table, gap=gap)
                if len(query) and len(target):
                    deviations = ",".join(
                        repr(float(v)) for v in rmd(query, target, table)
                    )
                else:
                    deviations = ""  # rmd is defined only for non-empty pairs
                sink.write(f"{parts[0]}\t{parts[1]}\t{score!r}\t{deviations}\n")
    finally:
        if owned:
            sink.close()
    return 0


def _cmd_preprocess(args) -> int:
    table = _load_table(args)
    _echo(args, {"subcommand": "preprocess", "mgf": args.mgf, "strict": args.strict,
                 "workers": args.workers})
    with open(args.mgf, "r", encoding="utf-8") as handle:
        spectra = parse_mgf(handle)
    processed, excluded = preprocess_spectra(
        spectra, strict=args.strict, workers=args.workers
    )
    exclusions = [(sid, "empty_after_preprocessing") for sid in excluded]
    kept = []
    for spec in processed:
        if spec.label is not None:
            label = parse_peptide(spec.label, table, max_len=pipeline.MAX_PEPTIDE_LEN)
            if not validate_precursor(spec.to_raw(), label, table):
                if args.strict:
                    raise ValueError(
                        f"spectrum {spec.spectrum_id!r} fails the precursor gates"
                    )
                exclusions.append((spec.spectrum_id, "precursor_mismatch"))
                continue
        kept.append(spec)
    with open(args.out, "w", encoding="utf-8") as sink:
        write_mgf((spec.to_raw() for spec in kept), sink)
    if args.report:
        with open(args.report, "w", encoding="utf-8") as sink:
            sink.write("spectrum_id\treason\n")
            for spectrum_id, reason in exclusions:
                sink.write(f"{spectrum_id}\t{reason}\n")
    print(f"# kept {len(kept)} of {len(spectra)} spectra", file=sys.stderr)
    return 0


def _cmd_synth(args) -> int:
    table = _load_table(args)
    config = pipeline.SynthConfig(n_candidates=args.n_candidates)
    _echo(args, {"subcommand": "synth", "n_spectra": args.n_spectra,
                 "config": dataclasses.asdict(config)})
    spectra, candidate_sets = pipeline.synthesize_dataset(
        table, args.seed, args.n_spectra, config
    )
    with open(args.out_mgf, "w", encoding="utf-8") as sink:
        write_mgf(spectra, sink)
    with open(args.out_candidates, "w", encoding="utf-8") as sink:
        pipeline.write_candidates(candidate_sets, sink)
    return 0


def _train_config(args, vocab: Sequence[str]) -> pipeline.TrainConfig:
    if args.profile == "desk":
        config = pipeline.TrainConfig.desk(vocab)
    else:
        config = pipeline.TrainConfig.paper_scale(vocab)
    if args.config:
        with open(args.config, "r", encoding="utf-8") as handle:
            overrides = json.load(handle)
        model_keys = {"d", "n_layers", "n_heads", "ff_dim", "dropout_rate", "loss_lambda"}
        embed_keys = {"max_len", "max_charge"}
        train_keys = {"lr", "weight_decay", "batch_size", "epochs", "warmup_epochs", "clip_norm"}
        unknown = set(overrides) - model_keys - embed_keys - train_keys
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        embedding = config.model.embedding
        if embed_keys & set(overrides) or "d" in overrides:
            embedding = dataclasses.replace(
                embedding,
                d=overrides.get("d", embedding.d),
                max_len=overrides.get("max_len", embedding.max_len),
                max_charge=overrides.get("max_charge", embedding.max_charge),
            )
        model = dataclasses.replace(
            config.model,
            embedding=embedding,
            **{k: overrides[k] for k in model_keys & set(overrides)},
        )
        config = dataclasses.replace(
            config,
            model=model,
            **{k: overrides[k] for k in train_keys & set(overrides)},
        )
    return config


def _cmd_train(args) -> int:
    table = _load_table(args)
    config = _train_config(args, table.tokens)
    _echo(args, {"subcommand": "train", "profile": args.profile,
                 "model": config.model.to_dict(),
                 "train": {"lr": config.lr, "weight_decay": config.weight_decay,
                            "batch_size": config.batch_size, "epochs": config.epochs,
                            "warmup_epochs": config.warmup_epochs,
                            "clip_norm": config.clip_norm}})
    with open(args.mgf, "r", encoding="utf-8") as handle:
        spectra = parse_mgf(handle)
    with open(args.candidates, "r", encoding="utf-8") as handle:
        candidate_sets = pipeline.load_candidates(handle)
    instances, excluded = pipeline.build_training_set(spectra, candidate_sets, table)
    print(f"# training on {len(instances)} instances ({len(excluded)} excluded)",
          file=sys.stderr)
    log_sink = open(args.loss_log, "w", encoding="utf-8") if args.loss_log else None
    try:
        checkpoint, _history = pipeline.train(
            config, instances, table, seed=args.seed, log_sink=log_sink
        )
    finally:
        if log_sink is not None:
            log_sink.close()
    pipeline.save_checkpoint(checkpoint, args.out)
    return 0


def _cmd_rerank(args) -> int:
    table = _load_table(args)
    checkpoint = pipeline.load_checkpoint(args.checkpoint)
    _echo(args, {"subcommand": "rerank", "checkpoint": args.checkpoint,
                 "model": checkpoint.config.to_dict(), "seed": checkpoint.seed})
    model = checkpoint.build_model(table)
    with open(args.mgf, "r", encoding="utf-8") as handle:
        spectra = parse_mgf(handle)
    with open(args.candidates, "r", encoding="utf-8") as handle:
        candidate_sets = pipeline.load_candidates(handle)
    selections = pipeline.rerank_run(model, spectra, candidate_sets, strict=args.strict)
    sink, owned = _open_out(args.out)
    try:
        pipeline.write_selections(selections, sink)
    finally:
        if owned:
            sink.close()
    return 0


def _evaluation_pairs(args, table: MassTable):
    """(pred, truth) peptide pairs from either input layout."""
    if args.predictions:
        with open(args.predictions, "r", encoding="utf-8") as handle:
            records = pipeline.load_predictions(handle)
        return [
            (parse_peptide(r["pred"], table), parse_peptide(r["truth"], table))
            for r in records
        ]
    if not (args.selections and args.candidates):
        raise ValueError(
            "provide either --predictions or both --selections and --candidates"
        )
    with open(args.selections, "r", encoding="utf-8") as handle:
        selections = pipeline.read_selections(handle)
    with open(args.candidates, "r", encoding="utf-8") as handle:
        candidate_sets = pipeline.load_candidates(handle)
    labels = {}
    for cs in candidate_sets:
        if cs.label is None:
            raise ValueError(f"spectrum {cs.spectrum_id!r} has no label")
        labels[cs.spectrum_id] = cs.label
    pairs = []
    for sel in selections:
        if sel.spectrum_id not in labels:
            raise ValueError(f"selection {sel.spectrum_id!r} has no candidate record")
        pairs.append(
            (parse_peptide(sel.peptide, table), parse_peptide(labels[sel.spectrum_id], table))
        )
    return pairs


def _cmd_evaluate(args) -> int:
    table = _load_table(args)
    _echo(args, {"subcommand": "evaluate"})
    pairs = _evaluation_pairs(args, table)
    stats = corpus_stats(pairs, table)
    sink, owned = _open_out(args.out)
    try:
        sink.write("metric\tvalue\n")
        sink.write(f"n_match_pep\t{stats.n_match_pep}\n")
        sink.write(f"n_all_pep\t{stats.n_all_pep}\n")
        sink.write(f"n_match_aa\t{stats.n_match_aa}\n")
        sink.write(f"n_all_aa\t{stats.n_all_aa}\n")
        sink.write(f"aa_precision\t{stats.aa_precision!r}\n")
        sink.write(f"peptide_recall\t{stats.peptide_recall!r}\n")
    finally:
        if owned:
            sink.close()
    return 0


def _parse_bins(text: str) -> list[tuple[int, int]]:
    bins = []
    for chunk in text.split(","):
        chunk = chunk.strip()
        if "-" in chunk:
            lo, hi = chunk.split("-", 1)
            bins.append((int(lo), int(hi)))
        else:
            bins.append((int(chunk), int(chunk)))
    return bins


def _cmd_analyze(args) -> int:
    table = _load_table(args)
    _echo(args, {"subcommand": "analyze", "analysis": args.analysis})
    sink, owned = _open_out(args.out)
    try:
        if args.analysis == "length":
            if not (args.predictions and args.bins):
                raise ValueError("length analysis needs --predictions and --bins")
            pairs = _evaluation_pairs(args, table)
            recalls = length_binned_recall(pairs, table, _parse_bins(args.bins))
            sink.write("bin_lo\tbin_hi\tpeptide_recall\n")
            for (lo, hi), recall in sorted(recalls.items()):
                sink.write(f"{lo}\t{hi}\t{recall!r}\n")
        elif args.analysis == "confusion":
            if not args.predictions:
                raise ValueError("confusion analysis needs --predictions")
            pairs = _evaluation_pairs(args, table)
            recalls = residue_confusion(pairs, table)
            sink.write("token\trecall\n")
            for token in sorted(recalls):
                sink.write(f"{token}\t{recalls[token]!r}\n")
        elif args.analysis == "contribution":
            if not (args.selections and args.candidates):
                raise ValueError("contribution analysis needs --selections and --candidates")
            with open(args.selections, "r", encoding="utf-8") as handle:
                selections = pipeline.read_selections(handle)
            with open(args.candidates, "r", encoding="utf-8") as handle:
                candidate_sets = pipeline.load_candidates(handle)
            by_id = {cs.spectrum_id: cs for cs in candidate_sets}
            records = []
            for sel in selections:
                cs = by_id.get(sel.spectrum_id)
                if cs is None:
                    raise ValueError(f"selection {sel.spectrum_id!r} has no candidate record")
                if cs.label is None:
                    raise ValueError(f"spectrum {sel.spectrum_id!r} has no label")
                records.append((cs.candidates, sel.peptide, cs.label))
            shares = contribution_analysis(records, table)
            sink.write("model\tshare\n")
            for model in sorted(shares):
                sink.write(f"{model}\t{shares[model]!r}\n")
        elif args.analysis == "zeroshot":
            if not (args.checkpoint and args.mgf and args.candidates and args.subsets):
                raise ValueError(
                    "zeroshot analysis needs --checkpoint, --mgf, --candidates, --subsets"
                )
            checkpoint = pipeline.load_checkpoint(args.checkpoint)
            model = checkpoint.build_model(table)
            with open(args.mgf, "r", encoding="utf-8") as handle:
                spectra = parse_mgf(handle)
            with open(args.candidates, "r", encoding="utf-8") as handle:
                candidate_sets = pipeline.load_candidates(handle)
            subsets = [
                [name.strip() for name in chunk.split(",") if name.strip()]
                for chunk in args.subsets.split(";")
                if chunk.strip()
            ]
            reports = pipeline.zero_shot_eval(model, spectra, candidate_sets, subsets, table)
            sink.write("subset\tn_spectra\tpeptide_recall\n")
            for report in reports:
                sink.write(
                    f"{','.join(report.models)}\t{report.n_spectra}\t{report.peptide_recall!r}\n"
                )
        else:  # unreachable behind argparse choices
            raise ValueError(f"unknown analysis {args.analysis!r}")
    finally:
        if owned:
            sink.close()
    return 0


# ---------------------------------------------------------------------------
# parser assembly


def build_parser() -> CliParser:
    parser = CliParser(prog="peprank", description=__doc__)
    sub = parser.add_subparsers(dest="subcommand", required=True, parser_class=CliParser)

    def common(p, seed=False, strict=False):
        p.add_argument("--mass-table", help="residue mass TSV (default: built-in table)")
        if seed:
            p.add_argument("--seed", type=int, default=0)
        if strict:
            p.add_argument("--strict", action="store_true",
                           help="turn ingestion warnings into failures")

    p = sub.add_parser("metrics", help="peptide-pair mass deviation scores from a TSV")
    common(p)
    p.add_argument("--pairs", required=True, help="TSV with query and target columns")
    p.add_argument("--out", help="output TSV (default: stdout)")
    p.set_defaults(func=_cmd_metrics)

    p = sub.add_parser("preprocess", help="filter an MGF and emit an exclusion report")
    common(p, strict=True)
    p.add_argument("--mgf", required=True)
    p.add_argument("--out", required=True, help="filtered MGF path")
    p.add_argument("--report", help="exclusion report TSV")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=_cmd_preprocess)

    p = sub.add_parser("synth", help="generate a labeled synthetic corpus")
    common(p, seed=True)
    p.add_argument("--n-spectra", type=int, required=True)
    p.add_argument("--n-candidates", type=int, default=4)
    p.add_argument("--out-mgf", required=True)
    p.add_argument("--out-candidates", required=True)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("train", help="train a reranker on labeled spectra + candidates")
    common(p, seed=True)
    p.add_argument("--mgf", required=True)
    p.add_argument("--candidates", required=True)
    p.add_argument("--profile", choices=("desk", "paper"), default="desk")
    p.add_argument("--config", help="JSON file overriding profile hyperparameters")
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--loss-log", help="per-step loss TSV")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("rerank", help="select candidates with a trained checkpoint")
    common(p, strict=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--mgf", required=True)
    p.add_argument("--candidates", required=True)
    p.add_argument("--out", help="selections TSV (default: stdout)")
    p.set_defaults(func=_cmd_rerank)

    p = sub.add_parser("evaluate", help="corpus precision/recall report")
    common(p)
    p.add_argument("--predictions", help="JSON Lines with pred/truth per spectrum")
    p.add_argument("--selections", help="selections TSV from rerank")
    p.add_argument("--candidates", help="candidate JSONL with labels")
    p.add_argument("--out", help="report TSV (default: stdout)")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("analyze", help="length / confusion / contribution / zero-shot reports")
    common(p)
    p.add_argument("--analysis", required=True,
                   choices=("length", "confusion", "contribution", "zeroshot"))
    p.add_argument("--predictions")
    p.add_argument("--selections")
    p.add_argument("--candidates")
    p.add_argument("--checkpoint")
    p.add_argument("--mgf")
    p.add_argument("--bins", help="length bins, e.g. '7-9,10-12,13-20'")
    p.add_argument("--subsets", help="model subsets, e.g. 'model_1;model_1,model_2'")
    p.add_argument("--out", help="report TSV (default: stdout)")
    p.set_defaults(func=_cmd_analyze)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
