"""Dataset plumbing, synthetic data, the training loop, and reranking runs.

Candidate files are JSON Lines, one record per spectrum:
``{"spectrum_id": ..., "candidates": [{"model": ..., "peptide": ...}],
"label": ...}`` with label optional. Selections are written as TSV.
Checkpoints use a small binary container (magic ``RNKV``).
"""

from __future__ import annotations

import json
import logging
import math
import struct
from dataclasses import dataclass, replace
from functools import reduce
from typing import Iterable, Sequence, TextIO

import numpy as np

from . import autograd as ag
from .autograd import ParameterStore, Tensor
from .evaluation import aa_match, corpus_stats
from .masses import (
    PROTON_MASS,
    WATER_MASS,
    MassTable,
    Peptide,
    Precursor,
    cumulative_masses,
    parse_peptide,
    peptide_neutral_mass,
)
from .metrics import gap_penalty, pmd, rmd
from .model import ModelConfig, RerankModel, joint_loss, rerank_select
from .spectra import (
    ProcessedSpectrum,
    RawSpectrum,
    preprocess_spectrum,
    validate_precursor,
)

logger = logging.getLogger(__name__)

MAX_PEPTIDE_LEN = 100  # ingestion truncation limit

CHECKPOINT_MAGIC = b"RNKV"
CHECKPOINT_VERSION = 1


# ---------------------------------------------------------------------------
# candidate files


@dataclass
class CandidateSet:
    """One spectrum's candidates, in file order, with optional label text."""

    spectrum_id: str
    candidates: list[tuple[str, str]]  # (model name, peptide text)
    label: str | None = None

    @property
    def model_names(self) -> list[str]:
        return [model for model, _ in self.candidates]

    @property
    def peptides(self) -> list[str]:
        return [peptide for _, peptide in self.candidates]


def load_candidates(source: TextIO | Iterable[str]) -> list[CandidateSet]:
    """Parse a JSON Lines candidate file; order and duplicates are preserved."""
    sets: list[CandidateSet] = []
    seen: set[str] = set()
    for lineno, line in enumerate(source, start=1):
        text = line.strip()
        if not text:
            continue
        try:
            record = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValueError(f"line {lineno}: malformed JSON ({exc.msg})") from None
        if not isinstance(record, dict):
            raise ValueError(f"line {lineno}: record must be a JSON object")
        try:
            spectrum_id = record["spectrum_id"]
            raw_candidates = record["candidates"]
        except KeyError as exc:
            raise ValueError(f"line {lineno}: missing field {exc.args[0]!r}") from None
        if not isinstance(spectrum_id, str) or not spectrum_id:
            raise ValueError(f"line {lineno}: spectrum_id must be a non-empty string")
        if spectrum_id in seen:
            raise ValueError(f"line {lineno}: duplicate spectrum_id {spectrum_id!r}")
        seen.add(spectrum_id)
        if not isinstance(raw_candidates, list) or not raw_candidates:
            raise ValueError(f"line {lineno}: candidates must be a non-empty list")
        candidates: list[tuple[str, str]] = []
        for entry in raw_candidates:
            try:
                candidates.append((entry["model"], entry["peptide"]))
            except (TypeError, KeyError):
                raise ValueError(
                    f"line {lineno}: each candidate needs 'model' and 'peptide'"
                ) from None
        label = record.get("label")
        sets.append(CandidateSet(spectrum_id=spectrum_id, candidates=candidates, label=label))
    return sets


def write_candidates(sets: Iterable[CandidateSet], sink: TextIO) -> None:
    for cs in sets:
        record: dict = {
            "spectrum_id": cs.spectrum_id,
            "candidates": [{"model": m, "peptide": p} for m, p in cs.candidates],
        }
        if cs.label is not None:
            record["label"] = cs.label
        sink.write(json.dumps(record) + "\n")


def load_predictions(source: TextIO | Iterable[str]) -> list[dict]:
    """Parse a prediction corpus: JSON Lines of spectrum_id / pred / truth."""
    records: list[dict] = []
    for lineno, line in enumerate(source, start=1):
        text = line.strip()
        if not text:
            continue
        try:
            record = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValueError(f"line {lineno}: malformed JSON ({exc.msg})") from None
        for key in ("spectrum_id", "pred", "truth"):
            if key not in record:
                raise ValueError(f"line {lineno}: missing field {key!r}")
        records.append(record)
    return records


# ---------------------------------------------------------------------------
# training instances


@dataclass
class TrainingInstance:
    """One spectrum joined with its candidates and supervision targets."""

    spectrum: ProcessedSpectrum
    candidates: list[Peptide]
    model_names: list[str]
    label: Peptide
    pmd_targets: np.ndarray  # [c]
    rmd_targets: list[np.ndarray]  # per candidate, one value per residue

    @property
    def n_candidates(self) -> int:
        return len(self.candidates)


def build_training_set(
    spectra: Sequence[RawSpectrum],
    candidate_sets: Sequence[CandidateSet],
    table: MassTable,
    max_len: int = MAX_PEPTIDE_LEN,
) -> tuple[list[TrainingInstance], list[tuple[str, str]]]:
    """Join spectra with candidates and compute supervision targets.

    Spectra emptied by preprocessing or failing the precursor gates are
    skipped (collected in the exclusion list); so are instances where
    every candidate already matches the label, which carry no ranking
    signal. Unjoinable ids and missing labels are hard errors.
    """
    by_id = {s.spectrum_id: s for s in spectra}
    gap = gap_penalty(table)
    instances: list[TrainingInstance] = []
    excluded: list[tuple[str, str]] = []
    for cs in candidate_sets:
        raw = by_id.get(cs.spectrum_id)
        if raw is None:
            raise ValueError(f"candidate set {cs.spectrum_id!r} has no matching spectrum")
        label_text = cs.label if cs.label is not None else raw.label
        if label_text is None:
            raise ValueError(f"spectrum {cs.spectrum_id!r} has no label peptide")
        label = parse_peptide(label_text, table, max_len=max_len)
        if len(label) == 0:
            raise ValueError(f"spectrum {cs.spectrum_id!r} has an empty label")
        if not validate_precursor(raw, label, table):
            excluded.append((cs.spectrum_id, "precursor_mismatch"))
            continue
        processed = preprocess_spectrum(raw)
        if processed is None:
            excluded.append((cs.spectrum_id, "empty_after_preprocessing"))
            continue
        candidates = [
            parse_peptide(text, table, max_len=max_len) for text in cs.peptides
        ]
        if any(len(c) == 0 for c in candidates):
            raise ValueError(f"spectrum {cs.spectrum_id!r} has an empty candidate")
        matches = [aa_match(c, label, table).peptide_matched for c in candidates]
        if all(matches):
            excluded.append((cs.spectrum_id, "all_candidates_correct"))
            continue
        pmd_targets = np.array([pmd(c, label, table, gap=gap) for c in candidates])
        rmd_targets = [rmd(c, label, table) for c in candidates]
        instances.append(
            TrainingInstance(
                spectrum=processed,
                candidates=candidates,
                model_names=cs.model_names,
                label=label,
                pmd_targets=pmd_targets,
                rmd_targets=rmd_targets,
            )
        )
    return instances, excluded


# ---------------------------------------------------------------------------
# synthetic data


@dataclass(frozen=True)
class SynthConfig:
    """Shape of the generated desk-scale corpus."""

    n_candidates: int = 4  # label plus n-1 mutants
    min_length: int = 7
    max_length: int = 20
    noise_peaks: int = 8
    peak_dropout: float = 0.1
    min_charge: int = 2
    max_charge: int = 3
    mass_similarity_scale: float = 10.0  # Da, softness of mutation preference


def _mutate(peptide: Peptide, table: MassTable, rng: np.random.Generator,
            config: SynthConfig) -> Peptide:
    """One substitution, insertion, or deletion; substitutions prefer
    replacements of similar mass but never a mass-identical one."""
    residues = list(peptide.residues)
    kinds = ["substitution", "insertion"] + (["deletion"] if len(residues) > 1 else [])
    kind = kinds[rng.integers(len(kinds))]
    tokens = table.tokens
    if kind == "substitution":
        pos = int(rng.integers(len(residues)))
        current_mass = table.mass(residues[pos])
        options = [t for t in tokens if abs(table.mass(t) - current_mass) > 0.01]
        weights = np.array(
            [math.exp(-abs(table.mass(t) - current_mass) / config.mass_similarity_scale)
             for t in options]
        )
        choice = options[rng.choice(len(options), p=weights / weights.sum())]
        residues[pos] = choice
    elif kind == "insertion":
        pos = int(rng.integers(len(residues) + 1))
        residues.insert(pos, tokens[rng.integers(len(tokens))])
    else:
        pos = int(rng.integers(len(residues)))
        del residues[pos]
    return Peptide(tuple(residues))


def synthesize_dataset(
    table: MassTable,
    seed: int,
    n_spectra: int,
    config: SynthConfig = SynthConfig(),
) -> tuple[list[RawSpectrum], list[CandidateSet]]:
    """Generate labeled spectra with candidate sets, reproducibly from the seed.

    Peaks are theoretical singly-charged b- and y-ions of the label plus
    uniform noise, with random peak dropout. Each candidate set holds the
    label and mutated variants, shuffled over the candidate slots so no
    slot is trivially correct; slot i is attributed to "model_{i+1}".
    """
    rng = np.random.default_rng(seed)
    tokens = table.tokens
    spectra: list[RawSpectrum] = []
    candidate_sets: list[CandidateSet] = []
    for index in range(n_spectra):
        length = int(rng.integers(config.min_length, config.max_length + 1))
        label = Peptide(tuple(tokens[i] for i in rng.integers(len(tokens), size=length)))
        neutral = peptide_neutral_mass(label, table)
        charge = int(rng.integers(config.min_charge, config.max_charge + 1))
        precursor = Precursor.from_mz((neutral + charge * PROTON_MASS) / charge, charge)

        prefixes = cumulative_masses(label, table, "prefix")
        suffixes = cumulative_masses(label, table, "suffix")
        ions = [prefixes[i] + PROTON_MASS for i in range(length - 1)]
        ions += [suffixes[i] + WATER_MASS + PROTON_MASS for i in range(1, length)]
        keep = rng.random(len(ions)) >= config.peak_dropout
        if not keep.any():
            keep[:] = True
        mzs = [ion for ion, k in zip(ions, keep) if k]
        intensities = list(rng.uniform(0.3, 1.0, size=len(mzs)))
        noise_mz = rng.uniform(50.5, min(4500.0, neutral), size=config.noise_peaks)
        mzs += list(noise_mz)
        intensities += list(rng.uniform(0.02, 0.15, size=config.noise_peaks))

        spectrum_id = f"synth_{index:05d}"
        spectra.append(
            RawSpectrum(
                spectrum_id=spectrum_id,
                mz=np.array(mzs),
                intensity=np.array(intensities),
                precursor=precursor,
                label=label.render(),
            )
        )

        variants = [label] + [
            _mutate(label, table, rng, config) for _ in range(config.n_candidates - 1)
        ]
        slots: list[str | None] = [None] * config.n_candidates
        for variant, slot in zip(variants, rng.permutation(config.n_candidates)):
            slots[slot] = variant.render()
        candidate_sets.append(
            CandidateSet(
                spectrum_id=spectrum_id,
                candidates=[(f"model_{i + 1}", text) for i, text in enumerate(slots)],
                label=label.render(),
            )
        )
    return spectra, candidate_sets


# ---------------------------------------------------------------------------
# optimizer and schedule


class AdamW:
    """Adaptive-moment optimizer with decoupled weight decay."""

    def __init__(self, store: ParameterStore, weight_decay: float = 0.0,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.store = store
        self.weight_decay = weight_decay
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m = {name: np.zeros_like(t.data) for name, t in store.items()}
        self._v = {name: np.zeros_like(t.data) for name, t in store.items()}

    def step(self, lr: float) -> None:
        self.t += 1
        bias1 = 1.0 - self.beta1 ** self.t
        bias2 = 1.0 - self.beta2 ** self.t
        for name, param in self.store.items():
            grad = param.grad
            if grad is None:
                continue
            m = self._m[name]
            v = self._v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * grad
            v *= self.beta2
            v += (1.0 - self.beta2) * grad * grad
            update = (m / bias1) / (np.sqrt(v / bias2) + self.eps)
            param.data -= lr * (update + self.weight_decay * param.data)


def learning_rate(step: int, base_lr: float, warmup_steps: int, total_steps: int) -> float:
    """Linear warmup from zero, then cosine decay to zero."""
    if warmup_steps > 0 and step < warmup_steps:
        return base_lr * step / warmup_steps
    remaining = max(total_steps - warmup_steps, 1)
    progress = min((step - warmup_steps) / remaining, 1.0)
    return base_lr * 0.5 * (1.0 + math.cos(math.pi * progress))


# ---------------------------------------------------------------------------
# training


@dataclass(frozen=True)
class TrainConfig:
    """Optimization hyperparameters around a model config."""

    model: ModelConfig
    lr: float = 1e-3
    weight_decay: float = 0.0
    batch_size: int = 16
    epochs: int = 30
    warmup_epochs: float = 1.0
    clip_norm: float = 1.5

    @classmethod
    def desk(cls, vocab: Sequence[str], **overrides) -> "TrainConfig":
        base = cls(model=ModelConfig.desk(vocab), epochs=60)
        return replace(base, **overrides) if overrides else base

    @classmethod
    def paper_scale(cls, vocab: Sequence[str], **overrides) -> "TrainConfig":
        base = cls(
            model=ModelConfig.paper_scale(vocab),
            lr=1e-4,
            weight_decay=8e-5,
            batch_size=256,
            epochs=5,
            warmup_epochs=1.0,
            clip_norm=1.5,
        )
        return replace(base, **overrides) if overrides else base


@dataclass
class StepRecord:
    step: int
    lr: float
    loss: float
    grad_norm: float


def _instance_loss(model: RerankModel, instance: TrainingInstance,
                   training: bool, rng) -> Tensor:
    output, batch = model.forward(
        instance.spectrum, instance.candidates, training=training, rng=rng
    )
    width = batch.width - 1
    rmd_matrix = np.zeros((instance.n_candidates, width))
    for row, values in enumerate(instance.rmd_targets):
        rmd_matrix[row, : len(values)] = values
    return joint_loss(
        output,
        instance.pmd_targets,
        rmd_matrix,
        batch.mask[:, 1:],
        model.config.loss_lambda,
    )


def train(
    config: TrainConfig,
    instances: Sequence[TrainingInstance],
    table: MassTable,
    seed: int = 0,
    log_sink: TextIO | None = None,
) -> tuple["Checkpoint", list[StepRecord]]:
    """Run the optimizer over the training instances.

    Deterministic given (config, instances, seed): parameter init, epoch
    shuffling, and dropout all derive from the seed, and batch gradients
    are accumulated in instance order. A non-finite loss aborts.
    """
    if not instances:
        raise ValueError("training set is empty")
    model = RerankModel(config.model, table, seed=seed)
    optimizer = AdamW(model.store, weight_decay=config.weight_decay)
    data_rng = np.random.default_rng(seed + 1)
    dropout_rng = np.random.default_rng(seed + 2)

    n = len(instances)
    steps_per_epoch = math.ceil(n / config.batch_size)
    total_steps = config.epochs * steps_per_epoch
    warmup_steps = int(round(config.warmup_epochs * steps_per_epoch))

    history: list[StepRecord] = []
    if log_sink is not None:
        log_sink.write("step\tlr\tloss\tgrad_norm\n")
    step = 0
    for _epoch in range(config.epochs):
        order = data_rng.permutation(n)
        for start in range(0, n, config.batch_size):
            batch_ids = order[start : start + config.batch_size]
            lr = learning_rate(step, config.lr, warmup_steps, total_steps)
            model.store.zero_grad()
            losses = [
                _instance_loss(model, instances[i], training=True, rng=dropout_rng)
                for i in batch_ids
            ]
            total = ag.mul(reduce(ag.add, losses), 1.0 / len(losses))
            loss_value = float(total.data)
            if not math.isfinite(loss_value):
                raise RuntimeError(
                    f"training diverged: non-finite loss {loss_value} at step {step} "
                    f"(lr={lr:.3g}); inspect targets and learning rate"
                )
            ag.backward(total)
            grad_norm = model.store.clip_grad_norm(config.clip_norm)
            optimizer.step(lr)
            record = StepRecord(step=step, lr=lr, loss=loss_value, grad_norm=grad_norm)
            history.append(record)
            if log_sink is not None:
                log_sink.write(f"{step}\t{lr!r}\t{loss_value!r}\t{grad_norm!r}\n")
            step += 1
    checkpoint = Checkpoint(
        config=config.model,
        params=model.store.export_arrays(),
        seed=seed,
        step_count=step,
    )
    return checkpoint, history


# ---------------------------------------------------------------------------
# inference


@dataclass
class Selection:
    """One reranking decision with the full score vector."""

    spectrum_id: str
    index: int
    model_name: str
    peptide: str
    scores: list[float]


def rerank_run(
    model: RerankModel,
    spectra: Sequence[RawSpectrum],
    candidate_sets: Sequence[CandidateSet],
    strict: bool = False,
) -> list[Selection]:
    """Forward every candidate set in evaluation mode and pick per spectrum.

    Rows keep candidate-file order; exact score ties resolve to the lowest
    index. Spectra emptied by preprocessing are skipped with a warning
    (an error in strict mode).
    """
    by_id = {s.spectrum_id: s for s in spectra}
    max_len = model.config.embedding.max_len
    selections: list[Selection] = []
    for cs in candidate_sets:
        raw = by_id.get(cs.spectrum_id)
        if raw is None:
            raise ValueError(f"candidate set {cs.spectrum_id!r} has no matching spectrum")
        candidates = [parse_peptide(text, model.table) for text in cs.peptides]
        for peptide in candidates:
            if len(peptide) > max_len:
                raise ValueError(
                    f"candidate {peptide.render()!r} exceeds max_len={max_len}"
                )
            if len(peptide) == 0:
                raise ValueError(f"spectrum {cs.spectrum_id!r} has an empty candidate")
        processed = preprocess_spectrum(raw)
        if processed is None:
            if strict:
                raise ValueError(
                    f"spectrum {cs.spectrum_id!r} excluded by preprocessing"
                )
            logger.warning("skipping spectrum %r: no usable peaks", cs.spectrum_id)
            continue
        output, _ = model.forward(processed, candidates, training=False)
        index = rerank_select(output.pmd_pred)
        selections.append(
            Selection(
                spectrum_id=cs.spectrum_id,
                index=index,
                model_name=cs.candidates[index][0],
                peptide=cs.candidates[index][1],
                scores=[float(v) for v in output.pmd_pred.data],
            )
        )
    return selections


def write_selections(selections: Iterable[Selection], sink: TextIO) -> None:
    sink.write("spectrum_id\tselected_index\tselected_model\tselected_peptide\tscores\n")
    for sel in selections:
        scores = ",".join(repr(v) for v in sel.scores)
        sink.write(
            f"{sel.spectrum_id}\t{sel.index}\t{sel.model_name}\t{sel.peptide}\t{scores}\n"
        )


def read_selections(source: TextIO | Iterable[str]) -> list[Selection]:
    lines = iter(source)
    header = next(lines, None)
    if header is None or not header.startswith("spectrum_id\t"):
        raise ValueError("selections file missing header row")
    selections = []
    for lineno, line in enumerate(lines, start=2):
        text = line.rstrip("\n")
        if not text:
            continue
        parts = text.split("\t")
        if len(parts) != 5:
            raise ValueError(f"line {lineno}: expected 5 tab-separated fields")
        selections.append(
            Selection(
                spectrum_id=parts[0],
                index=int(parts[1]),
                model_name=parts[2],
                peptide=parts[3],
                scores=[float(v) for v in parts[4].split(",")],
            )
        )
    return selections


@dataclass
class SubsetReport:
    models: tuple[str, ...]
    n_spectra: int
    peptide_recall: float


def zero_shot_eval(
    model: RerankModel,
    spectra: Sequence[RawSpectrum],
    candidate_sets: Sequence[CandidateSet],
    model_subsets: Sequence[Sequence[str]],
    table: MassTable,
) -> list[SubsetReport]:
    """Rerank with candidates restricted to each base-model subset.

    Every candidate set must retain at least one candidate under each
    subset, and labels are required for the recall computation.
    """
    reports: list[SubsetReport] = []
    for subset in model_subsets:
        allowed = set(subset)
        filtered: list[CandidateSet] = []
        for cs in candidate_sets:
            kept = [(m, p) for m, p in cs.candidates if m in allowed]
            if not kept:
                raise ValueError(
                    f"spectrum {cs.spectrum_id!r} has no candidates from subset {sorted(allowed)}"
                )
            if cs.label is None:
                raise ValueError(f"spectrum {cs.spectrum_id!r} has no label")
            filtered.append(CandidateSet(cs.spectrum_id, kept, cs.label))
        selections = rerank_run(model, spectra, filtered)
        labels = {cs.spectrum_id: cs.label for cs in filtered}
        pairs = [
            (parse_peptide(sel.peptide, table), parse_peptide(labels[sel.spectrum_id], table))
            for sel in selections
        ]
        stats = corpus_stats(pairs, table)
        reports.append(
            SubsetReport(
                models=tuple(subset),
                n_spectra=stats.n_all_pep,
                peptide_recall=stats.peptide_recall,
            )
        )
    return reports


# ---------------------------------------------------------------------------
# checkpoints


@dataclass
class Checkpoint:
    """Serializable training state: config, parameters, seed, step count."""

    config: ModelConfig
    params: dict[str, np.ndarray]
    seed: int
    step_count: int

    def build_model(self, table: MassTable) -> RerankModel:
        """Instantiate the model and load the stored parameters into it."""
        model = RerankModel(self.config, table, seed=self.seed)
        model.store.load_arrays(self.params)
        return model


def save_checkpoint(checkpoint: Checkpoint, path: str) -> None:
    header = {
        "model": checkpoint.config.to_dict(),
        "seed": checkpoint.seed,
        "step_count": checkpoint.step_count,
    }
    header_bytes = json.dumps(header).encode("utf-8")
    with open(path, "wb") as sink:
        sink.write(CHECKPOINT_MAGIC)
        sink.write(struct.pack("<I", CHECKPOINT_VERSION))
        sink.write(struct.pack("<I", len(header_bytes)))
        sink.write(header_bytes)
        sink.write(struct.pack("<I", len(checkpoint.params)))
        for name, array in checkpoint.params.items():
            name_bytes = name.encode("utf-8")
            sink.write(struct.pack("<I", len(name_bytes)))
            sink.write(name_bytes)
            sink.write(struct.pack("<I", array.ndim))
            for dim in array.shape:
                sink.write(struct.pack("<Q", dim))
            sink.write(np.ascontiguousarray(array, dtype="<f8").tobytes())


def _read_exact(source, count: int, what: str) -> bytes:
    data = source.read(count)
    if len(data) != count:
        raise ValueError(f"truncated checkpoint while reading {what}")
    return data


def load_checkpoint(path: str) -> Checkpoint:
    with open(path, "rb") as source:
        magic = _read_exact(source, 4, "magic")
        if magic != CHECKPOINT_MAGIC:
            raise ValueError(
                f"not a checkpoint: expected magic {CHECKPOINT_MAGIC!r}, got {magic!r}"
            )
        (version,) = struct.unpack("<I", _read_exact(source, 4, "version"))
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        (header_len,) = struct.unpack("<I", _read_exact(source, 4, "header length"))
        header = json.loads(_read_exact(source, header_len, "header").decode("utf-8"))
        config = ModelConfig.from_dict(header["model"])
        (n_params,) = struct.unpack("<I", _read_exact(source, 4, "parameter count"))
        params: dict[str, np.ndarray] = {}
        for _ in range(n_params):
            (name_len,) = struct.unpack("<I", _read_exact(source, 4, "name length"))
            name = _read_exact(source, name_len, "name").decode("utf-8")
            (ndim,) = struct.unpack("<I", _read_exact(source, 4, "rank"))
            shape = tuple(
                struct.unpack("<Q", _read_exact(source, 8, "dimension"))[0]
                for _ in range(ndim)
            )
            count = int(np.prod(shape)) if shape else 1
            payload = _read_exact(source, count * 8, f"payload of {name!r}")
            params[name] = np.frombuffer(payload, dtype="<f8").reshape(shape).copy()
        return Checkpoint(
            config=config,
            params=params,
            seed=header["seed"],
            step_count=header["step_count"],
        )
