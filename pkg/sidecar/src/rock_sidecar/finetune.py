"""Temporality fine-tuning: masked-language-model training over connective pairs.

The pairs file is TSV with header ``e1\te2\tconnective``; each record is
materialized in both orders ("E1 before E2" and "E2 after E1", or the mirror
for after-pairs), then the masked LM is trained with per-token masking until
the epoch loss plateaus.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import torch
from transformers import AutoModelForMaskedLM, AutoTokenizer

PAIRS_HEADER = ("e1", "e2", "connective")
CONNECTIVES = ("before", "after")
REVERSE = {"before": "after", "after": "before"}


class PairsFileError(ValueError):
    pass


@dataclass(frozen=True)
class TemporalPairRecord:
    e1_text: str
    e2_text: str
    connective: str

    def __post_init__(self):
        if self.connective not in CONNECTIVES:
            raise ValueError(f"connective must be one of {CONNECTIVES}")
        if not self.e1_text.strip() or not self.e2_text.strip():
            raise ValueError("pair texts must be non-empty")

    def sentences(self) -> tuple[str, str]:
        forward = f"{self.e1_text} {self.connective} {self.e2_text}"
        reversed_ = f"{self.e2_text} {REVERSE[self.connective]} {self.e1_text}"
        return forward, reversed_


def read_pairs(path: str | Path) -> list[TemporalPairRecord]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise PairsFileError(f"{path}: {exc}") from exc
    rows = list(csv.reader(io.StringIO(text), delimiter="\t"))
    if not rows:
        raise PairsFileError(f"{path}: empty file (header required)")
    if tuple(rows[0]) != PAIRS_HEADER:
        raise PairsFileError(f"{path}: expected header {PAIRS_HEADER}, got {tuple(rows[0])}")
    if len(rows) == 1:
        raise PairsFileError(f"{path}: no pairs after the header")
    records = []
    for line_number, row in enumerate(rows[1:], start=2):
        if len(row) != 3:
            raise PairsFileError(f"{path}: line {line_number}: expected 3 columns, got {len(row)}")
        try:
            records.append(TemporalPairRecord(*row))
        except ValueError as exc:
            raise PairsFileError(f"{path}: line {line_number}: {exc}") from exc
    return records


@dataclass(frozen=True)
class FinetuneParams:
    masking_prob: float = 0.1
    batch_size: int = 500
    learning_rate: float = 5e-5
    max_epochs: int = 50
    plateau_patience: int = 3
    plateau_tol: float = 1e-3
    max_length: int = 64
    seed: int = 0
    device: str = "cpu"


@dataclass
class FinetuneResult:
    checkpoint_dir: str
    initial_loss: float
    final_loss: float
    epochs_run: int
    n_sentences: int


def _mask_tokens(input_ids, special_mask, mask_token_id, prob, generator):
    """Per-token masking: selected positions become the mask token and are the
    only labeled targets. At least one position is always masked so every
    batch yields a defined loss."""
    picks = torch.rand(input_ids.shape, generator=generator) < prob
    picks &= ~special_mask
    for row in range(picks.shape[0]):
        if not picks[row].any():
            eligible = (~special_mask[row]).nonzero(as_tuple=True)[0]
            if len(eligible):
                idx = eligible[torch.randint(len(eligible), (1,), generator=generator)]
                picks[row, idx] = True
    labels = input_ids.clone()
    labels[~picks] = -100
    masked = input_ids.clone()
    masked[picks] = mask_token_id
    return masked, labels


def _epoch_loss(model, batches, mask_token_id, prob, seed, device, train, optimizer=None):
    generator = torch.Generator().manual_seed(seed)
    total, count = 0.0, 0
    for input_ids, attention, special in batches:
        masked, labels = _mask_tokens(input_ids, special, mask_token_id, prob, generator)
        masked, attention, labels = masked.to(device), attention.to(device), labels.to(device)
        if train:
            optimizer.zero_grad()
            out = model(input_ids=masked, attention_mask=attention, labels=labels)
            out.loss.backward()
            optimizer.step()
        else:
            with torch.no_grad():
                out = model(input_ids=masked, attention_mask=attention, labels=labels)
        total += float(out.loss.detach()) * input_ids.shape[0]
        count += input_ids.shape[0]
    return total / count


def finetune_temporal(
    pairs_file: str | Path,
    model_dir: str | Path,
    out_dir: str | Path,
    params: FinetuneParams = FinetuneParams(),
) -> FinetuneResult:
    records = read_pairs(pairs_file)
    sentences = [s for record in records for s in record.sentences()]

    tokenizer = AutoTokenizer.from_pretrained(str(model_dir))
    model = AutoModelForMaskedLM.from_pretrained(str(model_dir)).to(params.device)

    torch.manual_seed(params.seed)
    enc = tokenizer(
        sentences,
        return_tensors="pt",
        padding=True,
        truncation=True,
        max_length=params.max_length,
        return_special_tokens_mask=True,
    )
    special = enc["special_tokens_mask"].bool() | (enc["input_ids"] == tokenizer.pad_token_id)
    batches = [
        (enc["input_ids"][i : i + params.batch_size],
         enc["attention_mask"][i : i + params.batch_size],
         special[i : i + params.batch_size])
        for i in range(0, len(sentences), params.batch_size)
    ]

    model.eval()
    initial = _epoch_loss(
        model, batches, tokenizer.mask_token_id, params.masking_prob, params.seed, params.device, train=False
    )

    optimizer = torch.optim.AdamW(model.parameters(), lr=params.learning_rate)
    best = float("inf")
    stale = 0
    epochs_run = 0
    model.train()
    for epoch in range(params.max_epochs):
        loss = _epoch_loss(
            model, batches, tokenizer.mask_token_id, params.masking_prob,
            params.seed + 1 + epoch, params.device, train=True, optimizer=optimizer,
        )
        epochs_run = epoch + 1
        if loss < best - params.plateau_tol:
            best = loss
            stale = 0
        else:
            stale += 1
            if stale >= params.plateau_patience:
                break

    model.eval()
    final = _epoch_loss(
        model, batches, tokenizer.mask_token_id, params.masking_prob, params.seed, params.device, train=False
    )

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    model.save_pretrained(out)
    tokenizer.save_pretrained(out)
    return FinetuneResult(
        checkpoint_dir=str(out),
        initial_loss=initial,
        final_loss=final,
        epochs_run=epochs_run,
        n_sentences=len(sentences),
    )
