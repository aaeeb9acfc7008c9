"""Thin finetuning entry points for the coherence and relevance scorers.

These wire the dataset builders into a standard sequence-classification
finetune. Training quality is not a test target here; the functions exist
so a checkpoint can be produced when transformers/torch and a corpus are
available.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Callable

from .datasets import build_coherence_dataset, build_relevance_dataset


def export_coherence_jsonl(
    story_corpus: list[str], out_path: str | Path, seed: int = 0
) -> Path:
    """Write the coherence pairs as JSONL ready for a classification finetune."""
    examples, report = build_coherence_dataset(story_corpus, seed=seed)
    out = Path(out_path)
    with out.open("w", encoding="utf-8") as fh:
        for ex in examples:
            fh.write(json.dumps({
                "text": f"{ex.passage}</s>{ex.continuation}",
                "label": ex.label,
            }) + "\n")
    (out.with_suffix(".report.json")).write_text(
        json.dumps(report.__dict__, default=str, indent=2), encoding="utf-8"
    )
    return out


def export_relevance_jsonl(
    story_corpus: list[str],
    summarizer: Callable[[str], str],
    out_path: str | Path,
    count: int = 2000,
    seed: int = 0,
) -> Path:
    examples, report = build_relevance_dataset(
        story_corpus, summarizer, count=count, seed=seed
    )
    out = Path(out_path)
    with out.open("w", encoding="utf-8") as fh:
        for ex in examples:
            fh.write(json.dumps({
                "text": f"{ex.summary}</s>{ex.passage}",
                "label": ex.label,
            }) + "\n")
    (out.with_suffix(".report.json")).write_text(
        json.dumps(report.__dict__, default=str, indent=2), encoding="utf-8"
    )
    return out


def finetune_classifier(
    jsonl_path: str | Path,
    output_dir: str | Path,
    base_model: str = "allenai/longformer-base-4096",
    epochs: int = 1,
    learning_rate: float = 2e-5,
    batch_size: int = 4,
) -> Path:
    """Run a plain sequence-classification finetune over an exported JSONL.

    Requires the `models` extra (transformers + torch). Hyperparameters are
    exposed but deliberately unvalidated beyond basics.
    """
    from transformers import (  # deferred heavy imports
        AutoModelForSequenceClassification,
        AutoTokenizer,
        Trainer,
        TrainingArguments,
    )
    import torch  # noqa: F401  (backend requirement of Trainer)

    rows = [json.loads(line) for line in Path(jsonl_path).read_text().splitlines()]
    tokenizer = AutoTokenizer.from_pretrained(base_model)
    model = AutoModelForSequenceClassification.from_pretrained(base_model, num_labels=2)

    class _Dataset:
        def __len__(self):
            return len(rows)

        def __getitem__(self, idx):
            row = rows[idx]
            enc = tokenizer(
                row["text"], truncation=True, max_length=tokenizer.model_max_length
            )
            enc["labels"] = row["label"]
            return enc

    args = TrainingArguments(
        output_dir=str(output_dir),
        num_train_epochs=epochs,
        learning_rate=learning_rate,
        per_device_train_batch_size=batch_size,
        save_strategy="epoch",
        logging_steps=50,
        report_to=[],
    )
    Trainer(model=model, args=args, train_dataset=_Dataset(), tokenizer=tokenizer).train()
    model.save_pretrained(output_dir)
    tokenizer.save_pretrained(output_dir)
    return Path(output_dir)
