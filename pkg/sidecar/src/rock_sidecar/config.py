"""Server configuration.

The defaults target the desk-scale tiny bundle produced by
``rock-sidecar make-tiny-models``. Full-scale runs swap in real checkpoints:
a large causal LM for generation (e.g. EleutherAI/gpt-j-6B), a masked LM for
temporal scoring (roberta-base, ideally after temporality fine-tuning), and
any control-code rewriting model for perturbation.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class SidecarConfig:
    generation_model: str
    masked_model: str
    perturbation_model: str | None = None  # defaults to the generation model
    device: str = "cpu"
    top_k_default: int = 30
    max_input_tokens: int = 120
    temporal_finetuned: bool = False
    host: str = "127.0.0.1"
    port: int = 8322

    @property
    def perturbation_model_path(self) -> str:
        return self.perturbation_model or self.generation_model
