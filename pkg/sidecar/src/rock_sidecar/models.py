"""Model loading and the tiny desk-scale bundle builder.

The tiny bundle is a word-level tokenizer plus randomly initialized two-layer
models, small enough to serve protocol traffic on a laptop CPU. It produces
schema-valid (not linguistically meaningful) responses, which is exactly what
protocol-level testing needs; real checkpoints drop in through the same
loader.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import torch
from tokenizers import Tokenizer
from tokenizers import models as tok_models
from tokenizers import pre_tokenizers
from transformers import (
    AutoModelForCausalLM,
    AutoModelForMaskedLM,
    AutoTokenizer,
    GPT2Config,
    GPT2LMHeadModel,
    PreTrainedTokenizerFast,
    RobertaConfig,
    RobertaForMaskedLM,
)

from .config import SidecarConfig

SPECIAL_TOKENS = ("<s>", "</s>", "<pad>", "<unk>", "<mask>")

# Small word bank for the tiny tokenizer; "before" and "after" must be
# single in-vocabulary tokens for mask scoring to be meaningful.
WORD_BANK = (
    "before after that because so then alice bob the a an was were is are had has "
    "walked ordered entered left opened closed found lost made took gave saw heard "
    "restaurant pizza bar door house street morning evening rain sun bus train "
    "hungry tired happy sad quiet loud wet dry dark light man woman child dog cat "
    "teacher student homework notes pocket coins gloves hands water glass jar fence "
    "into over under with without and or not very really went came stayed moved "
    ". , ! ?"
).split()


@dataclass
class ModelBundle:
    generator_tokenizer: object
    generator: object
    masked_tokenizer: object
    masked: object
    perturber_tokenizer: object
    perturber: object
    fingerprint: str


def _fingerprint(paths: list[str], models_: list[torch.nn.Module]) -> str:
    h = hashlib.sha256()
    for path in paths:
        h.update(path.encode("utf-8"))
        h.update(b"\x00")
    for model in models_:
        for name, param in sorted(model.named_parameters()):
            h.update(name.encode("utf-8"))
            h.update(json.dumps(list(param.shape)).encode("utf-8"))
    return h.hexdigest()[:16]


def load_bundle(config: SidecarConfig) -> ModelBundle:
    """Load all three model roles; any failure here means the server never binds."""
    device = torch.device(config.device)

    gen_tok = AutoTokenizer.from_pretrained(config.generation_model)
    gen = AutoModelForCausalLM.from_pretrained(config.generation_model).to(device).eval()

    masked_tok = AutoTokenizer.from_pretrained(config.masked_model)
    masked = AutoModelForMaskedLM.from_pretrained(config.masked_model).to(device).eval()

    pert_path = config.perturbation_model_path
    if pert_path == config.generation_model:
        pert_tok, pert = gen_tok, gen
    else:
        pert_tok = AutoTokenizer.from_pretrained(pert_path)
        pert = AutoModelForCausalLM.from_pretrained(pert_path).to(device).eval()

    return ModelBundle(
        generator_tokenizer=gen_tok,
        generator=gen,
        masked_tokenizer=masked_tok,
        masked=masked,
        perturber_tokenizer=pert_tok,
        perturber=pert,
        fingerprint=_fingerprint(
            [config.generation_model, config.masked_model, pert_path], [gen, masked]
        ),
    )


def _tiny_tokenizer() -> PreTrainedTokenizerFast:
    vocab = {tok: i for i, tok in enumerate(SPECIAL_TOKENS)}
    for word in WORD_BANK:
        if word not in vocab:
            vocab[word] = len(vocab)
    tok = Tokenizer(tok_models.WordLevel(vocab, unk_token="<unk>"))
    tok.pre_tokenizer = pre_tokenizers.Whitespace()
    return PreTrainedTokenizerFast(
        tokenizer_object=tok,
        unk_token="<unk>",
        pad_token="<pad>",
        mask_token="<mask>",
        bos_token="<s>",
        eos_token="</s>",
    )


def build_tiny_models(out_dir: str | Path, seed: int = 0) -> dict[str, str]:
    """Materialize the tiny generator and masked-LM checkpoints; returns their paths."""
    out = Path(out_dir)
    tokenizer = _tiny_tokenizer()
    torch.manual_seed(seed)

    gen_dir = out / "generator"
    gen_cfg = GPT2Config(
        vocab_size=len(tokenizer),
        n_positions=256,
        n_embd=64,
        n_layer=2,
        n_head=2,
        bos_token_id=tokenizer.bos_token_id,
        eos_token_id=tokenizer.eos_token_id,
    )
    generator = GPT2LMHeadModel(gen_cfg)
    gen_dir.mkdir(parents=True, exist_ok=True)
    generator.save_pretrained(gen_dir)
    tokenizer.save_pretrained(gen_dir)

    masked_dir = out / "masked-lm"
    masked_cfg = RobertaConfig(
        vocab_size=len(tokenizer),
        hidden_size=64,
        num_hidden_layers=2,
        num_attention_heads=2,
        intermediate_size=128,
        max_position_embeddings=260,
        pad_token_id=tokenizer.pad_token_id,
        bos_token_id=tokenizer.bos_token_id,
        eos_token_id=tokenizer.eos_token_id,
    )
    masked = RobertaForMaskedLM(masked_cfg)
    masked_dir.mkdir(parents=True, exist_ok=True)
    masked.save_pretrained(masked_dir)
    tokenizer.save_pretrained(masked_dir)

    return {"generation_model": str(gen_dir), "masked_model": str(masked_dir)}
