"""Sidecar CLI: serve the protocol, build tiny models, run temporality fine-tuning."""

from __future__ import annotations

import sys

import click

from .config import SidecarConfig


@click.group()
def main():
    """Model server for the rock wire protocol."""


@main.command("make-tiny-models")
@click.option("--out", required=True, type=click.Path())
@click.option("--seed", type=int, default=0, show_default=True)
def make_tiny_models_cmd(out, seed):
    """Materialize the tiny random generator and masked-LM checkpoints."""
    from .models import build_tiny_models

    paths = build_tiny_models(out, seed=seed)
    for role, path in paths.items():
        click.echo(f"{role}: {path}")


@main.command()
@click.option("--generation-model", required=True, help="Path or hub id of the causal LM.")
@click.option("--masked-model", required=True, help="Path or hub id of the masked LM.")
@click.option("--perturbation-model", default=None, help="Defaults to the generation model.")
@click.option("--device", default="cpu", show_default=True)
@click.option("--top-k-default", type=int, default=30, show_default=True)
@click.option("--temporal-finetuned", is_flag=True, help="Advertise the temporal-finetuned capability.")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8322, show_default=True)
def serve(generation_model, masked_model, perturbation_model, device, top_k_default, temporal_finetuned, host, port):
    """Load all model roles, then bind; a load failure refuses the bind."""
    import uvicorn

    from .app import create_app
    from .models import load_bundle

    config = SidecarConfig(
        generation_model=generation_model,
        masked_model=masked_model,
        perturbation_model=perturbation_model,
        device=device,
        top_k_default=top_k_default,
        temporal_finetuned=temporal_finetuned,
        host=host,
        port=port,
    )
    try:
        bundle = load_bundle(config)
    except Exception as exc:  # refuse to bind on any load failure
        click.echo(f"refusing to bind: model loading failed: {exc}", err=True)
        sys.exit(3)
    uvicorn.run(create_app(bundle, config), host=host, port=port)


@main.command()
@click.option("--pairs", required=True, type=click.Path(), help="TSV pairs file (e1, e2, connective).")
@click.option("--model", "model_dir", required=True, type=click.Path(), help="Masked-LM checkpoint to start from.")
@click.option("--out", required=True, type=click.Path(), help="Directory for the fine-tuned checkpoint.")
@click.option("--masking-prob", type=float, default=0.1, show_default=True)
@click.option("--batch-size", type=int, default=500, show_default=True)
@click.option("--lr", type=float, default=5e-5, show_default=True)
@click.option("--max-epochs", type=int, default=50, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--device", default="cpu", show_default=True)
def finetune(pairs, model_dir, out, masking_prob, batch_size, lr, max_epochs, seed, device):
    """Fine-tune the masked LM on temporal connective pairs until loss plateau."""
    from .finetune import FinetuneParams, PairsFileError, finetune_temporal

    params = FinetuneParams(
        masking_prob=masking_prob,
        batch_size=batch_size,
        learning_rate=lr,
        max_epochs=max_epochs,
        seed=seed,
        device=device,
    )
    try:
        result = finetune_temporal(pairs, model_dir, out, params)
    except PairsFileError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(4)
    click.echo(f"sentences: {result.n_sentences}")
    click.echo(f"epochs: {result.epochs_run}")
    click.echo(f"loss: {result.initial_loss:.4f} -> {result.final_loss:.4f}")
    click.echo(f"checkpoint: {result.checkpoint_dir}")


if __name__ == "__main__":
    main()
