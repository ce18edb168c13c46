"""Service CLI: serve the scorer or fine-tune from a wire-record file."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import uvicorn

from .app import create_app
from .config import ServiceConfig, TrainSettings
from .model import build_model, load_checkpoint
from .training import finetune


def _load_config(path: str | None) -> ServiceConfig:
    return ServiceConfig.from_file(path) if path else ServiceConfig()


@click.group()
def main():
    """Neural scorer service for the table-search toolkit."""


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--checkpoint", type=click.Path(exists=True), default=None,
              help="Checkpoint directory produced by train.")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8010, show_default=True)
def serve(config_path, checkpoint, host, port):
    """Run the HTTP service."""
    if checkpoint:
        model, config = load_checkpoint(checkpoint)
    else:
        config = _load_config(config_path)
        model = build_model(config)
    app = create_app(config, model=model)
    uvicorn.run(app, host=host, port=port, log_level="warning")


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--pairs", "pairs_path", required=True, type=click.Path(exists=True),
              help="JSONL wire records with a 'grade' field (tablerank encode output).")
@click.option("--epochs", type=int, default=5, show_default=True)
@click.option("--batch-size", type=int, default=16, show_default=True)
@click.option("--lr", type=float, default=1e-5, show_default=True)
@click.option("--warmup", type=float, default=0.1, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", required=True, type=click.Path(), help="Checkpoint directory.")
def train(config_path, pairs_path, epochs, batch_size, lr, warmup, seed, out):
    """Fine-tune on graded packed inputs and write a checkpoint."""
    config = _load_config(config_path)
    model = build_model(config)
    pairs = [json.loads(line) for line in Path(pairs_path).read_text(encoding="utf-8").splitlines() if line.strip()]
    settings = TrainSettings(
        epochs=epochs, batch_size=batch_size, learning_rate=lr, warmup=warmup, seed=seed
    )
    log = finetune(model, pairs, settings, config, checkpoint_dir=out)
    click.echo(f"trained {log.checkpoint}: first step loss {log.first_step_loss:.4f}, "
               f"last epoch loss {log.epoch_losses[-1]:.4f}")


if __name__ == "__main__":
    sys.exit(main())
