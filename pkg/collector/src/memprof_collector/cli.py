"""Collector command line.

Exit codes match the engine: 0 success, 2 data error, 64 usage error.
The emitted panel is the only coupling to the engine; validate it with
``memprof validate --panel <out>``.
"""

from __future__ import annotations

import hashlib
import json
import sys
from pathlib import Path

import click
import numpy as np

from .config import CollectorError, load_config
from .emit import emit_panel, run_manifest, write_manifest
from .sampling import sample_instances
from .scoring import score_suite

EXIT_DATA = 2
EXIT_USAGE = 64


@click.command(name="memprof-collect")
@click.option("--config", "config_path", required=True, help="CollectorConfig JSON.")
@click.option("--train-data", required=True, help=".npy of pre-tokenized training rows in training order.")
@click.option("--valid-data", required=True, help=".npy of pre-tokenized validation rows.")
@click.option("--out", "out_path", required=True, help="PanelFile CSV destination.")
@click.option("--manifest", "manifest_path", default=None, help="Optional manifest JSON destination.")
@click.option("--backend", default="hf", show_default=True,
              help="hf, stub:perfect, or stub:uniform.")
@click.option("--vocab-size", type=int, default=None, help="Vocab size for stub backends.")
@click.option("--workers", type=int, default=1, show_default=True,
              help="Process-level parallelism across checkpoints.")
def cli(config_path: str, train_data: str, valid_data: str, out_path: str,
        manifest_path: str | None, backend: str, vocab_size: int | None, workers: int) -> None:
    """Sample instances, score every checkpoint, and write a panel CSV."""
    config = load_config(config_path)
    train = np.load(train_data, mmap_mode="r")
    valid = np.load(valid_data, mmap_mode="r")
    samples = sample_instances(config, train_rows=train.shape[0], valid_rows=valid.shape[0])

    scores = score_suite(config, samples, train_data, valid_data,
                         backend=backend, vocab_size=vocab_size, workers=workers)
    emit_panel(config, samples, scores, out_path)

    if manifest_path:
        digest = hashlib.sha256(Path(out_path).read_bytes()).hexdigest()
        write_manifest(
            run_manifest(config, samples, train_data, valid_data, backend, digest),
            manifest_path,
        )
    click.echo(
        f"wrote {len(samples)} instances x {len(config.checkpoints)} checkpoints to {out_path}"
    )


def main(argv: list[str] | None = None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.UsageError as exc:
        click.echo(f"usage error: {exc.format_message()}", err=True)
        return EXIT_USAGE
    except click.exceptions.Exit as exc:
        return int(exc.exit_code)
    except click.Abort:
        return 130
    except (CollectorError, ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_DATA
    return 0


if __name__ == "__main__":
    sys.exit(main())
