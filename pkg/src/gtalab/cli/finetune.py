from pathlib import Path

import click

from gtalab.cli.manifest import resolve_options
from gtalab.cli.options import (
    common_options,
    data_option,
    guidance_from,
    guidance_options,
    load_split,
    open_storage,
    prepare_out,
    require,
    source_option,
    storage_options,
    train_config_from,
    train_options,
)
from gtalab.data import subset_per_class
from gtalab.train import finetune as run_finetune
from gtalab.train import init_target, load_checkpoint, save_checkpoint

TARGET_FILE = "target.gtac"


@click.command()
@common_options("runs/finetune")
@source_option
@data_option
@click.option("--rate", default=1.0, type=float, help="Per-class sampling rate (default: 1.0).")
@guidance_options
@train_options
@storage_options
@click.pass_context
def finetune(ctx: click.Context, manifest: str | None, **_):
    """Fine-tune a copy of the source model on the train split."""
    opts, resolved = resolve_options(ctx, manifest)
    source = load_checkpoint(require(opts, "source")).model()
    data = require(opts, "data")
    train_set = subset_per_class(load_split(data, "train"), opts["rate"], opts["seed"])
    test_set = load_split(data, "test", num_classes=train_set.num_classes)
    config = train_config_from(opts, guidance_from(opts))
    resolved.set("guidance", "lambda", config.guidance.lam)
    out = prepare_out(opts["out"], resolved, opts["seed"], command="finetune")
    target = init_target(source, train_set.num_classes, config.seed)
    model, report = run_finetune(
        source,
        target,
        train_set,
        test_set,
        config,
        out_dir=out,
        storage=open_storage(opts, out),
        mass_fraction=opts["mass_fraction"],
        tags={"rate": opts["rate"]},
    )
    path = save_checkpoint(
        model,
        Path(out) / TARGET_FILE,
        rng_state={"seed": config.seed, "steps_taken": config.iterations},
        train_config=config.to_dict(),
    )
    summary = report.summary or {}
    click.echo(f"Target checkpoint: {path}")
    click.echo(f"Test accuracy: {summary.get('final_test_acc', float('nan')):.4f}")
