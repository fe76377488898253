from pathlib import Path

import click

from gtalab.cli.manifest import resolve_options
from gtalab.cli.options import (
    common_options,
    data_option,
    load_split,
    model_config,
    open_storage,
    prepare_out,
    require,
    storage_options,
    train_config_from,
    train_options,
)
from gtalab.train import pretrain_source, save_checkpoint

SOURCE_FILE = "source.gtac"


@click.command()
@common_options("runs/pretrain")
@data_option
@train_options
@storage_options
@click.pass_context
def pretrain(ctx: click.Context, manifest: str | None, **_):
    """Pre-train the source model with cross-entropy on the upstream split."""
    opts, resolved = resolve_options(ctx, manifest)
    dataset = load_split(require(opts, "data"), "upstream")
    vit_config = model_config(opts["config_size"], dataset)
    config = train_config_from(opts)
    out = prepare_out(opts["out"], resolved, opts["seed"], command="pretrain")
    model, report = pretrain_source(
        dataset,
        config,
        vit_config,
        out_dir=out,
        storage=open_storage(opts, out),
        mass_fraction=opts["mass_fraction"],
    )
    path = save_checkpoint(
        model,
        Path(out) / SOURCE_FILE,
        rng_state={"seed": config.seed, "steps_taken": config.iterations},
        train_config=config.to_dict(),
    )
    summary = report.summary or {}
    click.echo(f"Source checkpoint: {path}")
    click.echo(f"Upstream accuracy: {summary.get('final_test_acc', float('nan')):.4f}")
