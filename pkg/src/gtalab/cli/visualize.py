from pathlib import Path

import click

from gtalab.cli.manifest import resolve_options
from gtalab.cli.options import MAP_MODE_CHOICE, data_option, load_split, prepare_out, require
from gtalab.core.enums import MapMode
from gtalab.evaluation import attention_map, emit_overlay
from gtalab.ndtensor import no_grad
from gtalab.train import load_checkpoint

CHECKPOINT_LABELS = ("pretrained", "finetuned", "guided")
_checkpoint_path = click.Path(exists=True, dir_okay=False)


@click.command()
@click.option("--pretrained", default=None, type=_checkpoint_path, help="Source checkpoint.")
@click.option("--finetuned", default=None, type=_checkpoint_path, help="Unguided fine-tuned checkpoint.")
@click.option("--guided", default=None, type=_checkpoint_path, help="Checkpoint fine-tuned with guidance.")
@data_option
@click.option("--split", default="test", help="Split directory under --data (default: test).")
@click.option("--index", "indices", multiple=True, type=int, default=(0,), help="Sample index, repeatable.")
@click.option("--map-mode", default=MapMode.ALL_BLOCKS_MAX.value, type=MAP_MODE_CHOICE, help="Map mode.")
@click.option("--out", default="runs/visualize", type=click.Path(file_okay=False), help="Output directory.")
@click.option("--manifest", default=None, type=click.Path(exists=True, dir_okay=False), help="Manifest file.")
@click.pass_context
def visualize(ctx: click.Context, manifest: str | None, **_):
    """Write [cls] attention overlays as <checkpoint>_sample<index>.ppm."""
    opts, resolved = resolve_options(ctx, manifest)
    checkpoints = {label: opts[label] for label in CHECKPOINT_LABELS if opts[label]}
    if not checkpoints:
        msg = "Give at least one of --pretrained, --finetuned, --guided"
        raise click.UsageError(msg)
    dataset = load_split(require(opts, "data"), opts["split"])
    for index in opts["indices"]:
        if not 0 <= index < len(dataset):
            msg = f"--index {index} is out of range for {len(dataset)} samples"
            raise click.UsageError(msg)
    out = prepare_out(opts["out"], resolved, 0, command="visualize")
    mode = MapMode(opts["map_mode"])
    for label, path in checkpoints.items():
        model = load_checkpoint(path).model()
        for index in opts["indices"]:
            image = dataset.samples[index].image
            with no_grad():
                _, trace = model.forward(image, capture=True)
            target = Path(out) / f"{label}_sample{index}.ppm"
            written = emit_overlay(image, attention_map(trace, mode), target)
            click.echo(str(written))
