import json
from pathlib import Path

import click

from gtalab.cli.manifest import resolve_options
from gtalab.cli.options import MAP_MODE_CHOICE, data_option, load_split, prepare_out, require
from gtalab.core.constants import DEFAULT_MASS_FRACTION
from gtalab.core.enums import MapMode
from gtalab.core.types import Dataset, Sample
from gtalab.evaluation import evaluate_model
from gtalab.train import load_checkpoint

EVAL_FILE = "eval.json"


def _without_masks(dataset: Dataset) -> Dataset:
    samples = [
        Sample(image=s.image, label=s.label, background_id=s.background_id, name=s.name) for s in dataset
    ]
    return Dataset(samples=samples, split=dataset.split, num_classes=dataset.num_classes)


@click.command("eval")
@click.option(
    "--checkpoint",
    default=None,
    type=click.Path(exists=True, dir_okay=False),
    help="Checkpoint of the model to evaluate.",
)
@data_option
@click.option("--split", default="test", help="Split directory under --data (default: test).")
@click.option(
    "--source",
    default=None,
    type=click.Path(exists=True, dir_okay=False),
    help="Source checkpoint for [cls]-logit drift statistics.",
)
@click.option("--mass-fraction", default=DEFAULT_MASS_FRACTION, type=float, help="Kept attention mass.")
@click.option("--map-mode", default=MapMode.FINAL_BLOCK.value, type=MAP_MODE_CHOICE, help="Map mode.")
@click.option("--masks/--no-masks", default=True, help="Use ground-truth masks for Jaccard and mass metrics.")
@click.option("--out", default=None, type=click.Path(file_okay=False), help="Also write eval.json here.")
@click.option("--manifest", default=None, type=click.Path(exists=True, dir_okay=False), help="Manifest.")
@click.pass_context
def evaluate(ctx: click.Context, manifest: str | None, **_):
    """Evaluate a checkpoint and print one JSON line with its metrics."""
    opts, resolved = resolve_options(ctx, manifest)
    model = load_checkpoint(require(opts, "checkpoint")).model()
    dataset = load_split(require(opts, "data"), opts["split"], num_classes=model.config.num_classes)
    if not opts["masks"]:
        dataset = _without_masks(dataset)
    source = load_checkpoint(opts["source"]).model() if opts["source"] else None
    record = evaluate_model(
        model,
        dataset,
        source=source,
        mass_fraction=opts["mass_fraction"],
        map_mode=MapMode(opts["map_mode"]),
    )
    line = json.dumps({"samples": len(dataset), **record.to_dict()}, sort_keys=True)
    if opts["out"]:
        out = prepare_out(opts["out"], resolved, 0, command="eval")
        (Path(out) / EVAL_FILE).write_text(line + "\n", encoding="utf-8")
    click.echo(line)
