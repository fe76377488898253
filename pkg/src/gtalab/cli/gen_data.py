from pathlib import Path

import click

from gtalab.cli.manifest import resolve_options
from gtalab.cli.options import SPLIT_DIRS, common_options, prepare_out
from gtalab.core.enums import Split
from gtalab.core.types import SyntheticSpec, ViTConfig
from gtalab.data import export_dataset, generate_synthetic_dataset

# textures when --num-textures is unset; raised to one per class when there are more classes
DEFAULT_TEXTURES = 8


@click.command("gen-data")
@common_options("data")
@click.option("--classes", default=8, type=int, help="Number of classes (default: 8).")
@click.option("--per-class", default=40, type=int, help="Samples per class in each split (default: 40).")
@click.option("--test-per-class", default=None, type=int, help="Samples per class in the test split.")
@click.option("--image-size", default=None, type=int, help="Image side (default: from --config-size).")
@click.option("--rho", default=0.95, type=float, help="Train background/class correlation (default: 0.95).")
@click.option(
    "--num-textures", default=None, type=int, help="Background textures, at least --classes (default: 8)."
)
@click.option("--noise", default=0.03, type=float, help="Pixel noise standard deviation (default: 0.03).")
@click.pass_context
def gen_data(ctx: click.Context, manifest: str | None, **_):
    """Write the upstream, train and test splits of the synthetic dataset."""
    opts, resolved = resolve_options(ctx, manifest)
    image_size = opts["image_size"] or ViTConfig.PRESETS[opts["config_size"]]["image_size"]
    num_textures = opts["num_textures"]
    if num_textures is None:
        num_textures = max(DEFAULT_TEXTURES, opts["classes"])
    spec = SyntheticSpec(
        classes=opts["classes"],
        per_class=opts["per_class"],
        image_size=image_size,
        rho=opts["rho"],
        num_textures=num_textures,
        noise=opts["noise"],
    )
    out = prepare_out(opts["out"], resolved, opts["seed"], command="gen-data", spec=spec.to_dict())
    for split, dirname in SPLIT_DIRS.items():
        split_spec = spec
        if split == Split.TEST and opts["test_per_class"]:
            split_spec = SyntheticSpec(**{**spec.to_dict(), "per_class": opts["test_per_class"]})
        dataset = generate_synthetic_dataset(split_spec, opts["seed"], split)
        export_dataset(dataset, Path(out) / dirname)
        click.echo(f"{dirname}: {len(dataset)} samples")
