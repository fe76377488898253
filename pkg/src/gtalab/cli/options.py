"""Options and helpers shared by the gtalab subcommands."""

import logging
from pathlib import Path
from typing import Any

import click

from gtalab.core.constants import DEFAULT_ALPHA, DEFAULT_MASS_FRACTION
from gtalab.core.enums import FreezePolicy, GuidanceMethod, MapMode, Split
from gtalab.core.errors import ConfigError
from gtalab.core.types import Dataset, GuidanceSpec, ViTConfig
from gtalab.data import load_image_dir
from gtalab.persistence.storage import ExperimentStorage
from gtalab.train.config import TrainConfig
from gtalab.utils import write_run_metadata

logger = logging.getLogger(__name__)

METHOD_ALIASES = ["gta-attn-logits", "msa-output-guide", "block-output-guide"]
METHOD_CHOICES = [m.value for m in GuidanceMethod] + METHOD_ALIASES


def _stack(*decorators):
    def apply(func):
        for decorator in reversed(decorators):
            func = decorator(func)
        return func

    return apply


def common_options(default_out: str):
    return _stack(
        click.option("--seed", default=0, type=int, envvar="GTALAB_SEED", help="Run seed (default: 0)."),
        click.option(
            "--out",
            default=default_out,
            type=click.Path(file_okay=False),
            envvar="GTALAB_OUT",
            help=f"Output directory (default: {default_out}).",
        ),
        click.option(
            "--manifest",
            default=None,
            type=click.Path(exists=True, dir_okay=False),
            help="Experiment manifest (INI); explicit flags override its values.",
        ),
        click.option(
            "--config-size",
            default="tiny",
            type=click.Choice(sorted(ViTConfig.PRESETS)),
            envvar="GTALAB_CONFIG_SIZE",
            help="Model size preset (default: tiny).",
        ),
    )


def train_options(func):
    return _stack(
        click.option("--iterations", default=1500, type=int, help="Optimizer steps (default: 1500)."),
        click.option("--batch-size", default=32, type=int, help="Mini-batch size (default: 32)."),
        click.option("--lr", default=1e-3, type=float, help="Base learning rate (default: 1e-3)."),
        click.option("--weight-decay", default=0.05, type=float, help="Weight decay (default: 0.05)."),
        click.option("--beta1", default=0.9, type=float, help="AdamW beta1 (default: 0.9)."),
        click.option("--beta2", default=0.999, type=float, help="AdamW beta2 (default: 0.999)."),
        click.option("--adam-eps", default=1e-8, type=float, help="AdamW epsilon (default: 1e-8)."),
        click.option("--eval-interval", default=250, type=int, help="Steps between evals (default: 250)."),
        click.option("--log-interval", default=50, type=int, help="Steps between log lines (default: 50)."),
        click.option("--augment/--no-augment", default=True, help="Random flips and pad-and-crop."),
        click.option("--check-numerics", is_flag=True, default=False, help="Validate every op output."),
        click.option(
            "--mass-fraction",
            default=DEFAULT_MASS_FRACTION,
            type=float,
            help="Attention mass kept when thresholding maps (default: 0.6).",
        ),
    )(func)


def guidance_options(func):
    return _stack(
        click.option(
            "--method",
            default="none",
            type=click.Choice(METHOD_CHOICES),
            help="Regularizer: none, gta, msa-guide, block-guide or l2sp.",
        ),
        click.option(
            "--lambda",
            "lam",
            default=None,
            type=float,
            help="Regularization coefficient (default: the method's alpha).",
        ),
        click.option(
            "--freeze",
            default="none",
            type=click.Choice([p.value for p in FreezePolicy]),
            help="Parameter groups kept trainable.",
        ),
        click.option("--transmix/--no-transmix", default=False, help="TransMix label mixing."),
        click.option("--transmix-prob", default=1.0, type=float, help="Probability of mixing a batch."),
        click.option(
            "--transmix-fraction",
            default=None,
            type=float,
            help="Fixed box area fraction (default: drawn uniformly per step).",
        ),
    )(func)


def storage_options(func):
    return _stack(
        click.option("--save/--no-save", default=True, help="Record runs in the experiment database."),
        click.option(
            "--storage-url",
            default=None,
            envvar="GTALAB_STORAGE_URL",
            help="Database URL (default: sqlite:///<out>/experiments.db).",
        ),
    )(func)


def default_lambda(method: GuidanceMethod | str) -> float:
    return DEFAULT_ALPHA[GuidanceMethod.parse(method).value]


def guidance_from(opts: dict[str, Any]) -> GuidanceSpec:
    method = GuidanceMethod.parse(opts.get("method", "none"))
    lam = opts.get("lam")
    return GuidanceSpec(
        method=method,
        lam=default_lambda(method) if lam is None else lam,
        freeze_policy=FreezePolicy(opts.get("freeze", "none")),
    )


def train_config_from(opts: dict[str, Any], guidance: GuidanceSpec | None = None) -> TrainConfig:
    return TrainConfig(
        iterations=opts["iterations"],
        batch_size=opts["batch_size"],
        lr=opts["lr"],
        weight_decay=opts["weight_decay"],
        betas=(opts["beta1"], opts["beta2"]),
        eps=opts["adam_eps"],
        guidance=guidance or GuidanceSpec(),
        transmix=opts.get("transmix", False),
        transmix_prob=opts.get("transmix_prob", 1.0),
        transmix_fraction=opts.get("transmix_fraction"),
        augment=opts["augment"],
        seed=opts["seed"],
        eval_interval=opts["eval_interval"],
        log_interval=opts["log_interval"],
        check_numerics=opts["check_numerics"],
    )


def require(opts: dict[str, Any], name: str) -> Any:
    if opts.get(name) in (None, ""):
        flag = "--" + name.replace("_", "-")
        msg = f"Missing option '{flag}' (give it on the command line or in the manifest)."
        raise click.UsageError(msg)
    return opts[name]


SPLIT_DIRS = {Split.UPSTREAM_TRAIN: "upstream", Split.TRAIN: "train", Split.TEST: "test"}


def load_split(root: str | Path, split: str, num_classes: int | None = None) -> Dataset:
    """Load the split directory under root (or root itself); other directory names load as test data."""
    path = Path(root) / split
    if not path.is_dir():
        path = Path(root)
    by_dir = {dirname: value for value, dirname in SPLIT_DIRS.items()}
    return load_image_dir(path, num_classes=num_classes, split=by_dir.get(split, Split.TEST))


def model_config(config_size: str, dataset: Dataset) -> ViTConfig:
    config = ViTConfig.preset(config_size, num_classes=dataset.num_classes)
    image_size = dataset.samples[0].image.shape[-1]
    if image_size != config.image_size:
        msg = f"Dataset images are {image_size}px, config size {config_size} expects {config.image_size}px"
        raise ConfigError(msg)
    return config


def open_storage(opts: dict[str, Any], out_dir: Path) -> ExperimentStorage | None:
    if not opts.get("save"):
        return None
    out_dir.mkdir(parents=True, exist_ok=True)
    return ExperimentStorage(opts.get("storage_url") or f"sqlite:///{out_dir / 'experiments.db'}")


def prepare_out(out_dir: str | Path, manifest, seed: int, **extra: Any) -> Path:
    """Create the output directory and record the resolved manifest and run.json in it."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest.write(out_dir)
    write_run_metadata(out_dir, seed, **extra)
    return out_dir


MAP_MODE_CHOICE = click.Choice([m.value for m in MapMode])


def data_option(func):
    return click.option(
        "--data",
        default=None,
        type=click.Path(file_okay=False),
        help="Dataset root written by gen-data (or a single split directory).",
    )(func)


def source_option(func):
    return click.option(
        "--source",
        default=None,
        type=click.Path(exists=True, dir_okay=False),
        help="Source (pre-trained) checkpoint.",
    )(func)
