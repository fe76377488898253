"""
Methods x sampling rates x seeds comparison matrix.

Every (method, rate, lambda, seed) combination is one fine-tuning run with
its own output directory under runs/. The matrix keeps, per method and
rate, the lambda with the best mean test accuracy over seeds.
"""

import asyncio
import logging
import math
from asyncio import create_task, gather
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any

import click
import matplotlib as mpl
import pandas as pd

from gtalab.cli.manifest import ExperimentManifest, resolve_options
from gtalab.cli.options import (
    common_options,
    data_option,
    default_lambda,
    load_split,
    open_storage,
    prepare_out,
    require,
    source_option,
    storage_options,
    train_config_from,
    train_options,
)
from gtalab.core.constants import LAMBDA_SWEEP, DEFAULT_RATES
from gtalab.core.enums import FreezePolicy, GuidanceMethod
from gtalab.core.errors import GtaLabError
from gtalab.core.types import Dataset, GuidanceSpec
from gtalab.data import subset_per_class
from gtalab.model.vit import ViTModel
from gtalab.persistence.storage import ExperimentStorage
from gtalab.train import finetune, init_target, load_checkpoint, save_checkpoint
from gtalab.utils import async_cmd

logger = logging.getLogger(__name__)

MATRIX_FILE = "compare.csv"
SWEEP_FILE = "lambda_sweep.csv"
PLOT_FILE = "lambda_sweep.png"
FAILURES_FILE = "compare_failures.csv"
MATRIX_COLUMNS = ["method", "rate", "mean_acc", "std_acc", "mean_jaccard", "best_lambda"]
# "sweep" is an alias of "paper"
LAMBDA_GRIDS = ("single", "alpha", "paper", "sweep")
SWEEP_KEYS = (("guidance", "methods"), ("guidance", "lambda_grid"), ("train", "seeds"), ("eval", "rates"))


@dataclass(frozen=True)
class MethodSpec:
    method: GuidanceMethod
    freeze: FreezePolicy = FreezePolicy.NONE

    @property
    def label(self) -> str:
        if self.freeze == FreezePolicy.NONE:
            return self.method.value
        return f"{self.method.value}:{self.freeze.value}"

    @classmethod
    def parse(cls, text: str) -> "MethodSpec":
        name, _, freeze = text.partition(":")
        return cls(GuidanceMethod.parse(name), FreezePolicy(freeze or "none"))


@dataclass(frozen=True)
class Job:
    spec: MethodSpec
    rate: float
    lam: float
    seed: int
    out_dir: Path


def _parse_methods(ctx, param, value):
    try:
        return tuple(MethodSpec.parse(v).label for v in value)
    except ValueError as e:
        msg = f"{e}; use METHOD or METHOD:FREEZE, e.g. gta or none:attention-only"
        raise click.BadParameter(msg, ctx=ctx, param=param) from e


def lambda_grid(method: GuidanceMethod, mode: str, lam: float | None) -> list[float]:
    """
    Lambdas tried for one method. The baseline only runs at 0; otherwise the
    single value, 0.1x/1x/10x alpha, or the fixed grid.
    """
    if method == GuidanceMethod.NONE:
        return [0.0]
    alpha = default_lambda(method) if lam is None else lam
    if mode in ("paper", "sweep"):
        return list(LAMBDA_SWEEP)
    if mode == "alpha":
        return [0.1 * alpha, alpha, 10.0 * alpha]
    return [alpha]


def _run_name(job: Job) -> str:
    return f"{job.spec.label.replace(':', '+')}_r{job.rate:g}_l{job.lam:g}_s{job.seed}"


class CompareRunner:
    """Runs the jobs of one comparison against shared, read-only datasets."""

    def __init__(  # noqa: PLR0913
        self,
        opts: dict[str, Any],
        manifest: ExperimentManifest,
        source: ViTModel,
        train_set: Dataset,
        test_set: Dataset,
        storage: ExperimentStorage | None,
    ):
        self.opts = opts
        self.manifest = manifest
        self.source = source
        self.train_set = train_set
        self.test_set = test_set
        self.storage = storage

    def jobs(self, out: Path) -> list[Job]:
        jobs = []
        for label in self.opts["methods"]:
            spec = MethodSpec.parse(label)
            for rate in self.opts["rates"]:
                for lam in lambda_grid(spec.method, self.opts["lambda_grid"], self.opts["lam"]):
                    for seed in self.opts["seeds"]:
                        job = Job(spec=spec, rate=rate, lam=lam, seed=seed, out_dir=out)
                        jobs.append(replace(job, out_dir=out / "runs" / _run_name(job)))
        return jobs

    def _run_manifest(self, job: Job) -> ExperimentManifest:
        manifest = ExperimentManifest(self.manifest.values)
        for section, key in SWEEP_KEYS:
            manifest.values[section].pop(key, None)
        manifest.set("guidance", "method", job.spec.method)
        manifest.set("guidance", "freeze", job.spec.freeze)
        manifest.set("guidance", "lambda", job.lam)
        manifest.set("data", "rate", job.rate)
        manifest.set("train", "seed", job.seed)
        manifest.set("output", "out", job.out_dir)
        return manifest

    def run(self, job: Job) -> dict[str, Any]:
        result = {"method": job.spec.label, "rate": job.rate, "lambda": job.lam, "seed": job.seed}
        try:
            prepare_out(job.out_dir, self._run_manifest(job), job.seed, command="finetune")
            guidance = GuidanceSpec(method=job.spec.method, lam=job.lam, freeze_policy=job.spec.freeze)
            config = train_config_from({**self.opts, "seed": job.seed}, guidance)
            train_set = subset_per_class(self.train_set, job.rate, job.seed)
            target = init_target(self.source, train_set.num_classes, job.seed)
            model, report = finetune(
                self.source,
                target,
                train_set,
                self.test_set,
                config,
                out_dir=job.out_dir,
                storage=self.storage,
                mass_fraction=self.opts["mass_fraction"],
                tags={"rate": job.rate},
            )
            save_checkpoint(model, job.out_dir / "target.gtac", train_config=config.to_dict())
        except (GtaLabError, OSError) as e:
            msg = f"Run {job.out_dir.name} failed: {e}"
            logger.error(msg)
            return {**result, "status": "failed", "error": str(e)}
        summary = report.summary or {}
        return {
            **result,
            "status": "completed",
            "test_acc": summary.get("final_test_acc"),
            "jaccard": summary.get("final_jaccard"),
        }


def summarize(
    results: pd.DataFrame, methods: list[str], rates: list[float]
) -> tuple[pd.DataFrame, pd.DataFrame]:
    """Per (method, rate): best lambda by mean test accuracy and the seed statistics at that lambda."""
    done = results[results["status"] == "completed"]
    sweep = (
        done.groupby(["method", "rate", "lambda"], sort=True)
        .agg(
            mean_acc=("test_acc", "mean"),
            std_acc=("test_acc", lambda s: s.std(ddof=0)),
            mean_jaccard=("jaccard", "mean"),
        )
        .reset_index()
    )
    rows = []
    for method in methods:
        for rate in rates:
            cell = sweep[(sweep["method"] == method) & (sweep["rate"] == rate)]
            if cell.empty:
                rows.append({"method": method, "rate": rate})
                continue
            best = cell.loc[cell["mean_acc"].idxmax()]
            rows.append(
                {
                    "method": method,
                    "rate": rate,
                    "mean_acc": best["mean_acc"],
                    "std_acc": best["std_acc"],
                    "mean_jaccard": best["mean_jaccard"],
                    "best_lambda": best["lambda"],
                }
            )
    return pd.DataFrame(rows, columns=MATRIX_COLUMNS), sweep


def plot_sweep(sweep: pd.DataFrame, path: Path) -> Path:
    mpl.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    for (method, rate), group in sweep.groupby(["method", "rate"], sort=True):
        if (group["lambda"] > 0).any():
            group = group[group["lambda"] > 0]
            ax.plot(group["lambda"], group["mean_acc"], marker="o", label=f"{method} @ {rate:g}")
        else:
            ax.axhline(group["mean_acc"].iloc[0], linestyle="--", linewidth=1, label=f"{method} @ {rate:g}")
    ax.set_xscale("log")
    ax.set_xlabel("lambda")
    ax.set_ylabel("test accuracy")
    if ax.get_legend_handles_labels()[0]:
        ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(path, dpi=100, metadata={"Software": None})
    plt.close(fig)
    return path


@click.command()
@common_options("runs/compare")
@source_option
@data_option
@click.option(
    "--methods",
    "-m",
    multiple=True,
    default=("none", "gta"),
    callback=_parse_methods,
    help="METHOD or METHOD:FREEZE, repeatable (default: none and gta).",
)
@click.option("--rates", multiple=True, type=float, default=DEFAULT_RATES, help="Per-class sampling rates.")
@click.option("--seeds", multiple=True, type=int, default=(0, 1, 2), help="Seeds per cell (default: 0 1 2).")
@click.option("--lambda", "lam", default=None, type=float, help="Lambda, or alpha of the alpha grid.")
@click.option("--lambda-grid", default="single", type=click.Choice(LAMBDA_GRIDS), help="Lambda selection.")
@click.option("--transmix/--no-transmix", default=False, help="TransMix label mixing in every run.")
@click.option("--transmix-prob", default=1.0, type=float, help="Probability of mixing a batch.")
@click.option("--transmix-fraction", default=None, type=float, help="Fixed box area fraction.")
@click.option("--parallel", default=1, type=int, help="Runs executed concurrently (default: 1).")
@train_options
@storage_options
@click.pass_context
@async_cmd
async def compare(ctx: click.Context, manifest: str | None, **_):
    """Fine-tune every method at every sampling rate and seed, then write the comparison matrix."""
    opts, resolved = resolve_options(ctx, manifest)
    if opts["parallel"] < 1:
        msg = "--parallel must be at least 1"
        raise click.UsageError(msg)
    try:
        opts["methods"] = tuple(MethodSpec.parse(m).label for m in opts["methods"])
    except ValueError as e:
        msg = f"Invalid method in manifest: {e}"
        raise click.UsageError(msg) from e
    source = load_checkpoint(require(opts, "source")).model()
    data = require(opts, "data")
    train_set = load_split(data, "train")
    test_set = load_split(data, "test", num_classes=train_set.num_classes)
    out = prepare_out(opts["out"], resolved, opts["seed"], command="compare")
    runner = CompareRunner(opts, resolved, source, train_set, test_set, open_storage(opts, out))
    jobs = runner.jobs(out)
    click.echo(f"Running {len(jobs)} fine-tuning runs ({opts['parallel']} at a time)")

    semaphore = asyncio.Semaphore(opts["parallel"])

    async def run_job(job: Job) -> dict[str, Any]:
        async with semaphore:
            return await asyncio.to_thread(runner.run, job)

    results = pd.DataFrame(await gather(*[create_task(run_job(job)) for job in jobs]))
    for column in ("test_acc", "jaccard", "error"):
        if column not in results:
            results[column] = None
    results["test_acc"] = pd.to_numeric(results["test_acc"])
    results["jaccard"] = pd.to_numeric(results["jaccard"])
    matrix, sweep = summarize(results, list(opts["methods"]), list(opts["rates"]))
    matrix.to_csv(out / MATRIX_FILE, index=False)
    sweep.to_csv(out / SWEEP_FILE, index=False)
    if not sweep.empty:
        plot_sweep(sweep, out / PLOT_FILE)
    click.echo(matrix.to_string(index=False))

    failed = results[results["status"] == "failed"]
    if not failed.empty:
        failed[["method", "rate", "lambda", "seed", "error"]].to_csv(out / FAILURES_FILE, index=False)
        msg = f"{len(failed)} of {len(results)} runs failed; see {out / FAILURES_FILE}"
        raise click.ClickException(msg)
    if any(math.isnan(v) for v in matrix["mean_acc"].astype(float)):
        msg = "Comparison matrix has empty cells"
        raise click.ClickException(msg)
