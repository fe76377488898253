import asyncio
import functools as ft
import json
import subprocess
from importlib import metadata
from pathlib import Path
from typing import Any

RUN_METADATA_FILE = "run.json"


def build_id() -> str:
    """
    Identifier of the code that produced an output.

    :return: `git describe --always --dirty` when run from a checkout, else the package version.
    """
    try:
        result = subprocess.run(
            ["git", "describe", "--always", "--dirty"],  # noqa: S607
            capture_output=True,
            text=True,
            check=True,
            cwd=Path(__file__).resolve().parent,
            timeout=10,
        )
        return result.stdout.strip()
    except (OSError, subprocess.SubprocessError):
        try:
            return metadata.version("gtalab")
        except metadata.PackageNotFoundError:
            return "unknown"


def write_run_metadata(out_dir: str | Path, seed: int, **extra: Any) -> Path:
    """
    Write run.json (build identifier and seed) into an output directory.

    :param out_dir: Output directory, created when missing.
    :param seed: Seed of the run.
    :return: Path of the written file.
    """
    path = Path(out_dir) / RUN_METADATA_FILE
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {"build": build_id(), "seed": seed, **extra}
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def async_cmd(func):
    @ft.wraps(func)
    def wrapper(*args, **kwargs):
        return asyncio.run(func(*args, **kwargs))

    return wrapper
