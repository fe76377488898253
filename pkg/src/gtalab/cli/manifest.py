"""
Experiment manifests: UTF-8 INI files with [data] [model] [train]
[guidance] [eval] [output] sections.

Command-line flags given explicitly (or through GTALAB_* environment
variables) override manifest values; everything else falls back to the
manifest, then to the option default. The resolved values are written
back as manifest.ini next to the run outputs.
"""

import configparser
from collections.abc import Mapping
from pathlib import Path
from typing import Any

import click
from click.core import ParameterSource

from gtalab.core.errors import ConfigError

SECTIONS = ("data", "model", "train", "guidance", "eval", "output")
MANIFEST_FILE = "manifest.ini"
_EXPLICIT_SOURCES = (ParameterSource.COMMANDLINE, ParameterSource.ENVIRONMENT)

# click parameter name -> (section, key)
PARAM_KEYS: dict[str, tuple[str, str]] = {
    "data": ("data", "dir"),
    "rate": ("data", "rate"),
    "classes": ("data", "classes"),
    "per_class": ("data", "per_class"),
    "test_per_class": ("data", "test_per_class"),
    "image_size": ("data", "image_size"),
    "rho": ("data", "rho"),
    "num_textures": ("data", "num_textures"),
    "noise": ("data", "noise"),
    "masks": ("data", "masks"),
    "config_size": ("model", "config_size"),
    "source": ("model", "source"),
    "checkpoint": ("model", "checkpoint"),
    "seed": ("train", "seed"),
    "seeds": ("train", "seeds"),
    "iterations": ("train", "iterations"),
    "batch_size": ("train", "batch_size"),
    "lr": ("train", "lr"),
    "weight_decay": ("train", "weight_decay"),
    "beta1": ("train", "beta1"),
    "beta2": ("train", "beta2"),
    "adam_eps": ("train", "eps"),
    "eval_interval": ("train", "eval_interval"),
    "log_interval": ("train", "log_interval"),
    "augment": ("train", "augment"),
    "check_numerics": ("train", "check_numerics"),
    "method": ("guidance", "method"),
    "methods": ("guidance", "methods"),
    "lam": ("guidance", "lambda"),
    "lambda_grid": ("guidance", "lambda_grid"),
    "freeze": ("guidance", "freeze"),
    "transmix": ("guidance", "transmix"),
    "transmix_prob": ("guidance", "transmix_prob"),
    "transmix_fraction": ("guidance", "transmix_fraction"),
    "mass_fraction": ("eval", "mass_fraction"),
    "map_mode": ("eval", "map_mode"),
    "rates": ("eval", "rates"),
    "out": ("output", "out"),
}


class ExperimentManifest:
    def __init__(self, values: Mapping[str, Mapping[str, str]] | None = None):
        self.values: dict[str, dict[str, str]] = {section: {} for section in SECTIONS}
        for section, entries in (values or {}).items():
            if section not in SECTIONS:
                msg = f"Unknown manifest section [{section}]; expected one of {', '.join(SECTIONS)}"
                raise ConfigError(msg)
            self.values[section].update({key: str(value) for key, value in entries.items()})

    @classmethod
    def read(cls, path: str | Path) -> "ExperimentManifest":
        parser = configparser.ConfigParser(interpolation=None)
        try:
            with Path(path).open(encoding="utf-8") as f:
                parser.read_file(f)
        except configparser.Error as e:
            msg = f"{path}: malformed manifest ({e})"
            raise ConfigError(msg) from e
        return cls({section: dict(parser.items(section)) for section in parser.sections()})

    def get(self, section: str, key: str) -> str | None:
        return self.values.get(section, {}).get(key)

    def set(self, section: str, key: str, value: Any) -> None:
        self.values[section][key] = format_value(value)

    def to_text(self) -> str:
        lines = []
        for section in SECTIONS:
            entries = self.values[section]
            if not entries:
                continue
            lines.append(f"[{section}]")
            lines.extend(f"{key} = {entries[key]}" for key in sorted(entries))
            lines.append("")
        return "\n".join(lines)

    def write(self, out_dir: str | Path) -> Path:
        path = Path(out_dir) / MANIFEST_FILE
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_text(), encoding="utf-8")
        return path


def format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple | list):
        return ",".join(format_value(v) for v in value)
    if hasattr(value, "value"):
        return str(value.value)
    return str(value)


def resolve_options(
    ctx: click.Context, manifest_path: str | None
) -> tuple[dict[str, Any], ExperimentManifest]:
    """
    Merge the command's parameters with a manifest file. Returns the resolved
    parameter values and the manifest holding them.
    """
    manifest = ExperimentManifest.read(manifest_path) if manifest_path else ExperimentManifest()
    params = {param.name: param for param in ctx.command.params}
    resolved: dict[str, Any] = {}
    for name, value in ctx.params.items():
        if name not in PARAM_KEYS:
            resolved[name] = value
            continue
        explicit = ctx.get_parameter_source(name) in _EXPLICIT_SOURCES
        raw = manifest.get(*PARAM_KEYS[name])
        if explicit or raw is None or raw == "":
            resolved[name] = value
            continue
        param = params[name]
        raw_value = raw.split(",") if param.multiple else raw
        try:
            resolved[name] = param.type_cast_value(ctx, raw_value)
        except click.BadParameter as e:
            section, key = PARAM_KEYS[name]
            msg = f"Manifest value {section}.{key}={raw!r} is invalid: {e.message}"
            raise ConfigError(msg) from e

    out_manifest = ExperimentManifest()
    for name, value in resolved.items():
        if name in PARAM_KEYS and value is not None and value != ():
            out_manifest.set(*PARAM_KEYS[name], value)
    return resolved, out_manifest
