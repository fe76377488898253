import click
import pytest
from click.testing import CliRunner

from gtalab.cli.manifest import MANIFEST_FILE, ExperimentManifest, format_value, resolve_options
from gtalab.core.enums import GuidanceMethod
from gtalab.core.errors import ConfigError


@click.command()
@click.option("--iterations", default=1500, type=int)
@click.option("--lr", default=1e-3, type=float)
@click.option("--rates", multiple=True, type=float, default=(1.0,))
@click.option("--augment/--no-augment", default=True)
@click.option("--verbose", is_flag=True, default=False)
@click.option("--manifest", default=None)
@click.pass_context
def echo_options(ctx, manifest, **_):
    opts, resolved = resolve_options(ctx, manifest)
    click.echo(repr(opts))
    click.echo(resolved.to_text())


class TestExperimentManifest:
    """Test reading and writing INI experiment manifests."""

    def test_read_and_write(self, tmp_path):
        path = tmp_path / "in.ini"
        path.write_text("[train]\niterations = 10\n[guidance]\nmethod = gta\n", encoding="utf-8")
        manifest = ExperimentManifest.read(path)
        assert manifest.get("train", "iterations") == "10"
        assert manifest.get("data", "dir") is None
        written = manifest.write(tmp_path / "out")
        assert written.name == MANIFEST_FILE
        assert ExperimentManifest.read(written).values == manifest.values

    def test_text_is_sorted(self):
        manifest = ExperimentManifest({"train": {"seed": 1, "iterations": 5}})
        assert manifest.to_text() == "[train]\niterations = 5\nseed = 1\n"

    def test_unknown_section(self, tmp_path):
        path = tmp_path / "bad.ini"
        path.write_text("[optimizer]\nlr = 1\n", encoding="utf-8")
        with pytest.raises(ConfigError, match="optimizer"):
            ExperimentManifest.read(path)

    def test_malformed_file(self, tmp_path):
        path = tmp_path / "bad.ini"
        path.write_text("lr = 1\n", encoding="utf-8")
        with pytest.raises(ConfigError, match="malformed"):
            ExperimentManifest.read(path)

    @pytest.mark.parametrize(
        ("value", "text"),
        [(True, "true"), (False, "false"), ((0.5, 1.0), "0.5,1.0"), (GuidanceMethod.GTA, "gta"), (3, "3")],
    )
    def test_format_value(self, value, text):
        assert format_value(value) == text


class TestResolveOptions:
    """Test precedence of flags, manifest values and defaults."""

    @pytest.fixture
    def runner(self):
        return CliRunner()

    @pytest.fixture
    def manifest_path(self, tmp_path):
        path = tmp_path / "run.ini"
        text = "[train]\niterations = 20\nlr = 0.01\naugment = false\n[eval]\nrates = 0.15,0.5\n"
        path.write_text(text, encoding="utf-8")
        return str(path)

    def test_defaults_without_manifest(self, runner):
        result = runner.invoke(echo_options, [])
        assert result.exit_code == 0
        assert "'iterations': 1500" in result.output

    def test_manifest_fills_unset_options(self, runner, manifest_path):
        result = runner.invoke(echo_options, ["--manifest", manifest_path])
        assert result.exit_code == 0, result.output
        assert "'iterations': 20" in result.output
        assert "'lr': 0.01" in result.output
        assert "'augment': False" in result.output
        assert "'rates': (0.15, 0.5)" in result.output
        assert "rates = 0.15,0.5" in result.output

    def test_flags_override_manifest(self, runner, manifest_path):
        result = runner.invoke(echo_options, ["--manifest", manifest_path, "--iterations", "7", "--augment"])
        assert "'iterations': 7" in result.output
        assert "'augment': True" in result.output
        assert "iterations = 7" in result.output

    def test_environment_counts_as_explicit(self, runner, manifest_path):
        env = {"ECHO_ITERATIONS": "9"}
        result = runner.invoke(
            echo_options, ["--manifest", manifest_path], env=env, auto_envvar_prefix="ECHO"
        )
        assert "'iterations': 9" in result.output

    def test_invalid_manifest_value(self, runner, tmp_path):
        path = tmp_path / "run.ini"
        path.write_text("[train]\niterations = many\n", encoding="utf-8")
        result = runner.invoke(echo_options, ["--manifest", str(path)])
        assert isinstance(result.exception, ConfigError)
        assert "train.iterations" in str(result.exception)

    def test_unmapped_options_pass_through(self, runner):
        result = runner.invoke(echo_options, ["--verbose"])
        assert "'verbose': True" in result.output
