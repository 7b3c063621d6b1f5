"""Tests for figure rendering, including the acceptance check (A10)."""

import hashlib
import json
import subprocess
import sys

import pytest

from figure_scripts import FigureKind, FigureSpec, SchemaError, build_figure, render
from figure_scripts.render import _should_use_log_scale


def run_primary(*args):
    proc = subprocess.run(
        [sys.executable, "-m", "balanced_is.cli", *args],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    return proc


@pytest.fixture(scope="session")
def exponential_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("expo-results")
    run_primary(
        "synth", "--family", "exponential", "--params", "1.3,10",
        "--ladder", "10,100,200,400,500,550", "--n", "200", "--reps", "12",
        "--seed", "3", "--out", str(out),
    )
    return out


@pytest.fixture(scope="session")
def saw_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("saw-results")
    run_primary(
        "saw-exp", "--m", "2", "--policy", "q1",
        "--ladder", "4,16,64,256", "--n", "150", "--reps", "8",
        "--seed", "3", "--out", str(out),
    )
    return out


def file_hash(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


class TestRenderAcceptance:
    """A10: violin/MSE/MAD images for the exponential and SAW result
    directories, deterministic bytes across reruns."""

    @pytest.mark.parametrize("kind", list(FigureKind))
    def test_exponential_directory(self, exponential_dir, tmp_path, kind):
        spec = FigureSpec.for_directory(
            exponential_dir, kind, tmp_path / f"expo-{kind.value}.png"
        )
        path = render(spec)
        assert path.exists() and path.stat().st_size > 2000

    @pytest.mark.parametrize("kind", list(FigureKind))
    def test_saw_directory(self, saw_dir, tmp_path, kind):
        spec = FigureSpec.for_directory(
            saw_dir, kind, tmp_path / f"saw-{kind.value}.png"
        )
        path = render(spec)
        assert path.exists() and path.stat().st_size > 2000

    @pytest.mark.parametrize("kind", list(FigureKind))
    def test_deterministic_bytes(self, exponential_dir, tmp_path, kind):
        a = render(
            FigureSpec.for_directory(exponential_dir, kind, tmp_path / "a.png")
        )
        b = render(
            FigureSpec.for_directory(exponential_dir, kind, tmp_path / "b.png")
        )
        assert a.read_bytes() == b.read_bytes()

    def test_inputs_never_mutated(self, exponential_dir, tmp_path):
        before = {
            name: file_hash(exponential_dir / name)
            for name in ("estimates.csv", "summary.csv", "meta.json")
        }
        for kind in FigureKind:
            render(FigureSpec.for_directory(exponential_dir, kind, tmp_path / "x.png"))
        after = {
            name: file_hash(exponential_dir / name)
            for name in ("estimates.csv", "summary.csv", "meta.json")
        }
        assert before == after


class TestRenderEdgeCases:
    @pytest.fixture
    def empty_dir(self, tmp_path):
        (tmp_path / "estimates.csv").write_text(
            "family,param,estimator,replication,estimate,chosen_level\n"
        )
        (tmp_path / "summary.csv").write_text("family,param,estimator,mse,mad\n")
        (tmp_path / "meta.json").write_text(json.dumps({"truths": {}}))
        return tmp_path

    @pytest.mark.parametrize("kind", list(FigureKind))
    def test_header_only_inputs_render_empty_axes(self, empty_dir, tmp_path, kind):
        path = render(FigureSpec.for_directory(empty_dir, kind, tmp_path / "e.png"))
        assert path.exists()

    def test_missing_column_names_the_offender(self, tmp_path):
        (tmp_path / "estimates.csv").write_text("family,param,replication\n")
        (tmp_path / "summary.csv").write_text("family,param,estimator,mse,mad\n")
        (tmp_path / "meta.json").write_text(json.dumps({"truths": {}}))
        spec = FigureSpec.for_directory(tmp_path, FigureKind.VIOLIN, tmp_path / "x.png")
        with pytest.raises(SchemaError, match="estimator"):
            render(spec)

    def test_violin_centers_on_truth(self, exponential_dir, tmp_path):
        # exponential truth is 1; centered estimates must straddle zero-ish
        spec = FigureSpec.for_directory(
            exponential_dir, FigureKind.VIOLIN, tmp_path / "v.png"
        )
        fig = build_figure(spec)
        try:
            ax = fig.axes[0]
            ys = []
            for line in ax.lines:
                ys.extend(line.get_ydata())
            finite = [y for y in ys if abs(y) < 1e6]
            assert finite, "expected jitter points on the violin"
            assert min(finite) < 0.5 and max(finite) > -0.5
        finally:
            import matplotlib.pyplot as plt

            plt.close(fig)

    def test_log_scale_trigger(self):
        assert _should_use_log_scale([1e46, 5e49, 5e47])
        assert not _should_use_log_scale([0.5, 1.0, 2.0])
        assert not _should_use_log_scale([0.0])

    def test_y_clip(self, exponential_dir, tmp_path):
        spec = FigureSpec.for_directory(
            exponential_dir, FigureKind.VIOLIN, tmp_path / "c.png", y_clip=2.0
        )
        fig = build_figure(spec)
        try:
            assert fig.axes[0].get_ylim() == (-2.0, 2.0)
        finally:
            import matplotlib.pyplot as plt

            plt.close(fig)


class TestCli:
    def test_cli_renders(self, exponential_dir, tmp_path):
        from figure_scripts.cli import main

        out = tmp_path / "cli.png"
        rc = main(["--dir", str(exponential_dir), "--kind", "mse", "--out", str(out)])
        assert rc == 0
        assert out.exists()

    def test_cli_schema_error_exit_code(self, tmp_path, capsys):
        from figure_scripts.cli import main

        (tmp_path / "estimates.csv").write_text("family\n")
        (tmp_path / "summary.csv").write_text("family\n")
        (tmp_path / "meta.json").write_text("{}")
        rc = main(["--dir", str(tmp_path), "--kind", "mad", "--out", str(tmp_path / "x.png")])
        assert rc == 2
        assert "schema error" in capsys.readouterr().err
