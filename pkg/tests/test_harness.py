import struct
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from cenlab import harness as hs
from cenlab.datasets import Rng, gen_sine
from cenlab.exceptions import ComparisonError, ConfigurationError, NumericDivergenceError
from cenlab.metrics import RunLog, record_checkpoint

SVG = "{http://www.w3.org/2000/svg}"


def make_log(rows):
    log = RunLog()
    for epoch, js, ns, g, d in rows:
        record_checkpoint(log, epoch, ns, (g, d), js)
    return log


class TestCli:
    def test_defaults(self):
        c = hs.parse_cli(["--mode", "both", "--dataset", "sine"])
        assert (c.epochs, c.checkpoint_every, c.seed, c.bins) == (800, 100, 42, 50)
        assert c.modes == ["gan", "cen"]

    @pytest.mark.parametrize("argv", [
        ["--dataset", "mnist"],
        ["--dataset", "mnist123", "--mnist-images", "x"],
        ["--epochs", "0"],
        ["--epochs", "ten"],
        ["--mode", "coop"],
        ["--frobnicate"],
    ])
    def test_usage_errors_exit_2(self, argv, capsys):
        with pytest.raises(SystemExit) as exc:
            hs.parse_cli(argv)
        assert exc.value.code == 2

    def test_config_validates(self):
        with pytest.raises(ConfigurationError):
            hs.ExperimentConfig(batch_size=0)


class TestCsv:
    def test_layout(self, tmp_path):
        rows = [(100 * (i + 1), 0.3112779, 1_500_000 * (i + 1), i, i) for i in range(8)]
        path = tmp_path / "m.csv"
        hs.emit_metrics_csv(make_log(rows), path)
        text = path.read_text()
        lines = text.split("\n")
        assert text.endswith("\n") and "\r" not in text
        assert len(lines) - 1 == 9
        assert lines[0] == "epoch,js_divergence,cumulative_time_ms,g_updates,d_updates"
        assert lines[1] == "100,0.311278,1.500000,0,0"

    def test_no_timing(self, tmp_path):
        path = tmp_path / "m.csv"
        hs.emit_metrics_csv(make_log([(1, 0.5, 123456, 1, 1)]), path, no_timing=True)
        assert path.read_text().split("\n")[1] == "1,0.500000,0.000000,1,1"

    def test_empty_refused(self, tmp_path):
        with pytest.raises(ConfigurationError):
            hs.emit_metrics_csv(RunLog(), tmp_path / "m.csv")


class TestSvg:
    def test_scatter(self, tmp_path):
        real = gen_sine(30, Rng(0))
        fake = real[:12] + 0.1
        path = tmp_path / "s.svg"
        hs.emit_scatter_svg(real, fake, path)
        text = path.read_text()
        assert text.lstrip().startswith("<?xml") and "<svg" in text
        root = ET.fromstring(text.encode())
        assert root.tag == SVG + "svg"
        groups = root.findall(SVG + "g")
        assert [g.get("fill") for g in groups] == [hs.BLUE, hs.ORANGE]
        assert len(root.findall(f".//{SVG}circle")) == 42
        assert len(groups[0]) == 30 and len(groups[1]) == 12

    def test_scatter_needs_points(self, tmp_path):
        with pytest.raises(ConfigurationError):
            hs.emit_scatter_svg(np.zeros((0, 2)), np.zeros((3, 2)), tmp_path / "s.svg")

    def test_digit_grid(self, tmp_path):
        imgs = np.zeros((20, 784))
        imgs[:, 0] = 1.0
        path = tmp_path / "g.svg"
        hs.emit_digit_grid_svg(imgs, path)
        root = ET.parse(path).getroot()
        pixels = [r for r in root.findall(SVG + "rect") if r.get("fill") == "rgb(255,255,255)"]
        assert len(pixels) == 16


class TestCompare:
    def test_identical(self):
        log = make_log([(100, 0.2, 100, 5, 5)])
        s = hs.compare_runs(log, log)
        assert s.time_ratio == 1.0 and s.js_delta == 0.0

    def test_ratio(self):
        s = hs.compare_runs(make_log([(100, 0.3, 100, 9, 9)]), make_log([(100, 0.2, 75, 4, 5)]))
        assert s.time_ratio == 0.75
        assert (s.cen_g_updates, s.cen_d_updates) == (4, 5)

    def test_mismatched_epochs(self):
        a = make_log([(100, 0.3, 100, 9, 9), (200, 0.3, 200, 9, 9)])
        with pytest.raises(ComparisonError):
            hs.compare_runs(a, make_log([(100, 0.3, 100, 9, 9)]))


def tiny_argv(out, *extra):
    return ["--mode", "both", "--dataset", "circles", "--epochs", "4", "--checkpoint-every", "2",
            "--dataset-size", "60", "--batch-size", "20", "--out-dir", str(out), *extra]


class TestRunExperiment:
    def test_files_and_summary(self, tmp_path):
        results = hs.run_experiment(hs.parse_cli(tiny_argv(tmp_path)))
        assert [m for m, _ in results] == ["gan", "cen"]
        names = sorted(p.name for p in tmp_path.iterdir())
        assert names == sorted([
            "metrics_gan.csv", "metrics_cen.csv", "summary.csv",
            "scatter_gan_2.svg", "scatter_gan_4.svg", "scatter_cen_2.svg", "scatter_cen_4.svg",
        ])
        header, row = (tmp_path / "summary.csv").read_text().splitlines()
        assert header.split(",") == hs.SUMMARY_HEADER
        assert float(row.split(",")[5]) > 0

    def test_default_checkpoint_cadence(self, tmp_path):
        argv = ["--mode", "cen", "--dataset", "sine", "--dataset-size", "8",
                "--batch-size", "8", "--out-dir", str(tmp_path)]
        config = hs.parse_cli(argv)
        assert (config.epochs, config.checkpoint_every) == (800, 100)
        hs.run_experiment(config)
        svgs = sorted(int(p.stem.split("_")[-1]) for p in tmp_path.glob("scatter_cen_*.svg"))
        assert svgs == list(range(100, 801, 100))
        assert len((tmp_path / "metrics_cen.csv").read_text().splitlines()) == 9

    def test_byte_determinism(self, tmp_path):
        for run in ("a", "b"):
            hs.run_experiment(hs.parse_cli(tiny_argv(tmp_path / run, "--no-timing")))
        files = sorted(p.name for p in (tmp_path / "a").iterdir())
        for name in files:
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_identical_initial_weights(self):
        config = hs.parse_cli(tiny_argv("unused"))
        g = hs.make_estimator(config, "gan").init_model(2)
        c = hs.make_estimator(config, "cen").init_model(2)
        for p, q in zip(g.generator.parameters() + g.discriminator.parameters(),
                        c.generator.parameters() + c.discriminator.parameters()):
            assert p.tobytes() == q.tobytes()

    def test_short_run_checkpoints_final_epoch(self, tmp_path):
        argv = tiny_argv(tmp_path)
        argv[argv.index("--checkpoint-every") + 1] = "10"
        results = hs.run_experiment(hs.parse_cli(argv))
        assert all(log.epochs == [4] for _, log in results)


def write_idx(tmp_path, n=24, magic=2051):
    rng = np.random.default_rng(0)
    pixels = rng.integers(0, 256, size=(n, 28, 28), dtype=np.uint8)
    labels = np.array([1, 2, 3] * (n // 3), dtype=np.uint8)
    ip, lp = tmp_path / "img", tmp_path / "lab"
    ip.write_bytes(struct.pack(">iiii", magic, n, 28, 28) + pixels.tobytes())
    lp.write_bytes(struct.pack(">ii", 2049, n) + labels.tobytes())
    return ip, lp


class TestMain:
    def test_success(self, tmp_path):
        assert hs.main(tiny_argv(tmp_path / "out")) == hs.EXIT_OK

    def test_mnist_grid(self, tmp_path):
        ip, lp = write_idx(tmp_path)
        argv = ["--mode", "gan", "--dataset", "mnist", "--epochs", "2", "--checkpoint-every", "1",
                "--batch-size", "8", "--mnist-images", str(ip), "--mnist-labels", str(lp),
                "--out-dir", str(tmp_path / "out")]
        assert hs.main(argv) == hs.EXIT_OK
        assert (tmp_path / "out" / "grid_gan_1.svg").exists()
        assert (tmp_path / "out" / "grid_gan_2.svg").exists()

    def test_bad_magic_exit_3(self, tmp_path, capsys):
        ip, lp = write_idx(tmp_path, magic=2049)
        argv = ["--dataset", "mnist", "--mnist-images", str(ip), "--mnist-labels", str(lp),
                "--out-dir", str(tmp_path / "out")]
        assert hs.main(argv) == hs.EXIT_DATA
        assert "2049" in capsys.readouterr().err

    def test_subset_shortfall_exit_3(self, tmp_path):
        ip, lp = write_idx(tmp_path)
        argv = ["--dataset", "mnist123", "--mnist-images", str(ip), "--mnist-labels", str(lp),
                "--out-dir", str(tmp_path / "out")]
        assert hs.main(argv) == hs.EXIT_DATA

    def test_divergence_exit_4(self, tmp_path, monkeypatch):
        def boom(config):
            raise NumericDivergenceError(3, 1, "nan")
        monkeypatch.setattr(hs, "run_experiment", boom)
        assert hs.main(tiny_argv(tmp_path)) == hs.EXIT_DIVERGED
