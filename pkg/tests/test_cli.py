import csv
import io

import numpy as np
import pytest

from dwtnnr import imageio
from dwtnnr.cli import main, parse_r_range, parse_size, read_manifest
from dwtnnr.imageio import ImagePlanes
from dwtnnr.masks import diamond_mask, random_mask
from dwtnnr.synth import SynthSpec, make_low_rank


def run(*argv):
    return main([str(a) for a in argv])


def _write_synthetic(path, m, n, rank, seed=0, channels=1):
    planes = [np.round(make_low_rank(SynthSpec(m, n, rank, seed=seed + c))) for c in range(channels)]
    imageio.write_image(path, ImagePlanes(planes))
    return planes


def test_parse_helpers():
    assert parse_size("400x300") == (300, 400)
    assert parse_r_range("2..5") == [2, 3, 4, 5]
    assert parse_r_range("4") == [4]


def test_mask_random_count(tmp_path):
    out = tmp_path / "m.pgm"
    assert run("mask", "--random", 0.5, "--size", "400x300", "--seed", 7, "-o", out) == 0
    pix = imageio.read_gray(out)
    assert pix.shape == (300, 400)
    assert int((pix == 0).sum()) == 60000
    assert set(np.unique(pix)) == {0.0, 255.0}


def test_mask_diamond_predicate(tmp_path):
    out = tmp_path / "d.pgm"
    assert run("mask", "--diamond", "10,12,6,8", "--size", "30x25", "-o", out) == 0
    np.testing.assert_array_equal(imageio.read_mask(out), diamond_mask(25, 30, (10, 12), (6, 8)))


def test_mask_from_image(tmp_path, rng):
    src = rng.integers(0, 256, size=(12, 9)).astype(float)
    imageio.write_gray(tmp_path / "text.pgm", src)
    assert run("mask", "--from-image", tmp_path / "text.pgm", "-o", tmp_path / "m.pgm") == 0
    np.testing.assert_array_equal(imageio.read_mask(tmp_path / "m.pgm"), src >= 128)


def test_complete_keeps_observed_pixels(tmp_path):
    planes = _write_synthetic(tmp_path / "img.ppm", 45, 60, 1, channels=3)
    mask = random_mask(45, 60, 0.5, seed=3)
    imageio.write_mask(tmp_path / "mask.pgm", mask)
    out = tmp_path / "out.ppm"
    code = run("complete", "--input", tmp_path / "img.ppm", "--mask", tmp_path / "mask.pgm",
               "--method", "dwtnnr", "--r", 3, "--output", out, "--log", tmp_path / "trace.csv")
    assert code == 0
    rec = imageio.read_image(out)
    for a, b in zip(rec.planes, planes):
        np.testing.assert_array_equal(a[mask], b[mask])
    for c in range(3):
        header = (tmp_path / f"trace_ch{c}.csv").read_text().splitlines()[0]
        assert header == "iter,delta,inv_alpha,step_bound,elapsed_ms,psnr"


def test_manifest_defaults_and_rerun(tmp_path, capsys):
    _write_synthetic(tmp_path / "img.pgm", 30, 40, 1)
    out = tmp_path / "out.pgm"
    assert run("complete", "--input", tmp_path / "img.pgm", "--missing-ratio", 0.4, "--seed", 5,
               "--output", out, "--truth", tmp_path / "img.pgm", "--no-timing") == 0
    first = capsys.readouterr().out
    man = read_manifest(f"{out}.manifest")
    assert (man["theta1"], man["theta2"], man["alpha1"], man["rho"], man["eps"], man["max_iters"]) == (
        "1.2", "1.2", "0.0001", "1.2", "0.0001", "200")
    assert man["method"] == "dwtnnr" and man["seed"] == "5" and "psnr_db" in man
    original = out.read_bytes()
    out.unlink()
    assert run("complete", "--from-manifest", f"{out}.manifest") == 0
    assert out.read_bytes() == original
    assert capsys.readouterr().out == first


@pytest.mark.slow
def test_unweighted_scores_lower_on_triangle(tmp_path, capsys):
    _write_synthetic(tmp_path / "img.pgm", 200, 150, 3)
    scores = {}
    for method in ("dwtnnr", "unweighted"):
        assert run("complete", "--input", tmp_path / "img.pgm", "--triangle", "70,52,60,45",
                   "--method", method, "--r", 3, "--truth", tmp_path / "img.pgm",
                   "--output", tmp_path / f"{method}.pgm") == 0
        scores[method] = float(capsys.readouterr().out.strip().split("=")[1])
    assert scores["unweighted"] < scores["dwtnnr"]


def test_metrics_csv(tmp_path, capsys):
    truth = np.full((2, 2), 100.0)
    rec = truth.copy()
    rec[0, 1] += 3
    rec[1, 0] += 4
    imageio.write_gray(tmp_path / "t.pgm", truth)
    imageio.write_gray(tmp_path / "r.pgm", rec)
    imageio.write_mask(tmp_path / "m.pgm", np.array([[True, False], [False, True]]))
    assert run("metrics", "--recovered", tmp_path / "r.pgm", "--truth", tmp_path / "t.pgm",
               "--mask", tmp_path / "m.pgm") == 0
    rows = list(csv.reader(io.StringIO(capsys.readouterr().out)))
    assert rows[0] == ["erec", "mse", "psnr_db"]
    assert float(rows[1][0]) == 5.0 and float(rows[1][1]) == 12.5
    assert float(rows[1][2]) == pytest.approx(37.161703, abs=1e-6)


def _bench(tmp_path, *extra):
    out = tmp_path / "bench.csv"
    code = run("bench", "--synthetic", "40x30:1", "--no-timing", "-o", out, *extra)
    assert code == 0
    return list(csv.DictReader(io.StringIO(out.read_text())))


def test_bench_row_count_and_figures(tmp_path):
    rows = _bench(tmp_path, "--r-range", "1..3", "--methods", "dwtnnr", "--alpha1", "1e-3")
    assert len(rows) == 3
    assert [r["r"] for r in rows] == ["1", "2", "3"]
    assert sum(int(r["best"]) for r in rows) == 1
    assert (tmp_path / "bench_psnr_vs_r.png").stat().st_size > 0
    assert (tmp_path / "bench_iterations_vs_r.png").stat().st_size > 0


def test_bench_repeats_average(tmp_path):
    rows = _bench(tmp_path, "--r-range", "1", "--repeats", 3, "--seed", 4, "--alpha1", "1e-3")
    singles = []
    for s in (4, 5, 6):
        (tmp_path / str(s)).mkdir()
        singles.append(float(_bench(tmp_path / str(s), "--r-range", "1", "--seed", s, "--alpha1", "1e-3")[0]["psnr"]))
    assert float(rows[0]["psnr"]) == pytest.approx(np.mean(singles), rel=1e-9)


def test_bench_dwtnnr_fewer_iterations_than_admm(tmp_path):
    rows = _bench(tmp_path, "--r-range", "1", "--methods", "dwtnnr,admm", "--no-figures")
    by = {r["method"]: r for r in rows}
    assert float(by["dwtnnr"]["iterations"]) <= float(by["admm"]["inner_iterations"])


def test_bench_without_truth_selects_nothing(tmp_path):
    rows = _bench(tmp_path, "--r-range", "1..2", "--no-truth", "--no-figures")
    assert all(r["psnr"] == "" and r["best"] == "0" for r in rows)


def test_bench_empty_input(tmp_path, capsys):
    (tmp_path / "empty").mkdir()
    assert run("bench", "--images", tmp_path / "empty") == 1
    assert "no benchmark instances" in capsys.readouterr().err


def test_weights_vis_all_observed(tmp_path):
    imageio.write_mask(tmp_path / "m.pgm", np.ones((10, 12), bool))
    assert run("weights-vis", "--mask", tmp_path / "m.pgm", "-o", tmp_path / "w.pgm") == 0
    assert not imageio.read_gray(tmp_path / "w.pgm").any()


def test_weights_vis_single_block(tmp_path):
    mask = np.ones((20, 20), bool)
    mask[5:9, 6:12] = False
    imageio.write_mask(tmp_path / "m.pgm", mask)
    assert run("weights-vis", "--mask", tmp_path / "m.pgm", "-o", tmp_path / "w.pgm",
               "--plot", tmp_path / "w.png") == 0
    W = imageio.read_gray(tmp_path / "w.pgm")
    assert np.all(W[~mask] == 255) and not W[mask].any()
    assert (tmp_path / "w.png").stat().st_size > 0


def test_weights_vis_block_size_monotone(tmp_path):
    mask = np.ones((100, 100), bool)
    # (top, left, size) along the diagonal so no two blocks share a row or column
    blocks = [(2, 2, 4), (10, 10, 8), (25, 25, 12), (45, 45, 20)]
    for t, l, s in blocks:
        mask[t:t + s, l:l + s] = False
    imageio.write_mask(tmp_path / "m.pgm", mask)
    assert run("weights-vis", "--mask", tmp_path / "m.pgm", "-o", tmp_path / "w.pgm") == 0
    W = imageio.read_gray(tmp_path / "w.pgm")
    means = [W[t:t + s, l:l + s].mean() for t, l, s in blocks]
    assert all(a < b for a, b in zip(means, means[1:]))


def test_error_exits(tmp_path, capsys):
    assert run("complete", "--input", tmp_path / "missing.pgm", "--output", tmp_path / "o.pgm") == 1
    (tmp_path / "bad.pgm").write_bytes(b"P2\n1 1\n255\n0\n")
    assert run("weights-vis", "--mask", tmp_path / "bad.pgm", "-o", tmp_path / "w.pgm") == 1
    assert run("mask", "--random", 1.5, "--size", "4x4", "-o", tmp_path / "m.pgm") == 1
    err = capsys.readouterr().err
    assert "P2" in err or "magic" in err


def test_byte_identical_reruns(tmp_path):
    _write_synthetic(tmp_path / "img.pgm", 30, 40, 2)
    outputs = []
    for i in range(2):
        d = tmp_path / f"run{i}"
        d.mkdir()
        assert run("complete", "--input", tmp_path / "img.pgm", "--missing-ratio", 0.5, "--seed", 1,
                   "--output", d / "out.pgm", "--log", d / "trace.csv", "--no-timing") == 0
        assert run("bench", "--synthetic", "30x20:1", "--r-range", "1..2", "--no-timing",
                   "--no-figures", "-o", d / "bench.csv") == 0
        outputs.append([(d / f).read_bytes() for f in ("out.pgm", "trace.csv", "bench.csv")])
    assert outputs[0] == outputs[1]
