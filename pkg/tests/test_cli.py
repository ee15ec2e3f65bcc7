import json

import numpy as np
import pytest

from sfmtv import solve_tv
from sfmtv.cli import BENCH_METHODS, main
from sfmtv.instances import (grid_cut, regions_function, unary_from_image, write_graph,
                             write_pgm)

from _reference import brute_sfm, random_cut


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, (json.loads(out) if out.strip() else None), err


@pytest.fixture
def small_pgm(tmp_path):
    path = tmp_path / "tiny.pgm"
    write_pgm(path, np.array([[10, 200], [30, 220]]))
    return path


def test_tv_on_tiny_image(capsys, small_pgm):
    code, rec, _ = run(capsys, "tv", "--image", small_pgm, "--lambda", "0.5")
    assert code == 0
    assert rec["schema"] == 1 and rec["command"] == "tv" and rec["certified"]
    final = rec["runs"][0]["final"]
    u = unary_from_image(np.array([[10.0, 200.0], [30.0, 220.0]]))
    ref = solve_tv(grid_cut((2, 2), 0.5), u).w
    assert np.allclose(final["w"], ref, atol=1e-12)
    it = rec["runs"][0]["iterations"]
    assert all(a["objective"] > b["objective"] for a, b in zip(it, it[1:]))


def test_constant_image_single_iteration(capsys, tmp_path):
    path = tmp_path / "flat.pgm"
    write_pgm(path, np.full((5, 4), 77))
    code, rec, _ = run(capsys, "tv", "--image", path)
    assert code == 0
    assert len(rec["runs"][0]["iterations"]) == 1
    w = np.array(rec["runs"][0]["final"]["w"])
    assert np.ptp(w) == 0.0


def test_sfm_on_graph_matches_enumeration(capsys, tmp_path):
    rng = np.random.default_rng(0)
    F = random_cut(rng, 10, integer=True)
    u = rng.integers(-4, 5, 10).astype(float)
    gpath, upath = tmp_path / "g.txt", tmp_path / "u.txt"
    write_graph(gpath, F)
    np.savetxt(upath, u)
    code, rec, _ = run(capsys, "sfm", "--graph", gpath, "--unary", upath, "--eps", 1 / 40)
    assert code == 0
    final = rec["runs"][0]["final"]
    best, _ = brute_sfm(F, u)
    assert final["value"] == best
    assert final["certificate"]["exact"]


def test_dump_w_and_determinism(capsys, tmp_path):
    dump = tmp_path / "w.txt"
    args = ("tv", "--shape", "12x10", "--seed", 3, "--lambda", "2,1", "--warm-start")
    code1, rec1, _ = run(capsys, *args, "--dump-w", dump)
    code2, rec2, _ = run(capsys, *args)
    assert code1 == code2 == 0
    for a, b in zip(rec1["runs"], rec2["runs"]):
        assert a["final"]["w"] == b["final"]["w"]
        assert [x["objective"] for x in a["iterations"]] == [x["objective"] for x in b["iterations"]]
    # floats survive the text round trip exactly
    assert np.loadtxt(dump).tolist() == rec1["runs"][-1]["final"]["w"]


def test_warm_start_needs_decreasing_lambdas(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["tv", "--shape", "4x4", "--lambda", "1,2", "--warm-start"])
    assert exc.value.code == 2


def test_exactly_one_source(capsys, small_pgm):
    with pytest.raises(SystemExit) as exc:
        main(["tv", "--image", str(small_pgm), "--shape", "4x4"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit):
        main(["tv"])


def test_out_file(tmp_path, small_pgm):
    out = tmp_path / "rec.json"
    assert main(["tv", "--image", str(small_pgm), "--out", str(out)]) == 0
    rec = json.loads(out.read_text())
    assert rec["instance"]["n"] == 4 and rec["solver"] == "single"


def test_regions_on_image(capsys, tmp_path):
    rng = np.random.default_rng(1)
    img = np.clip(rng.normal(120, 40, (20, 20)), 0, 255)
    img[5:15, 5:15] += 60
    ipath, lpath = tmp_path / "img.pgm", tmp_path / "lab.txt"
    write_pgm(ipath, img)
    labels = (np.arange(400).reshape(20, 20) // 10 % 2 + 2 * (np.arange(400).reshape(20, 20) // 200))
    np.savetxt(lpath, labels.ravel(), fmt="%d")
    code, rec, _ = run(capsys, "tv", "--image", ipath, "--regions", lpath, "--lambda", 0.3)
    assert code == 0 and rec["solver"] == "decomposable:qp"
    w_qp = np.array(rec["runs"][0]["final"]["w"])
    code, rec, _ = run(capsys, "tv", "--image", ipath, "--regions", lpath, "--lambda", 0.3,
                       "--solver", "decomposable:dykstra")
    assert code == 0
    assert np.allclose(w_qp, rec["runs"][0]["final"]["w"], atol=1e-6)
    assert rec["runs"][0]["final"]["monotonicity_violations"] == []
    # the single-function solver cannot take a regions term
    with pytest.raises(SystemExit):
        main(["tv", "--image", str(ipath), "--regions", str(lpath), "--solver", "single"])


def test_regions_function_shape():
    R = regions_function(np.array([0, 0, 1, 1, 1]))
    assert R.n == 5


def test_bench_rows(capsys):
    code, rec, err = run(capsys, "bench", "--shape", "3x3x2", "--eps", 1e-10, "--max-iter", 20000)
    assert code == 0
    rows = rec["table"]
    assert [r["method"] for r in rows] == list(BENCH_METHODS)
    for r in rows:
        assert "error" not in r and r["converged"]
        assert r["w_diff_vs_active"] <= 1e-5
        assert r["sfm2d_calls"] == r["oracle_calls_f1"] > 0
    assert "ACTIVE" in err


def test_bench_needs_decomposable(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["bench", "--shape", "6x6"])
    assert exc.value.code == 2


def test_warm_start_path_on_random_image(capsys, tmp_path):
    path = tmp_path / "noise.pgm"
    write_pgm(path, np.random.default_rng(0).integers(0, 256, (16, 16)))
    calls = {}
    for flag in ((), ("--warm-start",)):
        code, rec, _ = run(capsys, "tv", "--image", path, "--lambda", "4,2,1", *flag)
        assert code == 0
        calls[bool(flag)] = [r["final"]["oracle_calls"] for r in rec["runs"]]
        w = rec["runs"][-1]["final"]["w"]
        calls[(bool(flag), "w")] = np.array(w)
    assert calls[True][-1] <= calls[False][-1]
    assert np.allclose(calls[(True, "w")], calls[(False, "w")], atol=1e-8)
