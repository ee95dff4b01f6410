import csv
import io
import json

import pytest

from tgfol import cli
from tgfol import topology as T


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_gallery_list(capsys):
    code, out, _ = run(capsys, "gallery", "list")
    assert code == 0
    assert "t3a_mixed" in json.loads(out)["entries"]


def test_usage_errors_exit_2_with_json(capsys):
    code, _, err = run(capsys, "gallery", "verify", "bogus")
    assert code == 2
    info = json.loads(err)
    assert info["kind"] == "usage" and "unknown entry" in info["message"]
    code, _, err = run(capsys, "frobnicate")
    assert code == 2 and json.loads(err)["error"] == "UsageError"
    assert run(capsys, "gallery", "verify")[0] == 2
    assert run(capsys, "classify", "--genus", "1")[0] == 2
    assert run(capsys, "classify", "--genus", "1", "--euler", "0", "--seed", "0")[0] == 2
    assert run(capsys, "classify", "--table", "1", "1", "--tolerance", "bogus=1")[0] == 2
    assert run(capsys, "geodesic", "--entry", "s3_reeb_attractive_obstructed")[0] == 2


def test_unwritable_output_dir(capsys, tmp_path):
    blocker = tmp_path / "file.txt"
    blocker.write_text("")
    code, _, err = run(capsys, "classify", "--table", "1", "1", "--out", str(blocker / "x"))
    assert code == 2 and "not writable" in json.loads(err)["message"]


def test_classify_single_and_files(capsys, tmp_path):
    code, out, _ = run(capsys, "classify", "--genus", "2", "--euler", "-2", "--out", str(tmp_path))
    row = json.loads(out)
    assert code == 0 and row["lightlike"] == "exists" and row["lightlike_obstruction"] == "exists_affine"
    assert (tmp_path / "classification.json").exists() and (tmp_path / "classification.csv").exists()


def test_classify_table_csv_matches_single_calls(capsys):
    code, out, _ = run(capsys, "classify", "--table", "3", "5", "--csv")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 4 * 11
    for r in rows:
        v = T.classify_tg_foliations(int(r["genus"]), int(r["euler"]))
        assert all(r[k] == v[k].status for k in T.CAUSAL_CLASSES)


def test_gallery_verify_and_build(capsys, tmp_path):
    code, out, _ = run(capsys, "gallery", "verify", "s3_two_reeb_spacelike", "--samples", "1000",
                       "--out", str(tmp_path))
    res = json.loads(out)
    assert code == 0 and res["passed"] and res["leaf_types"]["torus"] == "light"
    for f in ("verify.json", "leaf_types.csv", "b_profile.svg"):
        assert (tmp_path / "s3_two_reeb_spacelike" / f).exists()
    code, out, _ = run(capsys, "gallery", "build", "s3_reeb_attractive_obstructed", "--samples", "500",
                       "--out", str(tmp_path), "--format", "json")
    assert code == 0 and json.loads(out)["compatibility"].startswith("obstructed")
    assert (tmp_path / "s3_reeb_attractive_obstructed" / "entry.json").exists()


def test_tolerance_override_turns_verify_red(capsys):
    code, out, _ = run(capsys, "gallery", "verify", "t3a_mixed", "--samples", "1000",
                       "--tolerance", "max_II=1e-300", "--format", "json")
    assert code == 1
    assert any("max_II" in m for m in json.loads(out)["mismatches"])


def test_geodesic_flat_model(capsys, tmp_path):
    init = tmp_path / "init.json"
    init.write_text(json.dumps({"chart": "T", "position": [0, 0, 0], "velocity": [0.5, 0.25, 0]}))
    code, out, _ = run(capsys, "geodesic", "--entry", "flat", "--init", str(init), "--t", "2",
                       "--out", str(tmp_path))
    s = json.loads(out)
    assert code == 0
    assert s["final_position"] == pytest.approx([1.0, 0.5, 0.0], abs=1e-12)
    header = (tmp_path / "flat" / "trajectory.csv").read_text().splitlines()[0]
    assert header == "t,chart,x0,x1,x2,v0,v1,v2,g_norm"
    assert run(capsys, "geodesic", "--entry", "flat", "--init", str(tmp_path / "missing.json"))[0] == 2


def test_geodesic_completeness_model(capsys):
    code, out, _ = run(capsys, "geodesic", "--entry", "hyperbolic_leaf", "--completeness")
    v = json.loads(out)
    assert code == 0 and v["complete"] is False and v["incomplete_direction"] == "backward"


def test_runtime_failure_exit_3(capsys, tmp_path):
    init = tmp_path / "init.json"
    init.write_text(json.dumps({"chart": "A", "position": [5, 0, 0], "velocity": [1, 0, 0]}))
    code, _, err = run(capsys, "geodesic", "--entry", "s3_two_reeb_spacelike", "--init", str(init))
    assert code == 3 and json.loads(err)["kind"] == "runtime"


def test_reports_are_byte_identical(capsys, tmp_path):
    args = ("gallery", "verify", "t3a_mixed", "--samples", "1000", "--out", str(tmp_path))
    files = ("verify.json", "leaf_types.csv", "b_profile.svg")
    run(capsys, *args)
    first = [(tmp_path / "t3a_mixed" / f).read_bytes() for f in files]
    run(capsys, *args)
    assert [(tmp_path / "t3a_mixed" / f).read_bytes() for f in files] == first
