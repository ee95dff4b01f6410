import json

import numpy as np
import pytest

from tgfol import gallery as Ga
from tgfol.errors import InvalidParameter


@pytest.mark.parametrize("name", Ga.ENTRY_NAMES)
def test_entry_matches_golden_record(name):
    res = Ga.verify_entry(name, samples=2000)
    assert res["passed"], res["mismatches"]


def test_regenerated_golden_equals_shipped(tmp_path):
    name = "s3_two_reeb_spacelike"
    Ga.verify_entry(name, samples=2000, regenerate=True, root=tmp_path)
    fresh = json.loads(Ga.golden_path(name, tmp_path).read_text())
    assert fresh == Ga.load_golden(name)


def test_compare_reports_enum_and_bound_mismatches():
    name = "s3_two_reeb_spacelike"
    obs = Ga.verify(Ga.build_entry(name, 1000), 1000)
    exp = Ga.load_golden(name)
    assert Ga.compare(obs, exp) == []
    wrong = json.loads(json.dumps(exp))
    wrong["leaf_types"]["torus"] = "space"
    wrong["tolerances"]["max_II"] = 1e-300
    bad = Ga.compare(obs, wrong)
    assert any(b.startswith("leaf_types") for b in bad) and any(b.startswith("max_II") for b in bad)


def test_obstructed_entry_has_no_metric_and_records_the_obstruction():
    e = Ga.build_entry("s3_reeb_attractive_obstructed", 500)
    assert e.metric is None
    assert e.compatibility["verdict"] == Ga.OBSTRUCTED
    assert e.compatibility["error"] == "OddAttractiveCount"


def test_turbulized_entry_leaf_types():
    obs = Ga.verify(Ga.build_entry("s3_turbulized_mixed", 2000), 2000)
    assert obs["leaf_types"] == {"band": "time", "inner_tube": "space", "reeb_B_interior": "space",
                                 "torus": "light", "tube": "light"}
    assert obs["leaf_type_law"] < 1e-9


def test_unknown_names_are_rejected():
    with pytest.raises(InvalidParameter):
        Ga.build_entry("nope")
    with pytest.raises(InvalidParameter):
        Ga.build_model("nope")
    with pytest.raises(InvalidParameter):
        Ga.load_golden("nope")


def test_models():
    flat = Ga.build_model("flat")
    assert np.array_equal(flat.velocity, [1.0, 0.0, 0.0])
    hyp = Ga.build_model("hyperbolic_leaf")
    assert hyp.leaf.name == "stable_leaf"
    assert Ga.hyperbolic_loop_time(np.e, 1.0) == pytest.approx(np.e - 1.0)
