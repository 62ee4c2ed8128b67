import math

import pytest

from qpdl.config import CONTRACT_LIMITS
from qpdl.modules.contract_engine import ContractEngine
from qpdl.modules.explainability import generate_report


@pytest.fixture
def engine():
    return ContractEngine(dict(CONTRACT_LIMITS))


def test_all_within_limits_pass(engine):
    result = engine.compute({"unitarity_drift": 1e-13, "roundtrip_error": 0.01})
    assert result["verdict"] == "PASS"
    assert result["violations"] == []
    assert result["breakdown"]["roundtrip_error"] == {"value": 0.01, "limit": 0.05, "ok": True}


def test_limit_itself_passes(engine):
    assert engine.compute({"frame_deviation": 0.1})["verdict"] == "PASS"


def test_breach_fails(engine):
    result = engine.compute({"l2_drift": 1e-6, "frame_deviation": 0.01})
    assert result["verdict"] == "FAIL"
    assert result["violations"] == ["l2_drift"]


def test_nan_never_passes(engine):
    result = engine.compute({"conjugacy_residual": math.nan})
    assert result["verdict"] == "FAIL"
    assert not result["breakdown"]["conjugacy_residual"]["ok"]


def test_unmeasured_quantities_skipped(engine):
    result = engine.compute({"bootstrap_margin": None})
    assert result == {"verdict": "PASS", "violations": [], "breakdown": {}}


def test_unknown_quantity_rejected(engine):
    with pytest.raises(ValueError):
        engine.compute({"gap_count": 3})


@pytest.mark.parametrize("limits", [{}, {"l2_drift": 0.0}, {"l2_drift": -1.0}, {"l2_drift": "small"}])
def test_limit_table_validated(limits):
    with pytest.raises(ValueError):
        ContractEngine(limits)


def test_report_for_passing_decay_fit(engine):
    contract = engine.compute({"unitarity_drift": 1e-14})
    report = generate_report("decay-fit", {"slope": -0.334, "boundary_reached": False}, contract)
    assert report["command"] == "decay-fit"
    assert report["verdict"] == "PASS"
    assert any("-0.334" in line for line in report["explanation"])
    assert report["explanation"][-1] == "All numerical contracts of decay-fit hold."
    assert "unitarity_drift" in report["contract_breakdown"]


def test_report_names_violations(engine):
    contract = engine.compute({"roundtrip_error": 0.5, "frame_deviation": 0.5})
    report = generate_report("spectral-roundtrip", {"frame_bounds": (0.5, 1.5)}, contract)
    assert report["verdict"] == "FAIL"
    assert "[0.500, 1.500]" in report["explanation"][0]
    assert report["explanation"][-1] == "spectral-roundtrip violated: roundtrip_error, frame_deviation."


def test_report_sections():
    summary = {
        "gaps": [{"k": [1]}, {"k": [-1]}],
        "component_count": 5,
        "layers": {"0": 3, "1": 2},
        "within_bound": True,
        "steps": [{"resonance": [1]}, {"resonance": None}],
        "unflagged_violations": 0,
        "boundary_reached": True,
        "bootstrap_passes": False,
        "margin": 1.25,
    }
    lines = generate_report("demo", summary, {"verdict": "PASS"})["explanation"]
    assert lines[0].startswith("2 spectral gaps")
    assert "5 components across 2 resonance layers (within" in lines[1]
    assert "1 resonant rotations" in lines[2]
    assert lines[3].startswith("Every oscillatory integral")
    assert "window edge" in lines[4]
    assert "broke the decay bootstrap (margin 1.250)" in lines[5]


def test_report_without_gaps():
    lines = generate_report("ids", {"gaps": []}, {"verdict": "PASS"})["explanation"]
    assert lines[0] == "No spectral gaps were detected at this resolution."


def test_coarse_grid_breaks_lost_mass_contract(engine):
    result = engine.compute({"roundtrip_error": 0.01, "lost_mass": 0.02})
    assert result["verdict"] == "FAIL"
    assert result["violations"] == ["lost_mass"]
    assert engine.compute({"lost_mass": 0.0})["verdict"] == "PASS"


def test_report_mentions_coarse_grid(engine):
    contract = engine.compute({"lost_mass": 0.02})
    summary = {"frame_bounds": (0.99, 1.01), "coarse_grid": True, "lost_mass": 0.02}
    lines = generate_report("spectral-roundtrip", summary, contract)["explanation"]
    assert lines[1].startswith("The energy grid is too coarse: 2.00e-02")
    assert lines[-1] == "spectral-roundtrip violated: lost_mass."
