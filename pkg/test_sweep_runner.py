import csv
import json

import pytest

from fock_core import wigner_origin
from kitten_errors import ConfigError
from subtraction import DetectorModel, ExperimentParams, prepare_kitten
from sweep_runner import (
    CSV_COLUMNS,
    SweepRow,
    SweepSpec,
    crossings,
    default_grid,
    detector_product,
    emit,
    find_crossing,
    load_rows_csv,
    make_grid,
    rows_to_csv,
    rows_to_frame,
    run_sweep,
    sweep_meta,
)
from witness import WitnessConfig, evaluate_witness


@pytest.fixture
def small_base():
    return ExperimentParams.typical(nmax=20)


@pytest.fixture
def quick_witness():
    return WitnessConfig.from_points(a_points=11, s_points=5)


def synthetic_rows(values, w00s, detector="si-aqr-12", model="IMNPNRD"):
    return [SweepRow("pdc", v, detector, model, w00=w, witness=-w) for v, w in zip(values, w00s)]


class TestGrids:
    def test_default_pdc_grid_is_logarithmic(self):
        grid = default_grid("pdc")
        assert len(grid) == 41
        assert grid[0] == pytest.approx(1e-6)
        assert grid[-1] == pytest.approx(1e-2)
        assert grid[20] == pytest.approx(1e-4)

    def test_default_linear_grid(self):
        grid = default_grid("eta_hd", 11)
        assert grid[0] == pytest.approx(0.5)
        assert grid[1] - grid[0] == pytest.approx(0.05)

    def test_single_point(self):
        assert make_grid(0.3, 0.9, 1) == [0.3]

    def test_unknown_variable(self):
        with pytest.raises(ConfigError):
            default_grid("temperature")

    def test_log_grid_needs_positive_bounds(self):
        with pytest.raises(ConfigError):
            make_grid(0.0, 1.0, 5, log=True)


class TestSweepSpec:
    def test_detector_product_order(self):
        dets = detector_product(["si-aqr-12", "id200"], ["pnrd", "imnpnrd"])
        assert [(d.name, d.label) for d in dets] == [
            ("si-aqr-12", "PNRD"), ("si-aqr-12", "IMNPNRD"),
            ("id200", "PNRD"), ("id200", "IMNPNRD"),
        ]

    def test_rejects_out_of_range_grid(self, small_base):
        with pytest.raises(ConfigError) as info:
            SweepSpec("r2", [0.1, 1.5], [DetectorModel.for_model("pnrd")], small_base)
        assert info.value.field == "sweep.r2"

    def test_rejects_unknown_variable(self, small_base):
        with pytest.raises(ConfigError):
            SweepSpec("colour", [0.1], [DetectorModel.for_model("pnrd")], small_base)

    def test_rejects_empty_inputs(self, small_base):
        with pytest.raises(ConfigError):
            SweepSpec("r2", [], [DetectorModel.for_model("pnrd")], small_base)
        with pytest.raises(ConfigError):
            SweepSpec("r2", [0.1], [], small_base)

    def test_detector_variable_substitution(self, small_base):
        det = DetectorModel.for_model("imnpnrd", pdc=1e-4, eta=0.1)
        spec = SweepSpec("eta_apd", [0.3], [det], small_base)
        _, changed = spec.point(0.3, det)
        assert changed.eta == 0.3 and changed.pdc == 1e-4


class TestRunSweep:
    def test_single_point_matches_direct_call(self, small_base, quick_witness):
        det = DetectorModel.for_model("pnrd", name="ideal")
        spec = SweepSpec("r2", [0.08], [det], small_base, quick_witness)
        [row] = run_sweep(spec, workers=1)

        state = prepare_kitten(small_base, det)
        result = evaluate_witness(state, quick_witness)
        assert row.w00 == pytest.approx(wigner_origin(state), abs=1e-14)
        assert row.witness == pytest.approx(result.witness_value, abs=1e-14)
        assert row.detector == "ideal" and row.model == "PNRD"
        assert row.reason == ""

    def test_rows_in_grid_then_detector_order(self, small_base, quick_witness):
        dets = detector_product(["si-aqr-12"], ["pnrd", "imnpnrd"])
        spec = SweepSpec("mode_purity", [1.0, 0.9], dets, small_base, quick_witness)
        rows = run_sweep(spec, workers=3)
        assert [(r.value, r.model) for r in rows] == [
            (1.0, "PNRD"), (1.0, "IMNPNRD"), (0.9, "PNRD"), (0.9, "IMNPNRD")]

    def test_parallel_matches_serial(self, small_base, quick_witness):
        dets = detector_product(["id200"], ["impnrd", "imnpnrd"])
        spec = SweepSpec("pdc", [1e-5, 1e-4, 1e-3], dets, small_base, quick_witness)
        serial = rows_to_csv(run_sweep(spec, workers=1))
        parallel = rows_to_csv(run_sweep(spec, workers=4))
        assert serial == parallel

    def test_impossible_herald_becomes_null_row(self, small_base, quick_witness):
        det = DetectorModel.for_model("pnrd")
        spec = SweepSpec("v0_db", [0.0, -3.0], [det], small_base, quick_witness)
        failed, ok = run_sweep(spec, workers=1)
        assert failed.failed
        assert failed.w00 is None and failed.witness is None
        assert "ImpossibleHerald" in failed.reason
        assert not ok.failed

    def test_progress_callback(self, small_base, quick_witness):
        seen = []
        spec = SweepSpec("r1", [0.1, 0.2], [DetectorModel.for_model("pnrd")],
                         small_base, quick_witness)
        run_sweep(spec, workers=1, progress=lambda i, total, row: seen.append((i, total)))
        assert seen == [(1, 2), (2, 2)]

    def test_wigner_rises_with_dark_counts(self, small_base, quick_witness):
        det = DetectorModel.for_model("imnpnrd", pdc=0.0, eta=0.1, name="ingaas")
        spec = SweepSpec("pdc", [1e-6, 1e-4, 1e-2], [det], small_base, quick_witness)
        w00 = [row.w00 for row in run_sweep(spec, workers=1)]
        assert w00[0] < w00[1] < w00[2]


class TestCrossings:
    def test_interpolated_root(self):
        rows = synthetic_rows([0, 1, 2, 3], [0.3, 0.1, -0.1, -0.3])
        assert find_crossing(rows, "w00") == pytest.approx(1.5)

    def test_threshold(self):
        rows = synthetic_rows([0, 1, 2], [0.0, 1.0, 2.0])
        assert find_crossing(rows, "w00", threshold=1.5) == pytest.approx(1.5)

    def test_no_bracket(self):
        rows = synthetic_rows([0, 1, 2], [0.3, 0.2, 0.1])
        assert find_crossing(rows, "w00") is None

    def test_failed_rows_skipped(self):
        rows = synthetic_rows([0, 2], [0.2, -0.2])
        rows.insert(1, SweepRow("pdc", 1, "si-aqr-12", "IMNPNRD", reason="ImpossibleHerald"))
        assert find_crossing(rows, "w00") == pytest.approx(1.0)

    def test_per_detector(self):
        rows = synthetic_rows([0, 1], [0.1, -0.1]) + synthetic_rows([0, 1], [0.3, 0.2], "id200")
        found = crossings(rows, "w00")
        assert found[("si-aqr-12", "IMNPNRD")] == pytest.approx(0.5)
        assert found[("id200", "IMNPNRD")] is None

    def test_unknown_column(self):
        with pytest.raises(ConfigError):
            find_crossing([], "colour")


class TestEmit:
    def test_csv_layout(self, tmp_path):
        rows = synthetic_rows([1 / 3, 0.5], [0.25, -0.125])
        rows.append(SweepRow("pdc", 0.75, "si-aqr-12", "PNRD", reason="ImpossibleHerald"))
        path = tmp_path / "rows.csv"
        emit(rows, "csv", str(path))
        with open(path, newline="") as f:
            records = list(csv.reader(f))
        assert records[0] == CSV_COLUMNS
        assert all(len(record) == 11 for record in records)
        assert records[1][1] == "0.333333333"
        assert records[3][4] == ""

    def test_csv_reads_back(self, tmp_path):
        rows = synthetic_rows([0.5, 0.25], [0.125, -0.5])
        path = tmp_path / "rows.csv"
        emit(rows, "csv", str(path))
        assert load_rows_csv(str(path)) == rows

    def test_json_carries_metadata(self, tmp_path, small_base, quick_witness):
        spec = SweepSpec("r2", [0.08], [DetectorModel.for_model("pnrd")], small_base, quick_witness)
        path = tmp_path / "rows.json"
        emit(synthetic_rows([0.08], [0.1]), "json", str(path), sweep_meta(spec))
        data = json.loads(path.read_text())
        assert data["meta"]["nmax"] == 20
        assert data["meta"]["witness"]["a_points"] == 11
        assert "created" not in data["meta"]
        assert set(data["rows"][0]) >= set(CSV_COLUMNS)

    def test_stamp_only_when_requested(self, small_base, quick_witness):
        spec = SweepSpec("r2", [0.08], [DetectorModel.for_model("pnrd")], small_base, quick_witness)
        assert sweep_meta(spec, "2024-01-01T00:00:00+00:00")["created"].startswith("2024")

    def test_stdout(self, capsys):
        emit(synthetic_rows([0.5], [0.1]), "csv", "-")
        assert capsys.readouterr().out.startswith(",".join(CSV_COLUMNS))

    def test_rejects_empty_and_unknown_format(self):
        with pytest.raises(ConfigError):
            emit([], "csv", "-")
        with pytest.raises(ConfigError):
            emit(synthetic_rows([0.5], [0.1]), "xml", "-")

    def test_unwritable_destination(self, tmp_path):
        with pytest.raises(ConfigError):
            emit(synthetic_rows([0.5], [0.1]), "csv", str(tmp_path / "missing" / "rows.csv"))

    def test_frame(self):
        pytest.importorskip("pandas")
        frame = rows_to_frame(synthetic_rows([0.5, 0.25], [0.1, 0.2]))
        assert list(frame["w00"]) == [0.1, 0.2]
