import csv
import json

import numpy as np
import pytest

from netpart import synth
from netpart.cli import main
from netpart.clustering import read_partition
from netpart.graph import build_graph, connected_components, read_edges, read_roads
from netpart.ingest import SpeedRecord, write_records


def _write_small_network(tmp_path, constant_road=None):
    import datetime as dt

    rng = np.random.default_rng(0)
    roads = [f"x{i}" for i in range(5)]
    recs = []
    for day in (dt.date(2021, 6, 21), dt.date(2021, 6, 22)):
        for r in roads:
            vals = np.full(288, 30.0) if r == constant_road else 40 + 10 * np.sin(np.arange(288) / 30 + rng.uniform())
            recs += [SpeedRecord(day, p, r, float(v), 10) for p, v in enumerate(vals)]
    with open(tmp_path / "records.csv", "w") as fh:
        write_records(recs, fh)
    (tmp_path / "edges.csv").write_text("road_a,road_b\n" + "".join(f"x{i},x{i + 1}\n" for i in range(4)))
    return tmp_path / "records.csv", tmp_path / "edges.csv"


def test_encode_writes_one_gaf_per_road_day(tmp_path):
    rec, edges = _write_small_network(tmp_path)
    out = tmp_path / "out"
    assert main(["encode", "--records", str(rec), "--edges", str(edges), "--out", str(out)]) == 0
    assert len(list(out.glob("gaf/*/*.gaf"))) == 10
    assert (out / "excluded.csv").read_text().splitlines() == ["road_id,dates,reason"]


def test_encode_excludes_constant_road(tmp_path):
    rec, edges = _write_small_network(tmp_path, constant_road="x2")
    out = tmp_path / "out"
    assert main(["encode", "--records", str(rec), "--edges", str(edges), "--out", str(out)]) == 0
    assert len(list(out.glob("gaf/*/*.gaf"))) == 8
    rows = list(csv.DictReader(open(out / "excluded.csv")))
    assert len(rows) == 1 and rows[0]["road_id"] == "x2"
    assert rows[0]["dates"] == "20210621;20210622" and rows[0]["reason"] == "ConstantSeries"


def test_missing_edges_exit_2(tmp_path, capsys):
    rec, _ = _write_small_network(tmp_path)
    missing = tmp_path / "nope.csv"
    code = main(["encode", "--records", str(rec), "--edges", str(missing), "--out", str(tmp_path / "o")])
    assert code == 2
    assert str(missing) in capsys.readouterr().err


def test_malformed_records_exit_2(tmp_path, capsys):
    (tmp_path / "r.csv").write_text("date,period,road_id,speed,sample_vehicles\n20210621,999,a,1,1\n")
    (tmp_path / "e.csv").write_text("road_a,road_b\n")
    code = main(["ingest", "--records", str(tmp_path / "r.csv"), "--out", str(tmp_path / "o")])
    assert code == 2 and "line 2" in capsys.readouterr().err


def test_ingest_period_base(tmp_path):
    (tmp_path / "r.csv").write_text(
        "date,period,road_id,speed,sample_vehicles\n20190909,1,3,25.14,20\n20190909,3,3,29.14,20\n"
    )
    out = tmp_path / "o"
    assert main(["ingest", "--records", str(tmp_path / "r.csv"), "--period-base", "1", "--out", str(out)]) == 0
    row = list(csv.reader(open(out / "series.csv")))[1]
    assert row[:5] == ["20190909", "3", "286", "25.14", "27.14"]


@pytest.fixture(scope="module")
def synth_run(tmp_path_factory):
    """6x6 grid, 4 regions: synth -> encode (PAA 72) -> train -> features."""
    out = tmp_path_factory.mktemp("run")
    sc = synth.SynthScenario(rows=6, cols=6, region_count=4, noise_sigma=2.0, seed=1)
    (out / "scenario_in.json").write_text(json.dumps(sc.to_json()))
    assert main(["synth", "--scenario", str(out / "scenario_in.json"), "--out", str(out)]) == 0
    common = ["--records", str(out / "records.csv"), "--edges", str(out / "edges.csv"), "--out", str(out)]
    assert main(["encode", *common, "--paa", "72"]) == 0
    assert main(["train", "--out", str(out), "--epochs", "3", "--seed", "4"]) == 0
    assert main(["features", "--out", str(out)]) == 0
    return out, common


def test_synth_outputs(synth_run):
    out, _ = synth_run
    g = build_graph(read_roads(out / "roads.txt"), read_edges(out / "edges.csv"))
    assert len(g.roads) == 36
    truth, method = read_partition(out / "truth.json")
    assert truth.k == 4 and method == "truth"


def test_train_outputs_and_determinism(synth_run, tmp_path):
    out, _ = synth_run
    assert (out / "model.npae").read_bytes()[:4] == b"NPAE"
    loss = (out / "loss.csv").read_text()
    assert len(loss.splitlines()) == 4
    # same seed, fresh directory sharing the GAF dump
    other = tmp_path / "again"
    other.mkdir()
    (other / "gaf").symlink_to(out / "gaf")
    assert main(["train", "--out", str(other), "--epochs", "3", "--seed", "4"]) == 0
    assert (other / "loss.csv").read_bytes() == loss.encode()
    assert (other / "model.npae").read_bytes() == (out / "model.npae").read_bytes()


def test_train_one_epoch(synth_run, tmp_path):
    out, _ = synth_run
    other = tmp_path / "one"
    (other / "gaf").parent.mkdir(parents=True, exist_ok=True)
    (other / "gaf").symlink_to(out / "gaf")
    assert main(["train", "--out", str(other), "--epochs", "1"]) == 0
    assert (other / "model.npae").exists()
    assert len((other / "loss.csv").read_text().splitlines()) == 2


def test_train_divergence_exit_3(synth_run, tmp_path):
    out, _ = synth_run
    other = tmp_path / "div"
    other.mkdir()
    (other / "gaf").symlink_to(out / "gaf")
    assert main(["train", "--out", str(other), "--epochs", "2", "--lr", "1e300"]) == 3
    assert not (other / "model.npae").exists()


def test_features_file(synth_run):
    out, _ = synth_run
    rows = list(csv.reader(open(out / "features.csv")))
    assert rows[0][:3] == ["date", "road_id", "f0"] and len(rows[0]) == 2 + 81
    assert len(rows) == 1 + 36


def test_partition_ae_hier_connected(synth_run):
    out, common = synth_run
    assert main(["partition", *common, "--method", "ae-hier", "--k", "4"]) == 0
    cs, method = read_partition(out / "partitions" / "ae-hier_k4.json")
    g = build_graph(read_roads(out / "roads.txt"), read_edges(out / "edges.csv"))
    assert cs.k == 4 and method == "ae-hier"
    assert all(len(connected_components(g, c)) == 1 for c in cs.clusters())


def test_partition_infeasible_k_exit_4(synth_run):
    _, common = synth_run
    assert main(["partition", *common, "--method", "raw-hier", "--k", "37"]) == 4
    assert main(["partition", *common, "--method", "raw-hier", "--k", "0"]) == 4


def test_spectral_two_blocks(tmp_path):
    sc = synth.SynthScenario(rows=4, cols=6, region_count=2, noise_sigma=1.0, seed=2)
    (tmp_path / "s.json").write_text(json.dumps(sc.to_json()))
    assert main(["synth", "--scenario", str(tmp_path / "s.json"), "--out", str(tmp_path)]) == 0
    common = ["--records", str(tmp_path / "records.csv"), "--edges", str(tmp_path / "edges.csv"), "--out", str(tmp_path)]
    assert main(["partition", *common, "--method", "spectral", "--k", "2"]) == 0
    found, _ = read_partition(tmp_path / "partitions" / "spectral_k2.json")
    truth, _ = read_partition(tmp_path / "truth.json")
    assert synth.adjusted_rand_index(found, truth) == 1.0


def test_sweep_evaluate_and_compare(tmp_path):
    sc = synth.SynthScenario(rows=5, cols=5, region_count=4, seed=3)
    (tmp_path / "s.json").write_text(json.dumps(sc.to_json()))
    assert main(["synth", "--scenario", str(tmp_path / "s.json"), "--out", str(tmp_path)]) == 0
    common = ["--records", str(tmp_path / "records.csv"), "--edges", str(tmp_path / "edges.csv"), "--out", str(tmp_path)]
    for method in ("raw-hier", "spectral"):
        assert main(["partition", *common, "--method", method, "--k", "2..10"]) == 0
    assert len(list((tmp_path / "partitions").glob("*.json"))) == 18
    assert main(["evaluate", *common]) == 0
    reports = sorted((tmp_path / "metrics").glob("*.json"))
    assert len(reports) == 18
    doc = json.loads(reports[0].read_text())
    assert list(doc) == ["k", "method", "intra", "inter", "network_intra", "per_cluster_intra", "adjacent_pair_count"]
    rows = list(csv.DictReader(open(tmp_path / "comparison.csv")))
    assert len(rows) == 9 and {r["method"] for r in rows} == {"raw-hier"}
    before = (tmp_path / "comparison.csv").read_bytes()
    assert main(["compare", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "comparison.csv").read_bytes() == before


def test_evaluate_singletons_intra_zero(tmp_path):
    sc = synth.SynthScenario(rows=3, cols=3, region_count=1, seed=1)
    (tmp_path / "s.json").write_text(json.dumps(sc.to_json()))
    main(["synth", "--scenario", str(tmp_path / "s.json"), "--out", str(tmp_path)])
    common = ["--records", str(tmp_path / "records.csv"), "--edges", str(tmp_path / "edges.csv"), "--out", str(tmp_path)]
    assert main(["partition", *common, "--method", "raw-hier", "--k", "9"]) == 0
    assert main(["evaluate", *common]) == 0
    doc = json.loads((tmp_path / "metrics" / "raw-hier_k9.json").read_text())
    assert doc["intra"] == 0 and doc["per_cluster_intra"] == [0] * 9


def test_evaluate_missing_series_exit_5(tmp_path):
    sc = synth.SynthScenario(rows=2, cols=3, region_count=2, seed=1)
    (tmp_path / "s.json").write_text(json.dumps(sc.to_json()))
    main(["synth", "--scenario", str(tmp_path / "s.json"), "--out", str(tmp_path)])
    common = ["--records", str(tmp_path / "records.csv"), "--edges", str(tmp_path / "edges.csv"), "--out", str(tmp_path)]
    assert main(["partition", *common, "--method", "raw-hier", "--k", "2"]) == 0
    lines = (tmp_path / "records.csv").read_text().splitlines()
    kept = [l for l in lines if ",r001c002," not in l]
    (tmp_path / "partial.csv").write_text("\n".join(kept) + "\n")
    code = main(["evaluate", "--records", str(tmp_path / "partial.csv"), "--edges", str(tmp_path / "edges.csv"),
                 "--out", str(tmp_path)])
    assert code == 5


def test_geojson_output(tmp_path):
    sc = synth.SynthScenario(rows=2, cols=2, region_count=2, seed=1)
    (tmp_path / "s.json").write_text(json.dumps(sc.to_json()))
    main(["synth", "--scenario", str(tmp_path / "s.json"), "--out", str(tmp_path)])
    geo = {"type": "FeatureCollection", "features": [
        {"type": "Feature", "geometry": {"type": "Point", "coordinates": [i, 0]}, "properties": {"road_id": r}}
        for i, r in enumerate(read_roads(tmp_path / "roads.txt"))]}
    (tmp_path / "geo.json").write_text(json.dumps(geo))
    common = ["--records", str(tmp_path / "records.csv"), "--edges", str(tmp_path / "edges.csv"), "--out", str(tmp_path)]
    assert main(["partition", *common, "--method", "raw-hier", "--k", "2", "--geometry", str(tmp_path / "geo.json")]) == 0
    out = json.loads((tmp_path / "partitions" / "raw-hier_k2.geojson").read_text())
    assert {f["properties"]["cluster"] for f in out["features"]} == {0, 1}


def test_rerun_is_byte_identical(tmp_path):
    sc = synth.SynthScenario(rows=4, cols=4, region_count=2, seed=5)
    (tmp_path / "s.json").write_text(json.dumps(sc.to_json()))
    outputs = []
    for name in ("a", "b"):
        out = tmp_path / name
        main(["synth", "--scenario", str(tmp_path / "s.json"), "--out", str(out)])
        common = ["--records", str(out / "records.csv"), "--edges", str(out / "edges.csv"), "--out", str(out)]
        main(["partition", *common, "--method", "spectral", "--k", "2..3", "--threads", "1"])
        main(["evaluate", *common])
        outputs.append({p.relative_to(out): p.read_bytes() for p in sorted(out.rglob("*")) if p.is_file()})
    assert outputs[0] == outputs[1]
