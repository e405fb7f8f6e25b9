import csv
import json
import xml.etree.ElementTree as ET

import pytest

from fabtune.autotune import best, load_study
from fabtune.cli import main
from fabtune.config import data_path

NS = "{http://www.w3.org/2000/svg}"


@pytest.fixture
def short_ring(tmp_path):
    data = json.loads(data_path("scenario_ring.json").read_text())
    data["T"] = 40
    path = tmp_path / "ring_short.json"
    path.write_text(json.dumps(data))
    return str(path)


@pytest.fixture
def study_file(tmp_path, short_ring):
    out = tmp_path / "study.jsonl"
    assert main(["tune", "--scenario", short_ring, "--seed", "1", "--trials", "12",
                 "--out", str(out), "--quiet"]) == 0
    return out


def run(capsys, argv):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


class TestUsage:
    @pytest.mark.parametrize("argv", [
        [],
        ["tune", "--out", "x.jsonl"],
        ["tune", "--seed", "0", "--trials", "0", "--out", "x.jsonl"],
        ["eval", "--seed", "0"],
        ["eval", "--seed", "0", "--manual", "--scenarios", "0"],
        ["compare", "--seed", "0", "only=manual"],
        ["compare", "--seed", "0", "a=manual", "a=manual"],
        ["compare", "--seed", "0", "nolabel"],
        ["frobnicate"],
    ])
    def test_exit_two(self, argv, tmp_path, monkeypatch, capsys):
        monkeypatch.chdir(tmp_path)
        assert run(capsys, argv)[0] == 2

    def test_version(self, capsys):
        code, out, _ = run(capsys, ["--version"])
        assert code == 0 and "fabtune" in out

    def test_bad_config_exits_two(self, tmp_path, capsys):
        bad = tmp_path / "s.json"
        bad.write_text('{"robot": "planar3", "q0": [0, 0, 0], "goal": [1, 0], "extra": 1}')
        code, _, err = run(capsys, ["eval", "--seed", "0", "--manual", "--scenario", str(bad)])
        assert code == 2 and "extra" in err

    def test_params_out_of_bounds(self, tmp_path, short_ring, capsys):
        from fabtune.space import SearchSpace
        p = tmp_path / "p.json"
        p.write_text(json.dumps(dict(SearchSpace.default().manual(), m_base=3.0)))
        code, _, err = run(capsys, ["eval", "--seed", "0", "--params", str(p), "--scenario", short_ring])
        assert code == 2 and "m_base" in err


class TestTune:
    def test_writes_study(self, study_file):
        study = load_study(study_file)
        assert len(study) == 12 and study.master_seed == 1 and study.sampler == "tpe"
        assert study.planner["robot"]["name"] == "planar3"

    def test_resume_matches_single_run(self, tmp_path, short_ring, study_file):
        out = tmp_path / "part.jsonl"
        base = ["tune", "--scenario", short_ring, "--seed", "1", "--out", str(out), "--quiet"]
        assert main(base + ["--trials", "5"]) == 0
        assert main(base + ["--trials", "12", "--resume"]) == 0
        assert load_study(out).trials == load_study(study_file).trials

    def test_resume_seed_mismatch(self, short_ring, study_file, capsys):
        code = run(capsys, ["tune", "--scenario", short_ring, "--seed", "2", "--trials", "13",
                            "--out", str(study_file), "--resume"])[0]
        assert code == 2

    def test_json_summary(self, tmp_path, short_ring, capsys):
        code, out, _ = run(capsys, ["tune", "--scenario", short_ring, "--seed", "3", "--trials", "2",
                                    "--sampler", "random", "--out", str(tmp_path / "r.jsonl"), "--json"])
        summary = json.loads(out)
        assert code == 0 and summary["trials"] == 2 and summary["sampler"] == "random"


class TestEval:
    def test_deterministic_output(self, short_ring, capsys):
        argv = ["eval", "--seed", "4", "--manual", "--scenario", short_ring, "--scenarios", "3"]
        first = run(capsys, argv)
        assert first[0] == 0 and run(capsys, argv) == first

    def test_from_study_and_files(self, tmp_path, study_file, capsys):
        traj, tcsv, mcsv = tmp_path / "t.svg", tmp_path / "t.csv", tmp_path / "m.csv"
        code, out, _ = run(capsys, ["eval", "--seed", "0", "--from-study", str(study_file),
                                    "--scenarios", "2", "--traj", str(traj), "--traj-csv", str(tcsv),
                                    "--csv", str(mcsv), "--json"])
        assert code == 0
        summary = json.loads(out)
        assert summary["parameters"] == best(load_study(study_file)).params
        ET.parse(traj)
        assert len(list(csv.reader(open(mcsv)))) == 3
        assert len(list(csv.reader(open(tcsv)))) == 42

    def test_corrupt_study(self, tmp_path, capsys):
        bad = tmp_path / "bad.jsonl"
        bad.write_text("garbage\n")
        assert run(capsys, ["eval", "--seed", "0", "--from-study", str(bad)])[0] == 2


class TestCompare:
    def test_three_sources(self, tmp_path, short_ring, study_file, capsys):
        from fabtune.space import SearchSpace
        params = tmp_path / "p.json"
        params.write_text(json.dumps(dict(SearchSpace.default().manual(), b_max=12.0)))
        svg, table = tmp_path / "c.svg", tmp_path / "c.csv"
        code, out, _ = run(capsys, ["compare", "--seed", "0", "--scenario", short_ring,
                                    f"tuned={study_file}", "manual=manual", f"file={params}",
                                    "--svg", str(svg), "--csv", str(table), "--json"])
        assert code == 0
        boxes = ET.parse(svg).getroot().findall(f".//{NS}g[@class='box']")
        assert [b.get("data-label") for b in boxes] == ["tuned", "manual", "file"]
        rows = list(csv.DictReader(open(table)))
        assert len(rows) == 30
        summary = json.loads(out)
        for b in boxes:
            label = b.get("data-label")
            costs = sorted(float(r["cost"]) for r in rows if r["label"] == label)
            assert float(b.get("data-median")) == summary["sources"][label]["median"]
            assert sorted(float(v) for v in b.get("data-values").split()) == costs

    def test_robot_mismatch(self, tmp_path, study_file, capsys):
        ring2 = str(data_path("scenario_ring_2link.json"))
        robot2 = str(data_path("robot_2link.json"))
        code, _, err = run(capsys, ["compare", "--seed", "0", "--robot", robot2, "--scenario", ring2,
                                    f"tuned={study_file}", "manual=manual"])
        assert code == 2 and "planar3" in err


class TestPlotHistory:
    def test_markers(self, tmp_path, study_file, capsys):
        out = tmp_path / "h.svg"
        code, stdout, _ = run(capsys, ["plot-history", str(study_file), "--out", str(out), "--json"])
        assert code == 0
        root = ET.parse(out).getroot()
        assert len(root.findall(f".//{NS}*[@data-index]")) == 12
        line = root.find(f".//{NS}polyline[@class='best-so-far']")
        final = float(line.get("data-values").split()[-1])
        assert final == best(load_study(study_file)).cost == json.loads(stdout)["best_cost"]

    def test_corrupt_exits_one(self, tmp_path, capsys):
        bad = tmp_path / "bad.jsonl"
        bad.write_text("{}\n")
        assert run(capsys, ["plot-history", str(bad), "--out", str(tmp_path / "h.svg")])[0] == 1

    def test_missing_exits_one(self, tmp_path, capsys):
        assert run(capsys, ["plot-history", str(tmp_path / "none.jsonl"),
                            "--out", str(tmp_path / "h.svg")])[0] == 1
