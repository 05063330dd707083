import json
import subprocess
import sys

import pytest

from fspm_bridge import protocol, toy
from fspm_bridge.cli import main
from fspm_bridge.protocol import TargetServer
from fspm_bridge.xeg import parse_xeg, serialize_xeg


@pytest.fixture
def plant_file(tmp_path):
    p = tmp_path / "plant.xeg"
    p.write_text(serialize_xeg(toy.growth_export(toy.grow(1, 4))), encoding="utf-8")
    return p


@pytest.fixture
def configs(tmp_path):
    return toy.write_demo_configs(tmp_path / "cfg")


def empty_pipeline(tmp_path):
    p = tmp_path / "empty.xml"
    p.write_text('<pipeline direction="import"/>')
    return p


class TestConvert:
    def test_empty_pipeline_canonicalizes(self, tmp_path, plant_file, capsys):
        out = tmp_path / "out.xeg"
        code = main(["convert", str(plant_file), str(empty_pipeline(tmp_path)), str(out)])
        assert code == 0
        assert out.read_text() == plant_file.read_text()  # input was canonical

    def test_unmapped_edge_type_exit_4(self, tmp_path, configs, capsys):
        foreign = tmp_path / "foreign.xeg"
        foreign.write_text(
            '<graph root="1" version="1.0">\n'
            '  <node id="1" name="r" type="Plant" scale="0"/>\n'
            '  <node id="2" name="m" type="Metamer" scale="0"/>\n'
            '  <edge src_id="1" dst_id="2" type="refinement"/>\n</graph>\n')
        edgemap = tmp_path / "small_map.xml"
        edgemap.write_text('<edgemap><pair foreign="successor" native="successor"/>'
                           '</edgemap>')
        pipeline = tmp_path / "map.xml"
        pipeline.write_text('<pipeline><stage kind="map_edge_types" direction="in" '
                            'map="small_map.xml"/></pipeline>')
        code = main(["convert", str(foreign), str(pipeline),
                     str(tmp_path / "o.xeg"), "--lenient"])
        assert code == 4
        err = capsys.readouterr().err
        assert "map_edge_types" in err and "refinement" in err

    def test_scheme_convert_adds_parts(self, tmp_path, configs, capsys):
        single = tmp_path / "one.xeg"
        single.write_text(serialize_xeg(toy.growth_export(toy.grow(0, 1))))
        pipeline = tmp_path / "dec.xml"
        pipeline.write_text('<pipeline><stage kind="decompose_scale" '
                            'scheme="cfg/metamer_scheme.xml"/></pipeline>')
        out = tmp_path / "fine.xeg"
        assert main(["convert", str(single), str(pipeline), str(out)]) == 0
        fine = parse_xeg(out.read_text())
        assert fine.validate() == []
        assert fine.node_count == 5  # root + metamer + 3 parts

    def test_missing_input_exit_3(self, tmp_path, capsys):
        code = main(["convert", str(tmp_path / "nope.xeg"),
                     str(empty_pipeline(tmp_path)), str(tmp_path / "o.xeg")])
        assert code == 3


class TestValidateDiff:
    def test_validate_ok(self, plant_file):
        assert main(["validate", str(plant_file)]) == 0

    def test_validate_scale_violation_listing(self, tmp_path, capsys):
        bad = tmp_path / "bad.xeg"
        bad.write_text('<graph root="1" version="1.0">'
                       '<node id="1" name="r" type="N" scale="0"/>'
                       '<node id="2" name="p" type="N" scale="2"/>'
                       '<edge src_id="1" dst_id="2" type="decomposition"/></graph>')
        assert main(["validate", str(bad)]) == 1
        assert "scale-violation" in capsys.readouterr().out

    def test_diff_same_file(self, plant_file):
        assert main(["diff", str(plant_file), str(plant_file)]) == 0

    def test_diff_color_mutation(self, tmp_path, plant_file, capsys):
        mutated = tmp_path / "mutated.xeg"
        mutated.write_text(plant_file.read_text().replace(
            'value="brown"', 'value="green"', 1))
        assert main(["diff", str(plant_file), str(mutated)]) == 1
        assert "color" in capsys.readouterr().out

    def test_diff_parse_error_exit_3(self, tmp_path, plant_file):
        broken = tmp_path / "broken.xeg"
        broken.write_text("<graph")
        assert main(["diff", str(plant_file), str(broken)]) == 3


class TestRun:
    def test_run_against_live_server(self, tmp_path, configs, capsys):
        handler = lambda g, env: toy.water_handler(g, env, toy.WaterParams(100, 10))
        with TargetServer(handler, protocol.RETROACTIVE) as srv:
            roster = tmp_path / "roster.xml"
            roster.write_text(
                f'<roster><server address="127.0.0.1" port="{srv.port}" '
                f'mode="retroactive" import_pipeline="cfg/import_water.xml" '
                f'export_pipeline="cfg/export_water.xml"/></roster>')
            out = tmp_path / "final.xeg"
            report = tmp_path / "report.json"
            code = main(["run", "--roster", str(roster), "--steps", "3",
                         "--seed", "1", "--out", str(out), "--report", str(report)])
        assert code == 0
        summary = json.loads(capsys.readouterr().out)
        assert summary["steps"] == 3 and summary["exchanges"] == 3
        payload = json.loads(report.read_text())
        assert [s["index"] for s in payload["per_step"]] == [0, 1, 2]
        final = parse_xeg(out.read_text())
        colors = [n.prop("color").value for n in final.nodes.values()
                  if n.type_name == "Metamer"]
        assert colors and all(c == "green" for c in colors)

    def test_unreachable_port_exit_4(self, tmp_path, configs, capsys):
        roster = tmp_path / "roster.xml"
        import socket
        s = socket.socket()
        s.bind(("127.0.0.1", 0))
        port = s.getsockname()[1]
        s.close()
        roster.write_text(f'<roster><server address="127.0.0.1" port="{port}" '
                          f'mode="retroactive"/></roster>')
        code = main(["run", "--roster", str(roster), "--steps", "1",
                     "--out", str(tmp_path / "o.xeg")])
        assert code == 4


class TestDemo:
    def test_demo_one_step(self, capsys):
        assert main(["demo-roundtrip", "--steps", "1"]) == 0
        out = capsys.readouterr().out
        assert out.count("PASS") == 5 and "FAIL" not in out

    def test_demo_zero_steps_trivially_passes(self, capsys):
        assert main(["demo-roundtrip", "--steps", "0"]) == 0


def test_usage_error_exit_2():
    with pytest.raises(SystemExit) as info:
        main(["convert"])  # missing arguments
    assert info.value.code == 2


def test_subprocess_entry_point(tmp_path):
    plant = tmp_path / "p.xeg"
    plant.write_text(serialize_xeg(toy.growth_export(toy.grow(0, 2))))
    proc = subprocess.run([sys.executable, "-m", "fspm_bridge.cli",
                           "validate", str(plant)], capture_output=True, text=True)
    assert proc.returncode == 0
