"""
命令列介面的測試
"""
import json
import logging

import pytest

from roomcraft.cli import EXIT_CODES, exit_code_for, main
from roomcraft.utils.constants import LAYOUT_SCHEMA, SCENE_SCHEMA
from tests.factories import SceneFactory


@pytest.fixture(autouse=True)
def restore_root_handlers():
    """main() 會替換 root handler，測試後移除新增的 handler"""
    root = logging.getLogger()
    handlers, level = list(root.handlers), root.level
    yield
    for handler in list(root.handlers):
        if handler not in handlers:
            root.removeHandler(handler)
    root.setLevel(level)


def _last_diagnostic(err: str) -> dict:
    lines = [line for line in err.splitlines() if line.startswith("{")]
    return json.loads(lines[-1])


class TestGenerate:
    """generate 子命令測試類別"""

    def test_writes_layout_and_svg(self, write_spec, bedroom_spec, tmp_path):
        """測試輸出佈局 JSON 與 SVG"""
        spec = write_spec(bedroom_spec, "bedroom.json")
        out = tmp_path / "out"

        code = main(["generate", "--spec", str(spec), "--out", str(out), "--seed", "3"])

        assert code == 0
        document = json.loads((out / "bedroom.layout.json").read_text(encoding="utf-8"))
        assert document["schema"] == LAYOUT_SCHEMA
        assert [item["id"] for item in document["items"]] == ["bed", "nightstand", "lamp"]
        assert document["provenance"]["seed"] == 3
        assert "trace" not in document
        assert (out / "bedroom.svg").read_text(encoding="utf-8").startswith("<svg")

    def test_deterministic(self, write_spec, bedroom_spec, tmp_path):
        """測試相同種子輸出相同位元組"""
        spec = write_spec(bedroom_spec, "bedroom.json")

        for name in ("a", "b"):
            assert main(["generate", "--spec", str(spec), "--out", str(tmp_path / name), "--seed", "7"]) == 0

        for suffix in ("layout.json", "svg"):
            first = (tmp_path / "a" / f"bedroom.{suffix}").read_bytes()
            second = (tmp_path / "b" / f"bedroom.{suffix}").read_bytes()
            assert first == second

    def test_trace_and_format(self, write_spec, bedroom_spec, tmp_path):
        """測試只輸出 JSON 並附上紀錄"""
        spec = write_spec(bedroom_spec, "bedroom.json")

        code = main(["generate", "--spec", str(spec), "--out", str(tmp_path), "--format", "json", "--trace"])

        assert code == 0
        document = json.loads((tmp_path / "bedroom.layout.json").read_text(encoding="utf-8"))
        assert {entry["id"] for entry in document["trace"]["items"]} == {"bed", "nightstand", "lamp"}
        assert "correction" in document
        assert not (tmp_path / "bedroom.svg").exists()

    def test_malformed_spec(self, tmp_path, capsys):
        """測試格式錯誤的場景文件"""
        spec = tmp_path / "broken.json"
        spec.write_text("{not json", encoding="utf-8")

        code = main(["generate", "--spec", str(spec), "--out", str(tmp_path)])

        assert code == 2
        assert _last_diagnostic(capsys.readouterr().err)["error_code"] == "MALFORMED_DOCUMENT"

    def test_missing_spec(self, tmp_path):
        """測試場景文件不存在"""
        assert main(["generate", "--spec", str(tmp_path / "missing.json")]) == 2

    def test_unplaceable(self, write_spec, tmp_path, capsys):
        """測試房間放不下所有家具"""
        spec = write_spec(SceneFactory.spec(
            room={"width": 2.0, "depth": 2.0},
            furniture=[{"id": "bed", "category": "bed", "count": 2}],
            relations=[],
        ))

        code = main(["generate", "--spec", str(spec), "--out", str(tmp_path)])

        assert code == 3
        assert _last_diagnostic(capsys.readouterr().err)["error_code"] == "ITEM_UNPLACEABLE"

    def test_invalid_budget(self, write_spec, bedroom_spec, tmp_path):
        """測試不合法的修正預算"""
        spec = write_spec(bedroom_spec)

        assert main(["generate", "--spec", str(spec), "--out", str(tmp_path), "--budget", "0"]) == 2


class TestOtherCommands:
    """其他子命令測試類別"""

    def test_validate(self, write_spec, bedroom_spec, capsys):
        """測試驗證報告"""
        code = main(["validate", "--spec", str(write_spec(bedroom_spec))])

        report = json.loads(capsys.readouterr().out)
        assert code == 0
        assert report["valid"] is True
        assert report["furniture"] == 3
        assert report["relations"] == 3

    def test_graph_order(self, write_spec, bedroom_spec, capsys):
        """測試輸出擺放順序"""
        code = main(["graph", "--spec", str(write_spec(bedroom_spec))])

        payload = json.loads(capsys.readouterr().out)
        assert code == 0
        assert payload["order"] == ["bed", "nightstand", "lamp"]
        assert payload["anchors"] == ["wall:north"]

    def test_graph_dot(self, write_spec, bedroom_spec, capsys):
        """測試輸出 DOT"""
        assert main(["graph", "--spec", str(write_spec(bedroom_spec)), "--dot"]) == 0
        assert capsys.readouterr().out.startswith("digraph")

    def test_extract(self, capsys):
        """測試以模擬服務擷取場景文件"""
        code = main(["extract", "--text", "a bedroom with a bed against the north wall"])

        document = json.loads(capsys.readouterr().out)
        assert code == 0
        assert document["schema"] == SCENE_SCHEMA
        assert document["room_type"] == "bedroom"

    def test_extract_empty_text(self):
        """測試空白描述"""
        assert main(["extract", "--text", " "]) == 2

    def test_layout_commands(self, write_spec, bedroom_spec, tmp_path, capsys):
        """測試 render、metrics 與 optimize 讀取生成的佈局"""
        spec = write_spec(bedroom_spec, "bedroom.json")
        assert main(["generate", "--spec", str(spec), "--out", str(tmp_path), "--format", "json"]) == 0
        layout = str(tmp_path / "bedroom.layout.json")
        capsys.readouterr()

        assert main(["render", "--layout", layout]) == 0
        assert capsys.readouterr().out.startswith("<svg")

        assert main(["metrics", "--layout", layout, "--spec", str(spec)]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0] == "name,oob_flag,oob,ori,coherence,completeness"
        assert lines[-1].startswith("aggregate,0,")

        optimized = tmp_path / "optimized.json"
        assert main(["optimize", "--spec", str(spec), "--layout", layout, "--out", str(optimized)]) == 0
        assert json.loads(optimized.read_text(encoding="utf-8"))["schema"] == LAYOUT_SCHEMA

    def test_metrics_json(self, write_spec, bedroom_spec, tmp_path, capsys):
        """測試以 JSON 輸出指標"""
        spec = write_spec(bedroom_spec, "bedroom.json")
        assert main(["generate", "--spec", str(spec), "--out", str(tmp_path), "--format", "json"]) == 0
        capsys.readouterr()

        assert main(["metrics", "--layout", str(tmp_path / "bedroom.layout.json"), "--format", "json"]) == 0
        rows = json.loads(capsys.readouterr().out)
        assert rows[-1]["name"] == "aggregate"

    def test_bench(self, capsys):
        """測試小型基準測試"""
        assert main(["bench", "--n", "1", "--densities", "0.25", "--seed", "2"]) == 0

        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0].startswith("density,strategy,scenes")
        assert len(lines) == 4

    def test_sweep(self, capsys):
        """測試小型比值掃描"""
        assert main(["sweep", "--ratios", "1,2", "--n", "1", "--densities", "0.25"]) == 0

        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0].startswith("ratio,alpha,beta")
        assert len(lines) == 3


class TestExitCodes:
    """結束代碼對照測試類別"""

    @pytest.mark.parametrize("error_code, expected", [
        ("MALFORMED_DOCUMENT", 2),
        ("CYCLIC_SUPPORT", 2),
        ("ITEM_UNPLACEABLE", 3),
        ("NO_CANDIDATE_SURFACE", 3),
        ("BUDGET_EXHAUSTED", 4),
        ("EXTRACTION_FAILED", 5),
        ("PROVIDER_UNAVAILABLE", 5),
        ("EMPTY_SET", 6),
        ("SOMETHING_ELSE", 1),
    ])
    def test_exit_code_for(self, error_code, expected):
        """測試錯誤代碼對應的結束代碼"""
        assert exit_code_for(error_code) == expected

    def test_codes_in_range(self):
        """測試所有結束代碼介於 2 到 6"""
        assert set(EXIT_CODES.values()) == {2, 3, 4, 5, 6}
