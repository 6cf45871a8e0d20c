"""
RoomCraft 命令列介面

子命令: generate, extract, validate, optimize, metrics, render, graph, bench, sweep
stderr 每行輸出一個 JSON 診斷物件，結束代碼見 EXIT_CODES。
"""
import argparse
import json
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from roomcraft.core.config import EngineConfig, load_engine_config
from roomcraft.core.exceptions import BudgetExhausted, RoomCraftException
from roomcraft.services.action_service import action_service
from roomcraft.services.bench_service import bench_service
from roomcraft.services.constraint_service import constraint_service
from roomcraft.services.extraction_service import extraction_service
from roomcraft.services.graph_service import graph_service
from roomcraft.services.metrics_service import metrics_service
from roomcraft.services.pipeline_service import pipeline_service
from roomcraft.services.placement_service import placement_service
from roomcraft.services.render_service import render_service
from roomcraft.services.scene_service import scene_service
from roomcraft.utils.logging import get_logger, log_error_event, setup_logging

logger = get_logger("roomcraft.cli")

EXIT_OK = 0
EXIT_UNEXPECTED = 1

# 錯誤代碼 -> 結束代碼
EXIT_CODES = {
    "MALFORMED_DOCUMENT": 2,
    "SCHEMA_VIOLATION": 2,
    "DANGLING_REFERENCE": 2,
    "INVALID_DIMENSIONS": 2,
    "CYCLIC_SUPPORT": 2,
    "PRECONDITION_VIOLATION": 2,
    "UNKNOWN_ITEM": 2,
    "UNMAPPABLE_RELATION": 2,
    "ITEM_UNPLACEABLE": 3,
    "NO_CANDIDATE_SURFACE": 3,
    "BUDGET_EXHAUSTED": 4,
    "NO_REPAIR_FOUND": 4,
    "ACTION_INFEASIBLE": 4,
    "UNKNOWN_TARGET": 4,
    "UNPLACED_REFERENCE": 4,
    "EXTRACTION_FAILED": 5,
    "PROVIDER_UNAVAILABLE": 5,
    "EMPTY_SET": 6,
}

DEFAULT_RATIOS = (0.2, 0.5, 1.0, 2.0, 5.0)


def exit_code_for(error_code: str) -> int:
    """根據錯誤代碼取得對應的結束代碼"""
    return EXIT_CODES.get(error_code, EXIT_UNEXPECTED)


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise RoomCraftException(f"無法讀取 {path}: {e.strerror}", "PRECONDITION_VIOLATION", {"path": path})


def _write(text: str, path: Optional[str]):
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(text, encoding="utf-8")
    logger.info(f"已寫入 {target}")


def _floats(text: str) -> List[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"無法解析數值清單: {text}")


def _config(args: argparse.Namespace) -> EngineConfig:
    overrides: Dict[str, Dict[str, Any]] = {"caps": {}, "optimizer": {}, "bench": {}}
    if getattr(args, "seed", None) is not None:
        overrides["caps"]["seed"] = args.seed
        overrides["bench"]["seed"] = args.seed
    if getattr(args, "budget", None) is not None:
        overrides["optimizer"]["budget"] = args.budget
    if getattr(args, "n", None) is not None:
        overrides["bench"]["n"] = args.n
    if getattr(args, "densities", None) is not None:
        overrides["bench"]["densities"] = tuple(args.densities)
    if getattr(args, "workers", None) is not None:
        overrides["bench"]["workers"] = args.workers
    try:
        return load_engine_config(args.config, overrides)
    except RoomCraftException:
        raise
    except Exception as e:
        raise RoomCraftException(f"設定檔無效: {e}", "PRECONDITION_VIOLATION", {"path": args.config})


# ----------------------------------------------------------------------
# 子命令
# ----------------------------------------------------------------------

def cmd_generate(args: argparse.Namespace) -> int:
    config = _config(args)
    org = scene_service.parse_scene_spec(_read(args.spec))
    out_dir = Path(args.out or ".")
    stem = Path(args.spec).stem

    try:
        result = pipeline_service.generate(org, config)
        layout, placement_trace, correction = result.layout, result.placement.trace, result.correction
        failure: Optional[BudgetExhausted] = None
    except BudgetExhausted as e:
        layout, placement_trace, correction, failure = e.layout, None, e.trace, e

    if layout is not None and args.format in (None, "json"):
        text = placement_service.dump_layout(
            layout,
            placement_trace if args.trace else None,
            correction if args.trace else None,
        )
        _write(text, str(out_dir / f"{stem}.layout.json"))
    if layout is not None and args.format in (None, "svg"):
        _write(render_service.render_layout(layout), str(out_dir / f"{stem}.svg"))

    if failure is not None:
        raise failure
    return EXIT_OK


def cmd_extract(args: argparse.Namespace) -> int:
    text = args.text if args.text is not None else _read(args.input)
    org = extraction_service.extract(None, text, args.attach)
    _write(scene_service.serialize_scene_spec(org), args.out)
    return EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    org = scene_service.parse_scene_spec(_read(args.spec))
    issues = [issue.model_dump(mode="json") for issue in scene_service.validate_organization(org)]
    report = {
        "valid": True,
        "room_type": org.room_type.value,
        "furniture": len(org.furniture),
        "relations": len(org.relations),
        "issues": issues,
    }
    _write(json.dumps(report, ensure_ascii=False, indent=2) + "\n", args.out)
    return EXIT_OK


def cmd_optimize(args: argparse.Namespace) -> int:
    config = _config(args)
    org = scene_service.parse_scene_spec(_read(args.spec))
    layout, trace = placement_service.load_layout(_read(args.layout))
    constraints = constraint_service.compile_constraints(org, config.constraints)
    try:
        layout, correction = action_service.optimize_layout(layout, constraints, config.optimizer.budget, config)
    except BudgetExhausted as e:
        _write(placement_service.dump_layout(e.layout, trace, e.trace if args.trace else None), args.out)
        raise
    _write(placement_service.dump_layout(layout, trace, correction if args.trace else None), args.out)
    return EXIT_OK


def cmd_metrics(args: argparse.Namespace) -> int:
    config = _config(args)
    constraints: tuple = ()
    requested: Optional[List[str]] = None
    if args.spec:
        org = scene_service.parse_scene_spec(_read(args.spec))
        constraints = tuple(constraint_service.compile_constraints(org, config.constraints))
        requested = list(graph_service.build_graph(org).nodes)

    layouts = {}
    for path in args.layout:
        layout, _ = placement_service.load_layout(_read(path))
        layouts[path] = layout
    table = metrics_service.metrics_table(
        layouts,
        {name: constraints for name in layouts},
        {name: requested for name in layouts} if requested else None,
        config.metrics,
        config.constraints,
    )
    if args.format == "json":
        _write(table.to_json(orient="records", force_ascii=False, indent=2) + "\n", args.out)
    else:
        _write(table.to_csv(index=False, float_format="%.4f"), args.out)
    return EXIT_OK


def cmd_render(args: argparse.Namespace) -> int:
    layout, _ = placement_service.load_layout(_read(args.layout))
    _write(render_service.render_layout(layout), args.out)
    return EXIT_OK


def cmd_graph(args: argparse.Namespace) -> int:
    org = scene_service.parse_scene_spec(_read(args.spec))
    graph = graph_service.build_graph(org)
    if args.dot:
        _write(graph_service.to_dot(graph), args.out)
        return EXIT_OK
    order = graph_service.hdfs_order(graph)
    payload = {"order": list(order.items), "costs": order.costs, "anchors": list(graph.anchors)}
    _write(json.dumps(payload, ensure_ascii=False, indent=2) + "\n", args.out)
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    config = _config(args)
    table = bench_service.run_bench(config)
    _write(table.to_csv(index=False, float_format="%.4f"), args.out)
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    config = _config(args)
    table = bench_service.run_sweep(args.ratios, config)
    _write(table.to_csv(index=False, float_format="%.4f"), args.out)
    return EXIT_OK


# ----------------------------------------------------------------------
# 參數
# ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="roomcraft", description="約束驅動的室內佈局引擎")
    parser.add_argument("--log-level", default=None, help="日誌等級 (預設讀取 ROOMCRAFT_LOG_LEVEL)")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, config: bool = True):
        if config:
            p.add_argument("--config", default=None, help="TOML 設定檔")
            p.add_argument("--seed", type=int, default=None, help="隨機種子")
        p.add_argument("--out", default=None, help="輸出位置 (預設 stdout)")

    p = sub.add_parser("generate", help="由場景文件生成佈局")
    p.add_argument("--spec", required=True)
    p.add_argument("--trace", action="store_true", help="輸出擺放與修正紀錄")
    p.add_argument("--budget", type=int, default=None)
    p.add_argument("--format", choices=["json", "svg"], default=None, help="只輸出其中一種格式")
    common(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("extract", help="由文字描述擷取場景文件")
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument("--text")
    source.add_argument("--input", help="描述文字檔")
    p.add_argument("--attach", default=None, help="圖片或草圖附件")
    common(p, config=False)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("validate", help="驗證場景文件")
    p.add_argument("--spec", required=True)
    common(p, config=False)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("optimize", help="對既有佈局執行修正迴圈")
    p.add_argument("--spec", required=True)
    p.add_argument("--layout", required=True)
    p.add_argument("--trace", action="store_true")
    p.add_argument("--budget", type=int, default=None)
    common(p)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("metrics", help="計算佈局指標")
    p.add_argument("--layout", required=True, nargs="+")
    p.add_argument("--spec", default=None, help="提供時計入約束相關指標")
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    common(p)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("render", help="繪製佈局 SVG")
    p.add_argument("--layout", required=True)
    p.add_argument("--format", choices=["svg"], default="svg")
    common(p, config=False)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("graph", help="輸出關係圖或擺放順序")
    p.add_argument("--spec", required=True)
    p.add_argument("--dot", action="store_true", help="輸出 DOT 格式")
    common(p, config=False)
    p.set_defaults(func=cmd_graph)

    p = sub.add_parser("bench", help="擺放策略基準測試")
    p.add_argument("--n", type=int, default=None, help="每個密度的場景數")
    p.add_argument("--densities", type=_floats, default=None, help="以逗號分隔，例如 0.15,0.25,0.35")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--format", choices=["csv"], default="csv")
    common(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("sweep", help="α/β 比值掃描")
    p.add_argument("--ratios", type=_floats, default=list(DEFAULT_RATIOS))
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--densities", type=_floats, default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--format", choices=["csv"], default="csv")
    common(p)
    p.set_defaults(func=cmd_sweep)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(json_format=True, level=args.log_level)

    try:
        return args.func(args)
    except RoomCraftException as e:
        log_error_event(logger, e)
        return exit_code_for(e.error_code)
    except Exception as e:
        logger.error(f"未預期的錯誤: {e}", exc_info=True)
        return EXIT_UNEXPECTED


if __name__ == "__main__":
    sys.exit(main())
