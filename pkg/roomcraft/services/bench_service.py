"""
基準測試服務模組

提供擺放策略的比較功能：
- 依房間範本與目標密度產生場景
- CAPS / 無 CAPS / 隨機擺放三種策略
- α/β 比值掃描
"""
import json
import math
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from roomcraft.core.config import CapsConfig, EngineConfig
from roomcraft.core.exceptions import PreconditionViolation, RoomCraftException
from roomcraft.schemas.layout import Layout, PlacedItem, Provenance
from roomcraft.schemas.scene import SceneOrganization
from roomcraft.services.constraint_service import constraint_service
from roomcraft.services.graph_service import graph_service
from roomcraft.services.metrics_service import metrics_service
from roomcraft.services.pipeline_service import pipeline_service
from roomcraft.services.placement_service import placement_service
from roomcraft.services.scene_service import scene_service
from roomcraft.utils.constants import (
    ARCHITECTURAL_IDS,
    CARDINAL_YAWS,
    SCENE_SCHEMA,
    BenchStrategy,
    Mount,
    RoomType,
)
from roomcraft.utils.data import bench_templates
from roomcraft.utils.logging import get_logger

logger = get_logger(__name__)

BENCH_COLUMNS = ["density", "strategy", "scenes", "failed", "fallback_items", "oob", "ori", "completeness", "coherence"]
SWEEP_COLUMNS = ["ratio", "alpha", "beta", "scenes", "oob", "ori", "completeness", "coherence"]
STRATEGY_ORDER = [BenchStrategy.CAPS, BenchStrategy.NO_CAPS, BenchStrategy.RANDOM]

MIN_PREFIX = 3
# 房間短邊至少比最大家具多出的距離 (公尺)
ROOM_SLACK = 0.4


def _density_key(density: float) -> int:
    return int(round(density * 1000))


def failed_row() -> Dict[str, Any]:
    """求解失敗的場景: 計為越界且其餘指標為 0"""
    return {"failed": 1, "fallback_items": 0, "oob_flag": 1, "ori": 0.0, "completeness": 0.0, "coherence": 0.0}


class BenchService:
    """基準測試服務類別"""

    # ------------------------------------------------------------------
    # 場景產生
    # ------------------------------------------------------------------

    def generate_spec(
        self,
        density: float,
        index: int,
        seed: int,
        max_items: int = 12
    ) -> SceneOrganization:
        """
        依範本產生一個場景

        取範本前 k 件家具 (展開後不超過 max_items)，再依落地家具的底面積
        與目標密度反推房間面積，長寬比取自房間預設值並加入亂數擾動。
        """
        rng = np.random.default_rng([seed, _density_key(density), index])
        templates = bench_templates()
        room_type = sorted(templates)[int(rng.integers(len(templates)))]
        entries = templates[room_type]

        k = int(rng.integers(min(MIN_PREFIX, len(entries)), len(entries) + 1))
        chosen: List[Dict[str, Any]] = []
        total = 0
        for entry in entries[:k]:
            count = int(entry.get("count", 1))
            if total + count > max_items:
                break
            chosen.append(entry)
            total += count

        ids = {entry["category"] for entry in chosen}
        furniture = []
        relations = []
        footprint = 0.0
        largest = 0.0
        for entry in chosen:
            category = entry["category"]
            count = int(entry.get("count", 1))
            size = scene_service.catalog_entry(category)
            kept = [
                rel for rel in entry.get("relations", [])
                if rel["object"] in ids or rel["object"] in ARCHITECTURAL_IDS
            ]
            on_support = any(rel["relation"] == "on_top_of" for rel in kept)
            mount = "on_top" if on_support else size["mount"]
            if mount == "on_top" and not on_support:
                mount = "floor"
            furniture.append({"id": category, "category": category, "count": count, "mount": mount})
            if mount == Mount.FLOOR.value:
                footprint += count * size["w"] * size["d"]
            largest = max(largest, size["w"], size["d"])
            for rel in kept:
                relations.append({
                    "subject": category,
                    "object": rel["object"],
                    "relation": rel["relation"],
                    "params": rel.get("params", {}),
                })

        defaults = scene_service.room_defaults[room_type]
        aspect = defaults["width"] / defaults["depth"] * float(rng.uniform(0.8, 1.25))
        area = max(footprint, 0.25) / density
        width = math.sqrt(area * aspect)
        depth = area / width
        shortest = largest + ROOM_SLACK
        if min(width, depth) < shortest:
            scale = shortest / min(width, depth)
            width, depth = width * scale, depth * scale

        document = {
            "schema": SCENE_SCHEMA,
            "room_type": RoomType(room_type).value,
            "room": {"width": round(width, 3), "depth": round(depth, 3)},
            "furniture": furniture,
            "relations": relations,
        }
        return scene_service.parse_scene_spec(json.dumps(document))

    # ------------------------------------------------------------------
    # 策略
    # ------------------------------------------------------------------

    def random_layout(self, org: SceneOrganization, caps: CapsConfig, rng: np.random.Generator) -> Layout:
        """隨機擺放基準: 位置在房間 (或支撐物) 範圍內均勻取樣，朝向取四個正交方向之一"""
        graph = graph_service.build_graph(org)
        order = graph_service.hdfs_order(graph)
        room = scene_service.room_from_spec(org)
        layout = Layout(room=room, provenance=Provenance(seed=caps.seed))
        for item_id in order.items:
            item = graph.items[item_id]
            support_id = graph.support_of(item_id)
            support = layout.get(support_id) if support_id else None
            if support is not None:
                x = float(rng.uniform(support.x - support.w / 2, support.x + support.w / 2))
                y = float(rng.uniform(support.y - support.d / 2, support.y + support.d / 2))
            else:
                x = float(rng.uniform(0.0, room.width))
                y = float(rng.uniform(0.0, room.depth))
            yaw = float(CARDINAL_YAWS[int(rng.integers(len(CARDINAL_YAWS)))])
            placed = PlacedItem(
                id=item.id, category=item.category, x=x, y=y,
                z=placement_service.item_z(item, room, caps, support), yaw=yaw,
                w=item.w, d=item.d, h=item.h, color=item.color, material=item.material,
                mount=item.mount, support=support_id,
            )
            layout = layout.with_items(layout.items + (placed,))
        return layout

    def solve(
        self,
        org: SceneOrganization,
        strategy: BenchStrategy,
        caps: CapsConfig,
        rng: np.random.Generator
    ) -> Tuple[Layout, int]:
        """
        Returns:
            (佈局, 改用不可行位置的家具數)
        """
        if strategy == BenchStrategy.RANDOM:
            return self.random_layout(org, caps, rng), 0
        if strategy == BenchStrategy.NO_CAPS:
            caps = caps.model_copy(update={"adaptive": False})
        result = pipeline_service.place(org, caps, strict=False)
        return result.layout, len(result.trace.fallback_ids)

    def score_scene(
        self,
        org: SceneOrganization,
        strategy: BenchStrategy,
        config: EngineConfig,
        caps: CapsConfig,
        rng: np.random.Generator
    ) -> Dict[str, Any]:
        try:
            layout, fallback = self.solve(org, strategy, caps, rng)
        except RoomCraftException as e:
            logger.warning(f"{strategy.value} 求解失敗: {e.error_code}")
            return failed_row()

        constraints = constraint_service.compile_constraints(org, config.constraints)
        requested = [item.id for item in graph_service.build_graph(org).items.values()]
        metrics = metrics_service.layout_metrics(
            "", layout, constraints, requested, config.metrics, config.constraints
        )
        return {
            "failed": 0,
            "fallback_items": fallback,
            "oob_flag": int(metrics.oob_flag),
            "ori": metrics.ori,
            "completeness": metrics.completeness,
            "coherence": metrics.coherence,
        }

    # ------------------------------------------------------------------
    # 基準測試與掃描
    # ------------------------------------------------------------------

    def run_bench(
        self,
        config: Optional[EngineConfig] = None,
        n: Optional[int] = None,
        densities: Optional[Sequence[float]] = None,
        seed: Optional[int] = None,
        workers: Optional[int] = None,
        strategies: Sequence[BenchStrategy] = tuple(STRATEGY_ORDER)
    ) -> pd.DataFrame:
        """
        比較各擺放策略

        Returns:
            每個 (密度, 策略) 一列的 DataFrame，依密度與策略排序；單一場景失敗只計數
        """
        config = config or EngineConfig()
        bench = config.bench
        n = bench.n if n is None else n
        densities = tuple(bench.densities if densities is None else densities)
        seed = bench.seed if seed is None else seed
        workers = bench.workers if workers is None else workers
        if n < 1:
            raise PreconditionViolation("n 必須 >= 1")

        tasks = [
            (config, density, index, seed, tuple(strategies), config.caps)
            for density in densities
            for index in range(n)
        ]
        logger.info(f"基準測試: {len(tasks)} 個場景, 策略 {[s.value for s in strategies]}")
        scene_rows = self._map(tasks, workers)

        df = pd.DataFrame([row for rows in scene_rows for row in rows])
        return self._aggregate(df, ["density", "strategy"], BENCH_COLUMNS)

    def run_sweep(
        self,
        ratios: Sequence[float],
        config: Optional[EngineConfig] = None,
        n: Optional[int] = None,
        seed: Optional[int] = None,
        workers: Optional[int] = None
    ) -> pd.DataFrame:
        """
        α/β 比值掃描: 每個比值 r 設定 α = r/(1+r)、β = 1/(1+r) 後以 CAPS 執行基準測試

        Returns:
            每個比值一列的 DataFrame
        """
        config = config or EngineConfig()
        if not ratios or any(r <= 0 for r in ratios):
            raise PreconditionViolation("比值必須為正數")
        n = config.bench.n if n is None else n
        seed = config.bench.seed if seed is None else seed
        workers = config.bench.workers if workers is None else workers

        tasks = []
        for ratio in sorted(set(ratios)):
            caps = CapsConfig.from_ratio(ratio, **config.caps.model_dump(exclude={"alpha0", "beta0"}))
            for density in config.bench.densities:
                for index in range(n):
                    tasks.append((config, density, index, seed, (BenchStrategy.CAPS,), caps))
        scene_rows = self._map(tasks, workers)

        rows = []
        for (_, _, _, _, _, caps), results in zip(tasks, scene_rows):
            for row in results:
                row.update({"ratio": round(caps.alpha0 / caps.beta0, 9), "alpha": caps.alpha0, "beta": caps.beta0})
                rows.append(row)
        df = pd.DataFrame(rows)
        summary = self._aggregate(df, ["ratio", "alpha", "beta"], SWEEP_COLUMNS)
        logger.info(f"比值掃描完成: {len(summary)} 個比值")
        return summary

    def _map(self, tasks: List[tuple], workers: int) -> List[List[Dict[str, Any]]]:
        if workers > 1 and len(tasks) > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                return list(pool.map(_run_scene, tasks))
        return [_run_scene(task) for task in tasks]

    def _aggregate(
        self,
        df: pd.DataFrame,
        keys: List[str],
        columns: List[str]
    ) -> pd.DataFrame:
        grouped = df.groupby(keys, sort=True).agg(
            scenes=("oob_flag", "size"),
            failed=("failed", "sum"),
            fallback_items=("fallback_items", "sum"),
            oob=("oob_flag", "mean"),
            ori=("ori", "mean"),
            completeness=("completeness", "mean"),
            coherence=("coherence", "mean"),
        ).reset_index()
        grouped["oob"] = grouped["oob"] * 100.0
        if "strategy" in keys:
            rank = {s.value: i for i, s in enumerate(STRATEGY_ORDER)}
            grouped["_rank"] = grouped["strategy"].map(rank)
            grouped = grouped.sort_values(["density", "_rank"]).drop(columns="_rank")
        return grouped[columns].reset_index(drop=True)


def _run_scene(task: tuple) -> List[Dict[str, Any]]:
    """單一場景在各策略下的指標 (模組層級函式以便行程池序列化)"""
    config, density, index, seed, strategies, caps = task
    try:
        org: Optional[SceneOrganization] = bench_service.generate_spec(density, index, seed, config.bench.max_items)
    except RoomCraftException as e:
        logger.warning(f"場景 {density}/{index} 產生失敗: {e.error_code}")
        org = None
    rows = []
    for strategy in strategies:
        rng = np.random.default_rng([seed, _density_key(density), index, STRATEGY_ORDER.index(strategy)])
        if org is None:
            row = failed_row()
        else:
            row = bench_service.score_scene(org, strategy, config, caps, rng)
        row.update({"density": density, "strategy": strategy.value, "index": index})
        rows.append(row)
    return rows


bench_service = BenchService()
