"""
佈局評估指標服務模組

提供佈局品質指標：
- OOB 判定與 OOB 比率
- 朝向正確率 (ORI)
- 約束一致性分數
- 完整度與指標總表
"""
import itertools
import math
from typing import Dict, Mapping, Optional, Sequence

import pandas as pd

from roomcraft.core.config import ConstraintConfig, MetricsConfig
from roomcraft.core.exceptions import EmptySet
from roomcraft.schemas.constraint import ConstraintTuple
from roomcraft.schemas.layout import Layout, PlacedItem
from roomcraft.schemas.metrics import LayoutMetrics, OobReport
from roomcraft.services.constraint_service import ConstraintService, constraint_service
from roomcraft.services.placement_service import placement_service
from roomcraft.utils.constants import OVERLAP_TOLERANCE, ConstraintKind
from roomcraft.utils.geometry import (
    facing_vector,
    footprint_polygon,
    intersection_area,
    outside_area,
    outside_distance,
    z_overlap,
)
from roomcraft.utils.logging import get_logger

logger = get_logger(__name__)

METRIC_COLUMNS = ["name", "oob_flag", "oob", "ori", "coherence", "completeness"]
AGGREGATE_ROW = "aggregate"


def coherence_scale(c: ConstraintTuple) -> float:
    """約束違規量的正規化尺度"""
    if c.ctype == ConstraintKind.ORIENTATION:
        return math.pi
    if c.ctype == ConstraintKind.COUNT:
        return max(1.0, c.number("n", c.number("min", 1.0)))
    return 1.0


class MetricsService:
    """佈局評估指標服務類別"""

    def __init__(self, config: Optional[MetricsConfig] = None, constraints: Optional[ConstraintService] = None):
        self.config = config or MetricsConfig()
        self.constraints = constraints or constraint_service

    def oob_flag(self, layout: Layout, config: Optional[MetricsConfig] = None) -> OobReport:
        """
        OOB 判定

        家具超出牆面超過 oob_margin，或任兩件家具交疊面積超過較小者的 oob_overlap_ratio 時標記。
        """
        config = config or self.config
        room = layout.room
        outside = []
        worst = 0.0
        for item in layout.items:
            distance = outside_distance(item.corners(), room.width, room.depth)
            worst = max(worst, distance)
            if distance > config.oob_margin:
                outside.append(item.id)

        intersecting = []
        for a, b in itertools.combinations(layout.items, 2):
            if not z_overlap(a.z, a.h, b.z, b.h):
                continue
            area = intersection_area(a.polygon(), b.polygon())
            if area > config.oob_overlap_ratio * min(a.area, b.area):
                intersecting.append((a.id, b.id))

        return OobReport(
            flagged=bool(outside or intersecting),
            outside=tuple(outside),
            intersecting=tuple(intersecting),
            max_outside=worst,
        )

    def oob_rate(self, layouts: Sequence[Layout], config: Optional[MetricsConfig] = None) -> float:
        """被標記為 OOB 的佈局百分比"""
        if not layouts:
            raise EmptySet()
        flagged = sum(1 for layout in layouts if self.oob_flag(layout, config).flagged)
        return 100.0 * flagged / len(layouts)

    def clearance_zone(self, item: PlacedItem, depth: float):
        """家具正前方的淨空區 (寬度同家具，深度 depth)"""
        fx, fy = facing_vector(item.yaw)
        reach = item.d / 2 + depth / 2
        return footprint_polygon(item.x + fx * reach, item.y + fy * reach, item.w, depth, item.yaw)

    def item_oriented(
        self,
        item: PlacedItem,
        layout: Layout,
        constraints: Sequence[ConstraintTuple] = (),
        config: Optional[MetricsConfig] = None,
        constraint_config: Optional[ConstraintConfig] = None
    ) -> bool:
        config = config or self.config
        room = layout.room
        zone = self.clearance_zone(item, config.clearance_depth)
        if outside_area(zone, room.width, room.depth) > OVERLAP_TOLERANCE:
            return False
        for other in layout.items:
            if other.id == item.id or not z_overlap(item.z, item.h, other.z, other.h):
                continue
            if intersection_area(zone, other.polygon()) > OVERLAP_TOLERANCE:
                return False
        for c in constraints:
            if c.ctype == ConstraintKind.ORIENTATION and item.id in c.objects:
                if self.constraints.evaluate_constraint(c, layout, config=constraint_config).magnitude > 0:
                    return False
        return True

    def orientation_correctness(
        self,
        layout: Layout,
        constraints: Sequence[ConstraintTuple] = (),
        config: Optional[MetricsConfig] = None,
        constraint_config: Optional[ConstraintConfig] = None
    ) -> float:
        """
        朝向正確率 (ORI)

        家具正前方淨空區位於房間內且不與其他家具交疊，並滿足所有相關朝向約束時視為正確。

        Returns:
            正確家具的百分比；空佈局回傳 100.0
        """
        if not layout.items:
            return 100.0
        correct = sum(
            1 for item in layout.items
            if self.item_oriented(item, layout, constraints, config, constraint_config)
        )
        return 100.0 * correct / len(layout.items)

    def coherence_score(
        self,
        layout: Layout,
        constraints: Sequence[ConstraintTuple],
        constraint_config: Optional[ConstraintConfig] = None
    ) -> float:
        """1 減去正規化後的加權平均違規量，範圍 [0, 1]"""
        total_weight = math.fsum(c.weight for c in constraints)
        if total_weight <= 0:
            return 1.0
        penalty = math.fsum(
            c.weight * min(1.0, self.constraints.evaluate_constraint(c, layout, i, constraint_config).magnitude
                           / coherence_scale(c))
            for i, c in enumerate(constraints)
        )
        return max(0.0, 1.0 - min(1.0, penalty / total_weight))

    def completeness(self, layout: Layout, requested: Sequence[str]) -> float:
        """要求的家具中已擺放且沒有碰撞紀錄者的百分比"""
        if not requested:
            raise EmptySet("要求的家具清單不可為空")
        colliding = {i for record in placement_service.detect_collisions(layout) for i in record.ids}
        present = sum(1 for item_id in requested if layout.get(item_id) is not None and item_id not in colliding)
        return 100.0 * present / len(requested)

    def layout_metrics(
        self,
        name: str,
        layout: Layout,
        constraints: Sequence[ConstraintTuple] = (),
        requested: Optional[Sequence[str]] = None,
        config: Optional[MetricsConfig] = None,
        constraint_config: Optional[ConstraintConfig] = None
    ) -> LayoutMetrics:
        requested = list(requested) if requested is not None else [item.id for item in layout.items]
        return LayoutMetrics(
            name=name,
            oob_flag=self.oob_flag(layout, config).flagged,
            ori=self.orientation_correctness(layout, constraints, config, constraint_config),
            coherence=self.coherence_score(layout, constraints, constraint_config),
            completeness=self.completeness(layout, requested) if requested else 100.0,
        )

    def metrics_table(
        self,
        layouts: Mapping[str, Layout],
        constraints: Optional[Mapping[str, Sequence[ConstraintTuple]]] = None,
        requested: Optional[Mapping[str, Sequence[str]]] = None,
        config: Optional[MetricsConfig] = None,
        constraint_config: Optional[ConstraintConfig] = None
    ) -> pd.DataFrame:
        """
        每個佈局一列的指標表，最後附上彙總列

        Returns:
            欄位為 METRIC_COLUMNS 的 DataFrame，依名稱排序
        """
        if not layouts:
            raise EmptySet()
        constraints = constraints or {}
        requested = requested or {}
        rows = []
        for name in sorted(layouts):
            metrics = self.layout_metrics(
                name, layouts[name], constraints.get(name, ()), requested.get(name),
                config, constraint_config,
            )
            row: Dict[str, object] = metrics.model_dump()
            row["oob_flag"] = int(metrics.oob_flag)
            row["oob"] = 100.0 * row["oob_flag"]
            rows.append(row)

        df = pd.DataFrame(rows, columns=METRIC_COLUMNS)
        aggregate = {
            "name": AGGREGATE_ROW,
            "oob_flag": int(df["oob_flag"].sum()),
            "oob": float(df["oob"].mean()),
            "ori": float(df["ori"].mean()),
            "coherence": float(df["coherence"].mean()),
            "completeness": float(df["completeness"].mean()),
        }
        df = pd.concat([df, pd.DataFrame([aggregate], columns=METRIC_COLUMNS)], ignore_index=True)
        logger.info(f"計算 {len(layouts)} 個佈局的指標，OOB {aggregate['oob']:.1f}%")
        return df


metrics_service = MetricsService()
