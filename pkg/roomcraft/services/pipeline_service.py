"""
場景生成流程服務

解析 -> 關係圖 -> HDFS 順序 -> 房間 -> 逐一擺放 -> 約束編譯 -> 修正迴圈
"""
from typing import List, Optional, Tuple

from pydantic import BaseModel, ConfigDict

from roomcraft.core.config import CapsConfig, EngineConfig, config_hash
from roomcraft.schemas.constraint import ConstraintTuple, CorrectionTrace
from roomcraft.schemas.graph import PlacementOrder, SpatialGraph
from roomcraft.schemas.layout import Layout, PlacementTrace, Provenance
from roomcraft.schemas.scene import SceneOrganization
from roomcraft.services.action_service import action_service
from roomcraft.services.constraint_service import constraint_service
from roomcraft.services.graph_service import graph_service
from roomcraft.services.placement_service import placement_service
from roomcraft.services.scene_service import scene_service
from roomcraft.utils.logging import get_logger, log_system_event

logger = get_logger(__name__)


class PlacementResult(BaseModel):
    """擺放階段的結果"""
    model_config = ConfigDict(frozen=True)

    graph: SpatialGraph
    order: PlacementOrder
    layout: Layout
    trace: PlacementTrace


class GenerationResult(BaseModel):
    """完整生成流程的結果"""
    model_config = ConfigDict(frozen=True)

    org: SceneOrganization
    placement: PlacementResult
    constraints: Tuple[ConstraintTuple, ...]
    layout: Layout
    correction: CorrectionTrace


class PipelineService:
    """場景生成流程服務類別"""

    def place(
        self,
        org: SceneOrganization,
        caps: CapsConfig,
        strict: bool = True,
        provenance: Optional[Provenance] = None
    ) -> PlacementResult:
        """建立關係圖、決定順序並擺放所有家具"""
        graph = graph_service.build_graph(org)
        order = graph_service.hdfs_order(graph)
        room = scene_service.room_from_spec(org)
        layout, trace = placement_service.place_sequence(order, org, room, caps, strict, provenance)
        return PlacementResult(graph=graph, order=order, layout=layout, trace=trace)

    def generate(self, org: SceneOrganization, config: Optional[EngineConfig] = None) -> GenerationResult:
        """
        由場景組織生成完整佈局

        Raises:
            ItemUnplaceable: 擺放失敗
            BudgetExhausted: 修正迴圈結束時仍有違規 (例外附帶部分修正的佈局)
        """
        config = config or EngineConfig()
        provenance = Provenance(seed=config.caps.seed, config_hash=config_hash(config))
        log_system_event(logger, "generate_started", f"開始生成 {org.room_type.value} 場景", {
            "furniture": len(org.furniture),
            "relations": len(org.relations),
            "seed": config.caps.seed,
        })

        placement = self.place(org, config.caps, strict=True, provenance=provenance)
        constraints: List[ConstraintTuple] = constraint_service.compile_constraints(org, config.constraints)
        layout, correction = action_service.optimize_layout(
            placement.layout, constraints, config.optimizer.budget, config
        )

        log_system_event(logger, "generate_finished", "生成完成", {
            "items": len(layout.items),
            "rounds": len(correction.rounds),
            "final_total": correction.final_total,
        })
        return GenerationResult(
            org=org,
            placement=placement,
            constraints=tuple(constraints),
            layout=layout,
            correction=correction,
        )


pipeline_service = PipelineService()
