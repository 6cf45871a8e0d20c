"""
空間關係圖的 Pydantic 模型
"""
from typing import Dict, Tuple

from pydantic import BaseModel, ConfigDict, Field

from roomcraft.schemas.scene import FurnitureItem
from roomcraft.utils.constants import RelationKind


class GraphEdge(BaseModel):
    """約束邊 π(i,j) = <V_i, V_j, E_ij>"""
    model_config = ConfigDict(frozen=True)

    subject: str
    object: str
    relation: RelationKind
    weight: float = Field(1.0, ge=0)
    params: Dict[str, float] = Field(default_factory=dict)


class SpatialGraph(BaseModel):
    """空間關係圖；建築節點只作為錨點，不參與排序"""
    model_config = ConfigDict(frozen=True)

    nodes: Tuple[str, ...] = Field(default_factory=tuple, description="家具節點 (展開數量後)")
    anchors: Tuple[str, ...] = Field(default_factory=tuple, description="建築錨點節點")
    edges: Tuple[GraphEdge, ...] = Field(default_factory=tuple)
    items: Dict[str, FurnitureItem] = Field(default_factory=dict)

    def support_of(self, item_id: str):
        for edge in self.edges:
            if edge.subject == item_id and edge.relation == RelationKind.ON_TOP_OF:
                return edge.object
        return None


class PlacementOrder(BaseModel):
    """HDFS 排序結果"""
    model_config = ConfigDict(frozen=True)

    items: Tuple[str, ...] = Field(default_factory=tuple)
    costs: Dict[str, float] = Field(default_factory=dict)
