"""
佈局與擺放紀錄的 Pydantic 模型
"""
from typing import Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field
from shapely.geometry import Polygon

from roomcraft.schemas.scene import Room
from roomcraft.utils.constants import CollisionType, ConflictType, Mount
from roomcraft.utils.geometry import footprint_corners, footprint_polygon


class PlacedItem(BaseModel):
    """已擺放的家具"""
    model_config = ConfigDict(frozen=True)

    id: str
    category: str
    x: float = Field(..., description="底面中心 x (公尺)")
    y: float = Field(..., description="底面中心 y (公尺)")
    z: float = Field(0.0, ge=0, description="底面高度 (公尺)")
    yaw: float = Field(0.0, description="朝向 (弧度)")
    w: float = Field(..., gt=0)
    d: float = Field(..., gt=0)
    h: float = Field(..., gt=0)
    color: Optional[str] = None
    material: Optional[str] = None
    mount: Mount = Mount.FLOOR
    support: Optional[str] = Field(None, description="支撐物 ID (on_top 物件)")

    @property
    def top(self) -> float:
        return self.z + self.h

    def corners(self):
        return footprint_corners(self.x, self.y, self.w, self.d, self.yaw)

    def polygon(self) -> Polygon:
        return footprint_polygon(self.x, self.y, self.w, self.d, self.yaw)

    @property
    def area(self) -> float:
        return self.w * self.d


class Provenance(BaseModel):
    """產生佈局的種子與設定雜湊"""
    model_config = ConfigDict(frozen=True)

    seed: int = 0
    config_hash: str = ""


class Layout(BaseModel):
    """房間外殼與已擺放的家具"""
    model_config = ConfigDict(frozen=True)

    room: Room
    items: Tuple[PlacedItem, ...] = Field(default_factory=tuple)
    provenance: Provenance = Field(default_factory=Provenance)

    def get(self, item_id: str) -> Optional[PlacedItem]:
        for item in self.items:
            if item.id == item_id:
                return item
        return None

    def index_of(self, item_id: str) -> int:
        for i, item in enumerate(self.items):
            if item.id == item_id:
                return i
        return -1

    def with_items(self, items) -> "Layout":
        return self.model_copy(update={"items": tuple(items)})

    def children_of(self, item_id: str) -> Tuple[PlacedItem, ...]:
        return tuple(item for item in self.items if item.support == item_id)


class CollisionRecord(BaseModel):
    """碰撞紀錄"""
    model_config = ConfigDict(frozen=True)

    ids: Tuple[str, ...]
    area: float = Field(..., ge=0, description="交疊或超出面積 (m²)")
    type: CollisionType


class ItemTrace(BaseModel):
    """單一家具的擺放紀錄"""
    model_config = ConfigDict(frozen=True)

    id: str
    attempts: int = 0
    final_alpha: float = 0.5
    final_beta: float = 0.5
    grid_step: float = 0.1
    conflicts: Tuple[ConflictType, ...] = Field(default_factory=tuple)
    relaxed_anchor: bool = False
    fallback: bool = False
    score: Optional[float] = None


class PlacementTrace(BaseModel):
    """整體擺放紀錄"""
    model_config = ConfigDict(frozen=True)

    items: Tuple[ItemTrace, ...] = Field(default_factory=tuple)

    def for_item(self, item_id: str) -> Optional[ItemTrace]:
        for entry in self.items:
            if entry.id == item_id:
                return entry
        return None

    @property
    def fallback_ids(self) -> Tuple[str, ...]:
        return tuple(entry.id for entry in self.items if entry.fallback)
