"""
場景組織相關的 Pydantic 模型
"""
from typing import Dict, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from roomcraft.schemas.constraint import ConstraintTuple
from roomcraft.utils.constants import (
    IssueSeverity,
    Mount,
    RelationKind,
    ROOM_MAX_SIZE,
    ROOM_MIN_SIZE,
    RoomType,
    WallId,
)
from roomcraft.utils.geometry import normalize_yaw


class FurnitureItem(BaseModel):
    """家具項目 (V_i)"""
    model_config = ConfigDict(frozen=True)

    id: str = Field(..., min_length=1, description="家具 ID")
    category: str = Field(..., min_length=1, description="家具類別")
    count: int = Field(1, ge=1, description="數量")
    w: float = Field(..., gt=0, description="寬度 (公尺)")
    d: float = Field(..., gt=0, description="深度 (公尺)")
    h: float = Field(..., gt=0, description="高度 (公尺)")
    yaw: float = Field(0.0, description="朝向 (弧度, [0, 2π))")
    color: Optional[str] = Field(None, description="顏色")
    material: Optional[str] = Field(None, description="材質")
    mount: Mount = Field(Mount.FLOOR, description="安裝方式")

    @field_validator("yaw")
    @classmethod
    def wrap_yaw(cls, v: float) -> float:
        return normalize_yaw(float(v))


class RelationEdge(BaseModel):
    """空間關係 (E_ij)"""
    model_config = ConfigDict(frozen=True)

    subject: str = Field(..., min_length=1, description="主體家具 ID")
    object: str = Field(..., min_length=1, description="參照家具或建築 ID")
    relation: RelationKind = Field(..., description="關係類型")
    params: Dict[str, float] = Field(default_factory=dict, description="數值參數")
    weight: float = Field(1.0, ge=0, description="排序權重")


class Door(BaseModel):
    """門"""
    model_config = ConfigDict(frozen=True)

    wall: WallId
    offset: float = Field(..., ge=0, description="距牆起點距離 (公尺)")
    width: float = Field(..., gt=0, description="寬度 (公尺)")


class Window(BaseModel):
    """窗"""
    model_config = ConfigDict(frozen=True)

    wall: WallId
    offset: float = Field(..., ge=0, description="距牆起點距離 (公尺)")
    width: float = Field(..., gt=0, description="寬度 (公尺)")
    sill_height: float = Field(0.9, ge=0, description="窗台高度 (公尺)")


class Room(BaseModel):
    """矩形房間外殼"""
    model_config = ConfigDict(frozen=True)

    width: float = Field(..., ge=ROOM_MIN_SIZE, le=ROOM_MAX_SIZE, description="東西向寬度 (公尺)")
    depth: float = Field(..., ge=ROOM_MIN_SIZE, le=ROOM_MAX_SIZE, description="南北向深度 (公尺)")
    wall_height: float = Field(2.7, gt=0, description="牆高 (公尺)")
    doors: Tuple[Door, ...] = Field(default_factory=tuple)
    windows: Tuple[Window, ...] = Field(default_factory=tuple)

    def wall_length(self, wall: WallId) -> float:
        return self.width if wall in (WallId.NORTH, WallId.SOUTH) else self.depth

    @property
    def diagonal(self) -> float:
        return (self.width ** 2 + self.depth ** 2) ** 0.5

    @property
    def floor_area(self) -> float:
        return self.width * self.depth

    @model_validator(mode="after")
    def check_openings(self):
        spans: Dict[WallId, list] = {}
        for opening in list(self.doors) + list(self.windows):
            if opening.offset + opening.width > self.wall_length(opening.wall) + 1e-9:
                raise ValueError(f"開口超出 {opening.wall.value} 牆範圍")
            spans.setdefault(opening.wall, []).append((opening.offset, opening.offset + opening.width))
        for wall, ranges in spans.items():
            ranges.sort()
            for (_, end), (start, _) in zip(ranges, ranges[1:]):
                if start < end - 1e-9:
                    raise ValueError(f"{wall.value} 牆上的開口互相重疊")
        for window in self.windows:
            if window.sill_height >= self.wall_height:
                raise ValueError("窗台高度超過牆高")
        return self


class RoomSpec(BaseModel):
    """場景文件中的選填房間區塊"""
    model_config = ConfigDict(frozen=True)

    width: Optional[float] = None
    depth: Optional[float] = None
    wall_height: Optional[float] = None
    doors: Optional[Tuple[Door, ...]] = None
    windows: Optional[Tuple[Window, ...]] = None


class SceneOrganization(BaseModel):
    """場景組織 O = <R, V, E>"""
    model_config = ConfigDict(frozen=True)

    room_type: RoomType = Field(..., description="房間類型 (R)")
    furniture: Tuple[FurnitureItem, ...] = Field(default_factory=tuple, description="家具清單 (V)")
    relations: Tuple[RelationEdge, ...] = Field(default_factory=tuple, description="空間關係 (E)")
    constraints: Tuple[ConstraintTuple, ...] = Field(default_factory=tuple, description="明確的約束")
    room: Optional[RoomSpec] = Field(None, description="房間尺寸與開口")
    warnings: Tuple[str, ...] = Field(default_factory=tuple, exclude=True, description="解析警告")

    def item(self, item_id: str) -> Optional[FurnitureItem]:
        for furniture in self.furniture:
            if furniture.id == item_id:
                return furniture
        return None

    @property
    def item_ids(self) -> Tuple[str, ...]:
        return tuple(f.id for f in self.furniture)


class ValidationIssue(BaseModel):
    """場景驗證問題"""
    model_config = ConfigDict(frozen=True)

    severity: IssueSeverity
    code: str
    item_id: Optional[str] = None
    message: str
