"""
測試資料工廠
"""
import copy
from typing import Any, Dict, Iterable, Optional

from roomcraft.schemas.constraint import ConstraintTuple
from roomcraft.schemas.layout import Layout, PlacedItem
from roomcraft.schemas.scene import FurnitureItem, RelationEdge, Room, SceneOrganization
from roomcraft.utils.constants import Comparator, ConstraintKind, Mount, RelationKind, RoomType, SCENE_SCHEMA

BEDROOM_SPEC: Dict[str, Any] = {
    "schema": SCENE_SCHEMA,
    "room_type": "bedroom",
    "furniture": [
        {"id": "bed", "category": "bed"},
        {"id": "nightstand", "category": "nightstand"},
        {"id": "lamp", "category": "lamp", "mount": "on_top"},
    ],
    "relations": [
        {"subject": "bed", "object": "wall:north", "relation": "against_wall"},
        {"subject": "nightstand", "object": "bed", "relation": "near"},
        {"subject": "lamp", "object": "nightstand", "relation": "on_top_of"},
    ],
}


class SceneFactory:
    """場景、家具與佈局的建立工具"""

    @staticmethod
    def spec(**overrides) -> Dict[str, Any]:
        """臥室場景文件 (可覆寫頂層欄位)"""
        document = copy.deepcopy(BEDROOM_SPEC)
        document.update(overrides)
        return document

    @staticmethod
    def room(width: float = 10.0, depth: float = 10.0, wall_height: float = 2.7) -> Room:
        """沒有門窗的矩形房間"""
        return Room(width=width, depth=depth, wall_height=wall_height)

    @staticmethod
    def item(
        item_id: str,
        category: Optional[str] = None,
        w: float = 1.0,
        d: float = 1.0,
        h: float = 1.0,
        **kwargs
    ) -> FurnitureItem:
        return FurnitureItem(id=item_id, category=category or item_id, w=w, d=d, h=h, **kwargs)

    @staticmethod
    def placed(
        item_id: str,
        x: float,
        y: float,
        w: float = 1.0,
        d: float = 1.0,
        h: float = 1.0,
        category: Optional[str] = None,
        **kwargs
    ) -> PlacedItem:
        return PlacedItem(id=item_id, category=category or item_id, x=x, y=y, w=w, d=d, h=h, **kwargs)

    @staticmethod
    def layout(items: Iterable[PlacedItem], room: Optional[Room] = None) -> Layout:
        return Layout(room=room or SceneFactory.room(), items=tuple(items))

    @staticmethod
    def relation(subject: str, obj: str, kind: RelationKind, weight: float = 1.0, **params) -> RelationEdge:
        return RelationEdge(subject=subject, object=obj, relation=kind, weight=weight, params=params)

    @staticmethod
    def org(
        furniture: Iterable[FurnitureItem],
        relations: Iterable[RelationEdge] = (),
        room_type: RoomType = RoomType.BEDROOM,
        constraints: Iterable[ConstraintTuple] = ()
    ) -> SceneOrganization:
        return SceneOrganization(
            room_type=room_type,
            furniture=tuple(furniture),
            relations=tuple(relations),
            constraints=tuple(constraints),
        )

    @staticmethod
    def constraint(
        ctype: ConstraintKind,
        objects: Iterable[str] = (),
        relation: Comparator = Comparator.PREDICATE,
        weight: float = 1.0,
        essential: bool = False,
        **params
    ) -> ConstraintTuple:
        return ConstraintTuple(
            ctype=ctype,
            objects=tuple(objects),
            params=params,
            relation=relation,
            weight=weight,
            essential=essential,
        )

    @staticmethod
    def on_top(item_id: str, category: Optional[str] = None, w: float = 0.2, d: float = 0.2, h: float = 0.2) -> FurnitureItem:
        return FurnitureItem(id=item_id, category=category or item_id, w=w, d=d, h=h, mount=Mount.ON_TOP)
