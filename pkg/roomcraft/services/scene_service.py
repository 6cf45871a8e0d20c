"""
場景模型服務模組

提供場景文件相關功能：
- 場景文件解析與序列化
- 場景組織驗證
- 矩形房間建立
- 數量展開 (chair -> chair#1, chair#2)
"""
import itertools
import json
import math
from typing import Any, Dict, List, Optional, Sequence, Tuple

from pydantic import ValidationError

from roomcraft.core.exceptions import (
    DanglingReference,
    InvalidDimensions,
    MalformedDocument,
    SchemaViolation,
)
from roomcraft.schemas.constraint import ConstraintTuple
from roomcraft.schemas.scene import (
    Door,
    FurnitureItem,
    RelationEdge,
    Room,
    RoomSpec,
    SceneOrganization,
    ValidationIssue,
    Window,
)
from roomcraft.utils.constants import (
    ARCHITECTURAL_IDS,
    DEFAULT_DOOR_WIDTH,
    ConstraintKind,
    IssueSeverity,
    Mount,
    RelationKind,
    ROOM_MAX_SIZE,
    ROOM_MIN_SIZE,
    RoomType,
    SCENE_SCHEMA,
    WallId,
)
from roomcraft.utils.data import furniture_catalog, room_defaults
from roomcraft.utils.logging import get_logger

logger = get_logger(__name__)

# 場景文件允許的欄位
_TOP_KEYS = {"schema", "room_type", "room", "furniture", "relations", "constraints"}
_ROOM_KEYS = {"width", "depth", "wall_height", "doors", "windows"}
_FURNITURE_KEYS = {"id", "category", "count", "size", "yaw", "color", "material", "mount"}
_SIZE_KEYS = {"w", "d", "h"}
_RELATION_KEYS = {"subject", "object", "relation", "params", "weight"}
_CONSTRAINT_KEYS = {"type", "objects", "params", "relation", "weight", "essential"}

CLONE_SEPARATOR = "#"


def _first_error(exc: ValidationError) -> str:
    error = exc.errors()[0]
    location = ".".join(str(part) for part in error.get("loc", ()))
    return f"{location}: {error.get('msg', '')}" if location else error.get("msg", "")


class SceneService:
    """場景模型服務類別"""

    def __init__(self):
        self.catalog = furniture_catalog()
        self.room_defaults = room_defaults()

    # ------------------------------------------------------------------
    # 解析
    # ------------------------------------------------------------------

    def parse_scene_spec(self, text: str) -> SceneOrganization:
        """
        解析場景文件

        Args:
            text: UTF-8 JSON 場景文件內容

        Returns:
            驗證過的 SceneOrganization；未知欄位會被忽略並記錄於 warnings
        """
        try:
            document = json.loads(text)
        except (json.JSONDecodeError, TypeError) as e:
            raise MalformedDocument(str(e))
        if not isinstance(document, dict):
            raise MalformedDocument("頂層必須為 JSON 物件")

        warnings: List[str] = []
        self._collect_unknown(document, _TOP_KEYS, "", warnings)

        if "schema" not in document:
            raise SchemaViolation("schema", "缺少必要欄位")
        if document["schema"] != SCENE_SCHEMA:
            raise SchemaViolation("schema", f"不支援的版本: {document['schema']!r}")

        if "room_type" not in document:
            raise SchemaViolation("room_type", "缺少必要欄位")
        try:
            room_type = RoomType(document["room_type"])
        except ValueError:
            raise SchemaViolation("room_type", f"未知的房間類型: {document['room_type']!r}")

        furniture = self._parse_furniture(self._list(document, "furniture"), warnings)
        ids = {item.id for item in furniture}
        if len(ids) != len(furniture):
            raise SchemaViolation("furniture", "家具 ID 重複")

        relations = self._parse_relations(self._list(document, "relations"), ids, warnings)
        constraints = self._parse_constraints(
            self._list(document, "constraints"), ids, {item.category for item in furniture}, warnings
        )
        room = self._parse_room(document.get("room"), warnings)

        org = SceneOrganization(
            room_type=room_type,
            furniture=tuple(furniture),
            relations=tuple(relations),
            constraints=tuple(constraints),
            room=room,
            warnings=tuple(warnings),
        )

        errors = [i for i in self.validate_organization(org) if i.severity == IssueSeverity.ERROR]
        if errors and errors[0].code == "INVALID_DIMENSIONS":
            raise InvalidDimensions(errors[0].message)
        if errors:
            raise SchemaViolation(
                errors[0].item_id or "furniture",
                errors[0].message,
                details={"issues": [i.model_dump(mode="json") for i in errors]}
            )

        for warning in warnings:
            logger.warning(f"場景文件警告: {warning}")
        return org

    def _list(self, document: Dict[str, Any], key: str) -> list:
        value = document.get(key, [])
        if value is None:
            return []
        if not isinstance(value, list):
            raise SchemaViolation(key, "必須為陣列")
        return value

    def _collect_unknown(self, obj: Dict[str, Any], allowed: set, where: str, warnings: List[str]):
        for key in sorted(set(obj) - allowed):
            warnings.append(f"忽略未知欄位 {where}{key}")

    def _parse_furniture(self, entries: list, warnings: List[str]) -> List[FurnitureItem]:
        items = []
        for i, entry in enumerate(entries):
            where = f"furniture[{i}]"
            if not isinstance(entry, dict):
                raise SchemaViolation(where, "必須為物件")
            for key in ("id", "category"):
                if key not in entry:
                    raise SchemaViolation(f"{where}.{key}", "缺少必要欄位")
            self._collect_unknown(entry, _FURNITURE_KEYS, f"{where}.", warnings)

            category = entry["category"]
            defaults = self.catalog_entry(category, warnings)
            size = entry.get("size") or {}
            if not isinstance(size, dict):
                raise SchemaViolation(f"{where}.size", "必須為物件")
            self._collect_unknown(size, _SIZE_KEYS, f"{where}.size.", warnings)

            payload = {
                "id": entry["id"],
                "category": category,
                "count": entry.get("count", 1),
                "w": size.get("w", defaults["w"]),
                "d": size.get("d", defaults["d"]),
                "h": size.get("h", defaults["h"]),
                "yaw": entry.get("yaw", 0.0),
                "color": entry.get("color"),
                "material": entry.get("material"),
                "mount": entry.get("mount") or defaults["mount"],
            }
            try:
                items.append(FurnitureItem(**payload))
            except ValidationError as e:
                raise SchemaViolation(where, _first_error(e))
        return items

    def _parse_relations(self, entries: list, ids: set, warnings: List[str]) -> List[RelationEdge]:
        relations = []
        known = ids | set(ARCHITECTURAL_IDS)
        for i, entry in enumerate(entries):
            where = f"relations[{i}]"
            if not isinstance(entry, dict):
                raise SchemaViolation(where, "必須為物件")
            for key in ("subject", "object", "relation"):
                if key not in entry:
                    raise SchemaViolation(f"{where}.{key}", "缺少必要欄位")
            self._collect_unknown(entry, _RELATION_KEYS, f"{where}.", warnings)

            try:
                kind = RelationKind(entry["relation"])
            except ValueError:
                raise SchemaViolation(f"{where}.relation", f"未知的關係類型: {entry['relation']!r}")

            for ref in (entry["subject"], entry["object"]):
                if ref not in known:
                    raise DanglingReference(str(ref))

            params = entry.get("params")
            if params is None:
                params = {}
            elif not isinstance(params, dict):
                raise SchemaViolation(f"{where}.params", "必須為物件")
            if kind == RelationKind.DISTANCE_RANGE:
                lo, hi = params.get("min", 0.0), params.get("max", math.inf)
                try:
                    if lo < 0 or hi < 0 or lo > hi:
                        raise SchemaViolation(f"{where}.params", "distance_range 需要 0 <= min <= max")
                except TypeError:
                    raise SchemaViolation(f"{where}.params", "參數必須為數值")

            try:
                relations.append(RelationEdge(
                    subject=entry["subject"],
                    object=entry["object"],
                    relation=kind,
                    params=params,
                    weight=entry.get("weight", 1.0),
                ))
            except ValidationError as e:
                raise SchemaViolation(where, _first_error(e))
        return relations

    def _parse_constraints(
        self,
        entries: list,
        ids: set,
        categories: set,
        warnings: List[str]
    ) -> List[ConstraintTuple]:
        constraints = []
        for i, entry in enumerate(entries):
            where = f"constraints[{i}]"
            if not isinstance(entry, dict):
                raise SchemaViolation(where, "必須為物件")
            if "type" not in entry:
                raise SchemaViolation(f"{where}.type", "缺少必要欄位")
            self._collect_unknown(entry, _CONSTRAINT_KEYS, f"{where}.", warnings)

            payload = {
                "ctype": entry["type"],
                "objects": tuple(entry.get("objects") or ()),
                "params": entry.get("params") or {},
                "weight": entry.get("weight", 1.0),
                "essential": entry.get("essential", False),
            }
            if "relation" in entry:
                payload["relation"] = entry["relation"]
            try:
                constraint = ConstraintTuple(**payload)
            except ValidationError as e:
                raise SchemaViolation(where, _first_error(e))

            if constraint.ctype != ConstraintKind.COUNT:
                for ref in constraint.objects:
                    if ref not in ids and ref not in ARCHITECTURAL_IDS:
                        raise DanglingReference(ref)
            elif constraint.objects[0] not in categories:
                warnings.append(f"{where} 的類別 {constraint.objects[0]} 目前沒有任何家具")
            constraints.append(constraint)
        return constraints

    def _parse_room(self, block: Any, warnings: List[str]) -> Optional[RoomSpec]:
        if block is None:
            return None
        if not isinstance(block, dict):
            raise SchemaViolation("room", "必須為物件")
        self._collect_unknown(block, _ROOM_KEYS, "room.", warnings)
        try:
            doors = block.get("doors")
            windows = block.get("windows")
            return RoomSpec(
                width=block.get("width"),
                depth=block.get("depth"),
                wall_height=block.get("wall_height"),
                doors=None if doors is None else tuple(Door(**d) for d in doors),
                windows=None if windows is None else tuple(Window(**w) for w in windows),
            )
        except (ValidationError, TypeError) as e:
            message = _first_error(e) if isinstance(e, ValidationError) else str(e)
            raise SchemaViolation("room", message)

    def catalog_entry(self, category: str, warnings: Optional[List[str]] = None) -> Dict[str, Any]:
        """取得家具類別的預設尺寸；未知類別使用 _default"""
        if category in self.catalog:
            return self.catalog[category]
        if warnings is not None:
            warnings.append(f"類別 {category} 不在家具目錄中，使用預設尺寸")
        return self.catalog["_default"]

    # ------------------------------------------------------------------
    # 序列化
    # ------------------------------------------------------------------

    def serialize_scene_spec(self, org: SceneOrganization) -> str:
        """
        將場景組織輸出為標準場景文件 (尺寸一律明確寫出)

        Returns:
            JSON 文字，parse_scene_spec 讀回後與原組織相同
        """
        document: Dict[str, Any] = {
            "schema": SCENE_SCHEMA,
            "room_type": org.room_type.value,
        }
        if org.room is not None:
            document["room"] = org.room.model_dump(mode="json", exclude_none=True)
        document["furniture"] = [
            {
                "id": item.id,
                "category": item.category,
                "count": item.count,
                "size": {"w": item.w, "d": item.d, "h": item.h},
                "yaw": item.yaw,
                "color": item.color,
                "material": item.material,
                "mount": item.mount.value,
            }
            for item in org.furniture
        ]
        document["relations"] = [
            {
                "subject": edge.subject,
                "object": edge.object,
                "relation": edge.relation.value,
                "params": dict(edge.params),
                "weight": edge.weight,
            }
            for edge in org.relations
        ]
        document["constraints"] = [
            {
                "type": c.ctype.value,
                "objects": list(c.objects),
                "params": dict(c.params),
                "relation": c.relation.value,
                "weight": c.weight,
                "essential": c.essential,
            }
            for c in org.constraints
        ]
        return json.dumps(document, ensure_ascii=False, indent=2)

    # ------------------------------------------------------------------
    # 驗證
    # ------------------------------------------------------------------

    def validate_organization(self, org: SceneOrganization) -> List[ValidationIssue]:
        """
        檢查場景組織的型別不變量

        Returns:
            問題清單；所有不變量成立時為空 (解析警告以 warning 等級列出)
        """
        issues: List[ValidationIssue] = []

        seen = set()
        for item in org.furniture:
            if item.id in seen:
                issues.append(ValidationIssue(
                    severity=IssueSeverity.ERROR,
                    code="DUPLICATE_ID",
                    item_id=item.id,
                    message=f"家具 ID 重複: {item.id}",
                ))
            seen.add(item.id)

        known = seen | set(ARCHITECTURAL_IDS)
        supports: Dict[str, int] = {}
        for edge in org.relations:
            for ref in (edge.subject, edge.object):
                if ref not in known:
                    issues.append(ValidationIssue(
                        severity=IssueSeverity.ERROR,
                        code="DANGLING_REFERENCE",
                        item_id=ref,
                        message=f"關係參照了不存在的物件: {ref}",
                    ))
            if edge.subject == edge.object:
                issues.append(ValidationIssue(
                    severity=IssueSeverity.ERROR,
                    code="SELF_RELATION",
                    item_id=edge.subject,
                    message="關係的主體與參照物不可相同",
                ))
            if edge.relation == RelationKind.DISTANCE_RANGE:
                lo = edge.params.get("min", 0.0)
                hi = edge.params.get("max", math.inf)
                if lo < 0 or hi < 0 or lo > hi:
                    issues.append(ValidationIssue(
                        severity=IssueSeverity.ERROR,
                        code="INVALID_RANGE",
                        item_id=edge.subject,
                        message="distance_range 需要 0 <= min <= max",
                    ))
            if edge.relation == RelationKind.ON_TOP_OF:
                supports[edge.subject] = supports.get(edge.subject, 0) + 1
                if edge.object in ARCHITECTURAL_IDS:
                    issues.append(ValidationIssue(
                        severity=IssueSeverity.ERROR,
                        code="INVALID_SUPPORT",
                        item_id=edge.subject,
                        message=f"on_top_of 的支撐物必須是家具: {edge.object}",
                    ))

        for item in org.furniture:
            if item.mount == Mount.ON_TOP and supports.get(item.id, 0) != 1:
                issues.append(ValidationIssue(
                    severity=IssueSeverity.ERROR,
                    code="SUPPORT_COUNT",
                    item_id=item.id,
                    message=f"置頂家具必須恰好有一個 on_top_of 關係 (目前 {supports.get(item.id, 0)} 個)",
                ))

        for constraint in org.constraints:
            if constraint.ctype == ConstraintKind.COUNT:
                continue
            for ref in constraint.objects:
                if ref not in known:
                    issues.append(ValidationIssue(
                        severity=IssueSeverity.ERROR,
                        code="DANGLING_REFERENCE",
                        item_id=ref,
                        message=f"約束參照了不存在的物件: {ref}",
                    ))

        if org.room is not None:
            for name in ("width", "depth"):
                value = getattr(org.room, name)
                if value is not None and not ROOM_MIN_SIZE <= value <= ROOM_MAX_SIZE:
                    issues.append(ValidationIssue(
                        severity=IssueSeverity.ERROR,
                        code="INVALID_DIMENSIONS",
                        message=f"房間 {name} 必須介於 {ROOM_MIN_SIZE} 與 {ROOM_MAX_SIZE} 公尺之間",
                    ))

        for warning in org.warnings:
            issues.append(ValidationIssue(
                severity=IssueSeverity.WARNING,
                code="PARSE_WARNING",
                message=warning,
            ))
        return issues

    # ------------------------------------------------------------------
    # 房間
    # ------------------------------------------------------------------

    def build_room(
        self,
        room_type: RoomType,
        dims: Optional[Tuple[float, float]] = None,
        wall_height: Optional[float] = None
    ) -> Room:
        """
        建立矩形房間外殼

        Args:
            room_type: 房間類型
            dims: (寬, 深)，未提供時使用房型預設尺寸
            wall_height: 牆高，未提供時使用房型預設值

        Returns:
            南牆置中一扇 0.9 公尺的門、北牆置中一扇房型預設窗的房間
        """
        defaults = self.room_defaults[RoomType(room_type).value]
        width, depth = dims if dims is not None else (defaults["width"], defaults["depth"])
        self._check_dims(width, depth)
        height = wall_height if wall_height is not None else defaults["wall_height"]

        door = Door(wall=WallId.SOUTH, offset=(width - DEFAULT_DOOR_WIDTH) / 2, width=DEFAULT_DOOR_WIDTH)
        spec = defaults["window"]
        wall = WallId(spec["wall"])
        length = width if wall in (WallId.NORTH, WallId.SOUTH) else depth
        window_width = min(spec["width"], length - 0.2)
        sill = spec["sill_height"] if spec["sill_height"] < height else height / 2
        window = Window(
            wall=wall,
            offset=(length - window_width) / 2,
            width=window_width,
            sill_height=sill,
        )
        try:
            return Room(width=width, depth=depth, wall_height=height, doors=(door,), windows=(window,))
        except ValidationError as e:
            raise InvalidDimensions(_first_error(e))

    def room_from_spec(self, org: SceneOrganization) -> Room:
        """
        依場景文件的 room 區塊建立房間，缺少的部分使用 build_room 預設值
        """
        spec = org.room or RoomSpec()
        defaults = self.room_defaults[org.room_type.value]
        width = spec.width if spec.width is not None else defaults["width"]
        depth = spec.depth if spec.depth is not None else defaults["depth"]
        base = self.build_room(org.room_type, (width, depth), spec.wall_height)
        try:
            return Room(
                width=base.width,
                depth=base.depth,
                wall_height=base.wall_height,
                doors=base.doors if spec.doors is None else spec.doors,
                windows=base.windows if spec.windows is None else spec.windows,
            )
        except ValidationError as e:
            raise InvalidDimensions(_first_error(e))

    def _check_dims(self, width: float, depth: float):
        for name, value in (("width", width), ("depth", depth)):
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise InvalidDimensions(f"{name} 必須為有限數值", details={name: value})
            if not ROOM_MIN_SIZE <= value <= ROOM_MAX_SIZE:
                raise InvalidDimensions(
                    f"{name}={value} 超出 [{ROOM_MIN_SIZE}, {ROOM_MAX_SIZE}] 公尺",
                    details={name: value}
                )

    # ------------------------------------------------------------------
    # 數量展開
    # ------------------------------------------------------------------

    def expand_counts(self, org: SceneOrganization) -> SceneOrganization:
        """
        將 count > 1 的家具展開為編號副本 (chair#1, chair#2, ...)

        參照原 ID 的關係套用到每個副本；on_top_of 的主體副本依序輪流配對
        參照物副本，讓每個副本只有一個支撐物。
        """
        clones: Dict[str, List[str]] = {}
        furniture: List[FurnitureItem] = []
        for item in org.furniture:
            if item.count == 1:
                clones[item.id] = [item.id]
                furniture.append(item)
                continue
            ids = [f"{item.id}{CLONE_SEPARATOR}{k}" for k in range(1, item.count + 1)]
            clones[item.id] = ids
            furniture.extend(item.model_copy(update={"id": clone, "count": 1}) for clone in ids)

        def expand(ref: str) -> List[str]:
            return clones.get(ref, [ref])

        relations: List[RelationEdge] = []
        for edge in org.relations:
            subjects, objects = expand(edge.subject), expand(edge.object)
            if edge.relation == RelationKind.ON_TOP_OF:
                pairs: Sequence[Tuple[str, str]] = [
                    (s, objects[k % len(objects)]) for k, s in enumerate(subjects)
                ]
            else:
                pairs = list(itertools.product(subjects, objects))
            relations.extend(
                edge.model_copy(update={"subject": s, "object": o}) for s, o in pairs if s != o
            )

        constraints: List[ConstraintTuple] = []
        for constraint in org.constraints:
            if constraint.ctype == ConstraintKind.COUNT or not constraint.objects:
                constraints.append(constraint)
                continue
            for combo in itertools.product(*(expand(ref) for ref in constraint.objects)):
                if len(set(combo)) == len(combo):
                    constraints.append(constraint.model_copy(update={"objects": tuple(combo)}))

        return org.model_copy(update={
            "furniture": tuple(furniture),
            "relations": tuple(relations),
            "constraints": tuple(constraints),
        })


scene_service = SceneService()
