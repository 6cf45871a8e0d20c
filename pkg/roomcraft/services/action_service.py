"""
修正動作服務模組

提供約束違規修正功能：
- 依違規類別規劃候選動作 (一步前瞻)
- 套用動作產生新佈局
- 偵測 -> 規劃 -> 套用 的修正迴圈
"""
import math
from typing import Dict, List, Optional, Sequence, Tuple

from roomcraft.core.config import EngineConfig
from roomcraft.core.exceptions import (
    ActionInfeasible,
    BudgetExhausted,
    ItemUnplaceable,
    NoRepairFound,
    PreconditionViolation,
    UnknownTarget,
    UnplacedReference,
)
from roomcraft.schemas.constraint import (
    Action,
    ConstraintTuple,
    CorrectionRound,
    CorrectionTrace,
    ViolationReport,
)
from roomcraft.schemas.layout import Layout, PlacedItem
from roomcraft.schemas.scene import FurnitureItem
from roomcraft.services.constraint_service import (
    ConstraintService,
    constraint_service,
    wall_gap,
)
from roomcraft.services.placement_service import placement_service
from roomcraft.services.scene_service import scene_service
from roomcraft.utils.constants import (
    OVERLAP_TOLERANCE,
    WALL_ORDER,
    ActionKind,
    Comparator,
    ConstraintKind,
    Mount,
    RelationKind,
    WallId,
    is_architectural,
    is_wall_ref,
    parse_wall_id,
)
from roomcraft.utils.geometry import (
    intersection_area,
    normalize_yaw,
    outside_distance,
    penetration_vectors,
    to_world,
    z_overlap,
)
from roomcraft.utils.logging import get_logger

logger = get_logger(__name__)

# 位置修正時嘗試的間距 (公尺)
POSITION_GAPS = (0.1, 0.3, 0.6, 1.0)
# 邊界判定與接受條件的數值容許值
BOUNDARY_EPSILON = 1e-6
IMPROVEMENT_EPSILON = 1e-9
# 牆面修正時多推進的距離
WALL_MARGIN = 1e-3

# 牆面法向量 (指向牆外)
_WALL_NORMALS = {
    WallId.NORTH: (0.0, 1.0),
    WallId.SOUTH: (0.0, -1.0),
    WallId.EAST: (1.0, 0.0),
    WallId.WEST: (-1.0, 0.0),
}


def _translate(target: str, dx: float, dy: float, dz: float = 0.0, priority: float = 0.0) -> Action:
    params = {"dx": dx, "dy": dy}
    if dz:
        params["dz"] = dz
    return Action(kind=ActionKind.TRANSLATE, targets=(target,), params=params, priority=priority)


def _describe(report: ViolationReport) -> Dict[str, object]:
    return {
        "ctype": report.constraint.ctype.value,
        "objects": list(report.constraint.objects),
        "magnitude": report.magnitude,
        "essential": report.constraint.essential,
        "category": report.category.value,
        "index": report.index,
    }


class ActionService:
    """修正動作服務類別"""

    def __init__(self, constraints: Optional[ConstraintService] = None):
        self.constraints = constraints or constraint_service

    # ------------------------------------------------------------------
    # 套用動作
    # ------------------------------------------------------------------

    def apply_action(self, layout: Layout, action: Action, config: Optional[EngineConfig] = None) -> Layout:
        """
        套用修正動作

        Returns:
            新的佈局；原佈局不變

        Raises:
            UnknownTarget: 目標不存在
            ActionInfeasible: 動作會讓家具超出房間或違反支撐關係
        """
        config = config or EngineConfig()
        if action.kind != ActionKind.ADD_ITEM:
            for target in action.targets:
                if layout.get(target) is None:
                    raise UnknownTarget(target)

        handler = {
            ActionKind.TRANSLATE: self._apply_translate,
            ActionKind.ROTATE: self._apply_rotate,
            ActionKind.RESIZE: self._apply_resize,
            ActionKind.SET_COLOR: self._apply_attribute,
            ActionKind.SET_MATERIAL: self._apply_attribute,
            ActionKind.ADD_ITEM: self._apply_add,
            ActionKind.REMOVE_ITEM: self._apply_remove,
            ActionKind.SWAP_POSITIONS: self._apply_swap,
        }[action.kind]
        return handler(layout, action, config)

    def descendants(self, layout: Layout, item_id: str) -> List[str]:
        """支撐在 item_id 上 (直接或間接) 的家具"""
        found: List[str] = []
        frontier = [item_id]
        while frontier:
            current = frontier.pop()
            for child in layout.children_of(current):
                if child.id not in found:
                    found.append(child.id)
                    frontier.append(child.id)
        return found

    def _replace(self, layout: Layout, updated: Dict[str, PlacedItem]) -> Layout:
        items = tuple(updated.get(item.id, item) for item in layout.items)
        new_layout = layout.with_items(items)
        self._check_bounds(new_layout, list(updated))
        return new_layout

    def _check_bounds(self, layout: Layout, ids: Sequence[str]):
        room = layout.room
        for item_id in ids:
            item = layout.get(item_id)
            if outside_distance(item.corners(), room.width, room.depth) > BOUNDARY_EPSILON:
                raise ActionInfeasible(f"{item_id} 會超出房間", details={"item_id": item_id})
            if item.z < -BOUNDARY_EPSILON or item.top > room.wall_height + BOUNDARY_EPSILON:
                raise ActionInfeasible(f"{item_id} 的高度超出房間", details={"item_id": item_id})

    def _apply_translate(self, layout: Layout, action: Action, config: EngineConfig) -> Layout:
        dx, dy, dz = action.number("dx"), action.number("dy"), action.number("dz")
        updated: Dict[str, PlacedItem] = {}
        for target in action.targets:
            for item_id in [target] + self.descendants(layout, target):
                item = updated.get(item_id, layout.get(item_id))
                z = item.z + dz
                if -BOUNDARY_EPSILON < z < 0:
                    z = 0.0
                if z < 0:
                    raise ActionInfeasible(f"{item_id} 會低於地面", details={"item_id": item_id})
                updated[item_id] = item.model_copy(update={"x": item.x + dx, "y": item.y + dy, "z": z})
        return self._replace(layout, updated)

    def _apply_rotate(self, layout: Layout, action: Action, config: EngineConfig) -> Layout:
        dyaw = action.number("dyaw")
        updated: Dict[str, PlacedItem] = {}
        for target in action.targets:
            pivot = layout.get(target)
            for item_id in [target] + self.descendants(layout, target):
                item = layout.get(item_id)
                if item_id == target:
                    x, y = item.x, item.y
                else:
                    x, y = to_world(item.x - pivot.x, item.y - pivot.y, pivot.x, pivot.y, dyaw)
                updated[item_id] = item.model_copy(update={
                    "x": x,
                    "y": y,
                    "yaw": normalize_yaw(item.yaw + dyaw),
                })
        return self._replace(layout, updated)

    def _apply_resize(self, layout: Layout, action: Action, config: EngineConfig) -> Layout:
        sx, sy, sz = action.number("sx", 1.0), action.number("sy", 1.0), action.number("sz", 1.0)
        updated: Dict[str, PlacedItem] = {}
        for target in action.targets:
            item = layout.get(target)
            resized = item.model_copy(update={"w": item.w * sx, "d": item.d * sy, "h": item.h * sz})
            updated[target] = resized
            lift = resized.top - item.top
            for child_id in self.descendants(layout, target):
                child = updated.get(child_id, layout.get(child_id))
                updated[child_id] = child.model_copy(update={"z": child.z + lift})
        return self._replace(layout, updated)

    def _apply_attribute(self, layout: Layout, action: Action, config: EngineConfig) -> Layout:
        key = "color" if action.kind == ActionKind.SET_COLOR else "material"
        value = action.params.get(key)
        if value is not None and not isinstance(value, str):
            raise ActionInfeasible(f"{key} 必須為文字")
        updated = {t: layout.get(t).model_copy(update={key: value}) for t in action.targets}
        return layout.with_items(tuple(updated.get(i.id, i) for i in layout.items))

    def _apply_add(self, layout: Layout, action: Action, config: EngineConfig) -> Layout:
        category = action.params.get("category") or (action.targets[0] if action.targets else None)
        if not isinstance(category, str):
            raise ActionInfeasible("add_item 需要家具類別")
        item_id = action.params.get("id")
        if not isinstance(item_id, str):
            item_id = self.next_id(layout, category)
        elif layout.get(item_id) is not None:
            raise ActionInfeasible(f"ID 已存在: {item_id}")

        template = next((i for i in layout.items if i.category == category), None)
        if template is not None:
            dims = {"w": template.w, "d": template.d, "h": template.h}
            mount = template.mount
            color, material = template.color, template.material
        else:
            entry = scene_service.catalog_entry(category)
            dims = {"w": entry["w"], "d": entry["d"], "h": entry["h"]}
            mount = Mount(entry["mount"])
            color = material = None
        if mount == Mount.ON_TOP:
            mount = Mount.FLOOR

        item = FurnitureItem(id=item_id, category=category, color=color, material=material, mount=mount, **dims)
        try:
            placed, _ = placement_service.place_item(item, (), layout.room, layout, config.caps, strict=True)
        except ItemUnplaceable as e:
            raise ActionInfeasible(f"無法加入 {item_id}", details=e.details)
        return layout.with_items(layout.items + (placed,))

    def next_id(self, layout: Layout, category: str) -> str:
        k = 1
        while layout.get(f"{category}#{k}") is not None:
            k += 1
        return f"{category}#{k}"

    def _apply_remove(self, layout: Layout, action: Action, config: EngineConfig) -> Layout:
        for target in action.targets:
            if layout.children_of(target):
                raise ActionInfeasible(f"{target} 上還有其他家具", details={"item_id": target})
        return layout.with_items(tuple(i for i in layout.items if i.id not in action.targets))

    def _apply_swap(self, layout: Layout, action: Action, config: EngineConfig) -> Layout:
        a, b = layout.get(action.targets[0]), layout.get(action.targets[1])
        if a.id in self.descendants(layout, b.id) or b.id in self.descendants(layout, a.id):
            raise ActionInfeasible("不可交換支撐物與其上方物件")
        updated: Dict[str, PlacedItem] = {}
        for source, dest in ((a, b), (b, a)):
            dx, dy = dest.x - source.x, dest.y - source.y
            for item_id in [source.id] + self.descendants(layout, source.id):
                item = layout.get(item_id)
                updated[item_id] = item.model_copy(update={"x": item.x + dx, "y": item.y + dy})
        return self._replace(layout, updated)

    # ------------------------------------------------------------------
    # 規劃
    # ------------------------------------------------------------------

    def candidate_actions(
        self,
        report: ViolationReport,
        layout: Layout,
        constraints: Sequence[ConstraintTuple] = (),
        config: Optional[EngineConfig] = None
    ) -> List[Action]:
        """依違規類別列出候選動作 (依偏好排序)"""
        config = config or EngineConfig()
        c = report.constraint
        rules = {
            ConstraintKind.DISTANCE: self._distance_actions,
            ConstraintKind.OVERLAP_FREE: self._overlap_actions,
            ConstraintKind.ORIENTATION: self._orientation_actions,
            ConstraintKind.POSITION: self._position_actions,
            ConstraintKind.ALIGNMENT: self._alignment_actions,
            ConstraintKind.ON_TOP_OF: self._on_top_actions,
            ConstraintKind.SIZE: self._size_actions,
            ConstraintKind.COLOR: self._attribute_actions,
            ConstraintKind.MATERIAL: self._attribute_actions,
            ConstraintKind.COUNT: self._count_actions,
        }
        return rules[c.ctype](report, layout, constraints, config)

    def plan_corrections(
        self,
        violations: Sequence[ViolationReport],
        layout: Layout,
        constraints: Optional[Sequence[ConstraintTuple]] = None,
        config: Optional[EngineConfig] = None,
        first_only: bool = False
    ) -> List[Action]:
        """
        為每個違規選出一個修正動作 (一步前瞻)

        動作只有在必要約束的加權違規量不增加、且總加權違規量嚴格下降時才會被選用；
        多個候選中選擇下降最多者，同分時取排序在前者。

        Args:
            violations: detect_violations 排序後的違規
            constraints: 計算總違規量用的完整約束清單，未提供時使用違規報告中的約束
            first_only: 找到第一個可用動作即停止

        Raises:
            NoRepairFound: 所有候選動作都無法降低違規量
        """
        config = config or EngineConfig()
        if constraints is None:
            constraints = [r.constraint for r in violations]
        essential_before, total_before = self.constraints.weighted_totals(layout, constraints, config.constraints)

        plan: List[Action] = []
        for report in violations:
            best: Optional[Tuple[float, Action]] = None
            for action in self.candidate_actions(report, layout, constraints, config):
                result = self.simulate(layout, action, constraints, config)
                if result is None:
                    continue
                essential_after, total_after = result
                if essential_after > essential_before + IMPROVEMENT_EPSILON:
                    continue
                if total_after >= total_before - IMPROVEMENT_EPSILON:
                    continue
                if best is None or total_after < best[0]:
                    best = (total_after, action)
            if best is not None:
                plan.append(best[1])
                if first_only:
                    break

        if not plan:
            raise NoRepairFound()
        return plan

    def simulate(
        self,
        layout: Layout,
        action: Action,
        constraints: Sequence[ConstraintTuple],
        config: EngineConfig
    ) -> Optional[Tuple[float, float]]:
        """模擬套用動作後的 (必要, 全部) 加權違規量；動作不可行時回傳 None"""
        try:
            candidate = self.apply_action(layout, action, config)
            return self.constraints.weighted_totals(candidate, constraints, config.constraints)
        except (ActionInfeasible, UnknownTarget):
            return None
        except UnplacedReference as e:
            # 移除的家具仍被其他約束參照
            logger.debug(f"模擬 {action.kind.value} 略過: {e.message}")
            return None

    # 各類違規的候選動作

    def _distance_actions(self, report, layout, constraints, config) -> List[Action]:
        c = report.constraint
        a_id, b_id = c.objects
        m = report.magnitude
        metric = self.constraints.metric_of(c, config.constraints)
        d = self.constraints.distance_between(a_id, b_id, layout, metric)
        closer = d > c.number("max", math.inf)

        if is_architectural(a_id) or is_architectural(b_id):
            item_id, ref = (b_id, a_id) if is_architectural(a_id) else (a_id, b_id)
            if not is_wall_ref(ref):
                dz = -m if (ref == "floor") == closer else m
                return [_translate(item_id, 0.0, 0.0, dz)]
            nx, ny = _WALL_NORMALS[parse_wall_id(ref)]
            sign = 1.0 if closer else -1.0
            return [_translate(item_id, sign * nx * m, sign * ny * m)]

        a, b = layout.get(a_id), layout.get(b_id)
        dx, dy = b.x - a.x, b.y - a.y
        length = math.hypot(dx, dy)
        ux, uy = (dx / length, dy / length) if length > 1e-12 else (1.0, 0.0)
        sign = -1.0 if closer else 1.0
        actions = [
            _translate(b_id, sign * ux * m, sign * uy * m, priority=2.0),
            _translate(a_id, -sign * ux * m, -sign * uy * m, priority=1.0),
        ]
        half = m / 2
        actions.append(Action(
            kind=ActionKind.TRANSLATE, targets=(b_id,),
            params={"dx": sign * ux * half, "dy": sign * uy * half}, priority=0.5,
        ))
        return actions

    def _overlap_actions(self, report, layout, constraints, config) -> List[Action]:
        c = report.constraint
        if c.objects:
            pairs = [(layout.get(c.objects[0]), layout.get(c.objects[1]))]
        else:
            pairs = []
            for i, a in enumerate(layout.items):
                for b in layout.items[i + 1:]:
                    if z_overlap(a.z, a.h, b.z, b.h) and \
                            intersection_area(a.polygon(), b.polygon()) > OVERLAP_TOLERANCE:
                        pairs.append((a, b))

        margin = config.optimizer.overlap_margin
        actions: List[Action] = []
        for a, b in pairs[:1]:
            # 後擺放的家具先移動
            if layout.index_of(a.id) > layout.index_of(b.id):
                a, b = b, a
            vectors = penetration_vectors(a.corners(), b.corners())
            for (nx, ny), depth in vectors[:4]:
                push = depth + margin
                actions.append(_translate(b.id, nx * push, ny * push))
            for (nx, ny), depth in vectors[:4]:
                push = depth + margin
                actions.append(_translate(a.id, -nx * push, -ny * push))
        return actions

    def _orientation_actions(self, report, layout, constraints, config) -> List[Action]:
        c = report.constraint
        error = self.constraints.orientation_error(c, layout)
        actions = [Action(kind=ActionKind.ROTATE, targets=(c.objects[0],), params={"dyaw": -error})]
        if len(c.objects) > 1 and not is_architectural(c.objects[1]):
            actions.append(Action(kind=ActionKind.ROTATE, targets=(c.objects[1],), params={"dyaw": error}))
        if self.constraints.facing_each_other(c, layout):
            # 兩件同時轉半圈，保持反向平行
            actions.append(Action(kind=ActionKind.ROTATE, targets=tuple(c.objects), params={"dyaw": math.pi}))
        return actions

    def _position_actions(self, report, layout, constraints, config) -> List[Action]:
        c = report.constraint
        predicate = c.predicate or RelationKind.IN_FRONT_OF.value
        subject = layout.get(c.objects[0])
        ref_id = c.objects[1] if len(c.objects) > 1 else None
        room = layout.room

        if predicate in (RelationKind.AGAINST_WALL.value, RelationKind.NEAR_WALL.value,
                         RelationKind.AWAY_FROM_WALL.value, RelationKind.CORNER.value):
            return self._wall_actions(c, predicate, subject, ref_id, layout)

        if predicate == RelationKind.CEILING_MOUNTED.value:
            return [_translate(subject.id, 0.0, 0.0, room.wall_height - subject.top)]
        if predicate == RelationKind.ON_FLOOR.value:
            return [_translate(subject.id, 0.0, 0.0, -subject.z)]

        reference = layout.get(ref_id)
        reach = max(subject.w, subject.d) / 2
        targets: List[Tuple[float, float]] = []
        for gap in POSITION_GAPS:
            if predicate == RelationKind.IN_FRONT_OF.value:
                targets.append((0.0, reference.d / 2 + gap + reach))
            elif predicate == RelationKind.BEHIND.value:
                targets.append((0.0, -(reference.d / 2 + gap + reach)))
            elif predicate == RelationKind.LEFT_OF.value:
                targets.append((-(reference.w / 2 + gap + reach), 0.0))
            elif predicate == RelationKind.RIGHT_OF.value:
                targets.append((reference.w / 2 + gap + reach, 0.0))
            elif predicate == RelationKind.SIDE_BY_SIDE.value and gap <= c.number("max_gap", 0.5):
                targets.append((-(reference.w / 2 + gap + reach), 0.0))
                targets.append((reference.w / 2 + gap + reach, 0.0))

        actions = []
        for u, v in targets:
            x, y = to_world(u, v, reference.x, reference.y, reference.yaw)
            actions.append(_translate(subject.id, x - subject.x, y - subject.y))
        actions.append(Action(kind=ActionKind.SWAP_POSITIONS, targets=(subject.id, reference.id)))
        return actions

    def _wall_actions(self, c, predicate, subject, ref_id, layout) -> List[Action]:
        room = layout.room
        walls = [parse_wall_id(ref_id)] if ref_id and is_wall_ref(ref_id) else list(WALL_ORDER)
        gaps = {w: wall_gap(subject, w, room.width, room.depth) for w in walls}
        actions = []
        if predicate == RelationKind.CORNER.value:
            for wall in walls:
                nx, ny = _WALL_NORMALS[wall]
                for side in self._adjacent(wall):
                    sx, sy = _WALL_NORMALS[side]
                    g1 = wall_gap(subject, wall, room.width, room.depth)
                    g2 = wall_gap(subject, side, room.width, room.depth)
                    actions.append(_translate(subject.id, nx * g1 + sx * g2, ny * g1 + sy * g2))
            return actions

        ordered = sorted(walls, key=lambda w: (abs(gaps[w]), WALL_ORDER.index(w)))
        for wall in ordered:
            nx, ny = _WALL_NORMALS[wall]
            gap = gaps[wall]
            if predicate == RelationKind.AGAINST_WALL.value:
                shift = gap
            elif predicate == RelationKind.NEAR_WALL.value:
                shift = gap - c.number("max", 0.5) + WALL_MARGIN
            else:
                shift = gap - c.number("min", 0.5) - WALL_MARGIN
            actions.append(_translate(subject.id, nx * shift, ny * shift))
        return actions

    def _adjacent(self, wall: WallId) -> Tuple[WallId, WallId]:
        if wall in (WallId.NORTH, WallId.SOUTH):
            return (WallId.EAST, WallId.WEST)
        return (WallId.NORTH, WallId.SOUTH)

    def _alignment_actions(self, report, layout, constraints, config) -> List[Action]:
        c = report.constraint
        subject = layout.get(c.objects[0])
        ref_id = c.objects[1] if len(c.objects) > 1 else None
        if ref_id is None or is_architectural(ref_id):
            return self._wall_actions(c, RelationKind.AGAINST_WALL.value, subject, ref_id, layout)
        reference = layout.get(ref_id)
        u, v = self.constraints.local_offset(subject, reference)
        lateral = to_world(-u, 0.0, 0.0, 0.0, reference.yaw)
        frontal = to_world(0.0, -v, 0.0, 0.0, reference.yaw)
        options = [(abs(u), lateral), (abs(v), frontal)]
        options.sort(key=lambda o: o[0])
        return [_translate(subject.id, dx, dy) for _, (dx, dy) in options]

    def _on_top_actions(self, report, layout, constraints, config) -> List[Action]:
        c = report.constraint
        child = layout.get(c.objects[0])
        if len(c.objects) < 2 or is_architectural(c.objects[1]):
            return [_translate(child.id, 0.0, 0.0, -child.z)]
        support = layout.get(c.objects[1])
        return [_translate(child.id, support.x - child.x, support.y - child.y, support.top - child.z)]

    def _size_actions(self, report, layout, constraints, config) -> List[Action]:
        c = report.constraint
        item = layout.get(c.objects[0])
        if len(c.objects) > 1:
            other = layout.get(c.objects[1])
            targets = {"w": other.w, "d": other.d, "h": other.h}
        else:
            targets = {k: c.number(k, -1.0) for k in ("w", "d", "h") if c.number(k, -1.0) > 0}
        params = {
            "sx": targets.get("w", item.w) / item.w,
            "sy": targets.get("d", item.d) / item.d,
            "sz": targets.get("h", item.h) / item.h,
        }
        return [Action(kind=ActionKind.RESIZE, targets=(item.id,), params=params)]

    def _attribute_actions(self, report, layout, constraints, config) -> List[Action]:
        c = report.constraint
        key = c.ctype.value
        if len(c.objects) > 1:
            required = getattr(layout.get(c.objects[1]), key)
        else:
            required = c.text(key)
        kind = ActionKind.SET_COLOR if c.ctype == ConstraintKind.COLOR else ActionKind.SET_MATERIAL
        params = {key: required} if required is not None else {}
        return [Action(kind=kind, targets=(c.objects[0],), params=params)]

    def _count_actions(self, report, layout, constraints, config) -> List[Action]:
        c = report.constraint
        category = c.objects[0]
        members = [i for i in layout.items if i.category == category]
        if c.relation == Comparator.RANGE:
            too_few = len(members) < c.number("min", 0.0)
        else:
            too_few = len(members) < c.number("n", 0.0)
        if too_few:
            return [Action(kind=ActionKind.ADD_ITEM, targets=(), params={"category": category})]

        referenced = {
            ref for other in constraints
            if other.ctype != ConstraintKind.COUNT
            for ref in other.objects
        }
        removable = [
            i for i in members
            if not layout.children_of(i.id) and i.id not in referenced
        ]
        return [Action(kind=ActionKind.REMOVE_ITEM, targets=(i.id,)) for i in reversed(removable)]

    # ------------------------------------------------------------------
    # 修正迴圈
    # ------------------------------------------------------------------

    def optimize_layout(
        self,
        layout: Layout,
        constraints: Sequence[ConstraintTuple],
        budget: Optional[int] = None,
        config: Optional[EngineConfig] = None
    ) -> Tuple[Layout, CorrectionTrace]:
        """
        偵測 -> 規劃 -> 套用 的修正迴圈

        每回合最多套用一個動作，總加權違規量單調不增。

        Args:
            budget: 最大回合數，預設使用 OptimizerConfig.budget

        Returns:
            (修正後佈局, CorrectionTrace)

        Raises:
            BudgetExhausted: 仍有必要約束違規，或預算用盡時仍有違規；例外附帶部分修正的佈局與紀錄
        """
        config = config or EngineConfig()
        budget = config.optimizer.budget if budget is None else budget
        if budget < 1:
            raise PreconditionViolation("budget 必須 >= 1")

        cc = config.constraints
        essential, total = self.constraints.weighted_totals(layout, constraints, cc)
        initial_total = total
        rounds: List[CorrectionRound] = []
        stop_reason = "budget"

        for round_no in range(1, budget + 1):
            violations = self.constraints.detect_violations(layout, constraints, cc)
            if not violations:
                stop_reason = "satisfied"
                break
            try:
                action = self.plan_corrections(violations, layout, constraints, config, first_only=True)[0]
            except NoRepairFound:
                stop_reason = "no_improvement"
                break
            layout = self.apply_action(layout, action, config)
            essential_after, total_after = self.constraints.weighted_totals(layout, constraints, cc)
            rounds.append(CorrectionRound(
                round=round_no,
                violations=tuple(_describe(v) for v in violations),
                action=action,
                total_before=total,
                total_after=total_after,
                essential_before=essential,
                essential_after=essential_after,
            ))
            logger.debug(
                f"第 {round_no} 回合: {action.kind.value} {list(action.targets)} "
                f"總違規量 {total:.4f} -> {total_after:.4f}"
            )
            essential, total = essential_after, total_after

        residual = self.constraints.detect_violations(layout, constraints, cc)
        if not residual:
            stop_reason = "satisfied"
        trace = CorrectionTrace(
            rounds=tuple(rounds),
            initial_total=initial_total,
            final_total=total,
            residual=tuple(_describe(v) for v in residual),
            stop_reason=stop_reason,
        )
        logger.info(f"修正迴圈結束 ({stop_reason}): {len(rounds)} 回合, 剩餘 {len(residual)} 項違規")

        essential_left = [v for v in residual if v.constraint.essential]
        if essential_left or (residual and stop_reason == "budget"):
            raise BudgetExhausted([_describe(v) for v in residual], layout=layout, trace=trace)
        return layout, trace


action_service = ActionService()
