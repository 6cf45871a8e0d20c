"""
約束引擎服務模組

提供約束相關功能：
- 關係轉換為 5-tuple 約束 C = (T, O, P, R, W)
- 單一約束的違規量計算
- 整體佈局的違規偵測與排序
"""
import itertools
import math
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from roomcraft.core.config import ConstraintConfig
from roomcraft.core.exceptions import UnmappableRelation, UnplacedReference
from roomcraft.schemas.constraint import ConstraintTuple, ViolationReport
from roomcraft.schemas.layout import Layout, PlacedItem
from roomcraft.schemas.scene import SceneOrganization
from roomcraft.services.scene_service import scene_service
from roomcraft.utils.constants import (
    MAGNITUDE_EPSILON,
    OVERLAP_TOLERANCE,
    WALL_FACING_YAW,
    WALL_ORDER,
    Comparator,
    ConstraintKind,
    DistanceMetric,
    RelationKind,
    ViolationCategory,
    WallId,
    is_architectural,
    is_wall_ref,
    parse_wall_id,
)
from roomcraft.utils.data import relation_taxonomy
from roomcraft.utils.geometry import (
    facing_vector,
    intersection_area,
    to_local,
    wrap_angle,
    z_overlap,
)
from roomcraft.utils.logging import get_logger

logger = get_logger(__name__)

SPATIAL_KINDS = {
    ConstraintKind.DISTANCE,
    ConstraintKind.OVERLAP_FREE,
    ConstraintKind.ORIENTATION,
    ConstraintKind.POSITION,
    ConstraintKind.ALIGNMENT,
    ConstraintKind.ON_TOP_OF,
}
ATTRIBUTE_KINDS = {ConstraintKind.SIZE, ConstraintKind.COLOR, ConstraintKind.MATERIAL}

ESSENTIAL_KINDS = {ConstraintKind.OVERLAP_FREE, ConstraintKind.ON_TOP_OF}

# 相鄰牆面 (corner 判定用)
_ADJACENT_WALLS = {
    WallId.NORTH: (WallId.EAST, WallId.WEST),
    WallId.SOUTH: (WallId.EAST, WallId.WEST),
    WallId.EAST: (WallId.NORTH, WallId.SOUTH),
    WallId.WEST: (WallId.NORTH, WallId.SOUTH),
}


def category_of(ctype: ConstraintKind) -> ViolationCategory:
    if ctype in ATTRIBUTE_KINDS:
        return ViolationCategory.ATTRIBUTE
    if ctype == ConstraintKind.COUNT:
        return ViolationCategory.COUNT
    return ViolationCategory.SPATIAL


def wall_gap(item: PlacedItem, wall: WallId, width: float, depth: float) -> float:
    """家具底面到牆面的最短距離 (超出牆面時為負值)"""
    xs = [p[0] for p in item.corners()]
    ys = [p[1] for p in item.corners()]
    if wall == WallId.NORTH:
        return depth - max(ys)
    if wall == WallId.SOUTH:
        return min(ys)
    if wall == WallId.EAST:
        return width - max(xs)
    return min(xs)


def wall_center_distance(item: PlacedItem, wall: WallId, width: float, depth: float) -> float:
    """家具中心到牆面的垂直距離"""
    return {
        WallId.NORTH: depth - item.y,
        WallId.SOUTH: item.y,
        WallId.EAST: width - item.x,
        WallId.WEST: item.x,
    }[wall]


def _beyond(error: float, tolerance: float) -> float:
    return error if error > tolerance else 0.0


class ConstraintService:
    """約束引擎服務類別"""

    def __init__(self, config: Optional[ConstraintConfig] = None):
        self.config = config or ConstraintConfig()
        self.taxonomy = relation_taxonomy()
        self._evaluators: Dict[ConstraintKind, Callable[..., Tuple[float, str]]] = {
            ConstraintKind.DISTANCE: self._eval_distance,
            ConstraintKind.OVERLAP_FREE: self._eval_overlap,
            ConstraintKind.ORIENTATION: self._eval_orientation,
            ConstraintKind.POSITION: self._eval_position,
            ConstraintKind.ALIGNMENT: self._eval_alignment,
            ConstraintKind.ON_TOP_OF: self._eval_on_top,
            ConstraintKind.SIZE: self._eval_size,
            ConstraintKind.COLOR: self._eval_attribute,
            ConstraintKind.MATERIAL: self._eval_attribute,
            ConstraintKind.COUNT: self._eval_count,
        }

    # ------------------------------------------------------------------
    # 編譯
    # ------------------------------------------------------------------

    def compile_constraints(
        self,
        org: SceneOrganization,
        config: Optional[ConstraintConfig] = None
    ) -> List[ConstraintTuple]:
        """
        將場景關係轉換為約束清單

        每個關係對應一個約束，之後接上文件中明確列出的約束，
        最後附加一個涵蓋所有家具兩兩之間的必要 overlap_free 約束。
        """
        config = config or self.config
        if any(item.count > 1 for item in org.furniture):
            org = scene_service.expand_counts(org)

        constraints: List[ConstraintTuple] = []
        for edge in org.relations:
            entry = self.taxonomy.get(edge.relation.value)
            if entry is None:
                raise UnmappableRelation(edge.relation.value)
            ctype = ConstraintKind(entry["ctype"])
            params: Dict[str, object] = dict(entry["params"])
            params.update(edge.params)
            params["predicate"] = edge.relation.value
            if ctype == ConstraintKind.DISTANCE:
                params.setdefault("metric", config.distance_metric.value)
            constraints.append(ConstraintTuple(
                ctype=ctype,
                objects=(edge.subject, edge.object),
                params=params,
                relation=Comparator(entry["relation"]),
                weight=1.0,
                essential=ctype in ESSENTIAL_KINDS,
            ))

        constraints.extend(org.constraints)
        constraints.append(ConstraintTuple(
            ctype=ConstraintKind.OVERLAP_FREE,
            objects=(),
            relation=Comparator.PREDICATE,
            weight=1.0,
            essential=True,
        ))
        logger.debug(f"編譯出 {len(constraints)} 個約束")
        return constraints

    # ------------------------------------------------------------------
    # 評估
    # ------------------------------------------------------------------

    def evaluate_constraint(
        self,
        c: ConstraintTuple,
        layout: Layout,
        index: int = 0,
        config: Optional[ConstraintConfig] = None
    ) -> ViolationReport:
        """
        計算單一約束的違規量

        Returns:
            ViolationReport；magnitude 為 0 表示滿足
        """
        config = config or self.config
        if c.ctype != ConstraintKind.COUNT:
            for ref in c.objects:
                if not is_architectural(ref) and layout.get(ref) is None:
                    raise UnplacedReference(ref)
        magnitude, detail = self._evaluators[c.ctype](c, layout, config)
        if magnitude < MAGNITUDE_EPSILON:
            magnitude = 0.0
        return ViolationReport(
            constraint=c,
            index=index,
            magnitude=magnitude,
            category=category_of(c.ctype),
            detail=detail,
        )

    def detect_violations(
        self,
        layout: Layout,
        constraints: Sequence[ConstraintTuple],
        config: Optional[ConstraintConfig] = None
    ) -> List[ViolationReport]:
        """
        偵測所有違規

        Returns:
            magnitude > 0 的報告，依必要約束優先、權重遞減、違規量遞減、約束順序排序
        """
        reports = [self.evaluate_constraint(c, layout, i, config) for i, c in enumerate(constraints)]
        violated = [r for r in reports if r.magnitude > 0]
        violated.sort(key=lambda r: (not r.constraint.essential, -r.constraint.weight, -r.magnitude, r.index))
        return violated

    def weighted_totals(
        self,
        layout: Layout,
        constraints: Sequence[ConstraintTuple],
        config: Optional[ConstraintConfig] = None
    ) -> Tuple[float, float]:
        """
        Returns:
            (必要約束的加權違規量, 全部約束的加權違規量)
        """
        essential = 0.0
        total = 0.0
        for i, c in enumerate(constraints):
            weighted = c.weight * self.evaluate_constraint(c, layout, i, config).magnitude
            total += weighted
            if c.essential:
                essential += weighted
        return essential, total

    # ------------------------------------------------------------------
    # 各類型評估函式，回傳 (magnitude, detail)
    # ------------------------------------------------------------------

    def _eval_distance(self, c: ConstraintTuple, layout: Layout, config: ConstraintConfig) -> Tuple[float, str]:
        d = self.distance_between(c.objects[0], c.objects[1], layout, self.metric_of(c, config))
        lo, hi = c.number("min", 0.0), c.number("max", math.inf)
        magnitude = max(0.0, lo - d, d - hi)
        return magnitude, f"距離 {d:.3f} m，要求 [{lo:g}, {hi:g}]"

    def metric_of(self, c: ConstraintTuple, config: ConstraintConfig) -> DistanceMetric:
        return DistanceMetric(c.text("metric", config.distance_metric.value))

    def distance_between(self, a_id: str, b_id: str, layout: Layout, metric: DistanceMetric) -> float:
        """兩物件 (或物件與建築) 之間的距離"""
        if is_architectural(a_id) and not is_architectural(b_id):
            a_id, b_id = b_id, a_id
        a = layout.get(a_id)
        if a is None:
            raise UnplacedReference(a_id)
        room = layout.room
        if is_wall_ref(b_id):
            wall = parse_wall_id(b_id)
            if metric == DistanceMetric.SURFACE:
                return max(0.0, wall_gap(a, wall, room.width, room.depth))
            return wall_center_distance(a, wall, room.width, room.depth)
        if b_id == "floor":
            return a.z
        if b_id == "ceiling":
            return max(0.0, room.wall_height - a.top)
        b = layout.get(b_id)
        if b is None:
            raise UnplacedReference(b_id)
        if metric == DistanceMetric.SURFACE:
            return float(a.polygon().distance(b.polygon()))
        return math.hypot(a.x - b.x, a.y - b.y)

    def _eval_overlap(self, c: ConstraintTuple, layout: Layout, config: ConstraintConfig) -> Tuple[float, str]:
        if c.objects:
            pairs = [(layout.get(c.objects[0]), layout.get(c.objects[1]))]
        else:
            pairs = list(itertools.combinations(layout.items, 2))
        total = 0.0
        hits = []
        for a, b in pairs:
            if not z_overlap(a.z, a.h, b.z, b.h):
                continue
            area = intersection_area(a.polygon(), b.polygon())
            if area > OVERLAP_TOLERANCE:
                total += area
                hits.append(f"{a.id}/{b.id}")
        return total, f"重疊 {total:.4f} m² ({', '.join(hits)})" if hits else "無重疊"

    def orientation_error(self, c: ConstraintTuple, layout: Layout) -> float:
        """朝向誤差 (弧度，帶正負號): 主體需再旋轉 -error 才能滿足"""
        a = layout.get(c.objects[0])
        ref = c.objects[1] if len(c.objects) > 1 else None
        if ref is None:
            target = c.number("yaw", 0.0)
            return wrap_angle(a.yaw - target)
        if is_wall_ref(ref):
            ref_yaw = WALL_FACING_YAW[parse_wall_id(ref)]
            if c.predicate == RelationKind.BACK_TO_BACK.value:
                # 背靠牆面: 朝向與牆面法向相同
                return wrap_angle(a.yaw - ref_yaw)
        else:
            ref_yaw = layout.get(ref).yaw
        return wrap_angle(a.yaw - ref_yaw - math.pi)

    def facing_each_other(self, c: ConstraintTuple, layout: Layout) -> bool:
        """back_to_back 的兩件家具是否反而面向彼此 (主體朝向指向參照物所在的半平面)"""
        if c.predicate != RelationKind.BACK_TO_BACK.value or len(c.objects) < 2 or is_architectural(c.objects[1]):
            return False
        a, b = layout.get(c.objects[0]), layout.get(c.objects[1])
        fx, fy = facing_vector(a.yaw)
        return fx * (b.x - a.x) + fy * (b.y - a.y) > 0

    def _eval_orientation(self, c: ConstraintTuple, layout: Layout, config: ConstraintConfig) -> Tuple[float, str]:
        error = abs(self.orientation_error(c, layout))
        tolerance = math.radians(config.orientation_tolerance_deg)
        magnitude = _beyond(error, tolerance)
        if magnitude == 0.0 and self.facing_each_other(c, layout):
            return math.pi, "兩件家具面向彼此"
        return magnitude, f"角度誤差 {math.degrees(error):.1f}°"

    def local_offset(self, subject: PlacedItem, reference: PlacedItem) -> Tuple[float, float]:
        """主體中心在參照物局部座標中的 (u, v)"""
        return to_local(subject.x, subject.y, reference.x, reference.y, reference.yaw)

    def _eval_position(self, c: ConstraintTuple, layout: Layout, config: ConstraintConfig) -> Tuple[float, str]:
        predicate = c.predicate or RelationKind.IN_FRONT_OF.value
        subject = layout.get(c.objects[0])
        ref_id = c.objects[1] if len(c.objects) > 1 else None
        room = layout.room
        tol = config.wall_gap_tolerance

        if predicate in (RelationKind.AGAINST_WALL.value, RelationKind.NEAR_WALL.value,
                         RelationKind.AWAY_FROM_WALL.value):
            walls = [parse_wall_id(ref_id)] if ref_id and is_wall_ref(ref_id) else list(WALL_ORDER)
            gap = min(wall_gap(subject, w, room.width, room.depth) for w in walls)
            if predicate == RelationKind.AGAINST_WALL.value:
                return _beyond(abs(gap), tol), f"離牆 {gap:.3f} m"
            if predicate == RelationKind.NEAR_WALL.value:
                return max(0.0, gap - c.number("max", 0.5)), f"離牆 {gap:.3f} m"
            return max(0.0, c.number("min", 0.5) - gap), f"離牆 {gap:.3f} m"

        if predicate == RelationKind.CORNER.value:
            magnitude = self.corner_gap(subject, ref_id, room.width, room.depth, tol)
            return magnitude, f"離角落 {magnitude:.3f} m"

        if predicate == RelationKind.CEILING_MOUNTED.value:
            gap = room.wall_height - subject.top
            return _beyond(abs(gap), tol), f"離天花板 {gap:.3f} m"

        if predicate == RelationKind.ON_FLOOR.value:
            return _beyond(subject.z, tol), f"離地 {subject.z:.3f} m"

        reference = layout.get(ref_id)
        u, v = self.local_offset(subject, reference)
        if predicate == RelationKind.IN_FRONT_OF.value:
            ok = v > 0 and abs(u) <= reference.w / 2
        elif predicate == RelationKind.BEHIND.value:
            ok = v < 0 and abs(u) <= reference.w / 2
        elif predicate == RelationKind.LEFT_OF.value:
            ok = u < 0 and abs(v) <= reference.d / 2
        elif predicate == RelationKind.RIGHT_OF.value:
            ok = u > 0 and abs(v) <= reference.d / 2
        elif predicate == RelationKind.SIDE_BY_SIDE.value:
            gap = float(subject.polygon().distance(reference.polygon()))
            ok = abs(v) <= reference.d / 2 and gap <= c.number("max_gap", 0.5)
        else:
            raise UnmappableRelation(predicate)
        return (0.0 if ok else 1.0), f"局部座標 u={u:.3f}, v={v:.3f}"

    def corner_gap(self, item: PlacedItem, ref: Optional[str], width: float, depth: float, tol: float) -> float:
        """到最近角落的兩面牆距離和 (各自扣除容許值)"""
        walls = [parse_wall_id(ref)] if ref and is_wall_ref(ref) else list(WALL_ORDER)
        best = math.inf
        for wall in walls:
            own = _beyond(abs(wall_gap(item, wall, width, depth)), tol)
            side = min(_beyond(abs(wall_gap(item, w, width, depth)), tol) for w in _ADJACENT_WALLS[wall])
            best = min(best, own + side)
        return best

    def _eval_alignment(self, c: ConstraintTuple, layout: Layout, config: ConstraintConfig) -> Tuple[float, str]:
        subject = layout.get(c.objects[0])
        ref_id = c.objects[1] if len(c.objects) > 1 else None
        tol = config.alignment_tolerance
        if ref_id is None or is_architectural(ref_id):
            room = layout.room
            walls = [parse_wall_id(ref_id)] if ref_id and is_wall_ref(ref_id) else list(WALL_ORDER)
            gap = min(abs(wall_gap(subject, w, room.width, room.depth)) for w in walls)
            return _beyond(gap, tol), f"離牆 {gap:.3f} m"
        u, v = self.local_offset(subject, layout.get(ref_id))
        offset = min(abs(u), abs(v))
        return _beyond(offset, tol), f"對齊偏移 {offset:.3f} m"

    def _eval_on_top(self, c: ConstraintTuple, layout: Layout, config: ConstraintConfig) -> Tuple[float, str]:
        child = layout.get(c.objects[0])
        support = layout.get(c.objects[1]) if len(c.objects) > 1 and not is_architectural(c.objects[1]) else None
        if support is None:
            return _beyond(child.z, MAGNITUDE_EPSILON), "沒有支撐物"
        vertical = abs(child.z - support.top)
        poly = child.polygon()
        outside = poly.area - intersection_area(poly, support.polygon())
        if outside <= OVERLAP_TOLERANCE:
            outside = 0.0
        return vertical + outside, f"垂直間隙 {vertical:.3f} m，超出支撐面 {outside:.4f} m²"

    def _eval_size(self, c: ConstraintTuple, layout: Layout, config: ConstraintConfig) -> Tuple[float, str]:
        item = layout.get(c.objects[0])
        if len(c.objects) > 1:
            other = layout.get(c.objects[1])
            targets = {"w": other.w, "d": other.d, "h": other.h}
        else:
            targets = {k: c.number(k, -1.0) for k in ("w", "d", "h") if c.number(k, -1.0) > 0}
        mismatched = [
            k for k, target in targets.items()
            if abs(getattr(item, k) - target) > config.size_tolerance
        ]
        return (1.0 if mismatched else 0.0), f"尺寸不符: {mismatched}" if mismatched else "尺寸相符"

    def _eval_attribute(self, c: ConstraintTuple, layout: Layout, config: ConstraintConfig) -> Tuple[float, str]:
        key = c.ctype.value
        item = layout.get(c.objects[0])
        if len(c.objects) > 1:
            required = getattr(layout.get(c.objects[1]), key)
        else:
            required = c.text(key)
        actual = getattr(item, key)
        return (0.0 if actual == required else 1.0), f"{key}: {actual} (要求 {required})"

    def _eval_count(self, c: ConstraintTuple, layout: Layout, config: ConstraintConfig) -> Tuple[float, str]:
        category = c.objects[0]
        actual = sum(1 for item in layout.items if item.category == category)
        if c.relation == Comparator.RANGE:
            lo, hi = c.number("min", 0.0), c.number("max", math.inf)
            magnitude = max(0.0, lo - actual, actual - hi)
            return magnitude, f"{category} 數量 {actual}，要求 [{lo:g}, {hi:g}]"
        n = c.number("n", 0.0)
        return abs(actual - n), f"{category} 數量 {actual}，要求 {n:g}"


constraint_service = ConstraintService()
