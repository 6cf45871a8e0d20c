"""
擺放服務模組 (CAPS)

提供家具擺放相關功能：
- 候選位置產生 (地面格點、靠牆帶、支撐物頂面)
- 擺放評分 L = α·L_dist + β·L_obj
- 衝突時的動態權重調整
- 依 HDFS 順序逐一加入家具
- 碰撞偵測
- 佈局檔讀寫
"""
import json
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import shapely
from pydantic import ValidationError

from roomcraft.core.config import CapsConfig, config_hash
from roomcraft.core.exceptions import (
    ItemUnplaceable,
    MalformedDocument,
    NoCandidateSurface,
    SchemaViolation,
)
from roomcraft.schemas.constraint import CorrectionTrace
from roomcraft.schemas.graph import PlacementOrder
from roomcraft.schemas.layout import (
    CollisionRecord,
    ItemTrace,
    Layout,
    PlacedItem,
    PlacementTrace,
    Provenance,
)
from roomcraft.schemas.scene import FurnitureItem, RelationEdge, Room, SceneOrganization
from roomcraft.services.scene_service import scene_service
from roomcraft.utils.constants import (
    CARDINAL_YAWS,
    LAYOUT_SCHEMA,
    OVERLAP_TOLERANCE,
    WALL_FACING_YAW,
    WALL_ORDER,
    CollisionType,
    ConflictType,
    Mount,
    RelationKind,
    WallId,
    is_wall_ref,
    parse_wall_id,
)
from roomcraft.utils.geometry import (
    aabb_overlap_areas,
    grid_axis,
    half_extents,
    intersection_area,
    is_axis_aligned,
    normalize_yaw,
    outside_area,
    z_overlap,
)
from roomcraft.utils.logging import get_logger

logger = get_logger(__name__)

# 候選的錨定牆面編碼；-1 表示以最近牆面計算 L_dist
NEAREST_WALL = -1
_WALL_CODE = {wall: i for i, wall in enumerate(WALL_ORDER)}

_ANCHOR_RELATIONS = (RelationKind.AGAINST_WALL, RelationKind.NEAR_WALL, RelationKind.CORNER)

# 佈局檔浮點數位數
LAYOUT_DECIMALS = 6


@dataclass(frozen=True)
class CandidateSet:
    """一組候選擺放位置 (依 yaw、x、y 排序)"""
    xs: np.ndarray
    ys: np.ndarray
    yaws: np.ndarray
    anchors: np.ndarray
    z: float = 0.0

    def __len__(self) -> int:
        return int(self.xs.shape[0])

    def poses(self) -> List[Tuple[Tuple[float, float], float]]:
        return [((float(x), float(y)), float(yaw)) for x, y, yaw in zip(self.xs, self.ys, self.yaws)]

    def anchor_wall(self, index: int) -> Optional[WallId]:
        code = int(self.anchors[index])
        return None if code == NEAREST_WALL else WALL_ORDER[code]


@dataclass
class ItemContext:
    """由關係推得的單一家具擺放條件"""
    support: Optional[str] = None
    anchors: List[Tuple[WallId, RelationKind]] = field(default_factory=list)


@dataclass(frozen=True)
class CandidateTerms:
    """候選位置的正規化評分項與可行性閘門"""
    n_dist: np.ndarray
    n_obj: np.ndarray
    outside: np.ndarray
    overlap: np.ndarray


def _empty_candidates(z: float = 0.0) -> CandidateSet:
    empty = np.empty(0)
    return CandidateSet(empty, empty, empty, np.empty(0, dtype=int), z)


def _sorted_candidates(parts: List[Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]], z: float) -> CandidateSet:
    parts = [p for p in parts if p[0].size]
    if not parts:
        return _empty_candidates(z)
    xs = np.concatenate([p[0] for p in parts])
    ys = np.concatenate([p[1] for p in parts])
    yaws = np.concatenate([p[2] for p in parts])
    anchors = np.concatenate([p[3] for p in parts])
    order = np.lexsort((ys, xs, yaws))
    return CandidateSet(xs[order], ys[order], yaws[order], anchors[order], z)


class PlacementService:
    """擺放服務類別"""

    # ------------------------------------------------------------------
    # 擺放條件
    # ------------------------------------------------------------------

    def item_context(self, item: FurnitureItem, relations: Sequence[RelationEdge]) -> ItemContext:
        """找出家具的支撐物與錨定牆面"""
        context = ItemContext()
        for edge in relations:
            if edge.subject != item.id:
                continue
            if edge.relation == RelationKind.ON_TOP_OF:
                context.support = edge.object
            elif edge.relation in _ANCHOR_RELATIONS:
                if is_wall_ref(edge.object):
                    context.anchors.append((parse_wall_id(edge.object), edge.relation))
                elif edge.relation == RelationKind.CORNER:
                    context.anchors.extend((wall, edge.relation) for wall in WALL_ORDER)
        return context

    def item_z(self, item: FurnitureItem, room: Room, config: CapsConfig, support: Optional[PlacedItem] = None) -> float:
        """家具底面高度"""
        if support is not None:
            return support.z + support.h
        if item.mount == Mount.CEILING:
            return max(0.0, room.wall_height - item.h)
        if item.mount == Mount.WALL:
            return max(0.0, min(config.wall_mount_height, room.wall_height - item.h))
        return 0.0

    # ------------------------------------------------------------------
    # 候選位置
    # ------------------------------------------------------------------

    def generate_candidates(
        self,
        item: FurnitureItem,
        room: Room,
        layout: Layout,
        grid_step: float,
        relations: Sequence[RelationEdge] = (),
        config: Optional[CapsConfig] = None,
        relaxed: bool = False
    ) -> CandidateSet:
        """
        產生候選擺放位置

        Args:
            item: 要擺放的家具
            room: 房間
            layout: 目前佈局 (on_top 物件需要其支撐物已擺放)
            grid_step: 格點間距 (公尺)
            relations: 場景關係，用於找出支撐物與靠牆錨點
            config: CAPS 參數 (壁掛高度、near_wall 帶寬)
            relaxed: 放寬靠牆限制，改用完整地面格點

        Returns:
            CandidateSet；物件比房間大時為空
        """
        if grid_step <= 0:
            raise ValueError("grid_step 必須大於 0")
        config = config or CapsConfig()
        context = self.item_context(item, relations)

        if context.support is not None:
            support = layout.get(context.support)
            if support is None:
                raise NoCandidateSurface(item.id, context.support)
            return self._surface_candidates(item, support, grid_step)

        z = self.item_z(item, room, config)
        if item.mount == Mount.WALL:
            walls = [(w, RelationKind.AGAINST_WALL) for w in WALL_ORDER]
            if context.anchors and not relaxed:
                walls = [(w, RelationKind.AGAINST_WALL if k == RelationKind.NEAR_WALL else k) for w, k in context.anchors]
            return self._band_candidates(item, room, walls, grid_step, config, z)
        if context.anchors and not relaxed:
            return self._band_candidates(item, room, context.anchors, grid_step, config, z)
        return self._floor_candidates(item, room, grid_step, z)

    def _floor_candidates(self, item: FurnitureItem, room: Room, step: float, z: float) -> CandidateSet:
        parts = []
        for yaw in CARDINAL_YAWS:
            ex, ey = half_extents(item.w, item.d, yaw)
            xs = grid_axis(ex, room.width - ex, step)
            ys = grid_axis(ey, room.depth - ey, step)
            if not xs.size or not ys.size:
                continue
            gx, gy = np.meshgrid(xs, ys, indexing="ij")
            n = gx.size
            parts.append((gx.ravel(), gy.ravel(), np.full(n, yaw), np.full(n, NEAREST_WALL, dtype=int)))
        return _sorted_candidates(parts, z)

    def _band_candidates(
        self,
        item: FurnitureItem,
        room: Room,
        anchors: Sequence[Tuple[WallId, RelationKind]],
        step: float,
        config: CapsConfig,
        z: float
    ) -> CandidateSet:
        parts = []
        for wall, kind in anchors:
            yaw = WALL_FACING_YAW[wall]
            ex, ey = half_extents(item.w, item.d, yaw)
            if kind == RelationKind.NEAR_WALL:
                gaps = grid_axis(0.0, config.near_wall_band, step)
            else:
                gaps = np.zeros(1)

            if wall in (WallId.NORTH, WallId.SOUTH):
                lateral_lo, lateral_hi, half_lateral, half_normal, span = ex, room.width - ex, ex, ey, room.depth
            else:
                lateral_lo, lateral_hi, half_lateral, half_normal, span = ey, room.depth - ey, ey, ex, room.width
            if lateral_hi < lateral_lo - 1e-9:
                continue
            if kind == RelationKind.CORNER:
                lateral = np.unique(np.array([lateral_lo, max(lateral_lo, lateral_hi)]))
            else:
                lateral = grid_axis(lateral_lo, lateral_hi, step)
            gaps = gaps[half_normal + gaps <= span - half_normal + 1e-9]
            if not gaps.size:
                continue

            gl, gg = np.meshgrid(lateral, gaps, indexing="ij")
            gl, gg = gl.ravel(), gg.ravel()
            if wall == WallId.NORTH:
                xs, ys = gl, room.depth - half_normal - gg
            elif wall == WallId.SOUTH:
                xs, ys = gl, half_normal + gg
            elif wall == WallId.EAST:
                xs, ys = room.width - half_normal - gg, gl
            else:
                xs, ys = half_normal + gg, gl
            n = xs.size
            parts.append((xs, ys, np.full(n, yaw), np.full(n, _WALL_CODE[wall], dtype=int)))
        return _sorted_candidates(parts, z)

    def _surface_candidates(self, item: FurnitureItem, support: PlacedItem, step: float) -> CandidateSet:
        z = support.z + support.h
        c, s = math.cos(support.yaw), math.sin(support.yaw)
        parts = []
        for quarter in range(4):
            yaw = normalize_yaw(support.yaw + quarter * math.pi / 2)
            lx, ly = (item.w / 2, item.d / 2) if quarter % 2 == 0 else (item.d / 2, item.w / 2)
            us = grid_axis(-support.w / 2 + lx, support.w / 2 - lx, step)
            vs = grid_axis(-support.d / 2 + ly, support.d / 2 - ly, step)
            if not us.size or not vs.size:
                continue
            gu, gv = np.meshgrid(us, vs, indexing="ij")
            gu, gv = gu.ravel(), gv.ravel()
            xs = support.x + gu * c - gv * s
            ys = support.y + gu * s + gv * c
            n = xs.size
            parts.append((xs, ys, np.full(n, yaw), np.full(n, NEAREST_WALL, dtype=int)))
        return _sorted_candidates(parts, z)

    # ------------------------------------------------------------------
    # 評分
    # ------------------------------------------------------------------

    def l_dist(self, p: Tuple[float, float], item: Optional[FurnitureItem], room: Room, anchor_wall: Optional[WallId] = None) -> float:
        """
        牆距項: p 到錨定牆對面牆的垂直距離

        Args:
            anchor_wall: 錨定牆面，None 時使用離 p 最近的牆 (同距離依北、南、東、西)
        """
        code = NEAREST_WALL if anchor_wall is None else _WALL_CODE[WallId(anchor_wall)]
        return float(self._l_dist_array(np.array([p[0]]), np.array([p[1]]), np.array([code]), room)[0])

    def _l_dist_array(self, xs: np.ndarray, ys: np.ndarray, anchors: np.ndarray, room: Room) -> np.ndarray:
        # 到北、南、東、西牆的距離
        walls = np.stack([room.depth - ys, ys, room.width - xs, xs])
        opposite = np.stack([ys, room.depth - ys, xs, room.width - xs])
        nearest = np.argmin(walls, axis=0)
        code = np.where(anchors == NEAREST_WALL, nearest, anchors)
        return np.take_along_axis(opposite, code[np.newaxis, :], axis=0)[0]

    def l_obj(self, p: Tuple[float, float], layout: Layout, mu: float) -> float:
        """物件密度項: 半徑 μ 內已擺放物件的平均中心距離；範圍內沒有物件時為 μ"""
        if mu <= 0:
            raise ValueError("mu 必須大於 0")
        return float(self._l_obj_array(np.array([p[0]]), np.array([p[1]]), layout, mu)[0])

    def _l_obj_array(self, xs: np.ndarray, ys: np.ndarray, layout: Layout, mu: float) -> np.ndarray:
        total = np.zeros_like(xs)
        count = np.zeros_like(xs)
        for placed in layout.items:
            dx, dy = xs - placed.x, ys - placed.y
            dist = np.sqrt(dx * dx + dy * dy)
            within = dist <= mu
            total = total + np.where(within, dist, 0.0)
            count = count + within
        return np.where(count > 0, total / np.maximum(count, 1.0), mu)

    def candidate_terms(
        self,
        candidates: CandidateSet,
        item: FurnitureItem,
        room: Room,
        layout: Layout,
        mu: float
    ) -> CandidateTerms:
        """計算候選位置的正規化牆距、密度與兩個可行性閘門的面積"""
        xs, ys, yaws = candidates.xs, candidates.ys, candidates.yaws
        n_dist = self._l_dist_array(xs, ys, candidates.anchors, room) / room.diagonal
        n_obj = self._l_obj_array(xs, ys, layout, mu) / mu
        outside, overlap = self._gate_areas(xs, ys, yaws, item, candidates.z, room, layout)
        return CandidateTerms(n_dist, n_obj, outside, overlap)

    def combine(
        self,
        terms: CandidateTerms,
        alpha: float,
        beta: float,
        tolerance: float = OVERLAP_TOLERANCE
    ) -> Tuple[np.ndarray, np.ndarray]:
        """
        Returns:
            (scores, raw): scores 中不可行的候選為 -inf；raw 為未套用閘門的分數
        """
        raw = alpha * terms.n_dist + beta * terms.n_obj
        feasible = (terms.outside <= tolerance) & (terms.overlap <= tolerance)
        return np.where(feasible, raw, -np.inf), raw

    def score_candidates(
        self,
        candidates: CandidateSet,
        item: FurnitureItem,
        room: Room,
        layout: Layout,
        alpha: float,
        beta: float,
        mu: float,
        tolerance: float = OVERLAP_TOLERANCE
    ) -> np.ndarray:
        """批次評分，分數越高越好"""
        terms = self.candidate_terms(candidates, item, room, layout, mu)
        return self.combine(terms, alpha, beta, tolerance)[0]

    def score_candidate(
        self,
        p: Tuple[float, float],
        yaw: float,
        item: FurnitureItem,
        room: Room,
        layout: Layout,
        alpha: float,
        beta: float,
        mu: float,
        anchor_wall: Optional[WallId] = None,
        z: float = 0.0,
        tolerance: float = OVERLAP_TOLERANCE
    ) -> float:
        """
        單一候選的擺放分數 α·n_dist + β·n_obj

        Returns:
            超出房間或與已擺放家具重疊超過容許值時為 -inf
        """
        code = NEAREST_WALL if anchor_wall is None else _WALL_CODE[WallId(anchor_wall)]
        single = CandidateSet(
            np.array([float(p[0])]),
            np.array([float(p[1])]),
            np.array([float(yaw)]),
            np.array([code], dtype=int),
            z,
        )
        return float(self.score_candidates(single, item, room, layout, alpha, beta, mu, tolerance)[0])

    def _gate_areas(
        self,
        xs: np.ndarray,
        ys: np.ndarray,
        yaws: np.ndarray,
        item: FurnitureItem,
        z: float,
        room: Room,
        layout: Layout
    ) -> Tuple[np.ndarray, np.ndarray]:
        """超出房間的面積與與任一已擺放家具的最大交疊面積"""
        outside = np.zeros_like(xs)
        overlap = np.zeros_like(xs)
        if not xs.size:
            return outside, overlap

        hx = np.empty_like(xs)
        hy = np.empty_like(xs)
        aligned = np.zeros(xs.shape, dtype=bool)
        for yaw in np.unique(yaws):
            mask = yaws == yaw
            hx[mask], hy[mask] = half_extents(item.w, item.d, float(yaw))
            aligned[mask] = is_axis_aligned(float(yaw))

        others = [p for p in layout.items if z_overlap(z, item.h, p.z, p.h)]
        area = item.w * item.d

        if aligned.any():
            ax, ay, ahx, ahy = xs[aligned], ys[aligned], hx[aligned], hy[aligned]
            inside = aabb_overlap_areas(ax, ay, ahx, ahy, (0.0, 0.0, room.width, room.depth))
            outside[aligned] = np.clip(area - inside, 0.0, None)
            boxes = None
            for other in others:
                if is_axis_aligned(other.yaw):
                    hit = aabb_overlap_areas(ax, ay, ahx, ahy, tuple(shapely.bounds(other.polygon())))
                else:
                    if boxes is None:
                        boxes = shapely.box(ax - ahx, ay - ahy, ax + ahx, ay + ahy)
                    hit = shapely.area(shapely.intersection(boxes, other.polygon()))
                overlap[aligned] = np.maximum(overlap[aligned], hit)

        rotated = ~aligned
        if rotated.any():
            polys = self._rotated_polygons(xs[rotated], ys[rotated], yaws[rotated], item.w, item.d)
            room_box = shapely.box(0.0, 0.0, room.width, room.depth)
            inside = shapely.area(shapely.intersection(polys, room_box))
            outside[rotated] = np.clip(area - inside, 0.0, None)
            for other in others:
                hit = shapely.area(shapely.intersection(polys, other.polygon()))
                overlap[rotated] = np.maximum(overlap[rotated], hit)
        return outside, overlap

    def _rotated_polygons(self, xs: np.ndarray, ys: np.ndarray, yaws: np.ndarray, w: float, d: float) -> np.ndarray:
        local = np.array([(-w / 2, -d / 2), (w / 2, -d / 2), (w / 2, d / 2), (-w / 2, d / 2)])
        c, s = np.cos(yaws)[:, None], np.sin(yaws)[:, None]
        px = xs[:, None] + local[:, 0] * c - local[:, 1] * s
        py = ys[:, None] + local[:, 0] * s + local[:, 1] * c
        return shapely.polygons(np.stack([px, py], axis=-1))

    # ------------------------------------------------------------------
    # 權重調整
    # ------------------------------------------------------------------

    def adjust_weights(self, alpha: float, conflict: ConflictType, k: float, delta_alpha: float) -> Tuple[float, float]:
        """
        依衝突類型調整權重

        牆面衝突增加 α (更重視與對面牆的距離)，家具衝突增加 β。

        Returns:
            (α', β')，α' 夾在 [0, 1]，且 β' = 1 - α'
        """
        step = k * delta_alpha
        if ConflictType(conflict) == ConflictType.WALL_COLLISION:
            alpha = alpha + step
        else:
            alpha = alpha - step
        alpha = min(1.0, max(0.0, alpha))
        return alpha, 1.0 - alpha

    # ------------------------------------------------------------------
    # 擺放
    # ------------------------------------------------------------------

    def place_item(
        self,
        item: FurnitureItem,
        relations: Sequence[RelationEdge],
        room: Room,
        layout: Layout,
        config: CapsConfig,
        strict: bool = True
    ) -> Tuple[PlacedItem, ItemTrace]:
        """
        單一家具的加入動作 (Addition)

        找不到可行位置時診斷衝突類型、調整權重並以較細的格點重試；
        relax_anchor_after 次之後放寬靠牆限制。

        Args:
            strict: False 時 (僅供基準測試) 最後改放在最佳的不可行位置並標記 fallback

        Returns:
            (PlacedItem, ItemTrace)
        """
        context = self.item_context(item, relations)
        support = None
        if context.support is not None:
            support = layout.get(context.support)
            if support is None:
                raise NoCandidateSurface(item.id, context.support)

        alpha, beta = config.alpha0, config.beta0
        retries = config.max_retries if config.adaptive else 0
        conflicts: List[ConflictType] = []
        cache: Dict[Tuple[float, bool], Tuple[CandidateSet, CandidateTerms]] = {}
        step = config.grid_step
        relaxed = False
        best: Optional[Tuple[CandidateSet, int, float]] = None
        fallback: Optional[Tuple[CandidateSet, int, float]] = None
        attempts = 0

        for attempt in range(retries + 1):
            attempts = attempt + 1
            if config.adaptive:
                step = max(config.min_grid_step, config.grid_step / 2 ** (attempt // config.refine_every))
                relaxed = bool(context.anchors) and attempt >= config.relax_anchor_after
            key = (step, relaxed)
            if key not in cache:
                candidates = self.generate_candidates(item, room, layout, step, relations, config, relaxed)
                cache[key] = (candidates, self.candidate_terms(candidates, item, room, layout, config.mu))
            candidates, terms = cache[key]

            scores, raw = self.combine(terms, alpha, beta, config.overlap_tolerance)
            if len(candidates) and np.isfinite(scores).any():
                index = int(np.argmax(scores))
                best = (candidates, index, float(scores[index]))
                break

            if len(candidates):
                index = int(np.argmax(raw))
                fallback = (candidates, index, float(raw[index]))
                conflict = (
                    ConflictType.WALL_COLLISION
                    if terms.outside[index] > config.overlap_tolerance
                    else ConflictType.FURNITURE_COLLISION
                )
            else:
                conflict = ConflictType.WALL_COLLISION
            conflicts.append(conflict)
            logger.debug(f"{item.id} 第 {attempts} 次嘗試失敗: {conflict.value} (step={step}, α={alpha:.3f})")
            if config.adaptive and attempt < retries:
                alpha, beta = self.adjust_weights(alpha, conflict, config.k, config.delta_alpha)

        trace = ItemTrace(
            id=item.id,
            attempts=attempts,
            final_alpha=alpha,
            final_beta=beta,
            grid_step=step,
            conflicts=tuple(conflicts),
            relaxed_anchor=relaxed,
            fallback=best is None,
            score=best[2] if best is not None else None,
        )

        if best is None:
            if strict:
                raise ItemUnplaceable(item.id, trace.model_dump(mode="json"))
            logger.warning(f"{item.id} 無可行位置，改用最佳不可行位置")
            if fallback is not None:
                chosen = fallback
            else:
                center = CandidateSet(
                    np.array([room.width / 2]), np.array([room.depth / 2]),
                    np.array([0.0]), np.array([NEAREST_WALL]),
                    self.item_z(item, room, config, support),
                )
                chosen = (center, 0, -math.inf)
        else:
            chosen = best

        candidates, index, _ = chosen
        placed = PlacedItem(
            id=item.id,
            category=item.category,
            x=float(candidates.xs[index]),
            y=float(candidates.ys[index]),
            z=candidates.z,
            yaw=float(candidates.yaws[index]),
            w=item.w,
            d=item.d,
            h=item.h,
            color=item.color,
            material=item.material,
            mount=item.mount,
            support=context.support,
        )
        return placed, trace

    def place_sequence(
        self,
        order: PlacementOrder,
        org: SceneOrganization,
        room: Room,
        config: CapsConfig,
        strict: bool = True,
        provenance: Optional[Provenance] = None
    ) -> Tuple[Layout, PlacementTrace]:
        """
        依擺放順序逐一加入家具

        Args:
            order: HDFS 擺放順序
            org: 場景組織 (count > 1 會先展開)
            room: 房間
            config: CAPS 參數
            strict: True 時無法擺放的家具會拋出 ItemUnplaceable
            provenance: 寫入佈局的來源資訊，預設使用 config 的種子與雜湊

        Returns:
            (Layout, PlacementTrace)
        """
        if any(item.count > 1 for item in org.furniture):
            org = scene_service.expand_counts(org)
        items = {item.id: item for item in org.furniture}
        missing = [i for i in order.items if i not in items]
        if missing or len(order.items) != len(items):
            raise ValueError(f"擺放順序與場景家具不一致: {missing}")

        provenance = provenance or Provenance(seed=config.seed, config_hash=config_hash(config))
        layout = Layout(room=room, provenance=provenance)
        traces: List[ItemTrace] = []
        logger.info(f"開始擺放 {len(order.items)} 件家具")
        for item_id in order.items:
            try:
                placed, trace = self.place_item(items[item_id], org.relations, room, layout, config, strict)
            except ItemUnplaceable as e:
                e.details["placed"] = [t.id for t in traces]
                raise
            layout = layout.with_items(layout.items + (placed,))
            traces.append(trace)
        logger.info(f"擺放完成: {len(layout.items)} 件, 重試 {sum(t.attempts - 1 for t in traces)} 次")
        return layout, PlacementTrace(items=tuple(traces))

    # ------------------------------------------------------------------
    # 碰撞偵測
    # ------------------------------------------------------------------

    def detect_collisions(self, layout: Layout, tolerance: float = OVERLAP_TOLERANCE) -> List[CollisionRecord]:
        """
        偵測牆面與家具碰撞

        Returns:
            面積超過容許值的 CollisionRecord；先列出超出房間的家具，再列出兩兩交疊
        """
        records: List[CollisionRecord] = []
        polygons = [item.polygon() for item in layout.items]
        for item, poly in zip(layout.items, polygons):
            area = outside_area(poly, layout.room.width, layout.room.depth)
            if area > tolerance:
                records.append(CollisionRecord(ids=(item.id,), area=area, type=CollisionType.WALL))
        for i, a in enumerate(layout.items):
            for j in range(i + 1, len(layout.items)):
                b = layout.items[j]
                if not z_overlap(a.z, a.h, b.z, b.h):
                    continue
                area = intersection_area(polygons[i], polygons[j])
                if area > tolerance:
                    records.append(CollisionRecord(ids=(a.id, b.id), area=area, type=CollisionType.FURNITURE))
        return records

    # ------------------------------------------------------------------
    # 佈局檔
    # ------------------------------------------------------------------

    def dump_layout(
        self,
        layout: Layout,
        trace: Optional[PlacementTrace] = None,
        correction: Optional[CorrectionTrace] = None
    ) -> str:
        """輸出佈局 JSON (浮點數取 6 位小數)"""
        def rounded(value: Any) -> Any:
            if isinstance(value, float):
                return round(value, LAYOUT_DECIMALS) + 0.0
            if isinstance(value, dict):
                return {k: rounded(v) for k, v in value.items()}
            if isinstance(value, (list, tuple)):
                return [rounded(v) for v in value]
            return value

        document: Dict[str, Any] = {
            "schema": LAYOUT_SCHEMA,
            "provenance": layout.provenance.model_dump(mode="json"),
            "room": layout.room.model_dump(mode="json"),
            "items": [item.model_dump(mode="json") for item in layout.items],
        }
        if trace is not None:
            document["trace"] = trace.model_dump(mode="json")
        if correction is not None:
            document["correction"] = correction.model_dump(mode="json")
        return json.dumps(rounded(document), ensure_ascii=False, indent=2) + "\n"

    def load_layout(self, text: str) -> Tuple[Layout, Optional[PlacementTrace]]:
        """讀取佈局 JSON"""
        try:
            document = json.loads(text)
        except (json.JSONDecodeError, TypeError) as e:
            raise MalformedDocument(str(e))
        if not isinstance(document, dict):
            raise MalformedDocument("頂層必須為 JSON 物件")
        if document.get("schema") != LAYOUT_SCHEMA:
            raise SchemaViolation("schema", f"不支援的佈局版本: {document.get('schema')!r}")
        try:
            layout = Layout(
                room=document["room"],
                items=document.get("items", []),
                provenance=document.get("provenance", {}),
            )
            trace = PlacementTrace(**document["trace"]) if "trace" in document else None
        except KeyError as e:
            raise SchemaViolation(str(e), "缺少必要欄位")
        except ValidationError as e:
            raise SchemaViolation("layout", str(e.errors()[0].get("msg", "")))
        return layout, trace


placement_service = PlacementService()
