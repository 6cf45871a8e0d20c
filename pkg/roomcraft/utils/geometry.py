"""
2.5D 幾何工具

平面座標: x 向東、y 向北，原點為房間西南角。
yaw 0 朝北，朝向向量為 (-sin yaw, cos yaw)。
"""
import math
from typing import Iterable, List, Sequence, Tuple

import numpy as np
from shapely.geometry import Polygon, box

Point = Tuple[float, float]

_AXIS_EPS = 1e-9


def wrap_angle(angle: float) -> float:
    """將角度正規化至 (-π, π]"""
    wrapped = math.fmod(angle + math.pi, 2 * math.pi)
    if wrapped <= 0:
        wrapped += 2 * math.pi
    return wrapped - math.pi


def normalize_yaw(yaw: float) -> float:
    """將 yaw 正規化至 [0, 2π)"""
    value = math.fmod(yaw, 2 * math.pi)
    if value < 0:
        value += 2 * math.pi
    if value >= 2 * math.pi - 1e-12:
        value = 0.0
    return value


def facing_vector(yaw: float) -> Point:
    return (-math.sin(yaw), math.cos(yaw))


def to_local(px: float, py: float, cx: float, cy: float, yaw: float) -> Point:
    """
    將世界座標轉為參考物件的局部座標

    Returns:
        (u, v): u 為寬度方向 (右為正)，v 為朝向方向 (前為正)
    """
    dx, dy = px - cx, py - cy
    c, s = math.cos(yaw), math.sin(yaw)
    return (dx * c + dy * s, -dx * s + dy * c)


def to_world(u: float, v: float, cx: float, cy: float, yaw: float) -> Point:
    c, s = math.cos(yaw), math.sin(yaw)
    return (cx + u * c - v * s, cy + u * s + v * c)


def is_axis_aligned(yaw: float) -> bool:
    """yaw 是否為 π/2 的整數倍"""
    quarter = yaw / (math.pi / 2)
    return abs(quarter - round(quarter)) < _AXIS_EPS


def half_extents(w: float, d: float, yaw: float) -> Point:
    """旋轉後外接矩形的半寬與半深"""
    c, s = abs(math.cos(yaw)), abs(math.sin(yaw))
    if is_axis_aligned(yaw):
        # 避免 cos(π/2) 的浮點殘差
        quarter = int(round(yaw / (math.pi / 2))) % 2
        return (w / 2, d / 2) if quarter == 0 else (d / 2, w / 2)
    return ((w * c + d * s) / 2, (w * s + d * c) / 2)


def footprint_corners(x: float, y: float, w: float, d: float, yaw: float) -> List[Point]:
    """家具底面四個角點 (逆時針)"""
    hw, hd = w / 2, d / 2
    local = [(-hw, -hd), (hw, -hd), (hw, hd), (-hw, hd)]
    if is_axis_aligned(yaw):
        ex, ey = half_extents(w, d, yaw)
        return [(x - ex, y - ey), (x + ex, y - ey), (x + ex, y + ey), (x - ex, y + ey)]
    return [to_world(u, v, x, y, yaw) for u, v in local]


def footprint_polygon(x: float, y: float, w: float, d: float, yaw: float) -> Polygon:
    return Polygon(footprint_corners(x, y, w, d, yaw))


def room_polygon(width: float, depth: float) -> Polygon:
    return box(0.0, 0.0, width, depth)


# 分離軸測試

def _edges(vertices: Sequence[Point]) -> List[Point]:
    n = len(vertices)
    return [
        (vertices[(i + 1) % n][0] - vertices[i][0], vertices[(i + 1) % n][1] - vertices[i][1])
        for i in range(n)
    ]


def _normal(edge: Point) -> Point:
    length = math.hypot(edge[0], edge[1])
    return (edge[1] / length, -edge[0] / length)


def _project(vertices: Sequence[Point], axis: Point) -> Tuple[float, float]:
    dots = [v[0] * axis[0] + v[1] * axis[1] for v in vertices]
    return min(dots), max(dots)


def separating_axes(a: Sequence[Point], b: Sequence[Point]) -> List[Point]:
    """兩個凸多邊形所有邊的法向量"""
    return [_normal(e) for e in _edges(a) + _edges(b)]


def penetration_vectors(a: Sequence[Point], b: Sequence[Point]) -> List[Tuple[Point, float]]:
    """
    將 b 推離 a 的候選位移，依穿透深度由小到大排序

    Returns:
        [(單位方向, 深度)]，第一個即最小穿透軸
    """
    ca = (sum(p[0] for p in a) / len(a), sum(p[1] for p in a) / len(a))
    cb = (sum(p[0] for p in b) / len(b), sum(p[1] for p in b) / len(b))
    results: List[Tuple[Point, float]] = []
    seen: List[Point] = []
    for axis in separating_axes(a, b):
        # 平行軸只保留一個
        if any(abs(axis[0] * s[1] - axis[1] * s[0]) < 1e-9 for s in seen):
            continue
        seen.append(axis)
        min_a, max_a = _project(a, axis)
        min_b, max_b = _project(b, axis)
        forward = max_a - min_b    # 沿 +axis 推動 b 所需距離
        backward = max_b - min_a   # 沿 -axis 推動 b 所需距離
        if forward <= 0 or backward <= 0:
            return []
        direction = (cb[0] - ca[0]) * axis[0] + (cb[1] - ca[1]) * axis[1]
        if direction >= 0:
            results.append((axis, forward))
            results.append(((-axis[0], -axis[1]), backward))
        else:
            results.append(((-axis[0], -axis[1]), backward))
            results.append((axis, forward))
    results.sort(key=lambda item: item[1])
    return results


def intersection_area(a: Polygon, b: Polygon) -> float:
    if not a.intersects(b):
        return 0.0
    return float(a.intersection(b).area)


def outside_area(poly: Polygon, width: float, depth: float) -> float:
    """多邊形落在房間外的面積"""
    inside = poly.intersection(room_polygon(width, depth)).area
    return max(0.0, float(poly.area - inside))


def outside_distance(corners: Iterable[Point], width: float, depth: float) -> float:
    """角點超出房間的最大距離 (0 表示完全在房間內)"""
    worst = 0.0
    for px, py in corners:
        worst = max(worst, -px, px - width, -py, py - depth)
    return worst


def z_overlap(z1: float, h1: float, z2: float, h2: float) -> bool:
    """兩個垂直區間是否有正長度的重疊"""
    return min(z1 + h1, z2 + h2) - max(z1, z2) > 1e-9


def grid_axis(lo: float, hi: float, step: float) -> np.ndarray:
    """
    [lo, hi) 區間上的格點；區間退化為單點時仍回傳 lo

    Returns:
        空陣列表示物件放不下
    """
    if hi < lo - 1e-9:
        return np.empty(0)
    count = max(1, int(math.ceil((hi - lo) / step - 1e-9)))
    return lo + step * np.arange(count)


def aabb_overlap_areas(
    xs: np.ndarray,
    ys: np.ndarray,
    hx: np.ndarray,
    hy: np.ndarray,
    other: Tuple[float, float, float, float]
) -> np.ndarray:
    """批次計算軸對齊矩形與另一個軸對齊矩形 (minx, miny, maxx, maxy) 的交疊面積"""
    minx, miny, maxx, maxy = other
    ix = np.minimum(xs + hx, maxx) - np.maximum(xs - hx, minx)
    iy = np.minimum(ys + hy, maxy) - np.maximum(ys - hy, miny)
    return np.clip(ix, 0.0, None) * np.clip(iy, 0.0, None)
