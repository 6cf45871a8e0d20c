"""
俯視 SVG 繪製服務

座標換算: 每公尺 100 px，原點在左上角，y 軸向下。
"""
from pathlib import Path
from typing import Iterable, List, Tuple, Union

import svgwrite

from roomcraft.schemas.layout import Layout, PlacedItem
from roomcraft.schemas.scene import Room
from roomcraft.utils.constants import Mount, WallId
from roomcraft.utils.geometry import facing_vector
from roomcraft.utils.logging import get_logger

logger = get_logger(__name__)

PX_PER_METER = 100
MARGIN_PX = 20
FONT_FAMILY = "Arial"

_MOUNT_FILL = {
    Mount.FLOOR: "#f2e3c6",
    Mount.WALL: "#cfe3f2",
    Mount.CEILING: "#e8e8e8",
    Mount.ON_TOP: "#f7c9b8",
}


def _fmt(value: float) -> float:
    # 固定小數位，確保相同佈局輸出相同位元組
    return round(value, 2) + 0.0


class RenderService:
    """SVG 繪製服務類別"""

    def __init__(self, scale: float = PX_PER_METER, margin: float = MARGIN_PX):
        self.scale = scale
        self.margin = margin

    def to_px(self, room: Room, x: float, y: float) -> Tuple[float, float]:
        """房間座標 (公尺，y 向北) 轉為 SVG 座標"""
        return (_fmt(self.margin + x * self.scale), _fmt(self.margin + (room.depth - y) * self.scale))

    def _points(self, room: Room, points: Iterable[Tuple[float, float]]) -> List[Tuple[float, float]]:
        return [self.to_px(room, x, y) for x, y in points]

    def _opening(self, room: Room, wall: WallId, offset: float, width: float) -> Tuple[Tuple[float, float], ...]:
        if wall == WallId.NORTH:
            ends = ((offset, room.depth), (offset + width, room.depth))
        elif wall == WallId.SOUTH:
            ends = ((offset, 0.0), (offset + width, 0.0))
        elif wall == WallId.EAST:
            ends = ((room.width, offset), (room.width, offset + width))
        else:
            ends = ((0.0, offset), (0.0, offset + width))
        return tuple(self.to_px(room, x, y) for x, y in ends)

    def render_layout(self, layout: Layout) -> str:
        """
        繪製佈局俯視圖

        Returns:
            SVG 文字；相同佈局輸出相同位元組
        """
        room = layout.room
        size = (
            _fmt(room.width * self.scale + 2 * self.margin),
            _fmt(room.depth * self.scale + 2 * self.margin),
        )
        dwg = svgwrite.Drawing(size=size, profile="tiny", debug=False)
        dwg.add(dwg.rect(insert=(0, 0), size=size, fill="white"))

        # 房間外框
        dwg.add(dwg.rect(
            insert=(self.margin, self.margin),
            size=(_fmt(room.width * self.scale), _fmt(room.depth * self.scale)),
            fill="#fafafa",
            stroke="black",
            stroke_width=3,
        ))
        for door in room.doors:
            start, end = self._opening(room, door.wall, door.offset, door.width)
            dwg.add(dwg.line(start=start, end=end, stroke="#8b5a2b", stroke_width=7))
        for window in room.windows:
            start, end = self._opening(room, window.wall, window.offset, window.width)
            dwg.add(dwg.line(start=start, end=end, stroke="#4a90d9", stroke_width=5))

        # 支撐物先畫，上方物件疊在其上
        for item in sorted(layout.items, key=lambda i: (i.z, layout.index_of(i.id))):
            self._draw_item(dwg, room, item)

        return dwg.tostring()

    def _draw_item(self, dwg: svgwrite.Drawing, room: Room, item: PlacedItem):
        dwg.add(dwg.polygon(
            points=self._points(room, item.corners()),
            fill=_MOUNT_FILL.get(item.mount, "#dddddd"),
            stroke="#333333",
            stroke_width=1.5,
        ))

        # 朝向箭頭: 從中心到前緣
        fx, fy = facing_vector(item.yaw)
        reach = item.d / 2
        tip = (item.x + fx * reach, item.y + fy * reach)
        head = min(item.w, item.d) * 0.2
        lx, ly = -fy, fx
        base = (tip[0] - fx * head, tip[1] - fy * head)
        dwg.add(dwg.line(
            start=self.to_px(room, item.x, item.y),
            end=self.to_px(room, *tip),
            stroke="#c0392b",
            stroke_width=1.5,
        ))
        dwg.add(dwg.polygon(
            points=self._points(room, [
                tip,
                (base[0] + lx * head / 2, base[1] + ly * head / 2),
                (base[0] - lx * head / 2, base[1] - ly * head / 2),
            ]),
            fill="#c0392b",
        ))

        cx, cy = self.to_px(room, item.x, item.y)
        dwg.add(dwg.text(
            item.id,
            insert=(cx, _fmt(cy - 4)),
            font_size=11,
            font_family=FONT_FAMILY,
            text_anchor="middle",
        ))

    def save_svg(self, layout: Layout, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.write_text(self.render_layout(layout), encoding="utf-8")
        logger.info(f"已輸出 SVG: {path}")
        return path


render_service = RenderService()
