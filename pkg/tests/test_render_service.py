"""
SVG 繪製服務的單元測試
"""
from roomcraft.schemas.scene import Door, Room, Window
from roomcraft.services.render_service import RenderService
from roomcraft.utils.constants import WallId
from tests.factories import SceneFactory


class TestRenderService:
    """SVG 繪製測試類別"""

    def setup_method(self):
        """測試前設置"""
        self.service = RenderService()
        self.room = Room(
            width=5.0,
            depth=4.0,
            doors=(Door(wall=WallId.SOUTH, offset=1.0, width=0.9),),
            windows=(Window(wall=WallId.NORTH, offset=2.0, width=1.5),),
        )
        self.layout = SceneFactory.layout([
            SceneFactory.placed("bed", 2.5, 3.0, w=1.6, d=2.0),
            SceneFactory.placed("nightstand", 1.2, 3.7, w=0.5, d=0.4),
        ], room=self.room)

    def test_to_px(self):
        """測試座標換算 (y 軸翻轉)"""
        assert self.service.to_px(self.room, 0.0, 0.0) == (20.0, 420.0)
        assert self.service.to_px(self.room, 5.0, 4.0) == (520.0, 20.0)
        assert self.service.to_px(self.room, 2.5, 1.0) == (270.0, 320.0)

    def test_render_contents(self):
        """測試輸出包含房間、門窗與家具標籤"""
        svg = self.service.render_layout(self.layout)

        assert svg.startswith("<svg")
        assert "#8b5a2b" in svg
        assert "#4a90d9" in svg
        assert ">bed<" in svg
        assert ">nightstand<" in svg

    def test_deterministic(self):
        """測試相同佈局輸出相同內容"""
        assert self.service.render_layout(self.layout) == RenderService().render_layout(self.layout)

    def test_empty_layout(self):
        """測試空佈局仍輸出房間"""
        svg = self.service.render_layout(SceneFactory.layout([], room=self.room))

        assert "<polygon" not in svg
        assert "<rect" in svg

    def test_save_svg(self, tmp_path):
        """測試寫入檔案"""
        path = self.service.save_svg(self.layout, tmp_path / "bedroom.svg")

        assert path.exists()
        assert path.read_text(encoding="utf-8") == self.service.render_layout(self.layout)
