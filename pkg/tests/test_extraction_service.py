"""
場景擷取服務的單元測試
"""
from unittest.mock import Mock, patch

import httpx
import pytest

from roomcraft.core.config import settings
from roomcraft.core.exceptions import ExtractionFailed, PreconditionViolation, ProviderUnavailable
from roomcraft.services.extraction_service import (
    MAX_RETRIES,
    TEMPLATE_ORDER,
    ChatCompletionProvider,
    ExtractionService,
    MockExtractionProvider,
    get_default_provider,
    load_templates,
    strip_code_fence,
)
from roomcraft.utils.constants import SCENE_SCHEMA, RelationKind, RoomType


def _chat_response(content: str, status_code: int = 200) -> Mock:
    response = Mock(status_code=status_code, text=content)
    response.json.return_value = {"choices": [{"message": {"content": content}}]}
    return response


class TestMockExtraction:
    """模擬擷取服務測試類別"""

    def setup_method(self):
        """測試前設置"""
        self.service = ExtractionService()
        self.provider = MockExtractionProvider()

    def test_bed_against_wall(self):
        """測試臥室中靠北牆的床"""
        org = self.service.extract(self.provider, "a bedroom with a bed against the north wall")

        assert org.room_type == RoomType.BEDROOM
        assert org.item_ids == ("bed",)
        assert len(org.relations) == 1
        relation = org.relations[0]
        assert (relation.subject, relation.object, relation.relation) == (
            "bed", "wall:north", RelationKind.AGAINST_WALL,
        )

    def test_facing_with_distance(self):
        """測試面對面與距離範圍"""
        org = self.service.extract(self.provider, "living room: sofa facing tv, 2 to 3.5 meters apart")

        assert org.room_type == RoomType.LIVING_ROOM
        assert set(org.item_ids) == {"sofa", "tv"}
        kinds = [(r.subject, r.object, r.relation) for r in org.relations]
        assert ("sofa", "tv", RelationKind.FACE_TO_FACE) in kinds
        distance = next(r for r in org.relations if r.relation == RelationKind.DISTANCE_RANGE)
        assert (distance.subject, distance.object) == ("sofa", "tv")
        assert distance.params == {"min": 2.0, "max": 3.5}

    def test_counts_and_colors(self):
        """測試數量與顏色修飾詞"""
        org = self.service.extract(self.provider, "a kitchen with four chairs and a red table")

        chair = org.item("chair")
        assert chair is not None and chair.count == 4
        assert org.item("table").color == "red"
        assert {c.ctype.value for c in org.constraints} == {"count", "color"}

    def test_default_provider_is_mock(self):
        """測試默認擷取服務為模擬服務"""
        org = self.service.extract(None, "a bedroom with a bed against the north wall")

        assert org.room_type == RoomType.BEDROOM

    def test_deterministic(self):
        """測試相同輸入產生相同結果"""
        text = "a living room with a sofa facing a tv and a plant in the corner"

        assert self.service.extract(self.provider, text) == self.service.extract(self.provider, text)

    def test_empty_text(self):
        """測試空白輸入"""
        with pytest.raises(PreconditionViolation):
            self.service.extract(self.provider, "   ")


class TestRetries:
    """回應解析重試測試類別"""

    def setup_method(self):
        """測試前設置"""
        self.service = ExtractionService()

    def test_retry_then_success(self, stub_provider):
        """測試第一次回應無法解析後重試成功"""
        provider = stub_provider([
            "not json",
            '{"room_type": "bedroom"}',
            '{"furniture": [{"id": "bed", "category": "bed"}]}',
            '{"relations": []}',
            '{"constraints": []}',
        ])

        org = self.service.extract(provider, "a bed")

        assert org.room_type == RoomType.BEDROOM
        assert org.item_ids == ("bed",)
        assert provider.calls == [
            "room_type_classification",
            "room_type_classification",
            "furniture_enumeration",
            "spatial_relationship_analysis",
            "constraint_formalization",
        ]

    def test_code_fence_reply(self, stub_provider):
        """測試程式碼區塊包住的回應"""
        provider = stub_provider(['```json\n{"room_type": "bathroom", "furniture": [{"id": "toilet", "category": "toilet"}]}\n```'])

        org = self.service.extract(provider, "a toilet")

        assert org.room_type == RoomType.BATHROOM

    def test_retries_exhausted(self, stub_provider):
        """測試重試用盡"""
        provider = stub_provider(["[1, 2, 3]"])

        with pytest.raises(ExtractionFailed) as exc_info:
            self.service.extract(provider, "a bed")

        assert exc_info.value.details["template"] == "room_type_classification"
        assert provider.calls == ["room_type_classification"] * (MAX_RETRIES + 1)

    def test_invalid_document(self, stub_provider):
        """測試合併結果未通過驗證"""
        provider = stub_provider(['{"room_type": "spaceship", "furniture": [{"id": "bed", "category": "bed"}]}'])

        with pytest.raises(ExtractionFailed) as exc_info:
            self.service.extract(provider, "a bed on a spaceship")

        assert exc_info.value.error_code == "EXTRACTION_FAILED"
        assert exc_info.value.details["document"]["room_type"] == "spaceship"


class TestMerge:
    """單調合併測試類別"""

    def setup_method(self):
        """測試前設置"""
        self.service = ExtractionService()
        self.document = {
            "room_type": "bedroom",
            "furniture": [{"id": "bed", "category": "bed"}],
            "relations": [],
            "constraints": [],
        }

    def test_room_type_not_overwritten(self):
        """測試房間類型不會被後續回應改寫"""
        self.service.merge(self.document, {"room_type": "kitchen"})

        assert self.document["room_type"] == "bedroom"

    def test_furniture_appended_once(self):
        """測試家具只新增不重複"""
        self.service.merge(self.document, {"furniture": [
            {"id": "bed", "category": "sofa"},
            {"id": "lamp", "category": "lamp"},
        ]})

        assert self.document["furniture"] == [
            {"id": "bed", "category": "bed"},
            {"id": "lamp", "category": "lamp"},
        ]

    def test_unknown_references_dropped(self):
        """測試參照未知家具的關係與約束被捨棄"""
        self.service.merge(self.document, {
            "relations": [
                {"subject": "bed", "object": "wall:north", "relation": "against_wall"},
                {"subject": "piano", "object": "bed", "relation": "near"},
            ],
            "constraints": [
                {"type": "color", "objects": ["piano"], "params": {"color": "black"}},
                {"type": "count", "objects": ["bed"], "params": {"n": 1}},
            ],
        })

        assert [r["subject"] for r in self.document["relations"]] == ["bed"]
        assert [c["type"] for c in self.document["constraints"]] == ["count"]


class TestChatCompletionProvider:
    """HTTP 擷取服務測試類別"""

    def setup_method(self):
        """測試前設置"""
        self.template = load_templates()["room_type_classification"]

    def test_requires_url(self):
        """測試未設定 URL"""
        with pytest.raises(ProviderUnavailable):
            ChatCompletionProvider()

    @patch("httpx.Client.post")
    def test_complete(self, mock_post):
        """測試請求內容與回應解析"""
        mock_post.return_value = _chat_response('```json\n{"room_type": "bedroom"}\n```')
        provider = ChatCompletionProvider(url="http://llm.test/v1/chat", api_key="k", model="test-model")

        reply = provider.complete(self.template, "a bed", {"schema": SCENE_SCHEMA})

        assert reply == '{"room_type": "bedroom"}'
        args, kwargs = mock_post.call_args
        assert args[0] == "http://llm.test/v1/chat"
        assert kwargs["json"]["model"] == "test-model"
        assert kwargs["json"]["temperature"] == 0
        assert kwargs["headers"]["Authorization"] == "Bearer k"
        prompt = kwargs["json"]["messages"][1]["content"][0]["text"]
        assert "a bed" in prompt
        assert SCENE_SCHEMA in prompt

    @patch("httpx.Client.post")
    def test_attachment(self, mock_post, tmp_path):
        """測試附件以 data URI 傳送"""
        mock_post.return_value = _chat_response('{"room_type": "bedroom"}')
        sketch = tmp_path / "sketch.png"
        sketch.write_bytes(b"\x89PNG\r\n\x1a\n")
        provider = ChatCompletionProvider(url="http://llm.test/v1/chat")

        provider.complete(self.template, "a bed", {}, attachment=sketch)

        parts = mock_post.call_args.kwargs["json"]["messages"][1]["content"]
        assert parts[1]["type"] == "image_url"
        assert parts[1]["image_url"]["url"].startswith("data:image/png;base64,")

    def test_missing_attachment(self, tmp_path):
        """測試附件不存在"""
        provider = ChatCompletionProvider(url="http://llm.test/v1/chat")

        with pytest.raises(PreconditionViolation):
            provider.complete(self.template, "a bed", {}, attachment=tmp_path / "missing.png")

    @patch("httpx.Client.post")
    def test_connection_error(self, mock_post):
        """測試連線失敗"""
        mock_post.side_effect = httpx.ConnectError("connection refused")
        provider = ChatCompletionProvider(url="http://llm.test/v1/chat")

        with pytest.raises(ProviderUnavailable):
            provider.complete(self.template, "a bed", {})

    @patch("httpx.Client.post")
    def test_http_error_status(self, mock_post):
        """測試非 200 狀態碼"""
        mock_post.return_value = _chat_response("", status_code=503)
        provider = ChatCompletionProvider(url="http://llm.test/v1/chat")

        with pytest.raises(ProviderUnavailable) as exc_info:
            provider.complete(self.template, "a bed", {})

        assert exc_info.value.details["status_code"] == 503

    @patch("httpx.Client.post")
    def test_malformed_body(self, mock_post):
        """測試回應格式錯誤時回傳原文交由重試處理"""
        response = Mock(status_code=200, text="oops")
        response.json.side_effect = ValueError("not json")
        mock_post.return_value = response
        provider = ChatCompletionProvider(url="http://llm.test/v1/chat")

        assert provider.complete(self.template, "a bed", {}) == "oops"

    @patch("httpx.Client.post")
    def test_extract_over_http(self, mock_post):
        """測試透過 HTTP 服務完成四個範本"""
        mock_post.side_effect = [
            _chat_response('{"room_type": "bedroom"}'),
            _chat_response('{"furniture": [{"id": "bed", "category": "bed"}, {"id": "lamp", "category": "lamp", "mount": "on_top"}, {"id": "nightstand", "category": "nightstand"}]}'),
            _chat_response('{"relations": [{"subject": "lamp", "object": "nightstand", "relation": "on_top_of"}]}'),
            _chat_response('{"constraints": []}'),
        ]
        provider = ChatCompletionProvider(url="http://llm.test/v1/chat")

        org = ExtractionService().extract(provider, "a bedroom with a lamp on the nightstand")

        assert mock_post.call_count == len(TEMPLATE_ORDER)
        assert org.item_ids == ("bed", "lamp", "nightstand")
        assert org.relations[0].relation == RelationKind.ON_TOP_OF


class TestHelpers:
    """輔助函式測試類別"""

    def test_strip_code_fence(self):
        """測試去除程式碼區塊標記"""
        assert strip_code_fence('```json\n{"a": 1}\n```') == '{"a": 1}'
        assert strip_code_fence('  {"a": 1}  ') == '{"a": 1}'

    def test_templates_loaded_in_order(self):
        """測試四個範本都存在且各含一個佔位符"""
        templates = load_templates()

        assert set(TEMPLATE_ORDER) <= set(templates)
        for name in TEMPLATE_ORDER:
            assert "a bed" in templates[name].render("a bed")

    def test_default_provider_switch(self, monkeypatch):
        """測試設定 URL 時使用 HTTP 服務"""
        assert isinstance(get_default_provider(), MockExtractionProvider)

        monkeypatch.setattr(settings, "LLM_URL", "http://llm.test/v1/chat")

        assert isinstance(get_default_provider(), ChatCompletionProvider)
