import json
from pathlib import Path
from typing import Any, Callable, Dict, List

import pytest

from roomcraft.core.config import settings
from tests.factories import SceneFactory


# 固定回應的擷取服務（避免測試連線到外部服務）
class StubProvider:
    name = "stub"
    exclusive = False

    def __init__(self, replies: List[str]):
        self.replies = list(replies)
        self.calls: List[str] = []

    def complete(self, template, text, document, attachment=None) -> str:
        self.calls.append(template.name)
        if len(self.replies) > 1:
            return self.replies.pop(0)
        return self.replies[0]


@pytest.fixture(autouse=True)
def offline_settings(monkeypatch):
    """預設不使用 HTTP 擷取服務"""
    monkeypatch.setattr(settings, "LLM_URL", None)
    yield


@pytest.fixture
def factory():
    """測試資料工廠"""
    return SceneFactory


@pytest.fixture
def bedroom_spec() -> Dict[str, Any]:
    """臥室場景文件"""
    return SceneFactory.spec()


@pytest.fixture
def write_spec(tmp_path) -> Callable[..., Path]:
    """將場景文件寫入暫存目錄"""
    def _write(document: Dict[str, Any], name: str = "scene.json") -> Path:
        path = tmp_path / name
        path.write_text(json.dumps(document, ensure_ascii=False), encoding="utf-8")
        return path
    return _write


@pytest.fixture
def stub_provider() -> Callable[[List[str]], StubProvider]:
    return StubProvider
