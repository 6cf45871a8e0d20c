"""
場景擷取服務模組

提供文字 (與選用附件) 轉為場景組織的功能：
- 依固定順序執行四個提示詞範本
- 單調合併各範本回應
- 內建關鍵字規則的模擬服務與 chat-completion HTTP 服務
"""
import base64
import json
import mimetypes
import re
import threading
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, List, Optional, Protocol, Tuple, Union

import httpx

from roomcraft.core.config import settings
from roomcraft.core.exceptions import (
    ExtractionFailed,
    PreconditionViolation,
    ProviderUnavailable,
    RoomCraftException,
)
from roomcraft.schemas.extraction import PromptTemplate
from roomcraft.schemas.scene import SceneOrganization
from roomcraft.services.scene_service import scene_service
from roomcraft.utils.constants import ARCHITECTURAL_IDS, SCENE_SCHEMA, RoomType, WallId, wall_pseudo_id
from roomcraft.utils.data import furniture_catalog, prompt_templates
from roomcraft.utils.logging import get_logger

logger = get_logger(__name__)

TEMPLATE_ORDER = (
    "room_type_classification",
    "furniture_enumeration",
    "spatial_relationship_analysis",
    "constraint_formalization",
)
MAX_RETRIES = 2

Attachment = Optional[Union[str, Path]]


def load_templates() -> Dict[str, PromptTemplate]:
    """讀取內建提示詞範本"""
    templates = {entry["name"]: PromptTemplate(**entry) for entry in prompt_templates()}
    missing = [name for name in TEMPLATE_ORDER if name not in templates]
    if missing:
        raise PreconditionViolation(f"缺少提示詞範本: {missing}")
    return templates


def strip_code_fence(text: str) -> str:
    """去除 Markdown 程式碼區塊標記"""
    match = re.search(r"```(?:json)?\s*(.*?)```", text, re.DOTALL)
    return match.group(1).strip() if match else text.strip()


class ExtractionProvider(Protocol):
    """擷取服務介面: 回傳單一範本的 JSON 回應文字"""
    name: str
    exclusive: bool

    def complete(
        self,
        template: PromptTemplate,
        text: str,
        document: Dict[str, Any],
        attachment: Attachment = None
    ) -> str:
        ...


# ----------------------------------------------------------------------
# 模擬服務
# ----------------------------------------------------------------------

ROOM_KEYWORDS = [
    (RoomType.LIVING_ROOM, ("living room", "lounge", "family room")),
    (RoomType.BEDROOM, ("bedroom", "guest room")),
    (RoomType.BATHROOM, ("bathroom", "restroom", "washroom")),
    (RoomType.DINING_ROOM, ("dining room",)),
    (RoomType.KITCHEN, ("kitchen",)),
]

# 未提及房間類型時依家具推斷
ROOM_HINTS = [
    (RoomType.BEDROOM, {"bed", "wardrobe", "nightstand"}),
    (RoomType.BATHROOM, {"toilet", "shower", "bathtub", "vanity"}),
    (RoomType.KITCHEN, {"stove", "fridge", "counter"}),
    (RoomType.DINING_ROOM, {"dining_table"}),
]

SYNONYMS = {
    "couch": "sofa",
    "settee": "sofa",
    "television": "tv",
    "tv set": "tv",
    "night stand": "nightstand",
    "bedside table": "nightstand",
    "bookcase": "bookshelf",
    "closet": "wardrobe",
    "refrigerator": "fridge",
    "mug": "cup",
    "tub": "bathtub",
    "chandelier": "ceiling_light",
    "picture": "painting",
    "rug": "_skip",
}

NUMBER_WORDS = {
    "a": 1, "an": 1, "one": 1, "two": 2, "three": 3, "four": 4,
    "five": 5, "six": 6, "seven": 7, "eight": 8, "nine": 9, "ten": 10,
}
COLORS = (
    "red", "blue", "green", "yellow", "white", "black", "grey", "gray",
    "brown", "beige", "orange", "pink", "purple",
)
MATERIALS = {"wooden": "wood", "wood": "wood", "leather": "leather", "metal": "metal",
             "glass": "glass", "fabric": "fabric", "marble": "marble"}

# 兩件家具之間的關係片語，依序比對
PAIR_PATTERNS = [
    (r"back to back", "back_to_back"),
    (r"in front of", "in_front_of"),
    (r"\bleft of\b", "left_of"),
    (r"\bright of\b", "right_of"),
    (r"\bon top of\b|\bon\b|\bupon\b", "on_top_of"),
    (r"\bbehind\b", "behind"),
    (r"\bfacing\b|\bfaces\b|\bopposite\b", "face_to_face"),
    (r"\bnext to\b|\bbeside\b|\balongside\b", "side_by_side"),
    (r"\baligned with\b", "aligned_with"),
    (r"\bfar from\b", "far_from"),
    (r"\btouching\b", "touching"),
    (r"\bnear\b|\bclose to\b|\bby\b", "near"),
]
WALL_PATTERN = re.compile(
    r"\b(against|along|near|next to|by|away from)\s+the\s+(north|south|east|west)(?:ern)?\s+wall\b"
)
CORNER_PATTERN = re.compile(r"\bin\s+the\s+corner\b")
CEILING_PATTERN = re.compile(r"\b(?:on|from)\s+the\s+ceiling\b")
RANGE_PATTERN = re.compile(
    r"(\d+(?:\.\d+)?)\s*(?:to|\s)\s*(\d+(?:\.\d+)?)\s*(?:m|meters?|metres?)\b"
)
WITHIN_PATTERN = re.compile(r"\bwithin\s+(\d+(?:\.\d+)?)\s*(?:m|meters?|metres?)\b")
CLAUSE_SPLIT = re.compile(r"(?<!\d)\.(?!\d)|[;,:\n]|\band\b|\bwith\b|\bwhile\b")

_WALL_RELATION = {
    "against": "against_wall",
    "along": "against_wall",
    "near": "near_wall",
    "next to": "near_wall",
    "by": "near_wall",
    "away from": "away_from_wall",
}


@lru_cache(maxsize=1)
def _noun_pattern() -> Tuple[re.Pattern, Dict[str, str]]:
    phrases: Dict[str, str] = {}
    for category in furniture_catalog():
        if category.startswith("_"):
            continue
        phrases[category.replace("_", " ")] = category
    phrases.update(SYNONYMS)
    forms: Dict[str, str] = {}
    for phrase, category in phrases.items():
        forms[phrase] = category
        forms[phrase + "s"] = category
        forms[phrase + "es"] = category
    alternation = "|".join(re.escape(f) for f in sorted(forms, key=lambda f: (-len(f), f)))
    return re.compile(rf"\b({alternation})\b"), forms


class _Mention:
    __slots__ = ("start", "end", "category")

    def __init__(self, start: int, end: int, category: str):
        self.start, self.end, self.category = start, end, category


class MockExtractionProvider:
    """
    關鍵字規則的模擬擷取服務

    同一段文字永遠產生相同的回應；僅供測試與離線使用。
    """
    name = "mock"
    exclusive = False

    def complete(
        self,
        template: PromptTemplate,
        text: str,
        document: Dict[str, Any],
        attachment: Attachment = None
    ) -> str:
        analysis = self.analyze(text)
        if template.name == "room_type_classification":
            payload: Dict[str, Any] = {"room_type": analysis["room_type"]}
        elif template.name == "furniture_enumeration":
            payload = {"furniture": analysis["furniture"]}
        elif template.name == "spatial_relationship_analysis":
            payload = {"relations": analysis["relations"]}
        else:
            payload = {"schema": SCENE_SCHEMA, **analysis}
        return json.dumps(payload, ensure_ascii=False, sort_keys=True)

    def analyze(self, text: str) -> Dict[str, Any]:
        lowered = text.lower().replace("-", " ")
        pattern, forms = _noun_pattern()

        mentions: List[_Mention] = []
        furniture: Dict[str, Dict[str, Any]] = {}
        previous_end = 0
        for match in pattern.finditer(lowered):
            category = forms[match.group(1)]
            if category == "_skip":
                continue
            mentions.append(_Mention(match.start(), match.end(), category))
            entry = furniture.setdefault(category, {"id": category, "category": category, "count": 1})
            self._modifiers(lowered[previous_end:match.start()], entry)
            previous_end = match.end()

        relations = self._relations(lowered, mentions)
        supported = {r["subject"] for r in relations if r["relation"] == "on_top_of"}
        catalog = furniture_catalog()
        for category, entry in furniture.items():
            if category in supported:
                entry["mount"] = "on_top"
            elif catalog.get(category, {}).get("mount") == "on_top":
                entry["mount"] = "floor"

        constraints = []
        for entry in furniture.values():
            if entry["count"] > 1:
                constraints.append({"type": "count", "objects": [entry["category"]],
                                    "params": {"n": entry["count"]}})
            for key in ("color", "material"):
                if entry.get(key):
                    constraints.append({"type": key, "objects": [entry["id"]], "params": {key: entry[key]}})

        return {
            "room_type": self._room_type(lowered, set(furniture)).value,
            "furniture": list(furniture.values()),
            "relations": relations,
            "constraints": constraints,
        }

    def _room_type(self, lowered: str, categories: set) -> RoomType:
        for room_type, words in ROOM_KEYWORDS:
            if any(word in lowered for word in words):
                return room_type
        for room_type, hints in ROOM_HINTS:
            if categories & hints:
                return room_type
        return RoomType.LIVING_ROOM

    def _modifiers(self, before: str, entry: Dict[str, Any]):
        # 名詞前最多三個字
        words = re.findall(r"[a-z0-9]+", before)[-3:]
        for word in words:
            if word in NUMBER_WORDS or word.isdigit():
                count = NUMBER_WORDS.get(word) or int(word)
                entry["count"] = max(entry["count"], count)
            elif word in COLORS:
                entry.setdefault("color", "gray" if word == "grey" else word)
            elif word in MATERIALS:
                entry.setdefault("material", MATERIALS[word])

    def _relations(self, lowered: str, mentions: List[_Mention]) -> List[Dict[str, Any]]:
        relations: List[Dict[str, Any]] = []
        seen = set()
        last_pair: Optional[Tuple[str, str]] = None

        def add(subject: str, obj: str, relation: str, params: Optional[Dict[str, float]] = None):
            key = (subject, obj, relation)
            if subject == obj or key in seen:
                return
            if relation == "on_top_of" and any(
                r["subject"] == subject and r["relation"] == relation for r in relations
            ):
                return
            seen.add(key)
            relations.append({"subject": subject, "object": obj, "relation": relation, "params": params or {}})

        offset = 0
        for clause in CLAUSE_SPLIT.split(lowered):
            start = lowered.find(clause, offset)
            end = start + len(clause)
            offset = end
            local = [m for m in mentions if start <= m.start and m.end <= end]

            for match in WALL_PATTERN.finditer(clause):
                subject = self._subject_before(local, start + match.start())
                if subject is not None:
                    add(subject, wall_pseudo_id(WallId(match.group(2))), _WALL_RELATION[match.group(1)])
            for match in CORNER_PATTERN.finditer(clause):
                subject = self._subject_before(local, start + match.start())
                if subject is not None:
                    add(subject, "floor", "corner")
            for match in CEILING_PATTERN.finditer(clause):
                subject = self._subject_before(local, start + match.start())
                if subject is not None:
                    add(subject, "ceiling", "ceiling_mounted")

            for a, b in zip(local, local[1:]):
                between = lowered[a.end:b.start]
                for regex, relation in PAIR_PATTERNS:
                    if re.search(regex, between):
                        add(a.category, b.category, relation)
                        last_pair = (a.category, b.category)
                        break

            pair = (local[0].category, local[1].category) if len(local) >= 2 else last_pair
            if pair is None:
                continue
            for match in RANGE_PATTERN.finditer(clause):
                lo, hi = sorted((float(match.group(1)), float(match.group(2))))
                add(pair[0], pair[1], "distance_range", {"min": lo, "max": hi})
            for match in WITHIN_PATTERN.finditer(clause):
                add(pair[0], pair[1], "distance_range", {"min": 0.0, "max": float(match.group(1))})
        return relations

    def _subject_before(self, mentions: List[_Mention], position: int) -> Optional[str]:
        before = [m for m in mentions if m.end <= position]
        if before:
            return before[-1].category
        return mentions[0].category if mentions else None


# ----------------------------------------------------------------------
# HTTP 服務
# ----------------------------------------------------------------------

class ChatCompletionProvider:
    """OpenAI 相容的 chat-completion HTTP 擷取服務"""
    name = "chat_completion"
    exclusive = False

    def __init__(
        self,
        url: Optional[str] = None,
        api_key: Optional[str] = None,
        model: Optional[str] = None,
        timeout: Optional[float] = None
    ):
        self.url = url or settings.LLM_URL
        self.api_key = api_key or settings.LLM_KEY
        self.model = model or settings.LLM_MODEL
        self.timeout = timeout or settings.LLM_TIMEOUT
        if not self.url:
            raise ProviderUnavailable("未設定 ROOMCRAFT_LLM_URL")

    def _attachment_part(self, attachment: Union[str, Path]) -> Dict[str, Any]:
        path = Path(attachment)
        try:
            data = path.read_bytes()
        except OSError as e:
            raise PreconditionViolation(f"無法讀取附件: {path}", details={"error": str(e)})
        media_type = mimetypes.guess_type(path.name)[0] or "application/octet-stream"
        encoded = base64.b64encode(data).decode("ascii")
        return {"type": "image_url", "image_url": {"url": f"data:{media_type};base64,{encoded}"}}

    def complete(
        self,
        template: PromptTemplate,
        text: str,
        document: Dict[str, Any],
        attachment: Attachment = None
    ) -> str:
        prompt = template.render(text)
        if document:
            prompt += "\n\nCurrent scene document:\n" + json.dumps(document, ensure_ascii=False, sort_keys=True)
        content: List[Dict[str, Any]] = [{"type": "text", "text": prompt}]
        if attachment is not None:
            content.append(self._attachment_part(attachment))

        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        body = {
            "model": self.model,
            "temperature": 0,
            "messages": [
                {"role": "system", "content": "You reply with JSON only."},
                {"role": "user", "content": content},
            ],
        }

        try:
            with httpx.Client(timeout=self.timeout) as client:
                response = client.post(self.url, json=body, headers=headers)
        except httpx.HTTPError as e:
            raise ProviderUnavailable(f"擷取服務連線失敗: {e}")

        if response.status_code != 200:
            raise ProviderUnavailable(
                f"擷取服務回應 HTTP {response.status_code}",
                details={"status_code": response.status_code}
            )
        try:
            reply = response.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError):
            # 格式錯誤交由重試處理
            return response.text
        return strip_code_fence(reply or "")


def get_default_provider() -> ExtractionProvider:
    """設定 ROOMCRAFT_LLM_URL 時使用 HTTP 服務，否則使用模擬服務"""
    if settings.LLM_ENABLED:
        return ChatCompletionProvider()
    return MockExtractionProvider()


# ----------------------------------------------------------------------
# 擷取流程
# ----------------------------------------------------------------------

class ExtractionService:
    """場景擷取服務類別"""

    def __init__(self):
        self.templates = load_templates()
        self._lock = threading.Lock()

    def extract(
        self,
        provider: Optional[ExtractionProvider],
        text: str,
        attachment: Attachment = None
    ) -> SceneOrganization:
        """
        擷取場景組織 O = P(I, P_I)

        Args:
            provider: 擷取服務，None 時使用 get_default_provider()
            text: 房間描述文字
            attachment: 選用的圖片或草圖，原樣轉交擷取服務

        Returns:
            驗證過的 SceneOrganization

        Raises:
            PreconditionViolation: 輸入為空
            ExtractionFailed: 回應無法解析或合併結果未通過驗證
            ProviderUnavailable: 傳輸失敗
        """
        if not text or not text.strip():
            raise PreconditionViolation("輸入文字不可為空")
        provider = provider or get_default_provider()

        document: Dict[str, Any] = {"schema": SCENE_SCHEMA}
        for name in TEMPLATE_ORDER:
            response = self._ask(provider, self.templates[name], text, document, attachment)
            self.merge(document, response)
            logger.debug(f"範本 {name} 合併完成")

        try:
            org = scene_service.parse_scene_spec(json.dumps(document, ensure_ascii=False))
        except RoomCraftException as e:
            raise ExtractionFailed(f"擷取結果未通過驗證: {e.message}", details={"document": document})
        logger.info(
            f"擷取完成 ({getattr(provider, 'name', type(provider).__name__)}): "
            f"{org.room_type.value}, {len(org.furniture)} 件家具, {len(org.relations)} 個關係"
        )
        return org

    def _ask(
        self,
        provider: ExtractionProvider,
        template: PromptTemplate,
        text: str,
        document: Dict[str, Any],
        attachment: Attachment
    ) -> Dict[str, Any]:
        last_error = ""
        for attempt in range(MAX_RETRIES + 1):
            if getattr(provider, "exclusive", False):
                with self._lock:
                    raw = provider.complete(template, text, dict(document), attachment)
            else:
                raw = provider.complete(template, text, dict(document), attachment)
            try:
                parsed = json.loads(strip_code_fence(raw))
            except (json.JSONDecodeError, TypeError) as e:
                last_error = str(e)
            else:
                if isinstance(parsed, dict):
                    return parsed
                last_error = "回應不是 JSON 物件"
            logger.warning(f"範本 {template.name} 第 {attempt + 1} 次回應無法解析: {last_error}")
        raise ExtractionFailed(
            f"範本 {template.name} 回應無法解析",
            details={"template": template.name, "error": last_error}
        )

    def merge(self, document: Dict[str, Any], response: Dict[str, Any]) -> Dict[str, Any]:
        """
        單調合併: 後續回應只能新增內容，不能刪除或改寫先前結果；
        參照未知家具的關係與約束會被捨棄並記錄警告。
        """
        if "room_type" not in document and isinstance(response.get("room_type"), str):
            document["room_type"] = response["room_type"]
        elif response.get("room_type") not in (None, document.get("room_type")):
            logger.warning(f"忽略不一致的房間類型: {response['room_type']}")

        furniture = document.setdefault("furniture", [])
        ids = {entry["id"] for entry in furniture}
        for entry in response.get("furniture") or []:
            if isinstance(entry, dict) and isinstance(entry.get("id"), str) and entry["id"] not in ids:
                furniture.append(entry)
                ids.add(entry["id"])

        known = ids | set(ARCHITECTURAL_IDS)
        relations = document.setdefault("relations", [])
        seen = {(r["subject"], r["object"], r["relation"]) for r in relations}
        for entry in response.get("relations") or []:
            if not isinstance(entry, dict):
                continue
            key = (entry.get("subject"), entry.get("object"), entry.get("relation"))
            if key in seen:
                continue
            if entry.get("subject") not in known or entry.get("object") not in known:
                logger.warning(f"捨棄參照未知家具的關係: {key}")
                continue
            relations.append(entry)
            seen.add(key)

        categories = {entry.get("category") for entry in furniture}
        constraints = document.setdefault("constraints", [])
        for entry in response.get("constraints") or []:
            if not isinstance(entry, dict) or entry in constraints:
                continue
            objects = entry.get("objects") or []
            pool = categories if entry.get("type") == "count" else known
            if any(ref not in pool for ref in objects):
                logger.warning(f"捨棄參照未知家具的約束: {entry.get('type')} {objects}")
                continue
            constraints.append(entry)
        return document


extraction_service = ExtractionService()
