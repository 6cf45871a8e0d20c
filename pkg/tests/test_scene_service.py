"""
場景模型服務的單元測試
"""
import json
import random

import pytest

from roomcraft.core.exceptions import (
    DanglingReference,
    InvalidDimensions,
    MalformedDocument,
    SchemaViolation,
)
from roomcraft.schemas.scene import FurnitureItem, RelationEdge, SceneOrganization
from roomcraft.services.scene_service import SceneService, scene_service
from roomcraft.utils.constants import (
    IssueSeverity,
    Mount,
    RelationKind,
    RoomType,
    WallId,
)
from roomcraft.utils.data import furniture_catalog
from tests.factories import SceneFactory


class TestParseSceneSpec:
    """場景文件解析測試類別"""

    def setup_method(self):
        """測試前設置"""
        self.service = SceneService()

    def test_parse_bedroom(self):
        """測試解析兩件家具與一個關係的臥室"""
        document = SceneFactory.spec(
            furniture=[{"id": "bed", "category": "bed"}, {"id": "lamp", "category": "lamp"}],
            relations=[{"subject": "bed", "object": "wall:north", "relation": "against_wall"}],
        )
        # lamp 在目錄中為 on_top，但文件中沒有支撐關係，改為落地
        document["furniture"][1]["mount"] = "floor"

        org = self.service.parse_scene_spec(json.dumps(document))

        assert org.room_type == RoomType.BEDROOM
        assert len(org.furniture) == 2
        assert len(org.relations) == 1
        assert org.relations[0].relation == RelationKind.AGAINST_WALL

    def test_missing_size_filled_from_catalog(self):
        """測試缺少尺寸時使用家具目錄預設值"""
        org = self.service.parse_scene_spec(json.dumps(SceneFactory.spec()))

        bed = org.item("bed")
        assert (bed.w, bed.d, bed.h) == (2.0, 1.6, 0.5)
        assert org.item("lamp").mount == Mount.ON_TOP

    def test_dangling_reference(self):
        """測試關係參照未宣告的家具"""
        document = SceneFactory.spec()
        document["relations"].append({"subject": "lamp2", "object": "bed", "relation": "near"})

        with pytest.raises(DanglingReference) as exc_info:
            self.service.parse_scene_spec(json.dumps(document))

        assert exc_info.value.details["reference"] == "lamp2"
        assert exc_info.value.error_code == "DANGLING_REFERENCE"

    def test_distance_range_params_kept(self):
        """測試 distance_range 參數保留"""
        document = SceneFactory.spec(
            room_type="living_room",
            furniture=[{"id": "sofa", "category": "sofa"}, {"id": "tv", "category": "tv"}],
            relations=[{
                "subject": "sofa", "object": "tv", "relation": "distance_range",
                "params": {"min": 2.0, "max": 3.5},
            }],
        )

        org = self.service.parse_scene_spec(json.dumps(document))

        assert org.relations[0].params == {"min": 2.0, "max": 3.5}

    def test_inverted_distance_range(self):
        """測試 distance_range 的 min 大於 max"""
        document = SceneFactory.spec(
            furniture=[{"id": "sofa", "category": "sofa"}, {"id": "tv", "category": "tv"}],
            relations=[{
                "subject": "sofa", "object": "tv", "relation": "distance_range",
                "params": {"min": 3.0, "max": 1.0},
            }],
        )

        with pytest.raises(SchemaViolation):
            self.service.parse_scene_spec(json.dumps(document))

    @pytest.mark.parametrize("relation", ["distance_range", "near"])
    @pytest.mark.parametrize("params", [[2.0, 3.5], "2 to 3.5", 3])
    def test_relation_params_not_object(self, relation, params):
        """測試關係參數不是物件"""
        document = SceneFactory.spec(
            furniture=[{"id": "sofa", "category": "sofa"}, {"id": "tv", "category": "tv"}],
            relations=[{"subject": "sofa", "object": "tv", "relation": relation, "params": params}],
        )

        with pytest.raises(SchemaViolation) as exc_info:
            self.service.parse_scene_spec(json.dumps(document))

        assert exc_info.value.details["field"] == "relations[0].params"

    def test_malformed_json(self):
        """測試語法錯誤的文件"""
        with pytest.raises(MalformedDocument):
            self.service.parse_scene_spec('{"schema": "roomcraft/1", ')

    def test_top_level_not_object(self):
        """測試頂層不是物件"""
        with pytest.raises(MalformedDocument):
            self.service.parse_scene_spec("[1, 2, 3]")

    def test_missing_schema(self):
        """測試缺少 schema 欄位"""
        document = SceneFactory.spec()
        del document["schema"]

        with pytest.raises(SchemaViolation) as exc_info:
            self.service.parse_scene_spec(json.dumps(document))

        assert exc_info.value.details["field"] == "schema"

    def test_unsupported_schema_version(self):
        """測試不支援的文件版本"""
        with pytest.raises(SchemaViolation):
            self.service.parse_scene_spec(json.dumps(SceneFactory.spec(schema="roomcraft/99")))

    def test_unknown_relation_kind(self):
        """測試未知的關係類型"""
        document = SceneFactory.spec()
        document["relations"][0]["relation"] = "levitating_above"

        with pytest.raises(SchemaViolation):
            self.service.parse_scene_spec(json.dumps(document))

    def test_unknown_room_type(self):
        """測試未知的房間類型"""
        with pytest.raises(SchemaViolation):
            self.service.parse_scene_spec(json.dumps(SceneFactory.spec(room_type="garage")))

    def test_duplicate_ids(self):
        """測試家具 ID 重複"""
        document = SceneFactory.spec()
        document["furniture"].append({"id": "bed", "category": "bed"})

        with pytest.raises(SchemaViolation):
            self.service.parse_scene_spec(json.dumps(document))

    def test_unknown_fields_are_warnings(self):
        """測試未知欄位只產生警告"""
        document = SceneFactory.spec(notes="hello")
        document["furniture"][0]["texture"] = "smooth"

        org = self.service.parse_scene_spec(json.dumps(document))

        assert len(org.warnings) == 2
        assert any("notes" in w for w in org.warnings)
        assert any("texture" in w for w in org.warnings)

    def test_on_top_without_support(self):
        """測試置頂家具沒有支撐關係"""
        document = SceneFactory.spec()
        document["relations"] = document["relations"][:2]

        with pytest.raises(SchemaViolation):
            self.service.parse_scene_spec(json.dumps(document))

    def test_room_dimensions_out_of_range(self):
        """測試房間尺寸超出範圍"""
        document = SceneFactory.spec(room={"width": 0.5, "depth": 4.0})

        with pytest.raises(InvalidDimensions):
            self.service.parse_scene_spec(json.dumps(document))

    def test_explicit_constraint_dangling(self):
        """測試明確約束參照不存在的家具"""
        document = SceneFactory.spec(constraints=[{"type": "color", "objects": ["sofa"], "params": {"color": "red"}}])

        with pytest.raises(DanglingReference):
            self.service.parse_scene_spec(json.dumps(document))


class TestSerializeSceneSpec:
    """場景文件序列化測試類別"""

    def setup_method(self):
        """測試前設置"""
        self.service = SceneService()
        self.categories = sorted(c for c in furniture_catalog() if not c.startswith("_"))

    def _random_org(self, rng: random.Random) -> SceneOrganization:
        n = rng.randint(1, 6)
        furniture = []
        for i in range(n):
            category = rng.choice(self.categories)
            furniture.append(FurnitureItem(
                id=f"{category}_{i}",
                category=category,
                count=rng.randint(1, 3),
                w=round(rng.uniform(0.2, 2.0), 3),
                d=round(rng.uniform(0.2, 2.0), 3),
                h=round(rng.uniform(0.2, 2.0), 3),
                yaw=rng.uniform(-7.0, 7.0),
                color=rng.choice([None, "red", "white"]),
                mount=rng.choice([Mount.FLOOR, Mount.WALL, Mount.CEILING]),
            ))
        ids = [item.id for item in furniture]
        relations = []
        for _ in range(rng.randint(0, 5)):
            subject = rng.choice(ids)
            obj = rng.choice([i for i in ids if i != subject] + ["wall:north", "wall:east"])
            kind = rng.choice([RelationKind.NEAR, RelationKind.AGAINST_WALL, RelationKind.DISTANCE_RANGE])
            params = {"min": 1.0, "max": 2.5} if kind == RelationKind.DISTANCE_RANGE else {}
            relations.append(RelationEdge(
                subject=subject, object=obj, relation=kind, params=params,
                weight=float(rng.randint(1, 4)),
            ))
        return SceneOrganization(
            room_type=rng.choice(list(RoomType)),
            furniture=tuple(furniture),
            relations=tuple(relations),
        )

    def test_round_trip_random_organizations(self):
        """測試隨機場景組織序列化後再解析不變"""
        rng = random.Random(20240611)
        for _ in range(50):
            org = self._random_org(rng)
            parsed = self.service.parse_scene_spec(self.service.serialize_scene_spec(org))
            assert parsed == org

    def test_round_trip_with_room_block(self):
        """測試含房間區塊的序列化"""
        document = SceneFactory.spec(room={
            "width": 6.0, "depth": 5.0,
            "doors": [{"wall": "east", "offset": 1.0, "width": 0.8}],
        })
        org = self.service.parse_scene_spec(json.dumps(document))

        parsed = self.service.parse_scene_spec(self.service.serialize_scene_spec(org))

        assert parsed == org
        assert parsed.room.doors[0].wall == WallId.EAST


class TestValidateOrganization:
    """場景驗證測試類別"""

    def setup_method(self):
        """測試前設置"""
        self.service = SceneService()

    def test_valid_bedroom(self):
        """測試合法的五件家具臥室"""
        org = SceneFactory.org(
            [
                SceneFactory.item("bed", w=2.0, d=1.6, h=0.5),
                SceneFactory.item("wardrobe", w=1.2, d=0.6, h=2.0),
                SceneFactory.item("nightstand", w=0.5, d=0.4, h=0.55),
                SceneFactory.on_top("lamp"),
                SceneFactory.item("desk", w=1.2, d=0.6, h=0.75),
            ],
            [
                SceneFactory.relation("bed", "wall:north", RelationKind.AGAINST_WALL),
                SceneFactory.relation("nightstand", "bed", RelationKind.NEAR),
                SceneFactory.relation("lamp", "nightstand", RelationKind.ON_TOP_OF),
            ],
        )

        assert self.service.validate_organization(org) == []

    def test_duplicate_id_reported_once(self):
        """測試重複 ID 只回報一次"""
        org = SceneFactory.org([SceneFactory.item("chair"), SceneFactory.item("chair")])

        issues = self.service.validate_organization(org)

        assert len(issues) == 1
        assert issues[0].code == "DUPLICATE_ID"
        assert issues[0].severity == IssueSeverity.ERROR

    def test_on_top_without_edge(self):
        """測試置頂家具缺少支撐關係"""
        org = SceneFactory.org([SceneFactory.item("table"), SceneFactory.on_top("cup")])

        issues = self.service.validate_organization(org)

        assert [i.code for i in issues] == ["SUPPORT_COUNT"]
        assert issues[0].item_id == "cup"

    def test_self_relation(self):
        """測試關係指向自己"""
        org = SceneFactory.org(
            [SceneFactory.item("chair")],
            [SceneFactory.relation("chair", "chair", RelationKind.NEAR)],
        )

        assert [i.code for i in self.service.validate_organization(org)] == ["SELF_RELATION"]

    def test_support_must_be_furniture(self):
        """測試支撐物不可為建築"""
        org = SceneFactory.org(
            [SceneFactory.on_top("cup")],
            [SceneFactory.relation("cup", "floor", RelationKind.ON_TOP_OF)],
        )

        assert "INVALID_SUPPORT" in [i.code for i in self.service.validate_organization(org)]


class TestBuildRoom:
    """房間建立測試類別"""

    def setup_method(self):
        """測試前設置"""
        self.service = scene_service

    def test_bedroom_defaults(self):
        """測試臥室預設尺寸與門窗"""
        room = self.service.build_room(RoomType.BEDROOM, (5.0, 4.0))

        assert (room.width, room.depth, room.wall_height) == (5.0, 4.0, 2.7)
        assert len(room.doors) == 1
        door = room.doors[0]
        assert door.wall == WallId.SOUTH
        assert door.width == pytest.approx(0.9)
        assert door.offset == pytest.approx(2.05)
        assert len(room.windows) == 1
        assert room.windows[0].wall == WallId.NORTH
        assert room.windows[0].sill_height == pytest.approx(0.9)

    def test_kitchen_default_dims(self):
        """測試廚房預設尺寸"""
        room = self.service.build_room(RoomType.KITCHEN)

        assert (room.width, room.depth) == (4.0, 3.5)

    def test_too_small(self):
        """測試房間邊長小於下限"""
        with pytest.raises(InvalidDimensions):
            self.service.build_room(RoomType.BEDROOM, (0.5, 4.0))

    def test_too_large(self):
        """測試房間邊長大於上限"""
        with pytest.raises(InvalidDimensions):
            self.service.build_room(RoomType.LIVING_ROOM, (60.0, 4.0))

    def test_deterministic(self):
        """測試相同輸入產生相同房間"""
        a = self.service.build_room(RoomType.DINING_ROOM, (4.2, 3.3))
        b = self.service.build_room(RoomType.DINING_ROOM, (4.2, 3.3))

        assert a.model_dump_json() == b.model_dump_json()

    def test_room_from_spec(self):
        """測試由文件的房間區塊建立房間"""
        org = scene_service.parse_scene_spec(json.dumps(SceneFactory.spec(room={"width": 6.0, "depth": 5.0})))

        room = self.service.room_from_spec(org)

        assert (room.width, room.depth) == (6.0, 5.0)
        assert room.doors[0].offset == pytest.approx(2.55)

    def test_opening_beyond_wall(self):
        """測試開口超出牆面"""
        document = SceneFactory.spec(room={
            "width": 5.0, "depth": 4.0,
            "doors": [{"wall": "north", "offset": 4.5, "width": 1.0}],
        })
        org = scene_service.parse_scene_spec(json.dumps(document))

        with pytest.raises(InvalidDimensions):
            self.service.room_from_spec(org)


class TestExpandCounts:
    """數量展開測試類別"""

    def test_clones_and_relations(self):
        """測試副本與關係展開"""
        org = SceneFactory.org(
            [SceneFactory.item("table"), FurnitureItem(id="chair", category="chair", count=2, w=0.5, d=0.5, h=0.9)],
            [SceneFactory.relation("chair", "table", RelationKind.NEAR)],
        )

        expanded = scene_service.expand_counts(org)

        assert expanded.item_ids == ("table", "chair#1", "chair#2")
        assert [(r.subject, r.object) for r in expanded.relations] == [("chair#1", "table"), ("chair#2", "table")]
        assert all(item.count == 1 for item in expanded.furniture)

    def test_on_top_round_robin(self):
        """測試置頂副本依序配對支撐物"""
        org = SceneFactory.org(
            [
                FurnitureItem(id="table", category="table", count=2, w=1.0, d=1.0, h=0.7),
                FurnitureItem(id="cup", category="cup", count=3, w=0.1, d=0.1, h=0.1, mount=Mount.ON_TOP),
            ],
            [SceneFactory.relation("cup", "table", RelationKind.ON_TOP_OF)],
        )

        expanded = scene_service.expand_counts(org)

        pairs = [(r.subject, r.object) for r in expanded.relations]
        assert pairs == [("cup#1", "table#1"), ("cup#2", "table#2"), ("cup#3", "table#1")]
