"""
場景關係圖服務的單元測試
"""
import random

import pytest

from roomcraft.core.exceptions import CyclicSupport, PreconditionViolation, UnknownItem
from roomcraft.schemas.scene import FurnitureItem, RelationEdge, SceneOrganization
from roomcraft.services.graph_service import GraphService
from roomcraft.utils.constants import Mount, RelationKind, RoomType
from tests.factories import SceneFactory


class TestBuildGraph:
    """關係圖建立測試類別"""

    def setup_method(self):
        """測試前設置"""
        self.service = GraphService()

    def test_nodes_and_edges(self):
        """測試三件家具兩個關係"""
        org = SceneFactory.org(
            [SceneFactory.item("bed"), SceneFactory.item("nightstand"), SceneFactory.item("desk")],
            [
                SceneFactory.relation("nightstand", "bed", RelationKind.NEAR),
                SceneFactory.relation("desk", "bed", RelationKind.FAR_FROM),
            ],
        )

        graph = self.service.build_graph(org)

        assert len(graph.nodes) == 3
        assert len(graph.edges) == 2
        assert graph.anchors == ()

    def test_wall_anchor_node(self):
        """測試靠牆關係加入牆面錨點"""
        org = SceneFactory.org(
            [SceneFactory.item("sofa")],
            [SceneFactory.relation("sofa", "wall:north", RelationKind.AGAINST_WALL)],
        )

        graph = self.service.build_graph(org)

        assert graph.anchors == ("wall:north",)
        assert "wall:north" not in graph.nodes

    def test_cyclic_support(self):
        """測試支撐關係形成循環"""
        org = SceneFactory.org(
            [SceneFactory.on_top("cup"), SceneFactory.on_top("table")],
            [
                SceneFactory.relation("cup", "table", RelationKind.ON_TOP_OF),
                SceneFactory.relation("table", "cup", RelationKind.ON_TOP_OF),
            ],
        )

        with pytest.raises(CyclicSupport) as exc_info:
            self.service.build_graph(org)

        assert set(exc_info.value.details["cycle"]) == {"cup", "table"}

    def test_multiple_supports(self):
        """測試一件家具有兩個支撐物"""
        org = SceneFactory.org(
            [SceneFactory.item("table"), SceneFactory.item("desk"), SceneFactory.on_top("cup")],
            [
                SceneFactory.relation("cup", "table", RelationKind.ON_TOP_OF),
                SceneFactory.relation("cup", "desk", RelationKind.ON_TOP_OF),
            ],
        )

        with pytest.raises(PreconditionViolation):
            self.service.build_graph(org)

    def test_expands_counts(self):
        """測試建立關係圖前展開數量"""
        org = SceneFactory.org(
            [SceneFactory.item("table"), FurnitureItem(id="chair", category="chair", count=3, w=0.5, d=0.5, h=0.9)],
            [SceneFactory.relation("chair", "table", RelationKind.NEAR)],
        )

        graph = self.service.build_graph(org)

        assert graph.nodes == ("table", "chair#1", "chair#2", "chair#3")
        assert len(graph.edges) == 3

    def test_to_dot(self):
        """測試 DOT 輸出"""
        org = SceneFactory.org(
            [SceneFactory.item("sofa")],
            [SceneFactory.relation("sofa", "wall:north", RelationKind.AGAINST_WALL, weight=2.0)],
        )

        dot = self.service.to_dot(self.service.build_graph(org))

        assert dot.startswith("digraph scene {")
        assert '"sofa" -> "wall:north"' in dot
        assert "against_wall w=2" in dot
        assert dot.rstrip().endswith("}")


class TestHeuristicCost:
    """啟發式成本測試類別"""

    def setup_method(self):
        """測試前設置"""
        self.service = GraphService()

    def test_isolated_item(self):
        """測試沒有關係的家具成本為 0"""
        graph = self.service.build_graph(SceneFactory.org([SceneFactory.item("plant")]))

        assert self.service.heuristic_cost("plant", graph) == 0.0

    def test_weighted_sum(self):
        """測試權重加總"""
        org = SceneFactory.org(
            [SceneFactory.item("table"), SceneFactory.item("chair"), SceneFactory.on_top("cup")],
            [
                SceneFactory.relation("chair", "table", RelationKind.NEAR, weight=1.0),
                SceneFactory.relation("cup", "table", RelationKind.ON_TOP_OF, weight=2.0),
            ],
        )
        graph = self.service.build_graph(org)

        assert self.service.heuristic_cost("table", graph) == pytest.approx(3.0)
        assert self.service.heuristic_cost("chair", graph) == pytest.approx(1.0)

    def test_wall_edges_count(self):
        """測試與牆面的關係計入成本，錨點本身為 0"""
        org = SceneFactory.org(
            [SceneFactory.item("sofa"), SceneFactory.item("tv")],
            [
                SceneFactory.relation("sofa", "wall:south", RelationKind.AGAINST_WALL),
                SceneFactory.relation("tv", "sofa", RelationKind.FACE_TO_FACE),
            ],
        )
        graph = self.service.build_graph(org)

        assert self.service.heuristic_cost("sofa", graph) == pytest.approx(2.0)
        assert self.service.heuristic_cost("wall:south", graph) == 0.0

    def test_unknown_item(self):
        """測試不存在的家具"""
        graph = self.service.build_graph(SceneFactory.org([SceneFactory.item("plant")]))

        with pytest.raises(UnknownItem):
            self.service.heuristic_cost("piano", graph)


class TestHdfsOrder:
    """HDFS 擺放順序測試類別"""

    def setup_method(self):
        """測試前設置"""
        self.service = GraphService()

    def _order(self, org: SceneOrganization):
        return self.service.hdfs_order(self.service.build_graph(org)).items

    def test_support_before_child(self):
        """測試支撐物排在上方物件之前"""
        org = SceneFactory.org(
            [SceneFactory.item("table"), SceneFactory.on_top("cup")],
            [SceneFactory.relation("cup", "table", RelationKind.ON_TOP_OF)],
        )

        assert self._order(org) == ("table", "cup")

    def test_higher_cost_first(self):
        """測試成本高者優先"""
        org = SceneFactory.org(
            [SceneFactory.item("plant"), SceneFactory.item("sofa"), SceneFactory.item("tv")],
            [
                SceneFactory.relation("sofa", "wall:south", RelationKind.AGAINST_WALL),
                SceneFactory.relation("tv", "sofa", RelationKind.FACE_TO_FACE),
            ],
        )

        assert self._order(org) == ("sofa", "tv", "plant")

    def test_ties_break_lexicographically(self):
        """測試同分時依 ID 字典序"""
        org = SceneFactory.org([SceneFactory.item("c"), SceneFactory.item("a"), SceneFactory.item("b")])

        assert self._order(org) == ("a", "b", "c")

    def test_support_overrides_cost(self):
        """測試成本較高的上方物件仍排在支撐物之後"""
        org = SceneFactory.org(
            [SceneFactory.item("table"), SceneFactory.on_top("cup")],
            [
                SceneFactory.relation("cup", "table", RelationKind.ON_TOP_OF, weight=1.0),
                SceneFactory.relation("cup", "wall:north", RelationKind.NEAR_WALL, weight=4.0),
            ],
        )
        graph = self.service.build_graph(org)
        order = self.service.hdfs_order(graph)

        assert order.costs == {"table": pytest.approx(1.0), "cup": pytest.approx(5.0)}
        assert order.items == ("table", "cup")


def _random_forest(rng: random.Random, scale: float = 1.0) -> SceneOrganization:
    """隨機支撐森林加上隨機非支撐關係 (權重為整數)"""
    n = rng.randint(2, 8)
    ids = [f"n{i}" for i in range(n)]
    rng.shuffle(ids)
    relations = []
    furniture = []
    for k, item_id in enumerate(ids):
        parent = rng.choice(ids[:k]) if k and rng.random() < 0.4 else None
        if parent is not None:
            relations.append(RelationEdge(
                subject=item_id, object=parent, relation=RelationKind.ON_TOP_OF,
                weight=scale * rng.randint(1, 5),
            ))
        furniture.append(FurnitureItem(
            id=item_id, category="box", w=0.5, d=0.5, h=0.5,
            mount=Mount.ON_TOP if parent else Mount.FLOOR,
        ))
    for _ in range(rng.randint(0, 2 * n)):
        a, b = rng.sample(ids + ["wall:north"], 2)
        relations.append(RelationEdge(
            subject=a, object=b, relation=RelationKind.NEAR, weight=scale * rng.randint(1, 5),
        ))
    return SceneOrganization(room_type=RoomType.LIVING_ROOM, furniture=tuple(furniture), relations=tuple(relations))


class TestHdfsProperties:
    """HDFS 順序性質測試類別"""

    def setup_method(self):
        """測試前設置"""
        self.service = GraphService()

    def _check_order(self, rng: random.Random):
        graph = self.service.build_graph(_random_forest(rng))
        order = self.service.hdfs_order(graph).items

        assert sorted(order) == sorted(graph.nodes)
        position = {item_id: i for i, item_id in enumerate(order)}
        for node in graph.nodes:
            support = graph.support_of(node)
            if support is not None:
                assert position[support] < position[node]

    def test_permutation_with_support_precedence(self):
        """測試順序為所有家具的排列且支撐物在前"""
        rng = random.Random(7)
        for _ in range(200):
            self._check_order(rng)

    @pytest.mark.slow
    def test_permutation_many_graphs(self):
        """測試 1000 個隨機關係圖的排列與支撐順序"""
        rng = random.Random(1007)
        for _ in range(1000):
            self._check_order(rng)

    def test_cost_matches_brute_force(self):
        """測試成本與逐邊加總一致"""
        rng = random.Random(11)
        for _ in range(100):
            graph = self.service.build_graph(_random_forest(rng))
            for node in graph.nodes:
                expected = 0.0
                for edge in graph.edges:
                    if node in (edge.subject, edge.object) and edge.subject != edge.object:
                        expected += edge.weight
                assert self.service.heuristic_cost(node, graph) == pytest.approx(expected)

    def test_scaling_weights_keeps_order(self):
        """測試所有權重乘上相同正數後順序不變"""
        for seed in range(100):
            base = self.service.build_graph(_random_forest(random.Random(seed)))
            scaled = self.service.build_graph(_random_forest(random.Random(seed), scale=2.5))

            assert self.service.hdfs_order(base).items == self.service.hdfs_order(scaled).items
