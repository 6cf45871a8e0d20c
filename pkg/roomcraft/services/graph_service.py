"""
場景關係圖服務模組

提供空間關係圖相關功能：
- 由場景組織建立關係圖
- 啟發式成本計算
- HDFS 擺放順序
- DOT 格式輸出
"""
import math
from typing import Dict, List, Optional, Set

import networkx as nx

from roomcraft.core.exceptions import CyclicSupport, PreconditionViolation, UnknownItem
from roomcraft.schemas.graph import GraphEdge, PlacementOrder, SpatialGraph
from roomcraft.schemas.scene import SceneOrganization
from roomcraft.services.scene_service import scene_service
from roomcraft.utils.constants import ARCHITECTURAL_IDS, RelationKind
from roomcraft.utils.logging import get_logger

logger = get_logger(__name__)

# 成本比較時的小數位數，避免浮點誤差蓋過字典序
COST_DECIMALS = 9


class GraphService:
    """場景關係圖服務類別"""

    def build_graph(self, org: SceneOrganization) -> SpatialGraph:
        """
        建立空間關係圖

        Args:
            org: 已驗證的場景組織；count > 1 的家具會先展開

        Returns:
            每個關係一條邊的 SpatialGraph，建築節點只作為錨點
        """
        if any(item.count > 1 for item in org.furniture):
            org = scene_service.expand_counts(org)

        edges = tuple(
            GraphEdge(
                subject=rel.subject,
                object=rel.object,
                relation=rel.relation,
                weight=rel.weight,
                params=dict(rel.params),
            )
            for rel in org.relations
        )
        for edge in edges:
            if edge.subject == edge.object:
                raise PreconditionViolation(f"關係不可指向自己: {edge.subject}")

        anchors = sorted(
            {ref for edge in edges for ref in (edge.subject, edge.object) if ref in ARCHITECTURAL_IDS}
        )
        graph = SpatialGraph(
            nodes=tuple(item.id for item in org.furniture),
            anchors=tuple(anchors),
            edges=edges,
            items={item.id: item for item in org.furniture},
        )
        self.check_support_forest(graph)
        logger.debug(f"關係圖: {len(graph.nodes)} 個節點, {len(graph.edges)} 條邊")
        return graph

    def support_graph(self, graph: SpatialGraph) -> nx.DiGraph:
        """支撐關係圖 (子節點 -> 支撐物)"""
        support = nx.DiGraph()
        support.add_nodes_from(graph.nodes)
        for edge in graph.edges:
            if edge.relation == RelationKind.ON_TOP_OF:
                support.add_edge(edge.subject, edge.object)
        return support

    def check_support_forest(self, graph: SpatialGraph):
        """on_top_of 邊必須構成森林: 無循環，且每個子節點最多一個支撐物"""
        support = self.support_graph(graph)
        try:
            cycle = nx.find_cycle(support)
        except nx.NetworkXNoCycle:
            cycle = None
        if cycle:
            nodes = [u for u, _ in cycle] + [cycle[0][0]]
            raise CyclicSupport(nodes)
        for node in support.nodes:
            if support.out_degree(node) > 1:
                raise PreconditionViolation(
                    f"{node} 有多個支撐物",
                    details={"item_id": node, "supports": sorted(support.successors(node))}
                )

    def heuristic_cost(self, item: str, graph: SpatialGraph) -> float:
        """
        啟發式成本 f(V_i) = Σ_j w(i,j)·𝕀(V_i, V_j, E_ij)

        與建築錨點相連的邊也計入；錨點本身成本為 0。
        """
        if item in graph.anchors:
            return 0.0
        if item not in graph.items:
            raise UnknownItem(item)
        return math.fsum(
            edge.weight
            for edge in graph.edges
            if (edge.subject == item) != (edge.object == item)
        )

    def hdfs_order(self, graph: SpatialGraph) -> PlacementOrder:
        """
        HDFS 擺放順序

        依成本遞減排序 (同分時依 ID 字典序)，再以深度優先走訪修正支撐順序，
        讓每個支撐物都排在其上方物件之前，其餘相對順序不變。
        """
        self.check_support_forest(graph)
        costs = {node: self.heuristic_cost(node, graph) for node in graph.nodes}
        ranked = sorted(graph.nodes, key=lambda n: (-round(costs[n], COST_DECIMALS), n))

        parent: Dict[str, Optional[str]] = {node: graph.support_of(node) for node in graph.nodes}
        visited: Set[str] = set()
        order: List[str] = []

        def visit(node: str):
            if node in visited:
                return
            visited.add(node)
            support = parent.get(node)
            if support is not None and support in graph.items:
                visit(support)
            order.append(node)

        for node in ranked:
            visit(node)

        logger.debug(f"HDFS 順序: {order}")
        return PlacementOrder(items=tuple(order), costs=costs)

    def to_dot(self, graph: SpatialGraph) -> str:
        """將關係圖輸出為 DOT 文字"""
        def quote(text: str) -> str:
            return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'

        lines = ["digraph scene {", "  rankdir=LR;"]
        for node in graph.nodes:
            item = graph.items[node]
            label = quote(node)[:-1] + "\\n" + quote(f"{item.category} ({item.mount.value})")[1:]
            lines.append(f"  {quote(node)} [shape=ellipse, label={label}];")
        for anchor in graph.anchors:
            lines.append(f"  {quote(anchor)} [shape=box, style=dashed];")
        for edge in graph.edges:
            label = edge.relation.value
            if edge.weight != 1.0:
                label += f" w={edge.weight:g}"
            lines.append(f"  {quote(edge.subject)} -> {quote(edge.object)} [label={quote(label)}];")
        lines.append("}")
        return "\n".join(lines) + "\n"


graph_service = GraphService()
