"""Variable-cluster graph wiring the per-cluster sequence models.

Nodes are the metric clusters plus the exogenous ``parameters`` and
``time`` variables.  Edges declare which series a cluster's model may read:
parameters act on workload (through the area multiplier, never as an input
series), every cluster reads time features, and QoS reads workload and
interference.  Feeding a series that is not a declared parent is a
construction-time error raised by the window builder.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from cellwhatif import frames

EXOGENOUS = ("parameters", "time")

DEFAULT_EDGES = (
    ("parameters", "workload"),
    ("workload", "qos"),
    ("interference", "qos"),
    ("time", "workload"),
    ("time", "interference"),
    ("time", "qos"),
)


@dataclass(frozen=True)
class GraphicalModel:
    cluster_metrics: dict[str, list[str]] = field(
        default_factory=lambda: {k: list(v) for k, v in frames.CLUSTERS.items()}
    )
    edges: tuple[tuple[str, str], ...] = DEFAULT_EDGES

    def __post_init__(self) -> None:
        nodes = set(self.cluster_metrics) | set(EXOGENOUS)
        for src, dst in self.edges:
            if src not in nodes or dst not in nodes:
                raise ValueError(f"edge ({src!r}, {dst!r}) references unknown node")
            if dst in EXOGENOUS:
                raise ValueError(f"exogenous node {dst!r} cannot have parents")
        self.topological_order()  # raises on cycles

    @property
    def clusters(self) -> tuple[str, ...]:
        return tuple(self.cluster_metrics)

    def parents(self, cluster: str) -> list[str]:
        """All declared parents of a cluster, in edge-declaration order."""
        if cluster not in self.cluster_metrics:
            raise KeyError(f"unknown cluster {cluster!r}")
        return [src for src, dst in self.edges if dst == cluster]

    def series_parents(self, cluster: str) -> list[str]:
        """Parents whose series feed the cluster's model.

        ``parameters`` is excluded (it acts through the multiplier);
        ``time`` goes last so encoded time features sit at the tail of the
        parent block.
        """
        ps = [p for p in self.parents(cluster) if p != "parameters"]
        if "time" in ps:
            ps = [p for p in ps if p != "time"] + ["time"]
        return ps

    def parent_dim(self, cluster: str) -> int:
        dim = 0
        for p in self.series_parents(cluster):
            dim += frames.TIME_ENCODED_DIM if p == "time" else len(self.cluster_metrics[p])
        return dim

    def topological_order(self) -> list[str]:
        """Modeled clusters in dependency order (parents before children)."""
        order: list[str] = []
        state: dict[str, int] = {}

        def visit(node: str) -> None:
            if state.get(node) == 2 or node in EXOGENOUS:
                return
            if state.get(node) == 1:
                raise ValueError(f"cycle through {node!r}")
            state[node] = 1
            for p in self.parents(node):
                visit(p)
            state[node] = 2
            order.append(node)

        for c in self.cluster_metrics:
            visit(c)
        return order


def default_graph() -> GraphicalModel:
    return GraphicalModel()
