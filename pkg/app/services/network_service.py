import logging
from pathlib import Path
from typing import Dict, Iterable, TextIO, Tuple, Union

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from app.core.exceptions import ConfigError, NetworkFormatError
from app.models.models import Network

logger = logging.getLogger(__name__)


class NetworkService:
    """Ingestion, sampling and serialization of undirected networks."""

    def from_edges(self, node_count: int, edges: Iterable[Tuple[int, int]]) -> Network:
        """
        Build a Network over nodes 0..node_count-1. Duplicate and reversed edges
        collapse; self-loops are dropped.
        """
        pairs = np.asarray(list(edges) if not isinstance(edges, np.ndarray) else edges, dtype=np.int64)
        pairs = pairs.reshape(-1, 2)
        if pairs.size and (pairs.min() < 0 or pairs.max() >= node_count):
            raise ConfigError(f"edge endpoints must lie in 0..{node_count - 1}")

        pairs = pairs[pairs[:, 0] != pairs[:, 1]]
        rows = np.concatenate([pairs[:, 0], pairs[:, 1]])
        cols = np.concatenate([pairs[:, 1], pairs[:, 0]])
        adjacency = sp.csr_matrix(
            (np.ones(rows.size), (rows, cols)), shape=(node_count, node_count)
        )
        return Network(node_count=node_count, adjacency=self._canonical(adjacency))

    def read_edge_list(self, text: Union[str, TextIO]) -> Tuple[Network, np.ndarray]:
        """
        Parse a SNAP-style edge list. Nodes are relabeled 0..N-1 in order of first
        appearance; the returned array maps each new label to its original id.
        """
        lines = text.splitlines() if isinstance(text, str) else text
        index: Dict[int, int] = {}
        pairs = []
        self_loops = 0

        for line_no, raw in enumerate(lines, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            tokens = line.split()
            if len(tokens) != 2:
                raise NetworkFormatError(f"expected two node ids, found {len(tokens)} tokens", line_no)
            try:
                u, v = int(tokens[0]), int(tokens[1])
            except ValueError:
                raise NetworkFormatError(f"non-integer node id in {line!r}", line_no) from None
            if u < 0 or v < 0:
                raise NetworkFormatError(f"negative node id in {line!r}", line_no)

            for node in (u, v):
                if node not in index:
                    index[node] = len(index)
            if u == v:
                self_loops += 1
                continue
            pairs.append((index[u], index[v]))

        if not index:
            raise NetworkFormatError("edge list contains no edges")
        if self_loops:
            logger.warning(f"Dropped {self_loops} self-loop(s) while loading edge list")

        labels = np.fromiter(index.keys(), dtype=np.int64, count=len(index))
        network = self.from_edges(len(index), pairs)
        logger.info(f"Loaded network with {network.node_count} nodes and {network.edge_count} edges")
        return network, labels

    def load_edge_list(self, text: Union[str, TextIO]) -> Network:
        network, _ = self.read_edge_list(text)
        return network

    def load_file(self, path: Path) -> Tuple[Network, np.ndarray]:
        try:
            with open(path, "r", encoding="utf-8") as handle:
                return self.read_edge_list(handle)
        except OSError as e:
            raise ConfigError(f"cannot read graph file {path}: {e.strerror}") from e

    def save_edge_list(self, network: Network, stream: TextIO) -> None:
        """
        Write the network so that read_edge_list reproduces it exactly, labels
        included: node k is introduced, in ascending order, by an edge to an
        earlier node, by the edge (k, k+1), or by a placeholder self-loop.
        """
        n = network.node_count
        introduced = np.zeros(n, dtype=bool)
        lines = []
        used = set()

        for k in range(n):
            if introduced[k]:
                continue
            neighbors = network.neighbors(k)
            earlier = neighbors[neighbors < k]
            if earlier.size:
                pair = (int(earlier[0]), k)
                used.add(pair)
            elif k + 1 < n and np.any(neighbors == k + 1):
                pair = (k, k + 1)
                used.add(pair)
                introduced[k + 1] = True
            else:
                pair = (k, k)
            lines.append(pair)
            introduced[k] = True

        for u, v in network.edges():
            if (int(u), int(v)) not in used:
                lines.append((int(u), int(v)))

        stream.write(f"# Nodes: {n} Edges: {network.edge_count}\n")
        for u, v in lines:
            stream.write(f"{u} {v}\n")

    def write_relabel_map(self, labels: np.ndarray, stream: TextIO) -> None:
        stream.write("old,new\n")
        for new, old in enumerate(labels):
            stream.write(f"{int(old)},{new}\n")

    def induced_subgraph(self, network: Network, nodes: np.ndarray) -> Tuple[Network, Dict[int, int]]:
        """Subgraph on `nodes`, relabeled contiguously in ascending id order."""
        nodes = np.unique(np.asarray(nodes, dtype=np.int64))
        sub = network.adjacency[nodes][:, nodes]
        mapping = {int(old): new for new, old in enumerate(nodes)}
        return Network(node_count=int(nodes.size), adjacency=self._canonical(sub)), mapping

    def is_connected(self, network: Network) -> bool:
        n_components, _ = connected_components(network.adjacency, directed=False)
        return n_components == 1

    def giant_component(self, network: Network) -> Tuple[Network, Dict[int, int]]:
        n_components, labels = connected_components(network.adjacency, directed=False)
        if n_components == 1:
            return network, {j: j for j in range(network.node_count)}

        sizes = np.bincount(labels)
        candidates = np.flatnonzero(sizes == sizes.max())
        # Ties go to the component holding the smallest node id
        first_node = {int(c): int(np.flatnonzero(labels == c)[0]) for c in candidates}
        chosen = min(candidates, key=lambda c: first_node[int(c)])

        giant, mapping = self.induced_subgraph(network, np.flatnonzero(labels == chosen))
        logger.info(
            f"Giant component keeps {giant.node_count} of {network.node_count} nodes "
            f"({n_components} components)"
        )
        return giant, mapping

    def bfs_nodes(self, network: Network, start: int, target: int) -> np.ndarray:
        """
        The first `target` nodes reached by a level-by-level breadth-first
        traversal from `start`, sorted; each level is visited in ascending id.
        """
        n = network.node_count
        if not 0 <= start < n:
            raise ConfigError(f"start node {start} outside 0..{n - 1}")
        if target < 1 or target > n:
            raise ConfigError(f"sample size {target} must lie in 1..{n}")

        visited = np.zeros(n, dtype=bool)
        visited[start] = True
        order = [start]
        frontier = np.array([start], dtype=np.int64)

        while len(order) < target and frontier.size:
            reached = np.unique(network.adjacency[frontier].indices)
            fresh = reached[~visited[reached]]
            visited[fresh] = True
            order.extend(fresh.tolist())
            frontier = fresh

        if len(order) < target:
            raise ConfigError(
                f"component of node {start} has {len(order)} nodes, fewer than sample size {target}"
            )

        return np.sort(np.array(order[:target], dtype=np.int64))

    def bfs_sample(self, network: Network, start: int, target: int) -> Network:
        sample, _ = self.induced_subgraph(network, self.bfs_nodes(network, start, target))
        logger.info(f"BFS sample from node {start}: {sample.node_count} nodes, {sample.edge_count} edges")
        return sample

    @staticmethod
    def _canonical(adjacency: sp.spmatrix) -> sp.csr_matrix:
        a = sp.csr_matrix(adjacency, dtype=float)
        a.sum_duplicates()
        a.sort_indices()
        a.data[:] = 1.0
        return a


# Global instance
network_service = NetworkService()
