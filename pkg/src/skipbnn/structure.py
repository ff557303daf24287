"""Structural analysis: inclusion masks, active paths, and depth metrics.

An edge survives the active-path computation when it lies on at least one
chain of included, non-bias weights connecting a covariate to an output
node. Because covariates are concatenated to every layer's input, a
covariate-origin edge can root a path at any depth. Chains that carry only
bias information are discarded.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .layers import DenseLayer, VariationalLayer
from .network import Network
from .rng import Rng


@dataclass
class StructureMask:
    """Binary inclusion matrix per layer, aligned with the network dims.

    ``masks[j]`` has shape (n_out, n_in) where the leading columns are
    hidden-origin and the trailing ``n_covariates`` columns (all columns,
    for the first layer) are covariate-origin. Biases are tracked implicitly:
    they are always kept.
    """

    masks: list[np.ndarray]
    n_covariates: int
    hidden_widths: tuple[int, ...]
    n_outputs: int

    def __post_init__(self):
        self.masks = [np.asarray(m, dtype=np.uint8) for m in self.masks]
        for j, m in enumerate(self.masks):
            if np.any((m != 0) & (m != 1)):
                raise ValueError(f"mask entries must be 0/1 (layer {j})")

    @property
    def n_layers(self) -> int:
        return len(self.masks)

    def n_prev(self, j: int) -> int:
        return self.hidden_widths[j - 1] if j > 0 else 0

    def cov_columns(self, j: int) -> slice:
        return slice(self.n_prev(j), self.masks[j].shape[1])

    def popcount(self) -> int:
        return int(sum(int(m.sum()) for m in self.masks))

    def total_weights(self) -> int:
        return int(sum(m.size for m in self.masks))

    @classmethod
    def for_network(cls, net: Network, masks: list[np.ndarray]) -> "StructureMask":
        return cls(masks, net.spec.n_covariates, net.spec.hidden_widths, net.spec.n_outputs)


def extract_mpm(net: Network) -> StructureMask:
    """Median probability model: keep edges with inclusion probability
    strictly above 0.5 (alpha == 0.5 is excluded)."""
    if net.spec.mode != "variational":
        raise ValueError("extract_mpm requires a variational network")
    return StructureMask.for_network(net, [(l.alpha > 0.5).astype(np.uint8) for l in net.layers])


def threshold_mask(net: Network) -> StructureMask:
    """Magnitude-pruned structure of an l1-mode network: |w| > prune_threshold."""
    if net.spec.mode != "l1":
        raise ValueError("threshold_mask requires an l1-mode network")
    thr = net.spec.prune_threshold
    return StructureMask.for_network(
        net, [(np.abs(l.w) > thr).astype(np.uint8) for l in net.layers]
    )


def structure_of(net: Network) -> StructureMask:
    """The network's sparse structure under its own mode's rule."""
    return extract_mpm(net) if net.spec.mode == "variational" else threshold_mask(net)


def sample_structure(net: Network, rng: Rng) -> StructureMask:
    """One posterior structure draw: each edge included Bernoulli(alpha)."""
    if net.spec.mode != "variational":
        raise ValueError("sample_structure requires a variational network")
    stream = rng.stream("structure")
    masks = [(stream.random(l.alpha.shape) < l.alpha).astype(np.uint8) for l in net.layers]
    return StructureMask.for_network(net, masks)


@dataclass
class ActivePathGraph:
    """Edges and nodes surviving the covariate-to-output reachability sweep."""

    kept: list[np.ndarray]  # 0/1 per layer, same shapes as the mask
    active_hidden: list[np.ndarray]  # bool per hidden layer
    outputs: tuple[int, ...]  # output nodes used as reachability targets
    mask: StructureMask
    used_weights: int = field(init=False)
    density: float = field(init=False)

    def __post_init__(self):
        self.used_weights = int(sum(int(k.sum()) for k in self.kept))
        self.density = self.used_weights / self.mask.total_weights()

    def to_mask(self) -> StructureMask:
        return StructureMask(
            [k.copy() for k in self.kept],
            self.mask.n_covariates,
            self.mask.hidden_widths,
            self.mask.n_outputs,
        )


def active_paths(mask: StructureMask, outputs=None) -> ActivePathGraph:
    """Two reachability sweeps over the layered DAG, O(total edges).

    An edge is kept iff its source is a covariate or a hidden node that
    receives covariate signal, and its target node reaches one of the
    selected output nodes through included edges.
    """
    n_hidden = len(mask.hidden_widths)
    out_sel = tuple(range(mask.n_outputs)) if outputs is None else tuple(sorted(outputs))
    if any(o < 0 or o >= mask.n_outputs for o in out_sel):
        raise ValueError("output index out of range")

    # Forward: which hidden nodes receive covariate signal.
    fwd: list[np.ndarray] = []
    for j in range(n_hidden):
        m = mask.masks[j]
        from_cov = m[:, mask.cov_columns(j)].any(axis=1)
        if j > 0:
            from_hidden = (m[:, : mask.n_prev(j)].astype(bool) & fwd[j - 1]).any(axis=1)
            fwd.append(from_cov | from_hidden)
        else:
            fwd.append(from_cov)

    # Backward: which hidden nodes reach a selected output.
    bwd: list[np.ndarray] = [None] * n_hidden
    reach_above = np.zeros(mask.n_outputs, dtype=bool)
    reach_above[list(out_sel)] = True
    for j in range(n_hidden - 1, -1, -1):
        m_above = mask.masks[j + 1]
        width = mask.hidden_widths[j]
        bwd[j] = (m_above[:, :width].astype(bool) & reach_above[:, None]).any(axis=0)
        reach_above = bwd[j]

    kept: list[np.ndarray] = []
    for j, m in enumerate(mask.masks):
        n_prev = mask.n_prev(j)
        source_ok = np.ones(m.shape[1], dtype=bool)
        if n_prev:
            source_ok[:n_prev] = fwd[j - 1]
        if j == n_hidden:  # output layer
            target_ok = np.zeros(mask.n_outputs, dtype=bool)
            target_ok[list(out_sel)] = True
        else:
            target_ok = bwd[j]
        kept.append((m.astype(bool) & target_ok[:, None] & source_ok[None, :]).astype(np.uint8))

    active_hidden = [fwd[j] & bwd[j] for j in range(n_hidden)]
    return ActivePathGraph(kept, active_hidden, out_sel, mask)


def depth_sets(graph: ActivePathGraph) -> list[list[int]]:
    """Per covariate, the set of contribution depths, one entry per entry
    layer with a kept covariate-origin edge. Entering the first layer of a
    J-layer network contributes depth J; entering the last, depth 1."""
    mask = graph.mask
    J = mask.n_layers
    out: list[list[int]] = [[] for _ in range(mask.n_covariates)]
    for j in range(J):
        cov_block = graph.kept[j][:, mask.cov_columns(j)]
        present = cov_block.any(axis=0)
        for i in np.nonzero(present)[0]:
            out[i].append(J - j)
    return [sorted(d, reverse=True) for d in out]


def depth_metrics(graph: ActivePathGraph) -> tuple[int, float, list[list[int]]]:
    """(max_depth, avg_depth, per-covariate depth sets).

    The average is taken over the multiset union of the per-(covariate,
    entry-layer) depth values, each counted once however many nodes the
    covariate fans into at that layer. No active paths gives (0, 0.0).
    """
    sets = depth_sets(graph)
    pooled = [d for s in sets for d in s]
    if not pooled:
        return 0, 0.0, sets
    return max(pooled), float(np.mean(pooled)), sets


def covariate_inclusion(graph: ActivePathGraph) -> np.ndarray:
    """Boolean per covariate: does any active path start at it."""
    return np.array([len(s) > 0 for s in depth_sets(graph)], dtype=bool)


# --- exports ----------------------------------------------------------------


def _node_names(mask: StructureMask):
    cov = [f"x{i + 1}" for i in range(mask.n_covariates)]
    hidden = [
        [f"h{j + 1}_{k + 1}" for k in range(w)] for j, w in enumerate(mask.hidden_widths)
    ]
    outs = [f"y{c + 1}" for c in range(mask.n_outputs)]
    return cov, hidden, outs


def _edge_records(graph: ActivePathGraph, net: Network | None):
    mask = graph.mask
    cov, hidden, outs = _node_names(mask)
    records = []
    for j, kept in enumerate(graph.kept):
        n_prev = mask.n_prev(j)
        targets = outs if j == mask.n_layers - 1 else hidden[j]
        layer = net.layers[j] if net is not None else None
        for p, k in zip(*np.nonzero(kept)):
            source = hidden[j - 1][k] if k < n_prev else cov[k - n_prev]
            rec = {"from": source, "to": targets[p], "layer": int(j)}
            if isinstance(layer, VariationalLayer):
                rec["alpha"] = float(layer.alpha[p, k])
                rec["mu"] = float(layer.mu[p, k])
            elif isinstance(layer, DenseLayer):
                rec["w"] = float(layer.w[p, k])
            records.append(rec)
    return records


def graph_to_json(graph: ActivePathGraph, net: Network | None = None) -> dict:
    """JSON-ready description: nodes, kept edges with alpha/mu or w, summaries."""
    mask = graph.mask
    cov, hidden, outs = _node_names(mask)
    max_depth, avg_depth, sets = depth_metrics(graph)
    nodes = [{"id": c, "kind": "covariate"} for c in cov]
    for j, names in enumerate(hidden):
        nodes.extend(
            {"id": name, "kind": "hidden", "layer": j + 1}
            for k, name in enumerate(names)
            if graph.active_hidden[j][k]
        )
    nodes.extend({"id": o, "kind": "output"} for o in outs)
    return {
        "nodes": nodes,
        "edges": _edge_records(graph, net),
        "summary": {
            "used_weights": graph.used_weights,
            "density": graph.density,
            "max_depth": max_depth,
            "avg_depth": avg_depth,
            "covariate_depths": {cov[i]: sets[i] for i in range(len(cov))},
        },
    }


def graph_to_dot(graph: ActivePathGraph, net: Network | None = None) -> str:
    """GraphViz digraph of the kept edges, labeled alpha=... or w=...."""
    lines = ["digraph active_paths {", "  rankdir=LR;"]
    for rec in _edge_records(graph, net):
        if "alpha" in rec:
            label = f"alpha={rec['alpha']:.2f}"
        elif "w" in rec:
            label = f"w={rec['w']:.3f}"
        else:
            label = ""
        attr = f' [label="{label}"]' if label else ""
        lines.append(f'  "{rec["from"]}" -> "{rec["to"]}"{attr};')
    lines.append("}")
    return "\n".join(lines) + "\n"


def write_graph_exports(graph: ActivePathGraph, net: Network, stem) -> tuple[str, str]:
    """Write <stem>.dot and <stem>.json; returns both paths."""
    dot_path = f"{stem}.dot"
    json_path = f"{stem}.json"
    with open(dot_path, "w") as fh:
        fh.write(graph_to_dot(graph, net))
    with open(json_path, "w") as fh:
        json.dump(graph_to_json(graph, net), fh, indent=2, sort_keys=True)
    return dot_path, json_path
