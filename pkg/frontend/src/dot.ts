/** Render the provenance DAG client-side from the service's DOT text.
 *
 * The service only ever speaks DOT, so the drawing happens here: parse the
 * digraph, rank nodes by longest path from the sources, settle each rank
 * with a few barycenter sweeps, then emit a plain SVG. File nodes arrive
 * with shape=ellipse and derivation steps with shape=box; the renderer
 * keeps that convention.
 */

export interface DotNode {
  id: string;
  label: string;
  shape: "ellipse" | "box";
}

export interface DotEdge {
  from: string;
  to: string;
}

export interface DotGraph {
  nodes: Map<string, DotNode>;
  edges: DotEdge[];
}

const NODE_LINE = /^\s*"((?:[^"\\]|\\.)*)"\s*\[([^\]]*)\]\s*;?\s*$/;
const EDGE_LINE = /^\s*"((?:[^"\\]|\\.)*)"\s*->\s*"((?:[^"\\]|\\.)*)"\s*;?\s*$/;
const ATTR = /(\w+)\s*=\s*"((?:[^"\\]|\\.)*)"/g;

function unescape(raw: string): string {
  return raw.replace(/\\(.)/g, "$1");
}

export function parseDot(text: string): DotGraph {
  const nodes = new Map<string, DotNode>();
  const edges: DotEdge[] = [];
  for (const line of text.split("\n")) {
    const edge = EDGE_LINE.exec(line);
    if (edge) {
      edges.push({ from: unescape(edge[1]), to: unescape(edge[2]) });
      continue;
    }
    const node = NODE_LINE.exec(line);
    if (!node) continue;
    const id = unescape(node[1]);
    const attrs = new Map<string, string>();
    for (const m of node[2].matchAll(ATTR)) {
      attrs.set(m[1], unescape(m[2]));
    }
    nodes.set(id, {
      id,
      label: attrs.get("label") ?? id,
      shape: attrs.get("shape") === "box" ? "box" : "ellipse",
    });
  }
  // Edges may name nodes that never got an attribute line.
  for (const e of edges) {
    for (const id of [e.from, e.to]) {
      if (!nodes.has(id)) nodes.set(id, { id, label: id, shape: "ellipse" });
    }
  }
  return { nodes, edges };
}

export interface PlacedNode extends DotNode {
  x: number;
  y: number;
  layer: number;
}

export interface Layout {
  placed: Map<string, PlacedNode>;
  layers: string[][];
  width: number;
  height: number;
}

const X_STEP = 190;
const Y_STEP = 96;
const MARGIN = 50;

export function layoutDag(graph: DotGraph): Layout {
  const ids = [...graph.nodes.keys()];
  const indegree = new Map(ids.map((id) => [id, 0]));
  const out = new Map<string, string[]>(ids.map((id) => [id, []]));
  for (const e of graph.edges) {
    indegree.set(e.to, (indegree.get(e.to) ?? 0) + 1);
    out.get(e.from)?.push(e.to);
  }

  // Longest path from the sources fixes each node's rank.
  const layer = new Map<string, number>(ids.map((id) => [id, 0]));
  const queue = ids.filter((id) => indegree.get(id) === 0);
  const remaining = new Map(indegree);
  let seen = 0;
  while (queue.length > 0) {
    const id = queue.shift() as string;
    seen += 1;
    for (const next of out.get(id) ?? []) {
      layer.set(next, Math.max(layer.get(next) ?? 0, (layer.get(id) ?? 0) + 1));
      const left = (remaining.get(next) ?? 0) - 1;
      remaining.set(next, left);
      if (left === 0) queue.push(next);
    }
  }
  if (seen !== ids.length) throw new Error("graph has a cycle; refusing to draw it");

  const depth = Math.max(0, ...layer.values());
  const layers: string[][] = Array.from({ length: depth + 1 }, () => []);
  for (const id of ids) layers[layer.get(id) ?? 0].push(id);

  // Barycenter sweeps pull connected nodes toward each other.
  const incoming = new Map<string, string[]>(ids.map((id) => [id, []]));
  for (const e of graph.edges) incoming.get(e.to)?.push(e.from);
  const position = new Map<string, number>();
  const refresh = () => {
    for (const row of layers) row.forEach((id, i) => position.set(id, i));
  };
  refresh();
  const settle = (row: string[], neighbours: Map<string, string[]>) => {
    const keyed = row.map((id) => {
      const near = neighbours.get(id) ?? [];
      const mean =
        near.length === 0
          ? (position.get(id) ?? 0)
          : near.reduce((acc, n) => acc + (position.get(n) ?? 0), 0) / near.length;
      return { id, mean };
    });
    keyed.sort((a, b) => a.mean - b.mean || (position.get(a.id) ?? 0) - (position.get(b.id) ?? 0));
    return keyed.map((k) => k.id);
  };
  for (let pass = 0; pass < 3; pass += 1) {
    for (let i = 1; i < layers.length; i += 1) {
      layers[i] = settle(layers[i], incoming);
      refresh();
    }
    for (let i = layers.length - 2; i >= 0; i -= 1) {
      layers[i] = settle(layers[i], out);
      refresh();
    }
  }

  const widest = Math.max(1, ...layers.map((row) => row.length));
  const width = widest * X_STEP + 2 * MARGIN;
  const height = (depth + 1) * Y_STEP + 2 * MARGIN;
  const placed = new Map<string, PlacedNode>();
  layers.forEach((row, rank) => {
    const rowWidth = row.length * X_STEP;
    row.forEach((id, i) => {
      const node = graph.nodes.get(id) as DotNode;
      placed.set(id, {
        ...node,
        layer: rank,
        x: (width - rowWidth) / 2 + (i + 0.5) * X_STEP,
        y: MARGIN + (rank + 0.5) * Y_STEP,
      });
    });
  });
  return { placed, layers, width, height };
}

const SVG_NS = "http://www.w3.org/2000/svg";

function svgElement<K extends keyof SVGElementTagNameMap>(
  tag: K,
  attrs: Record<string, string>,
): SVGElementTagNameMap[K] {
  const el = document.createElementNS(SVG_NS, tag);
  for (const [k, v] of Object.entries(attrs)) el.setAttribute(k, v);
  return el;
}

function shortLabel(label: string): string {
  return label.length > 26 ? label.slice(0, 24) + "…" : label;
}

/** Parse, lay out, and draw in one step. Throws on cyclic input. */
export function renderDag(text: string): SVGSVGElement {
  const graph = parseDot(text);
  const { placed, width, height } = layoutDag(graph);

  const svg = svgElement("svg", {
    width: String(width),
    height: String(height),
    viewBox: `0 0 ${width} ${height}`,
    class: "dag",
  });
  const defs = svgElement("defs", {});
  const marker = svgElement("marker", {
    id: "dag-arrow",
    viewBox: "0 0 10 10",
    refX: "9",
    refY: "5",
    markerWidth: "7",
    markerHeight: "7",
    orient: "auto-start-reverse",
  });
  marker.appendChild(svgElement("path", { d: "M 0 0 L 10 5 L 0 10 z", fill: "#555" }));
  defs.appendChild(marker);
  svg.appendChild(defs);

  for (const e of graph.edges) {
    const a = placed.get(e.from);
    const b = placed.get(e.to);
    if (!a || !b) continue;
    svg.appendChild(
      svgElement("line", {
        x1: String(a.x),
        y1: String(a.y + 20),
        x2: String(b.x),
        y2: String(b.y - 24),
        stroke: "#555",
        "marker-end": "url(#dag-arrow)",
        "data-edge": `${e.from}->${e.to}`,
      }),
    );
  }

  for (const node of placed.values()) {
    const g = svgElement("g", { "data-node-id": node.id, "data-shape": node.shape });
    if (node.shape === "box") {
      g.appendChild(
        svgElement("rect", {
          x: String(node.x - 80),
          y: String(node.y - 18),
          width: "160",
          height: "36",
          rx: "4",
          fill: "#eef3fb",
          stroke: "#36c",
        }),
      );
    } else {
      g.appendChild(
        svgElement("ellipse", {
          cx: String(node.x),
          cy: String(node.y),
          rx: "86",
          ry: "20",
          fill: "#f7f4ea",
          stroke: "#a80",
        }),
      );
    }
    const label = svgElement("text", {
      x: String(node.x),
      y: String(node.y + 4),
      "text-anchor": "middle",
      "font-size": "11",
    });
    label.textContent = shortLabel(node.label);
    const title = svgElement("title", {});
    title.textContent = node.label;
    g.appendChild(label);
    g.appendChild(title);
    svg.appendChild(g);
  }
  return svg;
}
