/**
 * ViewState: the client-side mirror of the session. Every rendered number
 * originates from a server message; the only derived values are geometric
 * queries (layer centers, nearest node) over the server-sent layout.
 *
 * The legality helpers mirror the server's transition table so a correct
 * UI never emits a command the session would reject.
 */

import {
  NodeKindName,
  ServerMessage,
  SessionStateName,
  SonificationMode,
  Vec3,
} from "./protocol.js";

export interface NodeView {
  id: number;
  kind: NodeKindName;
  pos: Vec3;
}

export interface EdgeView {
  a: number;
  b: number;
  w: number;
}

export interface SnapshotView {
  nodes: NodeView[];
  edges: EdgeView[];
  receivedAtMs: number;
}

export interface MetricsView {
  epoch: number | null;
  accuracy: number;
  loss: number;
}

const PAUSED_FAMILY: ReadonlySet<SessionStateName> = new Set([
  "paused",
  "editing_structure",
  "editing_weights",
  "tuning_hyperparams",
]);

export function distance(a: Vec3, b: Vec3): number {
  const dx = a[0] - b[0];
  const dy = a[1] - b[1];
  const dz = a[2] - b[2];
  return Math.sqrt(dx * dx + dy * dy + dz * dz);
}

export class ViewState {
  session: SessionStateName = "running";
  sonificationMode: SonificationMode = "accuracy";
  layerSizes: number[] = [];
  hyperparams = { learning_rate: 0.1, momentum: 0.9, batch_size: 64 };
  metrics: MetricsView | null = null;
  audioTargets: { left: number; right: number } | null = null;
  snapshot: SnapshotView | null = null;
  previousSnapshot: SnapshotView | null = null;
  draggedNodeId: number | null = null;
  hoveredNodeId: number | null = null;
  errors: Array<{ code: string; text: string }> = [];
  helloSeen = false;

  private clock: () => number;

  constructor(clock: () => number = () => Date.now()) {
    this.clock = clock;
  }

  apply(msg: ServerMessage): void {
    switch (msg.type) {
      case "hello":
        this.helloSeen = true;
        this.layerSizes = [...msg.layer_sizes];
        this.hyperparams = { ...msg.hyperparams };
        this.sonificationMode = msg.sonification.mode;
        break;
      case "state":
        this.session = msg.value;
        if (msg.value === "running") this.draggedNodeId = null;
        break;
      case "epoch":
        this.metrics = { epoch: msg.epoch, accuracy: msg.accuracy, loss: msg.loss };
        break;
      case "eval":
        this.metrics = { epoch: this.metrics?.epoch ?? null, accuracy: msg.accuracy, loss: msg.loss };
        break;
      case "layout":
        this.previousSnapshot = this.snapshot;
        this.snapshot = {
          nodes: msg.nodes.map((n) => ({ id: n.id, kind: n.kind, pos: [...n.pos] as Vec3 })),
          edges: msg.edges.map((e) => ({ ...e })),
          receivedAtMs: this.clock(),
        };
        break;
      case "hyperparams":
        this.hyperparams = {
          learning_rate: msg.learning_rate,
          momentum: msg.momentum,
          batch_size: msg.batch_size,
        };
        break;
      case "structure":
        this.layerSizes = [...msg.layer_sizes];
        break;
      case "audio":
        this.audioTargets = { left: msg.left_freq, right: msg.right_freq };
        break;
      case "error":
        this.errors.push({ code: msg.code, text: msg.text });
        break;
    }
  }

  // -- legality mirror of the session transition table ----------------------

  get isPaused(): boolean {
    return PAUSED_FAMILY.has(this.session);
  }

  canPause(): boolean {
    return this.session === "running";
  }

  canResume(): boolean {
    return this.session !== "running";
  }

  canTuneHyperparams(): boolean {
    return (
      this.session === "running" ||
      this.session === "paused" ||
      this.session === "tuning_hyperparams"
    );
  }

  canAddNeuron(): boolean {
    return this.session === "paused" || this.session === "editing_structure";
  }

  canDragNode(): boolean {
    return (
      this.session === "paused" ||
      this.session === "editing_structure" ||
      this.session === "editing_weights"
    );
  }

  canRemoveNeuron(): boolean {
    return this.canDragNode();
  }

  // -- geometric queries over the mirrored layout ----------------------------

  node(id: number): NodeView | undefined {
    return this.snapshot?.nodes.find((n) => n.id === id);
  }

  nodesOfKind(kind: NodeKindName): NodeView[] {
    return this.snapshot?.nodes.filter((n) => n.kind === kind) ?? [];
  }

  layerCenter(kind: NodeKindName): Vec3 | null {
    const members = this.nodesOfKind(kind);
    if (members.length === 0) return null;
    const sum: [number, number, number] = [0, 0, 0];
    for (const n of members) {
      sum[0] += n.pos[0];
      sum[1] += n.pos[1];
      sum[2] += n.pos[2];
    }
    return [sum[0] / members.length, sum[1] / members.length, sum[2] / members.length];
  }

  centerOfMass(): Vec3 | null {
    const nodes = this.snapshot?.nodes ?? [];
    if (nodes.length === 0) return null;
    const sum: [number, number, number] = [0, 0, 0];
    for (const n of nodes) {
      sum[0] += n.pos[0];
      sum[1] += n.pos[1];
      sum[2] += n.pos[2];
    }
    return [sum[0] / nodes.length, sum[1] / nodes.length, sum[2] / nodes.length];
  }

  nearestNode(point: Vec3, maxDistance: number): NodeView | null {
    let best: NodeView | null = null;
    let bestDistance = maxDistance;
    for (const n of this.snapshot?.nodes ?? []) {
      const d = distance(n.pos, point);
      if (d <= bestDistance) {
        best = n;
        bestDistance = d;
      }
    }
    return best;
  }

  /** Hidden layer (1 or 2) whose center is within `radius` of the point. */
  hiddenLayerNear(point: Vec3, radius: number): 1 | 2 | null {
    for (const [layer, kind] of [[1, "hidden1"], [2, "hidden2"]] as const) {
      const center = this.layerCenter(kind);
      if (center && distance(center, point) <= radius) return layer;
    }
    return null;
  }

  /** Newest node of a kind: fresh ids are always larger than older ones. */
  newestNodeOfKind(kind: NodeKindName): NodeView | null {
    const members = this.nodesOfKind(kind);
    if (members.length === 0) return null;
    return members.reduce((a, b) => (b.id > a.id ? b : a));
  }
}
