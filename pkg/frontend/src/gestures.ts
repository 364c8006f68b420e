/**
 * Pointer gestures to wire commands, mirroring the hand-gesture semantics:
 * while paused, a drag starting within 1 layout unit of a hidden layer's
 * center spawns a neuron there; dropping a dragged hidden node back within
 * 1 unit of its layer center deletes it; any other drag streams weight
 * edits at up to 30 Hz and evaluates on release. Nothing is emitted while
 * the session is running.
 */

import { CommandBody, NodeKindName, Vec3, commands } from "./protocol.js";
import { ViewState, distance } from "./state.js";

export const EDIT_RADIUS = 1.0; // layout units, same as the server-side check
export const DRAG_RATE_HZ = 30;

export interface PointerEvent3D {
  kind: "down" | "move" | "up";
  /** Pointer position mapped into layout space by the scene's picking. */
  point: Vec3;
  /** Node under the pointer at `down` time, if any. */
  nodeId: number | null;
  timeMs: number;
}

const KIND_FOR_LAYER: Record<1 | 2, NodeKindName> = { 1: "hidden1", 2: "hidden2" };

export class GestureInterpreter {
  private state: ViewState;
  private send: (cmd: CommandBody) => void;
  private minDragIntervalMs: number;

  private draggingId: number | null = null;
  private pendingSpawnLayer: 1 | 2 | null = null;
  private pointerDown = false;
  private lastDragSentMs = -Infinity;
  private dragMovesSent = 0;

  constructor(
    state: ViewState,
    send: (cmd: CommandBody) => void,
    rateHz: number = DRAG_RATE_HZ,
  ) {
    this.state = state;
    this.send = send;
    this.minDragIntervalMs = 1000 / rateHz;
  }

  get draggedNodeId(): number | null {
    return this.draggingId;
  }

  /** Called by the state mirror after layout updates so a spawn started
   * before the server confirmed it can pick up its new node. */
  adoptSpawnedNode(): void {
    if (!this.pointerDown || this.pendingSpawnLayer === null) return;
    const kind = KIND_FOR_LAYER[this.pendingSpawnLayer];
    const expected = this.state.layerSizes[this.pendingSpawnLayer];
    if (this.state.nodesOfKind(kind).length !== expected) return;
    const newest = this.state.newestNodeOfKind(kind);
    if (newest) {
      this.draggingId = newest.id;
      this.state.draggedNodeId = newest.id;
      this.pendingSpawnLayer = null;
    }
  }

  handle(event: PointerEvent3D): void {
    switch (event.kind) {
      case "down":
        this.onDown(event);
        break;
      case "move":
        this.onMove(event);
        break;
      case "up":
        this.onUp(event);
        break;
    }
  }

  private onDown(event: PointerEvent3D): void {
    this.pointerDown = true;
    this.dragMovesSent = 0;
    if (!this.state.canDragNode()) return; // running: pause first

    if (event.nodeId !== null && this.state.node(event.nodeId)) {
      this.draggingId = event.nodeId;
      this.state.draggedNodeId = event.nodeId;
      return;
    }
    const layer = this.state.hiddenLayerNear(event.point, EDIT_RADIUS);
    if (layer !== null && this.state.canAddNeuron()) {
      this.send(commands.addNeuron(layer, event.point));
      this.pendingSpawnLayer = layer; // node id arrives with the next layout
    }
  }

  private onMove(event: PointerEvent3D): void {
    if (!this.pointerDown) return;
    this.adoptSpawnedNode();
    if (this.draggingId === null || !this.state.canDragNode()) return;
    if (event.timeMs - this.lastDragSentMs < this.minDragIntervalMs) return;
    this.lastDragSentMs = event.timeMs;
    this.dragMovesSent += 1;
    this.send(commands.dragNode(this.draggingId, event.point));
  }

  private onUp(event: PointerEvent3D): void {
    this.pointerDown = false;
    this.pendingSpawnLayer = null;
    const id = this.draggingId;
    this.draggingId = null;
    this.state.draggedNodeId = null;
    if (id === null) return;

    const node = this.state.node(id);
    if (node && (node.kind === "hidden1" || node.kind === "hidden2")) {
      const layer = node.kind === "hidden1" ? 1 : 2;
      const center = this.state.layerCenter(node.kind);
      if (
        center &&
        distance(event.point, center) <= EDIT_RADIUS &&
        this.state.canRemoveNeuron()
      ) {
        this.send(commands.removeNeuron(layer, id, event.point));
        return;
      }
    }
    // A release is only meaningful once a drag actually streamed; a plain
    // click must not emit a release the session would reject.
    if (this.dragMovesSent > 0 && this.state.canDragNode()) {
      this.send(commands.releaseNode(id));
    }
  }
}
