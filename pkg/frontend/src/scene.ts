/**
 * three.js scene for the force graph: glowing spheres per node (input red,
 * hidden1 blue, hidden2 yellow, output green), one line per weight edge
 * whose opacity IS |normalized weight| (the weaker the weight, the more
 * transparent the link), and a small white indicator sphere at the graph's
 * center whenever training is not running.
 *
 * Positions interpolate between the two latest 20 Hz snapshots so motion
 * stays smooth at display rate. Construction never touches WebGL: the
 * renderer is the caller's concern, which keeps this testable headless.
 */

import * as THREE from "three";

import { NodeKindName, Vec3 } from "./protocol.js";
import { ViewState } from "./state.js";

export const KIND_COLORS: Record<NodeKindName, number> = {
  input: 0xe04a3f, // red
  hidden1: 0x3f6fe0, // blue
  hidden2: 0xe0c53f, // yellow
  output: 0x3fb764, // green
};

export const NODE_RADIUS = 0.07;
export const AGGREGATE_RADIUS = 0.12;
export const INDICATOR_RADIUS = 0.1;
const SNAPSHOT_INTERVAL_MS = 50; // layout frames arrive at 20 Hz

export class GraphScene {
  readonly scene: THREE.Scene;
  readonly root: THREE.Group;
  private nodeMeshes = new Map<number, THREE.Mesh>();
  private edgeLines: Array<{ line: THREE.Line; a: number; b: number }> = [];
  private indicator: THREE.Mesh;
  private sphereGeometry: THREE.SphereGeometry;
  private aggregateGeometry: THREE.SphereGeometry;

  constructor() {
    this.scene = new THREE.Scene();
    this.root = new THREE.Group();
    this.scene.add(this.root);
    this.scene.add(new THREE.AmbientLight(0xffffff, 0.7));
    const key = new THREE.DirectionalLight(0xffffff, 1.2);
    key.position.set(3, 5, 4);
    this.scene.add(key);

    this.sphereGeometry = new THREE.SphereGeometry(NODE_RADIUS, 24, 16);
    this.aggregateGeometry = new THREE.SphereGeometry(AGGREGATE_RADIUS, 24, 16);
    this.indicator = new THREE.Mesh(
      new THREE.SphereGeometry(INDICATOR_RADIUS, 24, 16),
      new THREE.MeshStandardMaterial({
        color: 0xffffff,
        emissive: 0xffffff,
        emissiveIntensity: 0.6,
      }),
    );
    this.indicator.visible = false;
    this.scene.add(this.indicator);
  }

  nodeMesh(id: number): THREE.Mesh | undefined {
    return this.nodeMeshes.get(id);
  }

  get edges(): ReadonlyArray<{ line: THREE.Line; a: number; b: number }> {
    return this.edgeLines;
  }

  get pausedIndicator(): THREE.Mesh {
    return this.indicator;
  }

  /** Meshes whose picking should hit-test (the node spheres). */
  pickables(): THREE.Mesh[] {
    return [...this.nodeMeshes.values()];
  }

  nodeIdOf(object: THREE.Object3D): number | null {
    const id = object.userData.nodeId;
    return typeof id === "number" ? id : null;
  }

  /** Sync meshes with the mirrored state; `nowMs` drives interpolation. */
  update(state: ViewState, nowMs: number): void {
    const snapshot = state.snapshot;
    if (!snapshot) return;

    const positions = this.interpolatedPositions(state, nowMs);

    const seen = new Set<number>();
    for (const node of snapshot.nodes) {
      seen.add(node.id);
      let mesh = this.nodeMeshes.get(node.id);
      if (!mesh) {
        const aggregate = node.kind === "input" || node.kind === "output";
        mesh = new THREE.Mesh(
          aggregate ? this.aggregateGeometry : this.sphereGeometry,
          new THREE.MeshStandardMaterial({
            color: KIND_COLORS[node.kind],
            emissive: KIND_COLORS[node.kind],
            emissiveIntensity: 0.45,
          }),
        );
        mesh.userData.nodeId = node.id;
        this.nodeMeshes.set(node.id, mesh);
        this.root.add(mesh);
      }
      const p = positions.get(node.id) ?? node.pos;
      mesh.position.set(p[0], p[1], p[2]);
      const hovered = state.hoveredNodeId === node.id || state.draggedNodeId === node.id;
      (mesh.material as THREE.MeshStandardMaterial).emissiveIntensity = hovered ? 0.9 : 0.45;
    }
    for (const [id, mesh] of this.nodeMeshes) {
      if (!seen.has(id)) {
        this.root.remove(mesh);
        (mesh.material as THREE.Material).dispose();
        this.nodeMeshes.delete(id);
      }
    }

    this.syncEdges(snapshot.edges.length);
    snapshot.edges.forEach((edge, i) => {
      const entry = this.edgeLines[i];
      entry.a = edge.a;
      entry.b = edge.b;
      const pa = positions.get(edge.a);
      const pb = positions.get(edge.b);
      if (pa && pb) {
        const geo = entry.line.geometry as THREE.BufferGeometry;
        geo.setFromPoints([
          new THREE.Vector3(...pa),
          new THREE.Vector3(...pb),
        ]);
      }
      const material = entry.line.material as THREE.LineBasicMaterial;
      material.opacity = Math.abs(edge.w); // |norm weight| IS the alpha
    });

    const center = state.centerOfMass();
    this.indicator.visible = state.session !== "running" && center !== null;
    if (center) this.indicator.position.set(center[0], center[1], center[2]);
  }

  private syncEdges(count: number): void {
    while (this.edgeLines.length < count) {
      const line = new THREE.Line(
        new THREE.BufferGeometry(),
        new THREE.LineBasicMaterial({ color: 0xffffff, transparent: true, opacity: 1 }),
      );
      this.edgeLines.push({ line, a: -1, b: -1 });
      this.root.add(line);
    }
    while (this.edgeLines.length > count) {
      const entry = this.edgeLines.pop()!;
      this.root.remove(entry.line);
      entry.line.geometry.dispose();
      (entry.line.material as THREE.Material).dispose();
    }
  }

  private interpolatedPositions(state: ViewState, nowMs: number): Map<number, Vec3> {
    const out = new Map<number, Vec3>();
    const current = state.snapshot!;
    const previous = state.previousSnapshot;
    let t = 1;
    if (previous) {
      t = Math.min(1, Math.max(0, (nowMs - current.receivedAtMs) / SNAPSHOT_INTERVAL_MS));
    }
    const before = new Map(previous?.nodes.map((n) => [n.id, n.pos]) ?? []);
    for (const node of current.nodes) {
      const from = before.get(node.id);
      if (!from || t >= 1) {
        out.set(node.id, node.pos);
      } else {
        out.set(node.id, [
          from[0] + (node.pos[0] - from[0]) * t,
          from[1] + (node.pos[1] - from[1]) * t,
          from[2] + (node.pos[2] - from[2]) * t,
        ]);
      }
    }
    return out;
  }
}
