/**
 * Browser wiring: renderer + camera + picking, toolbar controls, audio
 * unlock, and the connection to the training engine's WebSocket port.
 *
 * Serve this directory statically (for example `python -m http.server`
 * after `npm run build`) and start the engine with
 * `aiive train ... --serve 127.0.0.1:8765`; the page connects to the
 * WebSocket transport on port 8766 (base port + 1).
 */

import * as THREE from "three";
import { OrbitControls } from "three/addons/controls/OrbitControls.js";

import { StereoSonifier } from "./audio.js";
import { Connection } from "./connection.js";
import { GestureInterpreter, PointerEvent3D } from "./gestures.js";
import { SonificationMode, Vec3, commands } from "./protocol.js";
import { GraphScene } from "./scene.js";
import { ViewState } from "./state.js";

const params = new URLSearchParams(window.location.search);
const wsUrl = params.get("ws") ?? "ws://127.0.0.1:8766";

const state = new ViewState(() => performance.now());
const connection = new Connection(wsUrl);
const graph = new GraphScene();
const sonifier = new StereoSonifier(
  new AudioContext() as unknown as ConstructorParameters<typeof StereoSonifier>[0],
);
const gestures = new GestureInterpreter(state, (cmd) => connection.send(cmd));

// -- renderer ---------------------------------------------------------------

const canvas = document.getElementById("view") as HTMLCanvasElement;
const renderer = new THREE.WebGLRenderer({ canvas, antialias: true });
renderer.setPixelRatio(window.devicePixelRatio);
const camera = new THREE.PerspectiveCamera(55, 1, 0.01, 100);
camera.position.set(0, 0.8, 3.2);
const controls = new OrbitControls(camera, canvas);
controls.enableDamping = true;

function resize(): void {
  const w = canvas.clientWidth || window.innerWidth;
  const h = canvas.clientHeight || window.innerHeight - 64;
  renderer.setSize(w, h, false);
  camera.aspect = w / h;
  camera.updateProjectionMatrix();
}
window.addEventListener("resize", resize);

// -- picking: pointer -> layout-space point ----------------------------------

const raycaster = new THREE.Raycaster();
const pointerNdc = new THREE.Vector2();
const dragPlane = new THREE.Plane();
let dragAnchor = new THREE.Vector3();

function ndcFromEvent(event: PointerEvent): void {
  const rect = canvas.getBoundingClientRect();
  pointerNdc.x = ((event.clientX - rect.left) / rect.width) * 2 - 1;
  pointerNdc.y = -((event.clientY - rect.top) / rect.height) * 2 + 1;
}

function pickNode(event: PointerEvent): number | null {
  ndcFromEvent(event);
  raycaster.setFromCamera(pointerNdc, camera);
  const hits = raycaster.intersectObjects(graph.pickables(), false);
  return hits.length ? graph.nodeIdOf(hits[0].object) : null;
}

/** Project the pointer onto the camera-facing plane through the anchor. */
function pointOnDragPlane(event: PointerEvent): Vec3 {
  ndcFromEvent(event);
  raycaster.setFromCamera(pointerNdc, camera);
  dragPlane.setFromNormalAndCoplanarPoint(
    camera.getWorldDirection(new THREE.Vector3()),
    dragAnchor,
  );
  const hit = new THREE.Vector3();
  raycaster.ray.intersectPlane(dragPlane, hit);
  return [hit.x, hit.y, hit.z];
}

function toGesture(kind: PointerEvent3D["kind"], event: PointerEvent): PointerEvent3D {
  const nodeId = kind === "down" ? pickNode(event) : null;
  if (kind === "down") {
    const node = nodeId !== null ? state.node(nodeId) : null;
    if (node) {
      dragAnchor = new THREE.Vector3(...node.pos);
    } else {
      const com = state.centerOfMass();
      dragAnchor = com ? new THREE.Vector3(...com) : new THREE.Vector3();
    }
  }
  return { kind, point: pointOnDragPlane(event), nodeId, timeMs: performance.now() };
}

let pointerHeld = false;
canvas.addEventListener("pointerdown", (event) => {
  sonifier.unlock();
  const gesture = toGesture("down", event);
  pointerHeld = gesture.nodeId !== null || state.hiddenLayerNear(gesture.point, 1.0) !== null;
  if (pointerHeld && state.canDragNode()) {
    controls.enabled = false; // node drags beat camera orbit
    gestures.handle(gesture);
  }
});
canvas.addEventListener("pointermove", (event) => {
  if (pointerHeld) {
    gestures.handle(toGesture("move", event));
  } else {
    state.hoveredNodeId = pickNode(event);
  }
});
window.addEventListener("pointerup", (event) => {
  if (pointerHeld) {
    gestures.handle(toGesture("up", event));
    pointerHeld = false;
  }
  controls.enabled = true;
});

// -- toolbar ------------------------------------------------------------------

const el = <T extends HTMLElement>(id: string): T =>
  document.getElementById(id) as T;

const pauseButton = el<HTMLButtonElement>("pause");
const resumeButton = el<HTMLButtonElement>("resume");
const lrSlider = el<HTMLInputElement>("lr");
const momentumSlider = el<HTMLInputElement>("momentum");
const modeSelect = el<HTMLSelectElement>("mode");
const statusLine = el<HTMLSpanElement>("status");

pauseButton.addEventListener("click", () => {
  sonifier.unlock();
  if (state.canPause()) connection.send(commands.pause());
});
resumeButton.addEventListener("click", () => {
  sonifier.unlock();
  if (state.canResume()) connection.send(commands.resume());
});

// Log-scale learning-rate slider over [1e-4, 1]; momentum linear [0, 0.999].
const lrFromSlider = (s: number): number => 10 ** (-4 + 4 * s);
const sliderFromLr = (lr: number): number => (Math.log10(lr) + 4) / 4;

function sendHyperparams(): void {
  if (!state.canTuneHyperparams()) return;
  connection.send(
    commands.setHyperparams(
      lrFromSlider(Number(lrSlider.value)),
      Number(momentumSlider.value),
    ),
  );
}
lrSlider.addEventListener("input", () => {
  sonifier.unlock();
  sendHyperparams();
});
momentumSlider.addEventListener("input", () => {
  sonifier.unlock();
  sendHyperparams();
});

modeSelect.addEventListener("change", () => {
  sonifier.unlock();
  connection.send(commands.setSonification(modeSelect.value as SonificationMode));
});

// -- server events -------------------------------------------------------------

connection.onMessage((msg) => {
  state.apply(msg);
  if (msg.type === "hello") {
    connection.send(commands.helloAck());
    lrSlider.value = String(sliderFromLr(msg.hyperparams.learning_rate));
    momentumSlider.value = String(msg.hyperparams.momentum);
    modeSelect.value = msg.sonification.mode;
  } else if (msg.type === "audio") {
    sonifier.setTargets(msg.left_freq, msg.right_freq);
  } else if (msg.type === "hyperparams") {
    lrSlider.value = String(sliderFromLr(msg.learning_rate));
    momentumSlider.value = String(msg.momentum);
  } else if (msg.type === "error") {
    console.warn(`server error [${msg.code}]: ${msg.text}`);
  }
});

connection.onStatus((status) => {
  if (status === "closed") sonifier.fadeOut();
});

// -- frame loop -----------------------------------------------------------------

function describe(): string {
  const m = state.metrics;
  const metricText = m
    ? ` | epoch ${m.epoch ?? "-"} acc ${m.accuracy.toFixed(3)} loss ${m.loss.toFixed(3)}`
    : "";
  return `${connection.status} | ${state.session}${metricText}`;
}

function frame(): void {
  requestAnimationFrame(frame);
  graph.update(state, performance.now());
  controls.update();
  statusLine.textContent = describe();
  pauseButton.disabled = !state.canPause();
  resumeButton.disabled = !state.canResume();
  renderer.render(graph.scene, camera);
}

resize();
frame();
