import { describe, expect, it } from "vitest";

import {
  commands,
  routeForMode,
  serverMessageSchema,
} from "../src/protocol.js";

describe("server message schemas", () => {
  it("accepts a layout frame", () => {
    const msg = {
      type: "layout",
      seq: 4,
      nodes: [{ id: 0, kind: "input", pos: [0.1, -0.2, 0.3] }],
      edges: [{ a: 0, b: 1, w: -0.5 }],
    };
    const parsed = serverMessageSchema.parse(msg);
    expect(parsed.type).toBe("layout");
  });

  it("accepts state, eval, audio and error messages", () => {
    for (const msg of [
      { type: "state", seq: 0, value: "editing_weights" },
      { type: "eval", seq: 1, accuracy: 0.5, loss: 1.9 },
      { type: "audio", seq: 2, left_freq: 220, right_freq: 880 },
      { type: "error", seq: 3, code: "threshold", text: "too far" },
    ]) {
      expect(serverMessageSchema.safeParse(msg).success).toBe(true);
    }
  });

  it("rejects unknown types and malformed payloads", () => {
    expect(serverMessageSchema.safeParse({ type: "warp", seq: 0 }).success).toBe(false);
    expect(
      serverMessageSchema.safeParse({ type: "state", seq: 0, value: "melted" }).success,
    ).toBe(false);
    expect(
      serverMessageSchema.safeParse({ type: "layout", seq: -1, nodes: [], edges: [] }).success,
    ).toBe(false);
  });
});

describe("command builders", () => {
  it("build wire-shaped bodies", () => {
    expect(commands.pause()).toEqual({ type: "pause" });
    expect(commands.addNeuron(1, [0, 1, 2])).toEqual({
      type: "add_neuron",
      layer: 1,
      position: [0, 1, 2],
    });
    expect(commands.setHyperparams(0.01, 0.8)).toEqual({
      type: "set_hyperparams",
      learning_rate: 0.01,
      momentum: 0.8,
    });
    expect(commands.removeNeuron(2, 7, [1, 1, 1])).toEqual({
      type: "remove_neuron",
      layer: 2,
      node_id: 7,
      position: [1, 1, 1],
    });
  });
});

describe("channel routing table", () => {
  it("matches the sonification table", () => {
    expect(routeForMode("accuracy", 550, 300)).toEqual([550, 550]);
    expect(routeForMode("split", 550, 300)).toEqual([300, 550]);
    expect(routeForMode("loss", 550, 300)).toEqual([300, 300]);
  });
});
