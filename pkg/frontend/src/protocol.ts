/**
 * Wire message schemas (zod) and command builders. The transport carries one
 * JSON object per WebSocket text frame; every message has a string `type`
 * and an integer `seq`, strictly increasing per direction.
 */

import { z } from "zod";

export type SessionStateName =
  | "running"
  | "paused"
  | "editing_structure"
  | "editing_weights"
  | "tuning_hyperparams";

export type SonificationMode = "accuracy" | "split" | "loss";

export type NodeKindName = "input" | "hidden1" | "hidden2" | "output";

const vec3 = z.tuple([z.number(), z.number(), z.number()]);
export type Vec3 = z.infer<typeof vec3>;

const seqField = z.number().int().nonnegative();

export const helloSchema = z.object({
  type: z.literal("hello"),
  seq: seqField,
  protocol_version: z.number().int(),
  layer_sizes: z.array(z.number().int()).length(4),
  hyperparams: z.object({
    learning_rate: z.number(),
    momentum: z.number(),
    batch_size: z.number().int(),
  }),
  sonification: z.object({
    mode: z.enum(["accuracy", "split", "loss"]),
    mappings: z.record(
      z.string(),
      z.object({
        f_min: z.number(),
        f_max: z.number(),
        domain_min: z.number(),
        domain_max: z.number(),
        scale: z.enum(["linear", "log"]),
      }),
    ),
  }),
});

export const stateSchema = z.object({
  type: z.literal("state"),
  seq: seqField,
  value: z.enum([
    "running",
    "paused",
    "editing_structure",
    "editing_weights",
    "tuning_hyperparams",
  ]),
});

const matrixSchema = z.object({
  rows: z.number().int(),
  cols: z.number().int(),
  data: z.array(z.number()),
});

export const epochSchema = z.object({
  type: z.literal("epoch"),
  seq: seqField,
  epoch: z.number().int(),
  accuracy: z.number(),
  loss: z.number(),
  weights: z.object({
    w1: matrixSchema,
    w2: matrixSchema,
    w3: matrixSchema,
    b1: z.array(z.number()),
    b2: z.array(z.number()),
    b3: z.array(z.number()),
  }),
});

export const layoutSchema = z.object({
  type: z.literal("layout"),
  seq: seqField,
  nodes: z.array(
    z.object({
      id: z.number().int(),
      kind: z.enum(["input", "hidden1", "hidden2", "output"]),
      pos: vec3,
    }),
  ),
  edges: z.array(
    z.object({ a: z.number().int(), b: z.number().int(), w: z.number() }),
  ),
});

export const hyperparamsSchema = z.object({
  type: z.literal("hyperparams"),
  seq: seqField,
  learning_rate: z.number(),
  momentum: z.number(),
  batch_size: z.number().int(),
});

export const structureSchema = z.object({
  type: z.literal("structure"),
  seq: seqField,
  layer_sizes: z.array(z.number().int()).length(4),
});

export const evalSchema = z.object({
  type: z.literal("eval"),
  seq: seqField,
  accuracy: z.number(),
  loss: z.number(),
});

export const audioSchema = z.object({
  type: z.literal("audio"),
  seq: seqField,
  left_freq: z.number(),
  right_freq: z.number(),
});

export const errorSchema = z.object({
  type: z.literal("error"),
  seq: seqField,
  code: z.string(),
  text: z.string(),
});

export const serverMessageSchema = z.discriminatedUnion("type", [
  helloSchema,
  stateSchema,
  epochSchema,
  layoutSchema,
  hyperparamsSchema,
  structureSchema,
  evalSchema,
  audioSchema,
  errorSchema,
]);

export type HelloMessage = z.infer<typeof helloSchema>;
export type StateMessage = z.infer<typeof stateSchema>;
export type EpochMessage = z.infer<typeof epochSchema>;
export type LayoutMessage = z.infer<typeof layoutSchema>;
export type HyperparamsMessage = z.infer<typeof hyperparamsSchema>;
export type StructureMessage = z.infer<typeof structureSchema>;
export type EvalMessage = z.infer<typeof evalSchema>;
export type AudioMessage = z.infer<typeof audioSchema>;
export type ErrorMessage = z.infer<typeof errorSchema>;
export type ServerMessage = z.infer<typeof serverMessageSchema>;

/** Command bodies, before the connection stamps a seq. */
export type CommandBody =
  | { type: "hello_ack" }
  | { type: "pause" }
  | { type: "resume" }
  | { type: "set_hyperparams"; learning_rate: number; momentum: number }
  | { type: "add_neuron"; layer: 1 | 2; position: Vec3 }
  | { type: "remove_neuron"; layer: 1 | 2; node_id: number; position: Vec3 }
  | { type: "drag_node"; node_id: number; position: Vec3 }
  | { type: "release_node"; node_id: number }
  | { type: "set_sonification"; mode: SonificationMode }
  | { type: "evaluate_now" };

export const commands = {
  helloAck: (): CommandBody => ({ type: "hello_ack" }),
  pause: (): CommandBody => ({ type: "pause" }),
  resume: (): CommandBody => ({ type: "resume" }),
  setHyperparams: (learningRate: number, momentum: number): CommandBody => ({
    type: "set_hyperparams",
    learning_rate: learningRate,
    momentum,
  }),
  addNeuron: (layer: 1 | 2, position: Vec3): CommandBody => ({
    type: "add_neuron",
    layer,
    position,
  }),
  removeNeuron: (layer: 1 | 2, nodeId: number, position: Vec3): CommandBody => ({
    type: "remove_neuron",
    layer,
    node_id: nodeId,
    position,
  }),
  dragNode: (nodeId: number, position: Vec3): CommandBody => ({
    type: "drag_node",
    node_id: nodeId,
    position,
  }),
  releaseNode: (nodeId: number): CommandBody => ({
    type: "release_node",
    node_id: nodeId,
  }),
  setSonification: (mode: SonificationMode): CommandBody => ({
    type: "set_sonification",
    mode,
  }),
  evaluateNow: (): CommandBody => ({ type: "evaluate_now" }),
};

/**
 * Channel routing table (mirror of the server's): AccuracyBoth plays the
 * accuracy tone on both channels, Split puts loss left / accuracy right,
 * LossBoth plays loss on both.
 */
export function routeForMode(
  mode: SonificationMode,
  freqAccuracy: number,
  freqLoss: number,
): [number, number] {
  switch (mode) {
    case "accuracy":
      return [freqAccuracy, freqAccuracy];
    case "split":
      return [freqLoss, freqAccuracy];
    case "loss":
      return [freqLoss, freqLoss];
  }
}
