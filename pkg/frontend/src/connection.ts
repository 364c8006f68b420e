/**
 * WebSocket connection: stamps outgoing seqs, validates incoming messages,
 * fans them out to handlers. The socket is injected so tests (and the node
 * harness) can supply their own implementation.
 */

import {
  CommandBody,
  ServerMessage,
  serverMessageSchema,
} from "./protocol.js";

export type ConnectionStatus = "connecting" | "open" | "closed";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  set onopen(handler: () => void);
  set onmessage(handler: (event: { data: unknown }) => void);
  set onclose(handler: () => void);
}

export type SocketFactory = (url: string) => SocketLike;

const browserSocketFactory: SocketFactory = (url) =>
  new WebSocket(url) as unknown as SocketLike;

export class Connection {
  status: ConnectionStatus = "connecting";
  private socket: SocketLike;
  private seq = 0;
  private messageHandlers: Array<(msg: ServerMessage) => void> = [];
  private statusHandlers: Array<(status: ConnectionStatus) => void> = [];
  private sendHandlers: Array<(cmd: CommandBody) => void> = [];

  constructor(url: string, factory: SocketFactory = browserSocketFactory) {
    this.socket = factory(url);
    this.socket.onopen = () => this.setStatus("open");
    this.socket.onclose = () => this.setStatus("closed");
    this.socket.onmessage = (event) => this.receive(event.data);
  }

  onMessage(handler: (msg: ServerMessage) => void): void {
    this.messageHandlers.push(handler);
  }

  onStatus(handler: (status: ConnectionStatus) => void): void {
    this.statusHandlers.push(handler);
  }

  /** Observe outgoing commands (scene-free tests assert on these). */
  onSend(handler: (cmd: CommandBody) => void): void {
    this.sendHandlers.push(handler);
  }

  send(command: CommandBody): void {
    if (this.status !== "open") return;
    const envelope = { ...command, seq: this.seq++ };
    this.socket.send(JSON.stringify(envelope));
    for (const handler of this.sendHandlers) handler(command);
  }

  close(): void {
    this.socket.close();
  }

  private setStatus(status: ConnectionStatus): void {
    this.status = status;
    for (const handler of this.statusHandlers) handler(status);
  }

  private receive(data: unknown): void {
    if (typeof data !== "string") return;
    let raw: unknown;
    try {
      raw = JSON.parse(data);
    } catch {
      return; // never let a malformed frame poison the mirror
    }
    const parsed = serverMessageSchema.safeParse(raw);
    if (!parsed.success) return;
    for (const handler of this.messageHandlers) handler(parsed.data);
  }
}
