/**
 * Agent-side session management: transports, handshake, and the
 * one-action-per-observation conversation rhythm.
 *
 * The harness always dials the agent, so a client either speaks over its
 * own stdio (subprocess transport) or listens on a TCP port and accepts
 * a single connection (socket transport).
 */

import net from "node:net";
import { createInterface } from "node:readline";
import type { Readable, Writable } from "node:stream";

import {
  ActionMessage,
  DoneMessage,
  ErrorMessage,
  GoalDoc,
  HelloMessage,
  ObservationMessage,
  PROTOCOL_VERSION,
  ProtocolError,
  clientHello,
  decodeServerLine,
  encodeLine,
  errorMessage,
} from "./protocol.js";

/** Buffers incoming lines so the session can await them one at a time. */
class LineQueue {
  private lines: string[] = [];
  private waiters: Array<(line: string | null) => void> = [];
  private ended = false;

  constructor(input: Readable) {
    const reader = createInterface({ input, crlfDelay: Infinity });
    reader.on("line", (line) => {
      const waiter = this.waiters.shift();
      if (waiter) waiter(line);
      else this.lines.push(line);
    });
    reader.on("close", () => {
      this.ended = true;
      for (const waiter of this.waiters.splice(0)) waiter(null);
    });
  }

  next(): Promise<string | null> {
    const queued = this.lines.shift();
    if (queued !== undefined) return Promise.resolve(queued);
    if (this.ended) return Promise.resolve(null);
    return new Promise((resolve) => this.waiters.push(resolve));
  }
}

export type SessionEvent = ObservationMessage | DoneMessage | ErrorMessage;

export class ClientSession {
  readonly hello: HelloMessage;
  lastObservation: ObservationMessage | null = null;
  /** Final report once a done message has arrived. */
  report: Record<string, unknown> | null = null;

  private canReply = false;
  private finished = false;

  private constructor(
    hello: HelloMessage,
    private readonly lines: LineQueue,
    private readonly output: Writable,
    private readonly shutdown: () => void,
  ) {
    this.hello = hello;
  }

  /**
   * Perform the handshake over an established byte stream. Announces our
   * protocol version, then waits for the harness hello and rejects the
   * connection if the versions disagree.
   */
  static async open(
    input: Readable,
    output: Writable,
    shutdown: () => void = () => {},
  ): Promise<ClientSession> {
    const lines = new LineQueue(input);
    output.write(encodeLine(clientHello()));
    const first = await lines.next();
    if (first === null) {
      throw new ProtocolError("connection closed before the harness hello");
    }
    const msg = decodeServerLine(first);
    if (msg.kind === "error") {
      throw new ProtocolError(`harness refused the session: ${msg.code}: ${msg.text}`);
    }
    if (msg.kind !== "hello") {
      throw new ProtocolError(`expected hello, got ${msg.kind}`);
    }
    if (msg.version !== PROTOCOL_VERSION) {
      output.write(
        encodeLine(
          errorMessage(
            "version-mismatch",
            `client speaks version ${PROTOCOL_VERSION}, harness offered ${msg.version}`,
          ),
        ),
      );
      shutdown();
      throw new ProtocolError(`unsupported protocol version: ${msg.version}`);
    }
    return new ClientSession(msg, lines, output, shutdown);
  }

  get goal(): GoalDoc {
    return this.hello.goal;
  }

  get done(): boolean {
    return this.finished;
  }

  /**
   * Wait for the next harness message. Observations are also recorded on
   * lastObservation; done and error both end the session.
   */
  async next(): Promise<SessionEvent> {
    if (this.finished) {
      throw new ProtocolError("session is already finished");
    }
    const line = await this.lines.next();
    if (line === null) {
      this.finished = true;
      throw new ProtocolError("connection closed mid-episode");
    }
    const msg = decodeServerLine(line);
    switch (msg.kind) {
      case "observation":
        this.lastObservation = msg;
        this.canReply = true;
        return msg;
      case "done":
        this.finished = true;
        this.report = msg.report;
        return msg;
      case "error":
        this.finished = true;
        return msg;
      case "hello":
        throw new ProtocolError("unexpected second hello");
    }
  }

  /** Reply to the pending observation. Exactly one action per observation. */
  sendAction(doc: ActionMessage): void {
    if (this.finished) {
      throw new ProtocolError("cannot act on a finished session");
    }
    if (!this.canReply) {
      throw new ProtocolError("no observation is awaiting a reply");
    }
    this.output.write(encodeLine(doc));
    this.canReply = false;
  }

  /** Tell the harness we are giving up, then drop the connection. */
  abandon(code: string, text: string): void {
    this.output.write(encodeLine(errorMessage(code, text)));
    this.finished = true;
    this.shutdown();
  }

  close(): void {
    this.shutdown();
  }

  /**
   * Drive a whole episode with a decision callback. Resolves with the final
   * report, or rejects if the harness reports an error first.
   */
  async runEpisode(
    decide: (obs: ObservationMessage) => ActionMessage,
  ): Promise<Record<string, unknown>> {
    for (;;) {
      const event = await this.next();
      if (event.kind === "observation") {
        this.sendAction(decide(event));
      } else if (event.kind === "done") {
        return event.report;
      } else {
        throw new ProtocolError(`harness error ${event.code}: ${event.text}`);
      }
    }
  }
}

/** Open a session over this process's own stdin/stdout. */
export function connect(endpoint: "stdio"): Promise<ClientSession> {
  if (endpoint !== "stdio") {
    throw new ProtocolError(`unknown endpoint: ${endpoint}`);
  }
  return ClientSession.open(process.stdin, process.stdout, () => process.stdout.end());
}

export interface AgentServer {
  port: number;
  /** Wait for the harness to dial in, then complete the handshake. */
  accept(): Promise<ClientSession>;
  close(): void;
}

/** Listen for a harness connection; port 0 picks a free port. */
export function listen(port = 0, host = "127.0.0.1"): Promise<AgentServer> {
  return new Promise((resolve, reject) => {
    const server = net.createServer();
    const pending: net.Socket[] = [];
    const waiters: Array<(sock: net.Socket) => void> = [];
    server.on("connection", (sock) => {
      const waiter = waiters.shift();
      if (waiter) waiter(sock);
      else pending.push(sock);
    });
    server.on("error", reject);
    server.listen(port, host, () => {
      const address = server.address() as net.AddressInfo;
      resolve({
        port: address.port,
        accept(): Promise<ClientSession> {
          const sock = pending.shift();
          const socket = sock
            ? Promise.resolve(sock)
            : new Promise<net.Socket>((res) => waiters.push(res));
          return socket.then((s) => ClientSession.open(s, s, () => s.destroy()));
        },
        close(): void {
          server.close();
        },
      });
    });
  });
}
