/**
 * Runnable agent for the tidysim harness.
 *
 * Subprocess transport (the harness spawns us and speaks over stdio):
 *   tidysim run --episode E --agent "exec:node dist/main.js"
 *
 * Socket transport (we listen, print the port, the harness dials in):
 *   node dist/main.js --listen          # prints "PORT <n>" on stdout
 *   tidysim run --episode E --agent tcp:127.0.0.1:<n>
 *
 * Modes:
 *   --mode greedy        chase pose goals (default)
 *   --mode all-actions   send each action variant once, then stop
 */

import process from "node:process";

import {
  ActionMessage,
  HelloMessage,
  ObservationMessage,
  grab,
  lookDown,
  lookUp,
  moveForward,
  release,
  setJoint,
  stop,
  stow,
  turnLeft,
  turnRight,
  unstow,
} from "./protocol.js";
import { ClientSession, connect, listen } from "./session.js";
import { GreedyAgent } from "./greedy.js";

type Decide = (obs: ObservationMessage) => ActionMessage;

function greedyMode(hello: HelloMessage): Decide {
  const agent = new GreedyAgent(hello);
  return (obs) => agent.decide(obs);
}

/** One of everything, referencing a real object id where one is needed. */
function allActionsMode(hello: HelloMessage): Decide {
  const id = hello.episode.task_ids[0] ?? "obj-0";
  const script: ActionMessage[] = [
    moveForward(),
    turnLeft(),
    turnRight(),
    lookUp(),
    lookDown(),
    grab(),
    release(),
    stow(),
    unstow(id),
    setJoint(id, 0.5),
  ];
  return () => script.shift() ?? stop();
}

async function openSession(listenPort: number | null): Promise<ClientSession> {
  if (listenPort === null) {
    return connect("stdio");
  }
  const server = await listen(listenPort);
  process.stdout.write(`PORT ${server.port}\n`);
  const session = await server.accept();
  server.close();
  return session;
}

async function main(): Promise<void> {
  const args = process.argv.slice(2);
  let mode = "greedy";
  let listenPort: number | null = null;
  for (let i = 0; i < args.length; i += 1) {
    const arg = args[i];
    if (arg === "--mode") {
      mode = args[++i] ?? "";
    } else if (arg === "--listen") {
      const next = args[i + 1];
      listenPort = next !== undefined && /^\d+$/.test(next) ? Number(args[++i]) : 0;
    } else {
      throw new Error(`unknown argument: ${arg}`);
    }
  }
  if (mode !== "greedy" && mode !== "all-actions") {
    throw new Error(`unknown mode: ${mode}`);
  }

  const session = await openSession(listenPort);
  const decide = mode === "all-actions" ? allActionsMode(session.hello) : greedyMode(session.hello);
  const report = await session.runEpisode(decide);
  console.error(
    `episode ${session.hello.episode.episode_id}: ` +
      `success=${String(report.success)} completion=${String(report.completion)} ` +
      `ticks=${String(report.ticks)}`,
  );
  session.close();
  process.exit(0);
}

main().catch((err) => {
  console.error(String(err));
  process.exit(1);
});
