/**
 * Wire types and codecs for the tidysim harness protocol.
 *
 * Every message is one JSON object per line (newline-delimited, UTF-8).
 * The harness serializes with sorted keys and no whitespace, and this
 * module does the same so that encoded client messages are byte-for-byte
 * reproducible.
 */

export const PROTOCOL_VERSION = "1";

export class ProtocolError extends Error {}

export type Vec3 = [number, number, number];
export type Quat = [number, number, number, number];

export interface PoseDoc {
  t: Vec3;
  q: Quat;
}

export interface ToleranceDoc {
  translation: number;
  rotation: number;
  min_iou: number | null;
  open: number;
}

export interface NoiseDoc {
  pose_sigma: number;
  odom_drift_per_m: number;
  odom_heading_drift: number;
}

export interface ViewDoc {
  fov: number;
  crosshair_pitch: number;
  eye_height: number;
  sense_range: number;
}

export interface EpisodeMeta {
  episode_id: string;
  max_ticks: number;
  task_ids: string[];
  carry_capacity: number;
  pick_range: number;
  view: ViewDoc;
  noise: NoiseDoc;
}

export interface GeometricTargetDoc {
  pose: PoseDoc;
  open: number | null;
  tolerance: ToleranceDoc;
}

export interface GeometricGoalDoc {
  kind: "geometric";
  targets: Record<string, GeometricTargetDoc>;
}

/** Thresholds may be redacted to `?` when the episode hides them. */
export interface PredicateGoalDoc {
  kind: "predicate";
  program: string;
  thresholds_hidden?: boolean;
}

export interface ExperienceGoalDoc {
  kind: "experience";
  exploration_budget: number;
}

export type GoalDoc = GeometricGoalDoc | PredicateGoalDoc | ExperienceGoalDoc;

export interface HelloMessage {
  kind: "hello";
  version: string;
  episode: EpisodeMeta;
  goal: GoalDoc;
}

export interface VisibleObjectDoc {
  id: string;
  category: string;
  position: Vec3;
  rotation: Quat;
  open_fraction: number | null;
}

export interface ObservationMessage {
  kind: "observation";
  phase: "explore" | "score";
  tick: number;
  position: [number, number];
  heading: number;
  pitch: number;
  held: string | null;
  haptic: boolean;
  last_action_ok: boolean;
  visible: VisibleObjectDoc[];
}

export interface DoneMessage {
  kind: "done";
  report: Record<string, unknown>;
}

export interface ErrorMessage {
  kind: "error";
  code: string;
  text: string;
}

export type ActionName =
  | "move_forward"
  | "turn_left"
  | "turn_right"
  | "look_up"
  | "look_down"
  | "grab"
  | "release"
  | "stow"
  | "unstow"
  | "set_joint"
  | "stop";

export interface ActionMessage {
  kind: "action";
  name: ActionName;
  id?: string;
  fraction?: number;
}

export interface ClientHello {
  kind: "hello";
  version: string;
}

export type ServerMessage = HelloMessage | ObservationMessage | DoneMessage | ErrorMessage;
export type ClientMessage = ClientHello | ActionMessage | ErrorMessage;

const SERVER_KINDS = new Set(["hello", "observation", "done", "error"]);

export const ACTION_NAMES: readonly ActionName[] = [
  "move_forward",
  "turn_left",
  "turn_right",
  "look_up",
  "look_down",
  "grab",
  "release",
  "stow",
  "unstow",
  "set_joint",
  "stop",
];

/** Serialize a value exactly the way the harness does: sorted keys, no spaces. */
function canonical(value: unknown): string {
  if (value === null) return "null";
  if (Array.isArray(value)) {
    return "[" + value.map((item) => canonical(item)).join(",") + "]";
  }
  if (typeof value === "object") {
    const record = value as Record<string, unknown>;
    const parts: string[] = [];
    for (const key of Object.keys(record).sort()) {
      if (record[key] === undefined) continue;
      parts.push(JSON.stringify(key) + ":" + canonical(record[key]));
    }
    return "{" + parts.join(",") + "}";
  }
  const atom = JSON.stringify(value);
  if (atom === undefined) {
    throw new ProtocolError(`value is not JSON-serializable: ${String(value)}`);
  }
  return atom;
}

export function encodeLine(message: ClientMessage | ServerMessage): string {
  return canonical(message) + "\n";
}

export function decodeServerLine(line: string): ServerMessage {
  let doc: unknown;
  try {
    doc = JSON.parse(line);
  } catch (err) {
    throw new ProtocolError(`bad JSON from harness: ${(err as Error).message}`);
  }
  if (typeof doc !== "object" || doc === null || Array.isArray(doc)) {
    throw new ProtocolError("harness message is not an object");
  }
  const kind = (doc as { kind?: unknown }).kind;
  if (typeof kind !== "string" || !SERVER_KINDS.has(kind)) {
    throw new ProtocolError(`unknown message kind: ${String(kind)}`);
  }
  return doc as ServerMessage;
}

export function clientHello(): ClientHello {
  return { kind: "hello", version: PROTOCOL_VERSION };
}

export function errorMessage(code: string, text: string): ErrorMessage {
  return { kind: "error", code, text };
}

export function action(name: ActionName, id?: string, fraction?: number): ActionMessage {
  const doc: ActionMessage = { kind: "action", name };
  if (id !== undefined) doc.id = id;
  if (fraction !== undefined) doc.fraction = fraction;
  return doc;
}

export const moveForward = (): ActionMessage => action("move_forward");
export const turnLeft = (): ActionMessage => action("turn_left");
export const turnRight = (): ActionMessage => action("turn_right");
export const lookUp = (): ActionMessage => action("look_up");
export const lookDown = (): ActionMessage => action("look_down");
export const grab = (): ActionMessage => action("grab");
export const release = (): ActionMessage => action("release");
export const stow = (): ActionMessage => action("stow");
export const unstow = (id: string): ActionMessage => action("unstow", id);
export const setJoint = (id: string, fraction: number): ActionMessage =>
  action("set_joint", id, fraction);
export const stop = (): ActionMessage => action("stop");
