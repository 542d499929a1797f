/**
 * A deliberately simple reference agent for pose-goal episodes.
 *
 * Strategy per target object, in order of id:
 *   1. Spin in place until the object is seen, walking toward the goal
 *      location between sweeps. The last sighting is cached because close
 *      floor objects fall out of the level view cone.
 *   2. Work out where to stand: from the object's center height, estimate
 *      its top (things rest on the floor or on a table), pick a crosshair
 *      pitch whose ray can reach that height within the pick range, and
 *      derive the standoff distance where the ray crosses the top face.
 *   3. Walk the range error down. Plain steps close big gaps; oblique
 *      steps (turn off the bearing, step, re-aim) trim it below 5 cm,
 *      which the 0.25 m stride cannot do head-on. There is no backward
 *      step, so overshoots are fixed by veering out and coming back.
 *   4. At the standoff, point the crosshair down and grab. Misses cost
 *      nothing; retries sweep the aim one turn left and right, and every
 *      fourth miss falls back to a blind pitch ladder plus a shuffle in
 *      case the height estimate was wrong.
 *   5. Carry toward the goal pose and release inside the drop band: the
 *      load lands half a metre ahead, so standing 0.3 to 0.8 m short and
 *      roughly facing the goal puts it within any sane tolerance.
 *
 * Walls and furniture are invisible (only objects are reported), so
 * navigation is blind except for rejected steps. A rejected step enters a
 * wall-following mode: rotate right until a probe step goes through, then
 * keep probing left to hug the obstacle boundary, and leave the mode once
 * the straight-line distance to the navigation point has dropped well
 * below what it was when the step was first rejected.
 *
 * All decisions are pure functions of the observation plus a little
 * internal state, so the logic is unit-testable without a harness.
 */

import {
  ActionMessage,
  HelloMessage,
  ObservationMessage,
  grab,
  lookDown,
  lookUp,
  moveForward,
  release,
  stop,
  turnLeft,
  turnRight,
} from "./protocol.js";

// Turns and pitch moves both advance in 10 degree increments.
const TURN = Math.PI / 18;
const STEP = 0.25;
const EYE = 1.5;
const CROSSHAIR = Math.PI / 18; // crosshair sits 10 degrees below the view axis
const TABLE_TOP = 0.8;
const REACH = 1.49; // stay just inside the 1.5 m pick range

const wrap = (a: number): number => Math.atan2(Math.sin(a), Math.cos(a));

export interface DeliveryTarget {
  id: string;
  x: number;
  y: number;
}

/** Goal poses the greedy agent knows how to chase (pose goals only). */
export function deliveryTargets(hello: HelloMessage): DeliveryTarget[] {
  const goal = hello.goal;
  if (goal.kind !== "geometric") return [];
  return Object.keys(goal.targets)
    .sort()
    .map((id) => {
      const t = goal.targets[id]!.pose.t;
      return { id, x: t[0], y: t[1] };
    });
}

export interface Standoff {
  /** Pitch notches below level (negative). */
  steps: number;
  /** Horizontal distance at which the crosshair ray crosses the top face. */
  dist: number;
}

/**
 * Where to stand to grab an object whose center sits at height `cz`.
 * Low things rest on the floor (center = half height); anything higher is
 * assumed to sit on a table. Low objects want the deepest workable pitch
 * (short standoffs are fine on open floor); elevated ones want the
 * shallowest (long standoffs clear the table edge).
 */
export function pickStandoff(cz: number): Standoff {
  const onFloor = cz < 0.6;
  const half = onFloor ? cz : Math.max(cz - TABLE_TOP, 0.02);
  const top = cz + half;
  // deepest workable pitch first: closer standoffs give the aim more
  // angular room, and a blocked approach falls back to the blind ladder
  for (const s of [6, 5, 4, 3, 2]) {
    const depression = s * TURN + CROSSHAIR;
    const dist = (EYE - top) / Math.tan(depression);
    const reach = (EYE - top) / Math.sin(depression);
    if (reach <= REACH && dist >= half + 0.35) {
      return { steps: -s, dist };
    }
  }
  return { steps: -3, dist: (EYE - top) / Math.tan(3 * TURN + CROSSHAIR) };
}

export class GreedyAgent {
  private readonly targets: DeliveryTarget[];
  private queue: ActionMessage[] = [];
  private last: ActionMessage | null = null;
  private wasHeld: string | null = null;
  private fix: { x: number; y: number; z: number } | null = null;
  private scanLeft = 0;
  private stride = -1;
  private misses = 0;
  private dodge = 1;
  private wall: { best: number; ticks: number } | null = null;
  private idx = 0;

  constructor(hello: HelloMessage) {
    this.targets = deliveryTargets(hello);
  }

  decide(obs: ObservationMessage): ActionMessage {
    const act = this.choose(obs);
    this.last = act;
    this.wasHeld = obs.held;
    return act;
  }

  private choose(obs: ObservationMessage): ActionMessage {
    // a grab landed mid-plan: drop the rest of the micro-plan
    if (obs.held !== null && this.wasHeld === null) {
      this.queue = [];
    }
    // a release we sent was confirmed and it was the object we were carrying
    if (
      this.last?.name === "release" &&
      obs.last_action_ok &&
      obs.held === null &&
      this.wasHeld === this.targets[this.idx]?.id
    ) {
      this.idx += 1;
      this.queue = [];
      this.fix = null;
      this.misses = 0;
    }
    const target = this.targets[this.idx];
    if (!target) return stop();

    if (this.queue.length) return this.queue.shift()!;

    // navigation reference: the goal while carrying, else the cached
    // sighting, else the goal location (the object is probably near it)
    const carrying = obs.held === target.id;
    const nav = carrying || !this.fix ? target : this.fix;
    const dNav = Math.hypot(nav.x - obs.position[0], nav.y - obs.position[1]);

    const blocked = this.last?.name === "move_forward" && !obs.last_action_ok;
    if (blocked && !carrying && obs.held === null && this.fix) {
      // walking is blocked but the target is within arm range anyway
      // (for instance across a table edge): try grabbing from right here
      const d = Math.hypot(this.fix.x - obs.position[0], this.fix.y - obs.position[1]);
      if (d <= 1.35) {
        this.queue = this.blindLadder(obs, d);
        return this.queue.shift()!;
      }
    }

    if (this.wall) {
      this.wall.ticks += 1;
      if (this.wall.ticks > 150 || dNav < this.wall.best - 0.4) {
        this.wall = null;
      } else {
        return this.followWall(blocked);
      }
    } else if (blocked) {
      this.wall = { best: dNav, ticks: 0 };
      return this.followWall(true);
    }

    if (carrying) return this.deliver(obs, target);
    if (obs.held !== null) return release();
    return this.seek(obs, target);
  }

  /**
   * Blind boundary tracing with the obstacle kept on the left: rotate
   * right in 30 degree probes until a step goes through, then keep
   * testing 30 degrees left of travel so the path hugs the boundary.
   */
  private followWall(blockedNow: boolean): ActionMessage {
    if (blockedNow) {
      this.queue = [turnRight(), turnRight(), moveForward()];
      return turnRight();
    }
    if (this.last?.name === "move_forward") {
      this.queue = [turnLeft(), turnLeft(), moveForward()];
      return turnLeft();
    }
    return moveForward();
  }

  private seek(obs: ObservationMessage, target: DeliveryTarget): ActionMessage {
    const seen = obs.visible.find((v) => v.id === target.id);
    if (seen) {
      this.fix = { x: seen.position[0], y: seen.position[1], z: seen.position[2] };
      this.scanLeft = 0;
    }
    if (!this.fix) {
      if (this.scanLeft > 0) {
        this.scanLeft -= 1;
        return turnLeft();
      }
      this.stride += 1;
      if (this.stride % 5 === 0) {
        this.scanLeft = 35;
        return turnLeft();
      }
      return this.aimOrStep(obs, target.x, target.y);
    }

    const dx = this.fix.x - obs.position[0];
    const dy = this.fix.y - obs.position[1];
    const dist = Math.hypot(dx, dy);
    const bearing = Math.atan2(dy, dx);

    if (dist > 1.6) {
      const err = wrap(bearing - obs.heading);
      if (Math.abs(err) > TURN / 2 + 1e-9) {
        return err > 0 ? turnLeft() : turnRight();
      }
      return moveForward();
    }

    const plan = pickStandoff(this.fix.z);
    const delta = dist - plan.dist;

    if (Math.abs(delta) <= 0.07) {
      if (this.misses >= 12) {
        // nothing at this spot works; forget the fix and look again
        this.misses = 0;
        this.fix = null;
        this.scanLeft = 35;
        return turnLeft();
      }
      if (this.misses % 4 === 3) {
        this.queue = this.blindLadder(obs, dist);
        return this.queue.shift()!;
      }
      // sweep the aim across the footprint on successive tries
      const offsets = [0, 1, -1, 0] as const;
      const aim = bearing + offsets[this.misses % 4]! * TURN;
      const err = wrap(aim - obs.heading);
      if (Math.abs(err) > TURN / 2 + 1e-9) {
        return err > 0 ? turnLeft() : turnRight();
      }
      this.misses += 1;
      this.queue = [...this.pitchTo(obs, plan.steps), grab()];
      return this.queue.shift()!;
    }

    if (delta > 0) {
      const err = wrap(bearing - obs.heading);
      if (Math.abs(err) > TURN / 2 + 1e-9) {
        return err > 0 ? turnLeft() : turnRight();
      }
      if (delta >= 0.18) return moveForward();
      // a head-on stride would overshoot; step obliquely so the range
      // shrinks by exactly the remaining error; the side stays fixed
      // within one approach so successive steps do not cancel out
      const phi = Math.acos(Math.min(1, delta / STEP));
      const notches = Math.max(1, Math.round(phi / TURN));
      const toward = this.dodge > 0 ? turnLeft() : turnRight();
      this.queue = [...Array<ActionMessage>(notches - 1).fill(toward), moveForward()];
      return toward;
    }

    // too close to the object; there is no backward step, so veer out
    this.queue = [
      ...Array<ActionMessage>(8).fill(turnLeft()),
      moveForward(),
      moveForward(),
    ];
    return turnLeft();
  }

  /** Queue of look moves taking the pitch from its observed value to `steps`. */
  private pitchTo(obs: ObservationMessage, steps: number): ActionMessage[] {
    const acts: ActionMessage[] = [];
    let p = Math.round(obs.pitch / TURN);
    while (p > steps) {
      acts.push(lookDown());
      p -= 1;
    }
    while (p < steps) {
      acts.push(lookUp());
      p += 1;
    }
    return acts;
  }

  /**
   * Fallback sweep: grab at every pitch notch from level to -60 degrees,
   * re-level, then shuffle to a new spot. Used when the computed standoff
   * keeps missing or the approach is blocked.
   */
  private blindLadder(obs: ObservationMessage, dist: number): ActionMessage[] {
    const acts: ActionMessage[] = [];
    let p = Math.round(obs.pitch / TURN);
    while (p > 0) {
      acts.push(lookDown());
      p -= 1;
    }
    acts.push(grab());
    while (p > -6) {
      acts.push(lookDown());
      acts.push(grab());
      p -= 1;
    }
    while (p < 0) {
      acts.push(lookUp());
      p += 1;
    }
    this.misses += 1;
    if (dist > 0.55) {
      acts.push(moveForward());
    } else {
      this.dodge = -this.dodge;
      const away = this.dodge > 0 ? turnLeft() : turnRight();
      const back = this.dodge > 0 ? turnRight() : turnLeft();
      acts.push(away, away, moveForward(), back, back);
    }
    return acts;
  }

  private deliver(obs: ObservationMessage, target: DeliveryTarget): ActionMessage {
    if (this.last?.name === "release") {
      // still holding after a release: the drop spot was blocked, so
      // shift a little before trying again
      this.queue = [turnLeft(), turnLeft(), moveForward()];
      return turnLeft();
    }
    const dx = target.x - obs.position[0];
    const dy = target.y - obs.position[1];
    const dist = Math.hypot(dx, dy);
    const err = wrap(Math.atan2(dy, dx) - obs.heading);
    if (Math.abs(err) > TURN / 2 + 1e-9) {
      return err > 0 ? turnLeft() : turnRight();
    }
    if (dist > 0.8) return moveForward();
    if (dist < 0.3) {
      this.queue = [turnLeft(), turnLeft(), turnLeft(), turnLeft(), moveForward(), moveForward()];
      return turnLeft();
    }
    return release();
  }

  private aimOrStep(obs: ObservationMessage, x: number, y: number): ActionMessage {
    const dx = x - obs.position[0];
    const dy = y - obs.position[1];
    if (Math.hypot(dx, dy) < 0.4) {
      // arrived with nothing in sight; sweep again from here
      this.scanLeft = 35;
      return turnLeft();
    }
    const err = wrap(Math.atan2(dy, dx) - obs.heading);
    if (Math.abs(err) > TURN / 2 + 1e-9) {
      return err > 0 ? turnLeft() : turnRight();
    }
    return moveForward();
  }
}
