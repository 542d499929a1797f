import { describe, expect, it } from "vitest";

import { GreedyAgent, deliveryTargets, pickStandoff } from "../dist/greedy.js";
import type { HelloMessage, ObservationMessage, VisibleObjectDoc } from "../dist/protocol.js";

function helloWithTarget(x: number, y: number): HelloMessage {
  return {
    kind: "hello",
    version: "1",
    episode: {
      episode_id: "ep-test",
      max_ticks: 500,
      task_ids: ["mug"],
      carry_capacity: 1,
      pick_range: 1.5,
      view: { fov: Math.PI / 2, crosshair_pitch: -Math.PI / 18, eye_height: 1.5, sense_range: 10 },
      noise: { pose_sigma: 0, odom_drift_per_m: 0, odom_heading_drift: 0 },
    },
    goal: {
      kind: "geometric",
      targets: {
        mug: {
          pose: { t: [x, y, 0.1], q: [1, 0, 0, 0] },
          open: null,
          tolerance: { translation: 0.75, rotation: Math.PI, min_iou: null, open: 0.2 },
        },
      },
    },
  };
}

function obs(over: Partial<ObservationMessage> = {}): ObservationMessage {
  return {
    kind: "observation",
    phase: "score",
    tick: 0,
    position: [0, 0],
    heading: 0,
    pitch: 0,
    held: null,
    haptic: false,
    last_action_ok: true,
    visible: [],
    ...over,
  };
}

function mug(x: number, y: number): VisibleObjectDoc {
  return { id: "mug", category: "cube", position: [x, y, 0.1], rotation: [1, 0, 0, 0], open_fraction: null };
}

describe("deliveryTargets", () => {
  it("reads pose goals in id order", () => {
    expect(deliveryTargets(helloWithTarget(4, 2))).toEqual([{ id: "mug", x: 4, y: 2 }]);
  });

  it("is empty for non-pose goals", () => {
    const hello = helloWithTarget(0, 0);
    hello.goal = { kind: "experience", exploration_budget: 100 };
    expect(deliveryTargets(hello)).toEqual([]);
  });
});

describe("pickStandoff", () => {
  it("takes the deepest pitch for floor objects", () => {
    const s = pickStandoff(0.1); // a 10 cm half-height box on the floor
    expect(s.steps).toBe(-6);
    // ray from 1.5 m eye height at 70 degrees down crosses z=0.2 at 0.47 m
    expect(s.dist).toBeCloseTo(0.473, 2);
  });

  it("picks a shallower pitch for table-height objects", () => {
    const s = pickStandoff(0.884); // center 8.4 cm above a 0.8 m table top
    expect(s.steps).toBe(-4);
    expect(s.dist).toBeCloseTo(0.447, 2);
  });

  it("keeps the ray inside the pick range for tiny floor litter", () => {
    const s = pickStandoff(0.054);
    expect(s.steps).toBe(-6);
    expect(s.dist).toBeGreaterThan(0.4);
    expect(s.dist).toBeLessThan(0.6);
  });
});

describe("seeking", () => {
  it("stops immediately when there is nothing to chase", () => {
    const hello = helloWithTarget(0, 0);
    hello.goal = { kind: "predicate", program: "(score (unmoved mug))" };
    const agent = new GreedyAgent(hello);
    expect(agent.decide(obs()).name).toBe("stop");
  });

  it("scans with left turns when the target has never been seen", () => {
    const agent = new GreedyAgent(helloWithTarget(4, 0));
    // turns move 10 degrees at a time, so a full sweep is 36 of them
    for (let i = 0; i < 36; i += 1) {
      expect(agent.decide(obs({ tick: i })).name).toBe("turn_left");
    }
    // a full circle came up empty: start walking toward the goal pose
    expect(agent.decide(obs({ tick: 36 })).name).toBe("move_forward");
  });

  it("turns toward a sighted target before walking", () => {
    const agent = new GreedyAgent(helloWithTarget(4, 0));
    // 2 m away, 90 degrees to the left
    expect(agent.decide(obs({ visible: [mug(0, 2)] })).name).toBe("turn_left");
  });

  it("walks in when roughly facing the target", () => {
    const agent = new GreedyAgent(helloWithTarget(4, 0));
    expect(agent.decide(obs({ visible: [mug(2, 0)] })).name).toBe("move_forward");
  });

  it("keeps approaching by dead reckoning after the target leaves view", () => {
    const agent = new GreedyAgent(helloWithTarget(4, 0));
    expect(agent.decide(obs({ visible: [mug(2, 0)] })).name).toBe("move_forward");
    // one step later the mug is below the level view cone, but the cached
    // fix still says 1.75 m dead ahead
    expect(agent.decide(obs({ position: [0.25, 0], visible: [] })).name).toBe("move_forward");
  });

  it("closes on the computed standoff with plain steps first", () => {
    const agent = new GreedyAgent(helloWithTarget(4, 0));
    // floor mug: the crosshair ray at -60 pitch crosses its top 0.47 m
    // out, so from 0.7 m the agent just walks in
    expect(agent.decide(obs({ visible: [mug(0.7, 0)] })).name).toBe("move_forward");
  });

  it("sweeps the pitch down and grabs at the standoff", () => {
    const agent = new GreedyAgent(helloWithTarget(4, 0));
    const names = [agent.decide(obs({ visible: [mug(0.47, 0)] })).name];
    for (let i = 0; i < 6; i += 1) {
      names.push(agent.decide(obs({ visible: [] })).name);
    }
    expect(names).toEqual([
      "look_down",
      "look_down",
      "look_down",
      "look_down",
      "look_down",
      "look_down",
      "grab",
    ]);
  });

  it("veers out when it has overshot the standoff", () => {
    const agent = new GreedyAgent(helloWithTarget(4, 0));
    // 0.38 m is inside the dead zone for a floor object
    expect(agent.decide(obs({ visible: [mug(0.38, 0)] })).name).toBe("turn_left");
  });

  it("abandons the grab plan the moment a grab lands", () => {
    const agent = new GreedyAgent(helloWithTarget(4, 0));
    expect(agent.decide(obs({ visible: [mug(0.47, 0)] })).name).toBe("look_down");
    // a grab connected early; next decision should head for the goal
    const carrying = obs({ held: "mug", haptic: true });
    expect(agent.decide(carrying).name).toBe("move_forward");
  });
});

describe("delivering", () => {
  it("faces the goal pose while carrying", () => {
    const agent = new GreedyAgent(helloWithTarget(0, 3));
    expect(agent.decide(obs({ held: "mug" })).name).toBe("turn_left");
  });

  it("releases inside the drop band", () => {
    const agent = new GreedyAgent(helloWithTarget(0.6, 0));
    expect(agent.decide(obs({ held: "mug" })).name).toBe("release");
  });

  it("walks closer before dropping", () => {
    const agent = new GreedyAgent(helloWithTarget(3, 0));
    expect(agent.decide(obs({ held: "mug" })).name).toBe("move_forward");
  });

  it("stops after a confirmed drop", () => {
    const agent = new GreedyAgent(helloWithTarget(0.6, 0));
    expect(agent.decide(obs({ held: "mug" })).name).toBe("release");
    expect(agent.decide(obs({ held: null, last_action_ok: true })).name).toBe("stop");
  });

  it("dodges and retries when the drop spot is blocked", () => {
    const agent = new GreedyAgent(helloWithTarget(0.6, 0));
    expect(agent.decide(obs({ held: "mug" })).name).toBe("release");
    // still holding: the release bounced
    const after = agent.decide(obs({ held: "mug", last_action_ok: false }));
    expect(["turn_left", "turn_right"]).toContain(after.name);
  });
});
