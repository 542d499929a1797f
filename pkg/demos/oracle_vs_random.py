#!/usr/bin/env python3
# Sweep a dozen generated episodes with the privileged oracle and with
# uniform random babble, and compare the reports side by side.

from tidysim import DifficultyParams, OracleAgent, RandomAgent, generate, run_many

episodes = [
    generate(seed, DifficultyParams(n_task_objects=1 + seed % 3, n_distractors=seed % 2))
    for seed in range(12)
]

oracle = run_many(episodes, lambda ep: OracleAgent())
random = run_many(episodes, lambda ep: RandomAgent(seed=ep.seed))

print(f"{'episode':16s} {'oracle spl':>10s} {'oracle J':>9s} {'random done%':>13s} {'random J':>9s}")
for ep, o, r in zip(episodes, oracle, random):
    print(
        f"{ep.episode_id:16s} {o.report.spl:10.3f} {o.report.energy:9.0f}"
        f" {100 * r.report.completion:12.0f}% {r.report.energy:9.0f}"
    )

wins = sum(o.report.success for o in oracle)
print(f"\noracle solved {wins}/{len(episodes)}; random completion is luck, not competence")
