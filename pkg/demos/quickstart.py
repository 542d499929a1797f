"""
Generate an episode, let the built-in oracle solve it, inspect the report
=========================================================================

"""

from tidysim import DifficultyParams, OracleAgent, generate, run_episode

# A two-object tidy-up task with one distractor that must not be disturbed.
episode = generate(seed=11, params=DifficultyParams(n_task_objects=2, n_distractors=1))

print(f"episode {episode.episode_id}: move {episode.task_ids}, "
      f"{episode.max_ticks} tick budget")

result = run_episode(OracleAgent(), episode)
r = result.report

print(f"success            {r.success}")
print(f"completion         {r.completion:.2f}")
print(f"ticks used         {r.ticks}")
print(f"energy (J)         {r.energy:.0f}")
print(f"agent path (m)     {r.agent_path_length:.2f}")
print(f"oracle path (m)    {r.shortest_path_length:.2f}")
print(f"spl                {r.spl:.3f}")
for name, passed in r.per_predicate:
    print(f"  {name:24s} {'pass' if passed else 'FAIL'}")
