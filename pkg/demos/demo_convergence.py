"""Compare aggregation strategies on a label-skewed synthetic problem.

Runs a short federated experiment for each strategy with identical seeds
and prints the global loss trajectory.  Run with:
python3 demos/demo_convergence.py
"""

from bherd import parse_config, run_experiment

BASE = dict(
    dataset="synth", synth_classes=10, synth_per_class=200,
    synth_features=50, synth_spread=2.0, clients=5, case=2,
    batch=20, rounds=40, lr=1e-4,
)

print(f"{'round':>5}  " + "".join(f"{s:>10}" for s in
      ("bherd", "fedavg", "grab", "fednova", "scaffold")))

trajectories = {}
for strategy in ("bherd", "fedavg", "grab", "fednova", "scaffold"):
    cfg = parse_config(overrides={**BASE, "strategy": strategy, "alpha": 0.5})
    records, _ = run_experiment(cfg, seed=3)
    trajectories[strategy] = [r.global_loss for r in records]

for t in range(0, 40, 5):
    row = "".join(f"{trajectories[s][t]:>10.5f}" for s in trajectories)
    print(f"{t:>5}  {row}")

finals = {s: traj[-1] for s, traj in trajectories.items()}
best = min(finals, key=finals.get)
print(f"\nlowest final loss: {best} ({finals[best]:.5f})")
