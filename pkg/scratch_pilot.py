import time

import numpy as np

from sagerec.simenv import WorldConfig, build_world
from sagerec.trainer import TrainConfig, evaluate_policy, train

BASE = dict(
    group_size=8,
    users_per_step=32,
    learning_rate=0.05,
    total_steps=500,
    slate_length=6,
    updates_per_snapshot=4,
    embedding_dim=16,
)

for seed in (0, 1):
    world = build_world(WorldConfig(), seed=seed)
    row = {}
    for opt in ("sage", "gbpo"):
        t0 = time.time()
        result = train(TrainConfig(optimizer=opt, seed=seed, **BASE), world)
        dt = time.time() - t0
        recs = result.report.records
        cold = recs[-1].cold_mass
        ent100 = float(np.mean([r.mean_entropy for r in recs[-100:]]))
        ev = evaluate_policy(result.params, world, 10)
        row[opt] = (cold, ent100, ev)
        print(
            f"seed {seed} {opt}: cold_mass={cold:.5f} ent100={ent100:.4f} "
            f"coldrec={ev['cold_recall']} ndcg={ev['ndcg_at_k']:.4f} "
            f"entK={ev['entropy_at_k']:.4f} [{dt:.0f}s]",
            flush=True,
        )
    ratio = row["sage"][0] / row["gbpo"][0]
    print(f"seed {seed}: cold ratio={ratio:.3f} ent_sage>=gbpo={row['sage'][1] >= row['gbpo'][1]}", flush=True)
