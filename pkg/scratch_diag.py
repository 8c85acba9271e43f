"""Where does step-500 mass live, and is the cold set demand-shadowed?"""

import numpy as np

from sagerec.simenv import FeedbackConfig, WorldConfig, build_world
from sagerec.trainer import TrainConfig, train

FB = FeedbackConfig(affinity_weight=6.0, quality_weight=10.0, click_bias=-10.0)


def probe(mainstream, seed):
    wcfg = WorldConfig(
        mainstream_weight=mainstream, n_pretrain_interactions=2000, feedback=FB,
    )
    world = build_world(wcfg, seed=seed)
    cat = world.catalog
    counts = world.log.item_counts(wcfg.n_items)
    cold = np.array(sorted(cat.cold_items))
    demand = np.zeros(wcfg.n_subcats)
    for u in world.users:
        demand += u.preference
    demand /= len(world.users)
    item_demand = demand[cat.categories] * wcfg.n_subcats
    gems = np.where(cat.quality >= np.median(cat.quality))[0]
    noncold_gems = np.setdiff1d(gems, cold)
    print(
        f"m={mainstream} seed {seed}: zero-count={int((counts == 0).sum())} "
        f"cold demand={item_demand[cold].mean():.2f} "
        f"noncold-gem demand={item_demand[noncold_gems].mean():.2f} "
        f"cold q={cat.quality[cold].mean():.2f}",
        flush=True,
    )

    cfg = TrainConfig(
        optimizer="gbpo", seed=seed, learning_rate=8.0, group_size=8,
        users_per_step=16, total_steps=500, slate_length=6,
        updates_per_snapshot=4, embedding_dim=16,
    )
    res = train(cfg, world)
    params = res.params
    logits = params.user_embeddings @ params.item_embeddings.T + params.item_bias
    logits -= logits.max(axis=1, keepdims=True)
    probs = np.exp(logits)
    probs /= probs.sum(axis=1, keepdims=True)
    mass = probs.mean(axis=0)
    top = np.argsort(mass)[::-1][:15]
    cold_set = set(cold.tolist())
    rows = []
    for i in top:
        rows.append(
            f"    item {i}: mass={mass[i]:.3f} q={cat.quality[i]:.2f} "
            f"count={int(counts[i])} demand={item_demand[i]:.2f} "
            f"cold={'Y' if i in cold_set else 'n'}"
        )
    print(f"  final cold_mass={mass[cold].sum():.4f} top15:", flush=True)
    print("\n".join(rows), flush=True)


if __name__ == "__main__":
    for m in (0.3, 0.0):
        for seed in (0, 1):
            probe(m, seed)
