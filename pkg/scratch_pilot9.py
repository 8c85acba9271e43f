"""Pilot 9: flat good-half world (pretrain 500, popularity tiebreak), lr ladder."""

import time

import numpy as np

from sagerec.simenv import FeedbackConfig, WorldConfig, build_world
from sagerec.trainer import TrainConfig, evaluate_policy, train

FB = FeedbackConfig(affinity_weight=6.0, quality_weight=10.0, click_bias=-10.0)

BASE = dict(
    group_size=8, users_per_step=16, total_steps=500, slate_length=6,
    updates_per_snapshot=4, embedding_dim=16,
)


def world_stats(world, n_items):
    cat = world.catalog
    counts = world.log.item_counts(n_items)
    cold = np.array(sorted(cat.cold_items))
    return (
        f"coldq={cat.quality[cold].mean():.2f} "
        f"zero={int((counts == 0).sum())} "
        f"coldcounts<={int(counts[cold].max())}"
    )


def run_one(world, opt, lr, seed):
    cfg = TrainConfig(optimizer=opt, seed=seed, learning_rate=lr, **BASE)
    t0 = time.time()
    try:
        res = train(cfg, world)
    except (RuntimeError, ValueError) as e:
        return dict(abort=str(e), secs=time.time() - t0)
    recs = res.report.records
    traj = [recs[i].cold_mass for i in (0, 124, 249, 374, 499)]
    ent100 = float(np.mean([r.mean_entropy for r in recs[-100:]]))
    m10 = evaluate_policy(res.params, world, k=10)
    return dict(
        traj=traj, ent100=ent100, cold10=m10["cold_recall"],
        ndcg=m10["ndcg_at_k"], entk=m10["entropy_at_k"],
        secs=time.time() - t0,
    )


def main():
    wcfg = WorldConfig(
        mainstream_weight=0.3, n_pretrain_interactions=500, feedback=FB,
    )
    for seed in (0, 1, 2):
        world = build_world(wcfg, seed=seed)
        print(f"world seed {seed}: {world_stats(world, wcfg.n_items)}", flush=True)
    for lr in (2.0, 4.0, 8.0, 16.0):
        ratios, ents, gains = [], [], []
        for seed in (0, 1, 2):
            world = build_world(wcfg, seed=seed)
            out = {}
            for opt in ("sage", "gbpo"):
                r = run_one(world, opt, lr, seed)
                out[opt] = r
                if "abort" in r:
                    print(f"lr{lr} seed {seed} {opt}: ABORT {r['abort'][:80]}", flush=True)
                    continue
                tj = " ".join(f"{x:.4f}" for x in r["traj"])
                print(
                    f"lr{lr} seed {seed} {opt}: [{tj}] ent100={r['ent100']:.3f} "
                    f"cr10={r['cold10']:.3f} ndcg={r['ndcg']:.3f} entK={r['entk']:.3f} "
                    f"[{r['secs']:.0f}s]",
                    flush=True,
                )
            if "abort" not in out["sage"] and "abort" not in out["gbpo"]:
                ratio = out["sage"]["traj"][-1] / max(out["gbpo"]["traj"][-1], 1e-12)
                ratios.append(ratio)
                ents.append(out["sage"]["ent100"] >= out["gbpo"]["ent100"])
                gains.append(out["sage"]["traj"][-1] / max(out["sage"]["traj"][0], 1e-12))
        if ratios:
            print(
                f"== lr{lr}: ratios={[f'{r:.2f}' for r in ratios]} "
                f"sage_gain={[f'{g:.2f}' for g in gains]} ent={ents}",
                flush=True,
            )


if __name__ == "__main__":
    main()
