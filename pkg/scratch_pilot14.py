"""Pilot 14: dense sweep around the ratchet-lock regime (ups8, lr~1)."""

import numpy as np

from sagerec.simenv import FeedbackConfig, WorldConfig, build_world
from sagerec.trainer import TrainConfig, evaluate_policy, train

FB_SAT = FeedbackConfig(affinity_weight=6.0, quality_weight=14.0, click_bias=-7.5)
FB_GRD = FeedbackConfig(affinity_weight=6.0, quality_weight=10.0, click_bias=-6.0)

BASE = dict(
    group_size=8, users_per_step=8, total_steps=500, slate_length=6,
    updates_per_snapshot=8, embedding_dim=16,
)
SEEDS = (0, 1, 2, 3, 4)


def run_one(world, opt, lr, seed):
    cfg = TrainConfig(optimizer=opt, seed=seed, learning_rate=lr, **BASE)
    try:
        res = train(cfg, world)
    except (RuntimeError, ValueError) as e:
        return dict(abort=str(e))
    recs = res.report.records
    traj = [recs[i].cold_mass for i in (0, 124, 249, 374, 499)]
    ent100 = float(np.mean([r.mean_entropy for r in recs[-100:]]))
    m10 = evaluate_policy(res.params, world, k=10)
    return dict(
        traj=traj, ent100=ent100, cold10=m10["cold_recall"],
        ndcg=m10["ndcg_at_k"], entk=m10["entropy_at_k"],
    )


def main():
    for fbname, fb in (("sat", FB_SAT), ("grd", FB_GRD)):
        wcfg = WorldConfig(
            mainstream_weight=0.3, n_pretrain_interactions=500, feedback=fb,
        )
        worlds = {s: build_world(wcfg, seed=s) for s in SEEDS}
        lrs = (0.9, 1.0, 1.1, 1.25) if fbname == "sat" else (1.0, 1.25)
        for lr in lrs:
            ratios, ents, wins = [], [], 0
            for seed in SEEDS:
                out = {}
                for opt in ("sage", "gbpo"):
                    r = run_one(worlds[seed], opt, lr, seed)
                    out[opt] = r
                    if "abort" in r:
                        print(f"{fbname} lr{lr} s{seed} {opt}: ABORT {r['abort'][:70]}", flush=True)
                        continue
                    tj = " ".join(f"{x:.3f}" for x in r["traj"])
                    print(
                        f"{fbname} lr{lr} s{seed} {opt}: [{tj}] ent100={r['ent100']:.3f} "
                        f"cr10={r['cold10']:.2f} ndcg={r['ndcg']:.2f} entK={r['entk']:.2f}",
                        flush=True,
                    )
                if "abort" not in out["sage"] and "abort" not in out["gbpo"]:
                    s, g = out["sage"]["traj"][-1], out["gbpo"]["traj"][-1]
                    ratios.append(s / max(g, 1e-12))
                    wins += s > g
                    ents.append(out["sage"]["ent100"] >= out["gbpo"]["ent100"])
            if ratios:
                print(
                    f"== {fbname} lr{lr}: mean_ratio={np.mean(ratios):.3f} "
                    f"wins={wins}/{len(ratios)} ent={sum(ents)}/{len(ents)} "
                    f"ratios={[f'{r:.2f}' for r in ratios]}",
                    flush=True,
                )


if __name__ == "__main__":
    main()
