"""Pilot 12: amplify the boost differential (small batch, more snapshot reuse)."""

import itertools
import time

import numpy as np

from sagerec.simenv import FeedbackConfig, WorldConfig, build_world
from sagerec.trainer import TrainConfig, evaluate_policy, train

FB = FeedbackConfig(affinity_weight=6.0, quality_weight=14.0, click_bias=-7.5)

BASE = dict(group_size=8, total_steps=500, slate_length=6, embedding_dim=16)


def run_one(world, opt, lr, ups, users, seed):
    cfg = TrainConfig(
        optimizer=opt, seed=seed, learning_rate=lr, users_per_step=users,
        updates_per_snapshot=ups, **BASE,
    )
    t0 = time.time()
    try:
        res = train(cfg, world)
    except (RuntimeError, ValueError) as e:
        return dict(abort=str(e), secs=time.time() - t0)
    recs = res.report.records
    traj = [recs[i].cold_mass for i in (0, 124, 249, 374, 499)]
    ent100 = float(np.mean([r.mean_entropy for r in recs[-100:]]))
    cpos = float(np.mean([r.coef_pos_mean for r in recs if r.coef_pos_mean is not None]))
    m10 = evaluate_policy(res.params, world, k=10)
    return dict(
        traj=traj, ent100=ent100, cold10=m10["cold_recall"],
        ndcg=m10["ndcg_at_k"], entk=m10["entropy_at_k"], cpos=cpos,
        secs=time.time() - t0,
    )


def main():
    wcfg = WorldConfig(
        mainstream_weight=0.3, n_pretrain_interactions=500, feedback=FB,
    )
    worlds = {s: build_world(wcfg, seed=s) for s in (0, 1, 2)}
    for users, ups, lr in itertools.product((8,), (4, 8), (1.0, 1.5, 2.0)):
        ratios, ents = [], []
        for seed in (0, 1, 2):
            out = {}
            for opt in ("sage", "gbpo"):
                r = run_one(worlds[seed], opt, lr, ups, users, seed)
                out[opt] = r
                if "abort" in r:
                    print(f"u{users} ups{ups} lr{lr} s{seed} {opt}: ABORT {r['abort'][:70]}", flush=True)
                    continue
                tj = " ".join(f"{x:.3f}" for x in r["traj"])
                print(
                    f"u{users} ups{ups} lr{lr} s{seed} {opt}: [{tj}] ent100={r['ent100']:.3f} "
                    f"cpos={r['cpos']:.3f} cr10={r['cold10']:.2f} ndcg={r['ndcg']:.2f} "
                    f"entK={r['entk']:.2f} [{r['secs']:.0f}s]",
                    flush=True,
                )
            if "abort" not in out["sage"] and "abort" not in out["gbpo"]:
                ratios.append(out["sage"]["traj"][-1] / max(out["gbpo"]["traj"][-1], 1e-12))
                ents.append(out["sage"]["ent100"] >= out["gbpo"]["ent100"])
        if ratios:
            print(
                f"== u{users} ups{ups} lr{lr}: ratios={[f'{r:.2f}' for r in ratios]} "
                f"mean={np.mean(ratios):.3f} ent={ents}",
                flush=True,
            )


if __name__ == "__main__":
    main()
