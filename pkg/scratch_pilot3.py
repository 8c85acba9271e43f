"""Pilot 3: sharper feedback landscape so cold gems win groups decisively."""

import time

import numpy as np

from sagerec.simenv import FeedbackConfig, WorldConfig, build_world
from sagerec.trainer import TrainConfig, evaluate_policy, train
from sagerec.policy import init_policy, mean_first_position_mass

WORLDS = {
    "sharp": WorldConfig(
        n_pretrain_interactions=6000,
        mainstream_weight=0.3,
        feedback=FeedbackConfig(affinity_weight=8.0, quality_weight=6.0, click_bias=-8.0),
    ),
    "sharp20k": WorldConfig(
        mainstream_weight=0.3,
        feedback=FeedbackConfig(affinity_weight=8.0, quality_weight=6.0, click_bias=-8.0),
    ),
}

TRAINS = {
    "lr1u8": dict(learning_rate=1.0, updates_per_snapshot=8),
    "lr2u8": dict(learning_rate=2.0, updates_per_snapshot=8),
    "lr2u4": dict(learning_rate=2.0, updates_per_snapshot=4),
}

BASE = dict(group_size=8, users_per_step=8, total_steps=500, slate_length=6, embedding_dim=16)


def run_one(world, opt, tcfg, seed):
    cfg = TrainConfig(optimizer=opt, seed=seed, **BASE, **tcfg)
    t0 = time.time()
    try:
        res = train(cfg, world)
    except RuntimeError as e:
        return dict(abort=str(e), secs=time.time() - t0)
    recs = res.report.records
    traj = [recs[i].cold_mass for i in (0, 124, 249, 374, 499)]
    ent100 = float(np.mean([r.mean_entropy for r in recs[-100:]]))
    m10 = evaluate_policy(res.params, world, k=10)
    m50 = evaluate_policy(res.params, world, k=50)
    cpos = float(np.mean([r.coef_pos_mean for r in recs if r.coef_pos_mean is not None]))
    cneg = float(np.mean([r.coef_neg_mean for r in recs if r.coef_neg_mean is not None]))
    return dict(
        traj=traj, ent100=ent100, cold10=m10["cold_recall"], cold50=m50["cold_recall"],
        ndcg=m10["ndcg_at_k"], entk=m10["entropy_at_k"], cpos=cpos, cneg=cneg,
        secs=time.time() - t0,
    )


def main():
    for wname, wcfg in WORLDS.items():
        for tname, tcfg in TRAINS.items():
            for seed in (0, 1):
                world = build_world(wcfg, seed=seed)
                counts = world.log.item_counts(world.catalog.n_items)
                init = init_policy(wcfg.n_users, wcfg.n_items, 16, seed=seed, item_counts=counts)
                cold = np.fromiter(sorted(world.catalog.cold_items), dtype=np.intp)
                cold0 = mean_first_position_mass(init, cold)
                out = {}
                for opt in ("sage", "gbpo"):
                    r = run_one(world, opt, tcfg, seed)
                    out[opt] = r
                    if "abort" in r:
                        print(f"{wname}/{tname} seed {seed} {opt}: ABORT {r['abort'][:80]}", flush=True)
                        continue
                    tj = " ".join(f"{x:.4f}" for x in r["traj"])
                    print(
                        f"{wname}/{tname} seed {seed} {opt}: cold0={cold0:.4f} traj=[{tj}] "
                        f"ent100={r['ent100']:.3f} cr10={r['cold10']:.3f} cr50={r['cold50']:.3f} "
                        f"ndcg={r['ndcg']:.3f} entK={r['entk']:.3f} "
                        f"cpos~{r['cpos']:.3f} cneg~{r['cneg']:.3f} [{r['secs']:.0f}s]",
                        flush=True,
                    )
                if "abort" not in out["sage"] and "abort" not in out["gbpo"]:
                    ratio = out["sage"]["traj"][-1] / max(out["gbpo"]["traj"][-1], 1e-12)
                    ent_ok = out["sage"]["ent100"] >= out["gbpo"]["ent100"]
                    print(f"{wname}/{tname} seed {seed}: ratio={ratio:.3f} ent_ok={ent_ok}", flush=True)


if __name__ == "__main__":
    main()
