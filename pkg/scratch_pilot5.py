"""Pilot 5: enriched cold-pool quality, moderate kicks, click-bias sweep."""

import time

import numpy as np

from sagerec.simenv import FeedbackConfig, WorldConfig, build_world
from sagerec.trainer import TrainConfig, evaluate_policy, train

def world_cfg(bias):
    return WorldConfig(
        n_pretrain_interactions=6000,
        mainstream_weight=0.3,
        feedback=FeedbackConfig(affinity_weight=8.0, quality_weight=6.0, click_bias=bias),
    )

CONFIGS = {
    "b8_lr8": (world_cfg(-8.0), dict(learning_rate=8.0)),
    "b6_lr8": (world_cfg(-6.0), dict(learning_rate=8.0)),
    "b6_lr4": (world_cfg(-6.0), dict(learning_rate=4.0)),
    "b6_lr16": (world_cfg(-6.0), dict(learning_rate=16.0)),
}

BASE = dict(
    group_size=8, users_per_step=8, total_steps=500, slate_length=6,
    updates_per_snapshot=4, embedding_dim=16,
)


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
    cpos = float(np.mean([r.coef_pos_mean for r in recs if r.coef_pos_mean is not None]))
    cneg = float(np.mean([r.coef_neg_mean for r in recs if r.coef_neg_mean is not None]))
    return dict(
        traj=traj, ent100=ent100, cold10=m10["cold_recall"],
        ndcg=m10["ndcg_at_k"], entk=m10["entropy_at_k"], cpos=cpos, cneg=cneg,
        secs=time.time() - t0,
    )


def main():
    for name, (wcfg, tcfg) in CONFIGS.items():
        ratios, ents = [], []
        for seed in (0, 1, 2):
            world = build_world(wcfg, seed=seed)
            out = {}
            for opt in ("sage", "gbpo"):
                r = run_one(world, opt, tcfg, seed)
                out[opt] = r
                if "abort" in r:
                    print(f"{name} seed {seed} {opt}: ABORT {r['abort'][:90]}", flush=True)
                    continue
                tj = " ".join(f"{x:.4f}" for x in r["traj"])
                print(
                    f"{name} seed {seed} {opt}: traj=[{tj}] ent100={r['ent100']:.3f} "
                    f"cr10={r['cold10']:.3f} ndcg={r['ndcg']:.3f} entK={r['entk']:.3f} "
                    f"cpos~{r['cpos']:.3f} cneg~{r['cneg']:.3f} [{r['secs']:.0f}s]",
                    flush=True,
                )
            if "abort" not in out["sage"] and "abort" not in out["gbpo"]:
                ratio = out["sage"]["traj"][-1] / max(out["gbpo"]["traj"][-1], 1e-12)
                ent_ok = out["sage"]["ent100"] >= out["gbpo"]["ent100"]
                ratios.append(ratio)
                ents.append(ent_ok)
                print(f"{name} seed {seed}: ratio={ratio:.3f} ent_ok={ent_ok}", flush=True)
        if ratios:
            print(f"== {name}: ratios={[f'{r:.2f}' for r in ratios]} ent={ents}", flush=True)


if __name__ == "__main__":
    main()
