"""Pilot 7: half-catalog quality world. Feedback sharpness x lr sweep."""

import time

import numpy as np

from sagerec.policy import init_policy, snapshot
from sagerec.simenv import FeedbackConfig, WorldConfig, build_world
from sagerec.trainer import (
    TrainConfig,
    collect_group,
    compute_gradient,
    evaluate_policy,
    train,
)
from sagerec.signals import batch_normalize, decoupled_advantage, group_normalize

WORLDS = {
    "A": WorldConfig(
        mainstream_weight=0.3,
        feedback=FeedbackConfig(affinity_weight=6.0, quality_weight=10.0, click_bias=-10.0),
    ),
    "B": WorldConfig(
        mainstream_weight=0.3,
        feedback=FeedbackConfig(affinity_weight=6.0, quality_weight=8.0, click_bias=-7.0),
    ),
}

BASE = dict(
    group_size=8, users_per_step=8, total_steps=500, slate_length=6,
    updates_per_snapshot=4, embedding_dim=16,
)


def advantage_diagnostic(wname, wcfg, seed):
    world = build_world(wcfg, seed=seed)
    counts = world.log.item_counts(wcfg.n_items)
    params = init_policy(wcfg.n_users, wcfg.n_items, 16, seed=seed, item_counts=counts)
    frozen = snapshot(params)
    rng = np.random.default_rng(999 + seed)
    cold = frozenset(world.catalog.cold_items)
    adv_cold, adv_warm = [], []
    n_cold_slates = 0
    total = 0
    clicks = 0
    for _ in range(40):
        users = rng.choice(wcfg.n_users, size=8, replace=False)
        groups = [collect_group(frozen, world, int(u), 8, 6, rng) for u in users]
        z = np.concatenate([
            decoupled_advantage(group_normalize(g.rewards), (0.5, 0.5)) for g in groups
        ])
        adv = batch_normalize(z)
        idx = 0
        for g in groups:
            clicks += float(g.rewards[:, 0].sum())
            for s in g.slates:
                has_cold = any(i in cold for i in s.items)
                (adv_cold if has_cold else adv_warm).append(adv[idx])
                n_cold_slates += has_cold
                total += 1
                idx += 1
    print(
        f"diag {wname} seed {seed}: cold slates {n_cold_slates}/{total} "
        f"clicks/slate={clicks / total:.3f} "
        f"adv_cold={np.mean(adv_cold):+.3f} adv_warm={np.mean(adv_warm):+.3f}",
        flush=True,
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
    for wname, wcfg in WORLDS.items():
        for seed in (0, 1, 2):
            advantage_diagnostic(wname, wcfg, seed)
    for wname, wcfg in WORLDS.items():
        for lr in (4.0, 8.0):
            ratios, ents = [], []
            for seed in (0, 1, 2):
                world = build_world(wcfg, seed=seed)
                out = {}
                for opt in ("sage", "gbpo"):
                    r = run_one(world, opt, lr, seed)
                    out[opt] = r
                    if "abort" in r:
                        print(f"{wname} lr{lr} seed {seed} {opt}: ABORT {r['abort'][:90]}", flush=True)
                        continue
                    tj = " ".join(f"{x:.4f}" for x in r["traj"])
                    print(
                        f"{wname} lr{lr} seed {seed} {opt}: traj=[{tj}] ent100={r['ent100']:.3f} "
                        f"cr10={r['cold10']:.3f} ndcg={r['ndcg']:.3f} entK={r['entk']:.3f} "
                        f"[{r['secs']:.0f}s]",
                        flush=True,
                    )
                if "abort" not in out["sage"] and "abort" not in out["gbpo"]:
                    ratio = out["sage"]["traj"][-1] / max(out["gbpo"]["traj"][-1], 1e-12)
                    ents.append(out["sage"]["ent100"] >= out["gbpo"]["ent100"])
                    ratios.append(ratio)
                    print(f"{wname} lr{lr} seed {seed}: ratio={ratio:.3f}", flush=True)
            if ratios:
                print(
                    f"== {wname} lr{lr}: ratios={[f'{r:.2f}' for r in ratios]} ent={ents}",
                    flush=True,
                )


if __name__ == "__main__":
    main()
