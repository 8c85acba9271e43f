"""Pilot 6: full-pool quality lift. Advantage diagnostic + lr sweep."""

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
from sagerec.bounds import EntropyTracker
from sagerec.signals import batch_normalize, decoupled_advantage, group_normalize

WORLD = WorldConfig(
    mainstream_weight=0.3,
    feedback=FeedbackConfig(affinity_weight=6.0, quality_weight=10.0, click_bias=-10.0),
)


def advantage_diagnostic(seed):
    """Mean advantage of cold-containing slates at the initial policy."""
    world = build_world(WORLD, seed=seed)
    counts = world.log.item_counts(WORLD.n_items)
    params = init_policy(WORLD.n_users, WORLD.n_items, 16, seed=seed, item_counts=counts)
    frozen = snapshot(params)
    rng = np.random.default_rng(999 + seed)
    cold = frozenset(world.catalog.cold_items)
    adv_cold, adv_warm = [], []
    n_cold_slates = 0
    total = 0
    for _ in range(40):
        users = rng.choice(WORLD.n_users, size=8, replace=False)
        groups = [collect_group(frozen, world, int(u), 8, 6, rng) for u in users]
        z = np.concatenate([
            decoupled_advantage(group_normalize(g.rewards), (0.5, 0.5)) for g in groups
        ])
        adv = batch_normalize(z)
        idx = 0
        for g in groups:
            for s in g.slates:
                has_cold = any(i in cold for i in s.items)
                (adv_cold if has_cold else adv_warm).append(adv[idx])
                n_cold_slates += has_cold
                total += 1
                idx += 1
    print(
        f"diag seed {seed}: cold slates {n_cold_slates}/{total} "
        f"adv_cold={np.mean(adv_cold):+.3f} adv_warm={np.mean(adv_warm):+.3f}",
        flush=True,
    )


BASE = dict(
    group_size=8, users_per_step=8, total_steps=500, slate_length=6,
    updates_per_snapshot=4, embedding_dim=16,
)


def run_one(world, opt, lr, seed):
    cfg = TrainConfig(optimizer=opt, seed=seed, learning_rate=lr, **BASE)
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
    for seed in (0, 1, 2):
        advantage_diagnostic(seed)
    for lr in (4.0, 8.0, 16.0):
        ratios, ents = [], []
        for seed in (0, 1, 2):
            world = build_world(WORLD, seed=seed)
            out = {}
            for opt in ("sage", "gbpo"):
                r = run_one(world, opt, lr, seed)
                out[opt] = r
                if "abort" in r:
                    print(f"lr{lr} seed {seed} {opt}: ABORT {r['abort'][:90]}", flush=True)
                    continue
                tj = " ".join(f"{x:.4f}" for x in r["traj"])
                print(
                    f"lr{lr} seed {seed} {opt}: traj=[{tj}] ent100={r['ent100']:.3f} "
                    f"cr10={r['cold10']:.3f} ndcg={r['ndcg']:.3f} entK={r['entk']:.3f} "
                    f"cpos~{r['cpos']:.3f} cneg~{r['cneg']:.3f} [{r['secs']:.0f}s]",
                    flush=True,
                )
            if "abort" not in out["sage"] and "abort" not in out["gbpo"]:
                ratio = out["sage"]["traj"][-1] / max(out["gbpo"]["traj"][-1], 1e-12)
                ents.append(out["sage"]["ent100"] >= out["gbpo"]["ent100"])
                ratios.append(ratio)
                print(f"lr{lr} seed {seed}: ratio={ratio:.3f}", flush=True)
        if ratios:
            print(f"== lr{lr}: ratios={[f'{r:.2f}' for r in ratios]} ent={ents}", flush=True)


if __name__ == "__main__":
    main()
