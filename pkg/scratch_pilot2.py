import time

import numpy as np

from sagerec.policy import init_policy, mean_first_position_mass
from sagerec.simenv import WorldConfig, build_world
from sagerec.trainer import TrainConfig, evaluate_policy, train

CONFIGS = {
    "A": dict(users_per_step=8, group_size=8, learning_rate=1.0),
    "B": dict(users_per_step=8, group_size=8, learning_rate=2.0),
    "C": dict(users_per_step=16, group_size=8, learning_rate=2.0),
}

for name, knobs in CONFIGS.items():
    for seed in (0, 1):
        world = build_world(WorldConfig(), seed=seed)
        cold_ids = np.array(sorted(world.catalog.cold_items))
        counts = world.log.item_counts(1000)
        p0 = init_policy(200, 1000, 16, seed=0, item_counts=counts)
        init_cold = mean_first_position_mass(p0, cold_ids)
        out = {}
        for opt in ("sage", "gbpo"):
            cfg = TrainConfig(
                optimizer=opt,
                total_steps=500,
                slate_length=6,
                updates_per_snapshot=4,
                embedding_dim=16,
                seed=seed,
                **knobs,
            )
            t0 = time.time()
            try:
                result = train(cfg, world)
            except RuntimeError as exc:
                print(f"{name} seed {seed} {opt}: ABORT {exc}", flush=True)
                out = None
                break
            dt = time.time() - t0
            recs = result.report.records
            cold = recs[-1].cold_mass
            ent100 = float(np.mean([r.mean_entropy for r in recs[-100:]]))
            ev = evaluate_policy(result.params, world, 10)
            cp = [r.coef_pos_mean for r in recs if r.coef_pos_mean is not None]
            cn = [r.coef_neg_mean for r in recs if r.coef_neg_mean is not None]
            out[opt] = (cold, ent100)
            print(
                f"{name} seed {seed} {opt}: cold0={init_cold:.4f} cold={cold:.4f} "
                f"ent100={ent100:.3f} coldrec={ev['cold_recall']:.3f} "
                f"ndcg={ev['ndcg_at_k']:.3f} entK={ev['entropy_at_k']:.3f} "
                f"cpos~{np.mean(cp):.3f} cneg~{np.mean(cn):.3f} [{dt:.0f}s]",
                flush=True,
            )
        if out:
            print(
                f"{name} seed {seed}: ratio={out['sage'][0]/out['gbpo'][0]:.3f} "
                f"ent_ok={out['sage'][1] >= out['gbpo'][1]}",
                flush=True,
            )
