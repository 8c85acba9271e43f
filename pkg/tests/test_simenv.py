"""Unit tests for the synthetic world: catalog, users, log, feedback, cold set."""

from __future__ import annotations

import math

import numpy as np
import pytest

from sagerec.simenv import (
    Catalog,
    FeedbackConfig,
    InteractionLog,
    UserModel,
    WorldConfig,
    build_world,
    feedback,
    generate_catalog,
    generate_users,
    identify_cold_items,
    item_vectors,
    load_catalog,
    load_log,
    logged_pretraining,
    relevant_items,
    save_catalog,
    save_log,
)


def uniform_user(n_subcats: int, engagement: float = 30.0) -> UserModel:
    return UserModel(
        preference=np.full(n_subcats, 1.0 / n_subcats), engagement_scale=engagement
    )


def test_generate_catalog_shapes_and_ranges():
    cat = generate_catalog(100, 8, 1.1, 0.2, seed=4)
    assert cat.n_items == 100
    assert cat.categories.min() >= 0 and cat.categories.max() < 8
    assert np.all((cat.quality >= 0) & (cat.quality <= 1))
    assert np.all(cat.popularity > 0)
    assert cat.popularity.sum() == pytest.approx(1.0, abs=1e-12)
    assert cat.cold_items == frozenset()


def test_generate_catalog_deterministic():
    a = generate_catalog(60, 6, 1.3, 0.2, seed=9)
    b = generate_catalog(60, 6, 1.3, 0.2, seed=9)
    assert np.array_equal(a.categories, b.categories)
    assert np.array_equal(a.quality, b.quality)
    assert np.array_equal(a.popularity, b.popularity)


def test_generate_catalog_zero_exponent_is_uniform():
    cat = generate_catalog(50, 5, 0.0, 0.2, seed=1)
    assert np.all(np.abs(cat.popularity - 1.0 / 50) < 1e-9)


def test_generate_catalog_tail_contains_quality():
    """The less-popular half of the catalog holds every at-least-median quality value."""
    for seed in range(6):
        cat = generate_catalog(100, 8, 1.2, 0.2, seed=seed)
        pool = np.lexsort((np.arange(100), cat.popularity))[:50]
        median_q = np.median(cat.quality)
        assert np.all(cat.quality[pool] >= median_q)
        rest = np.lexsort((np.arange(100), cat.popularity))[50:]
        assert np.all(cat.quality[rest] < median_q)


def test_generate_catalog_floor_holds_top_quality():
    """The least-popular cold-fraction floor holds exactly the top quality values."""
    for seed in range(6):
        cat = generate_catalog(100, 8, 1.2, 0.2, seed=seed)
        floor = np.lexsort((np.arange(100), cat.popularity))[:20]
        top_values = np.sort(cat.quality)[-20:]
        assert np.array_equal(np.sort(cat.quality[floor]), top_values)


def test_generate_catalog_rejects_bad_args():
    with pytest.raises(ValueError):
        generate_catalog(4, 8, 1.0, 0.2, seed=0)
    with pytest.raises(ValueError):
        generate_catalog(20, 1, 1.0, 0.2, seed=0)
    with pytest.raises(ValueError):
        generate_catalog(20, 4, 1.0, 1.5, seed=0)


def test_generate_users_simplex_and_determinism():
    users = generate_users(30, 10, seed=2)
    assert len(users) == 30
    for u in users:
        assert np.all(u.preference >= 0)
        assert abs(u.preference.sum() - 1.0) <= 1e-9
        assert 20.0 <= u.engagement_scale <= 60.0
    again = generate_users(30, 10, seed=2)
    assert all(
        np.array_equal(a.preference, b.preference) for a, b in zip(users, again)
    )


def test_generate_users_pure_mainstream_collapses_to_prior():
    users = generate_users(5, 6, seed=0, mainstream_weight=1.0)
    prior = 1.0 / (np.arange(6) + 1.0)
    prior = prior / prior.sum()
    for u in users:
        assert u.preference == pytest.approx(prior, abs=1e-12)


def test_logged_pretraining_deterministic_and_in_range():
    cat = generate_catalog(40, 4, 1.1, 0.2, seed=3)
    users = generate_users(6, 4, seed=5)
    log1 = logged_pretraining(cat, users, 500, seed=11)
    log2 = logged_pretraining(cat, users, 500, seed=11)
    assert len(log1) == 500
    assert np.array_equal(log1.item_ids, log2.item_ids)
    assert np.array_equal(log1.user_ids, log2.user_ids)
    assert log1.item_ids.min() >= 0 and log1.item_ids.max() < 40
    assert log1.user_ids.min() >= 0 and log1.user_ids.max() < 6


def test_logged_pretraining_extreme_popularity_concentrates():
    # With a huge exponent all weight sits on the single most popular item.
    cat = generate_catalog(10, 2, 60.0, 0.2, seed=7)
    users = [uniform_user(2)]
    log = logged_pretraining(cat, users, 300, seed=1)
    top = int(np.argmax(cat.popularity))
    assert np.all(log.item_ids == top)


def test_logged_pretraining_counts_track_weights():
    """Single-user draw frequencies stay within 3 sigma of the sampling weights."""
    cat = generate_catalog(12, 3, 0.8, 0.2, seed=8)
    user = uniform_user(3)
    n = 20000
    log = logged_pretraining(cat, [user], n, seed=2)
    weights = cat.popularity * user.preference[cat.categories]
    p = weights / weights.sum()
    counts = log.item_counts(12)
    sigma = np.sqrt(n * p * (1 - p))
    assert np.all(np.abs(counts - n * p) <= 3 * sigma + 1e-9)


def test_feedback_floor_and_ceiling():
    cat = generate_catalog(20, 4, 1.0, 0.2, seed=0)
    user = uniform_user(4, engagement=10.0)
    rng = np.random.default_rng(0)
    floor_cfg = FeedbackConfig(click_bias=-1e3, watch_noise_sigma=0.0)
    assert feedback(user, [0, 1, 2], cat, rng, floor_cfg) == pytest.approx([0.0, 0.0])
    ceil_cfg = FeedbackConfig(click_bias=1e3, watch_noise_sigma=0.0)
    items = [3, 4, 5, 6]
    reward = feedback(user, items, cat, rng, ceil_cfg)
    assert reward[0] == len(items)
    assert reward[1] == pytest.approx(10.0 * cat.quality[items].sum(), rel=1e-12)


def test_feedback_click_mean_matches_analytic():
    cat = generate_catalog(30, 5, 1.0, 0.2, seed=6)
    user = generate_users(1, 5, seed=3)[0]
    cfg = FeedbackConfig()
    items = np.array([0, 5, 12, 20, 28])
    p = 1.0 / (
        1.0
        + np.exp(
            -(
                cfg.affinity_weight * user.preference[cat.categories[items]]
                + cfg.quality_weight * cat.quality[items]
                + cfg.click_bias
            )
        )
    )
    rng = np.random.default_rng(42)
    trials = 10000
    total = sum(feedback(user, items, cat, rng, cfg)[0] for _ in range(trials))
    mean = total / trials
    sigma = math.sqrt(float((p * (1 - p)).sum()) / trials)
    assert abs(mean - p.sum()) <= 3 * sigma


def test_feedback_watch_needs_clicks():
    cat = generate_catalog(20, 4, 1.0, 0.2, seed=1)
    user = uniform_user(4)
    cfg = FeedbackConfig()
    rng = np.random.default_rng(5)
    for _ in range(200):
        clicks, watch = feedback(user, [1, 2, 3], cat, rng, cfg)
        assert np.isfinite(watch) and watch >= 0
        if clicks == 0:
            assert watch == 0.0


def test_feedback_rejects_bad_slates():
    cat = generate_catalog(20, 4, 1.0, 0.2, seed=1)
    user = uniform_user(4)
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError):
        feedback(user, [], cat, rng, FeedbackConfig())
    with pytest.raises(ValueError):
        feedback(user, [25], cat, rng, FeedbackConfig())


def test_identify_cold_items_oracle():
    counts = np.array([5, 1, 3, 0])
    assert identify_cold_items(counts, 0.5, 4) == frozenset({1, 3})
    assert identify_cold_items(counts, 0.999, 4) == frozenset({0, 1, 2, 3})
    # All-equal counts fall back to the lowest ids.
    assert identify_cold_items(np.full(6, 7), 0.5, 6) == frozenset({0, 1, 2})
    # A tiebreak key beats the id fallback; ids still settle exact ties.
    key = np.array([3.0, 2.0, 1.0, 1.0, 5.0, 4.0])
    assert identify_cold_items(np.full(6, 7), 0.5, 6, tiebreak=key) == frozenset({1, 2, 3})
    with pytest.raises(ValueError):
        identify_cold_items(np.full(6, 7), 0.5, 6, tiebreak=np.ones(4))


def test_identify_cold_items_accepts_log_and_validates():
    log = InteractionLog(
        user_ids=np.zeros(4, dtype=np.int64),
        item_ids=np.array([0, 0, 2, 2], dtype=np.int64),
    )
    assert identify_cold_items(log, 0.333, 3) == frozenset({1})
    assert identify_cold_items(log, 0.5, 3) == frozenset({0, 1})
    with pytest.raises(ValueError):
        identify_cold_items(np.array([1, 2]), 0.5, 3)
    with pytest.raises(ValueError):
        identify_cold_items(log, 0.0, 3)


def test_relevant_items_follow_click_probability():
    cat = generate_catalog(15, 3, 1.0, 0.2, seed=4)
    user = generate_users(1, 3, seed=9)[0]
    cfg = FeedbackConfig()
    (rel,) = relevant_items(cat, [user], cfg, n_relevant=4)
    logits = (
        cfg.affinity_weight * user.preference[cat.categories]
        + cfg.quality_weight * cat.quality
        + cfg.click_bias
    )
    expected = set(np.lexsort((np.arange(15), -logits))[:4].tolist())
    assert rel == frozenset(expected)
    with pytest.raises(ValueError):
        relevant_items(cat, [user], cfg, n_relevant=0)


def test_item_vectors_layout():
    cat = generate_catalog(10, 4, 1.0, 0.2, seed=2)
    vecs = item_vectors(cat)
    assert vecs.shape == (10, 5)
    for i in range(10):
        onehot = np.zeros(4)
        onehot[cat.categories[i]] = 1.0
        assert np.array_equal(vecs[i, :4], onehot)
        assert vecs[i, 4] == cat.quality[i]


def test_build_world_cold_set_comes_from_log():
    config = WorldConfig(
        n_items=80, n_subcats=6, n_users=12, n_pretrain_interactions=2000, n_relevant=6
    )
    world = build_world(config, seed=13)
    assert len(world.catalog.cold_items) == math.ceil(0.2 * 80)
    expected = identify_cold_items(
        world.log, 0.2, 80, tiebreak=world.catalog.popularity
    )
    assert world.catalog.cold_items == expected
    assert len(world.relevant) == 12


def test_build_world_deterministic():
    config = WorldConfig(
        n_items=50, n_subcats=5, n_users=6, n_pretrain_interactions=800, n_relevant=5
    )
    a = build_world(config, seed=21)
    b = build_world(config, seed=21)
    assert np.array_equal(a.catalog.quality, b.catalog.quality)
    assert np.array_equal(a.log.item_ids, b.log.item_ids)
    assert a.catalog.cold_items == b.catalog.cold_items
    assert a.relevant == b.relevant


def test_log_csv_roundtrip(tmp_path):
    log = InteractionLog(
        user_ids=np.array([0, 1, 0], dtype=np.int64),
        item_ids=np.array([4, 2, 7], dtype=np.int64),
    )
    path = tmp_path / "log.csv"
    save_log(log, path)
    loaded = load_log(path)
    assert np.array_equal(loaded.user_ids, log.user_ids)
    assert np.array_equal(loaded.item_ids, log.item_ids)
    first = path.read_text().splitlines()[0]
    assert first == "user_id,item_id,timestamp_ordinal"


def test_log_csv_rejects_malformed(tmp_path):
    bad_header = tmp_path / "a.csv"
    bad_header.write_text("user,item\n0,1\n")
    with pytest.raises(ValueError):
        load_log(bad_header)
    bad_field = tmp_path / "b.csv"
    bad_field.write_text("user_id,item_id,timestamp_ordinal\n0,x,0\n")
    with pytest.raises(ValueError, match="b.csv:2"):
        load_log(bad_field)
    empty = tmp_path / "c.csv"
    empty.write_text("user_id,item_id,timestamp_ordinal\n")
    with pytest.raises(ValueError):
        load_log(empty)


def test_catalog_json_roundtrip(tmp_path):
    cat = generate_catalog(25, 4, 1.1, 0.2, seed=5).with_cold_items(frozenset({1, 7}))
    path = tmp_path / "catalog.json"
    save_catalog(cat, path)
    loaded = load_catalog(path)
    assert np.array_equal(loaded.categories, cat.categories)
    assert np.array_equal(loaded.quality, cat.quality)
    assert np.array_equal(loaded.popularity, cat.popularity)
    assert loaded.cold_items == cat.cold_items


def test_catalog_rejects_foreign_json(tmp_path):
    path = tmp_path / "junk.json"
    path.write_text('{"kind": "policy_checkpoint"}')
    with pytest.raises(ValueError):
        load_catalog(path)


def test_user_model_validation():
    with pytest.raises(ValueError):
        UserModel(preference=np.array([0.5, 0.6]), engagement_scale=1.0).validate()
    with pytest.raises(ValueError):
        UserModel(preference=np.array([0.5, 0.5]), engagement_scale=0.0).validate()


def test_catalog_with_cold_items_validates_range():
    cat = generate_catalog(10, 3, 1.0, 0.2, seed=0)
    with pytest.raises(ValueError):
        cat.with_cold_items(frozenset({99}))
