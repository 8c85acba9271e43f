"""Toy autoregressive slate policy over a finite catalog.

The policy scores item i for user u as ``user_emb(u) . item_emb(i) + item_bias(i)``
and generates a slate by repeated softmax draws over the items not already
picked (no-repeat masking). Everything is exact 64-bit numpy: log-probabilities
and their analytic gradients are available in closed form, which is what the
optimizers build on.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

CHECKPOINT_SCHEMA_VERSION = 1


@dataclass
class PolicyParams:
    """Parameters of the bilinear softmax slate policy.

    ``user_embeddings`` is (n_users, d), ``item_embeddings`` is (n_items, d),
    ``item_bias`` is (n_items,). ``seed`` records how the parameters were
    initialized, for checkpoint provenance.
    """

    user_embeddings: np.ndarray
    item_embeddings: np.ndarray
    item_bias: np.ndarray
    seed: int = 0

    @property
    def n_users(self) -> int:
        return self.user_embeddings.shape[0]

    @property
    def n_items(self) -> int:
        return self.item_embeddings.shape[0]

    @property
    def d(self) -> int:
        return self.item_embeddings.shape[1]

    def validate(self) -> None:
        if self.user_embeddings.ndim != 2 or self.item_embeddings.ndim != 2:
            raise ValueError("embedding matrices must be 2-D")
        if self.user_embeddings.shape[1] != self.item_embeddings.shape[1]:
            raise ValueError(
                "user and item embeddings disagree on dimension: "
                f"{self.user_embeddings.shape[1]} vs {self.item_embeddings.shape[1]}"
            )
        if self.item_bias.shape != (self.n_items,):
            raise ValueError("item_bias shape does not match item count")
        for name in ("user_embeddings", "item_embeddings", "item_bias"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"non-finite entries in {name}")


class FrozenPolicy(PolicyParams):
    """An immutable copy of :class:`PolicyParams` taken at sampling time."""


@dataclass
class Slate:
    """An ordered list of L distinct items with their sampling log-probs.

    ``logps[t]`` is the log-probability of ``items[t]`` given the preceding
    items, under the policy the slate was sampled from.
    """

    user_id: int
    items: tuple[int, ...]
    logps: np.ndarray

    def __len__(self) -> int:
        return len(self.items)


@dataclass
class PolicyGradient:
    """Gradient with the same shape as :class:`PolicyParams`."""

    user_embeddings: np.ndarray
    item_embeddings: np.ndarray
    item_bias: np.ndarray

    @classmethod
    def zeros_like(cls, params: PolicyParams) -> "PolicyGradient":
        return cls(
            user_embeddings=np.zeros_like(params.user_embeddings),
            item_embeddings=np.zeros_like(params.item_embeddings),
            item_bias=np.zeros_like(params.item_bias),
        )

    def scaled(self, factor: float) -> "PolicyGradient":
        return PolicyGradient(
            user_embeddings=self.user_embeddings * factor,
            item_embeddings=self.item_embeddings * factor,
            item_bias=self.item_bias * factor,
        )

    def all_finite(self) -> bool:
        return bool(
            np.all(np.isfinite(self.user_embeddings))
            and np.all(np.isfinite(self.item_embeddings))
            and np.all(np.isfinite(self.item_bias))
        )


def init_policy(
    n_users: int,
    n_items: int,
    d: int,
    seed: int,
    item_counts: np.ndarray | None = None,
    bias_smoothing: float = 10.0,
) -> PolicyParams:
    """Initialize policy parameters from a seeded stream.

    Embeddings are zero-mean normal with scale 1/sqrt(d). When ``item_counts``
    (per-item interaction counts from a logged history) is given, the item bias
    is the log of the additively smoothed empirical frequency: the policy
    starts popularity-biased, and ``bias_smoothing`` sets how many phantom
    interactions every item gets, which bounds how far behind the unseen
    items start.
    """
    if n_users < 1 or n_items < 1 or d < 1:
        raise ValueError("n_users, n_items and d must all be >= 1")
    rng = np.random.default_rng(seed)
    scale = 1.0 / np.sqrt(d)
    user_embeddings = rng.normal(0.0, scale, size=(n_users, d))
    item_embeddings = rng.normal(0.0, scale, size=(n_items, d))
    if item_counts is None:
        item_bias = np.zeros(n_items)
    else:
        if bias_smoothing <= 0:
            raise ValueError("bias_smoothing must be positive")
        counts = np.asarray(item_counts, dtype=np.float64)
        if counts.shape != (n_items,):
            raise ValueError("item_counts must have one entry per item")
        if np.any(counts < 0):
            raise ValueError("item_counts must be nonnegative")
        item_bias = np.log(
            (counts + bias_smoothing) / (counts.sum() + bias_smoothing * n_items)
        )
    params = PolicyParams(user_embeddings, item_embeddings, item_bias, seed=seed)
    params.validate()
    return params


def user_scores(params: PolicyParams, user: int) -> np.ndarray:
    """Unmasked logits for every item: ``item_emb @ user_emb[user] + bias``."""
    if not 0 <= user < params.n_users:
        raise ValueError(f"user id {user} out of range")
    return params.item_embeddings @ params.user_embeddings[user] + params.item_bias


def _masked_log_probs(scores: np.ndarray, blocked: np.ndarray) -> np.ndarray:
    """Log-softmax of ``scores`` restricted to unblocked items.

    Returns -inf at blocked positions. The same code path backs sampling,
    scoring and gradients, so stored log-probs reproduce exactly.
    """
    masked = np.where(blocked, -np.inf, scores)
    m = masked.max()
    logz = m + np.log(np.exp(masked - m).sum())
    return masked - logz


def _check_items(params: PolicyParams, items) -> tuple[int, ...]:
    items = tuple(int(i) for i in items)
    if len(items) == 0:
        raise ValueError("empty item sequence")
    if len(set(items)) != len(items):
        raise ValueError(f"repeated item in slate: {items}")
    for i in items:
        if not 0 <= i < params.n_items:
            raise ValueError(f"item id {i} out of range")
    return items


def next_item_distribution(
    params: PolicyParams, user: int, prefix=()
) -> np.ndarray:
    """Probability of each item at the next slate position.

    The returned vector has one entry per catalog item, is exactly zero on
    prefix items, and sums to 1 over the rest.
    """
    prefix = tuple(int(i) for i in prefix)
    if len(set(prefix)) != len(prefix):
        raise ValueError("prefix contains repeated items")
    if len(prefix) >= params.n_items:
        raise RuntimeError("prefix exhausts the catalog; no next item exists")
    scores = user_scores(params, user)
    blocked = np.zeros(params.n_items, dtype=bool)
    for i in prefix:
        if not 0 <= i < params.n_items:
            raise ValueError(f"prefix item id {i} out of range")
        blocked[i] = True
    logp = _masked_log_probs(scores, blocked)
    probs = np.exp(logp)
    probs[blocked] = 0.0
    return probs / probs.sum()


def sample_slate(
    params: PolicyParams, user: int, L: int, rng: np.random.Generator
) -> Slate:
    """Draw L items autoregressively without replacement, recording log-probs."""
    if L < 1:
        raise ValueError("slate length must be >= 1")
    if L > params.n_items:
        raise ValueError(f"catalog has {params.n_items} items, cannot fill L={L}")
    scores = user_scores(params, user)
    blocked = np.zeros(params.n_items, dtype=bool)
    items: list[int] = []
    logps = np.empty(L)
    for t in range(L):
        logp = _masked_log_probs(scores, blocked)
        probs = np.exp(logp)
        probs[blocked] = 0.0
        choice = int(rng.choice(params.n_items, p=probs / probs.sum()))
        items.append(choice)
        logps[t] = logp[choice]
        blocked[choice] = True
    return Slate(user_id=user, items=tuple(items), logps=logps)


def slate_log_prob(
    params: PolicyParams, user: int, items
) -> tuple[float, np.ndarray]:
    """Total and per-position log-probability of generating ``items`` in order."""
    items = _check_items(params, items)
    scores = user_scores(params, user)
    per_position = _positional_log_probs(scores, items)
    return float(per_position.sum()), per_position


def _positional_log_probs(scores: np.ndarray, items: tuple[int, ...]) -> np.ndarray:
    blocked = np.zeros(scores.shape[0], dtype=bool)
    out = np.empty(len(items))
    for t, item in enumerate(items):
        logp = _masked_log_probs(scores, blocked)
        out[t] = logp[item]
        blocked[item] = True
    return out


def _selection_weights(scores: np.ndarray, items: tuple[int, ...]) -> np.ndarray:
    """Sum over positions of (one-hot(chosen) - masked softmax probs).

    This vector w carries the whole gradient of the slate log-probability:
    d/d bias = w, d/d item_emb = outer(w, u), d/d user_emb = item_emb.T @ w.
    """
    n = scores.shape[0]
    blocked = np.zeros(n, dtype=bool)
    w = np.zeros(n)
    for item in items:
        logp = _masked_log_probs(scores, blocked)
        probs = np.exp(logp)
        probs[blocked] = 0.0
        w -= probs
        w[item] += 1.0
        blocked[item] = True
    return w


def log_prob_grad(params: PolicyParams, user: int, items) -> PolicyGradient:
    """Analytic gradient of the total slate log-probability.

    Returns the sum over positions of grad log pi(i_t | u, prefix); callers
    that want the per-item average apply their own 1/L.
    """
    items = _check_items(params, items)
    scores = user_scores(params, user)
    w = _selection_weights(scores, items)
    grad = PolicyGradient.zeros_like(params)
    grad.item_bias[:] = w
    grad.item_embeddings[:] = np.outer(w, params.user_embeddings[user])
    grad.user_embeddings[user] = params.item_embeddings.T @ w
    return grad


def snapshot(params: PolicyParams) -> FrozenPolicy:
    """Immutable deep copy of the parameters; later updates leave it unchanged."""
    frozen = FrozenPolicy(
        user_embeddings=params.user_embeddings.copy(),
        item_embeddings=params.item_embeddings.copy(),
        item_bias=params.item_bias.copy(),
        seed=params.seed,
    )
    for arr in (frozen.user_embeddings, frozen.item_embeddings, frozen.item_bias):
        arr.setflags(write=False)
    return frozen


def mean_first_position_mass(params: PolicyParams, items: np.ndarray) -> float:
    """Mean over users of the first-position probability mass on ``items``.

    The probe the training reports use to track how much of the policy's head
    distribution sits on a given item pool (e.g. the cold set).
    """
    items = np.asarray(items, dtype=np.intp)
    logits = params.user_embeddings @ params.item_embeddings.T + params.item_bias
    logits -= logits.max(axis=1, keepdims=True)
    probs = np.exp(logits)
    probs /= probs.sum(axis=1, keepdims=True)
    return float(probs[:, items].sum(axis=1).mean())


def save_checkpoint(params: PolicyParams, path: str | Path) -> None:
    """Write parameters to a self-describing JSON checkpoint."""
    payload = {
        "schema_version": CHECKPOINT_SCHEMA_VERSION,
        "kind": "policy_checkpoint",
        "n_users": params.n_users,
        "n_items": params.n_items,
        "d": params.d,
        "seed": params.seed,
        "user_embeddings": params.user_embeddings.tolist(),
        "item_embeddings": params.item_embeddings.tolist(),
        "item_bias": params.item_bias.tolist(),
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True))


def load_checkpoint(path: str | Path) -> PolicyParams:
    payload = json.loads(Path(path).read_text())
    if payload.get("kind") != "policy_checkpoint":
        raise ValueError(f"{path}: not a policy checkpoint")
    params = PolicyParams(
        user_embeddings=np.array(payload["user_embeddings"], dtype=np.float64),
        item_embeddings=np.array(payload["item_embeddings"], dtype=np.float64),
        item_bias=np.array(payload["item_bias"], dtype=np.float64),
        seed=int(payload["seed"]),
    )
    expected = (payload["n_users"], payload["n_items"], payload["d"])
    if (params.n_users, params.n_items, params.d) != tuple(expected):
        raise ValueError(f"{path}: checkpoint dimensions inconsistent with matrices")
    params.validate()
    return params


def clone(params: PolicyParams) -> PolicyParams:
    """Writable deep copy (snapshot returns the read-only variant)."""
    return dataclasses.replace(
        params,
        user_embeddings=params.user_embeddings.copy(),
        item_embeddings=params.item_embeddings.copy(),
        item_bias=params.item_bias.copy(),
    )
