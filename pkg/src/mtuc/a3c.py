"""Asynchronous advantage actor-critic with hand-written gradients.

Network layout (all dense, tanh hidden units):

    state x -> h1 -> h2 -+-> group logits (masked categorical)
                         +-> value
                         +-> per-device unit g_i = tanh(P h2 + Q d_i + b)
                               -> offload logit, cache logit,
                                  bandwidth logit, compute logit
                             mean of g_i -> compute slack logit

The device unit is shared across devices, so the network size does not
depend on the group size. Resource shares are drawn as Gaussian latents
around the logits and mapped to the simplex with a softmax; the compute
simplex has one extra slack coordinate so the group may leave part of its
station compute unused. The log-likelihood uses the exact Gaussian density
of the latents.
"""

from __future__ import annotations

import csv
import io
import math
import threading
import time
from dataclasses import dataclass, field

import numpy as np

from .mdp import DEVICE_FEATURES, EnvAction, EnvConfig, EnvState, UnderwaterEnv
from .scenario import Scenario

CHECKPOINT_MAGIC = "mtuc-a3c"
CHECKPOINT_VERSION = 1
PARAM_ORDER = ("W1", "b1", "W2", "b2", "Wd", "bd", "wv", "bv", "P", "Q", "bg", "U", "c", "us", "cs")
OFF, CACHE, BW, CP = range(4)


class NonFiniteGradientError(FloatingPointError):
    pass


def _softplus(a):
    return np.logaddexp(0.0, a)


def _sigmoid(a):
    return 0.5 * (1.0 + np.tanh(0.5 * a))


def _bern_entropy(a):
    p = _sigmoid(a)
    return p * _softplus(-a) + (1 - p) * _softplus(a)


# ---------------------------------------------------------------------------
# network


class PolicyValueNet:
    def __init__(self, params: dict):
        self.params = {k: np.array(params[k], dtype=float) for k in PARAM_ORDER}

    @classmethod
    def create(cls, state_dim: int, num_dgs: int, width: int = 128, dev_width: int = 32, seed: int = 0,
               dev_features: int = DEVICE_FEATURES) -> "PolicyValueNet":
        rng = np.random.Generator(np.random.PCG64(seed))

        def dense(out, inp, gain=1.0):
            lim = gain * math.sqrt(6.0 / (inp + out))
            return rng.uniform(-lim, lim, size=(out, inp))

        return cls({
            "W1": dense(width, state_dim), "b1": np.zeros(width),
            "W2": dense(width, width), "b2": np.zeros(width),
            "Wd": dense(num_dgs, width, 0.1), "bd": np.zeros(num_dgs),
            "wv": dense(1, width, 0.1)[0], "bv": np.zeros(1),
            "P": dense(dev_width, width), "Q": dense(dev_width, dev_features), "bg": np.zeros(dev_width),
            "U": dense(4, dev_width, 0.1), "c": np.zeros(4),
            "us": dense(1, dev_width, 0.1)[0], "cs": np.zeros(1),
        })

    @classmethod
    def zeros_like(cls, other: "PolicyValueNet") -> "PolicyValueNet":
        return cls({k: np.zeros_like(v) for k, v in other.params.items()})

    def copy(self) -> "PolicyValueNet":
        return PolicyValueNet(self.params)

    @property
    def state_dim(self) -> int:
        return self.params["W1"].shape[1]

    @property
    def num_dgs(self) -> int:
        return self.params["Wd"].shape[0]

    def flat(self) -> np.ndarray:
        return np.concatenate([self.params[k].ravel() for k in PARAM_ORDER])

    def load_flat(self, vec: np.ndarray) -> None:
        i = 0
        for k in PARAM_ORDER:
            p = self.params[k]
            p[...] = vec[i:i + p.size].reshape(p.shape)
            i += p.size
        if i != len(vec):
            raise ValueError(f"parameter vector has {len(vec)} entries, expected {i}")

    def shapes(self) -> dict:
        return {k: v.shape for k, v in self.params.items()}


@dataclass
class Batch:
    """Inputs and realized actions of a rollout, padded to the device width W."""

    x: np.ndarray  # (T, D)
    dev: np.ndarray  # (T, W, F) features of the chosen group's devices
    dg_mask: np.ndarray  # (T, K)
    dev_mask: np.ndarray  # (T, W)
    dg: np.ndarray  # (T,)
    off: np.ndarray  # (T, W) realized offload bits
    off_m: np.ndarray  # (T, W) where offload was sampled
    cache: np.ndarray
    cache_m: np.ndarray
    bw_z: np.ndarray  # (T, W) Gaussian latents
    bw_m: np.ndarray
    cp_z: np.ndarray
    cp_m: np.ndarray
    slack_z: np.ndarray  # (T,)
    slack_m: np.ndarray  # (T,)
    noise_std: float = 0.5

    @classmethod
    def stack(cls, steps: list["StepRecord"], noise_std: float) -> "Batch":
        def s(name, dtype=float):
            return np.stack([np.asarray(getattr(r, name), dtype=dtype) for r in steps])

        return cls(
            x=s("x"), dev=s("dev"), dg_mask=s("dg_mask", bool), dev_mask=s("dev_mask", bool),
            dg=s("dg", np.int64), off=s("off"), off_m=s("off_m", bool), cache=s("cache"),
            cache_m=s("cache_m", bool), bw_z=s("bw_z"), bw_m=s("bw_m", bool), cp_z=s("cp_z"),
            cp_m=s("cp_m", bool), slack_z=s("slack_z"), slack_m=s("slack_m", bool), noise_std=noise_std,
        )


@dataclass
class StepRecord:
    x: np.ndarray
    dev: np.ndarray
    dg_mask: np.ndarray
    dev_mask: np.ndarray
    dg: int
    off: np.ndarray
    off_m: np.ndarray
    cache: np.ndarray
    cache_m: np.ndarray
    bw_z: np.ndarray
    bw_m: np.ndarray
    cp_z: np.ndarray
    cp_m: np.ndarray
    slack_z: float
    slack_m: bool


@dataclass
class Forward:
    h1: np.ndarray
    h2: np.ndarray
    dg_logits: np.ndarray
    dg_logp: np.ndarray  # masked log-probabilities, -inf where masked
    value: np.ndarray
    g: np.ndarray  # (T, W, G)
    gbar: np.ndarray  # (T, G)
    head: np.ndarray  # (T, W, 4)
    slack: np.ndarray  # (T,)


def _masked_log_softmax(logits, mask):
    z = np.where(mask, logits, -np.inf)
    m = z.max(axis=-1, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    lse = m + np.log(np.sum(np.exp(z - m), axis=-1, keepdims=True))
    return z - lse


def trunk(net: PolicyValueNet, x):
    p = net.params
    x = np.atleast_2d(x)
    if x.shape[1] != net.state_dim:
        raise ValueError(f"state has {x.shape[1]} features, network expects {net.state_dim}")
    h1 = np.tanh(x @ p["W1"].T + p["b1"])
    h2 = np.tanh(h1 @ p["W2"].T + p["b2"])
    return h1, h2


def device_head(net: PolicyValueNet, h2, dev, dev_mask):
    p = net.params
    g = np.tanh((h2 @ p["P"].T)[:, None, :] + dev @ p["Q"].T + p["bg"])
    g = g * dev_mask[..., None]
    head = g @ p["U"].T + p["c"]
    n = np.maximum(dev_mask.sum(axis=1), 1)[:, None]
    gbar = g.sum(axis=1) / n
    slack = gbar @ p["us"] + p["cs"][0]
    return g, gbar, head, slack


def forward(net: PolicyValueNet, x, dg_mask, dev, dev_mask) -> Forward:
    """Batched forward pass; ``dev`` holds the devices of the group acted on."""
    p = net.params
    h1, h2 = trunk(net, x)
    logits = h2 @ p["Wd"].T + p["bd"]
    dg_mask = np.atleast_2d(dg_mask)
    logp = _masked_log_softmax(logits, dg_mask)
    value = h2 @ p["wv"] + p["bv"][0]
    g, gbar, head, slack = device_head(net, h2, np.asarray(dev).reshape(len(h2), -1, p["Q"].shape[1]),
                                       np.asarray(dev_mask, dtype=bool).reshape(len(h2), -1))
    return Forward(h1, h2, logits, logp, value, g, gbar, head, slack)


def dg_probs(net: PolicyValueNet, x, dg_mask) -> np.ndarray:
    _, h2 = trunk(net, x)
    logits = h2 @ net.params["Wd"].T + net.params["bd"]
    return np.exp(_masked_log_softmax(logits, np.atleast_2d(dg_mask)))


def value_of(net: PolicyValueNet, x) -> float:
    _, h2 = trunk(net, x)
    return float(h2[0] @ net.params["wv"] + net.params["bv"][0])


# ---------------------------------------------------------------------------
# acting


def _softmax_masked_1d(z, mask):
    out = np.zeros_like(z)
    if mask.any():
        zz = z[mask] - z[mask].max()
        e = np.exp(zz)
        out[mask] = e / e.sum()
    return out


def act(net: PolicyValueNet, env: UnderwaterEnv, state: EnvState, rng: np.random.Generator | None,
        noise_std: float = 0.5, greedy: bool = False) -> tuple[EnvAction, StepRecord]:
    """Sample (or decode greedily) one joint action for the active AUV."""
    cfg = env.config
    x = env.features(state)
    dg_mask = env.dg_mask(state)
    p = net.params
    h1, h2 = trunk(net, x)
    logits = h2[0] @ p["Wd"].T + p["bd"]
    logp = _masked_log_softmax(logits[None, :], dg_mask[None, :])[0]
    probs = np.exp(logp)
    k = int(np.argmax(np.where(dg_mask, logits, -np.inf))) if greedy else int(rng.choice(len(probs), p=probs / probs.sum()))

    if k == env.retire_action:
        dev = np.zeros((env.width, DEVICE_FEATURES))
        dmask = np.zeros(env.width, dtype=bool)
    else:
        dev = env.device_features(state)[k]
        dmask = env.device_mask[k]
    g, gbar, head, slack = device_head(net, h2, dev[None], dmask[None])
    head, slack = head[0], float(slack[0])
    w = env.width

    off_m = dmask.copy() if cfg.offloading else np.zeros(w, bool)
    pr = _sigmoid(head[:, OFF])
    off = (pr > 0.5) if greedy else (rng.random(w) < pr)
    off &= off_m
    cache_m = off & cfg.caching
    pc = _sigmoid(head[:, CACHE])
    cache = (pc > 0.5) if greedy else (rng.random(w) < pc)
    cache &= cache_m

    def latent(mu):
        return mu.copy() if greedy else mu + noise_std * rng.standard_normal(mu.shape)

    tx = off & ~cache
    bw_m = tx & (cfg.bandwidth == "learned") & (tx.sum() >= 2)
    bw_z = np.where(bw_m, latent(head[:, BW]), 0.0)
    bandwidth = _softmax_masked_1d(bw_z, bw_m) if bw_m.any() else tx / max(tx.sum(), 1)

    cp_m = off & (cfg.compute == "learned")
    slack_m = bool(cp_m.any())
    cp_z = np.where(cp_m, latent(head[:, CP]), 0.0)
    slack_z = float(latent(np.array([slack]))[0]) if slack_m else 0.0
    if slack_m:
        z = np.append(cp_z, slack_z)
        compute = _softmax_masked_1d(z, np.append(cp_m, True))[:-1]
    else:
        compute = off / max(off.sum(), 1)

    action = EnvAction(dg=k, offload=off, cache=cache, bandwidth=bandwidth, compute=compute)
    rec = StepRecord(
        x=x, dev=dev, dg_mask=dg_mask, dev_mask=dmask, dg=k,
        off=off.astype(float), off_m=off_m, cache=cache.astype(float), cache_m=cache_m,
        bw_z=bw_z, bw_m=bw_m, cp_z=cp_z, cp_m=cp_m, slack_z=slack_z, slack_m=slack_m,
    )
    return action, rec


# ---------------------------------------------------------------------------
# returns, losses and gradients


def k_step_returns(rewards, bootstrap: float, discount: float) -> np.ndarray:
    out = np.empty(len(rewards))
    acc = float(bootstrap)
    for t in range(len(rewards) - 1, -1, -1):
        acc = rewards[t] + discount * acc
        out[t] = acc
    return out


@dataclass
class LossTerms:
    loss: float
    policy_loss: float
    value_loss: float
    entropy: float
    logp: np.ndarray
    values: np.ndarray


def log_prob_and_entropy(net: PolicyValueNet, b: Batch, fw: Forward | None = None):
    fw = fw or forward(net, b.x, b.dg_mask, b.dev, b.dev_mask)
    t = np.arange(len(b.dg))
    var = b.noise_std**2
    lp = fw.dg_logp[t, b.dg].copy()
    a_off, a_cache = fw.head[..., OFF], fw.head[..., CACHE]
    lp += np.sum(b.off_m * (b.off * a_off - _softplus(a_off)), axis=1)
    lp += np.sum(b.cache_m * (b.cache * a_cache - _softplus(a_cache)), axis=1)
    gauss_c = -0.5 * math.log(2 * math.pi * var)
    lp += np.sum(b.bw_m * (-(b.bw_z - fw.head[..., BW]) ** 2 / (2 * var) + gauss_c), axis=1)
    lp += np.sum(b.cp_m * (-(b.cp_z - fw.head[..., CP]) ** 2 / (2 * var) + gauss_c), axis=1)
    lp += b.slack_m * (-(b.slack_z - fw.slack) ** 2 / (2 * var) + gauss_c)
    p = np.exp(fw.dg_logp)
    ent = -np.sum(np.where(b.dg_mask, p * np.where(b.dg_mask, fw.dg_logp, 0.0), 0.0), axis=1)
    ent += np.sum(b.off_m * _bern_entropy(a_off), axis=1)
    ent += np.sum(b.cache_m * _bern_entropy(a_cache), axis=1)
    return lp, ent, fw


def loss_value(net: PolicyValueNet, b: Batch, adv, returns, entropy_coef: float, value_coef: float) -> LossTerms:
    lp, ent, fw = log_prob_and_entropy(net, b)
    pol = float(-np.sum(adv * lp) - entropy_coef * np.sum(ent))
    vl = float(np.sum((returns - fw.value) ** 2))
    return LossTerms(pol + value_coef * vl, pol, vl, float(ent.mean()), lp, fw.value)


def loss_and_grads(net: PolicyValueNet, b: Batch, adv, returns, entropy_coef: float = 0.01,
                   value_coef: float = 0.5) -> tuple[dict, LossTerms]:
    """Gradient of  sum_t [ -A_t log pi_t - coef * H_t + c_v (R_t - V_t)^2 ].

    ``adv`` is treated as a constant, so the critic is trained only by the
    squared-error term while the trunk receives both signals.
    """
    p = net.params
    lp, ent, fw = log_prob_and_entropy(net, b)
    adv = np.asarray(adv, dtype=float)
    returns = np.asarray(returns, dtype=float)
    T = len(adv)
    t = np.arange(T)
    var = b.noise_std**2

    # d loss / d group logits
    prob = np.exp(fw.dg_logp)
    logp0 = np.where(b.dg_mask, fw.dg_logp, 0.0)
    h_cat = -np.sum(prob * logp0, axis=1)
    onehot = np.zeros_like(prob)
    onehot[t, b.dg] = 1.0
    d_logits = -adv[:, None] * (onehot - prob) + entropy_coef * prob * (logp0 + h_cat[:, None])
    d_logits = np.where(b.dg_mask, d_logits, 0.0)

    # d loss / d device head outputs
    d_head = np.zeros_like(fw.head)
    a = fw.head[..., OFF]
    s = _sigmoid(a)
    d_head[..., OFF] = b.off_m * (-adv[:, None] * (b.off - s) + entropy_coef * a * s * (1 - s))
    a = fw.head[..., CACHE]
    s = _sigmoid(a)
    d_head[..., CACHE] = b.cache_m * (-adv[:, None] * (b.cache - s) + entropy_coef * a * s * (1 - s))
    d_head[..., BW] = b.bw_m * (-adv[:, None] * (b.bw_z - fw.head[..., BW]) / var)
    d_head[..., CP] = b.cp_m * (-adv[:, None] * (b.cp_z - fw.head[..., CP]) / var)
    d_slack = b.slack_m * (-adv * (b.slack_z - fw.slack) / var)
    d_value = 2.0 * value_coef * (fw.value - returns)

    grads = {k: np.zeros_like(v) for k, v in p.items()}
    grads["U"] = np.einsum("twj,twg->jg", d_head, fw.g)
    grads["c"] = d_head.sum(axis=(0, 1))
    grads["us"] = d_slack @ fw.gbar
    grads["cs"] = np.array([d_slack.sum()])
    n = np.maximum(b.dev_mask.sum(axis=1), 1)
    d_g = d_head @ p["U"] + (d_slack / n)[:, None, None] * p["us"][None, None, :]
    d_gpre = d_g * (1 - fw.g**2) * b.dev_mask[..., None]
    grads["Q"] = np.einsum("twg,twf->gf", d_gpre, b.dev)
    grads["bg"] = d_gpre.sum(axis=(0, 1))
    d_gsum = d_gpre.sum(axis=1)  # (T, G)
    grads["P"] = d_gsum.T @ fw.h2

    grads["Wd"] = d_logits.T @ fw.h2
    grads["bd"] = d_logits.sum(axis=0)
    grads["wv"] = d_value @ fw.h2
    grads["bv"] = np.array([d_value.sum()])
    d_h2 = d_logits @ p["Wd"] + d_value[:, None] * p["wv"][None, :] + d_gsum @ p["P"]
    d_pre2 = d_h2 * (1 - fw.h2**2)
    grads["W2"] = d_pre2.T @ fw.h1
    grads["b2"] = d_pre2.sum(axis=0)
    d_pre1 = (d_pre2 @ p["W2"]) * (1 - fw.h1**2)
    grads["W1"] = d_pre1.T @ np.atleast_2d(b.x)
    grads["b1"] = d_pre1.sum(axis=0)

    for k, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradientError(f"non-finite gradient in parameter {k}")
    pol = float(-np.sum(adv * lp) - entropy_coef * np.sum(ent))
    vl = float(np.sum((returns - fw.value) ** 2))
    return grads, LossTerms(pol + value_coef * vl, pol, vl, float(ent.mean()), lp, fw.value)


# ---------------------------------------------------------------------------
# optimizer and shared parameters


def finite_difference_errors(net: PolicyValueNet, b: Batch, adv, returns, entropy_coef: float = 0.01,
                             value_coef: float = 0.5, step: float = 1e-5) -> dict:
    """Relative error between analytic and central-difference gradients, per tensor."""
    grads, _ = loss_and_grads(net, b, adv, returns, entropy_coef, value_coef)
    out = {}
    for name in PARAM_ORDER:
        p = net.params[name]
        num = np.zeros_like(p)
        for i in np.ndindex(p.shape):
            old = p[i]
            p[i] = old + step
            up = loss_value(net, b, adv, returns, entropy_coef, value_coef).loss
            p[i] = old - step
            down = loss_value(net, b, adv, returns, entropy_coef, value_coef).loss
            p[i] = old
            num[i] = (up - down) / (2 * step)
        scale = np.linalg.norm(num) + np.linalg.norm(grads[name])
        out[name] = float(np.linalg.norm(num - grads[name]) / scale) if scale > 1e-12 else 0.0
    return out


@dataclass
class RmsPropState:
    accum: dict
    decay: float = 0.99
    lr: float = 1e-3
    eps: float = 1e-8

    @classmethod
    def for_net(cls, net: PolicyValueNet, decay=0.99, lr=1e-3, eps=1e-8) -> "RmsPropState":
        return cls({k: np.zeros_like(v) for k, v in net.params.items()}, decay, lr, eps)


def rmsprop_apply(params: dict, grads: dict, st: RmsPropState, locks: dict | None = None,
                  clip: float | None = None) -> None:
    """In-place RMSProp step; each tensor is updated under its own lock."""
    scale = 1.0
    if clip is not None:
        norm = math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
        if norm > clip:
            scale = clip / norm
    for k, g in grads.items():
        g = g * scale
        lock = locks[k] if locks else None
        if lock:
            lock.acquire()
        try:
            acc = st.accum[k]
            acc *= st.decay
            acc += (1 - st.decay) * g * g
            params[k] -= st.lr * g / np.sqrt(acc + st.eps)
        finally:
            if lock:
                lock.release()


class SharedParams:
    """Global parameter store with per-tensor locks."""

    def __init__(self, net: PolicyValueNet, rms: RmsPropState):
        self.net = net
        self.rms = rms
        self.locks = {k: threading.Lock() for k in net.params}

    def snapshot(self) -> PolicyValueNet:
        out = {}
        for k, v in self.net.params.items():
            with self.locks[k]:
                out[k] = v.copy()
        return PolicyValueNet(out)

    def apply(self, grads: dict, clip: float | None) -> None:
        rmsprop_apply(self.net.params, grads, self.rms, self.locks, clip)


# ---------------------------------------------------------------------------
# training


@dataclass(frozen=True)
class TrainConfig:
    discount: float = 0.99
    rollout: int | None = None  # defaults to K, one episode per rollout
    entropy_coef: float = 0.01
    value_coef: float = 0.5
    workers: int = 4
    max_steps: int = 20_000
    max_updates: int | None = None
    lr: float = 1e-3
    rms_decay: float = 0.99
    rms_eps: float = 1e-8
    width: int = 128
    dev_width: int = 32
    noise_std: float = 0.5
    grad_clip: float | None = 40.0
    adaptive_lr: bool = False
    lr_window: int = 50
    lr_min_improvement: float = 0.005
    lr_decay: float = 0.5
    lr_floor: float = 1e-5
    reward_scale: float | None = None  # None: estimated from random-policy rollouts
    shape_fixed_route: bool = True
    eval_every: int = 25
    keep_best: bool = True
    curve_window: int = 20
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.discount < 1:
            raise ValueError("discount must lie in [0, 1)")
        if self.rollout is not None and self.rollout < 1:
            raise ValueError("rollout length must be >= 1")
        if self.entropy_coef < 0:
            raise ValueError("entropy coefficient must be >= 0")
        if self.workers < 1:
            raise ValueError("need at least one worker")


@dataclass
class CurvePoint:
    update: int
    global_step: int
    mean_episode_profit: float
    entropy: float
    value_loss: float
    learning_rate: float


@dataclass
class TrainResult:
    net: PolicyValueNet
    curve: list[CurvePoint]
    best_profit: float
    best_decisions: object
    final_profit: float
    episodes: int
    wall_time: float
    reward_scale: float
    reward_shift: float
    stats: dict = field(default_factory=dict)

    def curve_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["update_index", "global_step", "mean_episode_profit", "entropy", "value_loss", "learning_rate"])
        for c in self.curve:
            w.writerow([c.update, c.global_step, f"{c.mean_episode_profit:.6f}", f"{c.entropy:.6f}",
                        f"{c.value_loss:.6f}", f"{c.learning_rate:.6g}"])
        return buf.getvalue()


def fixed_route_offset(env: UnderwaterEnv, state: EnvState, k: int, terminal: bool) -> float:
    """Movement reward of a step that the agent cannot influence under a fixed plan.

    Segment and return-leg costs are then functions of the step index alone,
    so removing them acts as a state-dependent baseline.
    """
    tab = env.tables
    chi = env.sc.constants.cost_auv
    j = state.active
    src = int(state.node[j])
    off = -chi * tab.energy[src, k + 1]
    if terminal:
        node = state.node.copy()
        node[j] = k + 1
        off -= chi * sum(tab.energy[n, 0] for n in node if n != 0)
    return off


def greedy_episode(net: PolicyValueNet, env: UnderwaterEnv, noise_std: float = 0.5):
    """Decode the deterministic policy; returns (profit, final state)."""
    s = env.reset()
    total = 0.0
    while not s.done:
        a, _ = act(net, env, s, None, noise_std, greedy=True)
        s, r, _ = env.step(s, a)
        total += r
    return total, s


def random_episode(env: UnderwaterEnv, rng: np.random.Generator):
    s = env.reset()
    rewards = []
    while not s.done:
        k = int(rng.choice(np.flatnonzero(env.dg_mask(s))))
        w = env.width
        a = EnvAction(k, rng.random(w) < 0.5, rng.random(w) < 0.5, rng.random(w), rng.random(w))
        nxt, r, _ = env.step(s, a)
        if env.config.plan is not None:
            r -= fixed_route_offset(env, s, k, nxt.done)
        rewards.append(r)
        s = nxt
    return rewards


def estimate_reward_normalization(env: UnderwaterEnv, seed: int, episodes: int = 16):
    """Per-step (mean, 1/std) of rewards under uniformly random actions."""
    rng = np.random.Generator(np.random.PCG64(seed + 7919))
    rs = np.concatenate([random_episode(env, rng) for _ in range(episodes)])
    std = float(rs.std())
    return float(rs.mean()), 1.0 / (std if std > 1e-9 else max(1.0, abs(float(rs.mean()))))


class _Trainer:
    def __init__(self, sc: Scenario, cfg: TrainConfig, env_config: EnvConfig | None, net: PolicyValueNet | None):
        self.sc = sc
        self.cfg = cfg
        self.env_config = env_config or EnvConfig()
        probe = UnderwaterEnv(sc, self.env_config)
        self.rollout = cfg.rollout or sc.K
        net = net or PolicyValueNet.create(probe.state_dim, probe.num_actions, cfg.width, cfg.dev_width, cfg.seed)
        self.shared = SharedParams(net, RmsPropState.for_net(net, cfg.rms_decay, cfg.lr, cfg.rms_eps))
        self.shaped = cfg.shape_fixed_route and self.env_config.plan is not None
        if cfg.reward_scale is None:
            self.shift, self.scale = estimate_reward_normalization(probe, cfg.seed)
        else:
            self.shift, self.scale = 0.0, cfg.reward_scale
        self.lock = threading.Lock()
        self.global_step = 0
        self.updates = 0
        self.episode_profits: list[float] = []
        self.curve: list[CurvePoint] = []
        self.best = (-math.inf, None, None)
        self.stop = False
        self.errors: list[BaseException] = []
        self.window_means: list[float] = []
        self._window_start = 0
        self.probe = probe

    def done(self) -> bool:
        cfg = self.cfg
        if self.stop or self.global_step >= cfg.max_steps:
            return True
        return cfg.max_updates is not None and self.updates >= cfg.max_updates

    def worker(self, wid: int):
        try:
            self._worker(wid)
        except BaseException as exc:  # surface to the caller after join
            with self.lock:
                self.errors.append(exc)
                self.stop = True

    def _worker(self, wid: int):
        cfg = self.cfg
        env = UnderwaterEnv(self.sc, self.env_config)
        rng = np.random.Generator(np.random.PCG64([cfg.seed, wid]))
        state = env.reset()
        ep_profit = 0.0
        while not self.done():
            local = self.shared.snapshot()
            recs, rewards = [], []
            terminal = False
            for _ in range(self.rollout):
                action, rec = act(local, env, state, rng, cfg.noise_std)
                nxt, r, terminal = env.step(state, action)
                ep_profit += r
                if self.shaped:
                    r -= fixed_route_offset(env, state, action.dg, terminal)
                rewards.append((r - self.shift) * self.scale)
                recs.append(rec)
                state = nxt
                if terminal:
                    break
            boot = 0.0 if terminal else value_of(local, env.features(state))
            returns = k_step_returns(rewards, boot, cfg.discount)
            batch = Batch.stack(recs, cfg.noise_std)
            fw_vals = forward(local, batch.x, batch.dg_mask, batch.dev, batch.dev_mask).value
            adv = returns - fw_vals
            grads, terms = loss_and_grads(local, batch, adv, returns, cfg.entropy_coef, cfg.value_coef)
            self.shared.apply(grads, cfg.grad_clip)
            with self.lock:
                self.global_step += len(recs)
                self.updates += 1
                if terminal:
                    self.episode_profits.append(ep_profit)
                upd = self.updates
                recent = self.episode_profits[-cfg.curve_window:]
                mean_profit = float(np.mean(recent)) if recent else float("nan")
                self.curve.append(CurvePoint(upd, self.global_step, mean_profit, terms.entropy,
                                             terms.value_loss / len(recs), self.shared.rms.lr))
                if cfg.adaptive_lr and upd % cfg.lr_window == 0:
                    self._adapt_lr()
            if terminal:
                state = env.reset()
                ep_profit = 0.0
            if cfg.keep_best and wid == 0 and self.updates % cfg.eval_every == 0:
                self._evaluate(env)

    def _adapt_lr(self):
        """Halve the step size when the last window of updates barely improved on the one before."""
        cfg = self.cfg
        window = self.episode_profits[self._window_start:]
        self._window_start = len(self.episode_profits)
        if not window:
            return
        mean_profit = float(np.mean(window))
        if self.window_means:
            prev = self.window_means[-1]
            gain = (mean_profit - prev) / max(abs(prev), 1e-12)
            if gain < cfg.lr_min_improvement:
                rms = self.shared.rms
                rms.lr = max(cfg.lr_floor, rms.lr * cfg.lr_decay)
        self.window_means.append(mean_profit)

    def _evaluate(self, env: UnderwaterEnv):
        snap = self.shared.snapshot()
        profit, st = greedy_episode(snap, env, self.cfg.noise_std)
        with self.lock:
            if profit > self.best[0]:
                self.best = (profit, snap, st.decision_set())

    def run(self) -> TrainResult:
        t0 = time.perf_counter()
        cfg = self.cfg
        if cfg.workers == 1:
            self.worker(0)
        else:
            threads = [threading.Thread(target=self.worker, args=(w,), daemon=True) for w in range(cfg.workers)]
            for th in threads:
                th.start()
            for th in threads:
                th.join()
        if self.errors:
            raise RuntimeError(f"training worker failed: {self.errors[0]!r}") from self.errors[0]
        final_net = self.shared.net.copy()
        env = UnderwaterEnv(self.sc, self.env_config)
        final_profit, final_state = greedy_episode(final_net, env, cfg.noise_std)
        best_profit, best_net, best_dec = self.best
        if final_profit >= best_profit or not cfg.keep_best:
            best_profit, best_net, best_dec = final_profit, final_net, final_state.decision_set()
        return TrainResult(
            net=best_net,
            curve=self.curve,
            best_profit=best_profit,
            best_decisions=best_dec,
            final_profit=final_profit,
            episodes=len(self.episode_profits),
            wall_time=time.perf_counter() - t0,
            reward_scale=self.scale,
            reward_shift=self.shift,
            stats={"updates": self.updates, "global_steps": self.global_step, "final_lr": self.shared.rms.lr},
        )


def train(sc: Scenario, config: TrainConfig | None = None, env_config: EnvConfig | None = None,
          net: PolicyValueNet | None = None) -> TrainResult:
    """Train an actor-critic policy for one scenario.

    With ``workers=1`` the run is fully deterministic for a given seed.
    """
    return _Trainer(sc, config or TrainConfig(), env_config, net).run()


# ---------------------------------------------------------------------------
# checkpoints


def save_checkpoint(net: PolicyValueNet, path) -> None:
    shapes = ";".join(f"{k}={'x'.join(map(str, net.params[k].shape))}" for k in PARAM_ORDER)
    header = f"{CHECKPOINT_MAGIC} v{CHECKPOINT_VERSION} {shapes}"
    np.savetxt(path, net.flat(), header=header, fmt="%.17g")


def load_checkpoint(path) -> PolicyValueNet:
    with open(path) as fh:
        first = fh.readline()
    parts = first.lstrip("# ").split()
    if len(parts) != 3 or parts[0] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a checkpoint file")
    if parts[1] != f"v{CHECKPOINT_VERSION}":
        raise ValueError(f"{path}: unsupported checkpoint version {parts[1]}")
    shapes = {}
    for item in parts[2].split(";"):
        k, dims = item.split("=")
        shapes[k] = tuple(int(d) for d in dims.split("x") if d)
    net = PolicyValueNet({k: np.zeros(shapes[k]) for k in PARAM_ORDER})
    net.load_flat(np.atleast_1d(np.loadtxt(path)))
    return net
