"""Group-relative policy optimization on a toy categorical sequence policy.

The policy holds one logit table of shape ``(max_len, |vocab|)`` per prompt;
token ``t`` is drawn from ``softmax(logits[t])`` independently of earlier
tokens. That keeps every quantity of the objective (per-token ratios, the
KL estimator, sequence log-likelihood gradients) in closed form.

Two update rules are provided:

``alg1``
    REINFORCE with a group-mean baseline: ascend
    ``(1/K) sum_k (s_k - mean(s)) * grad log pi(tau_k)``.
``eq5``
    descend the group-relative loss
    ``-(1/N) sum_i sum_t [ratio_it * A_i - beta * kl_it]`` where
    ``ratio = pi_theta / pi_ref``, ``A`` is the standardized group reward and
    ``kl = rho - log(rho) - 1`` with ``rho = pi_ref / pi_theta``. ``N`` is 1,
    or the total token count with ``length_normalize``.

The reference policy is a frozen copy of the initial policy.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from cotforge.errors import (
    EmptyGroup,
    InvariantViolation,
    LengthMismatch,
    NonpositiveProbability,
    UnknownPrompt,
)
from cotforge.hashing import MASK64, SplitMix64
from cotforge.reward import CCVRConfig, ccvr_reward

SPECIAL_TOKENS = ("<think>", "</think>", "<answer>", "</answer>", "yes", "no", ".")


def log_softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


@dataclass
class ToyPolicy:
    vocab: tuple[str, ...]
    max_len: int
    logits: dict[int, np.ndarray]

    @classmethod
    def uniform(cls, vocab: Sequence[str], max_len: int, prompt_ids: Sequence[int]) -> "ToyPolicy":
        return cls(tuple(vocab), max_len, {p: np.zeros((max_len, len(vocab))) for p in prompt_ids})

    def table(self, prompt_id: int) -> np.ndarray:
        try:
            return self.logits[prompt_id]
        except KeyError:
            raise UnknownPrompt(f"prompt {prompt_id} not in policy") from None

    def log_probs(self, prompt_id: int) -> np.ndarray:
        return log_softmax(self.table(prompt_id))

    def probs(self, prompt_id: int) -> np.ndarray:
        return np.exp(self.log_probs(prompt_id))

    def copy(self) -> "ToyPolicy":
        return ToyPolicy(self.vocab, self.max_len, {p: z.copy() for p, z in self.logits.items()})

    def detokenize(self, tokens: Sequence[int]) -> str:
        return " ".join(self.vocab[t] for t in tokens)


@dataclass
class Trajectory:
    tokens: list[int]
    token_logprobs_theta: list[float]
    token_logprobs_ref: list[float]
    reward: float = 0.0


@dataclass
class TrajectoryGroup:
    prompt_id: int
    trajectories: list[Trajectory]

    @property
    def K(self) -> int:
        return len(self.trajectories)

    @property
    def rewards(self) -> list[float]:
        return [t.reward for t in self.trajectories]

    def token_array(self) -> np.ndarray:
        return np.array([t.tokens for t in self.trajectories], dtype=np.int64)


@dataclass(frozen=True)
class GRPOConfig:
    K: int = 8
    beta: float = 0.001
    learning_rate: float = 8.0
    steps: int = 500
    seed: int = 0
    sigma_floor: float = 1e-8
    mode: str = "alg1"
    length_normalize: bool = False

    def __post_init__(self):
        if self.K < 2:
            raise InvariantViolation("grpo.K", "must be >= 2")
        if self.beta < 0:
            raise InvariantViolation("grpo.beta", "must be nonnegative")
        if self.learning_rate <= 0:
            raise InvariantViolation("grpo.learning_rate", "must be positive")
        if self.steps < 0:
            raise InvariantViolation("grpo.steps", "must be >= 0")
        if not 0 <= self.seed <= MASK64:
            raise InvariantViolation("grpo.seed", "must be an unsigned 64-bit integer")
        if self.sigma_floor <= 0:
            raise InvariantViolation("grpo.sigma_floor", "must be positive")
        if self.mode not in ("alg1", "eq5"):
            raise InvariantViolation("grpo.mode", f"must be 'alg1' or 'eq5', got {self.mode!r}")


def sample_group(policy: ToyPolicy, prompt_id: int, K: int, seed: int,
                 ref: ToyPolicy | None = None) -> TrajectoryGroup:
    """Draw K full-length sequences; log-probs recorded under policy and ref."""
    if K < 1:
        raise EmptyGroup("K must be >= 1")
    ref = policy if ref is None else ref
    lp = policy.log_probs(prompt_id)
    lp_ref = ref.log_probs(prompt_id)
    cdf = np.cumsum(np.exp(lp), axis=1)
    rng = np.random.default_rng(seed)
    u = rng.random((K, policy.max_len))
    V = len(policy.vocab)
    positions = np.arange(policy.max_len)
    trajs = []
    for k in range(K):
        toks = [min(int(np.searchsorted(cdf[t], u[k, t] * cdf[t, -1], side="right")), V - 1)
                for t in positions]
        trajs.append(Trajectory(
            toks,
            [float(lp[t, o]) for t, o in enumerate(toks)],
            [float(lp_ref[t, o]) for t, o in enumerate(toks)],
        ))
    return TrajectoryGroup(prompt_id, trajs)


def group_advantages(rewards: Sequence[float], sigma_floor: float = 1e-8) -> np.ndarray:
    """(r - mean) / max(population std, sigma_floor)."""
    r = np.asarray(rewards, dtype=np.float64)
    if r.size == 0:
        raise EmptyGroup("no rewards to normalize")
    centered = r - r.mean()
    if np.all(r == r[0]):
        return np.zeros_like(r)
    return centered / max(float(r.std()), sigma_floor)


def kl_estimate(p_theta: float, p_ref: float) -> float:
    if p_theta <= 0 or p_ref <= 0:
        raise NonpositiveProbability(f"probabilities must be positive, got {p_theta}, {p_ref}")
    rho = p_ref / p_theta
    return rho - math.log(rho) - 1.0


def _check_group(group: TrajectoryGroup, policy: ToyPolicy) -> np.ndarray:
    if group.K == 0:
        raise EmptyGroup("group has no trajectories")
    lengths = set()
    for t in group.trajectories:
        if not (len(t.tokens) == len(t.token_logprobs_theta) == len(t.token_logprobs_ref)):
            raise LengthMismatch("token and log-prob lists differ in length")
        if len(t.tokens) > policy.max_len:
            raise LengthMismatch(f"trajectory longer than max_len={policy.max_len}")
        lengths.add(len(t.tokens))
    if len(lengths) != 1:
        raise LengthMismatch("toy trajectories must share one length")
    return group.token_array()


def _scatter(coef: np.ndarray, tokens: np.ndarray, probs: np.ndarray) -> np.ndarray:
    """sum_i coef[i, t] * (onehot(tokens[i, t]) - probs[t]) for every position t."""
    L = tokens.shape[1]
    grad = np.zeros_like(probs)
    np.add.at(grad, (np.broadcast_to(np.arange(L), tokens.shape), tokens), coef)
    grad[:L] -= coef.sum(axis=0)[:, None] * probs[:L]
    return grad


def grpo_loss(group: TrajectoryGroup, policy: ToyPolicy, ref: ToyPolicy,
              cfg: GRPOConfig) -> tuple[float, np.ndarray]:
    """Group-relative loss and its exact gradient w.r.t. the prompt's logit table."""
    tokens = _check_group(group, policy)
    K, L = tokens.shape
    adv = group_advantages(group.rewards, cfg.sigma_floor)
    lp = policy.log_probs(group.prompt_id)
    lp_ref = ref.log_probs(group.prompt_id)
    pos = np.broadcast_to(np.arange(L), tokens.shape)
    log_ratio = lp[pos, tokens] - lp_ref[pos, tokens]
    ratio = np.exp(log_ratio)
    rho = np.exp(-log_ratio)
    kl = rho + log_ratio - 1.0
    norm = float(K * L) if cfg.length_normalize else 1.0
    loss = -float(np.sum(ratio * adv[:, None] - cfg.beta * kl)) / norm
    coef = -(ratio * adv[:, None] + cfg.beta * (rho - 1.0)) / norm
    return loss, _scatter(coef, tokens, np.exp(lp))


def alg1_objective(group: TrajectoryGroup, policy: ToyPolicy) -> tuple[float, np.ndarray]:
    """(1/K) sum_k (s_k - mean s) log pi(tau_k) and its gradient."""
    tokens = _check_group(group, policy)
    K, L = tokens.shape
    s = np.asarray(group.rewards, dtype=np.float64)
    centered = s - s.mean()
    lp = policy.log_probs(group.prompt_id)
    pos = np.broadcast_to(np.arange(L), tokens.shape)
    seq_lp = lp[pos, tokens].sum(axis=1)
    value = float(np.dot(centered, seq_lp)) / K
    coef = np.broadcast_to((centered / K)[:, None], tokens.shape)
    return value, _scatter(coef, tokens, np.exp(lp))


def reinforce_step(policy: ToyPolicy, group: TrajectoryGroup, cfg: GRPOConfig) -> dict:
    """One in-place ascent step on the baseline-subtracted objective."""
    if group.K == 0:
        raise EmptyGroup("group has no trajectories")
    value, grad = alg1_objective(group, policy)
    policy.logits[group.prompt_id] += cfg.learning_rate * grad
    gnorm = float(np.linalg.norm(grad))
    return {
        "mean_reward": float(np.mean(group.rewards)),
        "loss": -value,
        "grad_norm": gnorm,
        "update_norm": cfg.learning_rate * gnorm,
    }


def eq5_step(policy: ToyPolicy, ref: ToyPolicy, group: TrajectoryGroup, cfg: GRPOConfig) -> dict:
    loss, grad = grpo_loss(group, policy, ref, cfg)
    policy.logits[group.prompt_id] -= cfg.learning_rate * grad
    gnorm = float(np.linalg.norm(grad))
    return {
        "mean_reward": float(np.mean(group.rewards)),
        "loss": loss,
        "grad_norm": gnorm,
        "update_norm": cfg.learning_rate * gnorm,
    }


@dataclass(frozen=True)
class MicroTask:
    """Single-prompt task; full reward needs
    ``<think> s1 . s2 . </think> <answer> gt </answer>`` with s1, s2 the reference sentences.
    """
    prompt_id: int = 0
    ground_truth: str = "yes"
    sentences: tuple[str, ...] = ("the cat sits", "the dog runs", "a bird sings", "the car stops")
    ref_sentences: tuple[str, str] = ("the cat sits", "the dog runs")

    @property
    def vocab(self) -> tuple[str, ...]:
        return SPECIAL_TOKENS + self.sentences

    @property
    def ref_chain(self) -> str:
        return " ".join(s + "." for s in self.ref_sentences)

    @property
    def target(self) -> list[str]:
        s1, s2 = self.ref_sentences
        return ["<think>", s1, ".", s2, ".", "</think>", "<answer>", self.ground_truth, "</answer>"]

    @property
    def max_len(self) -> int:
        return len(self.target)

    def initial_policy(self) -> ToyPolicy:
        return ToyPolicy.uniform(self.vocab, self.max_len, [self.prompt_id])


@dataclass
class StepStat:
    step: int
    mean_reward: float
    loss: float
    grad_norm: float


@dataclass
class TrainReport:
    steps: list[StepStat] = field(default_factory=list)
    policy: ToyPolicy | None = None
    reference: ToyPolicy | None = None

    @property
    def mean_rewards(self) -> list[float]:
        return [s.mean_reward for s in self.steps]

    def to_dict(self) -> dict:
        return {"steps": [vars(s) for s in self.steps]}


def total_variation(a: ToyPolicy, b: ToyPolicy, prompt_id: int) -> float:
    """Largest per-position total-variation distance between two policies."""
    return float(0.5 * np.abs(a.probs(prompt_id) - b.probs(prompt_id)).sum(axis=1).max())


def train_toy(task: MicroTask = MicroTask(), cfg: GRPOConfig = GRPOConfig(),
              reward_cfg: CCVRConfig = CCVRConfig(), policy: ToyPolicy | None = None) -> TrainReport:
    policy = task.initial_policy() if policy is None else policy
    ref = policy.copy()
    report = TrainReport(policy=policy, reference=ref)
    seeds = SplitMix64(cfg.seed)
    cache: dict[str, float] = {}

    def score(text: str) -> float:
        if text not in cache:
            cache[text] = ccvr_reward(text, task.ground_truth, task.ref_chain, reward_cfg).total
        return cache[text]

    for step in range(cfg.steps):
        group = sample_group(policy, task.prompt_id, cfg.K, seeds.next_u64(), ref)
        for traj in group.trajectories:
            traj.reward = score(policy.detokenize(traj.tokens))
        if cfg.mode == "alg1":
            stats = reinforce_step(policy, group, cfg)
        else:
            stats = eq5_step(policy, ref, group, cfg)
        report.steps.append(StepStat(step, stats["mean_reward"], stats["loss"], stats["grad_norm"]))
    return report
