"""Sequence-policy checks: anti-causality of the hindsight encoder,
causality of the action predictor, mask contracts, training-loss descent,
and the occupancy-steering property on a toy one-dimensional task."""

import numpy as np
import pytest

from auvtrack import nn
from auvtrack.env import EpisodeRecord
from auvtrack.maigdt import (
    AgentTrajectories,
    GdtConfig,
    GdtModel,
    GdtPolicy,
    HimEncoder,
    sample_windows,
    train_step,
)
from auvtrack.maigdt.model import action_regression_loss

CFG = GdtConfig(embed_dim=32, n_blocks=2, context=8, dz=4, max_timestep=200)


def make_him(rng=None):
    return HimEncoder(3, CFG, rng or np.random.default_rng(0))


def test_him_anticausal():
    him = make_him()
    rng = np.random.default_rng(1)
    states = rng.normal(size=(1, 8, 3))
    valid = np.ones((1, 8), dtype=bool)
    base = him.encode(states, valid).data.copy()
    pert = states.copy()
    pert[0, 2] += rng.normal(size=3)  # perturb s_2: z_3.. must not move
    out = him.encode(pert, valid).data
    assert np.abs(out[0, 3:] - base[0, 3:]).max() < 1e-12
    assert np.abs(out[0, :3] - base[0, :3]).max() > 1e-8


def test_him_single_state():
    him = make_him()
    z = him.encode(np.random.default_rng(2).normal(size=(1, 1, 3)),
                   np.ones((1, 1), dtype=bool))
    assert z.data.shape == (1, 1, CFG.dz)
    assert np.all(np.isfinite(z.data))


def test_him_padding_masked():
    him = make_him()
    rng = np.random.default_rng(3)
    states = rng.normal(size=(1, 8, 3))
    valid = np.ones((1, 8), dtype=bool)
    short = states.copy()
    short[0, 5:] = 0.0
    valid_short = valid.copy()
    valid_short[0, 5:] = False
    a = him.encode(short, valid_short).data[0, :5]
    # same five states without padding
    b = him.encode(states[:, :5], np.ones((1, 5), dtype=bool)).data[0]
    assert np.abs(a - b).max() < 1e-9


def test_him_gradient_reaches_parameters():
    him = make_him()
    rng = np.random.default_rng(4)
    z = him.encode(rng.normal(size=(2, 8, 3)), np.ones((2, 8), dtype=bool))
    nn.backward((z * z).mean())
    grads = [p.grad for _, p in him.parameters()]
    assert any(g is not None and np.abs(g).max() > 0 for g in grads)


def test_model_causal_in_tokens():
    rng = np.random.default_rng(5)
    model = GdtModel(3, 2, CFG, rng)
    z = nn.tensor(rng.normal(size=(1, 8, CFG.dz)))
    s = rng.normal(size=(1, 8, 3))
    a = rng.normal(size=(1, 8, 2))
    t = np.arange(8)[None, :]
    valid = np.ones((1, 8), dtype=bool)
    base = model.forward(z, s, a, t, valid).data.copy()
    s2 = s.copy()
    s2[0, 5] += 1.0  # future state: heads at positions < 5 unchanged
    out = model.forward(z, s2, a, t, valid).data
    assert np.abs(out[0, :5] - base[0, :5]).max() < 1e-12
    assert np.abs(out[0, 5:] - base[0, 5:]).max() > 1e-8
    a2 = a.copy()
    a2[0, 3] += 1.0  # a_3 sits after the s_3 head: prediction at 3 unchanged
    out = model.forward(z, s, a2, t, valid).data
    assert np.abs(out[0, :4] - base[0, :4]).max() < 1e-12


def test_masked_positions_contribute_zero_loss():
    rng = np.random.default_rng(6)
    pred = nn.tensor(rng.normal(size=(2, 8, 2)))
    target = rng.normal(size=(2, 8, 2))
    valid = np.ones((2, 8), dtype=bool)
    valid[:, :3] = False
    base = action_regression_loss(pred, target, valid).item()
    target2 = target.copy()
    target2[:, :3] = 999.0  # padded targets must not matter
    assert action_regression_loss(pred, target2, valid).item() == pytest.approx(base)


def test_perfect_prediction_zero_loss():
    target = np.random.default_rng(7).normal(size=(2, 8, 2))
    valid = np.ones((2, 8), dtype=bool)
    assert action_regression_loss(nn.tensor(target), target, valid).item() == 0.0


def _toy_records(style: str, episodes: int, T: int = 40) -> list[EpisodeRecord]:
    """1-D particle: state x, action a in [-1,1], x' = x + 0.2 a. Style
    'up' walks to +2 and holds; 'down' to -2."""
    out = []
    for k in range(episodes):
        goal = 2.0 if style == "up" else -2.0
        x = 0.0 + 0.05 * (k % 5)
        xs, acts = [], []
        for t in range(T):
            a = np.clip((goal - x) / 0.2, -1.0, 1.0)
            xs.append([x, goal - x, 1.0])
            acts.append([a, 0.0])
            x = x + 0.2 * a
        xs.append([x, goal - x, 1.0])
        obs = np.asarray(xs)[:, None, :]
        obs = np.concatenate([obs, obs], axis=1)  # two identical "agents"
        states = np.zeros((T + 1, 2, 6))
        states[:, :, 0] = obs[:, :, 0]
        out.append(EpisodeRecord(
            scenario_id="toy", n_agents=2, episode_seed=k, dt=0.08,
            obs=obs, actions=np.asarray(acts)[:, None, :].repeat(2, axis=1),
            rewards=None, absorbing=np.zeros(T + 1, dtype=bool),
            agent_states=states, target=np.zeros((T + 1, 4)),
            obstacles=[], done_reason="duration"))
    return out


@pytest.fixture(scope="module")
def toy_training():
    """One (model, him) pair trained on mixed up/down toy styles."""
    episodes = _toy_records("up", 6) + _toy_records("down", 6)
    data = AgentTrajectories(
        states=[ep.obs[:ep.steps, 0] for ep in episodes],
        actions=[ep.actions[:, 0] for ep in episodes])
    rng = np.random.default_rng(8)
    him = HimEncoder(3, CFG, rng)
    model = GdtModel(3, 2, CFG, rng)
    opt = nn.Adam(model.parameters() + [(f"him.{k}", p) for k, p in him.parameters()],
                  1e-3)
    losses = []
    for _ in range(220):
        batch = sample_windows(data, 16, CFG.context, rng)
        losses.append(train_step(model, him, opt, batch))
    return episodes, model, him, losses


def test_training_loss_decreases(toy_training):
    _, _, _, losses = toy_training
    assert np.mean(losses[-20:]) < 0.25 * np.mean(losses[:10])


def test_conditioning_steers_occupancy(toy_training):
    episodes, model, him, _ = toy_training
    policy = GdtPolicy(model, him, CFG)

    def rollout(demo_ep):
        demo_states = demo_ep.obs[:demo_ep.steps, 0]
        policy.reset_cache()
        x, xs = 0.0, []
        hist_s, hist_a = [], []
        goal_feature = demo_states[0, 1] + demo_states[0, 0]  # style's goal
        for t in range(demo_ep.steps):
            hist_s.append(np.array([x, goal_feature - x, 1.0]))
            a = policy.act(hist_s, hist_a, demo_states, t)
            hist_a.append(a)
            x = x + 0.2 * float(np.clip(a[0], -1, 1))
            xs.append(x)
        return np.asarray(xs)

    up = rollout(episodes[0])
    down = rollout(episodes[-1])
    bins = np.linspace(-2.5, 2.5, 21)

    def hist(xs):
        h, _ = np.histogram(xs, bins=bins)
        return (h + 1e-6) / (h.sum() + 21e-6)

    def kl(p, q):
        return float((p * np.log(p / q)).sum())

    h_up_demo = hist(np.cumsum(0.2 * np.clip(episodes[0].actions[:, 0, 0], -1, 1)))
    h_down_demo = hist(np.cumsum(0.2 * np.clip(episodes[-1].actions[:, 0, 0], -1, 1)))
    assert kl(hist(up), h_up_demo) < kl(hist(up), h_down_demo)
    assert kl(hist(down), h_down_demo) < kl(hist(down), h_up_demo)


def test_policy_deterministic(toy_training):
    episodes, model, him, _ = toy_training
    policy = GdtPolicy(model, him, CFG)
    demo = episodes[0].obs[: episodes[0].steps, 0]
    hist_s = [demo[0], demo[1]]
    hist_a = [np.array([0.5, 0.0])]
    policy.reset_cache()
    a1 = policy.act(hist_s, hist_a, demo, 1)
    policy.reset_cache()
    a2 = policy.act(hist_s, hist_a, demo, 1)
    assert np.array_equal(a1, a2)
    assert np.all(np.abs(a1) <= 1.0)


def test_short_episode_left_padded():
    episodes = _toy_records("up", 2, T=5)  # shorter than the context of 8
    data = AgentTrajectories(
        states=[ep.obs[:ep.steps, 0] for ep in episodes],
        actions=[ep.actions[:, 0] for ep in episodes])
    rng = np.random.default_rng(9)
    batch = sample_windows(data, 4, CFG.context, rng)
    assert batch["valid"].shape == (4, 8)
    assert not batch["valid"][:, 0].any()   # left padding
    assert batch["valid"][:, -1].all()


def test_dataset_agent_count_mismatch_rejected():
    from auvtrack.maigdt import train
    episodes = _toy_records("up", 2)
    with pytest.raises(ValueError):
        train(episodes, n_agents=3, steps=1, seed=0, cfg=CFG)


def test_training_reads_no_rewards():
    # structural: reward-free records train fine (rewards are None)
    episodes = _toy_records("up", 3)
    assert all(ep.rewards is None for ep in episodes)
    from auvtrack.maigdt import train
    result = train(episodes, n_agents=2, steps=2, seed=0, cfg=CFG, batch_size=4)
    assert len(result.policies) == 2
    # independent models: no shared parameter objects
    p0 = dict(result.policies[0].model.parameters())
    p1 = dict(result.policies[1].model.parameters())
    assert all(p0[k] is not p1[k] for k in p0)
