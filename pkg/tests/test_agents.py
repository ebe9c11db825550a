import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gridnav.agents import (
    action_values,
    argmax_action,
    BadDistribution,
    BadModelFile,
    EmptyBatch,
    EpsilonSchedule,
    InsufficientSamples,
    KindMismatch,
    MlpParams,
    QTable,
    ReplayBuffer,
    TransitionBatch,
    buffer_push,
    buffer_sample,
    dqn_update,
    epsilon_at,
    epsilon_greedy_probs,
    greedy_action,
    load_model,
    loss_and_grad,
    mlp_forward,
    qlearning_batch_update,
    qlearning_update,
    sarsa_update,
    save_model,
    select_action,
    state_value,
    td_targets,
)
from gridnav.env import Action, AgentState, Transition

# chi-square 99% critical values
CHI2_99_DF7 = 18.475
CHI2_99_DF9 = 21.666


def _t(s=(0, 0), a=Action.RIGHT, r=-1.0, s2=(10, 0), done=False):
    return Transition(AgentState(*s), Action(a), r, AgentState(*s2), done)


# epsilon schedule


def test_epsilon_endpoints():
    sched = EpsilonSchedule(0.6, 0.1, 500)
    assert epsilon_at(sched, 0) == 0.6
    assert epsilon_at(sched, 500) == 0.1
    assert epsilon_at(sched, 10_000) == 0.1


def test_epsilon_midpoint():
    sched = EpsilonSchedule(0.6, 0.1, 500)
    assert sched.delta == pytest.approx(0.001)
    assert epsilon_at(sched, 250) == pytest.approx(0.35, abs=1e-12)


def test_epsilon_is_non_increasing():
    sched = EpsilonSchedule(0.6, 0.1, 300)
    eps = [epsilon_at(sched, e) for e in range(400)]
    assert all(a >= b for a, b in zip(eps, eps[1:]))


def test_epsilon_schedule_validation():
    with pytest.raises(ValueError):
        EpsilonSchedule(0.1, 0.6, 10)
    with pytest.raises(ValueError):
        epsilon_at(EpsilonSchedule(), -1)


# action selection


def test_select_action_greedy(rng):
    q = [0, 0, 0, 1, 0, 0, 0, 0]
    assert select_action(q, 0.0, rng) is Action.RIGHT
    assert select_action(np.zeros(8), 0.0, rng) is Action.UP


def test_select_action_uniform_when_exploring():
    rng = np.random.default_rng(7)
    n = 80_000
    counts = np.bincount([select_action(np.arange(8.0), 1.0, rng) for _ in range(n)], minlength=8)
    expected = n / 8
    chi2 = ((counts - expected) ** 2 / expected).sum()
    assert chi2 < CHI2_99_DF7


def test_epsilon_greedy_probs():
    p = epsilon_greedy_probs([0, 3, 0, 0, 0, 0, 0, 0], 0.4)
    assert p.sum() == pytest.approx(1.0)
    assert p[1] == pytest.approx(0.6 + 0.05)


# tabular updates


def test_qlearning_zero_table():
    table = QTable(4)
    tq = qlearning_update(table, Transition(0, Action.UP, -1.0, 1, False), 0.01, 0.99)
    assert table.values[0, 0] == -0.01
    assert tq.td_target == -1.0
    assert tq.td_error == 1.0


def test_qlearning_target_substitution():
    table = QTable(4)
    table.values[1] = [0, 2, 0, 0, 0, 0, 0, -5]
    tq = qlearning_update(table, Transition(0, Action.UP, -1.0, 1, False), 0.01, 0.99)
    assert abs(tq.td_target - 0.98) <= 1e-12


def test_terminal_target_ignores_next_state():
    table = QTable(4)
    table.values[1] = 100.0
    tq = qlearning_update(table, Transition(0, Action.UP, 20.0, 1, True), 0.5, 0.99)
    assert tq.td_target == 20.0
    tq = sarsa_update(table, Transition(2, Action.UP, 20.0, 1, True), Action.DOWN, 0.5, 0.99)
    assert tq.td_target == 20.0


def test_sarsa_zero_table():
    table = QTable(4)
    sarsa_update(table, Transition(2, Action.LEFT, -1.5, 3, False), Action.UP, 0.01, 0.99)
    assert table.values[2, Action.LEFT] == 0.01 * -1.5


def test_sarsa_target_substitution():
    table = QTable(4)
    table.values[1, Action.DOWN] = 2.0
    table.values[1, Action.UP] = 7.0
    tq = sarsa_update(table, Transition(0, Action.UP, -1.0, 1, False), Action.DOWN, 0.01, 0.99)
    assert abs(tq.td_target - 0.98) <= 1e-12


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-30, 30, allow_nan=False), min_size=8, max_size=8),
       st.floats(-20, 20, allow_nan=False), st.booleans())
def test_sarsa_on_argmax_equals_qlearning(row, r, done):
    a = QTable(3)
    a.values[1] = row
    b = a.copy()
    t = Transition(0, Action.LEFT, r, 1, done)
    qa = qlearning_update(a, t, 0.3, 0.9)
    qb = sarsa_update(b, t, int(np.argmax(row)), 0.3, 0.9)
    assert qa == qb and a == b


def test_update_validation():
    with pytest.raises(ValueError):
        qlearning_update(QTable(2), Transition(0, Action.UP, -1.0, 1, False), 0.0, 0.9)
    with pytest.raises(ValueError):
        qlearning_update(QTable(2), Transition(0, Action.UP, -1.0, 1, False), 0.1, 1.0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.01, 1.0))
def test_q_values_stay_bounded(seed, alpha):
    rng = np.random.default_rng(seed)
    table = QTable(5)
    gamma = 0.99
    rewards = np.array([-20.0, -1.0, -1.5, 18.5, 19.0])
    for _ in range(3000):
        t = Transition(int(rng.integers(5)), Action(int(rng.integers(8))), float(rng.choice(rewards)),
                       int(rng.integers(5)), bool(rng.random() < 0.1))
        qlearning_update(table, t, alpha, gamma)
    assert np.abs(table.values).max() <= 20 / (1 - gamma)


def test_batch_update_matches_sequential(paper_env, rng):
    buf = ReplayBuffer(100)
    states = paper_env.valid_states()
    for _ in range(60):
        s = states[rng.integers(len(states))]
        s2 = states[rng.integers(len(states))]
        buf.push(Transition(s, Action(int(rng.integers(8))), float(rng.choice([-1.0, -20.0])), s2,
                            bool(rng.random() < 0.2)))
    a = QTable.for_env(paper_env)
    a.values[:] = rng.normal(size=a.values.shape)
    b = a.copy()
    batch = buf.sample(32, rng)
    qlearning_batch_update(a, batch, 0.1, 0.9)
    for t in batch.transitions():
        qlearning_update(b, t, 0.1, 0.9)
    assert a == b


# greedy helpers


def test_greedy_action_on_tables(paper_env):
    table = QTable.for_env(paper_env)
    assert greedy_action(table, paper_env, (0, 0)) is Action.UP
    table.values[table.index((20, 20)), Action.UPPER_RIGHT] = 5.0
    assert greedy_action(table, paper_env, (20, 20)) is Action.UPPER_RIGHT


def test_greedy_agrees_with_select_action(paper_env, rng):
    table = QTable.for_env(paper_env)
    table.values[:] = rng.integers(-3, 3, size=table.values.shape)
    params = MlpParams.init(rng)
    for model in (table, params):
        for iy in range(10):
            for ix in range(10):
                s = (ix * 10, iy * 10)
                q = action_values(model, paper_env, s)
                assert greedy_action(model, paper_env, s) == select_action(q, 0.0, rng)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(-50, 50), min_size=8, max_size=8), st.integers(-1000, 1000))
def test_argmax_shift_invariance(row, c):
    assert argmax_action(np.array(row, float)) == argmax_action(np.array(row, float) + c)


def test_state_value_examples(paper_env):
    table = QTable.for_env(paper_env)
    uniform = np.full(8, 1 / 8)
    assert state_value(table, (0, 0), uniform) == 0.0
    table.values[0] = [8, 0, 0, 0, 0, 0, 0, 0]
    assert state_value(table, (0, 0), uniform) == 1.0
    table.values[0, 2] = -3.0
    assert state_value(table, (0, 0), np.eye(8)[2]) == -3.0
    with pytest.raises(BadDistribution):
        state_value(table, (0, 0), np.full(8, 0.2))
    with pytest.raises(BadDistribution):
        state_value(table, (0, 0), [1.5, -0.5, 0, 0, 0, 0, 0, 0])


# network


def _reference_forward(p, x):
    h = np.asarray(x, float)
    for i in range(len(p.weights)):
        z = np.array([sum(p.weights[i][o, k] * h[k] for k in range(len(h))) + p.biases[i][o]
                      for o in range(p.weights[i].shape[0])])
        h = z if i == len(p.weights) - 1 else np.where(z > 0, z, 0.0)
    return h


def test_forward_zero_params():
    assert np.array_equal(mlp_forward(MlpParams.zeros(), [0.3, 0.7]), np.zeros(8))


def test_forward_bias_passthrough():
    p = MlpParams.zeros()
    p.biases[-1][:] = np.arange(8)
    assert np.array_equal(mlp_forward(p, [0.5, 0.5]), np.arange(8.0))


def test_forward_matches_reference(rng):
    for _ in range(5):
        p = MlpParams.init(rng)
        for b in p.biases:
            b[:] = rng.normal(size=b.shape)
        x = rng.random(2)
        assert np.max(np.abs(mlp_forward(p, x) - _reference_forward(p, x))) <= 1e-12


def test_forward_batch_matches_rows(rng):
    p = MlpParams.init(rng)
    xs = rng.random((5, 2))
    batch = mlp_forward(p, xs)
    for i, x in enumerate(xs):
        assert np.allclose(batch[i], mlp_forward(p, x), rtol=0, atol=1e-12)


def test_init_shapes_and_bounds(rng):
    p = MlpParams.init(rng)
    assert p.sizes == (2, 64, 64, 8)
    for w in p.weights:
        assert np.all(np.abs(w) <= np.sqrt(6 / w.shape[1]))
    assert all(np.all(b == 0) for b in p.biases)
    assert MlpParams.init(np.random.default_rng(3)) == MlpParams.init(np.random.default_rng(3))


def _random_problem(rng, n):
    p = MlpParams.init(rng)
    for b in p.biases:
        b[:] = rng.normal(scale=0.5, size=b.shape)
    x = rng.random((n, 2))
    actions = rng.integers(0, 8, size=n)
    targets = rng.normal(scale=5.0, size=n)
    return p, x, actions, targets


def test_gradient_matches_finite_differences(rng):
    h = 1e-5
    for n in (1, 4):
        p, x, actions, targets = _random_problem(rng, n)
        _, grads = loss_and_grad(p, x, actions, targets)
        analytic = np.concatenate([g.ravel() for g in grads])
        theta = p.flat()
        numeric = np.empty_like(theta)
        for i in range(theta.size):
            up, down = theta.copy(), theta.copy()
            up[i] += h
            down[i] -= h
            lu, _ = loss_and_grad(p.with_flat(up), x, actions, targets)
            ld, _ = loss_and_grad(p.with_flat(down), x, actions, targets)
            numeric[i] = (lu - ld) / (2 * h)
        scale = np.maximum(np.abs(analytic) + np.abs(numeric), 1e-6)
        assert np.max(np.abs(analytic - numeric) / scale) <= 1e-4


def test_td_targets():
    p = MlpParams.zeros()
    p.biases[-1][:] = [0, 2, 0, 0, 0, 0, 0, 0]
    t = td_targets(p, np.zeros((2, 2)), np.array([-1.0, 20.0]), np.array([False, True]), 0.99)
    assert abs(t[0] - 0.98) <= 1e-12 and t[1] == 20.0


def test_dqn_update_zero_error_leaves_params(rng):
    p = MlpParams.zeros()
    p.biases[-1][:] = 1.0
    # every output is 1, so r = 1 - 0.99 makes the target equal the prediction
    batch = [_t(r=1.0 - 0.99 * 1.0)]
    before = p.copy()
    loss = dqn_update(p, batch, 0.1, 0.99)
    assert loss == pytest.approx(0.0, abs=1e-30)
    assert p == before


def test_dqn_update_mean_invariance(rng):
    p = MlpParams.init(rng)
    q = p.copy()
    t = _t(s=(0.2, 0.3), s2=(0.3, 0.3))
    la = dqn_update(p, [t], 0.01, 0.99)
    lb = dqn_update(q, [t, t], 0.01, 0.99)
    assert la == lb
    assert all(np.allclose(a, b, rtol=0, atol=1e-15) for a, b in zip(p.arrays(), q.arrays()))


def test_dqn_update_reduces_loss_on_fixed_targets(rng):
    p = MlpParams.init(rng)
    x = rng.random((16, 2))
    actions = rng.integers(0, 8, 16)
    targets = rng.normal(size=16)
    before, grads = loss_and_grad(p, x, actions, targets)
    for arr, g in zip(p.arrays(), grads):
        arr -= 1e-3 * g
    after, _ = loss_and_grad(p, x, actions, targets)
    assert after < before


def test_dqn_update_empty_batch():
    with pytest.raises(EmptyBatch):
        dqn_update(MlpParams.zeros(), [], 0.1, 0.9)


# replay buffer


def test_ring_eviction():
    buf = ReplayBuffer(2)
    items = [_t(r=float(-i)) for i in range(3)]
    for t in items:
        buffer_push(buf, t)
    assert len(buf) == 2
    assert buf.contents() == items[1:]


def test_full_batch_is_whole_buffer(rng):
    buf = ReplayBuffer(200)
    items = [_t(r=float(i)) for i in range(128)]
    for t in items:
        buf.push(t)
    batch = buffer_sample(buf, 128, rng)
    assert sorted(batch.r.tolist()) == sorted(t.r for t in items)


def test_insufficient_samples(rng):
    buf = ReplayBuffer(10)
    buf.push(_t())
    with pytest.raises(InsufficientSamples):
        buf.sample(2, rng)


def test_sampling_uniform():
    rng = np.random.default_rng(11)
    buf = ReplayBuffer(10)
    for i in range(25):  # wraps twice
        buf.push(_t(r=float(i)))
    counts = np.zeros(10)
    for _ in range(4000):
        counts[buf.sample_indices(3, rng)] += 1
    expected = counts.sum() / 10
    assert ((counts - expected) ** 2 / expected).sum() < CHI2_99_DF9


def test_batch_round_trip():
    items = [_t(), _t(s=(10, 0), a=Action.UP, s2=(10, 10), r=-1.5, done=True)]
    assert TransitionBatch.from_transitions(items).transitions() == items


# model files


def test_zero_table_round_trip():
    t = QTable(100)
    assert load_model(save_model(t)) == t
    assert save_model(t).splitlines()[0] == b"qtable 100 8"


def test_table_round_trip_exact(rng):
    t = QTable(7, rng.normal(size=(7, 8)) * 1e3)
    assert load_model(save_model(t), kind="qtable") == t


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_mlp_round_trip_bitwise(seed):
    rng = np.random.default_rng(seed)
    p = MlpParams.init(rng)
    for b in p.biases:
        b[:] = rng.normal(size=b.shape)
    q = load_model(save_model(p), kind="mlp")
    assert all(np.array_equal(a, b) for a, b in zip(p.arrays(), q.arrays()))
    assert save_model(p).splitlines()[0] == b"mlp 2 64 64 8"


def test_kind_mismatch():
    data = save_model(QTable(4))
    with pytest.raises(KindMismatch):
        load_model(data, kind="mlp")


def test_bad_model_file():
    with pytest.raises(BadModelFile):
        load_model(b"qtable 2 8\n0 0 0\n")
    with pytest.raises(BadModelFile):
        load_model(b"tree 3\n")
