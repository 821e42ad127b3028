"""Gridworld dynamics: placement, rewards, restrictions, determinism."""

import numpy as np
import pytest

from harvestnorms.config import ALLOTMENT, ConfigError, ContractError, SimConfig
from harvestnorms.env import (
    EAT,
    GROUND,
    MOVE_EAST,
    MOVE_NORTH,
    MOVE_SOUTH,
    MOVE_WEST,
    SHORT,
    TALL,
    THROW,
    TREE,
    allotment_of,
    encode_features,
    episode_done,
    init_episode,
    observe,
    run_step,
    step_agent,
    wellbeing,
)

from conftest import RandomActor, make_sim, make_state, snapshot


def test_init_capabilities_defaults():
    cfg = make_sim()
    state = init_episode(cfg, 7)
    assert state.width == 8 and state.height == 4
    assert len(state.agents) == 4
    assert len(state.berries) == 12
    assert all(a.health == 5.0 for a in state.agents)
    assert all(a.bag == [] for a in state.agents)
    assert state.step == 0
    cells = [a.pos for a in state.agents] + list(state.berries)
    assert len(set(cells)) == len(cells)  # all entities on distinct cells


def test_init_same_seed_is_identical():
    cfg = make_sim()
    assert snapshot(init_episode(cfg, 123)) == snapshot(init_episode(cfg, 123))


def test_init_no_agents_rejected():
    with pytest.raises(ConfigError):
        make_sim(n_agents=0)


def test_init_overfull_grid_rejected():
    with pytest.raises(ConfigError):
        make_sim(grid_width=3, grid_height=3, n_agents=4, b_initial=12)


def test_init_allotment_placement_follows_profile():
    cfg = make_sim(scenario=ALLOTMENT)
    state = init_episode(cfg, 11)
    counts = [0] * 4
    for (x, _), tag in state.berries.items():
        assert tag == allotment_of(x, cfg)
        counts[tag] += 1
    assert counts == [6, 3, 2, 1]
    assert [a.trait for a in state.agents] == [0, 1, 2, 3]


def test_wellbeing_values():
    cfg = make_sim()
    state = make_state(cfg, [(0, 0)])
    agent = state.agents[0]
    assert wellbeing(agent, cfg) == 500.0
    agent.health = 1.0
    agent.bag = [GROUND] * 10
    assert wellbeing(agent, cfg) == pytest.approx(200.0)
    agent.alive = False
    assert wellbeing(agent, cfg) == 0.0


def test_move_clamps_at_edges():
    cfg = make_sim(n_agents=1, b_initial=1)
    state = make_state(cfg, [(0, 0)], berries={(7, 3): TREE})
    step_agent(state, 0, MOVE_WEST, cfg)
    assert state.agents[0].pos == (0, 0)
    step_agent(state, 0, MOVE_SOUTH, cfg)
    assert state.agents[0].pos == (0, 0)
    step_agent(state, 0, MOVE_EAST, cfg)
    assert state.agents[0].pos == (1, 0)
    step_agent(state, 0, MOVE_NORTH, cfg)
    assert state.agents[0].pos == (1, 1)


def test_forage_reward_on_clamped_move():
    # Agent stands on a berry it can harvest and moves into the wall.
    cfg = make_sim()
    state = make_state(cfg, [(0, 0), (5, 0), (6, 0), (7, 0)],
                       berries={(0, 0): TREE}, traits=[TALL, TALL, SHORT, SHORT])
    reward, _, _ = step_agent(state, 0, MOVE_WEST, cfg)
    assert reward == 1.0
    assert state.agents[0].bag == [TREE]
    assert (0, 0) not in state.berries


def test_eat_with_empty_bag_penalised_and_state_kept():
    cfg = make_sim()
    state = make_state(cfg, [(0, 0), (5, 0), (6, 0), (7, 0)], berries={(3, 3): GROUND})
    before = snapshot(state)
    reward, _, _ = step_agent(state, 0, EAT, cfg)
    assert reward == -0.2
    after = snapshot(state)
    # Identical except for the actor's health decay.
    assert after[1] == before[1]
    assert state.agents[0].health == pytest.approx(5.0 - 0.01)
    assert state.agents[0].bag == []


def test_eat_consumes_gains_health_and_regrows():
    cfg = make_sim()
    state = make_state(cfg, [(0, 0), (5, 0), (6, 0), (7, 0)],
                       berries={(3, 3): GROUND}, bags=[[TREE], [], [], []])
    reward, _, _ = step_agent(state, 0, EAT, cfg)
    assert reward == 1.0
    assert state.agents[0].bag == []
    assert state.agents[0].health == pytest.approx(5.0 + 0.1 - 0.01)
    assert state.agents[0].berries_eaten == 1
    assert len(state.berries) == 2  # one regrown


def test_throw_without_berries_penalised():
    cfg = make_sim()
    state = make_state(cfg, [(0, 0), (5, 0), (6, 0), (7, 0)])
    reward, _, _ = step_agent(state, 0, THROW, cfg)
    assert reward == -0.2


def test_throw_below_health_floor_penalised():
    cfg = make_sim()
    state = make_state(cfg, [(0, 0), (5, 0), (6, 0), (7, 0)],
                       healths=[0.5, 5.0, 5.0, 5.0], bags=[[TREE], [], [], []])
    reward, _, _ = step_agent(state, 0, THROW, cfg)
    assert reward == -0.2
    assert state.agents[0].bag == [TREE]
    assert all(a.bag == [] for a in state.agents[1:])


def test_throw_without_recipient_penalised():
    cfg = make_sim()
    state = make_state(cfg, [(0, 0), (5, 0), (6, 0), (7, 0)], bags=[[TREE], [], [], []])
    for other in state.agents[1:]:
        other.alive = False
        other.pos = None
    reward, _, _ = step_agent(state, 0, THROW, cfg)
    assert reward == -0.2
    assert state.agents[0].bag == [TREE]


def test_throw_reaches_the_worst_off_other():
    cfg = make_sim()
    state = make_state(cfg, [(0, 0), (5, 0), (6, 0), (7, 0)],
                       healths=[5.0, 4.0, 3.0, 4.5], bags=[[TREE], [], [], []])
    reward, _, _ = step_agent(state, 0, THROW, cfg)
    assert reward == 0.5
    assert state.agents[0].bag == []
    assert state.agents[2].bag == [TREE]  # lowest well-being other than the thrower


def test_capabilities_restriction_blocks_forage():
    cfg = make_sim()
    state = make_state(cfg, [(0, 0), (5, 0), (2, 2), (7, 0)],
                       berries={(2, 2): TREE}, traits=[TALL, TALL, SHORT, SHORT])
    reward, _, _ = step_agent(state, 2, MOVE_WEST, cfg)
    # Short agent moved off (2,2); tree berry stays; no forage reward.
    assert reward == 0.0
    state.agents[2].pos = (2, 2)
    reward, _, _ = step_agent(state, 2, MOVE_SOUTH, cfg)  # clamp attempts keep it moving
    assert (2, 2) in state.berries


def test_allotment_restriction_blocks_foreign_forage():
    cfg = make_sim(scenario=ALLOTMENT)
    # Agent 1 stands on a berry belonging to plot 0.
    state = make_state(cfg, [(12, 0), (1, 1), (8, 0), (13, 0)], berries={(1, 1): 0})
    reward, _, _ = step_agent(state, 1, MOVE_SOUTH, cfg)
    assert reward == 0.0
    assert (1, 1) in state.berries
    # The plot owner can harvest it.
    state.agents[0].pos = (1, 1)
    reward, _, _ = step_agent(state, 0, MOVE_SOUTH, cfg)
    assert reward == 1.0
    assert state.agents[0].bag == [0]


def test_allotment_regrow_returns_to_source_plot():
    cfg = make_sim(scenario=ALLOTMENT)
    state = make_state(cfg, [(0, 0), (5, 0), (9, 0), (13, 0)], bags=[[3], [], [], []])
    step_agent(state, 0, EAT, cfg)
    assert len(state.berries) == 1
    (x, _), tag = next(iter(state.berries.items()))
    assert allotment_of(x, cfg) == 3
    assert tag == 3


def test_death_on_decay():
    cfg = make_sim()
    state = make_state(cfg, [(0, 0), (5, 0), (6, 0), (7, 0)],
                       healths=[0.005, 5.0, 5.0, 5.0])
    reward, _, done = step_agent(state, 0, MOVE_EAST, cfg)
    agent = state.agents[0]
    assert done and not agent.alive
    assert reward == -1.0
    assert agent.pos is None and agent.health == 0.0
    with pytest.raises(ContractError):
        step_agent(state, 0, MOVE_EAST, cfg)


def test_survive_reward_on_final_step():
    cfg = make_sim(t_max=1)
    state = make_state(cfg, [(0, 0), (5, 0), (6, 0), (7, 0)])
    reward, _, done = step_agent(state, 0, MOVE_EAST, cfg)
    assert done
    assert reward == 1.0


def test_unknown_agent_rejected():
    cfg = make_sim()
    state = make_state(cfg, [(0, 0), (5, 0), (6, 0), (7, 0)])
    with pytest.raises(ContractError):
        step_agent(state, 99, MOVE_EAST, cfg)


class _CountingActor:
    def __init__(self, agent_id):
        self.id = agent_id
        self.turns = 0

    def take_turn(self, state):
        self.turns += 1


def test_run_step_each_living_agent_acts_once():
    cfg = make_sim()
    state = init_episode(cfg, 3)
    state.agents[1].alive = False
    state.agents[1].pos = None
    actors = [_CountingActor(i) for i in range(4)]
    done = run_step(state, actors, cfg)
    assert not done
    assert [a.turns for a in actors] == [1, 0, 1, 1]
    assert state.step == 1


def test_run_step_with_all_dead_is_noop():
    cfg = make_sim()
    state = init_episode(cfg, 3)
    for agent in state.agents:
        agent.alive = False
        agent.pos = None
    assert run_step(state, [_CountingActor(i) for i in range(4)], cfg) is True
    assert state.step == 0


def test_run_step_permutations_are_seeded():
    cfg = make_sim()

    def orders(seed):
        state = init_episode(cfg, seed)
        seen = []

        class Recorder:
            def __init__(self, i):
                self.id = i

            def take_turn(self, _state):
                seen.append(self.id)

        for _ in range(10):
            run_step(state, [Recorder(i) for i in range(4)], cfg)
        return seen

    assert orders(5) == orders(5)
    assert sorted(orders(5)[:4]) == [0, 1, 2, 3]


def test_berry_conservation_and_restrictions_over_random_walk():
    for scenario in ("capabilities", ALLOTMENT):
        cfg = make_sim(scenario=scenario)
        state = init_episode(cfg, 21)
        actors = [RandomActor(i, cfg, np.random.default_rng(100 + i)) for i in range(4)]
        done = False
        while not done:
            done = run_step(state, actors, cfg)
            total = len(state.berries) + sum(a.bag_count for a in state.agents)
            assert total == cfg.b_initial
            if scenario == ALLOTMENT:
                for (x, _), tag in state.berries.items():
                    assert tag == allotment_of(x, cfg)
        assert state.step == cfg.t_max  # nobody can die at default decay


def test_trajectories_are_reproducible():
    cfg = make_sim(scenario=ALLOTMENT)

    def trajectory():
        state = init_episode(cfg, 42)
        actors = [RandomActor(i, cfg, np.random.default_rng(7 * i)) for i in range(4)]
        snaps = []
        done = False
        while not done:
            done = run_step(state, actors, cfg)
            snaps.append(snapshot(state))
        return snaps

    assert trajectory() == trajectory()


def test_health_decay_accounting():
    cfg = make_sim()
    state = make_state(cfg, [(0, 0), (5, 0), (6, 0), (7, 0)])
    for _ in range(10):
        step_agent(state, 0, MOVE_EAST, cfg)
    assert state.agents[0].health == pytest.approx(5.0 + 10 * cfg.h_decay)


def test_observation_distance_uses_visible_berries_only():
    cfg = make_sim()
    state = make_state(cfg, [(0, 0), (5, 0), (6, 0), (7, 0)],
                       berries={(1, 1): GROUND, (4, 0): TREE},
                       traits=[TALL, TALL, SHORT, SHORT])
    obs_tall = observe(state, 0, cfg)
    assert obs_tall.berry_distance == 4  # tree berry at (4,0)
    obs_short = observe(state, 2, cfg)
    assert obs_short.berry_distance == 6  # ground berry at (1,1) from (6,0)
    del state.berries[(1, 1)]
    assert observe(state, 2, cfg).berry_distance == 8 + 4  # sentinel: no visible berry


def test_observation_wellbeing_vector_order_and_dead_zero():
    cfg = make_sim()
    state = make_state(cfg, [(0, 0), (5, 0), (6, 0), (7, 0)],
                       healths=[5.0, 4.0, 3.0, 2.0])
    state.agents[3].alive = False
    state.agents[3].pos = None
    obs = observe(state, 0, cfg)
    assert obs.wellbeing == (500.0, 400.0, 300.0, 0.0)


def test_encode_features_scaling():
    cfg = make_sim()
    state = make_state(cfg, [(0, 0), (5, 0), (6, 0), (7, 0)],
                       berries={(0, 2): TREE}, bags=[[TREE, TREE, GROUND], [], [], []])
    features = encode_features(observe(state, 0, cfg), cfg)
    assert features.shape == (7,)
    assert features[0] == pytest.approx(1.0)
    assert features[1] == pytest.approx(3 / 12)
    assert features[2] == pytest.approx(2 / 12)
    assert features[3] == pytest.approx((5.0 + 0.3) / 0.01 / 500.0)


def test_episode_done_conditions():
    cfg = make_sim(t_max=3)
    state = make_state(cfg, [(0, 0), (5, 0), (6, 0), (7, 0)])
    assert not episode_done(state, cfg)
    state.step = 3
    assert episode_done(state, cfg)
    state.step = 1
    for agent in state.agents:
        agent.alive = False
    assert episode_done(state, cfg)
