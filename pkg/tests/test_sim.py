import math

import numpy as np
import pytest

from janus_cpi.model import Participant, Role, Roster
from janus_cpi.sim import (
    SPEED_OF_LIGHT,
    ConfigError,
    DiscoveryStats,
    Inhibitor,
    MobilityError,
    MobilityScript,
    NeighborEntry,
    NodeState,
    Segment,
    SimConfig,
    build_trajectories,
    discovery_step,
    inhibitor_protocol,
    load_ground_truth,
    load_mobility,
    ranging_round,
    run_simulation,
    sstwr_exchange,
    write_ground_truth,
    write_mobility,
    write_simulation,
)

T0 = 1_600_000_000


def cfg(**kw):
    kw.setdefault("start", T0)
    kw.setdefault("end", T0 + 600)
    return SimConfig(**kw)


def static_script(positions, start=T0, end=T0 + 600):
    return MobilityScript((
        Segment(tuple(positions), start, end, (-100.0, -100.0, 100.0, 100.0), "static", positions=positions),
    ))


# -- config --------------------------------------------------------------------


@pytest.mark.parametrize("bad", [
    {"discovery_probability": 0},
    {"discovery_probability": 1.5},
    {"epoch_length": 0},
    {"range_noise_sigma": -1},
    {"max_neighbors": 40},  # 40 slots of 50 ms do not fit a 1 s window
    {"ranging_window": 40},
])
def test_config_validation(bad):
    with pytest.raises(ConfigError):
        cfg(**bad)


def test_config_from_mapping_rejects_unknown_and_roundtrips():
    with pytest.raises(ConfigError, match="bogus"):
        SimConfig.from_mapping({"start": 0, "end": 10, "bogus": 1})
    c = SimConfig.from_mapping({"start": 0, "end": 10, "inhibitors": [{"intervals": [[0, 5]]}]}, seed=4)
    assert c.seed == 4 and c.inhibitors[0].active(4) and not c.inhibitors[0].active(5)
    assert SimConfig.from_mapping(c.to_mapping()) == c


# -- SS-TWR ----------------------------------------------------------------------


def test_sstwr_timestamps():
    ex = sstwr_exchange(3.0, 290e-6)
    tof = 3.0 / SPEED_OF_LIGHT
    assert ex.t_reply == pytest.approx(290e-6, rel=1e-12)
    assert ex.t_round - ex.t_reply == pytest.approx(2 * tof, rel=1e-6)
    assert ex.time_of_flight() * SPEED_OF_LIGHT == pytest.approx(3.0, rel=1e-9)


# -- discovery ---------------------------------------------------------------------


def nodes_at(points):
    return {str(i): NodeState(str(i), position=np.array(p, dtype=float)) for i, p in enumerate(points)}


def test_discovery_respects_range_and_certain_success():
    nodes = nodes_at([(0, 0), (5, 0), (30, 0)])
    heard = discovery_step(nodes, 0, T0, cfg(discovery_probability=1.0), np.random.default_rng(0))
    assert heard == {"0": {"1"}, "1": {"0"}, "2": set()}
    assert nodes["0"].neighbors["1"].slot == 0


def test_discovery_slots_are_unique_and_capped():
    config = cfg(discovery_probability=1.0, max_neighbors=5, slot_width=0.05)
    nodes = nodes_at([(0.1 * i, 0) for i in range(9)])
    stats = DiscoveryStats()
    discovery_step(nodes, 0, T0, config, np.random.default_rng(0), stats)
    for n in nodes.values():
        slots = [e.slot for e in n.neighbors.values()]
        assert len(slots) == len(set(slots)) <= 5
        assert all(0 <= s < 5 for s in slots)
    assert stats.saturation_events == 9
    assert stats.excess_neighbors == 9 * 8 - sum(len(n.neighbors) for n in nodes.values())


def test_neighbor_entries_expire():
    config = cfg(neighbor_expiry=3)
    nodes = nodes_at([(0, 0), (50, 0)])
    nodes["0"].neighbors["1"] = NeighborEntry(0, 0)
    rng = np.random.default_rng(0)
    discovery_step(nodes, 2, T0, config, rng)
    assert "1" in nodes["0"].neighbors
    discovery_step(nodes, 3, T0, config, rng)
    assert "1" not in nodes["0"].neighbors


def test_discovery_rate_matches_probability():
    config = cfg(discovery_probability=0.95)
    rng = np.random.default_rng(3)
    stats = DiscoveryStats()
    for k in range(300):
        nodes = nodes_at([(i * 0.3, 0) for i in range(10)])
        before = stats.discoveries
        discovery_step(nodes, k, T0, config, rng, stats)
        assert stats.discoveries - before <= 90
    rate = stats.discoveries / (2 * stats.candidate_pairs)
    assert abs(rate - 0.95) < 0.01


# -- ranging -------------------------------------------------------------------------


def test_ranging_round_offsets_and_truth():
    config = cfg(range_noise_sigma=0.0, slot_width=0.05)
    nodes = nodes_at([(0, 0), (3, 4), (0, 2)])
    nodes["0"].neighbors = {"1": NeighborEntry(0, 0), "2": NeighborEntry(7, 0)}
    positions = {n: nd.position for n, nd in nodes.items()}
    truth = []
    out = ranging_round(nodes["0"], nodes, lambda t: positions, config, np.random.default_rng(0), T0 + 10, truth)
    assert [(m.device_a, m.device_b, m.timestamp) for m in out] == [("0", "1", T0 + 10), ("0", "2", T0 + 10)]
    assert out[0].distance == pytest.approx(5.0, rel=1e-9)
    assert [g.true_distance for g in truth] == pytest.approx([5.0, 2.0])


def test_ranging_discards_beyond_max_range_but_records_truth():
    config = cfg(range_noise_sigma=0.0, detection_range=12.0, max_range=10.0)
    nodes = nodes_at([(0, 0), (11, 0)])
    nodes["0"].neighbors = {"1": NeighborEntry(0, 0)}
    positions = {n: nd.position for n, nd in nodes.items()}
    truth = []
    out = ranging_round(nodes["0"], nodes, lambda t: positions, config, np.random.default_rng(0), T0, truth)
    assert out == [] and len(truth) == 1


def test_ranging_skips_sleeping_neighbour():
    config = cfg(range_noise_sigma=0.0)
    nodes = nodes_at([(0, 0), (1, 0)])
    nodes["0"].neighbors = {"1": NeighborEntry(0, 0)}
    nodes["1"].asleep_until = T0 + 100
    positions = {n: nd.position for n, nd in nodes.items()}
    assert ranging_round(nodes["0"], nodes, lambda t: positions, config, None, T0) == []


# -- inhibitor -------------------------------------------------------------------------


def test_inhibitor_sleep_and_wake():
    config = cfg()
    node = NodeState("1", neighbors={"2": NeighborEntry(0, 0)})
    inhibitor_protocol(node, True, T0, config)
    assert node.asleep_until == T0 + 300 and not node.neighbors
    inhibitor_protocol(node, False, T0 + 100, config)  # still asleep, no scan
    assert node.asleep_until == T0 + 300
    inhibitor_protocol(node, True, T0 + 300, config)
    assert node.asleep_until == T0 + 600
    inhibitor_protocol(node, False, T0 + 600, config)
    assert node.asleep_until is None and node.awake(T0 + 600)


def test_simulation_with_inhibitor_sleeps_in_five_minute_steps():
    roster = Roster({d: Participant(d, Role.CHILD, "g", "c") for d in ("1", "2")})
    config = cfg(end=T0 + 3600, inhibitors=(Inhibitor(((T0, T0 + 1000),)),), range_noise_sigma=0.0)
    result = run_simulation(config, roster, static_script({"1": (0.0, 0.0), "2": (1.0, 0.0)}, end=T0 + 3600))
    assert result.summary["sleep_intervals"] == {"1": [[T0, T0 + 1200]], "2": [[T0, T0 + 1200]]}
    assert result.measurements
    assert min(m.timestamp for m in result.measurements) >= T0 + 1200


# -- mobility --------------------------------------------------------------------------


def test_mobility_gap_names_device_and_window():
    script = MobilityScript((
        Segment(("1", "2"), T0, T0 + 100, (0, 0, 5, 5)),
        Segment(("1",), T0 + 100, T0 + 600, (0, 0, 5, 5)),
    ))
    with pytest.raises(MobilityError, match=rf"device 2 over \[{T0 + 100}, {T0 + 600}\)"):
        build_trajectories(script, ["1", "2"], T0, T0 + 600, np.random.default_rng(0))


def test_waypoints_stay_in_zone_and_static_positions_hold(tmp_path):
    script = MobilityScript((
        Segment(("1", "2"), T0, T0 + 300, (0, 0, 10, 6), "waypoint", affinity={"1": {"2": 5.0}}),
        Segment(("1", "2"), T0 + 300, T0 + 600, (20, 20, 30, 30), "static",
                positions={"1": (21.0, 21.0)}),
    ))
    write_mobility(tmp_path / "m.json", script)
    assert load_mobility(tmp_path / "m.json") == script
    traj = build_trajectories(script, ["1", "2"], T0, T0 + 600, np.random.default_rng(1))
    for t in range(T0, T0 + 300, 7):
        for d in ("1", "2"):
            x, y = traj.position(d, t)
            assert -1e-9 <= x <= 10 + 1e-9 and -1e-9 <= y <= 6 + 1e-9
    for t in range(T0 + 302, T0 + 600, 20):
        assert tuple(traj.position("1", t)) == (21.0, 21.0)
        assert 20 <= traj.position("2", t)[0] <= 30


def test_mobility_json_errors():
    with pytest.raises(MobilityError):
        MobilityScript.from_json({"segments": [{"devices": ["1"], "start": 5}]})
    with pytest.raises(MobilityError):
        Segment(("1",), 0, 10, (0, 0, 0, 5))


# -- engine -----------------------------------------------------------------------------


def test_simulation_rates_and_io(tmp_path):
    roster = Roster({d: Participant(d, Role.CHILD, "g", "c") for d in ("1", "2", "3")})
    positions = {"1": (0.0, 0.0), "2": (2.0, 0.0), "3": (50.0, 0.0)}
    result = run_simulation(cfg(end=T0 + 1800, seed=9), roster, static_script(positions, end=T0 + 1800))
    pairs = {m.pair for m in result.measurements}
    assert pairs == {("1", "2")}
    # both directions range once per 30 s period
    assert 100 <= len(result.measurements) <= 120
    assert all(abs(m.distance - 2.0) < 0.6 for m in result.measurements)
    paths = write_simulation(result, tmp_path)
    assert load_ground_truth(paths["ground_truth"]) == result.ground_truth
    write_ground_truth(tmp_path / "g2.csv", result.ground_truth)
    assert (tmp_path / "g2.csv").read_bytes() == paths["ground_truth"].read_bytes()
    assert result.summary["measurements"] == len(result.measurements)


def test_simulation_same_seed_same_log_different_seed_differs():
    roster = Roster({d: Participant(d, Role.CHILD, "g", "c") for d in ("1", "2", "3")})
    script = MobilityScript((Segment(("1", "2", "3"), T0, T0 + 900, (0, 0, 8, 8)),))
    a = run_simulation(cfg(end=T0 + 900, seed=1), roster, script)
    b = run_simulation(cfg(end=T0 + 900, seed=1), roster, script)
    c = run_simulation(cfg(end=T0 + 900, seed=2), roster, script)
    assert a.measurements == b.measurements
    assert a.measurements != c.measurements


def test_truncated_noise_is_never_negative():
    roster = Roster({d: Participant(d, Role.CHILD, "g", "c") for d in ("1", "2")})
    result = run_simulation(cfg(range_noise_sigma=0.5), roster, static_script({"1": (0.0, 0.0), "2": (0.05, 0.0)}))
    assert result.measurements and min(m.distance for m in result.measurements) >= 0.0
    assert any(m.distance == 0.0 for m in result.measurements)
    assert not math.isnan(sum(m.distance for m in result.measurements))
