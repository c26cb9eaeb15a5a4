import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from janus_cpi.contacts import Contact
from janus_cpi.model import ActivityBlock, DataError, Location, Participant, Role, Roster, Schedule
from janus_cpi.risk import (
    RiskLevel,
    RiskThresholds,
    Tier,
    activity_profiles,
    classify,
    group_role_breakdown,
    pair_views,
    role_pair,
    time_share_by_risk,
)

from oracles import reference_level

ROSTER = Roster({
    "1": Participant("1", Role.CHILD, "g1", "c1"),
    "2": Participant("2", Role.CHILD, "g1", "c1"),
    "3": Participant("3", Role.EDUCATOR, "g1", "c1"),
    "4": Participant("4", Role.CHILD, "g2", "c1"),
    "5": Participant("5", Role.EDUCATOR, "g2", "c1"),
    "7": Participant("7", Role.CHILD, "solo", "c2"),
    "8": Participant("8", Role.EDUCATOR, "solo", "c2"),
})


def contact(a, b, start, duration, distance, activity=None):
    return Contact(a, b, start, duration, distance, 2, activity=activity)


@pytest.mark.parametrize("dur, dist, level", [
    (900, 1.0, RiskLevel.HIGH),
    (899, 1.0, RiskLevel.MEDIUM_HIGH),
    (900, 1.01, RiskLevel.MEDIUM_HIGH),
    (600, 2.0, RiskLevel.MEDIUM_HIGH),
    (599, 2.0, RiskLevel.MEDIUM_LOW),
    (300, 4.0, RiskLevel.MEDIUM_LOW),
    (300, 4.01, RiskLevel.LOW),
    (299, 0.1, RiskLevel.LOW),
    (0, 0.0, RiskLevel.LOW),
])
def test_classify_boundaries(dur, dist, level):
    assert classify(dur, dist) is level


@settings(max_examples=500)
@given(st.integers(0, 3600), st.floats(0, 10, allow_nan=False))
def test_classify_matches_reference(dur, dist):
    assert classify(dur, dist).value == reference_level(dur, dist)


def test_thresholds_must_be_nested():
    with pytest.raises(ValueError):
        RiskThresholds(medium_high=Tier(1000, 2.0))
    t = RiskThresholds.from_mapping({"high": [1200, 0.5]})
    assert classify(1200, 0.5, t) is RiskLevel.HIGH and classify(900, 0.5, t) is RiskLevel.MEDIUM_HIGH


def test_time_share_weights_by_duration():
    cs = [contact("1", "2", 0, 900, 0.5), contact("1", "2", 1000, 300, 3.0), contact("1", "3", 0, 0, 0.2)]
    share = time_share_by_risk(cs)
    assert share["percent"]["High"] == pytest.approx(75.0)
    assert share["percent"]["MediumLow"] == pytest.approx(25.0)
    assert share["counts"]["Low"] == 1 and not share["empty"]
    empty = time_share_by_risk([])
    assert empty["empty"] and sum(empty["percent"].values()) == 0


def test_pair_views_and_tie_breaks():
    cs = [
        contact("1", "2", 0, 600, 1.5),
        contact("1", "2", 1000, 600, 0.9),   # same duration, closer: wins max_duration
        contact("1", "2", 2000, 100, 0.9),   # same distance, shorter: loses min_distance
        contact("1", "3", 0, 60, 3.0),
    ]
    v = pair_views(cs)
    m12 = v["mean"][0]
    assert (m12.duration, m12.n_contacts) == (pytest.approx(1300 / 3), 3)
    assert m12.distance == pytest.approx(3.3 / 3)
    assert (v["max_duration"][0].duration, v["max_duration"][0].distance) == (600, 0.9)
    assert (v["min_distance"][0].duration, v["min_distance"][0].distance) == (600, 0.9)
    assert v["max_duration"][0].level is RiskLevel.MEDIUM_HIGH
    assert [(p.device_a, p.device_b) for p in v["mean"]] == [("1", "2"), ("1", "3")]


def test_role_pair_is_unordered():
    assert role_pair(Role.EDUCATOR, Role.CHILD) == "child-educator"
    assert role_pair(Role.EDUCATOR, Role.EDUCATOR) == "educator-educator"


def test_group_role_cells():
    cs = [
        contact("1", "2", 0, 900, 0.5),   # intra child-child High
        contact("1", "3", 0, 300, 3.0),   # intra child-educator MediumLow
        contact("1", "4", 0, 600, 2.0),   # inter child-child MediumHigh
        contact("3", "5", 0, 60, 1.0),    # inter educator-educator Low
    ]
    b = group_role_breakdown(cs, ROSTER, camp_id="c1")
    d = b.to_dict()
    assert d["groups"] == 2 and d["total_count"] == 4 and d["total_time_min"] == pytest.approx(31)
    cells = {(c["scope"], c["roles"]): c for c in d["cells"]}
    assert cells[("intra", "child-child")]["time_min"] == 15
    assert cells[("intra", "child-child")]["level_time_pct"]["High"] == 100
    assert cells[("inter", "child-child")]["time_share_pct"] == pytest.approx(600 / 1860 * 100)
    assert cells[("inter", "child-educator")]["level_time_pct"] is None
    assert cells[("inter", "child-educator")]["count"] == 0


def test_single_group_camp_has_no_inter_cells():
    d = group_role_breakdown([contact("7", "8", 0, 60, 1.0)], ROSTER, camp_id="c2").to_dict()
    inter = [c for c in d["cells"] if c["scope"] == "inter"]
    assert all(c["time_min"] is None and c["count"] is None for c in inter)
    intra = [c for c in d["cells"] if c["scope"] == "intra"]
    assert intra[1]["count"] == 1


def test_group_role_unknown_device():
    with pytest.raises(DataError):
        group_role_breakdown([contact("1", "99", 0, 60, 1.0)], ROSTER)


SCHEDULE = Schedule((
    ActivityBlock("c1", "g1", "snack", Location.INDOOR, 0, 900),
    ActivityBlock("c1", "g2", "snack", Location.INDOOR, 0, 900),
    ActivityBlock("c1", "g1", "crafts", Location.INDOOR, 900, 4500),
    ActivityBlock("c1", "g1", "swimming pool", Location.OUTDOOR, 4500, 9000, excluded=True),
))


def test_activity_profiles_normalise_by_scheduled_time():
    cs = [contact("1", "2", 0, 600, 1.5, "snack"), contact("1", "3", 1000, 300, 0.5, "crafts"),
          contact("1", "4", 0, 600, 1.5)]
    prof = activity_profiles(cs, SCHEDULE, camp_id="c1")
    assert sorted(prof) == ["crafts", "snack"]
    snack = prof["snack"]
    assert snack.scheduled_seconds == 1800
    assert snack.bars()["MediumHigh"] == pytest.approx(600 / 1800)
    assert snack.percent()["MediumHigh"] == 100
    assert prof["crafts"].bars()["MediumLow"] == pytest.approx(300 / 3600)


def test_activity_profiles_reject_unscheduled_tag():
    with pytest.raises(DataError, match="juggling"):
        activity_profiles([contact("1", "2", 0, 60, 1.0, "juggling")], SCHEDULE)
