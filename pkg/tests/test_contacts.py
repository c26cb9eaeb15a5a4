import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from janus_cpi.contacts import (
    ContactParams,
    ExtractionStats,
    aggregate,
    contacts_report,
    extract_contacts,
    load_contacts,
    merge_duplicates,
    pair_contacts,
    split_spatial,
    split_temporal,
    write_contacts,
)
from janus_cpi.model import (
    ActivityBlock,
    DataError,
    Location,
    Participant,
    RawMeasurement,
    Role,
    Roster,
    Schedule,
)
from janus_cpi.risk import RiskLevel, classify

from oracles import median, reference_contacts

ROSTER = Roster({
    "1": Participant("1", Role.CHILD, "g1", "c1"),
    "2": Participant("2", Role.CHILD, "g1", "c1"),
    "3": Participant("3", Role.EDUCATOR, "g1", "c1"),
    "4": Participant("4", Role.CHILD, "g2", "c1"),
})
SCHEDULE = Schedule((
    ActivityBlock("c1", "g1", "snack", Location.INDOOR, 1000, 1900),
    ActivityBlock("c1", "g1", "crafts", Location.INDOOR, 1900, 4000),
    ActivityBlock("c1", "g1", "swimming pool", Location.OUTDOOR, 4000, 6000, excluded=True),
    ActivityBlock("c1", "g2", "football", Location.OUTDOOR, 1000, 6000),
))


def stream_rows(a, b, start, end, step=30, dist=0.5):
    return [RawMeasurement(a, b, t, dist) for t in range(start, end, step)]


# -- splitting primitives -------------------------------------------------------


def test_temporal_split_at_exact_threshold():
    s = [(0, 1.0), (30, 1.0), (120, 1.0), (209, 1.0)]
    assert split_temporal(s, 90) == [[(0, 1.0), (30, 1.0)], [(120, 1.0), (209, 1.0)]]
    assert split_temporal([], 90) == []


def test_spatial_split_is_greedy_and_new_run_starts_at_breaker():
    s = [(0, 1.0), (1, 2.5), (2, 3.0), (3, 0.5), (4, 1.0)]
    assert split_spatial(s, 2.0) == [[(0, 1.0), (1, 2.5), (2, 3.0)], [(3, 0.5), (4, 1.0)]]
    # spread exactly equal to the bound stays in one run
    assert len(split_spatial([(0, 0.0), (1, 2.0)], 2.0)) == 1


def test_aggregate_median_and_tau_len():
    assert aggregate([(5, 1.0)], 2) is None
    c = aggregate([(5, 1.0), (35, 3.0), (65, 2.0), (95, 10.0)], 2, "1", "2")
    assert (c.start, c.duration, c.distance, c.n_measurements) == (5, 90, 2.5, 4)
    assert aggregate([(0, 1.0), (1, 1.0)], 3) is None


def test_merge_duplicates_averages_both_directions():
    merged, n = merge_duplicates([(0, 1.0), (0, 2.0), (30, 4.0), (60, 1.0), (60, 1.0), (60, 4.0)])
    assert merged == [(0, 1.5), (30, 4.0), (60, 2.0)] and n == 3


def test_params_validation():
    with pytest.raises(ValueError):
        ContactParams(tau_len=1)
    with pytest.raises(ValueError):
        ContactParams(tau_time=0)


# -- extraction -------------------------------------------------------------------


def test_extract_tags_intra_group_by_start_block_and_leaves_inter_untagged():
    rows = stream_rows("1", "2", 2000, 2300) + stream_rows("1", "4", 2000, 2300)
    stats = ExtractionStats()
    [c12, c14] = extract_contacts(rows, ContactParams(), ROSTER, SCHEDULE, stats=stats)
    assert (c12.activity, c12.intra_group, c12.duration) == ("crafts", True, 270)
    assert (c14.activity, c14.intra_group) == (None, False)
    assert c12.roles == (Role.CHILD, Role.CHILD)
    assert stats.pairs == 2 and stats.measurements == 20


def test_excluded_blocks_and_exemptions_are_counted_not_reported():
    rows = stream_rows("1", "2", 4100, 4400) + stream_rows("1", "3", 2000, 2300)
    stats = ExtractionStats()
    out = extract_contacts(rows, ContactParams(), ROSTER, SCHEDULE, exemptions={("1", "3")}, stats=stats)
    assert out == [] and stats.excluded_activity == 1 and stats.exempted == 1


def test_unknown_device_is_data_error():
    with pytest.raises(DataError, match="99"):
        extract_contacts([RawMeasurement("1", "99", 0, 1.0)], ContactParams(), ROSTER)


def test_boundary_cut_keeps_snack_contacts_within_block():
    # a pair sitting together from the start of snack well into crafts
    rows = stream_rows("1", "2", 1000, 2500, dist=0.6)
    on = extract_contacts(rows, ContactParams(), ROSTER, SCHEDULE)
    assert [(c.activity, c.start, c.duration) for c in on] == [("snack", 1000, 870), ("crafts", 1900, 570)]
    assert not any(c.crosses_boundary for c in on)
    assert all(classify(c.duration, c.distance) is not RiskLevel.HIGH for c in on)

    stats = ExtractionStats()
    off = extract_contacts(rows, ContactParams(split_at_activity_boundaries=False), ROSTER, SCHEDULE, stats=stats)
    [c] = off
    assert c.activity == "snack" and c.crosses_boundary and stats.boundary_crossings == 1
    assert classify(c.duration, c.distance) is RiskLevel.HIGH


def test_cuts_do_not_apply_to_inter_group_pairs():
    rows = stream_rows("1", "4", 1000, 2500)
    [c] = extract_contacts(rows, ContactParams(), ROSTER, SCHEDULE)
    assert c.duration == 1470 and c.activity is None


def test_csv_roundtrip(tmp_path):
    rows = stream_rows("1", "2", 2000, 2300, dist=0.1 + 0.2) + stream_rows("1", "4", 0, 100)
    contacts = extract_contacts(rows, ContactParams(), ROSTER, SCHEDULE)
    write_contacts(tmp_path / "c.csv", contacts)
    # crosses_boundary is not part of the CSV
    assert load_contacts(tmp_path / "c.csv") == contacts
    assert load_contacts(tmp_path / "c.csv")[0].distance == 0.1 + 0.2


def test_contacts_report_counts():
    rows = stream_rows("1", "2", 2000, 2300) + stream_rows("1", "4", 0, 100)
    contacts = extract_contacts(rows, ContactParams(), ROSTER, SCHEDULE)
    rep = contacts_report(contacts, SCHEDULE, ROSTER)
    assert rep["total_contacts"] == 2
    [row] = rep["camps"]
    assert row["contacts"] == 2 and row["groups"] == 2 and row["activity_tagged"] == 1
    assert row["activities"] == 4 and row["activities_considered"] == 3
    assert row["activity_tagged_pct"] == 50.0 and row["mean_measurements"] == pytest.approx((10 + 4) / 2)


# -- properties --------------------------------------------------------------------


@st.composite
def streams(draw):
    gaps = draw(st.lists(st.sampled_from([1, 10, 30, 30, 30, 60, 89, 90, 91, 200]), max_size=60))
    t = 0
    out = []
    for g in gaps:
        t += g
        out.append((t, draw(st.floats(0, 10, allow_nan=False).map(lambda d: round(d, 2)))))
    return out


@settings(max_examples=300, deadline=None)
@given(streams(), st.sampled_from([30, 60, 90, 120]), st.sampled_from([0.5, 1.0, 2.0, 4.0]), st.integers(2, 4))
def test_pair_contacts_match_reference(stream, tau_time, tau_space, tau_len):
    got = pair_contacts(stream, ContactParams(tau_time, tau_space, tau_len))
    assert got == reference_contacts(stream, tau_time, tau_space, tau_len)
    for start, dur, dist, n in got:
        run = [d for t, d in stream if start <= t <= start + dur]
        assert len(run) == n and dist == median(run)
        assert max(run) - min(run) <= tau_space


@settings(max_examples=300, deadline=None)
@given(streams(), st.sampled_from([0.5, 2.0]))
def test_subsequence_count_never_increases_with_tau_time(stream, tau_space):
    counts = []
    for tau_time in (30, 60, 90, 120, 300):
        stats = ExtractionStats()
        pair_contacts(stream, ContactParams(tau_time, tau_space, 2), stats)
        counts.append(stats.subsequences)
    assert counts == sorted(counts, reverse=True)


def test_contact_count_can_grow_with_tau_time():
    # two isolated samples 70 s apart: fragments at 60 s, one contact at 90 s
    stream = [(0, 1.0), (70, 1.0)]
    assert len(pair_contacts(stream, ContactParams(60, 2.0, 2))) == 0
    assert len(pair_contacts(stream, ContactParams(90, 2.0, 2))) == 1
