import logging

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from janus_cpi.model import DataError, Participant, RawMeasurement, Role, Roster, sort_measurements
from janus_cpi.preprocess import (
    Absences,
    ActiveWindows,
    PreprocessParams,
    day_of,
    drop_constant_runs,
    filter_active,
    load_absences,
    load_active_windows,
    preprocess,
    write_absences,
    write_active_windows,
)

DAY = 1_597_622_400  # 2020-08-17T00:00Z
START = DAY + 8 * 3600

ROSTER = Roster({
    "1": Participant("1", Role.CHILD, "g1", "c1"),
    "2": Participant("2", Role.CHILD, "g1", "c1"),
    "3": Participant("3", Role.EDUCATOR, "g1", "c1"),
    "9": Participant("9", Role.CHILD, "h1", "c2"),
    "10": Participant("10", Role.CHILD, "h1", "c2"),
})
WINDOWS = ActiveWindows({"c1": ((START, START + 4 * 3600), (START + 86400, START + 86400 + 4 * 3600)),
                         "c2": ((START + 3600, START + 2 * 3600),)})


def m(a, b, t, d):
    return RawMeasurement(a, b, t, d)


def test_day_of_is_utc():
    assert day_of(DAY) == "2020-08-17"
    assert day_of(DAY + 86399) == "2020-08-17"
    assert day_of(DAY + 86400) == "2020-08-18"


def test_active_filter_uses_camp_of_device_a_and_half_open_windows():
    rows = [m("1", "2", START - 1, 1.0), m("1", "2", START, 1.0), m("1", "2", START + 4 * 3600, 1.0),
            m("9", "10", START, 1.0), m("9", "10", START + 3600, 1.0)]
    kept, dropped = filter_active(rows, WINDOWS, ROSTER)
    assert kept == [rows[1], rows[4]]
    assert sum(dropped.values()) == 3


def test_no_windows_drops_everything_with_warning(caplog):
    with caplog.at_level(logging.WARNING):
        kept, _ = filter_active([m("1", "2", START, 1.0)], ActiveWindows({}), ROSTER)
    assert kept == [] and "no active windows" in caplog.text


def test_overlapping_windows_rejected():
    with pytest.raises(DataError):
        ActiveWindows({"c": ((0, 10), (5, 20))})


def test_constant_run_at_day_start_is_removed_but_not_later():
    bench = [m("1", "2", START + 30 * k, 0.40 + 0.01 * (k % 2)) for k in range(8)]
    moving = [m("1", "2", START + 240 + 30 * k, 1.0 + 0.5 * k) for k in range(5)]
    later = [m("1", "2", START + 7200 + 30 * k, 0.7) for k in range(10)]
    kept, dropped = drop_constant_runs(bench + moving + later, WINDOWS, ROSTER, min_run=5, epsilon=0.05)
    assert kept == moving + later
    assert dropped == {"2020-08-17": 8}


def test_short_constant_prefix_is_kept():
    rows = [m("1", "2", START + 30 * k, 0.4) for k in range(4)] + [m("1", "2", START + 200, 3.0)]
    kept, _ = drop_constant_runs(rows, WINDOWS, ROSTER, min_run=5)
    assert kept == rows


def test_constant_run_repeats_until_no_prefix_qualifies():
    # two bench positions in a row (e.g. device moved along the bench)
    first = [m("1", "2", START + 10 * k, 0.4) for k in range(6)]
    second = [m("1", "2", START + 60 + 10 * k, 0.9) for k in range(6)]
    tail = [m("1", "2", START + 200, 2.0), m("1", "2", START + 230, 3.0)]
    kept, _ = drop_constant_runs(first + second + tail, WINDOWS, ROSTER, min_run=5)
    assert kept == tail
    again, dropped = drop_constant_runs(kept, WINDOWS, ROSTER, min_run=5)
    assert again == kept and not dropped


def test_absences_union_and_both_devices():
    absences = Absences({"2": ((START, START + 100), (START + 50, START + 200)), "3": ((START + 500, START + 600),)})
    assert absences.absent("2", START + 150)
    assert not absences.absent("2", START + 200)
    rows = [m("1", "2", START + 150, 1.0), m("2", "3", START + 550, 1.0), m("1", "3", START + 700, 1.0)]
    res = preprocess(rows, WINDOWS, absences, ROSTER, PreprocessParams(min_run=5))
    assert res.measurements == [rows[2]]
    assert res.report["rules"]["absence"]["total"] == 2


def test_io_roundtrip(tmp_path):
    write_active_windows(tmp_path / "w.csv", WINDOWS)
    assert load_active_windows(tmp_path / "w.csv").windows == WINDOWS.windows
    ab = Absences({"1": ((5, 10),)})
    write_absences(tmp_path / "a.csv", ab)
    assert load_absences(tmp_path / "a.csv", ROSTER).intervals == ab.intervals
    (tmp_path / "b.csv").write_text("device_id,start,end\n77,1,2\n")
    with pytest.raises(DataError, match="77"):
        load_absences(tmp_path / "b.csv", ROSTER)


def test_report_shape_and_counts():
    rows = [m("1", "2", START + 5, 1.0), m("1", "3", START + 86400 + 5, 2.0), m("9", "10", 5, 1.0)]
    res = preprocess(rows, WINDOWS, Absences({}), ROSTER)
    rep = res.report
    c1 = next(r for r in rep["camps"] if r["camp_id"] == "c1")
    assert c1 == {"camp_id": "c1", "initial_day": "2020-08-17", "final_day": "2020-08-18",
                  "unique_users": 3, "raw": 2, "filtered": 2}
    assert rep["raw_total"] == 3 and rep["filtered_total"] == 2
    assert rep["rules"]["active"]["total"] == 1


devices = st.sampled_from(["1", "2", "3", "9", "10"])
rows_strategy = st.lists(
    st.tuples(devices, devices, st.integers(START - 1800, START + 86400 + 5 * 3600),
              st.floats(0, 10, allow_nan=False)).filter(lambda r: r[0] != r[1]),
    max_size=200,
)


def _canon(rows):
    from janus_cpi.model import canonical_pair

    return sort_measurements(RawMeasurement(*canonical_pair(a, b), t, round(d, 2)) for a, b, t, d in rows)


@settings(max_examples=150, deadline=None)
@given(rows_strategy, st.lists(st.tuples(devices, st.integers(START, START + 86400)), max_size=3))
def test_every_drop_is_charged_to_one_rule_and_rules_are_idempotent(raw, gaps):
    rows = _canon(raw)
    absences = Absences({d: ((s, s + 900),) for d, s in gaps})
    res = preprocess(rows, WINDOWS, absences, ROSTER, PreprocessParams(min_run=3, epsilon=0.05))
    dropped = sum(r["total"] for r in res.report["rules"].values())
    assert dropped + len(res.measurements) == len(rows)
    assert res.measurements == sort_measurements(res.measurements)
    assert set(res.measurements) <= set(rows)
    again = preprocess(res.measurements, WINDOWS, absences, ROSTER, PreprocessParams(min_run=3, epsilon=0.05))
    assert again.measurements == res.measurements
