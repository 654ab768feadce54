import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dsa_eep.core import (
    Stay,
    StayError,
    TaskConfig,
    read_stays_csv,
    split_episodes,
    validate_stay,
    write_stays_csv,
)


def make_stay(events, d=2, sid="a", seed=0):
    events = np.asarray(events, dtype=np.int64)
    rng = np.random.default_rng(seed)
    return Stay(id=sid, features=rng.normal(size=(len(events), d)), events=events)


def event_runs(T, onsets_and_lengths):
    e = np.zeros(T, dtype=np.int64)
    for start, length in onsets_and_lengths:
        e[start:start + length] = 1
    return e


class TestValidateStay:
    def test_minimal(self):
        s = Stay(id="x", features=np.array([[0.0]]), events=np.array([0]))
        assert validate_stay(s) is s

    def test_nan(self):
        s = Stay(id="x", features=np.array([[0.0], [np.nan]]), events=np.array([0, 0]))
        with pytest.raises(StayError, match="non-finite feature"):
            validate_stay(s)

    def test_non_binary(self):
        s = Stay(id="x", features=np.zeros((3, 1)), events=np.array([0, 2, 0]))
        with pytest.raises(StayError, match="non-binary event indicator"):
            validate_stay(s)

    def test_empty(self):
        s = Stay(id="x", features=np.zeros((0, 1)), events=np.zeros(0))
        with pytest.raises(StayError, match="empty series"):
            validate_stay(s)


class TestSplitEpisodes:
    def test_no_event(self):
        out = split_episodes(make_stay([0] * 5))
        assert len(out.episodes) == 1
        ep = out.episodes[0]
        assert ep.censored and (ep.label_start, ep.label_end) == (0, 4)
        assert ep.event_step is None

    def test_two_events(self):
        stay = make_stay(event_runs(20, [(5, 2), (12, 2)]))
        eps = split_episodes(stay).episodes
        got = [(e.label_start, e.label_end, e.event_step, e.censored, e.history.shape[0]) for e in eps]
        assert got == [(0, 4, 5, False, 5), (7, 11, 12, False, 12), (14, 19, None, True, 20)]

    def test_event_runs_to_end(self):
        eps = split_episodes(make_stay([0, 0, 1, 1])).episodes
        assert [(e.label_start, e.label_end, e.event_step, e.censored) for e in eps] == [(0, 1, 2, False)]

    def test_event_at_start_dropped(self):
        out = split_episodes(make_stay([1, 1, 0, 0]))
        assert out.dropped == 1
        assert [(e.label_start, e.label_end, e.censored) for e in out.episodes] == [(2, 3, True)]

    def test_back_to_back_events(self):
        # events 2-3 and 4-5: the second has no prediction step
        stay = make_stay(event_runs(8, [(2, 2), (4, 2)]))
        out = split_episodes(stay)
        assert out.dropped == 0
        assert [(e.label_start, e.label_end) for e in out.episodes] == [(0, 1), (6, 7)]

        stay = make_stay([0, 1, 0, 1, 0])
        out = split_episodes(stay)
        assert [(e.label_start, e.label_end, e.event_step) for e in out.episodes] == [(0, 0, 1), (2, 2, 3), (4, 4, None)]


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(0, 1), min_size=1, max_size=40))
def test_episode_invariants(events):
    stay = make_stay(events)
    eps = split_episodes(stay).episodes
    covered = []
    for ep in eps:
        covered.extend(range(ep.label_start, ep.label_end + 1))
        assert 0 <= ep.label_start <= ep.label_end < ep.history.shape[0]
        if not ep.censored:
            assert ep.event_step == ep.label_end + 1
            assert stay.events[ep.event_step] == 1
        np.testing.assert_array_equal(ep.history, stay.features[: ep.history.shape[0]])
    assert len(covered) == len(set(covered))
    assert set(covered) == set(np.flatnonzero(np.asarray(events) == 0))


def test_task_config():
    assert TaskConfig(horizon=4).max_train_horizon == 4
    with pytest.raises(ValueError):
        TaskConfig(horizon=0)
    with pytest.raises(ValueError):
        TaskConfig(horizon=4, max_train_horizon=3)


class TestStayCsv:
    def test_roundtrip(self, tmp_path):
        stays = [make_stay([0, 1, 0], sid="a"), make_stay([0, 0], sid="b", seed=3)]
        path = tmp_path / "stays.csv"
        write_stays_csv(path, stays)
        back = read_stays_csv(path)
        assert [s.id for s in back] == ["a", "b"]
        for s, b in zip(stays, back):
            np.testing.assert_array_equal(s.features, b.features)
            np.testing.assert_array_equal(s.events, b.events)

    @pytest.mark.parametrize(
        "rows,msg",
        [
            (["a,0,1.0,0", "a,2,1.0,0"], "gap"),
            (["a,0,1.0,0", "a,0,1.0,0"], "duplicate"),
            (["a,0,1.0,0", "b,0,1.0,0", "a,1,1.0,0"], "not contiguous"),
            (["a,0,1.0,3"], "non-binary"),
            (["a,0,nan,0"], "non-finite"),
        ],
    )
    def test_rejects(self, tmp_path, rows, msg):
        path = tmp_path / "bad.csv"
        path.write_text("stay_id,step,feat_0,event\n" + "\n".join(rows) + "\n")
        with pytest.raises(StayError, match=msg):
            read_stays_csv(path)

    def test_bad_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("id,step,x,event\na,0,1.0,0\n")
        with pytest.raises(StayError, match="header"):
            read_stays_csv(path)
