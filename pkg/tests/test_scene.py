"""Table parsing, windowing against a brute-force enumerator, ego-centering,
and canonical round-trips."""

import numpy as np
import pytest

from conftest import random_scene
from epg_mgcn.errors import DataError, FormatError, ParseError
from epg_mgcn.scene import (
    FEET_TO_METERS,
    HIGHWAY_BAND_METERS,
    DatasetConfig,
    ego_center,
    ego_uncenter,
    load_trajectory_table,
    read_canonical,
    sample_from_line,
    sample_to_line,
    validate_sample,
    window_samples,
    write_canonical,
)


def write_rows(path, rows):
    path.write_text("\n".join(" ".join(str(v) for v in row) for row in rows) + "\n")


class TestLoadApollo:
    def test_empty_file(self, tmp_path):
        p = tmp_path / "empty.txt"
        p.write_text("")
        assert load_trajectory_table(p, "apollo_like") == []

    def test_basic_parse_and_category_map(self, tmp_path):
        p = tmp_path / "t.txt"
        write_rows(p, [
            (0, 7, 3, 1.0, 2.0),
            (1, 7, 3, 1.5, 2.0),
            (0, 2, 1, 0.0, 0.0),
            (1, 2, 1, 1.0, 0.0),
            (0, 9, 5, 4.0, 4.0),
        ])
        tracks = load_trajectory_table(p, "apollo_like")
        assert [t.agent_id for t in tracks] == [2, 7, 9]
        assert [t.category for t in tracks] == ["vehicle", "pedestrian", "others"]
        np.testing.assert_array_equal(tracks[0].positions, [[0, 0], [1, 0]])

    def test_comma_separated(self, tmp_path):
        p = tmp_path / "t.csv"
        p.write_text("0,1,2,3.5,4.5\n")
        tracks = load_trajectory_table(p, "apollo_like")
        assert tracks[0].category == "vehicle"
        np.testing.assert_array_equal(tracks[0].positions, [[3.5, 4.5]])

    def test_malformed_row_names_line(self, tmp_path):
        p = tmp_path / "bad.txt"
        p.write_text("0 1 2 3.0 4.0\n0 2 xx 3.0 4.0\n")
        with pytest.raises(ParseError, match="line 2"):
            load_trajectory_table(p, "apollo_like")

    def test_wrong_field_count(self, tmp_path):
        p = tmp_path / "bad.txt"
        p.write_text("0 1 2 3.0\n")
        with pytest.raises(ParseError, match="line 1"):
            load_trajectory_table(p, "apollo_like")

    def test_duplicate_frame_rejected(self, tmp_path):
        p = tmp_path / "dup.txt"
        write_rows(p, [(0, 1, 2, 0, 0), (0, 1, 2, 1, 1)])
        with pytest.raises(DataError, match="duplicate"):
            load_trajectory_table(p, "apollo_like")

    def test_non_monotone_frames_rejected(self, tmp_path):
        p = tmp_path / "mono.txt"
        write_rows(p, [(5, 1, 2, 0, 0), (3, 1, 2, 1, 1)])
        with pytest.raises(DataError, match="non-monotone"):
            load_trajectory_table(p, "apollo_like")


class TestLoadNgsim:
    def test_downsample_keeps_even_frames(self, tmp_path):
        p = tmp_path / "n.txt"
        write_rows(p, [(1, f, 10.0 + f, 100.0, 3) for f in range(10)])
        tracks = load_trajectory_table(p, "ngsim_like")
        assert len(tracks) == 1
        np.testing.assert_array_equal(tracks[0].frames, [0, 1, 2, 3, 4])
        # retained positions come from source frames 0, 2, 4, 6, 8
        np.testing.assert_allclose(
            tracks[0].positions[:, 0],
            np.array([10.0, 12.0, 14.0, 16.0, 18.0]) * FEET_TO_METERS,
        )

    def test_feet_to_meters_hand_fixture(self, tmp_path):
        rows = [(1, 0, 12.5, 300.0, 2), (1, 2, 13.0, 310.0, 2),
                (2, 0, -4.0, 250.0, 3), (2, 2, -4.5, 262.0, 3),
                (2, 4, -5.0, 275.0, 3)]
        p = tmp_path / "n.txt"
        write_rows(p, rows)
        tracks = load_trajectory_table(p, "ngsim_like")
        hand = {
            (1, 0): (12.5 * 0.3048, 300.0 * 0.3048),
            (1, 1): (13.0 * 0.3048, 310.0 * 0.3048),
            (2, 0): (-4.0 * 0.3048, 250.0 * 0.3048),
            (2, 1): (-4.5 * 0.3048, 262.0 * 0.3048),
            (2, 2): (-5.0 * 0.3048, 275.0 * 0.3048),
        }
        for track in tracks:
            for frame, pos in zip(track.frames, track.positions):
                np.testing.assert_allclose(
                    pos, hand[(track.agent_id, int(frame))], atol=1e-9)

    def test_lane_ids_survive(self, tmp_path):
        p = tmp_path / "n.txt"
        write_rows(p, [(1, 0, 0, 0, 4), (1, 2, 0, 5, 5)])
        tracks = load_trajectory_table(p, "ngsim_like")
        np.testing.assert_array_equal(tracks[0].lanes, [4, 5])

    def test_downsample_halves_frame_count(self, tmp_path):
        for length in (1, 2, 7, 10, 13):
            p = tmp_path / f"n{length}.txt"
            write_rows(p, [(1, f, 0.0, float(f), 1) for f in range(length)])
            tracks = load_trajectory_table(p, "ngsim_like")
            kept = len(tracks[0].frames)
            assert abs(kept - length / 2) <= 1


def linear_tracks(specs, n_frames, make=None):
    """specs: (agent_id, category, start_xy, vel_xy[, lane]) tuples."""
    from epg_mgcn.scene import AgentTrack
    tracks = []
    for spec in specs:
        aid, cat, start, vel = spec[:4]
        lane = spec[4] if len(spec) > 4 else None
        frames = np.arange(n_frames)
        pos = np.asarray(start, float) + frames[:, None] * np.asarray(vel, float)
        lanes = None if lane is None else np.full(n_frames, lane, dtype=np.int64)
        tracks.append(AgentTrack(aid, cat, frames, pos, lanes))
    return tracks


class TestWindowing:
    def config(self, **kw):
        defaults = dict(t_obs_points=6, t_pred_frames=6, d_d=10.0,
                        frame_rate=2.0, node_scope=1.0)
        defaults.update(kw)
        return DatasetConfig(**defaults)

    def test_single_agent_one_window(self):
        tracks = linear_tracks([(1, "vehicle", (0, 0), (1, 0))], 12)
        samples = window_samples(tracks, self.config())
        assert len(samples) == 1
        s = samples[0]
        assert s.n_agents == 1
        assert s.obs_mask.all() and s.fut_mask.all()
        np.testing.assert_array_equal(s.ego_plan, s.future[0])

    def test_neighbor_within_radius(self):
        tracks = linear_tracks([
            (1, "vehicle", (0, 0), (1, 0)),
            (2, "vehicle", (5, 0), (1, 0)),
        ], 12)
        samples = window_samples(tracks, self.config(),
                                 ego_selection="given_id", ego_id=1)
        assert len(samples) == 1
        assert samples[0].n_agents == 2
        assert samples[0].agent_ids == [1, 2]

    def test_neighbor_beyond_radius_excluded(self):
        tracks = linear_tracks([
            (1, "vehicle", (0, 0), (0.0, 0)),
            (2, "vehicle", (11, 0), (0.0, 0)),
        ], 12)
        samples = window_samples(tracks, self.config(),
                                 ego_selection="given_id", ego_id=1)
        assert samples[0].n_agents == 1

    def test_every_complete_agent_emits_one_sample_each(self):
        tracks = linear_tracks([
            (1, "vehicle", (0, 0), (1, 0)),
            (2, "vehicle", (3, 0), (1, 0)),
        ], 12)
        samples = window_samples(tracks, self.config())
        assert [s.agent_ids[0] for s in samples] == [1, 2]

    def test_partial_neighbor_masked_and_zero_padded(self):
        from epg_mgcn.scene import AgentTrack
        ego = linear_tracks([(1, "vehicle", (0, 0), (1, 0))], 12)[0]
        # neighbor only exists for frames 4..8 (present at last obs frame 5)
        frames = np.arange(4, 9)
        pos = np.column_stack([frames * 1.0, np.ones(5)])
        nb = AgentTrack(2, "pedestrian", frames, pos)
        samples = window_samples([ego, nb], self.config())
        s = [x for x in samples if x.agent_ids[0] == 1][0]
        assert s.n_agents == 2
        np.testing.assert_array_equal(s.obs_mask[1], [0, 0, 0, 0, 1, 1])
        np.testing.assert_array_equal(s.fut_mask[1], [1, 1, 1, 0, 0, 0])
        assert (s.observed[1, :4] == 0).all()
        # unmasked coordinates trace back to source rows
        np.testing.assert_array_equal(s.observed[1, 4], pos[0])

    def test_highway_band_rule(self):
        cfg = self.config(neighborhood="highway_band", t_obs_points=3,
                          t_pred_frames=3, frame_rate=5.0)
        tracks = linear_tracks([
            (1, "vehicle", (3.0, 0), (0, 3.0), 3),
            (2, "vehicle", (3.5, 5.0), (0, 3.0), 4),    # 1 lane over, close
            (3, "vehicle", (10.0, 0.0), (0, 3.0), 5),   # 2 lanes over
            (4, "vehicle", (3.0, 40.0), (0, 3.0), 3),   # too far ahead
        ], 6)
        samples = window_samples(tracks, cfg, ego_selection="given_id", ego_id=1)
        assert samples[0].agent_ids == [1, 2]

    def test_highway_band_longitudinal_boundary(self):
        cfg = self.config(neighborhood="highway_band", t_obs_points=3,
                          t_pred_frames=3, frame_rate=5.0)
        inside = HIGHWAY_BAND_METERS - 0.01
        outside = HIGHWAY_BAND_METERS + 0.01
        tracks = linear_tracks([
            (1, "vehicle", (0.0, 0.0), (0, 0.5), 3),
            (2, "vehicle", (0.0, inside), (0, 0.5), 3),
            (3, "vehicle", (0.0, outside), (0, 0.5), 3),
        ], 6)
        samples = window_samples(tracks, cfg, ego_selection="given_id", ego_id=1)
        assert samples[0].agent_ids == [1, 2]

    def test_sliding_windows(self):
        tracks = linear_tracks([(1, "vehicle", (0, 0), (1, 0))], 14)
        samples = window_samples(tracks, self.config(window_stride=1))
        assert len(samples) == 3  # starts 0, 1, 2

    def test_against_brute_force_enumerator(self):
        # 3 agents with ragged lifetimes; enumerate all (start, ego) pairs
        from epg_mgcn.scene import AgentTrack
        cfg = self.config(t_obs_points=3, t_pred_frames=2, window_stride=1,
                          node_scope=1.0)
        a = AgentTrack(1, "vehicle", np.arange(0, 10),
                       np.column_stack([np.arange(10) * 1.0, np.zeros(10)]))
        b = AgentTrack(2, "pedestrian", np.arange(2, 8),
                       np.column_stack([np.arange(2, 8) * 1.0, np.ones(6)]))
        c = AgentTrack(3, "vehicle", np.arange(0, 10),
                       np.column_stack([np.arange(10) * 1.0, 30 + np.zeros(10)]))
        tracks = [a, b, c]
        samples = window_samples(tracks, cfg)

        expected = []
        length = 5
        for start in range(0, 10 - length + 1):
            window = set(range(start, start + length))
            last_obs = start + 2
            for ego in tracks:
                have = set(int(f) for f in ego.frames)
                if not window <= have:
                    continue
                ego_pos = ego.positions[list(ego.frames).index(last_obs)]
                members = [ego.agent_id]
                for other in tracks:
                    if other.agent_id == ego.agent_id:
                        continue
                    if last_obs not in set(int(f) for f in other.frames):
                        continue
                    opos = other.positions[list(other.frames).index(last_obs)]
                    if np.hypot(*(opos - ego_pos)) <= 10.0:
                        members.append(other.agent_id)
                expected.append((start, members))
        got = [(s.agent_ids[0], s.agent_ids) for s in samples]
        assert len(samples) == len(expected)
        for (start, members), s in zip(expected, samples):
            assert s.agent_ids == members
            # masks match presence
            for i, aid in enumerate(members):
                track = {t.agent_id: t for t in tracks}[aid]
                have = set(int(f) for f in track.frames)
                exp_obs = [f in have for f in range(start, start + 3)]
                exp_fut = [f in have for f in range(start + 3, start + 5)]
                assert list(s.obs_mask[i]) == exp_obs
                assert list(s.fut_mask[i]) == exp_fut

    def test_empty_and_no_eligible_ego(self):
        assert window_samples([], self.config()) == []
        tracks = linear_tracks([(1, "vehicle", (0, 0), (1, 0))], 5)
        assert window_samples(tracks, self.config()) == []


class TestEgoCenter:
    def test_last_observed_at_origin(self, rng):
        s = random_scene(rng)
        c = ego_center(s)
        np.testing.assert_array_equal(c.observed[0, -1], [0.0, 0.0])

    def test_relative_displacements_unchanged(self, rng):
        s = random_scene(rng, degenerate=False)
        c = ego_center(s)
        np.testing.assert_array_equal(
            s.observed[1:, -1] - s.observed[0, -1],
            c.observed[1:, -1] - c.observed[0, -1],
        )

    def test_round_trip(self, rng):
        for _ in range(10):
            s = random_scene(rng)
            back = ego_uncenter(ego_center(s))
            np.testing.assert_allclose(back.observed, s.observed, atol=1e-12)
            np.testing.assert_allclose(back.future, s.future, atol=1e-12)
            np.testing.assert_allclose(back.ego_plan, s.ego_plan, atol=1e-12)


class TestCanonicalFormat:
    def test_empty_round_trip(self, tmp_path):
        path = tmp_path / "empty.jsonl"
        write_canonical([], path)
        assert read_canonical(path) == []

    def test_single_sample_round_trip(self, tmp_path, rng):
        s = random_scene(rng)
        path = tmp_path / "one.jsonl"
        write_canonical([s], path)
        (back,) = read_canonical(path)
        assert back.observed.tobytes() == s.observed.tobytes()
        assert back.categories == s.categories

    def test_hundred_random_samples_bitwise(self, tmp_path, rng):
        samples = [random_scene(rng) for _ in range(100)]
        # perturb off the grid so full 17-digit serialization is exercised
        for s in samples:
            s.observed += rng.normal(scale=1e-3, size=s.observed.shape)
            s.observed *= s.obs_mask[:, :, None]
        path = tmp_path / "many.jsonl"
        write_canonical(samples, path)
        back = read_canonical(path)
        assert len(back) == 100
        for a, b in zip(samples, back):
            assert a.observed.tobytes() == b.observed.tobytes()
            assert a.future.tobytes() == b.future.tobytes()
            assert a.ego_plan.tobytes() == b.ego_plan.tobytes()
            assert a.origin.tobytes() == b.origin.tobytes()
            assert (a.obs_mask == b.obs_mask).all()
            assert (a.fut_mask == b.fut_mask).all()
            assert a.categories == b.categories
            assert a.agent_ids == b.agent_ids
            assert a.frame_rate == b.frame_rate

    def test_write_is_deterministic(self, tmp_path, rng):
        s = random_scene(rng)
        assert sample_to_line(s) == sample_to_line(s)

    def test_version_mismatch(self):
        line = sample_to_line(random_scene(np.random.default_rng(0)))
        bad = line.replace('"version":1', '"version":99', 1)
        with pytest.raises(FormatError, match="version"):
            sample_from_line(bad)

    def test_validator_over_generated_fixtures(self, rng):
        for _ in range(25):
            validate_sample(random_scene(rng))

    def test_validator_rejects_bad_category(self, rng):
        s = random_scene(rng)
        s.categories[0] = "hovercraft"
        with pytest.raises(DataError, match="hovercraft"):
            validate_sample(s)
