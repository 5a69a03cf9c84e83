"""Trajectory table ingestion, windowing, and the canonical sample format.

Two table layouts are accepted:

* ``apollo_like``: rows of ``frame_id agent_id type_code x y`` (meters,
  urban mixed traffic). Type codes 1 and 2 map to ``vehicle``, 3 to
  ``pedestrian``, 4 to ``bicyclist``, anything else to ``others``.
* ``ngsim_like``: rows of ``vehicle_id frame_id local_x local_y lane_id``
  in feet (highway). Positions convert to meters (x 0.3048) and the 10 Hz
  stream is downsampled to 5 Hz by keeping every 2nd frame.

Fields may be separated by whitespace or commas. Windowing slices tracks
into observation/prediction windows around a designated ego agent, applies
the neighborhood rule, and emits :class:`Sample` records; ``write_canonical``
/ ``read_canonical`` serialize them as line-delimited JSON with every float
printed as decimal text with 17 significant digits (lossless for float64).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, FormatError, ParseError

__all__ = [
    "CATEGORIES",
    "FEET_TO_METERS",
    "HIGHWAY_BAND_METERS",
    "AgentTrack",
    "DatasetConfig",
    "Sample",
    "load_trajectory_table",
    "window_samples",
    "ego_center",
    "ego_uncenter",
    "validate_sample",
    "write_canonical",
    "read_canonical",
]

CATEGORIES = ("vehicle", "pedestrian", "bicyclist", "others")

FEET_TO_METERS = 0.3048
HIGHWAY_BAND_METERS = 90.0 * FEET_TO_METERS  # +/- 90 ft longitudinally

_APOLLO_TYPE_MAP = {1: "vehicle", 2: "vehicle", 3: "pedestrian", 4: "bicyclist"}

CANONICAL_VERSION = 1


@dataclass
class AgentTrack:
    """One agent's time-ordered states within a recording."""

    agent_id: int
    category: str
    frames: np.ndarray  # (L,) int, strictly increasing
    positions: np.ndarray  # (L, 2) meters
    lanes: np.ndarray | None = None  # (L,) int, highway data only


@dataclass
class DatasetConfig:
    """Windowing and neighborhood parameters.

    ``t_obs_points`` counts observation positions including the current one
    (6 points at 2 Hz covers the urban setting); ``t_pred_frames`` is the
    number of future frames. ``node_scope`` widens the radius rule so nodes
    beyond the edge threshold still enter the scene as context.
    """

    t_obs_points: int = 6
    t_pred_frames: int = 6
    d_d: float = 10.0
    beta_degrees: float = 20.0
    neighborhood: str = "radius"  # "radius" | "highway_band"
    frame_rate: float = 2.0
    node_scope: float = 3.0
    window_stride: int | None = None  # None: non-overlapping windows

    def __post_init__(self):
        if self.t_obs_points < 2:
            raise DataError("t_obs_points must be >= 2 (motion needs two frames)")
        if self.t_pred_frames < 1:
            raise DataError("t_pred_frames must be >= 1")
        if self.d_d <= 0 or self.beta_degrees <= 0:
            raise DataError("thresholds must be positive")
        if self.neighborhood not in ("radius", "highway_band"):
            raise DataError(f"unknown neighborhood rule {self.neighborhood!r}")
        if self.frame_rate <= 0:
            raise DataError("frame_rate must be positive")
        if self.window_stride is not None and self.window_stride < 1:
            raise DataError("window_stride must be >= 1")

    @property
    def window_points(self) -> int:
        return self.t_obs_points + self.t_pred_frames


@dataclass
class Sample:
    """One training/evaluation unit. Agent 0 is the ego by convention.

    ``observed`` is (N, t_obs_points, 2), ``future`` (N, t_pred, 2), and
    ``ego_plan`` (t_pred, 2), all meters in a common frame. Masks flag which
    entries trace to source data; masked coordinates are zero-padded.
    ``origin`` records the offset subtracted by :func:`ego_center`.
    """

    categories: list[str]
    observed: np.ndarray
    future: np.ndarray
    ego_plan: np.ndarray
    obs_mask: np.ndarray
    fut_mask: np.ndarray
    frame_rate: float
    agent_ids: list[int] = field(default_factory=list)
    origin: np.ndarray = field(default_factory=lambda: np.zeros(2))

    EGO_INDEX = 0

    @property
    def n_agents(self) -> int:
        return self.observed.shape[0]

    @property
    def t_obs_points(self) -> int:
        return self.observed.shape[1]

    @property
    def t_pred(self) -> int:
        return self.future.shape[1]

    def copy(self) -> "Sample":
        return Sample(
            categories=list(self.categories),
            observed=self.observed.copy(),
            future=self.future.copy(),
            ego_plan=self.ego_plan.copy(),
            obs_mask=self.obs_mask.copy(),
            fut_mask=self.fut_mask.copy(),
            frame_rate=self.frame_rate,
            agent_ids=list(self.agent_ids),
            origin=self.origin.copy(),
        )


# ---------------------------------------------------------------------------
# table loading
# ---------------------------------------------------------------------------


def _parse_rows(path, n_fields):
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.replace(",", " ").split()
            if len(parts) != n_fields:
                raise ParseError(
                    f"expected {n_fields} fields, got {len(parts)}", lineno
                )
            try:
                rows.append([float(p) for p in parts])
            except ValueError as exc:
                raise ParseError(str(exc), lineno) from None
    return rows


def _group_by_agent(records):
    """records: (agent_id, frame, x, y, category, lane|None); enforces
    per-agent monotone frames and rejects duplicates."""
    by_agent: dict[int, list] = {}
    for rec in records:
        by_agent.setdefault(rec[0], []).append(rec)
    tracks = []
    for agent_id in sorted(by_agent):
        recs = by_agent[agent_id]
        frames = [r[1] for r in recs]
        for a, b in zip(frames, frames[1:]):
            if b == a:
                raise DataError(
                    f"duplicate frame {a} for agent {agent_id}"
                )
            if b < a:
                raise DataError(
                    f"non-monotone frames for agent {agent_id}: {a} then {b}"
                )
        positions = np.array([[r[2], r[3]] for r in recs], dtype=np.float64)
        if not np.isfinite(positions).all():
            raise DataError(f"non-finite position for agent {agent_id}")
        lanes = None
        if recs[0][5] is not None:
            lanes = np.array([r[5] for r in recs], dtype=np.int64)
        tracks.append(
            AgentTrack(
                agent_id=agent_id,
                category=recs[0][4],
                frames=np.array(frames, dtype=np.int64),
                positions=positions,
                lanes=lanes,
            )
        )
    return tracks


def _downsample(track: AgentTrack, factor: int) -> AgentTrack | None:
    keep = track.frames % factor == 0
    if not keep.any():
        return None
    return AgentTrack(
        agent_id=track.agent_id,
        category=track.category,
        frames=track.frames[keep] // factor,
        positions=track.positions[keep],
        lanes=None if track.lanes is None else track.lanes[keep],
    )


def load_trajectory_table(path, format: str) -> list[AgentTrack]:
    """Parse one recording into per-agent tracks, sorted by agent id.

    ``format`` is ``"apollo_like"`` or ``"ngsim_like"``; see the module
    docstring for the column layouts and unit handling.
    """
    if format == "apollo_like":
        records = []
        for frame, agent, code, x, y in _parse_rows(path, 5):
            category = _APOLLO_TYPE_MAP.get(int(code), "others")
            records.append((int(agent), int(frame), x, y, category, None))
        return _group_by_agent(records)
    if format == "ngsim_like":
        records = []
        for agent, frame, x_ft, y_ft, lane in _parse_rows(path, 5):
            records.append(
                (int(agent), int(frame), x_ft * FEET_TO_METERS,
                 y_ft * FEET_TO_METERS, "vehicle", int(lane))
            )
        tracks = _group_by_agent(records)
        out = []
        for track in tracks:
            down = _downsample(track, 2)
            if down is not None:
                out.append(down)
        return out
    raise ParseError(f"unknown table format {format!r}")


# ---------------------------------------------------------------------------
# windowing
# ---------------------------------------------------------------------------


def _admit_neighbor(config, ego_pos, ego_lane, pos, lane) -> bool:
    if config.neighborhood == "radius":
        return float(np.hypot(*(pos - ego_pos))) <= config.d_d * config.node_scope
    # highway band: y is longitudinal, lanes from the source table
    if lane is None or ego_lane is None:
        raise DataError("highway_band neighborhood needs lane ids")
    return (
        abs(pos[1] - ego_pos[1]) <= HIGHWAY_BAND_METERS
        and abs(int(lane) - int(ego_lane)) <= 1
    )


def window_samples(tracks, config: DatasetConfig,
                   ego_selection: str = "every_complete_agent",
                   ego_id: int | None = None) -> list[Sample]:
    """Slice one recording into samples.

    For each window start (stepping by ``window_stride``) and each eligible
    ego -- an agent present at all window frames -- one Sample is emitted.
    Neighbors must be present at the last observed frame and pass the
    neighborhood rule; partially observed neighbors are zero-padded and
    masked. The ego's recorded future becomes its plan.
    """
    if ego_selection not in ("every_complete_agent", "given_id"):
        raise DataError(f"unknown ego_selection {ego_selection!r}")
    if ego_selection == "given_id" and ego_id is None:
        raise DataError("ego_selection='given_id' requires ego_id")
    if not tracks:
        return []

    length = config.window_points
    stride = config.window_stride or length
    p_obs = config.t_obs_points

    index = {}
    for track in tracks:
        index[track.agent_id] = {
            int(f): i for i, f in enumerate(track.frames)
        }
    by_id = {t.agent_id: t for t in tracks}

    f_min = min(int(t.frames[0]) for t in tracks)
    f_max = max(int(t.frames[-1]) for t in tracks)

    samples = []
    for start in range(f_min, f_max - length + 2, stride):
        window = range(start, start + length)
        last_obs = start + p_obs - 1
        complete = [
            t.agent_id for t in tracks
            if all(f in index[t.agent_id] for f in window)
        ]
        if ego_selection == "given_id":
            egos = [ego_id] if ego_id in complete else []
        else:
            egos = complete  # already sorted: tracks are sorted by id
        for ego in egos:
            ego_track = by_id[ego]
            ego_row = index[ego][last_obs]
            ego_pos = ego_track.positions[ego_row]
            ego_lane = None if ego_track.lanes is None else ego_track.lanes[ego_row]
            neighbors = []
            for track in tracks:
                if track.agent_id == ego:
                    continue
                row = index[track.agent_id].get(last_obs)
                if row is None:
                    continue
                lane = None if track.lanes is None else track.lanes[row]
                if _admit_neighbor(config, ego_pos, ego_lane,
                                   track.positions[row], lane):
                    neighbors.append(track.agent_id)
            agent_ids = [ego] + neighbors
            n = len(agent_ids)
            obs = np.zeros((n, p_obs, 2))
            fut = np.zeros((n, config.t_pred_frames, 2))
            obs_mask = np.zeros((n, p_obs), dtype=bool)
            fut_mask = np.zeros((n, config.t_pred_frames), dtype=bool)
            for i, aid in enumerate(agent_ids):
                rows = index[aid]
                track = by_id[aid]
                for k, f in enumerate(range(start, start + p_obs)):
                    r = rows.get(f)
                    if r is not None:
                        obs[i, k] = track.positions[r]
                        obs_mask[i, k] = True
                for k, f in enumerate(range(start + p_obs, start + length)):
                    r = rows.get(f)
                    if r is not None:
                        fut[i, k] = track.positions[r]
                        fut_mask[i, k] = True
            samples.append(
                Sample(
                    categories=[by_id[a].category for a in agent_ids],
                    observed=obs,
                    future=fut,
                    ego_plan=fut[0].copy(),
                    obs_mask=obs_mask,
                    fut_mask=fut_mask,
                    frame_rate=config.frame_rate,
                    agent_ids=agent_ids,
                )
            )
    return samples


# ---------------------------------------------------------------------------
# normalization
# ---------------------------------------------------------------------------


def ego_center(sample: Sample) -> Sample:
    """Shift all coordinates so the ego's last observed position is (0, 0)."""
    offset = sample.observed[Sample.EGO_INDEX, -1].copy()
    out = sample.copy()
    out.observed -= offset
    out.future -= offset
    out.ego_plan -= offset
    out.origin = sample.origin + offset
    return out


def ego_uncenter(sample: Sample) -> Sample:
    """Invert :func:`ego_center` using the stored origin offset."""
    out = sample.copy()
    out.observed += sample.origin
    out.future += sample.origin
    out.ego_plan += sample.origin
    out.origin = np.zeros(2)
    return out


def validate_sample(sample: Sample) -> None:
    """Raise DataError on any violated sample invariant."""
    n, p = sample.observed.shape[:2]
    f = sample.future.shape[1]
    if sample.observed.shape != (n, p, 2) or sample.future.shape != (n, f, 2):
        raise DataError("observed/future must be (N, T, 2)")
    if sample.ego_plan.shape != (f, 2):
        raise DataError(
            f"ego_plan shape {sample.ego_plan.shape} != ({f}, 2)"
        )
    if sample.obs_mask.shape != (n, p) or sample.fut_mask.shape != (n, f):
        raise DataError("mask shapes disagree with trajectories")
    if len(sample.categories) != n:
        raise DataError("one category per agent required")
    for c in sample.categories:
        if c not in CATEGORIES:
            raise DataError(f"unknown category {c!r}")
    if not (np.isfinite(sample.observed).all() and np.isfinite(sample.future).all()
            and np.isfinite(sample.ego_plan).all()):
        raise DataError("non-finite coordinates")
    if not sample.obs_mask[Sample.EGO_INDEX].all():
        raise DataError("ego must be fully observed")
    if sample.frame_rate <= 0:
        raise DataError("frame_rate must be positive")


# ---------------------------------------------------------------------------
# canonical on-disk format
# ---------------------------------------------------------------------------


def _fmt(x: float) -> str:
    out = format(float(x), ".17g")
    if "." not in out and "e" not in out and "n" not in out:
        out += ".0"  # keep json from parsing integral values (and -0) as ints
    return out


def _coords(rows) -> str:
    return "[" + ",".join(f"[{_fmt(x)},{_fmt(y)}]" for x, y in rows) + "]"


def _coords3(blocks) -> str:
    return "[" + ",".join(_coords(rows) for rows in blocks) + "]"


def _mask(rows) -> str:
    return json.dumps(np.asarray(rows, dtype=int).tolist(), separators=(",", ":"))


def sample_to_line(sample: Sample) -> str:
    """Serialize one sample to its canonical single-line JSON record."""
    ids = json.dumps([int(a) for a in sample.agent_ids], separators=(",", ":"))
    cats = json.dumps(list(sample.categories), separators=(",", ":"))
    return (
        f'{{"version":{CANONICAL_VERSION}'
        f',"frame_rate":{_fmt(sample.frame_rate)}'
        f',"ego_index":{Sample.EGO_INDEX}'
        f',"agent_ids":{ids}'
        f',"categories":{cats}'
        f',"origin":[{_fmt(sample.origin[0])},{_fmt(sample.origin[1])}]'
        f',"obs":{_coords3(sample.observed)}'
        f',"obs_mask":{_mask(sample.obs_mask)}'
        f',"fut":{_coords3(sample.future)}'
        f',"fut_mask":{_mask(sample.fut_mask)}'
        f',"plan":{_coords(sample.ego_plan)}}}'
    )


def sample_from_line(line: str) -> Sample:
    try:
        rec = json.loads(line)
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid canonical record: {exc}") from None
    version = rec.get("version")
    if version != CANONICAL_VERSION:
        raise FormatError(
            f"unsupported canonical version {version!r} "
            f"(expected {CANONICAL_VERSION})"
        )
    return Sample(
        categories=list(rec["categories"]),
        observed=np.asarray(rec["obs"], dtype=np.float64).reshape(
            len(rec["categories"]), -1, 2
        ),
        future=np.asarray(rec["fut"], dtype=np.float64).reshape(
            len(rec["categories"]), -1, 2
        ),
        ego_plan=np.asarray(rec["plan"], dtype=np.float64).reshape(-1, 2),
        obs_mask=np.asarray(rec["obs_mask"], dtype=bool),
        fut_mask=np.asarray(rec["fut_mask"], dtype=bool),
        frame_rate=float(rec["frame_rate"]),
        agent_ids=[int(a) for a in rec["agent_ids"]],
        origin=np.asarray(rec["origin"], dtype=np.float64),
    )


def write_canonical(samples, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for sample in samples:
            fh.write(sample_to_line(sample))
            fh.write("\n")


def read_canonical(path) -> list[Sample]:
    samples = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                samples.append(sample_from_line(line))
    return samples
