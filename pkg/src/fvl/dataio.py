"""Sample records, dataset files, windowing, and the synthetic scenario
generator.

The generator renders no images.  It simulates an ego vehicle driving on
a flat ground plane with a forward-facing pinhole camera, plus box-shaped
actor vehicles, and emits exactly the observables the forecaster trains
on: per-frame 2D bounding boxes, dense optical flow, and an ego-motion
log.  Everything is closed-form, so tests can recompute any quantity
independently.

Geometry conventions:
  - Ground-plane frames use (x, z) with x along the heading and z to the
    left; positive yaw turns left.  The world frame is the ego frame of
    frame 0.
  - The camera sits at the ego position, `cam_height` meters above the
    ground, looking along +x.  Camera coordinates are X right, Y down,
    Z forward, so a ground point at planar offset (d_fwd, d_left) from
    the ego has camera coordinates (X, Y, Z) = (-d_left, cam_height,
    d_fwd) and projects to u = focal*X/Z + ppx, v = focal*Y/Z + ppy.
  - The flow stored at frame t is the displacement of image content from
    frame t-1 to frame t; frame 0 carries zero flow.

Flow painting policy: pixels within an actor's box, padded by one pixel,
carry the actor's box-center displacement (nearest actor wins where
boxes overlap); every other pixel below the horizon carries the
reprojected displacement of the static ground point it images; pixels at
or above the horizon carry zero.  The one-pixel pad guarantees that
bilinear samples taken anywhere inside the box read the displacement
exactly, including samples within a pixel of the box edge.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .boxes import BoundingBox
from .egomotion import EgoFeature, EgoStep, compose, read_ego_log, \
    rotation_matrix, write_ego_log, yaw_to_step
from .errors import DataFormatError, ValidationError
from .flowfeat import FlowGrid, PooledFlow, expand_roi, read_flow_grid, \
    roi_pool, write_flow_grid
from .rng import Xoshiro256

__all__ = [
    "BoundingBox",
    "Sample",
    "CameraSpec",
    "ActorSpec",
    "Scenario",
    "VideoData",
    "LoadedVideo",
    "generate_scenario",
    "window_track",
    "windows_from_video",
    "normalize_sample",
    "denormalize_sample",
    "read_dataset",
    "write_dataset",
    "write_video_dir",
    "read_video_dir",
    "read_scenario_file",
    "write_scenario_file",
    "random_scenario",
    "split_videos",
]

NEAR_PLANE_M = 0.5
HORIZON_MARGIN_PX = 0.5
MIN_BOX_PX = 1.0
PAINT_PAD_PX = 1.0


@dataclass(frozen=True)
class Sample:
    """One training/evaluation record: an observed window and its future."""

    track: int
    past: tuple
    flow: tuple
    future: tuple
    ego: tuple
    width: int
    height: int

    def __post_init__(self):
        object.__setattr__(self, "past", tuple(self.past))
        object.__setattr__(self, "flow", tuple(self.flow))
        object.__setattr__(self, "future", tuple(self.future))
        object.__setattr__(self, "ego", tuple(self.ego))
        if not self.past or not self.future:
            raise ValidationError("sample needs non-empty past and future")
        if len(self.flow) != len(self.past):
            raise ValidationError(
                f"sample has {len(self.past)} past boxes but "
                f"{len(self.flow)} flow vectors")
        if len(self.ego) != len(self.future):
            raise ValidationError(
                f"sample has {len(self.future)} future boxes but "
                f"{len(self.ego)} ego features")
        if self.width <= 0 or self.height <= 0:
            raise ValidationError(
                f"sample image dims must be positive, got "
                f"{self.width}x{self.height}")

    @property
    def tau(self) -> int:
        return len(self.past)

    @property
    def delta(self) -> int:
        return len(self.future)


@dataclass(frozen=True)
class CameraSpec:
    """Forward-facing pinhole camera rigidly mounted on the ego vehicle."""

    focal: float = 1000.0
    ppx: float = 640.0
    ppy: float = 320.0
    cam_height: float = 1.4

    def __post_init__(self):
        if self.focal <= 0 or self.cam_height <= 0:
            raise ValidationError(
                f"camera needs positive focal length and height, got "
                f"focal={self.focal}, cam_height={self.cam_height}")


@dataclass(frozen=True)
class ActorSpec:
    """A box-shaped vehicle driving in a straight line on the ground plane.

    Position and heading are in the world frame (the ego frame of frame
    0); speeds are per frame.  The speed profile is speed + accel * t.
    """

    x: float
    z: float
    heading: float
    speed: float
    accel: float = 0.0
    length: float = 4.5
    width: float = 1.8
    height: float = 1.5

    def __post_init__(self):
        if self.length <= 0 or self.width <= 0 or self.height <= 0:
            raise ValidationError(
                f"actor dimensions must be positive, got "
                f"{self.length}x{self.width}x{self.height}")


@dataclass(frozen=True)
class Scenario:
    """Everything needed to render one synthetic video.

    `ego_yaw_rates` (rad/frame) and `ego_speeds` (m/frame) hold one value
    per frame transition (frames - 1 entries); scalars broadcast.
    """

    frames: int
    camera: CameraSpec = field(default_factory=CameraSpec)
    ego_yaw_rates: np.ndarray = 0.0
    ego_speeds: np.ndarray = 0.0
    actors: tuple = ()
    fps: float = 10.0
    width: int = 1280
    height: int = 640

    def __post_init__(self):
        if self.frames < 2:
            raise ValidationError(f"scenario needs >= 2 frames, got {self.frames}")
        if self.width <= 0 or self.height <= 0:
            raise ValidationError(
                f"image dims must be positive, got {self.width}x{self.height}")
        steps = self.frames - 1
        for name in ("ego_yaw_rates", "ego_speeds"):
            raw = np.asarray(getattr(self, name), dtype=np.float64)
            if raw.ndim == 0:
                raw = np.full(steps, float(raw))
            if raw.shape != (steps,):
                raise ValidationError(
                    f"{name} needs {steps} entries (frames - 1), "
                    f"got shape {raw.shape}")
            object.__setattr__(self, name, raw)
        object.__setattr__(self, "actors", tuple(self.actors))


def _heading_vector(heading: float) -> np.ndarray:
    return np.array([math.cos(heading), math.sin(heading)])


class VideoData:
    """Generator output for one video: boxes, ego log, and on-demand flow.

    Flow grids are computed lazily (full frames or sub-rectangles), so a
    long video costs nothing until somebody asks for pixels.
    """

    def __init__(self, scenario: Scenario, ego_steps, tracks,
                 ego_headings: np.ndarray, ego_positions: np.ndarray,
                 actor_depths):
        self.scenario = scenario
        self.ego_steps = list(ego_steps)
        self.tracks = tracks
        self._headings = ego_headings
        self._positions = ego_positions
        self._depths = actor_depths

    @property
    def width(self) -> int:
        return self.scenario.width

    @property
    def height(self) -> int:
        return self.scenario.height

    @property
    def frames(self) -> int:
        return self.scenario.frames

    @property
    def fps(self) -> float:
        return self.scenario.fps

    def flow_grid(self, t: int) -> FlowGrid:
        data = self.flow_patch(t, 0, 0, self.width, self.height)
        return FlowGrid(width=self.width, height=self.height, data=data)

    def flow_patch(self, t: int, ix0: int, iy0: int, ix1: int, iy1: int) -> np.ndarray:
        """Flow over the pixel-index rectangle [ix0, ix1) x [iy0, iy1)."""
        if not 0 <= t < self.frames:
            raise ValidationError(
                f"frame {t} out of range for a {self.frames}-frame video")
        out = np.zeros((iy1 - iy0, ix1 - ix0, 2))
        if t == 0 or out.size == 0:
            return out
        self._background_flow(t, ix0, iy0, ix1, iy1, out)
        self._paint_actors(t, ix0, iy0, ix1, iy1, out)
        return out

    def _background_flow(self, t, ix0, iy0, ix1, iy1, out) -> None:
        cam = self.scenario.camera
        u = (np.arange(ix0, ix1) + 0.5)[None, :]
        v = (np.arange(iy0, iy1) + 0.5)[:, None]
        dv = v - cam.ppy
        ground = dv > HORIZON_MARGIN_PX
        safe_dv = np.where(ground, dv, 1.0)
        depth = cam.focal * cam.cam_height / safe_dv
        x_cam = (u - cam.ppx) * depth / cam.focal
        # ground point in the frame-t ego frame, then in the world frame
        d_fwd, d_left = depth, -x_cam
        rot_t = rotation_matrix(self._headings[t])
        pos_t = self._positions[t]
        gx = pos_t[0] + rot_t[0, 0] * d_fwd + rot_t[0, 1] * d_left
        gz = pos_t[1] + rot_t[1, 0] * d_fwd + rot_t[1, 1] * d_left

        # Reproject that world point through both poses with the same
        # expression chain.  When the two poses are bit-identical (a
        # parked ego) the projections cancel exactly and the flow is a
        # true zero, not rounding noise.
        def reproject(frame):
            rot = rotation_matrix(self._headings[frame])
            pos = self._positions[frame]
            rx, rz = gx - pos[0], gz - pos[1]
            fwd = rot[0, 0] * rx + rot[1, 0] * rz
            left = rot[0, 1] * rx + rot[1, 1] * rz
            safe = np.where(fwd > NEAR_PLANE_M, fwd, 1.0)
            u_px = cam.focal * (-left) / safe + cam.ppx
            v_px = cam.focal * cam.cam_height / safe + cam.ppy
            return fwd, u_px, v_px

        fwd_now, u_now, v_now = reproject(t)
        fwd_prev, u_prev, v_prev = reproject(t - 1)
        visible = ground & (fwd_prev > NEAR_PLANE_M) & (fwd_now > NEAR_PLANE_M)
        out[..., 0] = np.where(visible, u_now - u_prev, 0.0)
        out[..., 1] = np.where(visible, v_now - v_prev, 0.0)

    def _paint_actors(self, t, ix0, iy0, ix1, iy1, out) -> None:
        # far to near, so the nearest actor wins overlaps
        order = sorted((track for track, frames in self.tracks.items()
                        if t in frames),
                       key=lambda track: -self._depths[track][t])
        for track in order:
            box = self.tracks[track][t]
            previous = self.tracks[track].get(t - 1)
            if previous is None:
                disp = (0.0, 0.0)
            else:
                disp = (box.cx - previous.cx, box.cy - previous.cy)
            x0, y0, x1, y1 = box.corners()
            col0 = max(ix0, math.ceil(x0 - PAINT_PAD_PX - 0.5))
            col1 = min(ix1 - 1, math.floor(x1 + PAINT_PAD_PX - 0.5))
            row0 = max(iy0, math.ceil(y0 - PAINT_PAD_PX - 0.5))
            row1 = min(iy1 - 1, math.floor(y1 + PAINT_PAD_PX - 0.5))
            if col0 <= col1 and row0 <= row1:
                region = out[row0 - iy0:row1 + 1 - iy0,
                             col0 - ix0:col1 + 1 - ix0]
                region[..., 0] = disp[0]
                region[..., 1] = disp[1]

    def pooled_flow(self, t: int, roi: BoundingBox, n: int) -> PooledFlow:
        """ROI-pool frame t's flow without materializing the whole grid."""
        x0, y0, x1, y1 = roi.corners()
        ix0 = max(0, math.floor(x0) - 2)
        iy0 = max(0, math.floor(y0) - 2)
        ix1 = min(self.width, math.ceil(x1) + 2)
        iy1 = min(self.height, math.ceil(y1) + 2)
        patch = self.flow_patch(t, ix0, iy0, ix1, iy1)
        local = FlowGrid(width=ix1 - ix0, height=iy1 - iy0, data=patch)
        return roi_pool(local, roi, n, origin=(ix0, iy0))


def _project_actor(camera: CameraSpec, ego_heading: float,
                   ego_position: np.ndarray, center: np.ndarray,
                   actor: ActorSpec, width: int, height: int):
    """Project an actor's 3D box; returns (BoundingBox, depth) or None."""
    forward = _heading_vector(actor.heading)
    lateral = np.array([-forward[1], forward[0]])
    half_l, half_w = actor.length / 2.0, actor.width / 2.0
    rot = rotation_matrix(ego_heading)
    us, vs = [], []
    center_depth = None
    for sl in (-half_l, half_l):
        for sw in (-half_w, half_w):
            ground = center + sl * forward + sw * lateral
            rel = ground - ego_position
            d_fwd = rot[0, 0] * rel[0] + rot[1, 0] * rel[1]
            d_left = rot[0, 1] * rel[0] + rot[1, 1] * rel[1]
            if d_fwd < NEAR_PLANE_M:
                return None
            x_cam = -d_left
            for elevation in (0.0, actor.height):
                y_cam = camera.cam_height - elevation
                us.append(camera.focal * x_cam / d_fwd + camera.ppx)
                vs.append(camera.focal * y_cam / d_fwd + camera.ppy)
    rel = center - ego_position
    center_depth = rot[0, 0] * rel[0] + rot[1, 0] * rel[1]
    x0 = max(min(us), 0.0)
    x1 = min(max(us), float(width))
    y0 = max(min(vs), 0.0)
    y1 = min(max(vs), float(height))
    if x1 - x0 < MIN_BOX_PX or y1 - y0 < MIN_BOX_PX:
        return None
    return BoundingBox.from_corners(x0, y0, x1, y1), center_depth


def generate_scenario(scenario: Scenario, seed: int = 0) -> VideoData:
    """Render a scenario into boxes, an ego log, and lazy flow.

    The simulation is fully determined by the scenario; `seed` is part
    of the interface for forward compatibility but nothing here draws
    random numbers.
    """
    frames = scenario.frames
    ego_steps = [yaw_to_step(float(rate), float(speed))
                 for rate, speed in zip(scenario.ego_yaw_rates,
                                        scenario.ego_speeds)]
    headings = np.zeros(frames)
    positions = np.zeros((frames, 2))
    for t, step in enumerate(ego_steps):
        positions[t + 1] = positions[t] + rotation_matrix(headings[t]) @ step.translation
        headings[t + 1] = headings[t] + step.yaw

    tracks: dict[int, dict[int, BoundingBox]] = {}
    depths: dict[int, np.ndarray] = {}
    for index, actor in enumerate(scenario.actors):
        forward = _heading_vector(actor.heading)
        boxes: dict[int, BoundingBox] = {}
        depth_by_frame = np.full(frames, np.inf)
        position = np.array([actor.x, actor.z])
        for t in range(frames):
            projected = _project_actor(scenario.camera, headings[t],
                                       positions[t], position, actor,
                                       scenario.width, scenario.height)
            if projected is not None:
                boxes[t], depth_by_frame[t] = projected
            position = position + (actor.speed + actor.accel * t) * forward
        if boxes:
            tracks[index] = boxes
            depths[index] = depth_by_frame
    return VideoData(scenario, ego_steps, tracks, headings, positions, depths)


def window_track(track: int, frames, boxes, flows, ego_steps,
                 tau: int, delta: int, width: int, height: int) -> list[Sample]:
    """Slide a (tau, delta) window over one track's contiguous frames.

    `frames` are the global frame indices the track covers (must be
    consecutive); `boxes` and `flows` run parallel to it; `ego_steps` is
    the whole video's step list indexed by global frame.  Tracks shorter
    than tau + delta yield no samples.
    """
    if tau < 1 or delta < 1:
        raise ValidationError(f"window needs tau, delta >= 1, got ({tau}, {delta})")
    frames = list(frames)
    if len(boxes) != len(frames) or len(flows) != len(frames):
        raise ValidationError(
            f"track {track}: {len(frames)} frames but {len(boxes)} boxes "
            f"and {len(flows)} flow vectors")
    for a, b in zip(frames, frames[1:]):
        if b != a + 1:
            raise ValidationError(
                f"track {track}: frames must be consecutive, got {a} then {b}")
    samples = []
    span = tau + delta
    for start in range(len(frames) - span + 1):
        anchor = frames[start + tau - 1]
        steps = ego_steps[anchor:anchor + delta]
        if len(steps) < delta:
            break  # future frames would run past the ego log
        samples.append(Sample(
            track=track,
            past=boxes[start:start + tau],
            flow=flows[start:start + tau],
            future=boxes[start + tau:start + span],
            ego=compose(steps),
            width=width,
            height=height))
    return samples


def _contiguous_runs(frame_indices):
    runs = []
    current = []
    for t in sorted(frame_indices):
        if current and t != current[-1] + 1:
            runs.append(current)
            current = []
        current.append(t)
    if current:
        runs.append(current)
    return runs


def windows_from_video(video, tau: int, delta: int, expand: float = 1.5,
                       n: int = 5) -> tuple[list[Sample], int]:
    """All samples from a video plus the number of skipped short runs.

    `video` is a VideoData or LoadedVideo: anything with tracks,
    ego_steps, dims, and a pooled_flow(frame, roi, n) method.  Flow for
    each past frame is pooled over that frame's box expanded by
    `expand`.
    """
    samples: list[Sample] = []
    skipped = 0
    for track in sorted(video.tracks):
        boxes_by_frame = video.tracks[track]
        for run in _contiguous_runs(boxes_by_frame):
            if len(run) < tau + delta:
                skipped += 1
                continue
            boxes = [boxes_by_frame[t] for t in run]
            flows = []
            for t, box in zip(run, boxes):
                roi = expand_roi(box, expand, video.width, video.height)
                flows.append(video.pooled_flow(t, roi, n))
            samples.extend(window_track(
                track, run, boxes, flows, video.ego_steps,
                tau, delta, video.width, video.height))
    return samples, skipped


# --- normalization ----------------------------------------------------------


def _scale_box(box: BoundingBox, sx: float, sy: float) -> BoundingBox:
    return BoundingBox(cx=box.cx * sx, cy=box.cy * sy,
                       w=box.w * sx, h=box.h * sy)


def _scale_flow(flow: PooledFlow, sx: float, sy: float) -> PooledFlow:
    values = flow.values.copy()
    values[0::2] *= sx
    values[1::2] *= sy
    return PooledFlow(values=values, n=flow.n)


def normalize_sample(sample: Sample, width: float, height: float) -> Sample:
    """Rescale pixel quantities to image fractions.

    Box cx/w divide by width and cy/h by height; pooled flow u/v divide
    the same way (keeping the two streams on comparable scales); ego
    features are already metric and stay untouched.
    """
    if width <= 0 or height <= 0:
        raise ValidationError(
            f"image dims must be positive, got {width}x{height}")
    sx, sy = 1.0 / width, 1.0 / height
    return replace(
        sample,
        past=tuple(_scale_box(b, sx, sy) for b in sample.past),
        future=tuple(_scale_box(b, sx, sy) for b in sample.future),
        flow=tuple(_scale_flow(f, sx, sy) for f in sample.flow))


def denormalize_sample(sample: Sample, width: float, height: float) -> Sample:
    if width <= 0 or height <= 0:
        raise ValidationError(
            f"image dims must be positive, got {width}x{height}")
    return replace(
        sample,
        past=tuple(_scale_box(b, width, height) for b in sample.past),
        future=tuple(_scale_box(b, width, height) for b in sample.future),
        flow=tuple(_scale_flow(f, width, height) for f in sample.flow))


# --- sample files ------------------------------------------------------------
#
# A dataset of windowed samples is a JSONL file: one object per line with
# track, width, height, past/future box arrays [cx, cy, w, h], ego
# triples [yaw, x, z], and pooled flow {n, values}.  Python's json
# module prints floats with repr, so every f64 round-trips bit-exactly.


def write_dataset(samples, path) -> None:
    path = Path(path)
    lines = []
    for sample in samples:
        record = {
            "track": sample.track,
            "width": sample.width,
            "height": sample.height,
            "past": [[b.cx, b.cy, b.w, b.h] for b in sample.past],
            "future": [[b.cx, b.cy, b.w, b.h] for b in sample.future],
            "ego": [[e.yaw, e.x, e.z] for e in sample.ego],
            "flow": {"n": sample.flow[0].n if sample.flow else 0,
                     "values": [f.values.tolist() for f in sample.flow]},
        }
        lines.append(json.dumps(record, separators=(",", ":")))
    path.write_text("\n".join(lines) + ("\n" if lines else ""))


def read_dataset(path) -> list[Sample]:
    path = Path(path)
    samples = []
    for lineno, line in enumerate(path.read_text().splitlines()):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
            n = record["flow"]["n"]
            samples.append(Sample(
                track=record["track"],
                past=tuple(BoundingBox.from_array(b) for b in record["past"]),
                future=tuple(BoundingBox.from_array(b) for b in record["future"]),
                ego=tuple(EgoFeature(yaw=e[0], x=e[1], z=e[2])
                          for e in record["ego"]),
                flow=tuple(PooledFlow(values=np.asarray(v), n=n)
                           for v in record["flow"]["values"]),
                width=record["width"],
                height=record["height"]))
        except (KeyError, IndexError, TypeError, ValueError, ValidationError) as exc:
            raise DataFormatError(f"{path}:{lineno + 1}: {exc}") from None
    return samples


# --- video directories --------------------------------------------------------
#
# One directory per video: `meta` (key=value), `boxes.jsonl` (one line
# per frame per track), `ego.txt` (see egomotion), `flow/NNNNNN.ffgr`
# grids, and optionally `pooled.jsonl` written by the pooling pass.


def _write_meta(path: Path, video, tau: int, delta: int) -> None:
    text = (f"width={video.width}\nheight={video.height}\n"
            f"fps={float(video.fps)!r}\nframes={video.frames}\n"
            f"tau={tau}\ndelta={delta}\n")
    path.write_text(text)


def _read_meta(path: Path) -> dict:
    meta = {}
    for lineno, line in enumerate(path.read_text().splitlines()):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise DataFormatError(f"{path}:{lineno + 1}: expected key=value")
        key, value = line.split("=", 1)
        meta[key.strip()] = value.strip()
    for key in ("width", "height", "frames"):
        if key not in meta:
            raise DataFormatError(f"{path}: missing required key {key!r}")
    return meta


def write_video_dir(video, path, tau: int = 10, delta: int = 10,
                    write_flow: bool = True) -> None:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    _write_meta(path / "meta", video, tau, delta)
    write_ego_log(path / "ego.txt", video.ego_steps)
    lines = []
    for track in sorted(video.tracks):
        for frame in sorted(video.tracks[track]):
            box = video.tracks[track][frame]
            lines.append(json.dumps(
                {"frame": frame, "track": track, "cx": box.cx, "cy": box.cy,
                 "w": box.w, "h": box.h}, separators=(",", ":")))
    (path / "boxes.jsonl").write_text("\n".join(lines) + ("\n" if lines else ""))
    if write_flow:
        flow_dir = path / "flow"
        flow_dir.mkdir(exist_ok=True)
        for t in range(video.frames):
            write_flow_grid(flow_dir / f"{t:06d}.ffgr", video.flow_grid(t))


class LoadedVideo:
    """A video directory re-opened for windowing and evaluation.

    Presents the same surface as VideoData; flow comes from the `.ffgr`
    files (or the pooled table when `pooled.jsonl` exists and matches
    the requested lattice size).
    """

    def __init__(self, path: Path, meta: dict, ego_steps, tracks, pooled):
        self.path = path
        self.width = int(meta["width"])
        self.height = int(meta["height"])
        self.frames = int(meta["frames"])
        self.fps = float(meta.get("fps", 10.0))
        self.tau = int(meta.get("tau", 10))
        self.delta = int(meta.get("delta", 10))
        self.ego_steps = ego_steps
        self.tracks = tracks
        self._pooled = pooled

    def flow_grid(self, t: int) -> FlowGrid:
        return read_flow_grid(self.path / "flow" / f"{t:06d}.ffgr")

    def pooled_flow(self, t: int, roi: BoundingBox, n: int) -> PooledFlow:
        key = (round(roi.cx, 6), round(roi.cy, 6), t, n)
        hit = self._pooled.get(key)
        if hit is not None:
            return hit
        return roi_pool(self.flow_grid(t), roi, n)


def read_video_dir(path) -> LoadedVideo:
    path = Path(path)
    meta = _read_meta(path / "meta")
    ego_steps = read_ego_log(path / "ego.txt")
    tracks: dict[int, dict[int, BoundingBox]] = {}
    boxes_path = path / "boxes.jsonl"
    for lineno, line in enumerate(boxes_path.read_text().splitlines()):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
            box = BoundingBox(cx=record["cx"], cy=record["cy"],
                              w=record["w"], h=record["h"])
            tracks.setdefault(record["track"], {})[record["frame"]] = box
        except (KeyError, TypeError, ValueError, ValidationError) as exc:
            raise DataFormatError(f"{boxes_path}:{lineno + 1}: {exc}") from None
    pooled = {}
    pooled_path = path / "pooled.jsonl"
    if pooled_path.exists():
        for lineno, line in enumerate(pooled_path.read_text().splitlines()):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                key = (round(record["cx"], 6), round(record["cy"], 6),
                       record["frame"], record["n"])
                pooled[key] = PooledFlow(values=np.asarray(record["values"]),
                                         n=record["n"])
            except (KeyError, TypeError, ValueError, ValidationError) as exc:
                raise DataFormatError(
                    f"{pooled_path}:{lineno + 1}: {exc}") from None
    return LoadedVideo(path, meta, ego_steps, tracks, pooled)


def write_pooled_table(video: LoadedVideo, expand: float, n: int) -> None:
    """Precompute pooled flow for every track frame into pooled.jsonl."""
    lines = []
    for track in sorted(video.tracks):
        for frame in sorted(video.tracks[track]):
            box = video.tracks[track][frame]
            roi = expand_roi(box, expand, video.width, video.height)
            pooled = roi_pool(video.flow_grid(frame), roi, n)
            lines.append(json.dumps(
                {"track": track, "frame": frame, "n": n,
                 "cx": roi.cx, "cy": roi.cy,
                 "values": pooled.values.tolist()}, separators=(",", ":")))
    (video.path / "pooled.jsonl").write_text(
        "\n".join(lines) + ("\n" if lines else ""))


# --- scenario files -----------------------------------------------------------
#
# Text format: top-level `key=value` lines for the camera, image, and
# ego plan, then one `[actor]` header per actor followed by its own
# key=value lines.  Rates and speeds are per frame.  `ego_yaw_rate` and
# `ego_speed` accept either a scalar or a comma-separated list with one
# entry per frame transition.


_SCENARIO_DEFAULTS = {
    "width": 1280, "height": 640, "fps": 10.0, "focal": 1000.0,
    "ppx": 640.0, "ppy": 320.0, "cam_height": 1.4,
    "ego_yaw_rate": "0.0", "ego_speed": "0.0",
}
_ACTOR_DEFAULTS = {"accel": 0.0, "length": 4.5, "width": 1.8, "height": 1.5}


def _parse_rate_list(text: str, steps: int, what: str) -> np.ndarray:
    parts = [p for p in text.split(",") if p.strip()]
    values = np.array([float(p) for p in parts])
    if values.size == 1:
        return np.full(steps, values[0])
    if values.size != steps:
        raise DataFormatError(
            f"{what} needs 1 or {steps} comma-separated values, got {values.size}")
    return values


def read_scenario_file(path) -> Scenario:
    path = Path(path)
    top = dict(_SCENARIO_DEFAULTS)
    actors: list[dict] = []
    current = top
    for lineno, raw in enumerate(path.read_text().splitlines()):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line == "[actor]":
            actors.append(dict(_ACTOR_DEFAULTS))
            current = actors[-1]
            continue
        if "=" not in line:
            raise DataFormatError(
                f"{path}:{lineno + 1}: expected key=value or [actor], got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        current[key] = value
    try:
        frames = int(top["frames"])
    except KeyError:
        raise DataFormatError(f"{path}: missing required key 'frames'") from None
    except ValueError as exc:
        raise DataFormatError(f"{path}: {exc}") from None
    try:
        camera = CameraSpec(focal=float(top["focal"]), ppx=float(top["ppx"]),
                            ppy=float(top["ppy"]),
                            cam_height=float(top["cam_height"]))
        yaw_rates = _parse_rate_list(str(top["ego_yaw_rate"]), frames - 1,
                                     "ego_yaw_rate")
        speeds = _parse_rate_list(str(top["ego_speed"]), frames - 1, "ego_speed")
        specs = tuple(
            ActorSpec(x=float(a["x"]), z=float(a["z"]),
                      heading=float(a["heading"]), speed=float(a["speed"]),
                      accel=float(a["accel"]), length=float(a["length"]),
                      width=float(a["width"]), height=float(a["height"]))
            for a in actors)
        return Scenario(frames=frames, camera=camera, ego_yaw_rates=yaw_rates,
                        ego_speeds=speeds, actors=specs, fps=float(top["fps"]),
                        width=int(top["width"]), height=int(top["height"]))
    except (KeyError, ValueError, ValidationError) as exc:
        raise DataFormatError(f"{path}: {exc}") from None


def write_scenario_file(path, scenario: Scenario) -> None:
    cam = scenario.camera
    lines = [
        f"frames={scenario.frames}",
        f"width={scenario.width}",
        f"height={scenario.height}",
        f"fps={float(scenario.fps)!r}",
        f"focal={float(cam.focal)!r}",
        f"ppx={float(cam.ppx)!r}",
        f"ppy={float(cam.ppy)!r}",
        f"cam_height={float(cam.cam_height)!r}",
        "ego_yaw_rate=" + ",".join(repr(float(v)) for v in scenario.ego_yaw_rates),
        "ego_speed=" + ",".join(repr(float(v)) for v in scenario.ego_speeds),
    ]
    for actor in scenario.actors:
        lines.append("[actor]")
        for key in ("x", "z", "heading", "speed", "accel",
                    "length", "width", "height"):
            lines.append(f"{key}={float(getattr(actor, key))!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def random_scenario(seed: int, frames: int = 40, max_yaw_rate_rps: float = 0.3,
                    fps: float = 10.0, width: int = 1280,
                    height: int = 640) -> Scenario:
    """A turn-heavy scenario: an ego that changes its turn rate mid-video
    plus 1-3 straight-driving actors ahead of it."""
    rng = Xoshiro256(seed)
    steps = frames - 1
    # two constant-yaw segments; the switch point lands mid-video so many
    # windows see the turn change inside their future horizon
    switch = frames // 3 + rng.integer(max(1, frames // 3))
    rates = np.empty(steps)
    for lo, hi in ((0, switch), (switch, steps)):
        magnitude = rng.uniform(0.3, 1.0) * max_yaw_rate_rps / fps
        sign = 1.0 if rng.integer(2) == 0 else -1.0
        rates[lo:hi] = sign * magnitude
    ego_speed = rng.uniform(4.0, 9.0) / fps

    actors = []
    for _ in range(1 + rng.integer(3)):
        style = rng.integer(3)
        if style == 0:  # leading vehicle, roughly our direction
            actor = ActorSpec(
                x=rng.uniform(12.0, 28.0), z=rng.uniform(-4.0, 4.0),
                heading=rng.uniform(-0.25, 0.25),
                speed=rng.uniform(3.0, 8.0) / fps,
                accel=rng.uniform(-0.05, 0.08) / fps)
        elif style == 1:  # oncoming
            actor = ActorSpec(
                x=rng.uniform(25.0, 45.0), z=rng.uniform(1.0, 6.0),
                heading=math.pi + rng.uniform(-0.2, 0.2),
                speed=rng.uniform(3.0, 7.0) / fps)
        else:  # crossing
            side = 1.0 if rng.integer(2) == 0 else -1.0
            actor = ActorSpec(
                x=rng.uniform(15.0, 30.0), z=side * rng.uniform(5.0, 9.0),
                heading=-side * math.pi / 2.0 + rng.uniform(-0.3, 0.3),
                speed=rng.uniform(2.0, 5.0) / fps)
        actors.append(actor)
    camera = CameraSpec(ppx=width / 2.0, ppy=height / 2.0)
    return Scenario(frames=frames, camera=camera, ego_yaw_rates=rates,
                    ego_speeds=ego_speed, actors=tuple(actors), fps=fps,
                    width=width, height=height)


def split_videos(video_ids, train_fraction: float, seed: int):
    """Deterministic 70/30-style split at video granularity."""
    if not 0.0 < train_fraction < 1.0:
        raise ValidationError(
            f"train fraction must be in (0, 1), got {train_fraction}")
    ids = sorted(video_ids)
    if not ids:
        raise ValidationError("cannot split an empty video list")
    Xoshiro256(seed).shuffle(ids)
    cut = int(round(train_fraction * len(ids)))
    cut = max(1, min(len(ids) - 1, cut)) if len(ids) > 1 else 1
    return sorted(ids[:cut]), sorted(ids[cut:])
