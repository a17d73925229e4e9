"""Synthetic near-eye scenes and recorded-sequence ingestion.

A scene is rendered as three concentric discs (pupil darkest, iris mid,
sclera bright) over a static textured background. Irradiance is expressed
as photo-electron rates (e-/s per pixel), so the sensor model owns exposure
and bit depth. The sclera disc is fixed at the frame centre (a near-eye
camera is rigidly mounted); only the iris/pupil pair travels along the
track, which keeps every pixel outside the swept iris region constant
across frames.

Disc edges use area-coverage anti-aliasing: a pixel's coverage of a disc of
radius r is approximated by clip(r - dist_to_centre + 0.5, 0, 1), which is
exact for edges crossing the pixel at shallow curvature and avoids event
aliasing under sub-pixel motion.

Class labels: 0 background, 1 sclera, 2 iris, 3 pupil.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, FormatError, SequenceGapError

CLASS_BACKGROUND = 0
CLASS_SCLERA = 1
CLASS_IRIS = 2
CLASS_PUPIL = 3
CLASS_COUNT = 4


@dataclass(frozen=True)
class GazeCalibration:
    """Affine map from pupil-centre offset (pixels) to gaze angles (degrees).

    vertical = slope_v * (cy - centre_y) + offset_v
    horizontal = slope_h * (cx - centre_x) + offset_h
    """

    slope_v: float = 0.06
    slope_h: float = 0.06
    offset_v: float = 0.0
    offset_h: float = 0.0
    center_x: float = 320.0
    center_y: float = 200.0

    def angles(self, cx: float, cy: float) -> tuple[float, float]:
        return (
            self.slope_v * (cy - self.center_y) + self.offset_v,
            self.slope_h * (cx - self.center_x) + self.offset_h,
        )


@dataclass
class EyeScene:
    width: int
    height: int
    background: np.ndarray  # (H, W) photo-electron rates
    pupil_center_track: np.ndarray  # (T, 2) sub-pixel (x, y) per frame
    pupil_radius: float
    iris_radius: float
    eye_radius: float
    sclera_rate: float
    iris_rate: float
    pupil_rate: float
    calibration: GazeCalibration = field(default_factory=GazeCalibration)
    class_count: int = CLASS_COUNT

    def __post_init__(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise ConfigError("scene dimensions must be positive")
        if self.background.shape != (self.height, self.width):
            raise ConfigError(
                f"background shape {self.background.shape} != "
                f"({self.height}, {self.width})"
            )
        if not (0 < self.pupil_radius < self.iris_radius):
            raise ConfigError("need 0 < pupil radius < iris radius")
        track = np.asarray(self.pupil_center_track, dtype=np.float64)
        if track.ndim != 2 or track.shape[1] != 2:
            raise ConfigError("track must be (T, 2)")
        if np.any(track[:, 0] < 0) or np.any(track[:, 0] > self.width - 1):
            raise ConfigError("track x outside frame")
        if np.any(track[:, 1] < 0) or np.any(track[:, 1] > self.height - 1):
            raise ConfigError("track y outside frame")
        self.pupil_center_track = track


@dataclass
class GroundTruth:
    seg_maps: np.ndarray  # (T, H, W) uint8 class labels
    gaze_angles: np.ndarray  # (T, 2) (vertical deg, horizontal deg)
    pupil_centers: np.ndarray  # (T, 2) centroid of pupil-labelled pixels (x, y)


@dataclass
class FrameSequence:
    """Stack of per-frame grids: photo-electron rates (float) or gray (uint8)."""

    frames: np.ndarray  # (T, H, W)

    def __len__(self) -> int:
        return self.frames.shape[0]

    @property
    def width(self) -> int:
        return self.frames.shape[2]

    @property
    def height(self) -> int:
        return self.frames.shape[1]


def _disc_coverage(xs: np.ndarray, ys: np.ndarray, cx: float, cy: float, r: float) -> np.ndarray:
    dist = np.hypot(xs - cx, ys - cy)
    return np.clip(r - dist + 0.5, 0.0, 1.0)


def render_frame(scene: EyeScene, center: tuple[float, float]) -> np.ndarray:
    """Rates for one frame with the iris/pupil pair at `center`."""
    h, w = scene.height, scene.width
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    ecx, ecy = (w - 1) / 2.0, (h - 1) / 2.0
    eye_cov = _disc_coverage(xs, ys, ecx, ecy, scene.eye_radius)
    iris_cov = _disc_coverage(xs, ys, center[0], center[1], scene.iris_radius)
    pupil_cov = _disc_coverage(xs, ys, center[0], center[1], scene.pupil_radius)
    rates = scene.background * (1.0 - eye_cov) + scene.sclera_rate * eye_cov
    rates = rates * (1.0 - iris_cov) + scene.iris_rate * iris_cov
    rates = rates * (1.0 - pupil_cov) + scene.pupil_rate * pupil_cov
    return rates


def _label_frame(scene: EyeScene, center: tuple[float, float]) -> np.ndarray:
    h, w = scene.height, scene.width
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    ecx, ecy = (w - 1) / 2.0, (h - 1) / 2.0
    labels = np.zeros((h, w), dtype=np.uint8)
    labels[_disc_coverage(xs, ys, ecx, ecy, scene.eye_radius) >= 0.5] = CLASS_SCLERA
    labels[_disc_coverage(xs, ys, center[0], center[1], scene.iris_radius) >= 0.5] = CLASS_IRIS
    labels[_disc_coverage(xs, ys, center[0], center[1], scene.pupil_radius) >= 0.5] = CLASS_PUPIL
    return labels


def generate_sequence(scene: EyeScene, n_frames: int, seed: int) -> tuple[FrameSequence, GroundTruth]:
    """Render `n_frames` frames plus ground truth, deterministically per seed.

    The seed is reserved for future stochastic scene elements; rendering
    itself is a pure function of the scene, which keeps repeated calls
    bit-identical.
    """
    if n_frames < 2:
        raise ConfigError("need at least 2 frames (frame differencing)")
    if len(scene.pupil_center_track) < n_frames:
        raise ConfigError(
            f"track has {len(scene.pupil_center_track)} points, need {n_frames}"
        )
    del seed  # rendering is deterministic; noise lives in the sensor model
    frames = np.empty((n_frames, scene.height, scene.width), dtype=np.float64)
    segs = np.empty((n_frames, scene.height, scene.width), dtype=np.uint8)
    gaze = np.empty((n_frames, 2), dtype=np.float64)
    centers = np.empty((n_frames, 2), dtype=np.float64)
    for t in range(n_frames):
        cx, cy = scene.pupil_center_track[t]
        frames[t] = render_frame(scene, (cx, cy))
        segs[t] = _label_frame(scene, (cx, cy))
        pupil_ys, pupil_xs = np.nonzero(segs[t] == CLASS_PUPIL)
        mx, my = float(pupil_xs.mean()), float(pupil_ys.mean())
        centers[t] = (mx, my)
        gaze[t] = scene.calibration.angles(mx, my)
    return FrameSequence(frames), GroundTruth(segs, gaze, centers)


def make_default_scene(
    width: int = 640,
    height: int = 400,
    n_frames: int = 200,
    seed: int = 0,
    pupil_radius: float = 26.0,
    iris_radius: float = 60.0,
    eye_radius: float = 160.0,
    background_rate: float = 28_000.0,
    sclera_rate: float = 40_000.0,
    iris_rate: float = 19_000.0,
    pupil_rate: float = 4_000.0,
    amplitude_x: float = 70.0,
    amplitude_y: float = 40.0,
    cycles: float = 2.0,
) -> EyeScene:
    """Scene with a smooth Lissajous-like gaze wander and a blotchy background.

    Default rates are tuned for the default sensor (full well 10k e-, 8.33 ms
    exposure): the brightest region sits near 33 DN so photon shot noise stays
    well below the 15 DN event threshold while the iris/sclera contrast (17 DN)
    stays above it.
    """
    rng = np.random.default_rng(seed)
    # Smooth blotches: bandlimit white noise with a separable box blur.
    noise = rng.standard_normal((height, width))
    k = 31
    kernel = np.ones(k) / k
    for axis in (0, 1):
        noise = np.apply_along_axis(np.convolve, axis, noise, kernel, mode="same")
    noise /= max(np.abs(noise).max(), 1e-12)
    background = background_rate * (1.0 + 0.25 * noise)
    cx0, cy0 = (width - 1) / 2.0, (height - 1) / 2.0
    t = np.linspace(0.0, 2.0 * np.pi * cycles, n_frames)
    track = np.stack(
        [cx0 + amplitude_x * np.sin(t), cy0 + amplitude_y * np.sin(2.0 * t + 0.7)],
        axis=1,
    )
    return EyeScene(
        width=width,
        height=height,
        background=background,
        pupil_center_track=track,
        pupil_radius=pupil_radius,
        iris_radius=iris_radius,
        eye_radius=eye_radius,
        sclera_rate=sclera_rate,
        iris_rate=iris_rate,
        pupil_rate=pupil_rate,
        calibration=GazeCalibration(center_x=cx0, center_y=cy0),
    )


# --- PGM sequence I/O -------------------------------------------------------

_FRAME_PATTERN = "frame_%06d.pgm"


def write_pgm(path: str | Path, gray: np.ndarray) -> None:
    gray = np.asarray(gray)
    if gray.dtype != np.uint8 or gray.ndim != 2:
        raise FormatError("PGM writer expects a 2-D uint8 array")
    h, w = gray.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(gray.tobytes())


def read_pgm(path: str | Path) -> np.ndarray:
    data = Path(path).read_bytes()
    if not data.startswith(b"P5"):
        raise FormatError(f"{path}: not a binary PGM (magic {data[:2]!r})")
    # Header: magic, width, height, maxval; '#' comments allowed between tokens.
    tokens: list[bytes] = []
    pos = 2
    while len(tokens) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError(f"{path}: truncated PGM header")
        tokens.append(data[start:pos])
    pos += 1  # single whitespace after maxval
    try:
        w, h, maxval = (int(t) for t in tokens)
    except ValueError:
        raise FormatError(f"{path}: non-numeric PGM header") from None
    if maxval != 255:
        raise FormatError(f"{path}: unsupported maxval {maxval} (need 255)")
    body = data[pos : pos + w * h]
    if len(body) != w * h:
        raise FormatError(f"{path}: expected {w * h} pixel bytes, got {len(body)}")
    return np.frombuffer(body, dtype=np.uint8).reshape(h, w).copy()


def save_sequence(seq: FrameSequence, directory: str | Path) -> None:
    frames = seq.frames
    if frames.dtype != np.uint8:
        raise FormatError("save_sequence expects uint8 frames (quantize first)")
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for i in range(len(seq)):
        write_pgm(directory / (_FRAME_PATTERN % i), frames[i])


def load_sequence(directory: str | Path) -> FrameSequence:
    """Load frame_000000.pgm.. from a directory; indices must be contiguous."""
    directory = Path(directory)
    pattern = re.compile(r"frame_(\d{6})\.pgm$")
    found: dict[int, Path] = {}
    for p in directory.iterdir() if directory.is_dir() else []:
        m = pattern.match(p.name)
        if m:
            found[int(m.group(1))] = p
    if not found:
        raise FormatError(f"{directory}: no frame_NNNNNN.pgm files")
    indices = sorted(found)
    for want, have in enumerate(indices):
        if want != have:
            raise SequenceGapError(f"{directory}: missing frame index {want}")
    frames = []
    shape = None
    for i in indices:
        gray = read_pgm(found[i])
        if shape is None:
            shape = gray.shape
        elif gray.shape != shape:
            raise FormatError(
                f"{found[i]}: dimensions {gray.shape} differ from first frame {shape}"
            )
        frames.append(gray)
    return FrameSequence(np.stack(frames))


# --- scene config files -----------------------------------------------------

_SCENE_KEYS = {
    "width": int,
    "height": int,
    "n_frames": int,
    "seed": int,
    "pupil_radius": float,
    "iris_radius": float,
    "eye_radius": float,
    "background_rate": float,
    "sclera_rate": float,
    "iris_rate": float,
    "pupil_rate": float,
    "amplitude_x": float,
    "amplitude_y": float,
    "cycles": float,
}


def parse_key_values(text: str) -> dict[str, str]:
    """Parse `key = value` lines; '#' starts a comment; blank lines ignored."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key] = value
    return out


def scene_from_config(text: str) -> EyeScene:
    """Build a scene from a key-value config (see _SCENE_KEYS for the schema)."""
    kv = parse_key_values(text)
    kwargs = {}
    for key, value in kv.items():
        if key not in _SCENE_KEYS:
            raise ConfigError(f"unknown scene key {key!r}")
        try:
            kwargs[key] = _SCENE_KEYS[key](value)
        except ValueError:
            raise ConfigError(f"scene key {key!r}: bad value {value!r}") from None
    return make_default_scene(**kwargs)
