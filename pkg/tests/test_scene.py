import numpy as np
import pytest

from blisscam.errors import ConfigError, FormatError, SequenceGapError
from blisscam.scene import (
    CLASS_IRIS,
    CLASS_PUPIL,
    CLASS_SCLERA,
    FrameSequence,
    GazeCalibration,
    generate_sequence,
    load_sequence,
    make_default_scene,
    render_frame,
    save_sequence,
    scene_from_config,
    write_pgm,
)


def stationary_scene(n=4):
    scene = make_default_scene(width=120, height=90, n_frames=n, seed=2,
                               pupil_radius=8.0, iris_radius=18.0, eye_radius=36.0,
                               amplitude_x=0.0, amplitude_y=0.0)
    return scene


def test_stationary_pupil_frames_identical():
    scene = stationary_scene()
    seq, _ = generate_sequence(scene, 2, seed=0)
    assert np.array_equal(seq.frames[0], seq.frames[1])


def test_horizontal_motion_gives_increasing_gaze():
    scene = make_default_scene(width=160, height=120, n_frames=10, seed=3,
                               pupil_radius=8.0, iris_radius=18.0, eye_radius=45.0,
                               amplitude_x=20.0, amplitude_y=0.0, cycles=0.25)
    # replace the track with a straight +3 px/frame horizontal march
    xs = 60.0 + 3.0 * np.arange(10)
    scene.pupil_center_track = np.stack([xs, np.full(10, 59.5)], axis=1)
    _, truth = generate_sequence(scene, 10, seed=0)
    horizontal = truth.gaze_angles[:, 1]
    assert np.all(np.diff(horizontal) > 0)


def test_same_seed_bit_identical():
    scene = make_default_scene(width=100, height=80, n_frames=5, seed=9,
                               pupil_radius=6.0, iris_radius=14.0, eye_radius=30.0,
                               amplitude_x=10.0, amplitude_y=6.0)
    a, ta = generate_sequence(scene, 5, seed=42)
    b, tb = generate_sequence(scene, 5, seed=42)
    assert np.array_equal(a.frames, b.frames)
    assert np.array_equal(ta.seg_maps, tb.seg_maps)
    assert np.array_equal(ta.gaze_angles, tb.gaze_angles)


def test_track_shorter_than_frames_is_config_error():
    scene = stationary_scene(n=3)
    with pytest.raises(ConfigError, match="track"):
        generate_sequence(scene, 10, seed=0)


def test_needs_two_frames():
    scene = stationary_scene()
    with pytest.raises(ConfigError):
        generate_sequence(scene, 1, seed=0)


def test_pixels_outside_swept_iris_are_static():
    scene = make_default_scene(width=160, height=120, n_frames=8, seed=4,
                               pupil_radius=8.0, iris_radius=18.0, eye_radius=45.0,
                               amplitude_x=15.0, amplitude_y=8.0)
    seq, _ = generate_sequence(scene, 8, seed=0)
    ys, xs = np.mgrid[0:120, 0:160].astype(float)
    moving = np.zeros((120, 160), dtype=bool)
    for cx, cy in scene.pupil_center_track[:8]:
        moving |= np.hypot(xs - cx, ys - cy) <= scene.iris_radius + 1.5
    static = ~moving
    ref = seq.frames[0]
    for t in range(1, 8):
        assert np.array_equal(seq.frames[t][static], ref[static])


def test_classes_are_concentric():
    scene = stationary_scene()
    _, truth = generate_sequence(scene, 2, seed=0)
    seg = truth.seg_maps[0]
    assert set(np.unique(seg)) == {0, CLASS_SCLERA, CLASS_IRIS, CLASS_PUPIL}
    ys, xs = np.nonzero(seg == CLASS_PUPIL)
    # every pupil pixel is surrounded by the iris disc: its 2-dilation stays in {iris, pupil}
    for y, x in zip(ys[::7], xs[::7]):
        patch = seg[max(y - 1, 0) : y + 2, max(x - 1, 0) : x + 2]
        assert np.all((patch == CLASS_PUPIL) | (patch == CLASS_IRIS) | (patch == CLASS_PUPIL))


def test_pupil_darker_than_iris_darker_than_sclera():
    scene = stationary_scene()
    frame = render_frame(scene, tuple(scene.pupil_center_track[0]))
    _, truth = generate_sequence(scene, 2, seed=0)
    seg = truth.seg_maps[0]
    assert frame[seg == CLASS_PUPIL].mean() < frame[seg == CLASS_IRIS].mean() < frame[seg == CLASS_SCLERA].mean()


def test_calibration_map_is_affine():
    calib = GazeCalibration(slope_v=0.1, slope_h=0.2, center_x=50.0, center_y=40.0)
    v, h = calib.angles(55.0, 38.0)
    assert v == pytest.approx(-0.2)
    assert h == pytest.approx(1.0)


# --- PGM I/O ----------------------------------------------------------------


def test_save_load_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    frames = rng.integers(0, 256, size=(3, 12, 17), dtype=np.uint8)
    seq = FrameSequence(frames)
    save_sequence(seq, tmp_path)
    back = load_sequence(tmp_path)
    assert np.array_equal(back.frames, frames)


def test_load_fixture_dimensions(tmp_path):
    frames = np.zeros((3, 400, 640), dtype=np.uint8)
    save_sequence(FrameSequence(frames), tmp_path)
    seq = load_sequence(tmp_path)
    assert len(seq) == 3 and seq.width == 640 and seq.height == 400


def test_empty_directory_errors(tmp_path):
    with pytest.raises(FormatError, match="no frame"):
        load_sequence(tmp_path)


def test_wrong_magic_errors(tmp_path):
    (tmp_path / "frame_000000.pgm").write_bytes(b"P6\n2 2\n255\n" + b"\x00" * 12)
    with pytest.raises(FormatError, match="not a binary PGM"):
        load_sequence(tmp_path)


def test_missing_index_errors(tmp_path):
    write_pgm(tmp_path / "frame_000000.pgm", np.zeros((2, 2), np.uint8))
    write_pgm(tmp_path / "frame_000002.pgm", np.zeros((2, 2), np.uint8))
    with pytest.raises(SequenceGapError, match="missing frame index 1"):
        load_sequence(tmp_path)


def test_mixed_dimensions_error(tmp_path):
    write_pgm(tmp_path / "frame_000000.pgm", np.zeros((2, 2), np.uint8))
    write_pgm(tmp_path / "frame_000001.pgm", np.zeros((3, 2), np.uint8))
    with pytest.raises(FormatError, match="dimensions"):
        load_sequence(tmp_path)


# --- config parsing ----------------------------------------------------------


def test_scene_from_config():
    scene = scene_from_config(
        """
        # comment
        width = 120
        height = 90
        n_frames = 4
        iris_radius = 20
        pupil_radius = 9
        eye_radius = 40
        amplitude_x = 5
        amplitude_y = 3
        """
    )
    assert scene.width == 120 and scene.height == 90
    assert scene.iris_radius == 20.0


def test_scene_config_unknown_key():
    with pytest.raises(ConfigError, match="unknown scene key 'wat'"):
        scene_from_config("wat = 3\n")


def test_scene_invariants():
    with pytest.raises(ConfigError, match="pupil radius"):
        make_default_scene(width=100, height=80, n_frames=3, pupil_radius=30.0,
                           iris_radius=20.0, eye_radius=35.0,
                           amplitude_x=1.0, amplitude_y=1.0)
