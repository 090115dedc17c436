import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra import numpy as hnp

from lumen_servo import plant, world
from lumen_servo.errors import CameraOutsideLumen, NoLumen
from lumen_servo.perception import (CameraModel, GeometricBackend, Mask,
                                    NoiseConfig, TargetFilter, centroid,
                                    corrupt, read_pgm, render_lumen, write_pgm)

DATA = Path(__file__).parent / "data"
CAM = CameraModel(160, 120, 1.57)


def tube_camera(position, tilt=0.0, azim=0.0):
    rot = np.eye(3)
    if tilt:
        axis = np.array([-math.sin(azim), math.cos(azim), 0.0])
        rot = plant._rot_from_axis_angle(axis, tilt)
    return plant.TipPose(position=np.asarray(position, dtype=float),
                         orientation=rot, config=(tilt, azim))


@pytest.fixture(scope="module")
def phantom():
    return world.TubePhantom(world.build_path("A"))


class TestRenderLumen:
    def test_axial_view_gives_centered_disc(self, phantom):
        _, mask = render_lumen(phantom, tube_camera([0, 0, 20.0]), CAM)
        assert mask.any_lumen
        c = centroid(mask)
        assert np.linalg.norm(c - np.asarray(CAM.center)) < 0.5

    def test_facing_the_wall_sees_no_lumen(self, phantom):
        pose = tube_camera([6.5, 0, 50.0], tilt=math.pi / 2, azim=0.0)
        _, mask = render_lumen(phantom, pose, CAM)
        assert not mask.any_lumen

    def test_lateral_offset_moves_centroid_opposite(self, phantom):
        _, mask = render_lumen(phantom, tube_camera([2.0, 0, 20.0]), CAM)
        c = centroid(mask)
        cx = CAM.center[0]
        assert c[0] < cx
        # supersampled oracle: 4x resolution, same field of view
        cam4 = CameraModel(CAM.width * 4, CAM.height * 4, CAM.horizontal_fov)
        _, mask4 = render_lumen(phantom, tube_camera([2.0, 0, 20.0]), cam4)
        c4 = centroid(mask4)
        # map the 4x-grid centroid back to base-resolution coordinates
        c4_base = (c4 - 1.5) / 4.0
        assert np.linalg.norm(c - c4_base) < 2.0

    def test_roll_invariance_in_straight_tube(self, phantom):
        _, mask0 = render_lumen(phantom, tube_camera([0, 0, 20.0]), CAM)
        roll = plant._rot_from_axis_angle([0, 0, 1.0], 0.7)
        pose = plant.TipPose(position=np.array([0, 0, 20.0]),
                             orientation=roll, config=(0.0, 0.0))
        _, mask1 = render_lumen(phantom, pose, CAM)
        assert np.linalg.norm(centroid(mask0) - centroid(mask1)) < 0.5

    def test_camera_inside_wall_rejected(self, phantom):
        with pytest.raises(CameraOutsideLumen):
            render_lumen(phantom, tube_camera([9.0, 0, 50.0]), CAM)

    def test_stride_subsamples_full_resolution(self, phantom):
        pose = tube_camera([1.0, 0.5, 30.0])
        f1, m1 = render_lumen(phantom, pose, CAM, stride=1)
        f2, m2 = render_lumen(phantom, pose, CAM, stride=2)
        assert f2.shape == (CAM.height // 2, CAM.width // 2)
        assert m2.pixels.shape == f2.shape


class TestGeometricBackend:
    @staticmethod
    def _assert_recovers(out, mask, frame):
        # exact except where uint8 shading saturates at the distance-band
        # boundary; there the backend may only under-segment
        diff = out.pixels != mask.pixels
        assert np.all(frame[diff] == 255)
        assert np.all(out.pixels[diff] == 0)
        assert diff.sum() <= 0.01 * mask.pixels.sum()

    def test_recovers_ground_truth_mask(self, phantom):
        backend = GeometricBackend(25.0)
        for pos in ([0, 0, 20.0], [2.0, -1.0, 40.0], [0.5, 0.5, 90.0]):
            frame, mask = render_lumen(phantom, tube_camera(pos), CAM)
            out = backend.segment([frame, frame, frame])
            self._assert_recovers(out, mask, frame)

    def test_uses_newest_frame(self, phantom):
        backend = GeometricBackend(25.0)
        f_old, _ = render_lumen(phantom, tube_camera([0, 0, 20.0]), CAM)
        f_new, m_new = render_lumen(phantom, tube_camera([2.0, 0, 40.0]), CAM)
        out = backend.segment([f_old, f_old, f_new])
        self._assert_recovers(out, m_new, f_new)


class TestCorrupt:
    def test_identity_config(self):
        mask = Mask((np.arange(12).reshape(3, 4) % 2).astype(np.uint8))
        assert corrupt(mask, NoiseConfig()) is mask

    def test_full_flip_is_complement(self):
        px = (np.arange(12).reshape(3, 4) % 2).astype(np.uint8)
        out = corrupt(Mask(px), NoiseConfig(flip_prob=1.0))
        assert np.array_equal(out.pixels, 1 - px)

    def test_occluder_zeroes_disc(self):
        px = np.ones((20, 20), dtype=np.uint8)
        out = corrupt(Mask(px), NoiseConfig(occluder=((10.0, 10.0), 3.0)))
        assert out.pixels[10, 10] == 0
        assert out.pixels[10, 13] == 0
        assert out.pixels[10, 14] == 1

    def test_certain_dropout_blanks_mask(self):
        px = np.ones((4, 4), dtype=np.uint8)
        out = corrupt(Mask(px), NoiseConfig(illumination_dropout_prob=1.0))
        assert not out.pixels.any()

    def test_seeded_corruption_matches_golden_fixture(self):
        src = Mask((read_pgm(DATA / "corrupt_input.pgm") > 0).astype(np.uint8))
        golden = (read_pgm(DATA / "corrupt_golden_seed42.pgm") > 0).astype(np.uint8)
        out = corrupt(src, NoiseConfig(flip_prob=0.05, rng_seed=42))
        assert np.array_equal(out.pixels, golden)

    def test_probability_validation(self):
        with pytest.raises(ValueError):
            NoiseConfig(flip_prob=1.5)


class TestCentroid:
    def test_single_pixel(self):
        px = np.zeros((4, 4), dtype=np.uint8)
        px[1, 2] = 1
        assert np.allclose(centroid(Mask(px)), [2.0, 1.0])

    def test_full_mask_is_image_center(self):
        px = np.ones((24, 32), dtype=np.uint8)
        assert np.allclose(centroid(Mask(px)), [15.5, 11.5])

    def test_l_shape(self):
        px = np.zeros((3, 3), dtype=np.uint8)
        px[0, 0] = px[0, 1] = px[2, 0] = 1       # {(0,0), (1,0), (0,2)} as (u,w)
        assert np.allclose(centroid(Mask(px)), [1 / 3, 2 / 3])

    def test_empty_mask_raises(self):
        with pytest.raises(NoLumen):
            centroid(Mask(np.zeros((4, 4), dtype=np.uint8)))

    @given(hnp.arrays(np.uint8, (12, 16), elements=st.integers(0, 1)))
    def test_matches_brute_force_double_sum(self, px):
        if not px.any():
            return
        m00 = m10 = m01 = 0
        for w in range(px.shape[0]):
            for u in range(px.shape[1]):
                m00 += int(px[w, u])
                m10 += int(px[w, u]) * u
                m01 += int(px[w, u]) * w
        assert np.array_equal(centroid(Mask(px)), [m10 / m00, m01 / m00])

    @given(hnp.arrays(np.uint8, (8, 8), elements=st.integers(0, 1)),
           st.integers(0, 6), st.integers(0, 6))
    def test_translation_equivariance(self, px, dx, dy):
        if not px.any():
            return
        big = np.zeros((20, 20), dtype=np.uint8)
        big[:8, :8] = px
        moved = np.zeros((20, 20), dtype=np.uint8)
        moved[dy:dy + 8, dx:dx + 8] = px
        assert np.allclose(centroid(Mask(moved)) - centroid(Mask(big)), [dx, dy])


class TestTargetFilter:
    def test_constant_input(self):
        f = TargetFilter()
        for _ in range(4):
            out = f.update([10.0, 10.0])
        assert np.allclose(out, [10.0, 10.0])

    def test_step_response(self):
        f = TargetFilter()
        for _ in range(4):
            f.update([0.0, 0.0])
        outs = [f.update([8.0, 8.0])[0] for _ in range(4)]
        assert outs == [2.0, 4.0, 6.0, 8.0]

    def test_ramp(self):
        f = TargetFilter()
        for x in (1.0, 2.0, 3.0, 4.0):
            f.update([x, 0.0])
        assert f.update([5.0, 0.0])[0] == pytest.approx(3.5)

    def test_order_invariance(self):
        pts = [[1.0, 5.0], [2.0, -1.0], [7.0, 0.0], [3.0, 3.0]]
        f1, f2 = TargetFilter(), TargetFilter()
        for p in pts:
            f1.update(p)
        for p in reversed(pts):
            f2.update(p)
        assert np.allclose(f1.value, f2.value)

    def test_empty_filter_raises(self):
        with pytest.raises(NoLumen):
            TargetFilter().value


class TestPgm:
    def test_roundtrip(self, tmp_path, rng):
        img = rng.integers(0, 256, size=(17, 23)).astype(np.uint8)
        write_pgm(tmp_path / "img.pgm", img)
        assert np.array_equal(read_pgm(tmp_path / "img.pgm"), img)

    def test_rejects_non_uint8(self, tmp_path):
        with pytest.raises(ValueError):
            write_pgm(tmp_path / "bad.pgm", np.zeros((2, 2), dtype=np.float64))

    def test_rejects_non_pgm(self, tmp_path):
        (tmp_path / "bad.pgm").write_bytes(b"P6\n1 1\n255\nxxx")
        with pytest.raises(ValueError):
            read_pgm(tmp_path / "bad.pgm")


def test_mask_requires_binary_uint8():
    with pytest.raises(ValueError):
        Mask(np.full((2, 2), 3, dtype=np.uint8))
    with pytest.raises(ValueError):
        Mask(np.zeros((2, 2), dtype=np.int32))
