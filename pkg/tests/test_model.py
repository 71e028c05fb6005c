"""Per-finger retargeting nets: normalization, limit mapping, serialization."""

import numpy as np
import pytest

from geort.errors import CheckpointFormatError, ContractError, UnknownFingerError
from geort.model import MIN_INPUT_SCALE, FingerModel, RetargetModel, input_normalization


class TestInputNormalization:
    def test_centers_and_scales_per_axis(self):
        pts = np.array([[0.0, -2.0, 5.0], [4.0, 2.0, 5.0]])
        center, scale = input_normalization(pts)
        assert np.allclose(center, [2.0, 0.0, 5.0])
        assert np.allclose(scale, [2.0, 2.0, MIN_INPUT_SCALE])

    def test_degenerate_axis_floored(self):
        pts = np.zeros((10, 3))
        _, scale = input_normalization(pts)
        assert np.all(scale == MIN_INPUT_SCALE)


class TestFingerModel:
    def test_outputs_respect_joint_limits(self, robot_chain, rng):
        pts = rng.uniform(-0.1, 0.1, size=(200, 3))
        model = FingerModel.initialized("index", robot_chain, pts, [32, 32], rng)
        lo, hi = robot_chain.finger_limits("index")
        q = model.forward(rng.uniform(-0.5, 0.5, size=(500, 3)))
        assert np.all(q > lo - 1e-12)
        assert np.all(q < hi + 1e-12)

    def test_single_and_batch_agree(self, robot_chain, rng):
        pts = rng.uniform(-0.1, 0.1, size=(50, 3))
        model = FingerModel.initialized("index", robot_chain, pts, [16], rng)
        batch = rng.normal(size=(8, 3)) * 0.05
        out = model.forward(batch)
        for i in range(8):
            assert np.allclose(model.forward(batch[i]), out[i])

    def test_payload_round_trip(self, robot_chain, rng):
        pts = rng.uniform(-0.1, 0.1, size=(50, 3))
        model = FingerModel.initialized("middle", robot_chain, pts, [16, 16], rng)
        clone = FingerModel.from_payload(model.to_payload())
        x = rng.normal(size=(20, 3)) * 0.05
        assert np.array_equal(model.forward(x), clone.forward(x))

    def test_bad_payload_rejected(self):
        with pytest.raises(CheckpointFormatError):
            FingerModel.from_payload({"finger_id": "x"})


class TestRetargetModel:
    def make_model(self, chain, rng):
        fingers = {
            fid: FingerModel.initialized(
                fid, chain, rng.uniform(-0.1, 0.1, size=(50, 3)), [16], rng
            )
            for fid in chain.finger_ids()
        }
        return RetargetModel(chain, fingers)

    def test_frame_mapping_orders_by_chain(self, robot_chain, rng):
        model = self.make_model(robot_chain, rng)
        tips = {fid: rng.normal(size=3) * 0.05 for fid in robot_chain.finger_ids()}
        q = model.map_frame(tips)
        assert q.shape == (robot_chain.n_joints,)
        for fid in robot_chain.finger_ids():
            idx = robot_chain.finger_joint_indices(fid)
            expect = model.fingers[fid].forward(tips[fid])
            assert np.allclose(q[idx], expect)

    def test_missing_finger_rejected(self, robot_chain, rng):
        model = self.make_model(robot_chain, rng)
        tips = {fid: np.zeros(3) for fid in robot_chain.finger_ids()[1:]}
        with pytest.raises(UnknownFingerError):
            model.map_frame(tips)

    def test_batch_mapping(self, robot_chain, rng):
        model = self.make_model(robot_chain, rng)
        tips = {fid: rng.normal(size=(12, 3)) * 0.05 for fid in robot_chain.finger_ids()}
        q = model.map_batch(tips)
        assert q.shape == (12, robot_chain.n_joints)
        single = model.map_frame({fid: tips[fid][3] for fid in tips})
        assert np.allclose(q[3], single)

    def test_incomplete_finger_set_rejected(self, robot_chain, rng):
        fingers = {
            "index": FingerModel.initialized(
                "index", robot_chain, rng.uniform(-0.1, 0.1, size=(50, 3)), [16], rng
            )
        }
        with pytest.raises(ContractError):
            RetargetModel(robot_chain, fingers)

    def test_payload_round_trip_checks_chain(self, robot_chain, proxy_chain, rng):
        model = self.make_model(robot_chain, rng)
        payload = model.to_payload()
        clone = RetargetModel.from_payload(payload, robot_chain)
        tips = {fid: rng.normal(size=3) * 0.05 for fid in robot_chain.finger_ids()}
        assert np.array_equal(model.map_frame(tips), clone.map_frame(tips))
        with pytest.raises(CheckpointFormatError):
            RetargetModel.from_payload(payload, proxy_chain)
