"""Neural FK surrogates and the self-collision classifier."""

import numpy as np
import pytest

from geort.autodiff import check_gradients, tape
from geort.errors import DataError, QualityError, ShapeError
from geort.kinematics import Capsule, CapsuleSet, parse_chain
from geort.surrogates import (
    ClassifierTrainConfig,
    CollisionClassifier,
    FkSurrogate,
    SurrogateTrainConfig,
    roc_auc,
    train_collision_classifier,
    train_fk_surrogate,
)

ONE_JOINT = """
<robot name="one">
  <link name="wrist"/><link name="seg"/><link name="f_tip"/>
  <joint name="j" type="revolute">
    <parent link="wrist"/><child link="seg"/>
    <origin xyz="0 0 0"/><axis xyz="0 0 1"/>
    <limit lower="-1.2" upper="1.2"/>
  </joint>
  <joint name="m" type="fixed">
    <parent link="seg"/><child link="f_tip"/>
    <origin xyz="0.08 0 0"/>
  </joint>
</robot>
"""

FAST = SurrogateTrainConfig(n_iters=2500, fresh_check_samples=1000)


class TestFkSurrogate:
    def test_one_joint_finger_under_one_mm(self):
        chain = parse_chain(ONE_JOINT)
        model = train_fk_surrogate(chain, "f", 5000)
        assert model.heldout_error < 0.001

    def test_fixture_finger_meets_ceiling(self, robot_chain):
        model = train_fk_surrogate(robot_chain, "index", 8000, FAST)
        assert model.heldout_error < 0.002

    def test_too_few_samples_rejected(self, robot_chain):
        with pytest.raises(QualityError):
            train_fk_surrogate(robot_chain, "index", 10)

    def test_undertrained_model_fails_gate(self, robot_chain):
        starved = SurrogateTrainConfig(n_iters=5, fresh_check_samples=0)
        with pytest.raises(QualityError):
            train_fk_surrogate(robot_chain, "index", 2000, starved)

    def test_gradients_match_finite_differences(self, robot_chain, rng):
        model = train_fk_surrogate(robot_chain, "index", 2000, SurrogateTrainConfig(
            n_iters=300, fresh_check_samples=0, error_ceiling=1.0))
        lo, hi = robot_chain.finger_limits("index")
        q = rng.uniform(lo, hi, size=(6, 4))

        def build(params):
            out = model.tape_forward(tape.constant(q), params=params)
            return tape.tmean(out * out)

        rep = check_gradients(build, model.net.parameter_tensors(), rng, n_coords=10)
        assert rep["passed"]
        assert rep["max_rel_err"] < 1e-4

    def test_payload_round_trip(self, robot_chain, rng):
        model = train_fk_surrogate(robot_chain, "index", 1000, SurrogateTrainConfig(
            n_iters=100, fresh_check_samples=0, error_ceiling=1.0))
        clone = FkSurrogate.from_payload(model.to_payload())
        lo, hi = robot_chain.finger_limits("index")
        q = rng.uniform(lo, hi, size=(32, 4))
        assert np.array_equal(model.forward(q), clone.forward(q))
        assert clone.heldout_error == model.heldout_error

    def test_wrong_net_shape_rejected(self, robot_chain, rng):
        from geort.autodiff import FeedForwardNet

        lo, hi = robot_chain.finger_limits("index")
        bad = FeedForwardNet.initialized([2, 8, 3], rng)
        with pytest.raises(ShapeError):
            FkSurrogate("index", bad, lo, hi)

    def test_deterministic_given_seed(self, robot_chain):
        cfg = SurrogateTrainConfig(n_iters=200, fresh_check_samples=0, error_ceiling=1.0, seed=4)
        a = train_fk_surrogate(robot_chain, "index", 1500, cfg)
        b = train_fk_surrogate(robot_chain, "index", 1500, cfg)
        assert all(
            np.array_equal(x, y) for x, y in zip(a.net._flat_arrays(), b.net._flat_arrays())
        )


class TestRocAuc:
    def test_perfect_separation(self):
        assert roc_auc(np.array([0, 0, 1, 1]), np.array([0.1, 0.2, 0.8, 0.9])) == 1.0

    def test_random_scores_near_half(self, rng):
        labels = rng.random(4000) < 0.3
        scores = rng.random(4000)
        assert abs(roc_auc(labels, scores) - 0.5) < 0.05

    def test_ties_average(self):
        assert roc_auc(np.array([0, 1]), np.array([0.5, 0.5])) == 0.5

    def test_single_class_rejected(self):
        with pytest.raises(DataError):
            roc_auc(np.zeros(10, dtype=bool), np.linspace(0, 1, 10))


@pytest.fixture(scope="module")
def trained(robot_chain, robot_capsules):
    return train_collision_classifier(
        robot_chain, robot_capsules, 20000, ClassifierTrainConfig(n_iters=1500)
    )


class TestCollisionClassifier:
    def test_heldout_auc_strong(self, trained):
        assert trained.heldout_auc > 0.9

    def test_prevalence_recorded(self, trained):
        assert 0.02 < trained.prevalence < 0.8

    def test_calibration_table_stored(self, trained):
        assert trained.calibration
        for row in trained.calibration:
            assert 0.0 <= row["positive_rate"] <= 1.0
            assert row["count"] > 0

    def test_open_pose_scored_free(self, trained, robot_chain):
        assert float(trained.forward(np.zeros(robot_chain.n_joints))) < 0.5

    def test_collision_endpoints_ordered(self, trained, robot_chain, robot_capsules):
        lo, hi = robot_chain.joint_limits()
        idx = {f: robot_chain.finger_joint_indices(f) for f in robot_chain.finger_ids()}
        q_col = np.zeros(robot_chain.n_joints)
        q_col[idx["index"][0]] = hi[idx["index"][0]]
        q_col[idx["middle"][0]] = lo[idx["middle"][0]]
        q_col[idx["index"][1:]] = 0.5 * hi[idx["index"][1:]]
        q_col[idx["middle"][1:]] = 0.5 * hi[idx["middle"][1:]]
        assert robot_capsules.self_collides(q_col)
        assert float(trained.forward(np.zeros(16))) < float(trained.forward(q_col))

    def test_outputs_strictly_inside_unit_interval(self, trained, robot_chain, rng):
        lo, hi = robot_chain.joint_limits()
        p = trained.forward(rng.uniform(lo, hi, size=(500, 16)))
        assert np.all(p > 0.0)
        assert np.all(p < 1.0)

    def test_no_positives_rejected(self):
        chain = parse_chain(ONE_JOINT)
        caps = CapsuleSet(chain, [Capsule("seg", np.zeros(3), np.array([0.08, 0, 0]), 0.005)],
                          excluded_pairs=set())
        with pytest.raises(DataError):
            train_collision_classifier(chain, caps, 2000)

    def test_payload_round_trip(self, trained, robot_chain, rng):
        clone = CollisionClassifier.from_payload(trained.to_payload())
        lo, hi = robot_chain.joint_limits()
        q = rng.uniform(lo, hi, size=(50, 16))
        assert np.array_equal(trained.forward(q), clone.forward(q))
        assert clone.heldout_auc == trained.heldout_auc
