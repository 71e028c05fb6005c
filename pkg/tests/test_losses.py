"""Closed-form oracles and finite-difference gradient checks for every loss."""

import numpy as np
import pytest

from geort.autodiff import check_gradients, tape
from geort.errors import DegeneracyError, TrainingDivergenceError
from geort.losses import (
    LossBreakdown,
    PerturbationSpec,
    draw_perturbations,
    loss_col,
    loss_cover,
    loss_dir,
    loss_flat,
    loss_linear_baseline,
    loss_pinch,
)
from geort.model import FingerModel, RetargetModel
from geort.kinematics import tape_fk


class IdentityFinger:
    def tape_forward(self, x, params=None):
        return x


class MapTo:
    """Collapses every input to one fixed output point."""

    def __init__(self, pt):
        self.pt = np.asarray(pt, dtype=float)

    def tape_forward(self, x, params=None):
        return tape.constant(np.tile(self.pt, (x.data.shape[0], 1)))


def ident_fk(t):
    return t


SPEC = PerturbationSpec(sigma=0.005, directions=3)
ANCHORS = np.random.default_rng(0).normal(size=(10, 3)) * 0.05


class TestLossDir:
    def test_identity_map_scores_minus_one(self):
        v = loss_dir(IdentityFinger(), ident_fk, ANCHORS, SPEC, np.random.default_rng(1))
        assert abs(v.item() + 1.0) < 1e-9

    def test_direction_reversal_scores_plus_one(self):
        class Neg:
            def tape_forward(self, x, params=None):
                return -1.0 * x

        v = loss_dir(Neg(), ident_fk, ANCHORS, SPEC, np.random.default_rng(1))
        assert abs(v.item() - 1.0) < 1e-9

    def test_range_bounded(self, robot_chain, rng):
        model = FingerModel.initialized(
            "index", robot_chain, rng.uniform(-0.05, 0.05, (50, 3)), [16], rng
        )
        v = loss_dir(model, tape_fk(robot_chain, "index"), ANCHORS, SPEC, rng)
        assert -1.0 <= v.item() <= 1.0

    def test_constant_map_degenerates(self):
        with pytest.raises(DegeneracyError):
            loss_dir(MapTo([0.5, 0, 0]), ident_fk, ANCHORS, SPEC, np.random.default_rng(8))

    def test_skip_accounting(self):
        stats = {}
        loss_dir(IdentityFinger(), ident_fk, ANCHORS, SPEC, np.random.default_rng(9), stats=stats)
        assert stats == {"skipped": 0, "total": ANCHORS.shape[0] * SPEC.directions}


class TestLossCover:
    def test_singleton_clouds(self):
        v = loss_cover(IdentityFinger(), ident_fk, np.zeros((1, 3)), np.array([[1.0, 0, 0]]))
        assert abs(v.item() - 2.0) < 1e-12

    def test_perfect_overlap_is_zero(self):
        v = loss_cover(MapTo([1.0, 0, 0]), ident_fk, np.zeros((3, 3)), np.array([[1.0, 0, 0]]))
        assert abs(v.item()) < 1e-12

    def test_translation_equivariance(self):
        a = np.random.default_rng(2).normal(size=(20, 3))
        b = np.random.default_rng(3).normal(size=(30, 3))

        class Shift:
            def __init__(s, delta):
                s.delta = delta

            def tape_forward(s, x, params=None):
                return x + s.delta

        v1 = loss_cover(Shift(0.0), ident_fk, a, b)
        v2 = loss_cover(Shift(7.5), ident_fk, a, b + 7.5)
        assert abs(v1.item() - v2.item()) < 1e-10

    def test_nonnegative(self, robot_chain, rng):
        model = FingerModel.initialized(
            "index", robot_chain, rng.uniform(-0.05, 0.05, (50, 3)), [16], rng
        )
        cloud = rng.uniform(-0.05, 0.1, size=(64, 3))
        v = loss_cover(model, tape_fk(robot_chain, "index"), ANCHORS, cloud)
        assert v.item() >= 0.0


class TestLossFlat:
    def test_affine_map_is_exactly_flat(self):
        class Affine:
            def tape_forward(self, x, params=None):
                w = tape.constant(np.array([[1.0, 2.0, 0.0], [0.5, -1.0, 3.0], [0.0, 1.0, 1.0]]))
                return tape.matmul(x, w) + tape.constant(np.array([0.1, -0.2, 0.3]))

        v = loss_flat(Affine(), ident_fk, ANCHORS, SPEC, np.random.default_rng(4))
        assert v.item() < 1e-25

    def test_quadratic_closed_form(self):
        class Quad:
            def tape_forward(self, x, params=None):
                return x * x

        _, d = draw_perturbations(ANCHORS, SPEC, np.random.default_rng(7))
        expect = float(np.mean(np.sum((2.0 * d * d) ** 2, axis=1)))
        v = loss_flat(Quad(), ident_fk, ANCHORS, SPEC, np.random.default_rng(7))
        assert abs(v.item() - expect) < 1e-15


class TestLossPinch:
    def frames(self):
        return {"a": np.zeros((4, 3)), "b": np.zeros((4, 3))}

    def hand(self):
        class Hand:
            fingers = {"a": IdentityFinger(), "b": MapTo([0.02, 0, 0])}

        return Hand(), {"a": ident_fk, "b": ident_fk}

    def test_strict_threshold_zero_means_inactive(self):
        hand, fk = self.hand()
        assert loss_pinch(hand, fk, self.frames(), 0.0).item() == 0.0

    def test_active_pair_value(self):
        # the robot tips stay 0.02 m apart on every active frame:
        # per frame sum = 0.02^2, averaged over 4 frames -> 4e-4
        hand, fk = self.hand()
        v = loss_pinch(hand, fk, self.frames(), 0.01)
        assert abs(v.item() - 4e-4) < 1e-15

    def test_identity_bounded_by_threshold(self):
        class Hand:
            fingers = {"a": IdentityFinger(), "b": IdentityFinger()}

        rng = np.random.default_rng(3)
        d = 0.02
        frames = {
            "a": rng.normal(size=(50, 3)) * 0.01,
            "b": rng.normal(size=(50, 3)) * 0.01,
        }
        v = loss_pinch(Hand(), {"a": ident_fk, "b": ident_fk}, frames, d)
        gaps = np.linalg.norm(frames["a"] - frames["b"], axis=1)
        active = gaps < d
        expect = float(np.sum(gaps[active] ** 2) / 50)
        assert abs(v.item() - expect) < 1e-12
        assert v.item() <= d * d * 1  # one pair


class TestLossCol:
    def frames(self):
        return {"a": np.zeros((4, 3)), "b": np.zeros((4, 3))}

    def test_certain_collision_clamped(self):
        class Hand:
            fingers = {"a": IdentityFinger(), "b": IdentityFinger()}

        class AlwaysHit:
            def tape_forward(self, q):
                return tape.constant(np.ones((q.data.shape[0], 1)))

        v = loss_col(Hand(), AlwaysHit(), self.frames())
        assert abs(v.item() + np.log(1e-6)) < 1e-9

    def test_certain_free_clamped(self):
        class Hand:
            fingers = {"a": IdentityFinger(), "b": IdentityFinger()}

        class NeverHit:
            def tape_forward(self, q):
                return tape.constant(np.zeros((q.data.shape[0], 1)))

        v = loss_col(Hand(), NeverHit(), self.frames())
        assert abs(v.item() + np.log(1.0 - 1e-6)) < 1e-12


class TestLossBreakdown:
    def test_total_is_weighted_sum(self):
        b = LossBreakdown.from_terms(
            dir=-0.5, cover=0.1, flat=0.01, pinch=0.002, col=0.2,
            lambda1=50.0, lambda2=1.0, lambda3=1e4, lambda4=1e-3,
        )
        expect = -0.5 + 50.0 * 0.1 + 1.0 * 0.01 + 1e4 * 0.002 + 1e-3 * 0.2
        assert abs(b.total - expect) < 1e-12

    def test_nonfinite_term_names_itself(self):
        with pytest.raises(TrainingDivergenceError) as exc:
            LossBreakdown.from_terms(
                dir=np.nan, cover=0.0, flat=0.0, pinch=0.0, col=0.0,
                lambda1=1, lambda2=1, lambda3=1, lambda4=1,
            )
        assert exc.value.term == "dir"


def build_hand(chain, rng, hidden=(12, 12)):
    fingers = {
        fid: FingerModel.initialized(
            fid, chain, rng.uniform(-0.06, 0.1, size=(50, 3)), list(hidden), rng
        )
        for fid in chain.finger_ids()
    }
    model = RetargetModel(chain, fingers)
    fk = {fid: tape_fk(chain, fid) for fid in chain.finger_ids()}
    return model, fk


class TestGradients:
    """Autodiff vs central finite differences through real FK for every loss."""

    def per_finger_setup(self, robot_chain, rng):
        model, fk = build_hand(robot_chain, rng)
        f_i, fk_i = model.fingers["index"], fk["index"]
        return model, fk, f_i, fk_i

    def splice(self, model):
        def fn(flat):
            out, i = {}, 0
            for fid2, m in model.fingers.items():
                n = len(m.net.parameter_arrays())
                out[fid2] = flat[i : i + n]
                i += n
            return out

        flat = [t for fid in model.fingers for t in model.fingers[fid].net.parameter_tensors()]
        return fn, flat

    def test_dir(self, robot_chain, rng):
        _, _, f_i, fk_i = self.per_finger_setup(robot_chain, rng)
        rep = check_gradients(
            lambda ps: loss_dir(f_i, fk_i, ANCHORS, SPEC, np.random.default_rng(11), params=ps),
            f_i.net.parameter_tensors(), rng, n_coords=8,
        )
        assert rep["passed"], rep

    def test_cover(self, robot_chain, rng):
        _, _, f_i, fk_i = self.per_finger_setup(robot_chain, rng)
        cloud = rng.uniform(-0.05, 0.1, size=(40, 3))
        rep = check_gradients(
            lambda ps: loss_cover(f_i, fk_i, ANCHORS, cloud, params=ps),
            f_i.net.parameter_tensors(), rng, n_coords=8,
        )
        assert rep["passed"], rep

    def test_flat(self, robot_chain, rng):
        _, _, f_i, fk_i = self.per_finger_setup(robot_chain, rng)
        rep = check_gradients(
            lambda ps: loss_flat(f_i, fk_i, ANCHORS, SPEC, np.random.default_rng(12), params=ps),
            f_i.net.parameter_tensors(), rng, n_coords=8,
        )
        assert rep["passed"], rep

    def test_pinch(self, robot_chain, rng):
        model, fk, _, _ = self.per_finger_setup(robot_chain, rng)
        frames = {fid: rng.normal(size=(6, 3)) * 0.05 for fid in robot_chain.finger_ids()}
        frames["middle"][2] = frames["index"][2] + np.array([0.004, 0, 0])
        splice, flat = self.splice(model)
        rep = check_gradients(
            lambda ps: loss_pinch(model, fk, frames, 0.01, params=splice(ps)),
            flat, rng, n_coords=8,
        )
        assert rep["passed"], rep

    def test_col(self, robot_chain, rng):
        model, fk, _, _ = self.per_finger_setup(robot_chain, rng)
        frames = {fid: rng.normal(size=(6, 3)) * 0.05 for fid in robot_chain.finger_ids()}

        class StubClassifier:
            def __init__(s, w):
                s.w = tape.constant(w)

            def tape_forward(s, q):
                return tape.sigmoid(tape.matmul(q, s.w))

        clf = StubClassifier(rng.normal(size=(robot_chain.n_joints, 1)) * 0.3)
        splice, flat = self.splice(model)
        rep = check_gradients(
            lambda ps: loss_col(model, clf, frames, params=splice(ps)),
            flat, rng, n_coords=8,
        )
        assert rep["passed"], rep

    def test_linear_baseline(self, robot_chain, rng):
        model, fk, _, _ = self.per_finger_setup(robot_chain, rng)
        frames = {fid: rng.normal(size=(6, 3)) * 0.05 for fid in robot_chain.finger_ids()}
        alpha = {fid: 1.2 for fid in robot_chain.finger_ids()}
        origins = {
            fid: (np.array([0.0, 0.08, 0.0]), np.array([0.0, 0.1, 0.0]))
            for fid in robot_chain.finger_ids()
        }
        splice, flat = self.splice(model)
        rep = check_gradients(
            lambda ps: loss_linear_baseline(
                model, fk, frames, alpha, origins,
                perturb=SPEC, rng=np.random.default_rng(13), params=splice(ps),
            ),
            flat, rng, n_coords=8,
        )
        assert rep["passed"], rep
