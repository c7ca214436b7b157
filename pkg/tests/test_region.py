"""Tests for region classification, map building and axis sweeps."""

import json

import numpy as np
import pytest

from pidspace import (
    BIT_MS,
    BIT_PM,
    BIT_STABLE,
    ConstraintSet,
    DesignSetup,
    GainPlane,
    MarginSpec,
    PidGains,
    RationalTransferFunction,
    RegionMap,
    WeightSpec,
    build_region_map,
    classify_point,
    closed_loop_poles,
    spectral_radius,
    sweep_axis,
)

from test_boundary import example_plant, vehicle_weights
from test_tfcore import vehicle_s, vehicle_z


def vehicle_constraints():
    return ConstraintSet(
        (vehicle_z(),),
        require_stability=True,
        margin_spec=MarginSpec(20.0, 80.0),
        ms_weights=vehicle_weights(),
    )


def vehicle_setup():
    return DesignSetup(
        plants=(vehicle_s(),),
        sample_time=0.01,
        margin_spec=MarginSpec(20.0, 80.0),
        sensitivity_weight=WeightSpec(0.5, 4.0, 5.0, "sensitivity"),
        complementary_weight=WeightSpec(0.2, 1.8, 120.0, "complementary"),
    )


class TestClassifyPoint:
    def test_zero_gains_integrator_structure_unstable(self):
        for plant in (example_plant(), vehicle_z()):
            cs = ConstraintSet((plant,), require_stability=True)
            for structure in ("PI", "PID"):
                plane = GainPlane("kp", "ki", structure=structure)
                assert classify_point(cs, plane, 0.0, 0.0) & BIT_STABLE == 0

    def test_design_point_all_bits(self):
        cs = vehicle_constraints()
        bits = classify_point(cs, GainPlane("kd", "kp"), 0.07, 0.2)
        assert bits == cs.active_mask == BIT_STABLE | BIT_PM | BIT_MS

    def test_point_outside_stable_region_has_outer_pole(self):
        G = example_plant()
        plane = GainPlane("kd", "kp")
        gains = plane.gains_at(0.9, 1.8)
        poles = closed_loop_poles(G, gains)
        assert max(abs(p) for p in poles) > 1.0
        cs = ConstraintSet((G,), require_stability=True)
        assert classify_point(cs, plane, 0.9, 1.8) & BIT_STABLE == 0

    def test_family_intersects_bits(self):
        g1 = example_plant()
        g2 = RationalTransferFunction.discrete([1.2], [1.0, 0.9, 0.0], 1.0)
        plane = GainPlane("kd", "kp")
        both = ConstraintSet((g1, g2), require_stability=True)
        for x, y in [(-0.2, 0.4), (0.1, 0.6), (0.3, 1.1)]:
            b = classify_point(both, plane, x, y)
            b1 = classify_point(ConstraintSet((g1,)), plane, x, y)
            b2 = classify_point(ConstraintSet((g2,)), plane, x, y)
            assert b == b1 & b2


class TestConstraintSet:
    def test_needs_a_constraint(self):
        with pytest.raises(ValueError, match="no active constraint"):
            ConstraintSet((example_plant(),), require_stability=False)

    def test_sample_time_agreement(self):
        with pytest.raises(ValueError, match="share the sample time"):
            ConstraintSet((example_plant(1.0), example_plant(0.5)))

    def test_rejects_continuous_plants(self):
        with pytest.raises(ValueError, match="discrete"):
            ConstraintSet((vehicle_s(),))


class TestBuildRegionMap:
    def test_map_agrees_with_pole_oracle(self):
        G = example_plant()
        cs = ConstraintSet((G,), require_stability=True)
        plane = GainPlane("kp", "ki")
        m = build_region_map(cs, plane, (-2.5, 2.5), (-4.5, 2.5), nx=41, ny=41)
        xs, ys = m.x_centers(), m.y_centers()
        rng = np.random.default_rng(2)
        for _ in range(60):
            i = int(rng.integers(0, 41))
            j = int(rng.integers(0, 41))
            stable = spectral_radius(G, plane.gains_at(xs[i], ys[j])) < 1 - 1e-9
            assert bool(m.cells[j, i] & BIT_STABLE) == stable
        assert m.metadata["feasible_cells"] > 0

    def test_multi_objective_region_contains_design_point(self):
        # grids chosen so the published design point is a cell center
        m = build_region_map(
            vehicle_constraints(), GainPlane("kd", "kp"),
            (0.0, 0.14), (0.0, 0.4), nx=7, ny=5,
            n_margin_points=2048, n_rp_points=1024,
        )
        assert m.metadata["feasible_cells"] > 0
        ix, iy = m.cell_containing(0.07, 0.2)
        assert m.x_centers()[ix] == pytest.approx(0.07)
        assert m.y_centers()[iy] == pytest.approx(0.2)
        assert m.feasible_cells()[iy, ix]

    def test_added_constraint_never_grows_region(self):
        G = vehicle_z()
        plane = GainPlane("kd", "kp")
        kwargs = dict(x_range=(0.0, 0.2), y_range=(0.0, 0.6), nx=11, ny=11,
                      n_margin_points=1024, n_rp_points=512, with_boundaries=False)
        loose = build_region_map(ConstraintSet((G,)), plane, **kwargs)
        tight = build_region_map(
            ConstraintSet((G,), margin_spec=MarginSpec(20.0, 80.0)), plane, **kwargs
        )
        assert (tight.feasible_cells() <= loose.feasible_cells()).all()

    def test_family_map_is_cellwise_and(self):
        g1 = example_plant()
        g2 = RationalTransferFunction.discrete([1.2], [1.0, 0.9, 0.0], 1.0)
        plane = GainPlane("kd", "kp")
        kwargs = dict(x_range=(-1.0, 1.0), y_range=(-1.0, 2.0), nx=15, ny=15, with_boundaries=False)
        m12 = build_region_map(ConstraintSet((g1, g2)), plane, **kwargs)
        m1 = build_region_map(ConstraintSet((g1,)), plane, **kwargs)
        m2 = build_region_map(ConstraintSet((g2,)), plane, **kwargs)
        np.testing.assert_array_equal(m12.cells, m1.cells & m2.cells)

    def test_deterministic_serialization(self):
        cs = ConstraintSet((example_plant(),))
        plane = GainPlane("kp", "ki")
        kwargs = dict(x_range=(-2.0, 2.0), y_range=(-4.0, 2.0), nx=21, ny=21)
        a = json.dumps(build_region_map(cs, plane, **kwargs).to_dict(), sort_keys=True)
        b = json.dumps(build_region_map(cs, plane, **kwargs).to_dict(), sort_keys=True)
        assert a == b

    def test_stability_flip_only_near_boundary(self):
        # along each grid row, membership flips happen within one cell of
        # a boundary crossing (boundary-crossing property)
        G = example_plant()
        plane = GainPlane("kp", "ki")
        m = build_region_map(ConstraintSet((G,)), plane, (-2.5, 2.5), (-4.5, 2.5), nx=61, ny=61)
        xs, ys = m.x_centers(), m.y_centers()
        bpts = np.array(
            [[p.x, p.y] for c in m.boundaries for p in c.points]
        )
        segs = [s for c in m.boundaries for s in c.singular_segments]
        dx = xs[1] - xs[0]
        dy = ys[1] - ys[0]
        diag = float(np.hypot(dx, dy))
        stable = (m.cells & BIT_STABLE) > 0
        for j in range(m.ny):
            for i in range(m.nx - 1):
                if stable[j, i] == stable[j, i + 1]:
                    continue
                mid = np.array([0.5 * (xs[i] + xs[i + 1]), ys[j]])
                d = np.min(np.hypot(*(bpts - mid).T)) if bpts.size else np.inf
                for s in segs:
                    p0 = np.array(s.point)
                    u = np.array(s.direction)
                    d = min(d, float(np.linalg.norm((mid - p0) - np.dot(mid - p0, u) * u)))
                assert d <= diag

    def test_map_round_trip(self):
        m = build_region_map(ConstraintSet((example_plant(),)), GainPlane("kp", "ki"),
                             (-2.0, 2.0), (-4.0, 2.0), nx=15, ny=15)
        back = RegionMap.from_dict(json.loads(json.dumps(m.to_dict())))
        np.testing.assert_array_equal(back.cells, m.cells)
        # the serialized plane carries the resolved structure explicitly
        assert back.plane.to_dict() == m.plane.to_dict()
        assert back.metadata == m.metadata
        assert len(back.boundaries) == len(m.boundaries)

    def test_boundary_failure_degrades_with_warning(self):
        # zero plant: classification still works (never stable bit set via
        # charpoly = den * denC) but the CRB generator fails
        G = RationalTransferFunction.discrete([0.0], [1.0, -0.5], 1.0)
        m = build_region_map(ConstraintSet((G,)), GainPlane("kp", "ki"),
                             (-1, 1), (-1, 1), nx=5, ny=5)
        assert any("CRB" in w for w in m.metadata["warnings"])


class TestAutoScan:
    def test_auto_ranges_cover_known_region(self):
        cs = ConstraintSet((example_plant(),))
        m = build_region_map(cs, GainPlane("kp", "ki"), nx=41, ny=41)
        # the PI stable region of 1/(z(z+1)) is bounded; auto-scan must
        # leave it strictly interior
        assert not m.metadata["clipped"]
        assert m.metadata["feasible_cells"] > 0
        assert m.x_range[0] < -1.0 and m.x_range[1] > 1.0


class TestSweepAxis:
    def test_sample_time_sweep_rediscretizes_continuous_plant(self):
        setup = DesignSetup(plants=(vehicle_s(),), sample_time=0.01)
        plane = GainPlane("kd", "kp")
        res = sweep_axis(setup, "sample_time", [0.01, 0.05, 0.1], plane,
                         (0.0, 0.3), (0.0, 1.2), nx=13, ny=13, with_boundaries=False)
        assert not res.failures
        assert len(res.maps) == 3
        # each slice agrees with a fresh oracle classification at that T
        for T, m in zip(res.values, res.maps):
            cs = setup.constraints_at(T)
            xs, ys = m.x_centers(), m.y_centers()
            for i, j in [(2, 3), (6, 6), (10, 9)]:
                assert m.cells[j, i] == classify_point(cs, plane, xs[i], ys[j])
        # and the slices genuinely differ (the region depends on T)
        assert any(
            not np.array_equal(res.maps[0].cells, m.cells) for m in res.maps[1:]
        )

    def test_sample_time_sweep_fixed_discrete_plant_varies_with_controller_scaling(self):
        # a fixed G(z) under sample-time scheduling still produces varying
        # regions because the physical-gain controller rescales with T
        setup = DesignSetup(plants=(example_plant(0.3),), sample_time=0.3)
        plane = GainPlane("kd", "kp")
        res = sweep_axis(setup, "sample_time", [0.3, 0.5, 0.8], plane,
                         (-3.0, 1.5), (-2.5, 2.5), nx=21, ny=21, with_boundaries=False)
        assert not res.failures
        assert any(not np.array_equal(res.maps[0].cells, m.cells) for m in res.maps[1:])
        for T, m in zip(res.values, res.maps):
            cs = setup.constraints_at(T)
            assert m.cells[10, 10] == classify_point(cs, plane, m.x_centers()[10], m.y_centers()[10])

    def test_third_gain_sweep_zero_slice_degenerates_to_pd(self):
        G = vehicle_z()
        setup = DesignSetup(plants=(G,), sample_time=0.01)
        plane = GainPlane("kd", "kp")
        res = sweep_axis(setup, "third_gain", [0.0, 0.1, 0.2], plane,
                         (0.0, 0.2), (0.0, 0.8), nx=9, ny=9, with_boundaries=False)
        assert not res.failures
        pd_map = build_region_map(ConstraintSet((G,)), plane, (0.0, 0.2), (0.0, 0.8),
                                  nx=9, ny=9, with_boundaries=False)
        np.testing.assert_array_equal(res.maps[0].cells, pd_map.cells)
        assert not np.array_equal(res.maps[1].cells, pd_map.cells)

    def test_failed_slice_recorded(self):
        setup = DesignSetup(plants=(vehicle_s(),), sample_time=0.01)
        res = sweep_axis(setup, "sample_time", [0.01, -1.0], GainPlane("kd", "kp"),
                         (0.0, 0.2), (0.0, 0.8), nx=5, ny=5, with_boundaries=False)
        assert res.maps[1] is None
        assert res.failures and res.failures[0][0] == 1
