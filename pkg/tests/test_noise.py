"""Noise realizations: anchoring, shifting, extension, steering inputs and
increment statistics."""

import io
import math

import numpy as np
import numpy.testing as npt
import pytest

from rdslab import noise


def test_seed_entropy_normalizes_ints_and_tuples():
    assert noise.seed_entropy(5) == (5,)
    assert noise.seed_entropy((3, 4)) == (3, 4)
    assert noise.seed_entropy(np.int64(7)) == (7,)
    assert noise.derive_key(5) == noise.derive_key((5,))
    assert noise.derive_key(5) != noise.derive_key(6)


def test_grid_index_snaps_and_rejects():
    assert noise.grid_index(0.25, 0.25) == 1
    assert noise.grid_index(1.0 + 1e-10, 0.25) == 4
    assert noise.grid_index(-0.5, 0.25) == -2
    with pytest.raises(ValueError):
        noise.grid_index(0.0005, 1e-3)
    with pytest.raises(ValueError):
        noise.grid_index(0.26, 0.25)


def test_path_is_anchored_at_zero():
    p = noise.sample_wiener(0, 3, -1.0, 1.0, 0.25)
    npt.assert_array_equal(p.evaluate(0.0), np.zeros(3))


def test_window_must_contain_zero():
    inc = np.zeros((4, 1))
    with pytest.raises(ValueError):
        noise.NoisePath(1, 0.25, 1, 5, inc)
    with pytest.raises(ValueError):
        noise.NoisePath(1, 0.25, -5, -1, inc)
    with pytest.raises(ValueError):
        noise.sample_wiener(0, 1, 0.25, 1.25, 0.25)


def test_two_cell_shift_by_hand():
    # Two cells on [0, 1] with dt = 0.5; the view from 0.5 must read the
    # second increment at its own time 0.5 and the negated first at -0.5.
    p = noise.sample_wiener(11, 1, 0.0, 1.0, 0.5)
    g1, g2 = p.increments[0], p.increments[1]
    npt.assert_array_equal(p.evaluate(0.5), g1)
    npt.assert_array_equal(p.evaluate(1.0), g1 + g2)
    q = p.shift(0.5)
    assert (q.k_lo, q.k_hi) == (-1, 1)
    npt.assert_array_equal(q.evaluate(0.5), g2)
    npt.assert_array_equal(q.evaluate(-0.5), -g1)
    npt.assert_array_equal(q.evaluate(0.0), np.zeros(1))


def test_evaluate_interpolates_midcell():
    p = noise.sample_wiener(3, 2, 0.0, 0.5, 0.5)
    g = p.increments[0]
    npt.assert_allclose(p.evaluate(0.25), g / 2.0, rtol=0, atol=0)


def test_evaluate_rejects_outside_window():
    p = noise.sample_wiener(3, 1, 0.0, 1.0, 0.25)
    with pytest.raises(ValueError):
        p.evaluate(1.5)
    with pytest.raises(ValueError):
        p.evaluate(-0.25)


def test_shift_group_law_is_exact():
    p = noise.sample_wiener(8, 2, -2.0, 2.0, 0.25)
    two_step = p.shift(0.5).shift(0.75)
    one_step = p.shift(1.25)
    assert (two_step.k_lo, two_step.k_hi) == (one_step.k_lo, one_step.k_hi)
    npt.assert_array_equal(two_step.increments, one_step.increments)
    npt.assert_array_equal(two_step.evaluate(0.5), one_step.evaluate(0.5))


def test_shift_matches_difference_of_values():
    # The shifted view equals w(t + tau) - w(tau); sums are regrouped, so
    # equality is to rounding, while the underlying cells match bit for bit.
    p = noise.sample_wiener(9, 2, -2.0, 2.0, 0.25)
    tau = 0.75
    q = p.shift(tau)
    for t in (-0.5, 0.25, 1.0):
        npt.assert_allclose(q.evaluate(t), p.evaluate(t + tau) - p.evaluate(tau),
                            rtol=0, atol=1e-14)
    npt.assert_array_equal(q.increments, p.increments)


def test_shift_outside_window_rejected():
    p = noise.sample_wiener(9, 1, 0.0, 1.0, 0.25)
    with pytest.raises(ValueError):
        p.shift(1.25)
    with pytest.raises(ValueError):
        p.shift(0.1)


def test_cells_regenerate_bit_exactly():
    p = noise.sample_wiener(21, 3, -4.0, 4.0, 0.5)
    # Fresh materialization of any absolute cell range reproduces the path's
    # increments, whatever batch shape produced them.
    whole = noise.wiener_increments(21, 3, 0.5, -8, 8)
    npt.assert_array_equal(whole, p.increments)
    part = noise.wiener_increments(21, 3, 0.5, -3, 5)
    npt.assert_array_equal(part, p.cell_slice(-3, 5))


def test_extend_left_preserves_old_cells():
    p = noise.sample_wiener(4, 2, -1.0, 1.0, 0.25)
    old_values = [p.evaluate(t).copy() for t in (-1.0, -0.5, 0.25, 1.0)]
    q = p.extend_left(-3.0)
    assert (q.k_lo, q.k_hi) == (-12, 4)
    npt.assert_array_equal(q.cell_slice(-4, 4), p.increments)
    for t, v in zip((-1.0, -0.5, 0.25, 1.0), old_values):
        npt.assert_array_equal(q.evaluate(t), v)
    # Two single extensions and one double extension agree bit for bit.
    r = p.extend_left(-2.0).extend_left(-3.0)
    npt.assert_array_equal(r.increments, q.increments)
    # The fresh cells are the same absolute cells a direct sample would give.
    direct = noise.sample_wiener(4, 2, -3.0, 1.0, 0.25)
    npt.assert_array_equal(q.increments, direct.increments)


def test_extend_left_noop_and_errors():
    p = noise.sample_wiener(4, 1, -1.0, 1.0, 0.25)
    assert p.extend_left(-1.0) is p
    with pytest.raises(ValueError):
        p.extend_left(-0.5)
    z = noise.zero_path(1, 0.25, -1.0, 1.0)
    with pytest.raises(ValueError):
        z.extend_left(-2.0)


def test_extend_after_shift_uses_absolute_cells():
    # A shifted view extended to the left regrows the generation cells of
    # its lineage, not window-relative ones.
    p = noise.sample_wiener(13, 2, 0.0, 2.0, 1.0)
    q = p.shift(2.0)
    r = q.extend_left(-3.0)
    fresh = noise.wiener_increments(13, 2, 1.0, -1, 0)
    npt.assert_array_equal(r.cell_slice(-3, -2), fresh)
    npt.assert_array_equal(r.cell_slice(-2, 0), p.increments)


def test_zero_path_is_zero_everywhere():
    z = noise.zero_path(2, 0.5, -1.0, 1.0)
    for t in (-1.0, -0.25, 0.0, 0.75, 1.0):
        npt.assert_array_equal(z.evaluate(t), np.zeros(2))


def test_transit_steering_values():
    # Rate 2 along y - x: the input passes (0.5, 0) at t = 0.25 and reaches
    # (1, 0) at t = 1/eta0 = 0.5.
    p = noise.steering_path("transit", dt=0.25, x=(0.0, 0.0), y=(1.0, 0.0),
                            eta0=2.0)
    assert p.t_hi == pytest.approx(0.5)
    npt.assert_allclose(p.evaluate(0.25), [0.5, 0.0], rtol=0, atol=1e-15)
    npt.assert_allclose(p.evaluate(0.5), [1.0, 0.0], rtol=0, atol=1e-15)


def test_transit_steering_default_window_covers_ramp():
    p = noise.steering_path("transit", dt=1e-3, x=(0.0,), y=(1.0,), eta0=100.0)
    assert p.t_hi == pytest.approx(0.01)


def test_transit_steering_equal_endpoints_is_zero():
    p = noise.steering_path("transit", dt=0.25, x=(0.5, 0.5), y=(0.5, 0.5),
                            eta0=2.0)
    npt.assert_array_equal(p.increments, np.zeros_like(p.increments))


def test_contract_steering_values():
    # Unit rates: ramp to (1, 0) over [0, 1], then hold there.
    p = noise.steering_path("contract", dt=0.25, t_hi=3.0, eta1=1.0, eta2=1.0,
                            d=2)
    npt.assert_allclose(p.evaluate(0.5), [0.5, 0.0], rtol=0, atol=1e-15)
    for t in (1.0, 2.0, 3.0):
        npt.assert_allclose(p.evaluate(t), [1.0, 0.0], rtol=0, atol=1e-15)


def test_steering_rejects_bad_parameters():
    with pytest.raises(ValueError):
        noise.steering_path("transit", dt=0.25, x=(0.0,), y=(1.0,), eta0=0.0)
    with pytest.raises(ValueError):
        noise.steering_path("transit", dt=0.25, x=(0.0,), y=(1.0, 0.0), eta0=1.0)
    with pytest.raises(ValueError):
        noise.steering_path("contract", dt=0.25, t_hi=1.0, eta1=-1.0, eta2=1.0,
                            d=2)
    with pytest.raises(ValueError):
        noise.steering_path("contract", dt=0.25, eta1=1.0, eta2=1.0, d=2)
    with pytest.raises(ValueError):
        noise.steering_path("spiral", dt=0.25, x=(0.0,), y=(1.0,), eta0=1.0)


def test_path_increments_are_frozen():
    p = noise.sample_wiener(2, 1, 0.0, 1.0, 0.25)
    with pytest.raises(ValueError):
        p.increments[0] = 9.9


def test_increment_statistics_pass_bounds():
    # 10^4 cells: per-coordinate mean z-scores within 4 standard errors,
    # variance within 5% of dt, cross-correlation small, and the shift group
    # law exact on re-indexed cells.
    p = noise.sample_wiener(2026, 2, 0.0, 10.0, 1e-3)
    stats = noise.wiener_statistics(p)
    assert stats["n_cells"] == 10_000
    assert all(abs(z) < 4.0 for z in stats["mean_z"])
    assert all(0.95 < r < 1.05 for r in stats["var_ratio"])
    assert stats["max_abs_corr"] < 0.05
    assert stats["shift_law_dev"] == 0.0


def test_statistics_need_two_cells():
    p = noise.sample_wiener(1, 1, 0.0, 0.25, 0.25)
    with pytest.raises(ValueError):
        noise.wiener_statistics(p)


def test_path_csv_roundtrip():
    p = noise.sample_wiener(5, 2, -0.5, 0.5, 0.25)
    buf = io.StringIO()
    p.write_csv(buf)
    lines = buf.getvalue().strip().split("\n")
    assert lines[0] == "t,w_1,w_2"
    assert len(lines) == p.n_cells + 2
    row = lines[1].split(",")
    assert float(row[0]) == -0.5
    npt.assert_array_equal([float(v) for v in row[1:]], p.evaluate(-0.5))


def test_uniform_law_bounds_and_validation():
    law = noise.UniformLaw(0.0, 2.0 * math.pi)
    assert law.d == 1
    with pytest.raises(ValueError):
        noise.UniformLaw(1.0, 1.0)


def test_noise_seq_determinism_and_bounds():
    law = noise.UniformLaw(0.0, 2.0 * math.pi)
    s = noise.sample_noise_seq(6, law, -5, 5)
    t = noise.sample_noise_seq(6, law, -5, 5)
    npt.assert_array_equal(s.draws, t.draws)
    other = noise.sample_noise_seq(7, law, -5, 5)
    assert np.any(other.draws != s.draws)
    assert np.all(s.draws >= 0.0) and np.all(s.draws < 2.0 * math.pi)
    assert s.dt == 1.0 and s.d == 1


def test_noise_seq_shift_reindexes_draws():
    law = noise.UniformLaw(-1.0, 1.0, d=2)
    s = noise.sample_noise_seq(6, law, -4, 4)
    q = s.shift(2)
    npt.assert_array_equal(q.draw(0), s.draw(2))
    npt.assert_array_equal(q.draw(-3), s.draw(-1))
    two = s.shift(1).shift(2)
    one = s.shift(3)
    npt.assert_array_equal(two.draws, one.draws)
    assert (two.k_lo, two.k_hi) == (one.k_lo, one.k_hi)
    with pytest.raises(ValueError):
        s.shift(1.5)
    with pytest.raises(ValueError):
        s.shift(9)


def test_noise_seq_extend_left():
    law = noise.UniformLaw(0.0, 1.0)
    s = noise.sample_noise_seq(17, law, -2, 3)
    q = s.extend_left(-6)
    npt.assert_array_equal(q.cell_slice(-2, 3), s.draws)
    direct = noise.sample_noise_seq(17, law, -6, 3)
    npt.assert_array_equal(q.draws, direct.draws)
    r = s.shift(2).extend_left(-5)
    npt.assert_array_equal(r.cell_slice(-2, 0), s.cell_slice(0, 2))
    assert s.extend_left(-2) is s
    with pytest.raises(ValueError):
        s.extend_left(0)


def test_noise_seq_draw_window_enforced():
    law = noise.UniformLaw(0.0, 1.0)
    s = noise.sample_noise_seq(17, law, 0, 3)
    with pytest.raises(ValueError):
        s.draw(3)
    with pytest.raises(ValueError):
        s.draw(-1)
    with pytest.raises(ValueError):
        noise.sample_noise_seq(17, law, 0.5, 3)


def test_noise_seq_csv():
    law = noise.UniformLaw(0.0, 1.0, d=2)
    s = noise.sample_noise_seq(3, law, 0, 3)
    buf = io.StringIO()
    s.write_csv(buf)
    lines = buf.getvalue().strip().split("\n")
    assert lines[0] == "t,a_1,a_2"
    assert len(lines) == 4
    npt.assert_array_equal([float(v) for v in lines[2].split(",")[1:]],
                           s.draw(1))
