import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qwtopo import bands
from qwtopo._numerics import bz_grid
from qwtopo.bands import (
    PLATEAU, SIGMA, asymptotic_moments, band_gap, band_point, bloch_operator, bloch_operators,
    bloch_vector, detect_k_offset, diagonalize_bloch, group_velocity, max_group_velocity,
    quasi_energy, reconstruct, residue_oracle, spreading_coefficient,
    spreading_coefficient_closed, spreading_coefficient_numeric, winding_number,
)
from qwtopo.errors import GapClosedError, ValidationError
from qwtopo.walk import QWP_MATRIX, L_COIN, R_COIN, CoinState, StepParams

S = 1 / math.sqrt(2)
PI = math.pi

gapped_deltas = st.floats(0.0, 2 * PI).filter(
    lambda d: min(abs(d - PI / 2), abs(d - 3 * PI / 2)) > 1e-3)
ks = st.floats(-PI, PI, exclude_max=True)


# ---------------------------------------------------------------- Bloch operator

def test_bloch_operator_delta_zero_is_qwp():
    for k in (-3.0, 0.0, 1.2):
        assert np.allclose(bloch_operator(StepParams(0.0), k).entries, QWP_MATRIX, atol=1e-15)


def test_bloch_operator_rejects_k_outside_zone():
    with pytest.raises(ValidationError):
        bloch_operator(StepParams(1.0), PI)


@given(st.floats(0, 2 * PI), ks)
def test_bloch_operator_unitary(delta, k):
    u = bloch_operator(StepParams(delta), k).entries
    assert np.max(np.abs(u @ u.conj().T - np.eye(2))) < 1e-12
    assert abs(abs(np.linalg.det(u)) - 1) < 1e-12


def test_bloch_operator_matches_real_space_step():
    # U(k) acting on a plane wave equals one real-space step of that plane wave
    p = StepParams(1.3)
    k = 0.7
    sites = np.arange(-40, 41)
    chi = np.array([0.6, 0.8j])
    wave = np.exp(1j * sites * k)[:, None] * chi[None, :]
    j = p.shift
    c, s = p.cos_half, p.sin_half
    b = wave @ QWP_MATRIX.T
    out = c * b
    out[j:, 1] += 1j * s * b[:-j, 0]
    out[:-j, 0] += 1j * s * b[j:, 1]
    expect = np.exp(1j * sites * k)[:, None] * (bloch_operator(p, k).entries @ chi)[None, :]
    assert np.allclose(out[5:-5], expect[5:-5], atol=1e-13)


def test_diagonalize_identity_is_degenerate():
    dec = diagonalize_bloch(np.eye(2))
    assert dec.E == pytest.approx(0.0, abs=1e-15) and dec.degenerate and dec.n is None


def test_diagonalize_minus_i_sigma_x():
    dec = diagonalize_bloch(-1j * SIGMA[0])
    assert dec.E == pytest.approx(PI / 2)
    assert np.allclose(dec.n, [1, 0, 0], atol=1e-15)
    assert dec.phase == pytest.approx(0.0, abs=1e-15)


@given(st.floats(0, 2 * PI), ks)
def test_diagonalize_round_trip(delta, k):
    u = bloch_operator(StepParams(delta), k).entries
    dec = diagonalize_bloch(u)
    assert np.max(np.abs(reconstruct(dec) - u)) < 1e-12


@pytest.mark.parametrize("delta", np.linspace(0.05, 2 * PI - 0.05, 16))
def test_bloch_consistency_with_formulas(delta):
    off = detect_k_offset(StepParams(delta))
    assert off.residual < 1e-9
    assert off.k0 == 0.0 and off.reflect


# ---------------------------------------------------------------- dispersion

def test_quasi_energy_examples():
    assert quasi_energy(PI, 0.0) == pytest.approx(PI / 4, abs=1e-15)
    assert quasi_energy(PI / 2, 0.0) == pytest.approx(0.0, abs=1e-12)
    assert quasi_energy(PI, 0.3, band=-1) == pytest.approx(-quasi_energy(PI, 0.3))


def test_gap_closures():
    assert band_gap(PI / 2, 0.0) < 1e-12
    assert band_gap(3 * PI / 2, PI) < 1e-12
    assert quasi_energy(3 * PI / 2, PI) == pytest.approx(PI, abs=1e-12)


@given(gapped_deltas, ks)
def test_cos_e_formula(delta, k):
    expect = (math.cos(delta / 2) + math.sin(delta / 2) * math.cos(k)) / math.sqrt(2)
    assert abs(math.cos(quasi_energy(delta, k)) - expect) < 1e-12


def test_group_velocity_examples():
    assert group_velocity(PI, PI / 2) == pytest.approx(S, abs=1e-15)
    assert group_velocity(PI, PI / 2, band=-1) == pytest.approx(-S, abs=1e-15)
    for d in (0.3, PI, 5.0):
        assert group_velocity(d, 0.0) == 0.0
        assert abs(group_velocity(d, PI - 1e-12)) < 1e-10


def test_group_velocity_raises_at_closure():
    with pytest.raises(GapClosedError):
        group_velocity(PI / 2, 0.0)
    assert np.isnan(group_velocity(PI / 2, np.array([0.0, 1.0]))[0])


@given(gapped_deltas, st.floats(-3.1, 3.1))
def test_identity_chain(delta, k):
    if band_gap(delta, k) < 1e-3:
        return
    v = group_velocity(delta, k)
    n = bloch_vector(delta, k).n
    assert abs(v - n[2]) < 1e-10 and abs(v + n[1]) < 1e-10
    h = 1e-5
    fd = (quasi_energy(delta, k + h) - quasi_energy(delta, k - h)) / (2 * h)
    assert abs(v - fd) < 1e-6


def test_bloch_vector_example():
    bv = bloch_vector(PI, 0.0)
    assert np.allclose(bv.n, [-1, 0, 0], atol=1e-15)
    assert bloch_vector(PI / 2, 0.0).degenerate


@given(st.floats(0, 2 * PI), ks)
def test_bloch_vector_great_circle_and_unit(delta, k):
    bv = bloch_vector(delta, k)
    if bv.degenerate:
        return
    assert bv.n[1] == -bv.n[2]
    assert abs(np.linalg.norm(bv.n) - 1) < 1e-12
    assert abs(bv.n @ bands.CHIRAL_AXIS) < 1e-12


def test_band_point_record():
    bp = band_point(PI, PI / 2)
    assert bp.V == pytest.approx(bp.n[2])
    assert bp.Nfactor == pytest.approx(math.sqrt(2 * (1 - math.cos(bp.E) ** 2)))
    with pytest.raises(GapClosedError):
        band_point(PI / 2, 0.0)


@pytest.mark.parametrize("delta", np.linspace(PI / 2 + 0.05, 3 * PI / 2 - 0.05, 9))
def test_max_speed_constant_in_topological_phase(delta):
    assert max_group_velocity(delta)[1] == pytest.approx(S, abs=1e-6)


def test_max_speed_grows_in_trivial_phase():
    v = [max_group_velocity(d)[1] for d in np.linspace(0.1, PI / 2 - 0.1, 8)]
    assert all(b > a for a, b in zip(v, v[1:]))


# ---------------------------------------------------------------- winding

@pytest.mark.parametrize("delta, w", [(PI, 1), (PI / 4, 0), (7 * PI / 4, 0), (PI / 2 + 2e-6, 1)])
def test_winding_examples(delta, w):
    res = winding_number(delta)
    assert res.W == w
    assert res.residual < 1e-6
    assert res.max_axis_overlap < 1e-9
    assert np.allclose(res.chiral_axis, [0, S, S])


def test_winding_rejects_transition_and_small_grid():
    with pytest.raises(GapClosedError, match="winding undefined at transition"):
        winding_number(1.5707963)
    with pytest.raises(ValidationError):
        winding_number(PI, grid=32)


@pytest.mark.parametrize("delta", [0.2, 1.0, PI, 4.0, 6.0])
def test_bdi_symmetries(delta):
    chiral, trs = bands.bdi_residuals(delta, bz_grid(256)[1:])
    assert chiral < 1e-10 and trs < 1e-10


# ---------------------------------------------------------------- spreading

def test_numeric_examples():
    assert spreading_coefficient_numeric(0.0).L == 0.0
    assert spreading_coefficient_numeric(PI).L == pytest.approx(PLATEAU, abs=1e-9)
    assert spreading_coefficient_numeric(PI / 4).L == pytest.approx(2 * math.sin(PI / 16) ** 2, abs=1e-9)
    with pytest.raises(ValidationError):
        spreading_coefficient_numeric(PI, grid=128)


def test_closed_form_examples():
    assert spreading_coefficient_closed(PI / 2).L == pytest.approx(PLATEAU, abs=1e-15)
    assert 2 * math.sin(PI / 8) ** 2 == pytest.approx(PLATEAU, abs=1e-15)
    assert spreading_coefficient_closed(PI).L == pytest.approx(0.29289322, abs=1e-8)
    assert spreading_coefficient_closed(2 * PI).L == pytest.approx(0.0, abs=1e-30)
    with pytest.raises(ValidationError):
        spreading_coefficient_closed(7.0)


def test_closed_form_continuous_at_junctions():
    for t in bands.TRANSITIONS:
        lo = spreading_coefficient_closed(t - 1e-12).L
        hi = spreading_coefficient_closed(t + 1e-12).L
        assert abs(lo - hi) < 1e-11


def test_residue_oracle_at_pi():
    rep = residue_oracle(PI)
    inner = rep.poles[rep.inside]
    expect = {0j, 1j * (math.sqrt(2) - 1), -1j * (math.sqrt(2) - 1)}
    assert all(min(abs(p - e) for e in expect) < 1e-12 for p in inner)
    assert rep.total == pytest.approx(PLATEAU, abs=1e-12)


@pytest.mark.parametrize("delta", np.linspace(0.05, 2 * PI - 0.05, 32))
def test_residue_oracle_invariants(delta):
    if min(abs(delta - t) for t in bands.TRANSITIONS) < 1e-3:
        return
    rep = residue_oracle(delta)
    assert rep.inside.sum() == 3
    assert np.all(np.abs(rep.poles.real) < 1e-12)
    assert abs(rep.total_imag) < 1e-10
    assert rep.max_residue_error < 1e-8
    assert rep.total == pytest.approx(spreading_coefficient_closed(delta).L, abs=1e-9)


def test_residue_oracle_rejects_boundary_deltas():
    for d in (0.0, PI / 2, 3 * PI / 2, 2 * PI):
        with pytest.raises(ValidationError):
            residue_oracle(d)


def test_spreading_dispatch():
    assert spreading_coefficient(PI, "residue").method == "residue"
    with pytest.raises(ValidationError):
        spreading_coefficient(PI, "bogus")


def test_plateau_numeric_flat():
    vals = [spreading_coefficient_numeric(d).L for d in np.linspace(PI / 2 + 0.01, 3 * PI / 2 - 0.01, 12)]
    assert max(vals) - min(vals) < 1e-6


def test_asymptotic_moments_examples():
    sym = CoinState.normalized(1, 1)
    assert asymptotic_moments(1.0, sym).M1_per_step == 0.0
    a = asymptotic_moments(PI, R_COIN)
    assert a.M1_per_step == pytest.approx(PLATEAU) and a.M2_per_step2 == pytest.approx(PLATEAU)
    assert asymptotic_moments(2.0, L_COIN).M2_per_step2 == asymptotic_moments(2.0, sym).M2_per_step2
