import numpy as np
import pytest
from scipy.special import gamma as sp_gamma

from cavityprep import fock
from cavityprep.fock import (DensityMatrix, LayoutError, ModeLayout,
                             ModeOperator, StateVector, TruncationError,
                             basis_state, cat_state, coherent_state,
                             css_fidelity_closed, embed, fidelity,
                             hermite_functions, mode_operators,
                             position_density, quadrature_jump_state,
                             vacuum_state, wigner)


def test_layout_ordering_first_mode_slowest():
    lay = ModeLayout((("e", 2), ("h", 3)))
    psi = basis_state(lay, {"e": 1, "h": 0})
    # row-major flattening: index = 1*3 + 0
    assert psi.amps[3] == 1.0
    assert np.sum(np.abs(psi.amps)) == 1.0


def test_layout_rejects_bad_modes():
    with pytest.raises(LayoutError):
        ModeLayout((("e", 1),))
    with pytest.raises(LayoutError):
        ModeLayout((("e", 4), ("e", 4)))


def test_ladder_matrix_elements():
    ops = mode_operators(6)
    a = ops["a"].mat
    for n in range(1, 6):
        assert abs(a[n - 1, n] - np.sqrt(n)) < 1e-15
    n_op = ops["n"].mat
    assert np.allclose(n_op, np.diag(np.arange(6)))


def test_quadrature_commutator():
    ops = mode_operators(30)
    x, p = ops["x"].mat, ops["p"].mat
    comm = x @ p - p @ x
    # exact i*identity away from the truncation corner
    expect = 1j * np.eye(30)
    assert np.max(np.abs((comm - expect)[:-1, :-1])) < 1e-13


def test_vacuum_quadrature_variance():
    lay = ModeLayout.single(12)
    ops = mode_operators(12)
    v = vacuum_state(lay)
    x2 = ModeOperator(lay, ops["x"].mat @ ops["x"].mat)
    assert abs(v.expect(x2).real - 0.5) < 1e-14


def test_coherent_state_moments():
    dim = 40
    alpha = 1.2 + 0.4j
    psi = coherent_state(alpha, dim)
    ops = mode_operators(dim)
    assert abs(psi.expect(ops["a"]) - alpha) < 1e-10
    assert abs(psi.expect(ops["n"]).real - abs(alpha) ** 2) < 1e-10
    n2 = ModeOperator(psi.layout, ops["n"].mat @ ops["n"].mat)
    var = psi.expect(n2).real - psi.expect(ops["n"]).real ** 2
    assert abs(var - abs(alpha) ** 2) < 1e-9   # Poissonian


def test_coherent_state_truncation_precondition():
    with pytest.raises(TruncationError):
        coherent_state(2.0, 10)   # |alpha|^2 = 4 > 10/4


def test_cat_state_parity_support():
    even = cat_state(1.5, "even", 40)
    odd = cat_state(1.5, "odd", 40)
    assert np.max(np.abs(even.amps[1::2])) == 0.0
    assert np.max(np.abs(odd.amps[0::2])) == 0.0
    assert abs(even.norm() - 1.0) < 1e-12
    assert abs(odd.norm() - 1.0) < 1e-12
    assert abs(fidelity(even, odd)) < 1e-14


def test_quadrature_jump_state_small_cases():
    # one application of x on vacuum lands on the one-photon state
    s1 = quadrature_jump_state(1, 12)
    assert abs(abs(s1.amps[1]) - 1.0) < 1e-14
    # two applications: (|0> + sqrt(2)|2>)/sqrt(3)
    s2 = quadrature_jump_state(2, 12)
    pops = np.abs(s2.amps) ** 2
    assert abs(pops[0] - 1 / 3) < 1e-13
    assert abs(pops[2] - 2 / 3) < 1e-13
    assert pops[1] < 1e-28


def test_quadrature_jump_state_dim_guard():
    with pytest.raises(TruncationError):
        quadrature_jump_state(6, 10)


def test_gamma_half_integer_matches_scipy():
    for k in range(1, 25):
        assert abs(fock._gamma_half_integer(k) - sp_gamma(k / 2)) \
            < 1e-12 * sp_gamma(k / 2)


def test_closed_form_fidelity_frozen_values():
    # [DERIVED] frozen from the exact finite Kummer sums; independently
    # reproduced by the numeric overlap test below
    assert abs(css_fidelity_closed(1) - 0.979549577953) < 1e-10
    assert abs(css_fidelity_closed(2) - 0.929554928385) < 1e-10
    assert abs(css_fidelity_closed(4) - 0.955956786277) < 1e-10
    assert abs(css_fidelity_closed(10) - 0.967764520259) < 1e-10


def test_closed_form_fidelity_matches_numeric_overlap():
    for n in range(1, 13):
        dim = 2 * n + 40
        jump = quadrature_jump_state(n, dim)
        cat = cat_state(np.sqrt(n / 2), "even" if n % 2 == 0 else "odd", dim)
        assert abs(fidelity(jump, cat) - css_fidelity_closed(n)) < 1e-12


def test_large_n_fidelity_level():
    assert abs(css_fidelity_closed(10) - 0.97) < 0.005


def test_hermite_functions_orthonormal():
    xs = np.linspace(-10, 10, 4001)
    phi = hermite_functions(8, xs)
    g = np.trapezoid(phi[:, None, :] * phi[None, :, :], xs, axis=-1)
    assert np.max(np.abs(g - np.eye(9))) < 1e-7
    assert abs(phi[0, 2000] - np.pi ** -0.25) < 1e-12


def test_position_density_vacuum():
    lay = ModeLayout.single(8)
    xs = np.linspace(-5, 5, 801)
    rho_x = position_density(vacuum_state(lay), xs)
    assert np.max(np.abs(rho_x - np.exp(-xs ** 2) / np.sqrt(np.pi))) < 1e-12
    assert abs(np.trapezoid(rho_x, xs) - 1.0) < 1e-8


def test_wigner_vacuum_and_fock1():
    lay = ModeLayout.single(10)
    xs = np.linspace(-4, 4, 81)
    w0 = wigner(vacuum_state(lay), xs, xs)
    ref = np.exp(-xs[None, :] ** 2 - xs[:, None] ** 2) / np.pi
    assert np.max(np.abs(w0 - ref)) < 1e-12
    one = basis_state(lay, 1)
    w1 = wigner(one, xs, xs)
    assert abs(w1[40, 40] + 1 / np.pi) < 1e-12   # parity -1 at the origin


def test_wigner_origin_is_mean_parity():
    psi = cat_state(1.3, "even", 30)
    pops = np.abs(psi.amps) ** 2
    parity = float(np.sum(pops * (-1.0) ** np.arange(30)))
    w = wigner(psi, np.array([0.0]), np.array([0.0]))
    assert abs(w[0, 0] - parity / np.pi) < 1e-12


def test_wigner_coherent_is_shifted_gaussian():
    alpha = 0.9 - 0.5j
    psi = coherent_state(alpha, 30)
    xs = np.linspace(-4, 4, 61)
    ps = np.linspace(-4, 4, 59)
    w = wigner(psi, xs, ps)
    x0 = np.sqrt(2) * alpha.real
    p0 = np.sqrt(2) * alpha.imag
    ref = np.exp(-(xs[None, :] - x0) ** 2 - (ps[:, None] - p0) ** 2) / np.pi
    assert np.max(np.abs(w - ref)) < 1e-9


def test_wigner_normalization():
    psi = cat_state(1.4, "odd", 36)
    xs = np.linspace(-6, 6, 201)
    w = wigner(psi, xs, xs)
    total = np.trapezoid(np.trapezoid(w, xs, axis=1), xs)
    assert abs(total - 1.0) < 1e-6


def test_partial_trace_product_state():
    lay = ModeLayout((("e", 3), ("h", 4)))
    psi = basis_state(lay, {"e": 1, "h": 2})
    rho = psi.to_density()
    red = rho.partial_trace(("e",))
    assert red.layout.dims == (3,)
    assert abs(red.mat[1, 1] - 1.0) < 1e-14
    assert abs(red.trace() - 1.0) < 1e-14


def test_partial_trace_entangled_state():
    lay = ModeLayout((("e", 2), ("h", 2)))
    amps = np.zeros(4, dtype=complex)
    amps[0] = amps[3] = 1 / np.sqrt(2)    # (|00> + |11>)/sqrt(2)
    rho = StateVector(lay, amps).to_density()
    red = rho.partial_trace(("h",))
    assert np.max(np.abs(red.mat - 0.5 * np.eye(2))) < 1e-14


def test_partial_trace_three_modes():
    lay = ModeLayout((("e", 2), ("h", 3), ("b", 2)))
    psi = basis_state(lay, {"e": 1, "h": 2, "b": 0})
    red = psi.to_density().partial_trace(("e", "h"))
    assert red.layout.labels == ("e", "h")
    assert abs(red.mat[1 * 3 + 2, 1 * 3 + 2] - 1.0) < 1e-14


def test_embed_acts_on_named_mode():
    lay = ModeLayout((("e", 3), ("h", 4), ("b", 2)))
    n_h = embed(mode_operators(4, "h")["n"], lay, "h")
    psi = basis_state(lay, {"e": 0, "h": 2, "b": 1})
    assert abs(psi.expect(n_h).real - 2.0) < 1e-14


def test_mode_populations_marginal():
    lay = ModeLayout((("e", 2), ("h", 3)))
    amps = np.zeros(6, dtype=complex)
    amps[0 * 3 + 1] = np.sqrt(0.25)
    amps[1 * 3 + 2] = np.sqrt(0.75)
    psi = StateVector(lay, amps)
    pops_e = psi.mode_populations("e")
    assert np.allclose(pops_e, [0.25, 0.75], atol=1e-14)
    pops_h = psi.mode_populations("h")
    assert np.allclose(pops_h, [0.0, 0.25, 0.75], atol=1e-14)


def test_tail_guard_flags_top_levels():
    lay = ModeLayout.single(6)
    amps = np.zeros(6, dtype=complex)
    amps[5] = 1.0
    assert StateVector(lay, amps).truncation_unsafe
    assert not vacuum_state(lay).truncation_unsafe


def test_density_matrix_hermiticity_defect():
    lay = ModeLayout.single(4)
    m = np.diag([0.5, 0.5, 0.0, 0.0]).astype(complex)
    m[0, 1] = 0.1j
    rho = DensityMatrix(lay, m)
    assert rho.hermiticity_defect() > 0.05
    rho2 = DensityMatrix(lay, 0.5 * (m + m.conj().T))
    assert rho2.hermiticity_defect() < 1e-15


def test_state_normalize_and_overlap():
    lay = ModeLayout.single(5)
    psi = StateVector(lay, np.array([2.0, 0, 0, 0, 0], dtype=complex))
    assert abs(psi.normalize().norm() - 1.0) < 1e-14
    with pytest.raises(ValueError):
        StateVector(lay, np.zeros(5, dtype=complex)).normalize()
    a = basis_state(lay, 1)
    b = basis_state(lay, 1)
    assert abs(a.overlap(b) - 1.0) < 1e-15
