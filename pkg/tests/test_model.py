import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hyperising.exact import dense_hamiltonian
from hyperising.model import HamiltonianTerms, ModelParams, build_hamiltonian, deformation_factors

from helpers import brute_hamiltonian


def test_deformation_profile_endpoints_and_center():
    l = deformation_factors(7, 3.0)
    assert l[0] == -3.0 and l[-1] == 3.0
    assert l[3] == 0.0
    np.testing.assert_allclose(np.diff(l), 1.0)


def test_deformation_profile_is_exactly_antisymmetric():
    l = deformation_factors(37, 5.0)
    assert np.array_equal(l, -l[::-1])


def test_zero_deformation_gives_uniform_couplings():
    terms = build_hamiltonian(ModelParams(J=2.0, h=1.0, N=5, m=0.5))
    np.testing.assert_allclose(terms.bond_coefficients(), -0.5)
    np.testing.assert_allclose(terms.x_coefficients(), 0.5)
    np.testing.assert_allclose(terms.z_coefficients(), 0.25)


def test_single_site_chain():
    assert deformation_factors(1, 2.0).tolist() == [0.0]
    terms = build_hamiltonian(ModelParams(J=1.0, h=2.0, N=1))
    assert terms.bond_terms == ()
    assert terms.x_coefficients().tolist() == [1.0]


@pytest.mark.parametrize("kw", [{"N": 0}, {"N": 2.5}, {"l_max": -1.0}])
def test_invalid_params_rejected(kw):
    base = {"J": 1.0, "h": 1.0, "N": 3}
    base.update(kw)
    with pytest.raises(ValueError):
        ModelParams(**base)


def test_center_and_replace():
    p = ModelParams(J=1.0, h=1.0, N=8)
    assert p.center == 3
    q = p.replace(l_max=2.0)
    assert q.l_max == 2.0 and q.N == 8
    assert p.scaled(2.0).J == 2.0


@given(
    J=st.floats(-3, 3), h=st.floats(-3, 3), m=st.floats(-1, 1),
    N=st.integers(2, 6), l_max=st.floats(0, 4),
)
def test_hamiltonian_matches_defining_formula(J, h, m, N, l_max):
    terms = build_hamiltonian(ModelParams(J=J, h=h, N=N, l_max=l_max, m=m))
    H = dense_hamiltonian(terms)
    np.testing.assert_allclose(H, brute_hamiltonian(J, h, m, N, l_max), atol=1e-12)


@given(N=st.integers(2, 6), l_max=st.floats(0, 4), J=st.floats(-2, 2), h=st.floats(-2, 2))
def test_reflection_symmetry_of_terms(N, l_max, J, h):
    terms = build_hamiltonian(ModelParams(J=J, h=h, N=N, l_max=l_max, m=0.3))
    ref = terms.reflected()
    np.testing.assert_allclose(ref.bond_coefficients(), terms.bond_coefficients(), atol=1e-14)
    np.testing.assert_allclose(ref.x_coefficients(), terms.x_coefficients(), atol=1e-14)


@given(N=st.integers(2, 5), l_max=st.floats(0, 3))
def test_norm_bound_dominates_spectrum(N, l_max):
    terms = build_hamiltonian(ModelParams(J=1.3, h=0.7, N=N, l_max=l_max, m=0.2))
    w = np.linalg.eigvalsh(dense_hamiltonian(terms))
    assert np.max(np.abs(w)) <= terms.norm_bound() + 1e-12


def test_terms_dict_roundtrip(deformed7):
    terms = build_hamiltonian(deformed7)
    back = HamiltonianTerms.from_dict(terms.to_dict())
    assert back == terms
    assert back.meta == terms.meta


def test_bond_coefficients_reject_long_range():
    t = HamiltonianTerms(N=3, bond_terms=((0, 2, 1.0),))
    assert not t.nearest_neighbour
    with pytest.raises(ValueError):
        t.bond_coefficients()
