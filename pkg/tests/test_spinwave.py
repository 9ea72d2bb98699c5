import numpy as np
import pytest

from nhxy import ConfigError, ModelParams
from nhxy.spinwave import (
    blockade_report,
    build_h_eff,
    compare_heff_conventions,
    nn_coupling,
    nn_energy,
    sine_profile,
    single_excitation_oracle,
    spinwave_modes,
    truncated_model,
)

RANGES = ["nearest-neighbor", "full"]


def check_against_block(p, range_mode):
    q = p.replace(interaction_range=range_mode)
    block, drive = single_excitation_oracle(q)
    modes = spinwave_modes(q)
    assert [m.k for m in modes] == list(range(1, p.n_sites + 1))
    assert np.allclose(np.sort([m.energy_u for m in modes]), np.linalg.eigvalsh(block), atol=1e-10)
    for m in modes:
        assert np.abs(block @ m.profile - m.energy_u * m.profile).max() < 1e-10
        assert abs(np.linalg.norm(m.profile) - 1) < 1e-12
        assert abs(m.coupling_omega - (drive @ m.profile).real) < 1e-10
    omega_k = np.array([m.coupling_omega for m in modes])
    assert abs(np.sum(omega_k**2) - p.n_sites * p.omega**2) < 1e-10
    assert all(m.coupling_omega == 0.0 for m in modes if m.k % 2 == 0)


@pytest.mark.parametrize("range_mode", RANGES)
@pytest.mark.parametrize("n", range(1, 13))
def test_modes_match_single_excitation_block(n, range_mode):
    check_against_block(ModelParams(omega=1.2, n_sites=n, v=4.1), range_mode)


def test_nn_closed_forms():
    n, v = 6, 1.5
    for k in range(1, n + 1):
        assert nn_energy(v, n, k) == pytest.approx(2 * v * np.cos(k * np.pi / (n + 1)))
        # explicit sum of the sine profile against the cotangent formula
        assert nn_coupling(0.8, n, k) == pytest.approx(0.8 * np.sum(sine_profile(n, k)), abs=1e-12)
    assert nn_coupling(1.0, 5, 3) == pytest.approx(0.57735, abs=1e-5)
    assert np.allclose(sine_profile(3, 2), np.array([1, 0, -1]) / np.sqrt(2))


def test_dark_mode_n7():
    modes = spinwave_modes(ModelParams(omega=1.2, n_sites=7, v=4.1), "nearest-neighbor")
    m = modes[3]
    assert m.k == 4 and m.symmetry == "anti-symmetric"
    assert abs(m.energy_u) < 1e-12
    assert m.coupling_omega == 0.0
    assert np.allclose(m.profile * np.sqrt(4), [1, 0, -1, 0, 1, 0, -1], atol=1e-12)


def test_full_range_shifts_the_zero_mode():
    # long-range tails lift the accidental zero of the middle nearest-neighbour mode
    for n in (5, 9):
        k = (n + 1) // 2
        nn = spinwave_modes(ModelParams(omega=1.0, n_sites=n, v=1.0), "nn")[k - 1]
        full = spinwave_modes(ModelParams(omega=1.0, n_sites=n, v=1.0), "full")[k - 1]
        assert abs(nn.energy_u) < 1e-12 and abs(full.energy_u) > 1e-3


def test_explicit_couplings_use_diagonalization():
    c = np.array([[0, 1.0, 0.2], [1.0, 0, 1.0], [0.2, 1.0, 0]])
    p = ModelParams(omega=0.7, n_sites=3, couplings=c)
    block, _ = single_excitation_oracle(p)
    assert np.allclose(block, c)
    check_against_block(p, "full")


def test_bad_range():
    with pytest.raises(ConfigError):
        spinwave_modes(ModelParams(omega=1.0, n_sites=3), "periodic")


class TestEffectiveModel:
    @pytest.mark.parametrize("range_mode", ["nn", "full"])
    @pytest.mark.parametrize("n", [2, 5, 7])
    def test_main_convention_reproduces_truncation(self, n, range_mode):
        p = ModelParams(omega=1.2, n_sites=n, v=4.1, interaction_range="nearest-neighbor" if range_mode == "nn" else "full")
        dev = compare_heff_conventions(p, np.linspace(0, 2.1 * np.pi, 85), range_mode)
        assert dev["main"] < 1e-10
        assert dev["alternate"] > 1e-3

    def test_layout(self):
        p = ModelParams(omega=1.2, n_sites=3, v=2.0, interaction_range="nearest-neighbor")
        eff = build_h_eff(spinwave_modes(p), p).operator.matrix
        assert eff.shape == (4, 4) and eff[0, 0] == 0
        assert eff[2, 0] == 0  # the k = 2 mode is dark
        assert eff[1, 1] == pytest.approx(-(nn_energy(2.0, 3, 1) + 0.5j))
        with pytest.raises(ConfigError):
            build_h_eff(spinwave_modes(p), p, "lab")

    def test_truncation_indices(self):
        h = truncated_model(ModelParams(omega=1.0, n_sites=3, v=1.0)).matrix
        assert h.shape == (4, 4)
        assert np.allclose(np.diag(h)[1:], -0.5j)


class TestBlockade:
    def test_free_chain_factorizes(self):
        p = ModelParams(omega=1.2, v=4.1)
        rows = blockade_report(p, 2.1 * np.pi, [1, 2, 3], t_s=6 * np.pi)
        one = rows[0].excitation_free
        for r in rows:
            assert r.excitation_free == pytest.approx(1 - (1 - one) ** r.n_sites, abs=1e-10)
            assert r.reference == 1 - 0.5**r.n_sites

    def test_interactions_suppress_excitation(self):
        rows = blockade_report(ModelParams(omega=1.2, v=4.1), 2.1 * np.pi, range(2, 8), t_s=6 * np.pi)
        for r in rows:
            assert r.stationary < r.stationary_free
