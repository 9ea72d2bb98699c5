import numpy as np
import pytest
from scipy.integrate import trapezoid

from nhxy import CapacityError, ConfigError, ModelParams, NumericalError, build_h_nh
from nhxy.dynamics import PropagatorPolicy, propagate
from nhxy.model import three_level_digits, three_level_qubit_indices
from nhxy.open_system import (
    OpenSystemSpec,
    lindblad_propagate,
    mcwf_run,
    no_jump_states,
    trajectory_rng,
)

TIMES = np.linspace(0, 5, 26)


def nh_le(p, times):
    return propagate(build_h_nh(p), times, policy=PropagatorPolicy("expm")).le


class TestSpec:
    def test_structure(self):
        spec = OpenSystemSpec.from_params(ModelParams(omega=1.2, n_sites=3, v=2.0))
        assert spec.dim == 27
        digits = three_level_digits(3)
        h = spec.hamiltonian.matrix
        # the coherent part never changes which sites sit in |g>
        g_pattern = (digits == 2) @ (1 << np.arange(3))
        rows, cols = np.nonzero(h)
        assert np.array_equal(g_pattern[rows], g_pattern[cols])
        # jumps on different sites touch different digits and commute
        a, b = spec.jump_operator(0), spec.jump_operator(2)
        assert np.allclose(a @ b, b @ a)
        assert np.all(a @ a == 0)

    def test_apply_jump_matches_dense(self):
        spec = OpenSystemSpec.from_params(ModelParams(omega=1.0, n_sites=2, v=1.0))
        psi = np.random.default_rng(3).normal(size=9) + 0j
        for i in range(2):
            assert np.allclose(spec.apply_jump(i, psi), spec.jump_operator(i) @ psi)


class TestLindblad:
    def test_zero_drive(self):
        r = lindblad_propagate(OpenSystemSpec.from_params(ModelParams(omega=0.0)), TIMES)
        assert np.all(r.down_population == 0)
        assert np.all(r.le == 1.0)

    @pytest.mark.parametrize(
        "p", [ModelParams(omega=1.0), ModelParams(omega=1.2, n_sites=2, v=2.0), ModelParams(omega=1.2, n_sites=3, v=2.0)]
    )
    def test_matches_nh_echo(self, p):
        r = lindblad_propagate(OpenSystemSpec.from_params(p), TIMES)
        assert np.abs(r.le - nh_le(p, TIMES)).max() < 1e-6
        assert np.abs(r.trace - 1).max() < 1e-8

    def test_capacity(self):
        with pytest.raises(CapacityError):
            lindblad_propagate(OpenSystemSpec.from_params(ModelParams(omega=1.0, n_sites=5)), TIMES)
        with pytest.raises(CapacityError):
            OpenSystemSpec.from_params(ModelParams(omega=1.0, n_sites=8))

    def test_trace_drift_detected(self, monkeypatch):
        # every Runge-Kutta stage is traceless, so only a tighter guard can trip
        monkeypatch.setattr("nhxy.open_system.TRACE_TOLERANCE", -1.0)
        spec = OpenSystemSpec.from_params(ModelParams(omega=1.2, n_sites=2, v=2.0))
        with pytest.raises(NumericalError):
            lindblad_propagate(spec, TIMES)

    def test_bad_times(self):
        with pytest.raises(ConfigError):
            lindblad_propagate(OpenSystemSpec.from_params(ModelParams(omega=1.0)), [1.0, 0.0])


@pytest.mark.parametrize("n", [1, 2, 3])
def test_no_jump_branch_is_nh_evolution(n):
    p = ModelParams(omega=1.2, n_sites=n, v=2.0)
    spec = OpenSystemSpec.from_params(p)
    branch = no_jump_states(spec, TIMES)
    q = three_level_qubit_indices(n)
    ref = propagate(build_h_nh(p), TIMES).states
    assert np.abs(branch[:, q] - ref).max() < 1e-10
    outside = np.setdiff1d(np.arange(spec.dim), q)
    assert np.abs(branch[:, outside]).max() < 1e-12


class TestMCWF:
    def test_zero_drive_never_jumps(self):
        ens = mcwf_run(OpenSystemSpec.from_params(ModelParams(omega=0.0, n_sites=2, v=1.0)), 50, 1, TIMES)
        assert all(len(j) == 0 for j in ens.jumps)
        assert np.all(ens.le_samples == 1.0)
        assert np.all(ens.survival == 1.0)

    def test_reproducible_from_seed_and_index(self):
        spec = OpenSystemSpec.from_params(ModelParams(omega=1.2, n_sites=2, v=2.0))
        a = mcwf_run(spec, 40, 7, TIMES, threads=1)
        b = mcwf_run(spec, 40, 7, TIMES, threads=4)
        assert np.array_equal(a.le_samples, b.le_samples) and a.jumps == b.jumps
        # trajectory k does not depend on how many others were run
        c = mcwf_run(spec, 10, 7, TIMES)
        assert np.array_equal(c.le_samples, a.le_samples[:10])
        assert not np.array_equal(mcwf_run(spec, 10, 8, TIMES).le_samples, c.le_samples)

    def test_rng_streams(self):
        x = trajectory_rng(5, 0).random(4)
        assert np.array_equal(x, trajectory_rng(5, 0).random(4))
        assert not np.array_equal(x, trajectory_rng(5, 1).random(4))

    def test_estimator_is_zero_after_jump(self):
        ens = mcwf_run(OpenSystemSpec.from_params(ModelParams(omega=1.2)), 30, 2, TIMES)
        for samples, log in zip(ens.le_samples, ens.jumps):
            if log:
                assert np.all(samples[TIMES > log[0][0]] == 0)

    def test_jump_rate_bookkeeping(self):
        p = ModelParams(omega=1.2, n_sites=2, v=2.0)
        spec = OpenSystemSpec.from_params(p)
        t = np.linspace(0, 3, 301)
        ens = mcwf_run(spec, 2000, 11, t)
        counts = ens.jump_counts()
        expected = p.gamma * trapezoid(lindblad_propagate(spec, t).down_population, t, axis=0)
        err = counts.std(axis=0, ddof=1) / np.sqrt(ens.n_traj)
        assert np.all(np.abs(counts.mean(axis=0) - expected) < 4 * err)

    def test_stderr_scaling(self):
        spec = OpenSystemSpec.from_params(ModelParams(omega=1.2, n_sites=2, v=2.0))
        small = mcwf_run(spec, 500, 3, TIMES).le_stderr[1:]
        large = mcwf_run(spec, 2000, 4, TIMES).le_stderr[1:]
        assert np.median(large / small) == pytest.approx(0.5, rel=0.15)

    def test_adjusted_stderr(self):
        spec = OpenSystemSpec.from_params(ModelParams(omega=1.2, n_sites=2, v=2.0))
        ens = mcwf_run(spec, 200, 5, TIMES)
        adj = ens.le_stderr_adjusted
        assert np.all(adj > 0)
        # away from the all-or-none corners it tracks the plain sample error
        mid = (ens.survival > 0.2) & (ens.survival < 0.8)
        assert mid.any()
        assert np.allclose(adj[mid], ens.le_stderr[mid], rtol=0.1)
        nh = nh_le(spec.params, TIMES)
        assert np.all(np.abs(ens.le_mean - nh) < 4 * adj)

    def test_bad_inputs(self):
        spec = OpenSystemSpec.from_params(ModelParams(omega=1.0))
        with pytest.raises(ConfigError):
            mcwf_run(spec, 0, 1, TIMES)
        with pytest.raises(ConfigError):
            mcwf_run(spec, 5, 1, [0.0, 0.0, 1.0])
