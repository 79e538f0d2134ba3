import math
import warnings

import networkx as nx
import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

import oracles
from hypermsf import (
    CoupledSystem,
    LaplacianDiffusive,
    LyapunovError,
    SpectrumError,
    SyncPrecludedError,
    SystemState,
    from_graph,
    integrate,
    kernel_projector,
    laplacian,
    linear,
    logistic,
    lorenz,
    lyapunov_exponent,
    modal_decomposition,
    msf_curve,
    msf_mode_rate,
    sigma_window,
    spectrum,
    stability_report,
    verify_window,
)
from hypermsf.dynamics import VertexDynamics
from hypermsf.spectral import Spectrum

LN2 = math.log(2.0)


class TestLyapunov:
    @pytest.mark.parametrize("a", [-1.5, -0.2, 0.0, 0.3, 1.0])
    def test_linear_flow(self, a):
        est = lyapunov_exponent(linear(a), [0.4])
        assert abs(est.lambda_max - a) <= 1e-6
        assert est.mode == "flow" and est.converged

    def test_linear_map(self):
        est = lyapunov_exponent(linear(-0.5), [1.0], mode="map", t_total=1000, transient=10)
        assert est.lambda_max == pytest.approx(math.log(0.5), abs=1e-12)

    def test_logistic(self):
        est = lyapunov_exponent(logistic(), [0.3])
        assert abs(est.lambda_max - LN2) <= 0.01
        assert est.growth_factor == pytest.approx(2.0, abs=0.02)
        assert len(est.convergence_history) == 10
        assert est.t_total == 1e6 and est.transient_discarded == 1000

    def test_divergence(self):
        square = VertexDynamics("sq", 1, lambda x: x * x, lambda x: (2 * x)[..., None], "map")
        with pytest.raises(LyapunovError, match="non-finite"):
            lyapunov_exponent(square, [2.0], t_total=5000, transient=10)

    def test_unconverged_warns(self):
        with pytest.warns(RuntimeWarning, match="drifted"):
            lyapunov_exponent(logistic(), [0.3], t_total=200, transient=10, tolerance=1e-9)

    @pytest.mark.parametrize(
        "kw", [dict(transient=0), dict(t_total=5, transient=10), dict(renorm_interval=0.0), dict(mode="chaos")]
    )
    def test_bad_horizons(self, kw):
        with pytest.raises(ValueError):
            lyapunov_exponent(linear(1.0), [1.0], **kw)

    @pytest.mark.parametrize(
        "dyn,x0,kw,tol",
        [
            (linear(0.4), [1.0], dict(t_total=200, transient=10), 1e-6),
            (logistic(), [0.3], dict(t_total=2e5, transient=100), 0.01),
            (lorenz(), [1.0, 1.0, 20.0], dict(t_total=300, transient=20), 0.02),
        ],
        ids=["linear", "logistic", "lorenz"],
    )
    def test_renorm_interval_invariance(self, dyn, x0, kw, tol):
        base = 1.0 if dyn.kind == "flow" else 2.0
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            a = lyapunov_exponent(dyn, x0, renorm_interval=base, **kw).lambda_max
            b = lyapunov_exponent(dyn, x0, renorm_interval=base / 2, **kw).lambda_max
        assert abs(a - b) <= 2 * tol


class TestMsfCurve:
    def test_linear_closed_form(self):
        a = 0.7
        alphas = np.linspace(-2, 0, 41)
        curve = msf_curve(linear(a), linear(a), alphas, [1.0])
        assert [c[0] for c in curve] == alphas.tolist()
        assert max(abs(r - (1 + al) * a) for al, r in curve) <= 1e-8

    def test_alpha_zero_is_lyapunov(self):
        kw = dict(t_total=1e5, transient=100)
        (_, r0), = msf_curve(logistic(), logistic(), [0.0], [0.3], **kw)
        assert r0 == lyapunov_exponent(logistic(), [0.3], **kw).lambda_max

    def test_logistic_matches_mode_rate(self):
        alphas = [-1.8, -1.5, -1.2, -0.5, 0.0]
        curve = msf_curve(logistic(), logistic(), alphas, [0.3], t_total=2e5, transient=100)
        lam = lyapunov_exponent(logistic(), [0.3], t_total=2e5, transient=100).lambda_max
        for alpha, rate in curve:
            # the same quantity in (sigma, eigenvalue) form with sigma*lam_k = -alpha
            assert rate == pytest.approx(msf_mode_rate(lam, 1.0, -alpha), abs=1e-9)

    def test_singular_alpha(self):
        (_, r), = msf_curve(logistic(), logistic(), [-1.0], [0.3], t_total=1e4, transient=10)
        assert r == -math.inf

    def test_errors(self):
        with pytest.raises(ValueError):
            msf_curve(linear(), lorenz(), [0.0], [1.0])
        with pytest.raises(ValueError):
            msf_curve(linear(), linear(), [], [1.0])


class TestModeRate:
    def test_examples(self):
        assert msf_mode_rate(0.9, 0.0, 3.0) == 0.9
        # |1 - 0.6 * 1.5| = 0.1
        assert msf_mode_rate(LN2, 0.6, 1.5) == pytest.approx(math.log(0.2))
        assert msf_mode_rate(LN2, 0.1, 1.5) == pytest.approx(math.log(1.7))
        assert msf_mode_rate(LN2, 0.5, 2.0) == -math.inf

    @given(
        st.floats(-3, 3), st.floats(0, 1), st.floats(1e-3, 10),
    )
    def test_convention_equivalence(self, lam_max, sigma, lam):
        product = abs(1 - sigma * lam) * math.exp(lam_max)
        assume(abs(product - 1) > 1e-12)
        assert (msf_mode_rate(lam_max, sigma, lam) < 0) == (product < 1)


class TestReports:
    def test_splitter(self, splitter):
        s = spectrum(laplacian(splitter))
        r = stability_report(s, LN2, 0.5)
        assert r.neutral_modes == (1, 2)
        assert r.per_mode[2].verdict == "marginal"
        assert r.overall == "unstable" and not r.stable
        r = stability_report(s, LN2, 0.4)
        assert r.per_mode[2].rate == pytest.approx(math.log(0.2) + LN2)
        assert r.overall == "stable" and r.stable

    def test_cyclic_precluded(self, cyclic3):
        s = spectrum(laplacian(cyclic3))
        for sigma in (0.0, 0.5, 1.0):
            r = stability_report(s, LN2, sigma)
            assert r.sync_precluded and r.neutral_modes == ()

    def test_json(self, k3):
        doc = stability_report(spectrum(laplacian(k3)), LN2, 0.5).to_json()
        assert set(doc) >= {"sigma", "lambda_max", "modes", "neutral", "overall", "window"}
        assert doc["modes"][0] == {"k": 1, "eigenvalue": 0.0, "rate": None, "verdict": "neutral"}
        assert doc["window"]["hi"] == 1.0

    def test_custom_zero_tol(self):
        s = Spectrum.from_eigenvalues([0.0, 1e-6, 1.0])
        assert stability_report(s, 0.1, 0.5).neutral_modes == (1,)
        assert stability_report(s, 0.1, 0.5, zero_tol=1e-5).neutral_modes == (1, 2)

    def test_graph_specialization(self):
        rng = np.random.default_rng(11)
        for _ in range(15):
            n, edges = oracles.random_connected_graph(rng, 8)
            G = nx.Graph(edges)
            G.add_nodes_from(range(n))
            ref = Spectrum.from_eigenvalues(np.clip(nx.normalized_laplacian_spectrum(G), 0, None))
            ours = spectrum(laplacian(from_graph(n, edges)))
            for sigma in np.linspace(0.05, 0.95, 7):
                a = stability_report(ours, 0.5, sigma)
                b = stability_report(ref, 0.5, sigma)
                assert [m.verdict for m in a.per_mode] == [m.verdict for m in b.per_mode]
                assert a.overall == b.overall


class TestWindow:
    def test_k3(self, k3):
        w = sigma_window(spectrum(laplacian(k3)), LN2)
        assert w.lo == pytest.approx(1 / 3) and w.hi == pytest.approx(1.0)
        assert w.contains(0.6) and not w.contains(0.2)

    def test_neutral_growth(self):
        w = sigma_window(Spectrum.from_eigenvalues([0, 0.5, 4.0]), 0.0)
        assert (w.lo, w.hi) == (0.0, 0.5)
        w = sigma_window(Spectrum.from_eigenvalues([0, 0.5, 1.5]), 0.0)
        assert (w.lo, w.hi) == (0.0, 1.0)

    def test_path(self):
        w = sigma_window(Spectrum.from_eigenvalues([0, 2]), LN2)
        assert (w.lo, w.hi) == pytest.approx((0.25, 0.75))

    def test_empty(self):
        assert sigma_window(Spectrum.from_eigenvalues([0, 0.1, 3.0]), 1.0) is None

    def test_no_nonzero(self):
        with pytest.raises(SpectrumError):
            sigma_window(Spectrum.from_eigenvalues([0, 0]), LN2)

    @given(
        st.lists(st.floats(0.01, 4), min_size=1, max_size=6),
        st.integers(0, 2),
        st.floats(-1, 2),
        st.lists(st.floats(0, 1), min_size=1, max_size=10),
    )
    def test_consistency_with_reports(self, nonzero, k0, lam_max, sigmas):
        s = Spectrum.from_eigenvalues([0.0] * k0 + nonzero)
        w = sigma_window(s, lam_max)
        raw_lo = (1 - math.exp(-lam_max)) / min(nonzero)
        raw_hi = (1 + math.exp(-lam_max)) / max(nonzero)
        for sigma in sigmas:
            assume(min(abs(sigma - raw_lo), abs(sigma - raw_hi)) > 1e-9)
            overall = stability_report(s, lam_max, sigma).overall
            inside = raw_lo < sigma < raw_hi
            assert (w is not None and w.contains(sigma)) == inside
            assert overall == ("stable" if inside else "unstable")


class TestModal:
    def test_single_mode(self, cyclic3):
        s = spectrum(laplacian(cyclic3))
        C = modal_decomposition(s, 2.5 * s.eigenvectors[:, 1])
        assert np.allclose(C, [0, 2.5, 0], atol=1e-12)

    def test_round_trip(self, splitter):
        s = spectrum(laplacian(splitter))
        e = np.random.default_rng(0).normal(size=(3, 4))
        assert np.abs(s.eigenvectors @ modal_decomposition(s, e) - e).max() <= 1e-8

    def test_constant_on_graph(self, k3):
        C = modal_decomposition(spectrum(laplacian(k3)), np.ones(3))
        assert abs(C[0]) > 0.5 and np.allclose(C[1:], 0, atol=1e-12)

    def test_needs_vectors(self):
        with pytest.raises(ValueError):
            modal_decomposition(Spectrum.from_eigenvalues([0, 1]), [1, 2])

    @pytest.mark.parametrize("hg", ["splitter", "cyclic3", "k3"])
    def test_simulated_rates_match_closed_form(self, hg, request):
        H = request.getfixturevalue(hg)
        a, sigma, t_end = 0.5, 0.4, 2.0
        Lm = laplacian(H)
        s = spectrum(Lm)
        system = CoupledSystem(linear(a), LaplacianDiffusive(sigma, Lm))
        x0 = s.eigenvectors.sum(axis=1, keepdims=True)  # every mode present
        traj = integrate(system, SystemState(0.0, x0), 1e-3, t_end)
        c0 = modal_decomposition(s, traj.x[0])[:, 0]
        c1 = modal_decomposition(s, traj.x[-1])[:, 0]
        measured = np.log(np.abs(c1 / c0)) / t_end
        assert np.allclose(measured, (1 - sigma * s.eigenvalues) * a, atol=1e-4)


class TestVerify:
    def test_k3_logistic(self, k3):
        s = spectrum(laplacian(k3))
        w = sigma_window(s, LN2)
        rep = verify_window(k3, logistic(), w, [0.0, 0.15, 0.6], trials=10, n_steps=500)
        r0, r15, r60 = rep.rows
        assert r60.theory_stable and r60.sync_fraction == 1.0 and r60.agreement == 1.0
        assert not r15.theory_stable and r15.sync_fraction == 0.0
        assert not r0.theory_stable and r0.agreement == 1.0
        assert rep.agreement_fraction == 1.0

    def test_thread_independent(self, k3):
        w = sigma_window(spectrum(laplacian(k3)), LN2)
        grid = np.linspace(0, 1, 6)
        a = verify_window(k3, logistic(), w, grid, trials=4, n_steps=200, threads=1)
        b = verify_window(k3, logistic(), w, grid, trials=4, n_steps=200, threads=4)
        assert a == b

    def test_boundary_excluded(self, k3):
        w = sigma_window(spectrum(laplacian(k3)), LN2)
        rep = verify_window(k3, logistic(), w, [1 / 3 + 0.01, 0.5], trials=2, n_steps=50)
        assert rep.rows[0].excluded and not rep.rows[1].excluded

    def test_requires_invariance_or_projector(self, splitter):
        s = spectrum(laplacian(splitter))
        with pytest.raises(SyncPrecludedError):
            verify_window(splitter, logistic(), None, [0.5], trials=2)
        rep = verify_window(
            splitter, linear(LN2), sigma_window(s, LN2), [0.4], trials=3, mode="map",
            n_steps=60, projector=kernel_projector(s),
        )
        assert rep.rows[0].theory_stable and rep.rows[0].sync_fraction == 1.0

    def test_divergence_counts_as_unsynchronized(self, k3):
        rep = verify_window(k3, linear(3.0), None, [0.0], trials=3, mode="map", n_steps=2000)
        row = rep.rows[0]
        assert row.sync_fraction == 0.0 and row.mean_final_error == math.inf

    def test_uncoupled_lorenz_flow_desynchronizes(self, k3):
        rep = verify_window(k3, lorenz(), None, [0.0], trials=2, n_steps=2000, dt=0.01)
        row = rep.rows[0]
        assert row.sync_fraction == 0.0 and row.agreement == 1.0
