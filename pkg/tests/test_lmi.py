import numpy as np
import pytest

from msicert import (LtiSystem, assemble_analysis, assemble_design,
                     assemble_model_based, build_consistency_set, dualize,
                     membership_test, solve_feasibility)
from msicert.lmi import (_analysis_factor_long, _analysis_factor_short,
                         _design_factor, BlockLayout, BlockMatrix)
from msicert.experiments import benchmark_gain
from msicert.search import _balanced_handoff

from conftest import cached_benchmark_set, cached_benchmark_dataset


class TestBlockLayout:
    def test_offsets(self):
        lay = BlockLayout([("a", 2), ("b", 3)])
        assert lay["a"] == slice(0, 2)
        assert lay["b"] == slice(2, 5)
        assert lay.size == 5

    def test_duplicate_name_rejected(self):
        with pytest.raises(ValueError):
            BlockLayout([("a", 1), ("a", 2)])

    def test_block_shape_enforced(self):
        M = BlockMatrix(BlockLayout([("r", 2)]), BlockLayout([("c", 2)]))
        with pytest.raises(ValueError):
            M.place("r", "c", np.ones((1, 2)))


class TestFactorsAgainstHandInstances:
    """One-dimensional instances written out entry by entry."""

    def test_analysis_short_factor(self):
        k, h = -1.7, 0.3
        G = _analysis_factor_short(np.array([[k]]), h)
        expected = np.array([
            [1, 0, 0],
            [0, 1, 0],
            [0, 1, 0],
            [0, -1, 1],
            [0, h / 2, 0],
            [0, 0, 1],
            [1, 0, 0],
            [k, 0, 0],
        ])
        assert np.array_equal(G, expected)

    def test_analysis_long_factor(self):
        k, h = 0.8, 0.45
        G = _analysis_factor_long(np.array([[k]]), h)
        expected = np.array([
            [1, 0, 0, 0],
            [0, 1, 0, 0],
            [0, 0, 1, 0],
            [0, 1, 0, 0],
            [0, -1, 0, 1],
            [0, 0, -h / 2, 0],
            [0, 0, 0, 1],
            [1, 0, 0, 0],
            [k, 0, -h * k, 0],
        ])
        assert np.array_equal(G, expected)

    def test_design_factor_inv_h(self):
        k, h, r = -2.0, 0.6, 1.3
        G = _design_factor(np.array([[k]]), h, np.array([[r]]), "inv_h")
        expected = np.array([
            [1, 0, 0, 0, 0],
            [0, 1, 0, 0, 0],
            [0, 0, 1, 0, 0],
            [0, 0, 0, 1, k],
            [1, -1, r, 0, 0],
            [0, 0, -1 / (2 * h), 0, 0],
            [0, 0, 0, 1, 0],
            [0, 0, 0, 0, 1],
            [0, 1, 0, 0, 0],
        ])
        assert np.array_equal(G, expected)

    def test_design_factor_scaled_h(self):
        k, h, r = 0.4, 1.1, 2.0
        G = _design_factor(np.array([[k]]), h, np.array([[r]]), "scaled_h")
        expected = np.array([
            [1, 0, 0, 0, 0],
            [0, 1, 0, 0, 0],
            [0, 0, 1, 0, 0],
            [0, 0, 0, 1, k],
            [1, -1, 0, 0, 0],
            [0, 0, -h / 2, 0, -h * k],
            [0, 0, 0, 1, 0],
            [0, 0, 0, 0, 1],
            [0, 1, 0, 0, 0],
        ])
        assert np.array_equal(G, expected)


class TestDimensionalContract:
    @pytest.mark.parametrize("n,m", [(1, 1), (2, 1), (3, 2)])
    def test_sizes(self, n, m):
        rng = np.random.default_rng(n * 10 + m)
        from msicert import DataSet, NoiseBound

        N = 6 * (n + m)
        X = rng.normal(size=(n, N))
        U = rng.normal(size=(m, N))
        A_t = rng.normal(size=(n, n))
        B_t = rng.normal(size=(n, m))
        dbar = 0.5
        D = rng.uniform(-0.5, 0.5, size=(n, N)) * dbar / np.sqrt(n)
        data = DataSet(tau=np.arange(N) * 1.0, X=X, U=U,
                       Xdot=A_t @ X + B_t @ U + D, Bd=np.eye(n))
        cset = dualize(build_consistency_set(data, NoiseBound.pointwise(dbar, N, n)))
        K = rng.normal(size=(m, n))
        sys = LtiSystem(A=rng.normal(size=(n, n)), B=rng.normal(size=(n, m)))

        mb = assemble_model_based(sys, K, 0.5)
        sizes = {c.name: c.size for c in mb.constraints}
        assert sizes == {"stability_2n": 2 * n, "stability_3n": 3 * n}

        an = assemble_analysis(cset, K, 0.5)
        sizes = {c.name: c.size for c in an.constraints}
        assert sizes == {"robust_3n": 3 * n, "robust_4n": 4 * n}

        de = assemble_design(cset, np.eye(n), np.eye(n), 0.5)
        sizes = {c.name: c.size for c in de.constraints}
        assert sizes == {"design_inv_h": 4 * n + m, "design_scaled_h": 4 * n + m,
                         "q3_definite": n}

        for prob in (mb, an, de):
            prob.check_affine(np.random.default_rng(0))


class TestModelBased:
    def test_benchmark_feasible_below_bound(self, plant, gain):
        res = solve_feasibility(assemble_model_based(plant, gain, 1.0))
        assert res.status.value == "feasible"

    def test_benchmark_infeasible_above_bound(self, plant, gain):
        res = solve_feasibility(assemble_model_based(plant, gain, 2.0))
        assert res.status.value == "infeasible"

    def test_scalar_hand_witness(self):
        # A=-1, B=0, K=0, h=0.1: P1=P2=P3=R=1 satisfies both blocks
        sys = LtiSystem(A=[[-1.0]], B=[[0.0]], Bd=[[1.0]])
        prob = assemble_model_based(sys, np.zeros((1, 1)), 0.1)
        one = np.array([[1.0]])
        vals = prob.evaluate({"P1": one, "P2": one, "P3": one, "R": one})
        F1 = vals["stability_2n"]
        assert np.allclose(F1, [[-2.0, -1.0], [-1.0, -1.9]])
        assert np.linalg.eigvalsh(F1).max() < 0
        assert np.linalg.eigvalsh(vals["stability_3n"]).max() < 0
        assert solve_feasibility(prob).status.value == "feasible"

    def test_gain_mismatch_rejected(self, plant):
        with pytest.raises(ValueError):
            assemble_model_based(plant, np.zeros((1, 3)), 1.0)

    def test_nonpositive_h_rejected(self, plant, gain):
        with pytest.raises(ValueError):
            assemble_model_based(plant, gain, 0.0)


class TestAnalysis:
    def test_requires_dual(self):
        data, noise, _ = cached_benchmark_dataset(0.01, 1)
        cset = build_consistency_set(data, noise)
        with pytest.raises(ValueError, match="dual"):
            assemble_analysis(cset, benchmark_gain(), 1.0)

    def test_multiplier_scaling_invariance(self, gain):
        # scaling the set matrix is absorbed by the multiplier normalization:
        # the assembled constraints are identical
        cset = cached_benchmark_set(0.02, 1)
        import dataclasses

        scaled = dataclasses.replace(cset, Pc=3.7 * cset.Pc,
                                     Pc_dual=3.7 * cset.Pc_dual)
        p1 = assemble_analysis(cset, gain, 0.8)
        p2 = assemble_analysis(scaled, gain, 0.8)
        rng = np.random.default_rng(1)
        v = p1.random_assignment(rng)
        for c1, c2 in zip(p1.constraints, p2.constraints):
            assert np.allclose(c1.build(v), c2.build(v), atol=1e-12)

    def test_benchmark_brackets(self, gain):
        cset = cached_benchmark_set(0.01, 1)
        assert solve_feasibility(assemble_analysis(cset, gain, 1.3)).status.value == "feasible"
        assert solve_feasibility(assemble_analysis(cset, gain, 1.6)).status.value == "infeasible"

    def test_robust_implies_nominal(self, plant, gain):
        # the analysis witness certifies the true (member) plant directly
        cset = cached_benchmark_set(0.03, 2)
        member, _ = membership_test(plant, cset)
        assert member
        h = 0.8
        res = solve_feasibility(assemble_analysis(cset, gain, h))
        assert res.status.value == "feasible"
        mb = assemble_model_based(plant, gain, h)
        vals = mb.evaluate({k: res.values[k] for k in ("P1", "P2", "P3", "R")})
        for F in vals.values():
            assert np.linalg.eigvalsh(F).max() < 0


class TestDesign:
    def test_fixed_blocks_must_be_definite(self):
        cset = cached_benchmark_set(0.05, 1)
        with pytest.raises(ValueError, match="positive definite"):
            assemble_design(cset, -np.eye(2), np.eye(2), 1.0)
        with pytest.raises(ValueError, match="positive definite"):
            assemble_design(cset, np.eye(2), np.zeros((2, 2)), 1.0)

    def test_affinity_probe_on_random_assignments(self):
        cset = cached_benchmark_set(0.05, 1)
        prob = assemble_design(cset, np.eye(2), np.eye(2), 0.7)
        prob.check_affine(np.random.default_rng(5), trials=4)

    def test_one_step_growth_from_analysis_handoff(self, gain):
        # a single design solve extends the certified range by the schedule's
        # growth step; reaching the far larger iterated bounds requires the
        # full alternation
        cset = cached_benchmark_set(0.05, 1)
        res = solve_feasibility(assemble_analysis(cset, gain, 0.5))
        assert res.status.value == "feasible"
        Q1, Rf = _balanced_handoff(res.values["P1"], res.values["R"])
        grown = solve_feasibility(assemble_design(cset, Q1, Rf, 0.625))
        assert grown.status.value == "feasible"
        assert grown.values["K"].shape == (1, 2)

    def test_scalar_certain_plant_design_stabilizes(self):
        # plant dx/dt = x + u sampled densely with tiny noise: any designed
        # gain must make 1 + K negative
        from msicert import (DataSet, NoiseBound, generate_experiment_data,
                            uniform_interval_inputs, ball_disturbance)

        sys = LtiSystem(A=[[1.0]], B=[[1.0]], Bd=[[1.0]])
        data, _ = generate_experiment_data(
            sys, np.arange(30) * 0.05, uniform_interval_inputs(),
            ball_disturbance(1e-4), seed=3, disturbance_bound=1e-4,
            x0=[0.1])
        cset = dualize(build_consistency_set(
            data, NoiseBound.pointwise(1e-4, N=30, m_d=1)))
        res = solve_feasibility(assemble_analysis(cset, np.array([[-2.0]]), 0.05))
        assert res.status.value == "feasible"
        Q1, Rf = _balanced_handoff(res.values["P1"], res.values["R"])
        des = solve_feasibility(assemble_design(cset, Q1, Rf, 0.1))
        assert des.status.value == "feasible"
        assert 1.0 + des.values["K"][0, 0] < 0

    def test_multiplier_duality_maps_design_witness_to_analysis(self, gain):
        # a feasible long-horizon design witness maps to a long-horizon
        # analysis witness via Q = P^{-1}, lam = 1/lam_design (with the
        # normalization scales unwound)
        cset = cached_benchmark_set(0.05, 1)
        h = 0.55
        res = solve_feasibility(assemble_analysis(cset, gain, h))
        Q1, Rf = _balanced_handoff(res.values["P1"], res.values["R"])
        dprob = assemble_design(cset, Q1, Rf, h)
        dres = solve_feasibility(dprob)
        assert dres.status.value == "feasible"
        K = dres.values["K"]
        Q = np.block([[Q1, np.zeros((2, 2))], [dres.values["Q2"], dres.values["Q3"]]])
        P = np.linalg.inv(Q)
        P1 = 0.5 * (P[:2, :2] + P[:2, :2].T)
        aprob = assemble_analysis(cset, K, h)
        s_design = dprob.metadata["multiplier_scale"]
        s_analysis = aprob.metadata["multiplier_scale"]
        lam2_design_unnorm = dres.values["lam2"] / s_design
        lam2_analysis = (1.0 / lam2_design_unnorm) * s_analysis
        witness = {
            "P1": P1, "P2": P[2:, :2], "P3": P[2:, 2:], "R": Rf,
            "lam1": 1.0, "lam2": lam2_analysis,
        }
        F = aprob.evaluate(witness)["robust_4n"]
        assert np.linalg.eigvalsh(F).max() < 0


class TestDebugDump:
    def test_dump_reconstructs_evaluation(self, plant, gain):
        import json

        prob = assemble_model_based(plant, gain, 0.9)
        dump = prob.debug_dump()
        json.dumps(dump)  # must be serializable
        rng = np.random.default_rng(8)
        v = prob.random_assignment(rng)
        direct = prob.evaluate(v)
        for cdump in dump["constraints"]:
            F = np.asarray(cdump["constant"])
            for term in cdump["terms"]:
                var = v[term["variable"]]
                entry = tuple(term["entry"])
                coeff = var if entry == () else var[entry]
                F = F + coeff * np.asarray(term["coefficient"])
            assert np.allclose(F, direct[cdump["name"]], atol=1e-12)
