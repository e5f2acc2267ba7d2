import json

import numpy as np
import pytest

from msicert import analyze_msi
from msicert import io as mio
from msicert.experiments import benchmark_gain

from conftest import cached_benchmark_dataset, cached_benchmark_set


class TestDatasetRoundTrip:
    def test_bit_exact_round_trip(self, tmp_path):
        data, noise, _ = cached_benchmark_dataset(0.02, 3)
        path = tmp_path / "ds.json"
        mio.save_dataset(path, data, noise)
        data2, noise2 = mio.load_dataset(path)
        for a, b in [(data.X, data2.X), (data.U, data2.U),
                     (data.Xdot, data2.Xdot), (data.tau, data2.tau),
                     (data.Bd, data2.Bd), (noise.Qd, noise2.Qd),
                     (noise.Sd, noise2.Sd), (noise.Rd, noise2.Rd)]:
            assert np.array_equal(np.asarray(a), np.asarray(b))

    def test_missing_field_names_it(self, tmp_path):
        data, noise, _ = cached_benchmark_dataset(0.02, 3)
        payload = mio.dataset_payload(data, noise)
        del payload["Xdot"]
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(payload))
        with pytest.raises(mio.SchemaError, match="Xdot"):
            mio.load_dataset(path)

    def test_header_count_mismatch_rejected(self, tmp_path):
        data, noise, _ = cached_benchmark_dataset(0.02, 3)
        payload = mio.dataset_payload(data, noise)
        payload["N"] = 99
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(payload))
        with pytest.raises(mio.SchemaError, match="shape|N"):
            mio.load_dataset(path)

    def test_wrong_type_named(self, tmp_path):
        data, noise, _ = cached_benchmark_dataset(0.02, 3)
        payload = mio.dataset_payload(data, noise)
        payload["tau"] = "not-a-list"
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(payload))
        with pytest.raises(mio.SchemaError, match="tau"):
            mio.load_dataset(path)


class TestConsistencySetCache:
    def test_round_trip_with_dual(self, tmp_path):
        cset = cached_benchmark_set(0.02, 3)
        path = tmp_path / "set.json"
        mio.save_consistency_set(path, cset)
        back = mio.load_consistency_set(path)
        assert np.array_equal(back.Pc, cset.Pc)
        assert np.array_equal(back.Pc_dual, cset.Pc_dual)
        assert back.inertia == cset.inertia
        assert back.n == cset.n and back.m == cset.m and back.m_d == cset.m_d


class TestCertificates:
    def test_analysis_certificate_round_trip(self, tmp_path):
        data, noise, _ = cached_benchmark_dataset(0.05, 1)
        cset = cached_benchmark_set(0.05, 1)
        cert = analyze_msi(cset, benchmark_gain())
        path = tmp_path / "cert.json"
        mio.save_analysis_certificate(
            path, cert, context={"dataset": mio.dataset_payload(data, noise)},
            seed=1, config={"dbar": 0.05})
        payload = mio.load_certificate(path)
        assert payload["kind"] == "analysis"
        assert payload["h"] == cert.h
        assert np.array_equal(np.asarray(payload["K"]), cert.gain)
        assert payload["config_hash"] == mio.config_hash({"dbar": 0.05})
        data2, noise2 = mio.dataset_from_payload(payload["context"]["dataset"])
        assert np.array_equal(data2.X, data.X)

    def test_config_hash_stable_under_key_order(self):
        assert mio.config_hash({"a": 1, "b": [1, 2]}) == mio.config_hash({"b": [1, 2], "a": 1})


class TestTrajectoryFiles:
    def test_round_trip(self, tmp_path):
        from msicert import SamplingSequence, simulate_sampled_closed_loop
        from msicert.experiments import benchmark_plant

        traj = simulate_sampled_closed_loop(
            benchmark_plant(), benchmark_gain(),
            SamplingSequence.periodic(0.5, 3.0), [1.0, 0.0], 3.0)
        path = tmp_path / "traj.json"
        mio.save_trajectory(path, traj)
        back = mio.load_trajectory(path)
        assert np.array_equal(back.grid, traj.grid)
        assert np.array_equal(back.states, traj.states)
