import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tinyde.cim import (QuantSpec, RouterState, binary_control, calibrate,
                        parse_control, quantize, run_sequential_inference,
                        write_trace)
from tinyde.ensemble import TinyDEModel
from tinyde.errors import ConfigError, ModeError

from test_ensemble import randomized_model


class TestQuantize:
    def test_one_bit_levels(self):
        # 1 bit over [-1,1]: reconstruction levels are -0.5 and 0.5
        assert quantize(np.array(0.3), 1, -1.0, 1.0) == 0.5
        assert quantize(np.array(-0.2), 1, -1.0, 1.0) == -0.5

    def test_saturation(self):
        assert quantize(np.array(50.0), 1, -1.0, 1.0) == 0.5
        assert quantize(np.array(-50.0), 1, -1.0, 1.0) == -0.5

    def test_ideal_passthrough(self):
        x = np.random.default_rng(0).normal(size=(3, 4)) * 100
        assert np.array_equal(quantize(x, "ideal", -1.0, 1.0), x)

    def test_in_range_error_bound(self):
        rng = np.random.default_rng(1)
        x = rng.uniform(-1.0, 1.0, size=1000)
        for bits in (2, 4, 8):
            step = 2.0 / 2 ** bits
            err = np.abs(quantize(x, bits, -1.0, 1.0) - x)
            assert np.max(err) <= step / 2 + 1e-15

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2 ** 31 - 1), st.integers(1, 10))
    def test_idempotent(self, seed, bits):
        x = np.random.default_rng(seed).uniform(-3, 3, size=64)
        once = quantize(x, bits, -1.0, 1.0)
        assert np.array_equal(quantize(once, bits, -1.0, 1.0), once)


class TestControlWords:
    def test_hand_values(self):
        assert binary_control(0, 3) == "000"
        assert binary_control(5, 3) == "101"
        assert binary_control(1, 1) == "1"

    def test_round_trip(self):
        for Q in (1, 2, 4):
            for c in range(2 ** Q):
                assert parse_control(binary_control(c, Q)) == c

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            binary_control(4, 2)
        with pytest.raises(ValueError):
            binary_control(-1, 2)


class TestValidation:
    def test_bad_bits(self):
        with pytest.raises(ConfigError):
            QuantSpec(dac_bits=0)
        with pytest.raises(ConfigError):
            QuantSpec(adc_bits="analog")

    def test_bad_range(self):
        with pytest.raises(ConfigError):
            QuantSpec(dac_range=(1.0, -1.0))

    def test_router_state(self):
        with pytest.raises(ConfigError):
            RouterState(Q=0)
        with pytest.raises(ValueError):
            RouterState(Q=2, c=4)

    def test_mode_error(self):
        model = TinyDEModel.build(4, [3], 2, 2, seed=0).to_parallel()
        with pytest.raises(ModeError):
            run_sequential_inference(model, np.zeros((2, 4)), QuantSpec.ideal())

    def test_m_exceeds_routing_paths(self):
        model = randomized_model(5, [4], seed=0)
        with pytest.raises(ConfigError):
            run_sequential_inference(model, np.zeros((2, 4)),
                                     QuantSpec.ideal(), Q=2)


class TestPipeline:
    def test_ideal_matches_exact_path(self):
        model = randomized_model(4, [6, 5], seed=3)
        x = np.random.default_rng(5).normal(size=(3, 4))
        exact = model.forward_all_sequential(x)
        sim = run_sequential_inference(model, x, QuantSpec.ideal())
        assert np.max(np.abs(sim - exact)) <= 1e-12

    def test_calibrated_ranges_cover_data(self):
        model = randomized_model(3, [5], seed=4)
        X = np.random.default_rng(6).normal(size=(32, 4))
        spec = calibrate(model, X, quantile=1.0)
        assert spec.dac_range[0] <= X.min()
        assert spec.dac_range[1] >= X.max()
        assert spec.adc_range[1] > spec.adc_range[0]

    def test_eight_bit_error_within_interval_bound(self):
        # propagate per-feature worst-case quantization error through the
        # network with interval arithmetic and check the simulator obeys it
        model = randomized_model(3, [6, 5], seed=7)
        X = np.random.default_rng(8).normal(size=(16, 4))
        spec = calibrate(model, X, quantile=1.0)
        bits = 8
        q = QuantSpec(dac_bits=bits, adc_bits=bits,
                      dac_range=spec.dac_range, adc_range=spec.adc_range)
        step_dac = (q.dac_range[1] - q.dac_range[0]) / 2 ** bits
        step_adc = (q.adc_range[1] - q.adc_range[0]) / 2 ** bits

        exact = model.forward_all_sequential(X)
        sim = run_sequential_inference(model, X, q)

        for m in range(model.M):
            err = np.full(X.shape[1], step_dac / 2)
            for linear, bank in zip(model.linears[:-1], model.banks):
                err = 2.0 * (np.abs(linear.W) @ err) + step_adc / 2
                p = bank.member(m)
                scale = np.abs(p.gamma) / np.sqrt(p.running_var + p.eps)
                err = scale * err  # norm is affine, relu6 is 1-Lipschitz
                err = 2.0 * err + step_dac / 2
            err = 2.0 * (np.abs(model.linears[-1].W) @ err) + step_adc / 2
            actual = np.max(np.abs(sim[m] - exact[m]), axis=0)
            assert np.all(actual <= err + 1e-12)

    def test_fidelity_improves_with_bits(self):
        model = randomized_model(3, [8, 6], seed=9)
        X = np.random.default_rng(10).normal(size=(64, 4))
        spec = calibrate(model, X, quantile=0.999)
        exact = model.forward_all_sequential(X)
        rmses = []
        for bits in (4, 6, 8, 10, 12):
            q = QuantSpec(dac_bits=bits, adc_bits=bits,
                          dac_range=spec.dac_range, adc_range=spec.adc_range)
            sim = run_sequential_inference(model, X, q)
            rmses.append(float(np.sqrt(np.mean((sim - exact) ** 2))))
        assert all(b <= a + 1e-12 for a, b in zip(rmses, rmses[1:]))
        assert rmses[-1] < rmses[0]

    def test_counter_state_restored(self):
        model = randomized_model(3, [4], seed=11)
        run_sequential_inference(model, np.zeros((2, 4)), QuantSpec.ideal())
        assert model._counters() == [0]


class TestTrace:
    def test_trace_lines(self):
        model = randomized_model(3, [4, 4], seed=12)
        trace = []
        run_sequential_inference(model, np.zeros((2, 4)), QuantSpec.ideal(),
                                 Q=2, trace=trace)
        assert len(trace) == 3 * 2  # passes x hidden layers
        assert trace[0] == "pass=0 layer=0 counter=0 control=00 member=0"
        assert trace[-1] == "pass=2 layer=1 counter=2 control=10 member=2"

    def test_wide_control_never_selects_missing_member(self):
        model = randomized_model(3, [4], seed=13)
        trace = []
        run_sequential_inference(model, np.zeros((2, 4)), QuantSpec.ideal(),
                                 Q=4, trace=trace)
        for line in trace:
            fields = dict(kv.split("=") for kv in line.split())
            assert len(fields["control"]) == 4
            assert int(fields["member"]) < model.M
            assert fields["member"] == fields["counter"]

    def test_write_trace(self, tmp_path):
        path = tmp_path / "trace.txt"
        write_trace(path, ["a", "b"])
        assert path.read_text() == "a\nb\n"
        write_trace(path, [])
        assert path.read_text() == ""
