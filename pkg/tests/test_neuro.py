"""
Unit tests for LIF dynamics, convolution, surrogate gradients, the autodiff
tape, optimizers and checkpoint files
"""

import math

import numpy as np
import pytest

from modules.config import OfsSettings
from modules.models.ofs import ofs_loss_graph
from modules.neuro import (
    CheckpointError,
    ConvLayer,
    LifLayerState,
    Logistic,
    NeuroError,
    NonFiniteGradientError,
    Optimizer,
    ShapeMismatchError,
    Tape,
    TapeError,
    Triangle,
    Var,
    conv2d,
    conv2d_op,
    lif_step,
    lif_update,
    load_checkpoint,
    make_surrogate,
    save_checkpoint,
    sgd_step,
    sigmoid,
    spike,
    surrogate_spike_grad,
)


def naive_conv(x, w, stride=1, padding=0):
    """Direct six-loop cross-correlation"""
    n, c, h, wd = x.shape
    out_ch, _, k, _ = w.shape
    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    ho = (h + 2 * padding - k) // stride + 1
    wo = (wd + 2 * padding - k) // stride + 1
    out = np.zeros((n, out_ch, ho, wo))
    for b in range(n):
        for o in range(out_ch):
            for i in range(ho):
                for j in range(wo):
                    total = 0.0
                    for ch in range(c):
                        for di in range(k):
                            for dj in range(k):
                                total += xp[b, ch, i * stride + di, j * stride + dj] * w[o, ch, di, dj]
                    out[b, o, i, j] = total
    return out


def finite_difference(loss_fn, params, h=1e-6):
    """Central differences of loss_fn(params) for every parameter element"""
    grads = {}
    for name, value in params.items():
        grad = np.zeros_like(value)
        for idx in np.ndindex(value.shape):
            plus = {k: v.copy() for k, v in params.items()}
            minus = {k: v.copy() for k, v in params.items()}
            plus[name][idx] += h
            minus[name][idx] -= h
            grad[idx] = (loss_fn(plus) - loss_fn(minus)) / (2 * h)
        grads[name] = grad
    return grads


def tape_gradients(graph_fn, params):
    tape = Tape()
    leaves = {name: tape.leaf(value, name) for name, value in params.items()}
    return tape.backward(graph_fn(leaves))


def off_tape(graph_fn):
    return lambda params: float(graph_fn({k: Var(v) for k, v in params.items()}).value)


class TestLifStep:
    """Test lif_step"""

    def test_leaky_decay(self):
        """Test u' = leak * u + I below threshold"""
        state = LifLayerState(np.array([1.0]), v_th=1.0, leak=0.5)

        new, o = lif_step(state, np.array([0.3]))

        assert new.u[0] == pytest.approx(0.8)
        assert o[0] == 0.0

    def test_zero_input_fixed_point(self):
        """Test a resting layer stays at rest"""
        state = LifLayerState.at_rest((4, 4))

        for _ in range(100):
            state, o = lif_step(state, np.zeros((4, 4)))
            assert not o.any()
        assert not state.u.any()

    def test_constant_input_spike_train(self):
        """Test the spike pattern of a constant sub-threshold drive"""
        state = LifLayerState.at_rest((1,), v_th=1.0, leak=1.0)

        spikes = []
        for _ in range(10):
            state, o = lif_step(state, np.array([0.25]))
            spikes.append(int(o[0]))

        assert spikes == [0, 0, 0, 0, 1, 0, 0, 0, 1, 0]
        assert state.u[0] == pytest.approx(0.5)

    def test_matches_scalar_simulation(self):
        """Test 100 steps on a grid against a per-neuron scalar loop"""
        rng = np.random.default_rng(0)
        currents = rng.uniform(-0.2, 0.6, size=(100, 4, 4))
        v_th, leak = 1.3, 0.85

        state = LifLayerState.at_rest((4, 4), v_th, leak)
        outputs = []
        for t in range(100):
            state, o = lif_step(state, currents[t])
            outputs.append(o)

        for r in range(4):
            for c in range(4):
                u, fired = 0.0, 0.0
                for t in range(100):
                    u = leak * u + currents[t, r, c] - v_th * fired
                    fired = 1.0 if u / v_th - 1.0 > 0 else 0.0
                    assert outputs[t][r, c] == fired
                assert abs(state.u[r, c] - u) <= 1e-12

    def test_integrator_limit(self):
        """Test leak 1 with an infinite threshold sums the input"""
        rng = np.random.default_rng(1)
        currents = rng.uniform(-1, 1, size=(50, 3))
        state = LifLayerState.at_rest((3,), v_th=math.inf, leak=1.0)

        for t in range(50):
            state, o = lif_step(state, currents[t])
            assert not o.any()

        np.testing.assert_allclose(state.u, currents.sum(axis=0), atol=1e-12)

    def test_memoryless_limit(self):
        """Test leak 0 forgets everything but the current input"""
        rng = np.random.default_rng(2)
        state = LifLayerState.at_rest((5,), v_th=math.inf, leak=0.0)

        for _ in range(10):
            current = rng.uniform(-1, 1, size=5)
            state, _ = lif_step(state, current)
            np.testing.assert_array_equal(state.u, current)

    def test_step_is_pure(self):
        """Test the input state is left untouched"""
        state = LifLayerState(np.array([0.9, 0.1]), v_th=1.0, leak=0.9)
        before = state.u.copy()

        lif_step(state, np.array([0.5, 0.5]))

        np.testing.assert_array_equal(state.u, before)

    def test_invalid_state(self):
        """Test shape mismatches and bad parameters are rejected"""
        state = LifLayerState.at_rest((2, 2))

        with pytest.raises(ShapeMismatchError):
            lif_step(state, np.zeros((3, 3)))
        with pytest.raises(NeuroError):
            LifLayerState(np.zeros(2), o_prev=np.array([0.0, 0.5]))
        with pytest.raises(NeuroError):
            LifLayerState(np.zeros(2), v_th=0.0)


class TestConv2d:
    """Test convolution"""

    def test_identity_kernel(self):
        """Test a 1x1 unit kernel returns its input"""
        x = np.random.default_rng(0).normal(size=(1, 6, 5))

        out = conv2d(x, ConvLayer(np.ones((1, 1, 1, 1))))

        np.testing.assert_array_equal(out, x)

    def test_impulse_plateau(self):
        """Test a box kernel spreads an impulse over its footprint"""
        x = np.zeros((1, 7, 7))
        x[0, 3, 3] = 1.0

        out = conv2d(x, ConvLayer(np.ones((1, 1, 3, 3)), padding=1))

        expected = np.zeros((1, 7, 7))
        expected[0, 2:5, 2:5] = 1.0
        np.testing.assert_array_equal(out, expected)

    @pytest.mark.parametrize("stride,padding", [(1, 0), (1, 1), (2, 1), (2, 2)])
    def test_matches_naive_loops(self, stride, padding):
        """Test against the direct definition"""
        rng = np.random.default_rng(stride * 10 + padding)
        x = rng.normal(size=(2, 2, 8, 8))
        w = rng.normal(size=(3, 2, 3, 3))

        out = conv2d(x, ConvLayer(w, stride, padding))

        np.testing.assert_allclose(out, naive_conv(x, w, stride, padding), atol=1e-12)

    def test_bias(self):
        """Test the bias is added per output channel"""
        layer = ConvLayer(np.zeros((2, 1, 3, 3)), padding=1, bias=np.array([1.5, -2.0]))

        out = conv2d(np.zeros((1, 4, 4)), layer)

        assert np.all(out[0] == 1.5) and np.all(out[1] == -2.0)

    def test_channel_mismatch(self):
        """Test inputs with the wrong channel count are rejected"""
        with pytest.raises(ShapeMismatchError):
            conv2d(np.zeros((3, 4, 4)), ConvLayer(np.zeros((1, 2, 3, 3))))


class TestSurrogate:
    """Test surrogate gradients and the spike op"""

    def test_triangle_values(self):
        """Test the triangle's peak, slope and support"""
        np.testing.assert_allclose(surrogate_spike_grad(np.array([0.0, 0.5, -0.5, 1.5, -1.5])), [1, 0.5, 0.5, 0, 0])
        assert surrogate_spike_grad(0.5, width=2.0) == pytest.approx(0.75)

    def test_logistic_peak(self):
        """Test the logistic surrogate peaks at 1"""
        assert surrogate_spike_grad(0.0, shape="logistic") == pytest.approx(1.0)
        assert surrogate_spike_grad(3.0, shape="logistic") < 1e-4

    @pytest.mark.parametrize("surrogate", [Triangle(1.0), Triangle(0.5), Logistic(1.0)])
    def test_primitive_derivative(self, surrogate):
        """Test each surrogate is the derivative of its primitive"""
        z = np.linspace(-2.0, 2.0, 81)
        h = 1e-6

        fd = (surrogate.primitive(z + h) - surrogate.primitive(z - h)) / (2 * h)

        np.testing.assert_allclose(fd, surrogate.grad(z), atol=1e-5)

    def test_spike_forward_binary_backward_surrogate(self):
        """Test the spike op's forward step and surrogate backward"""
        z_value = np.array([-1.2, -0.3, 0.0, 0.4, 2.0])
        tape = Tape()
        z = tape.leaf(z_value, "z")

        out = spike(z, Triangle())
        grads = tape.backward(out.sum())

        np.testing.assert_array_equal(out.value, [0, 0, 0, 1, 1])
        np.testing.assert_allclose(grads["z"], Triangle().grad(z_value))

    def test_unknown_surrogate(self):
        """Test unknown surrogate names are rejected"""
        with pytest.raises(NeuroError):
            make_surrogate("boxcar")
        with pytest.raises(NeuroError):
            make_surrogate("triangle", 0.0)


class TestTape:
    """Test the autodiff tape"""

    def test_backward_before_forward(self):
        """Test backward needs a loss recorded on the tape"""
        tape = Tape()
        tape.leaf(1.0, "a")

        with pytest.raises(TapeError):
            tape.backward(Var(np.array(1.0)))

    def test_non_scalar_loss(self):
        """Test backward needs a scalar"""
        tape = Tape()
        a = tape.leaf(np.ones(3), "a")

        with pytest.raises(TapeError):
            tape.backward(a * 2.0)

    def test_duplicate_leaf(self):
        """Test leaf names are unique"""
        tape = Tape()
        tape.leaf(1.0, "a")

        with pytest.raises(TapeError):
            tape.leaf(2.0, "a")

    def test_mixed_tapes(self):
        """Test operands from two tapes cannot be combined"""
        a = Tape().leaf(1.0, "a")
        b = Tape().leaf(2.0, "b")

        with pytest.raises(TapeError):
            a + b

    def test_unused_leaf_gets_zero(self):
        """Test leaves outside the graph get zero gradients"""
        tape = Tape()
        a = tape.leaf(np.array([1.0, 2.0]), "a")
        tape.leaf(np.ones((2, 3)), "b")

        grads = tape.backward((a * a).sum())

        np.testing.assert_array_equal(grads["a"], [2.0, 4.0])
        np.testing.assert_array_equal(grads["b"], np.zeros((2, 3)))

    def test_broadcast_gradient(self):
        """Test gradients are summed back over broadcast axes"""
        tape = Tape()
        a = tape.leaf(np.array([[1.0], [2.0], [3.0]]), "a")
        b = tape.leaf(np.array([[1.0, 2.0, 3.0, 4.0]]), "b")

        grads = tape.backward((a * b).sum())

        np.testing.assert_array_equal(grads["a"], [[10.0], [10.0], [10.0]])
        np.testing.assert_array_equal(grads["b"], [[6.0, 6.0, 6.0, 6.0]])

    def test_reused_node_accumulates(self):
        """Test a node feeding two consumers gets both contributions"""
        tape = Tape()
        a = tape.leaf(3.0, "a")
        b = a * a

        grads = tape.backward(b + b * a)

        assert float(grads["a"]) == pytest.approx(2 * 3.0 + 3 * 9.0)

    def test_leak_gradient(self):
        """Test d(sum u')/d(leak) equals the sum of the previous potentials"""
        rng = np.random.default_rng(0)
        u0 = rng.uniform(0, 1, size=20)
        tape = Tape()
        leak = tape.leaf(0.7, "leak")
        v_th = tape.leaf(10.0, "v_th")

        u, _, _ = lif_update(u0, np.zeros(20), Var(rng.uniform(0, 0.1, size=20)), v_th, leak, Triangle())
        grads = tape.backward(u.sum())

        assert float(grads["leak"]) == pytest.approx(u0.sum(), rel=1e-12)
        assert float(grads["v_th"]) == 0.0

    def test_analog_network_gradient(self):
        """Test a two-layer conv net against finite differences"""
        rng = np.random.default_rng(3)
        x = rng.normal(size=(2, 1, 7, 7))
        params = {
            "w1": rng.normal(scale=0.5, size=(3, 1, 3, 3)),
            "b1": rng.normal(scale=0.1, size=3),
            "w2": rng.normal(scale=0.5, size=(2, 3, 3, 3)),
            "b2": rng.normal(scale=0.1, size=2),
        }

        def graph(p):
            h = sigmoid(conv2d_op(x, p["w1"], p["b1"], stride=1, padding=1))
            out = conv2d_op(h, p["w2"], p["b2"], stride=2, padding=1)
            return (out * out).mean()

        analytic = tape_gradients(graph, params)
        numeric = finite_difference(off_tape(graph), params)

        for name in params:
            err = np.linalg.norm(analytic[name] - numeric[name])
            assert err <= 1e-5 * max(np.linalg.norm(numeric[name]), 1e-12), name

    @pytest.mark.parametrize("seed", range(20))
    def test_spiking_layer_gradient(self, seed):
        """Test the surrogate-smoothed spiking loss against finite differences"""
        rng = np.random.default_rng(seed)
        shape = "triangle" if seed % 2 == 0 else "logistic"
        settings = OfsSettings(kernel=3, surrogate=shape, pos_weight=2.0)
        surrogate = make_surrogate(shape, 1.0)
        x = (rng.uniform(size=(2, 5, 2, 8, 8)) < 0.3).astype(np.float64)
        targets = (rng.uniform(size=(2, 8, 8)) < 0.5).astype(np.float64)
        masks = np.ones((2, 8, 8))
        params = {
            "weight": rng.uniform(-0.5, 0.5, size=(1, 2, 3, 3)),
            "v_th": np.array(rng.uniform(0.5, 1.5)),
            "leak": np.array(rng.uniform(0.5, 0.95)),
        }

        def graph(p):
            return ofs_loss_graph(p["weight"], p["v_th"], p["leak"], x, targets, masks, settings, surrogate, smooth=True)

        analytic = tape_gradients(graph, params)
        numeric = finite_difference(off_tape(graph), params)

        for name in params:
            diff = np.abs(analytic[name] - numeric[name])
            scale = np.maximum(np.abs(analytic[name]), np.abs(numeric[name]))
            assert np.all(diff <= 1e-3 * scale + 1e-7), name


class TestOptimizers:
    """Test sgd_step and Optimizer"""

    def test_zero_gradient(self):
        """Test zero gradients leave parameters unchanged"""
        params = {"w": np.array([1.0, -2.0]), "v_th": np.array(0.7), "leak": np.array(0.9)}
        grads = {name: np.zeros_like(value) for name, value in params.items()}

        updated = sgd_step(params, grads, 0.1)

        for name in params:
            np.testing.assert_array_equal(updated[name], params[name])

    def test_clamps(self):
        """Test leak and threshold are clamped into range"""
        params = {"leak": np.array(0.99), "v_th": np.array(0.01)}
        grads = {"leak": np.array(-1.0), "v_th": np.array(1.0)}

        updated = sgd_step(params, grads, 0.1)

        assert float(updated["leak"]) == 1.0
        assert float(updated["v_th"]) == pytest.approx(1e-3)

    def test_quadratic_convergence(self):
        """Test 100 steps on (p - 3)^2 reach the minimum"""
        params = {"w": np.array([0.0])}

        for _ in range(100):
            params = sgd_step(params, {"w": 2 * (params["w"] - 3.0)}, 0.1)

        assert abs(float(params["w"][0]) - 3.0) < 1e-6

    def test_non_finite_gradient(self):
        """Test NaN gradients are reported by parameter name"""
        with pytest.raises(NonFiniteGradientError) as exc:
            sgd_step({"w": np.zeros(2)}, {"w": np.array([0.0, np.nan])}, 0.1)
        assert exc.value.name == "w"

    def test_bad_learning_rate(self):
        """Test non-positive learning rates are rejected"""
        with pytest.raises(NeuroError):
            sgd_step({"w": np.zeros(1)}, {"w": np.zeros(1)}, 0.0)
        with pytest.raises(NeuroError):
            Optimizer(0.1, momentum=1.0)

    def test_no_momentum_is_sgd(self):
        """Test momentum 0 reproduces sgd_step"""
        params = {"w": np.array([1.0, 2.0])}
        grads = {"w": np.array([0.5, -0.5])}

        np.testing.assert_array_equal(Optimizer(0.1).step(params, grads)["w"], sgd_step(params, grads, 0.1)["w"])

    def test_momentum_convergence(self):
        """Test heavy-ball momentum converges on a quadratic"""
        optimizer = Optimizer(0.05, momentum=0.9)
        params = {"w": np.array([0.0])}

        for _ in range(400):
            params = optimizer.step(params, {"w": 2 * (params["w"] - 3.0)})

        assert abs(float(params["w"][0]) - 3.0) < 1e-6


class TestCheckpoint:
    """Test checkpoint files"""

    def params(self):
        rng = np.random.default_rng(0)
        return {
            "weight": rng.normal(size=(1, 2, 5, 5)).astype(np.float32).astype(np.float64),
            "v_th": np.array(0.75),
            "leak": np.array(0.5),
        }

    def test_round_trip(self, tmp_path):
        """Test parameters and metadata read back"""
        path = tmp_path / "model.tofc"
        params = self.params()

        save_checkpoint(path, params, {"kind": "ofs", "speed_bin": 2})
        loaded, meta = load_checkpoint(path)

        assert meta == {"kind": "ofs", "speed_bin": 2}
        assert set(loaded) == set(params)
        for name in params:
            assert loaded[name].dtype == np.float64
            np.testing.assert_array_equal(loaded[name], params[name])

    def test_deterministic_bytes(self, tmp_path):
        """Test saving twice gives identical files"""
        save_checkpoint(tmp_path / "a.tofc", self.params(), {"b": 1, "a": 2})
        save_checkpoint(tmp_path / "b.tofc", self.params(), {"a": 2, "b": 1})

        assert (tmp_path / "a.tofc").read_bytes() == (tmp_path / "b.tofc").read_bytes()

    def test_bad_magic(self, tmp_path):
        """Test foreign files are rejected"""
        path = tmp_path / "bad.tofc"
        path.write_bytes(b"NOPE" + bytes(12))

        with pytest.raises(CheckpointError):
            load_checkpoint(path)

    def test_truncated(self, tmp_path):
        """Test a cut-off file is rejected"""
        path = tmp_path / "cut.tofc"
        save_checkpoint(path, self.params(), {})
        path.write_bytes(path.read_bytes()[:-3])

        with pytest.raises(CheckpointError):
            load_checkpoint(path)

    def test_trailing_bytes(self, tmp_path):
        """Test extra bytes after the last parameter are rejected"""
        path = tmp_path / "long.tofc"
        save_checkpoint(path, self.params(), {})
        path.write_bytes(path.read_bytes() + b"\x00")

        with pytest.raises(CheckpointError):
            load_checkpoint(path)

    def test_missing(self, tmp_path):
        """Test a missing file raises FileNotFoundError"""
        with pytest.raises(FileNotFoundError):
            load_checkpoint(tmp_path / "absent.tofc")
