"""Autodiff engine: frozen values, error contracts, finite-difference agreement."""

import numpy as np
import pytest

import misac.numcore as nc
from misac.numcore import (
    Adam,
    DomainError,
    NumericError,
    ShapeError,
    StateError,
    Tape,
    TapeError,
    Tensor,
    finite_difference_check,
)


def test_mean_square_value_and_grad():
    x = Tensor(np.array([1.0, 2.0]), requires_grad=True)
    with Tape() as tape:
        y = nc.tmean(nc.square(x))
    tape.backward(y)
    assert float(y.data) == 2.5
    np.testing.assert_array_equal(x.grad, np.array([1.0, 2.0]))


def test_tensor_buffer_invariants():
    t = Tensor(np.arange(6.0).reshape(2, 3), requires_grad=True)
    assert t.data.size == int(np.prod(t.shape)) == t.grad.size
    assert t.grad.shape == t.data.shape
    t.grad += 1.0
    t.zero_grad()
    assert np.all(t.grad == 0.0)


def test_softmax_extreme_logits_no_overflow():
    with np.errstate(over="raise"):
        s = nc.softmax(Tensor(np.array([1000.0, 0.0])))
    assert s.data[0] == pytest.approx(1.0, abs=1e-12)
    assert s.data[1] == pytest.approx(0.0, abs=1e-12)
    assert abs(s.data.sum() - 1.0) < 1e-12


def test_softmax_rows_sum_to_one():
    rng = np.random.default_rng(7)
    s = nc.softmax(Tensor(rng.normal(size=(50, 15)) * 10.0))
    np.testing.assert_allclose(s.data.sum(axis=1), 1.0, atol=1e-12)
    assert np.all(s.data >= 0.0)


def test_domain_and_numeric_errors():
    with pytest.raises(DomainError):
        nc.log(Tensor(np.array([1.0, 0.0])))
    with pytest.raises(DomainError):
        nc.log(Tensor(np.array([-1.0])))
    with pytest.raises(NumericError):
        nc.softmax(Tensor(np.array([np.nan, 0.0])))
    with pytest.raises(NumericError):
        nc.softmax(Tensor(np.array([np.inf, 0.0])))
    with pytest.raises(DomainError):
        nc.reciprocal(Tensor(np.array([0.0, 1.0])))


def test_backward_without_forward_is_tape_error():
    tape = Tape()
    with pytest.raises(TapeError):
        tape.backward(Tensor(np.float64(1.0)))


def test_backward_needs_scalar_root():
    x = Tensor(np.ones(3), requires_grad=True)
    with Tape() as tape:
        y = nc.square(x)
    with pytest.raises(TapeError):
        tape.backward(y)


def test_broadcast_restrictions():
    a = Tensor(np.ones((4, 3)))
    # Column vector against matrix is outside the contract.
    with pytest.raises(ShapeError):
        nc.add(a, Tensor(np.ones(4)))
    with pytest.raises(ShapeError):
        nc.add(a, Tensor(np.ones((4, 1))))
    with pytest.raises(ShapeError):
        nc.matmul(Tensor(np.ones(3)), Tensor(np.ones(3)))
    with pytest.raises(ShapeError):
        nc.matmul(a, Tensor(np.ones((4, 2))))
    # The two sanctioned broadcasts.
    assert nc.add(a, 2.0).shape == (4, 3)
    assert nc.add(a, Tensor(np.ones(3))).shape == (4, 3)


def test_row_broadcast_grad_reduction():
    m = Tensor(np.ones((4, 3)), requires_grad=True)
    b = Tensor(np.arange(3.0), requires_grad=True)
    with Tape() as tape:
        y = nc.tsum(nc.mul(m, b))
    tape.backward(y)
    np.testing.assert_array_equal(b.grad, np.full(3, 4.0))
    np.testing.assert_array_equal(m.grad, np.tile(np.arange(3.0), (4, 1)))


def _adam_reference_orbit(x0, lr, steps, beta1=0.9, beta2=0.999, eps=1e-8):
    # Independent recurrence for f(x) = x^2, g = 2x, in plain python floats.
    x, m, v = x0, 0.0, 0.0
    orbit = []
    for t in range(1, steps + 1):
        g = 2.0 * x
        m = beta1 * m + (1.0 - beta1) * g
        v = beta2 * v + (1.0 - beta2) * g * g
        mhat = m / (1.0 - beta1**t)
        vhat = v / (1.0 - beta2**t)
        x = x - lr * mhat / (np.sqrt(vhat) + eps)
        orbit.append(x)
    return orbit


def test_adam_orbit_matches_reference_and_descends():
    x = Tensor(np.float64(1.0), requires_grad=True)
    opt = Adam([x], lr=0.1)
    seen = []
    for _ in range(10):
        with Tape() as tape:
            loss = nc.square(x)
        tape.backward(loss)
        opt.step()
        opt.zero_grad()
        seen.append(float(x.data))
    expected = _adam_reference_orbit(1.0, 0.1, 10)
    np.testing.assert_allclose(seen, expected, rtol=1e-12, atol=0.0)
    mags = [1.0] + [abs(s) for s in seen]
    assert all(b < a for a, b in zip(mags, mags[1:]))


def test_adam_first_step_magnitude_is_lr():
    x = Tensor(np.float64(3.0), requires_grad=True)
    opt = Adam([x], lr=0.05)
    x.grad[...] = 1.0
    opt.step()
    assert abs((3.0 - float(x.data)) - 0.05) < 1e-6


def test_adam_leaves_gradients_untouched():
    x = Tensor(np.arange(4.0), requires_grad=True)
    opt = Adam([x], lr=1e-3)
    x.grad[...] = np.array([1.0, -2.0, 3.0, -4.0])
    before = x.grad.copy()
    opt.step()
    np.testing.assert_array_equal(x.grad, before)


def test_adam_state_layout_mismatch():
    x = Tensor(np.ones(3), requires_grad=True)
    opt = Adam([x])
    with pytest.raises(StateError):
        opt.load_state([np.zeros(2)], [np.zeros(3)], 1)
    with pytest.raises(StateError):
        opt.load_state([], [], 0)


def test_finite_difference_on_linear_function():
    # Central differences are exact for affine maps up to roundoff.
    x = Tensor(np.array([0.01, -0.02, 0.005]), requires_grad=True)
    w = np.array([3.0, -1.5, 2.0])

    def fn():
        return nc.tsum(nc.mul(x, Tensor(w)))

    assert finite_difference_check(fn, [x]) < 1e-10


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_primitive_gradients_against_central_differences(seed):
    rng = np.random.default_rng(seed)

    def fd(fn, params, tol=1e-4):
        assert finite_difference_check(fn, params) < tol

    a = Tensor(rng.normal(size=(3, 4)), requires_grad=True)
    b = Tensor(rng.normal(size=(4, 2)), requires_grad=True)
    fd(lambda: nc.tsum(nc.square(nc.matmul(a, b))), [a, b])

    x = Tensor(rng.normal(size=(4, 3)), requires_grad=True)
    y = Tensor(rng.normal(size=(4, 3)), requires_grad=True)
    row = Tensor(rng.normal(size=3), requires_grad=True)
    fd(lambda: nc.tsum(nc.square(nc.add(x, y))), [x, y])
    fd(lambda: nc.tsum(nc.square(nc.sub(x, row))), [x, row])
    fd(lambda: nc.tsum(nc.square(nc.mul(x, row))), [x, row])
    fd(lambda: nc.tsum(nc.square(nc.mul(x, 0.7))), [x])

    # Keep relu inputs clear of the kink so the difference quotient is clean.
    r = Tensor(rng.uniform(0.2, 1.5, size=(4, 3)) * rng.choice([-1.0, 1.0], size=(4, 3)),
               requires_grad=True)
    fd(lambda: nc.tsum(nc.square(nc.relu(r))), [r])

    p = Tensor(rng.uniform(0.5, 2.0, size=(3, 3)), requires_grad=True)
    fd(lambda: nc.tsum(nc.exp(nc.mul(p, 0.3))), [p])
    fd(lambda: nc.tsum(nc.square(nc.log(p))), [p])
    fd(lambda: nc.tsum(nc.reciprocal(p)), [p])
    fd(lambda: nc.tmean(nc.square(p)), [p])
    fd(lambda: nc.tsum(nc.square(nc.tsum(p, axis=0))), [p])
    fd(lambda: nc.tsum(nc.square(nc.tmean(p, axis=1))), [p])

    logits = Tensor(rng.normal(size=(4, 5)), requires_grad=True)
    mix = Tensor(rng.normal(size=(4, 5)))
    fd(lambda: nc.tsum(nc.mul(nc.softmax(logits), mix)), [logits])
    fd(lambda: nc.tsum(nc.mul(nc.log_softmax(logits), mix)), [logits])

    mat = Tensor(rng.normal(size=(5, 3)), requires_grad=True)
    vec = Tensor(rng.normal(size=5), requires_grad=True)
    fd(lambda: nc.tsum(nc.square(nc.scale_rows(mat, vec))), [mat, vec])
    fd(lambda: nc.tsum(nc.square(nc.take_column(mat, 1))), [mat])
    idx = np.array([4, 0, 2])
    fd(lambda: nc.tsum(nc.square(nc.gather_rows(mat, idx))), [mat])
    src = Tensor(rng.normal(size=(3, 2)), requires_grad=True)
    fd(lambda: nc.tsum(nc.square(nc.scatter_rows(src, idx, 6))), [src])
    fd(lambda: nc.tsum(nc.square(nc.concat_cols([mat, nc.square(mat)]))), [mat])
    labels = np.array([2, 0, 1, 2])
    fd(lambda: nc.tsum(nc.square(nc.pick_per_row(logits, labels))), [logits])


def test_gather_scatter_round_trip_values():
    x = Tensor(np.arange(12.0).reshape(4, 3), requires_grad=True)
    idx = np.array([2, 0])
    g = nc.gather_rows(x, idx)
    np.testing.assert_array_equal(g.data, x.data[idx])
    s = nc.scatter_rows(g, idx, 4)
    expect = np.zeros((4, 3))
    expect[idx] = x.data[idx]
    np.testing.assert_array_equal(s.data, expect)
    with pytest.raises(ShapeError):
        nc.scatter_rows(g, np.array([0, 0]), 4)
    with pytest.raises(ShapeError):
        nc.gather_rows(x, np.array([4]))


def test_relu_subgradient_at_zero_is_zero():
    x = Tensor(np.array([0.0, 1.0, -1.0]), requires_grad=True)
    with Tape() as tape:
        y = nc.tsum(nc.relu(x))
    tape.backward(y)
    np.testing.assert_array_equal(x.grad, np.array([0.0, 1.0, 0.0]))
