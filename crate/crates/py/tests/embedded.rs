use pyo3::prelude::*;
use pyo3::types::PyDict;
use pyo3::wrap_pymodule;

fn run(code: &std::ffi::CStr) {
    Python::initialize();
    Python::attach(|py| {
        let module = wrap_pymodule!(anoqrl_py::anoqrl_py)(py);
        let globals = PyDict::new(py);
        globals.set_item("aq", module).unwrap();
        if let Err(e) = py.run(code, Some(&globals), None) {
            e.print(py);
            panic!("python snippet failed");
        }
    });
}

#[test]
fn model_forward_and_gradients() {
    run(c"
m = aq.Model(4, n_layers=1, locality=3, n_outputs=2, seed=3)
assert m.groups[3] == [3, 0, 1]
x = [0.1, -0.2, 0.3, 0.4]
logits = m.forward(x)
assert len(logits) == 2
dt, dphi, dx = m.gradients(x, [1.0, 0.0])
assert len(dt) == 12 and len(dphi) == 4 and len(dx) == 4
assert all(v == 0.0 for v in dphi[1])
h = 1e-5
th = m.theta
th[5] += h
m.theta = th
up = m.forward(x)[0]
th[5] -= 2 * h
m.theta = th
down = m.forward(x)[0]
assert abs((up - down) / (2 * h) - dt[5]) < 1e-6
");
}

#[test]
fn errors_become_python_exceptions() {
    run(c"
try:
    aq.Model(4, locality=6)
    raise SystemExit('no error')
except ValueError as e:
    assert 'locality exceeds qubit count' in str(e)
try:
    aq.validate_config('algorithm = \"dqn\"\\nenv = \"cartpole\"\\n[model]\\nmode = \"rotation_only\"\\n')
    raise SystemExit('no error')
except ValueError as e:
    assert 'seed' in str(e)
");
}

#[test]
fn environments_and_helpers() {
    run(c"
env = aq.Env('cartpole', 4)
obs = env.reset()
total, done = 0.0, False
while not done:
    obs, r, done, truncated = env.step(0)
    total += r
assert 0 < total < 500
assert env.preprocess([0.0] * 4, 4) == [0.0] * 4
g, a = aq.n_step_returns([1.0, 1.0], [0.0, 0.0], 0.5, 0.9)
assert abs(g[0] - 2.305) < 1e-12
mean, std = aq.moving_average(list(range(1, 101)), 100)
assert abs(mean[-1] - 50.5) < 1e-12
assert aq.spectrum(1, [1.0, -1.0, 0.0, 0.0]) == [-1.0, 1.0]
assert abs(aq.expectation([1, 0], [0], [1.0, -1.0, 0.0, 0.0]) - 1.0) < 1e-12
");
}
