use pyo3::ffi::c_str;
use pyo3::prelude::*;
use sugar_py::sugar_py;

#[test]
fn module_runs_inside_an_embedded_interpreter() {
    pyo3::append_to_inittab!(sugar_py);
    Python::attach(|py| {
        py.run(
            c_str!(
                r#"
import sugar_py
x = sugar_py.gen_circle(80, bias=1.5, seed=4)
out = sugar_py.sugar(x, sugar_py.SugarConfig(seed=1))
rec = out.history[0]
assert len(out.combined) == 80 + len(out.generated)
assert rec.degree_variance_after < rec.degree_variance_before
assert sugar_py.rand_index([0, 0, 1], [1, 1, 0]) == 1.0
try:
    sugar_py.degree_variance([[0.0]])
    raise AssertionError("single row accepted")
except ValueError:
    pass
"#
            ),
            None,
            None,
        )
        .unwrap();
    });
}
