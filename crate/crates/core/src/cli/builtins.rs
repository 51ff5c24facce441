//! Built-in example problems.

pub const NAMES: [&str; 4] = ["acoustic", "dalembert", "damped", "gt-1d"];

/// Wave speed with a jump at the origin, log-rescaled mollifier.
const ACOUSTIC: &str = r#"dimension = 1
horizon = 1.0
mollifier = "log"

[domain]
lower = [-2.0]
upper = [2.0]
padding = 2.0

[acoustic]
c = "1 + H(x)"

[initial]
u0 = "exp(-16*(x + 1)^2)"
u1 = "0"

[grid]
h = 0.02
boundary = "constant-extension"
lower = [-3.5]
upper = [3.5]
"#;

/// Smooth periodic standing wave with a closed-form solution.
const DALEMBERT: &str = r#"dimension = 1
horizon = 1.0

[domain]
lower = [0.0]
upper = [1.0]

[coefficients]
R = "1"

[initial]
u0 = "sin(2*pi*x)"
u1 = "0"

[grid]
h = 0.01
boundary = "periodic"

[equivalence]
h = [0.02, 0.01, 0.005]
exact = "sin(2*pi*x)*cos(2*pi*t)"
"#;

/// `u_tt = −u_t` with `u_t(0) = 1`, so `u = 1 − e^{−t}`.
const DAMPED: &str = r#"dimension = 1
horizon = 1.0

[domain]
lower = [0.0]
upper = [1.0]

[coefficients]
R = "1"
a = "-1"

[initial]
u0 = "0"
u1 = "1"

[grid]
h = 0.01
boundary = "periodic"

[equivalence]
h = [0.02, 0.01, 0.005]
exact = "1 - exp(-t)"
"#;

/// Metric with a jump in the spatial block, constant outside the box.
const GT_1D: &str = r#"dimension = 1
horizon = 1.0
mollifier = "log"

[domain]
lower = [-2.0]
upper = [2.0]
padding = 2.0

[coefficients]
R = "1 + H(x)"
g = "0"

[initial]
u0 = "exp(-16*(x + 1)^2)"
u1 = "0"

[grid]
h = 0.02
boundary = "constant-extension"
lower = [-3.5]
upper = [3.5]
"#;

pub fn text(name: &str) -> Option<&'static str> {
    Some(match name {
        "acoustic" => ACOUSTIC,
        "dalembert" => DALEMBERT,
        "damped" => DAMPED,
        "gt-1d" => GT_1D,
        _ => return None,
    })
}
