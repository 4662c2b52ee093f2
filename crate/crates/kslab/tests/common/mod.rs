#![allow(dead_code)]

use kslab::Config;

/// Small elliptic run on a 16² square; `extra` is appended verbatim.
pub fn small_config(extra: &str) -> Config {
    let kind = if extra.contains("kind =") { "" } else { "kind = \"single\"" };
    let text = format!(
        r#"
[model]
chi = 1.0
xi = 1.0
alpha = 1.0
beta = 1.0
gamma = 1.5
delta = 1.0
tau = 0

[grid]
geometry = "rectangle"
extents = [1.0, 1.0]
cells = [16, 16]

[initial]
atoms = [{{ position = [0.5, 0.5], mass = 1.0 }}]

[control]
dt_init = 1e-6
dt_max = 5e-3

[experiment]
{kind}
t_end = 0.05
{extra}
"#
    );
    Config::from_toml(&text).unwrap()
}
