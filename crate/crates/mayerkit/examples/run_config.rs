// Drives the batch front-end from an in-memory TOML configuration.

use mayerkit::cli::{run, RunConfig};

fn main() {
    let text = r#"
[model]
dim = 1
side = 10.0
potential = { kind = "hard_sphere", diameter = 1.0 }
activity = { kind = "constant", z = 0.05 }

[numeric]
order = 4
samples = 20000
seed = 3
"#;
    let dir = std::env::temp_dir().join("mayerkit-run-config");
    std::fs::create_dir_all(&dir).expect("temp dir");
    let path = dir.join("expand.toml");
    std::fs::write(&path, text).expect("write config");
    assert!(RunConfig::from_toml(text).is_ok());
    let out = dir.join("out");
    let code = run(["mayerkit", "expand", "--config", path.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    println!("exit code {code}; report in {}", out.join("expand.json").display());
}
