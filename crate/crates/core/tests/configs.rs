use std::path::Path;

use varfrac::config::ExperimentConfig;

fn root() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../.."))
}

#[test]
fn shipped_configs_load_and_certify() {
    for name in ["reference_1d.cfg", "ball_2d.cfg", "lshape_2d.cfg"] {
        let cfg = ExperimentConfig::load(&root().join("configs").join(name)).unwrap();
        let op = cfg.operator().unwrap();
        let f = cfg.forcing(&op);
        cfg.forcing_certificate(&op, &f).unwrap();
        assert!(op.n() > 0, "{name}");
    }
}

#[test]
fn readme_example_is_a_valid_config() {
    let readme = std::fs::read_to_string(root().join("README.md")).unwrap();
    let start = readme.find("```toml\n").expect("annotated example in README") + 8;
    let len = readme[start..].find("```").unwrap();
    let cfg = ExperimentConfig::parse(&readme[start..start + len]).unwrap();
    let op = cfg.operator().unwrap();
    let f = cfg.forcing(&op);
    let cert = cfg.forcing_certificate(&op, &f).unwrap();
    assert_eq!(cert.eta_f, 0.5);
    assert_eq!(cfg.family.rule, "masked");
}
