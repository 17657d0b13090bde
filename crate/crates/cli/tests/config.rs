use std::path::PathBuf;

use wavelab_cli::config::{parse_assignment, Scenario, ScenarioConfig};

fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

#[test]
fn shipped_configs_round_trip() {
    let mut seen = Vec::new();
    for entry in std::fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        let cfg = ScenarioConfig::load(&path, &[]).unwrap();
        let again = ScenarioConfig::parse(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, again, "{}", path.display());
        seen.push(cfg.scenario);
    }
    for s in Scenario::ALL {
        assert!(seen.contains(&s), "no config for {s}");
    }
}

#[test]
fn defaults_fill_missing_sections() {
    let cfg = ScenarioConfig::parse("scenario = \"conservation\"\n[grid]\nn = 16\n").unwrap();
    assert_eq!((cfg.physics.g, cfg.physics.h), (1.0, 1.0));
    assert_eq!(cfg.grid.dim, 1);
    assert!(cfg.numerics.dealias);
    assert!(cfg.initial.modes.is_empty());
    assert_eq!(cfg.dn_config().m, 16);
    assert_eq!(ScenarioConfig::parse(&cfg.to_toml()).unwrap(), cfg);
}

#[test]
fn unknown_key_is_reported_with_its_path() {
    let err = ScenarioConfig::parse("scenario = \"conservation\"\n[grid]\nn = 16\nbogus = 1\n").unwrap_err();
    assert!(err.path.starts_with("grid"), "{err}");
    assert!(err.to_string().contains("bogus"), "{err}");
}

#[test]
fn invalid_values_are_reported_with_their_path() {
    let base = "scenario = \"conservation\"\n[grid]\nn = 16\n";
    let cases = [
        ("grid.n=12", "grid.n"),
        ("grid.m=1", "grid.m"),
        ("physics.h=-1.0", "physics.h"),
        ("numerics.dt=0.0", "numerics.dt"),
        ("numerics.stride=0", "numerics.stride"),
        ("monitor.r=1.5", "monitor"),
    ];
    for (set, path) in cases {
        let err = ScenarioConfig::parse_with(base, &[set.to_string()]).unwrap_err();
        assert!(err.path.starts_with(path), "{set}: {err}");
    }
    let err = ScenarioConfig::parse(&format!("{base}[[initial.modes]]\nk = [8]\neta = 0.1\n")).unwrap_err();
    assert!(err.path.starts_with("initial.modes"), "{err}");
    let err = ScenarioConfig::parse("scenario = \"contraction\"\n[grid]\nn = 16\n").unwrap_err();
    assert!(err.path.starts_with("perturbation"), "{err}");
    let err = ScenarioConfig::parse("scenario = \"nope\"\n[grid]\nn = 16\n").unwrap_err();
    assert_eq!(err.path, "scenario", "{err}");
}

#[test]
fn overrides_apply_in_order_after_the_file() {
    let text = "scenario = \"dispersion\"\nseed = 3\n[grid]\nn = 32\n[physics]\ng = 1.0\n";
    let sets = ["physics.g=0.5", "physics.g=0.25", "numerics.form=\"variational\"", "grid.flat_correction=true"];
    let cfg = ScenarioConfig::parse_with(text, &sets.map(String::from)).unwrap();
    assert_eq!(cfg.physics.g, 0.25);
    assert_eq!(cfg.seed, 3);
    assert!(cfg.grid.flat_correction);
    assert_eq!(cfg.to_toml().contains("variational"), true);
}

#[test]
fn assignment_values_parse_as_toml_or_string() {
    let (path, v) = parse_assignment("a.b=2").unwrap();
    assert_eq!(path, ["a", "b"]);
    assert_eq!(v, toml::Value::Integer(2));
    assert_eq!(parse_assignment("x=linear").unwrap().1, toml::Value::String("linear".into()));
    assert_eq!(parse_assignment("x=[1, 2]").unwrap().1, toml::Value::Array(vec![1.into(), 2.into()]));
    assert!(parse_assignment("novalue").is_err());
    assert!(parse_assignment("=3").is_err());
}

#[test]
fn initial_state_sums_modes() {
    let text = "scenario = \"conservation\"\n[grid]\nn = 32\n\
        [[initial.modes]]\nk = [2]\neta = 0.1\n\
        [[initial.modes]]\nk = [3]\npsi = 0.2\nphase = 1.0\n";
    let s = ScenarioConfig::parse(text).unwrap().initial_state().unwrap();
    let grid = s.eta.grid();
    for i in 0..grid.n() {
        let x = grid.node(i)[0];
        assert!((s.eta.values()[i].re - 0.1 * (2.0 * x).cos()).abs() < 1e-15);
        assert!((s.psi.values()[i].re - 0.2 * (3.0 * x + 1.0).cos()).abs() < 1e-15);
    }
}

mod round_trip {
    use proptest::prelude::*;
    use wavelab_cli::config::{Scenario, ScenarioConfig};

    fn mode() -> impl Strategy<Value = String> {
        (-7i64..8, -1.0..1.0f64, -1.0..1.0f64, -3.0..3.0f64)
            .prop_map(|(k, eta, psi, phase)| format!("[[initial.modes]]\nk = [{k}]\neta = {eta:?}\npsi = {psi:?}\nphase = {phase:?}\n"))
    }

    proptest! {
        #[test]
        fn parse_serialize_parse_is_identity(
            which in 0..8usize,
            seed in any::<u64>(),
            n in 4u32..8,
            m in prop::option::of(8usize..64),
            g in 0.0..10.0f64,
            h in 0.1..10.0f64,
            dt in 1e-5..1e-2f64,
            flags in (any::<bool>(), any::<bool>(), 0..3usize, 0..2usize),
            modes in prop::collection::vec(mode(), 0..4),
        ) {
            let (dealias, flat, form, map) = flags;
            let mut text = format!(
                "scenario = \"{}\"\nseed = {}\n[grid]\nn = {}\nflat_correction = {flat}\nmap = \"{}\"\n",
                Scenario::ALL[which].name(),
                seed as i64 & i64::MAX,
                1usize << n,
                ["linear", "smoothing"][map],
            );
            if let Some(m) = m {
                text += &format!("m = {m}\n");
            }
            text += &format!("[physics]\ng = {g:?}\nh = {h:?}\n[numerics]\ndt = {dt:?}\ndealias = {dealias}\nform = \"{}\"\n",
                ["zakharov", "velocity", "variational"][form]);
            for md in &modes {
                text += md;
            }
            if Scenario::ALL[which] == Scenario::Contraction {
                text += "[perturbation]\ndelta = 1e-4\nk = [3]\n";
            }
            let cfg = ScenarioConfig::parse(&text).unwrap();
            let again = ScenarioConfig::parse(&cfg.to_toml()).unwrap();
            prop_assert_eq!(cfg, again);
        }
    }
}
