use std::fs;
use std::path::{Path, PathBuf};

use kvwave::config::{parse_config, ConfigErrorKind};

fn corpus(sub: &str) -> Vec<PathBuf> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/configs").join(sub);
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "conf"))
        .collect();
    files.sort();
    files
}

fn kind(name: &str) -> ConfigErrorKind {
    match name {
        "syntax" => ConfigErrorKind::Syntax,
        "unknown_key" => ConfigErrorKind::UnknownKey,
        "duplicate_key" => ConfigErrorKind::DuplicateKey,
        "missing_key" => ConfigErrorKind::MissingKey,
        "type_mismatch" => ConfigErrorKind::TypeMismatch,
        "range_violation" => ConfigErrorKind::RangeViolation,
        "conflict" => ConfigErrorKind::Conflict,
        other => panic!("unknown expectation `{other}`"),
    }
}

/// `# expect: kind[@line]` on the first line.
fn expectation(text: &str) -> (ConfigErrorKind, Option<usize>) {
    let spec = text
        .lines()
        .next()
        .and_then(|l| l.strip_prefix("# expect: "))
        .expect("invalid corpus files start with an expectation");
    match spec.split_once('@') {
        Some((k, line)) => (kind(k.trim()), Some(line.trim().parse().unwrap())),
        None => (kind(spec.trim()), None),
    }
}

#[test]
fn valid_configs_round_trip_through_render() {
    let files = corpus("valid");
    assert!(files.len() >= 10);
    for path in files {
        let text = fs::read_to_string(&path).unwrap();
        let cfg = parse_config(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let rendered = cfg.render();
        let again = parse_config(&rendered).unwrap();
        assert_eq!(again, cfg, "{}", path.display());
        assert_eq!(again.render(), rendered);
        assert_eq!(again.fingerprint(), cfg.fingerprint());
    }
}

#[test]
fn invalid_configs_report_the_expected_error() {
    let files = corpus("invalid");
    let mut seen = Vec::new();
    for path in files {
        let text = fs::read_to_string(&path).unwrap();
        let (kind, line) = expectation(&text);
        let errs = match parse_config(&text) {
            Ok(_) => panic!("{} parsed", path.display()),
            Err(e) => e,
        };
        let hit = errs.0.iter().find(|e| e.kind == kind);
        let hit = hit.unwrap_or_else(|| panic!("{}: no {kind:?} in {errs}", path.display()));
        if line.is_some() {
            assert_eq!(hit.line, line, "{}: {errs}", path.display());
        }
        seen.push(kind);
    }
    for k in [
        ConfigErrorKind::Syntax,
        ConfigErrorKind::UnknownKey,
        ConfigErrorKind::DuplicateKey,
        ConfigErrorKind::MissingKey,
        ConfigErrorKind::TypeMismatch,
        ConfigErrorKind::RangeViolation,
        ConfigErrorKind::Conflict,
    ] {
        assert!(seen.contains(&k), "corpus lacks {k:?}");
    }
}

#[test]
fn valid_configs_build_their_runs() {
    for path in corpus("valid") {
        let cfg = parse_config(&fs::read_to_string(&path).unwrap()).unwrap();
        let domain = cfg.domain().unwrap();
        cfg.initial_state(&domain)
            .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        cfg.integrator_spec().validate().unwrap();
    }
}
