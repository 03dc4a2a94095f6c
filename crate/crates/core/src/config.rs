//! Flat `key = value` run configuration.
//!
//! ```text
//! # 8-mode Kelvin-Voigt run
//! model = kelvin_voigt
//! domain.geometry = interval
//! domain.length = 3.141592653589793
//! modes = 8
//! integrator.method = direct_rk4
//! integrator.dt = 0.001
//! integrator.t_end = 10
//! sample_stride = 10
//! init.u0 = parabola:0.92
//! init.u1 = modes:1:1.0,2:0.5
//! ```
//!
//! Initial data values: `zero`, `mode:K:A`, `modes:K:A,K:A,...`,
//! `parabola:A` (`A·x(L-x)`, tensorized on rectangles) and `tent:A`
//! (`A·min(x, L-x)`). Parsing reports every problem found, each with its line.

use std::collections::BTreeMap;
use std::fmt;

use sha2::{Digest, Sha256};

use crate::domain::{Geometry, InitialData, Profile, SpectralDomain};
use crate::evolution::{IntegratorSpec, Method, Model};
use crate::resolvent::DEFAULT_TOL;
use crate::state::ModalState;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConfigErrorKind {
    Syntax,
    UnknownKey,
    DuplicateKey,
    MissingKey,
    TypeMismatch,
    RangeViolation,
    Conflict,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    /// 1-based line; `None` for keys that are missing altogether.
    pub line: Option<usize>,
    pub kind: ConfigErrorKind,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {:?}: {}", self.kind, self.message),
            None => write!(f, "{:?}: {}", self.kind, self.message),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigErrors(pub Vec<ConfigError>);

impl ConfigErrors {
    pub fn kinds(&self) -> Vec<ConfigErrorKind> {
        self.0.iter().map(|e| e.kind).collect()
    }
}

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} configuration error(s)", self.0.len())?;
        for e in &self.0 {
            write!(f, "\n  {e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

/// Initial datum as written in a config file.
#[derive(Debug, Clone, PartialEq)]
pub enum InitSpec {
    Zero,
    Mode { index: usize, amplitude: f64 },
    Modes(Vec<(usize, f64)>),
    Parabola { amplitude: f64 },
    Tent { amplitude: f64 },
}

impl InitSpec {
    fn parse(value: &str) -> std::result::Result<Self, String> {
        let mut parts = value.splitn(2, ':');
        let head = parts.next().unwrap_or("").trim();
        let rest = parts.next().map(str::trim);
        let amp = |s: &str| -> std::result::Result<f64, String> {
            let a: f64 = s
                .trim()
                .parse()
                .map_err(|_| format!("`{s}` is not a number"))?;
            if a.is_finite() {
                Ok(a)
            } else {
                Err(format!("amplitude `{s}` is not finite"))
            }
        };
        let term = |s: &str| -> std::result::Result<(usize, f64), String> {
            let (k, a) = s
                .split_once(':')
                .ok_or_else(|| format!("expected K:A, got `{s}`"))?;
            let k: usize = k
                .trim()
                .parse()
                .map_err(|_| format!("`{k}` is not a mode index"))?;
            if k == 0 {
                return Err("mode indices start at 1".into());
            }
            Ok((k, amp(a)?))
        };
        match (head, rest) {
            ("zero", None) => Ok(InitSpec::Zero),
            ("mode", Some(r)) => {
                let (index, amplitude) = term(r)?;
                Ok(InitSpec::Mode { index, amplitude })
            }
            ("modes", Some(r)) => {
                let terms = r.split(',').map(term).collect::<std::result::Result<Vec<_>, _>>()?;
                if terms.is_empty() {
                    return Err("empty mode list".into());
                }
                Ok(InitSpec::Modes(terms))
            }
            ("parabola", Some(r)) => Ok(InitSpec::Parabola { amplitude: amp(r)? }),
            ("tent", Some(r)) => Ok(InitSpec::Tent { amplitude: amp(r)? }),
            _ => Err(format!(
                "`{value}` is not one of zero | mode:K:A | modes:K:A,... | parabola:A | tent:A"
            )),
        }
    }

    /// Largest explicit mode index, if any.
    pub fn max_index(&self) -> Option<usize> {
        match self {
            InitSpec::Mode { index, .. } => Some(*index),
            InitSpec::Modes(terms) => terms.iter().map(|(k, _)| *k).max(),
            _ => None,
        }
    }

    fn render(&self) -> String {
        match self {
            InitSpec::Zero => "zero".into(),
            InitSpec::Mode { index, amplitude } => format!("mode:{index}:{amplitude:?}"),
            InitSpec::Modes(terms) => {
                let body: Vec<String> = terms.iter().map(|(k, a)| format!("{k}:{a:?}")).collect();
                format!("modes:{}", body.join(","))
            }
            InitSpec::Parabola { amplitude } => format!("parabola:{amplitude:?}"),
            InitSpec::Tent { amplitude } => format!("tent:{amplitude:?}"),
        }
    }

    pub fn to_initial_data(&self, geometry: Geometry) -> InitialData {
        match self {
            InitSpec::Zero => InitialData::Zero,
            InitSpec::Mode { index, amplitude } => InitialData::SingleMode {
                index: *index,
                amplitude: *amplitude,
            },
            InitSpec::Modes(terms) => InitialData::ModeSum(terms.clone()),
            InitSpec::Parabola { amplitude } => {
                let a = *amplitude;
                InitialData::Profile(match geometry {
                    Geometry::Interval { length } => Profile::new(move |x, _| a * x * (length - x)),
                    Geometry::Rectangle { lx, ly } => {
                        Profile::new(move |x, y| a * x * (lx - x) * y * (ly - y))
                    }
                })
            }
            InitSpec::Tent { amplitude } => {
                let a = *amplitude;
                InitialData::Profile(match geometry {
                    Geometry::Interval { length } => {
                        Profile::new(move |x, _| a * x.min(length - x))
                    }
                    Geometry::Rectangle { lx, ly } => {
                        Profile::new(move |x, y| a * x.min(lx - x) * y.min(ly - y))
                    }
                })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub model: Model,
    pub geometry: Geometry,
    pub modes: usize,
    pub method: Method,
    pub dt: f64,
    pub t_end: f64,
    pub sample_stride: usize,
    pub u0: InitSpec,
    pub u1: InitSpec,
    pub trace_path: String,
    pub report_path: String,
    pub plot_script: Option<String>,
    pub resolvent_tol: f64,
    pub identity_tol: f64,
    /// Treat an insufficient horizon for the decay check as a failure.
    pub decay_check: bool,
}

const KEYS: &[&str] = &[
    "model",
    "domain.geometry",
    "domain.length",
    "domain.lx",
    "domain.ly",
    "modes",
    "integrator.method",
    "integrator.dt",
    "integrator.t_end",
    "integrator.alpha",
    "sample_stride",
    "init.u0",
    "init.u1",
    "output.trace_path",
    "output.report_path",
    "output.plot_script",
    "tolerances.resolvent",
    "tolerances.identity",
    "checks.decay",
];

struct Entries {
    values: BTreeMap<&'static str, (usize, String)>,
    errors: Vec<ConfigError>,
}

impl Entries {
    fn err(&mut self, line: Option<usize>, kind: ConfigErrorKind, message: String) {
        self.errors.push(ConfigError { line, kind, message });
    }

    fn take(&mut self, key: &'static str) -> Option<(usize, String)> {
        self.values.remove(key)
    }

    fn required(&mut self, key: &'static str) -> Option<(usize, String)> {
        let v = self.take(key);
        if v.is_none() {
            self.err(None, ConfigErrorKind::MissingKey, format!("missing required key `{key}`"));
        }
        v
    }

    fn number<T: std::str::FromStr>(&mut self, key: &str, entry: Option<(usize, String)>, what: &str) -> Option<(usize, T)> {
        let (line, raw) = entry?;
        match raw.parse::<T>() {
            Ok(v) => Some((line, v)),
            Err(_) => {
                self.err(
                    Some(line),
                    ConfigErrorKind::TypeMismatch,
                    format!("`{key}` expects {what}, got `{raw}`"),
                );
                None
            }
        }
    }

    fn positive(&mut self, key: &str, entry: Option<(usize, String)>) -> Option<f64> {
        let (line, v) = self.number::<f64>(key, entry, "a real number")?;
        if v.is_finite() && v > 0.0 {
            Some(v)
        } else {
            self.err(
                Some(line),
                ConfigErrorKind::RangeViolation,
                format!("`{key}` must be positive and finite, got {v}"),
            );
            None
        }
    }

    fn count(&mut self, key: &str, entry: Option<(usize, String)>) -> Option<usize> {
        let (line, v) = self.number::<i64>(key, entry, "an integer")?;
        if v >= 1 {
            Some(v as usize)
        } else {
            self.err(
                Some(line),
                ConfigErrorKind::RangeViolation,
                format!("`{key}` must be at least 1, got {v}"),
            );
            None
        }
    }
}

/// Parses and validates a configuration, collecting all errors.
pub fn parse_config(text: &str) -> std::result::Result<SimConfig, ConfigErrors> {
    let mut e = Entries {
        values: BTreeMap::new(),
        errors: Vec::new(),
    };
    for (idx, raw_line) in text.lines().enumerate() {
        let line = idx + 1;
        let content = match raw_line.find('#') {
            Some(p) => &raw_line[..p],
            None => raw_line,
        }
        .trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            e.err(Some(line), ConfigErrorKind::Syntax, format!("expected `key = value`, got `{content}`"));
            continue;
        };
        let (key, value) = (key.trim(), value.trim());
        let Some(&known) = KEYS.iter().find(|k| **k == key) else {
            e.err(Some(line), ConfigErrorKind::UnknownKey, format!("unknown key `{key}`"));
            continue;
        };
        if value.is_empty() {
            e.err(Some(line), ConfigErrorKind::Syntax, format!("`{key}` has an empty value"));
            continue;
        }
        if let Some((first, _)) = e.values.get(known) {
            let msg = format!("`{key}` already set on line {first}");
            e.err(Some(line), ConfigErrorKind::DuplicateKey, msg);
            continue;
        }
        e.values.insert(known, (line, value.to_string()));
    }

    let model = e.required("model").and_then(|(line, v)| {
        Model::from_name(&v).or_else(|| {
            e.err(Some(line), ConfigErrorKind::TypeMismatch, format!("unknown model `{v}`"));
            None
        })
    });

    let geometry_kind = match e.take("domain.geometry") {
        None => Some("interval".to_string()),
        Some((line, v)) if v == "interval" || v == "rectangle" => {
            let _ = line;
            Some(v)
        }
        Some((line, v)) => {
            e.err(Some(line), ConfigErrorKind::TypeMismatch, format!("unknown geometry `{v}`"));
            None
        }
    };
    let length = e.take("domain.length");
    let lx = e.take("domain.lx");
    let ly = e.take("domain.ly");
    let geometry = match geometry_kind.as_deref() {
        Some("interval") => {
            for (key, extra) in [("domain.lx", &lx), ("domain.ly", &ly)] {
                if let Some((line, _)) = extra {
                    e.err(Some(*line), ConfigErrorKind::Conflict, format!("`{key}` only applies to rectangles"));
                }
            }
            if length.is_none() {
                e.err(None, ConfigErrorKind::MissingKey, "missing required key `domain.length`".into());
            }
            e.positive("domain.length", length).map(|length| Geometry::Interval { length })
        }
        Some(_) => {
            if let Some((line, _)) = &length {
                e.err(Some(*line), ConfigErrorKind::Conflict, "`domain.length` only applies to intervals; use domain.lx/domain.ly".into());
            }
            for (key, v) in [("domain.lx", &lx), ("domain.ly", &ly)] {
                if v.is_none() {
                    e.err(None, ConfigErrorKind::MissingKey, format!("missing required key `{key}`"));
                }
            }
            let lx = e.positive("domain.lx", lx);
            let ly = e.positive("domain.ly", ly);
            lx.zip(ly).map(|(lx, ly)| Geometry::Rectangle { lx, ly })
        }
        None => None,
    };

    let modes_entry = e.required("modes");
    let modes = e.count("modes", modes_entry);

    let method_entry = e.required("integrator.method");
    let alpha_entry = e.take("integrator.alpha");
    let method = match method_entry {
        Some((_, v)) if v == "direct_rk4" || v == "implicit_euler_resolvent" => {
            if let Some((line, _)) = &alpha_entry {
                e.err(Some(*line), ConfigErrorKind::Conflict, "`integrator.alpha` only applies to yosida_rk4".into());
            }
            Some(if v == "direct_rk4" {
                Method::DirectRk4
            } else {
                Method::ImplicitEuler
            })
        }
        Some((_, v)) if v == "yosida_rk4" => {
            if alpha_entry.is_none() {
                e.err(None, ConfigErrorKind::MissingKey, "yosida_rk4 requires `integrator.alpha`".into());
            }
            e.positive("integrator.alpha", alpha_entry)
                .map(|alpha| Method::YosidaRk4 { alpha })
        }
        Some((line, v)) => {
            e.err(Some(line), ConfigErrorKind::TypeMismatch, format!("unknown integrator `{v}`"));
            None
        }
        None => None,
    };

    let dt_entry = e.required("integrator.dt");
    let dt = e.positive("integrator.dt", dt_entry);
    let t_end_line = e.values.get("integrator.t_end").map(|(l, _)| *l);
    let t_end_entry = e.required("integrator.t_end");
    let t_end = e.positive("integrator.t_end", t_end_entry);
    if let (Some(dt), Some(t_end)) = (dt, t_end) {
        if dt > t_end {
            e.err(t_end_line, ConfigErrorKind::RangeViolation, format!("integrator.dt = {dt} exceeds integrator.t_end = {t_end}"));
        }
    }

    let sample_stride = match e.take("sample_stride") {
        None => Some(1),
        entry => e.count("sample_stride", entry),
    };

    let mode_total = match (geometry, modes) {
        (Some(Geometry::Rectangle { .. }), Some(m)) => m.checked_mul(m),
        (_, m) => m,
    };
    let init = |key: &'static str, e: &mut Entries| {
        let (line, v) = e.required(key)?;
        let spec = InitSpec::parse(&v)
            .map_err(|msg| e.err(Some(line), ConfigErrorKind::TypeMismatch, format!("`{key}`: {msg}")))
            .ok()?;
        match (spec.max_index(), mode_total) {
            (Some(k), Some(total)) if k > total => {
                e.err(
                    Some(line),
                    ConfigErrorKind::RangeViolation,
                    format!("`{key}` uses mode {k} but only {total} modes are kept"),
                );
                None
            }
            _ => Some(spec),
        }
    };
    let u0 = init("init.u0", &mut e);
    let u1 = init("init.u1", &mut e);

    let trace_path = e.take("output.trace_path").map_or_else(|| "trace.csv".to_string(), |(_, v)| v);
    let report_path = e.take("output.report_path").map_or_else(|| "report.txt".to_string(), |(_, v)| v);
    let plot_script = e.take("output.plot_script").map(|(_, v)| v);

    let resolvent_tol = match e.take("tolerances.resolvent") {
        None => Some(DEFAULT_TOL),
        entry => e.positive("tolerances.resolvent", entry),
    };
    let identity_tol = match e.take("tolerances.identity") {
        None => Some(1e-6),
        entry => e.positive("tolerances.identity", entry),
    };
    let decay_check = match e.take("checks.decay") {
        None => Some(false),
        Some((_, v)) if v == "true" => Some(true),
        Some((_, v)) if v == "false" => Some(false),
        Some((line, v)) => {
            e.err(Some(line), ConfigErrorKind::TypeMismatch, format!("`checks.decay` expects true or false, got `{v}`"));
            None
        }
    };

    if let (Some(Model::BtPrototype), Some(m @ (Method::ImplicitEuler | Method::YosidaRk4 { .. }))) = (model, method) {
        e.err(None, ConfigErrorKind::Conflict, format!("{} is only available for kelvin_voigt", m.name()));
    }

    if !e.errors.is_empty() {
        e.errors.sort_by_key(|err| err.line.unwrap_or(usize::MAX));
        return Err(ConfigErrors(e.errors));
    }
    Ok(SimConfig {
        model: model.unwrap(),
        geometry: geometry.unwrap(),
        modes: modes.unwrap(),
        method: method.unwrap(),
        dt: dt.unwrap(),
        t_end: t_end.unwrap(),
        sample_stride: sample_stride.unwrap(),
        u0: u0.unwrap(),
        u1: u1.unwrap(),
        trace_path,
        report_path,
        plot_script,
        resolvent_tol: resolvent_tol.unwrap(),
        identity_tol: identity_tol.unwrap(),
        decay_check: decay_check.unwrap(),
    })
}

impl SimConfig {
    /// Canonical text form; `parse_config(render())` reproduces `self`.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        put("model", self.model.name().into());
        match self.geometry {
            Geometry::Interval { length } => {
                put("domain.geometry", "interval".into());
                put("domain.length", format!("{length:?}"));
            }
            Geometry::Rectangle { lx, ly } => {
                put("domain.geometry", "rectangle".into());
                put("domain.lx", format!("{lx:?}"));
                put("domain.ly", format!("{ly:?}"));
            }
        }
        put("modes", self.modes.to_string());
        put("integrator.method", self.method.name().into());
        if let Method::YosidaRk4 { alpha } = self.method {
            put("integrator.alpha", format!("{alpha:?}"));
        }
        put("integrator.dt", format!("{:?}", self.dt));
        put("integrator.t_end", format!("{:?}", self.t_end));
        put("sample_stride", self.sample_stride.to_string());
        put("init.u0", self.u0.render());
        put("init.u1", self.u1.render());
        put("output.trace_path", self.trace_path.clone());
        put("output.report_path", self.report_path.clone());
        if let Some(p) = &self.plot_script {
            put("output.plot_script", p.clone());
        }
        put("tolerances.resolvent", format!("{:?}", self.resolvent_tol));
        put("tolerances.identity", format!("{:?}", self.identity_tol));
        put("checks.decay", self.decay_check.to_string());
        out
    }

    /// First 16 hex digits of the SHA-256 of the canonical text.
    pub fn fingerprint(&self) -> String {
        let digest = Sha256::digest(self.render().as_bytes());
        hex::encode(&digest[..8])
    }

    pub fn domain(&self) -> Result<SpectralDomain> {
        SpectralDomain::new(self.geometry, self.modes)
    }

    pub fn initial_state(&self, domain: &SpectralDomain) -> Result<ModalState> {
        domain.project(
            &self.u0.to_initial_data(self.geometry),
            &self.u1.to_initial_data(self.geometry),
        )
    }

    pub fn integrator_spec(&self) -> IntegratorSpec {
        let mut spec = IntegratorSpec::new(self.method, self.dt, self.t_end, self.sample_stride);
        spec.resolvent_tol = self.resolvent_tol;
        spec
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ConfigErrorKind::*;

    const MINIMAL: &str = "\
model = kelvin_voigt
domain.length = 1
modes = 4
integrator.method = direct_rk4
integrator.dt = 0.001
integrator.t_end = 1
init.u0 = mode:1:1.0
init.u1 = zero
";

    #[test]
    fn minimal_config_parses_with_defaults() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.model, Model::KelvinVoigt);
        assert_eq!(c.geometry, Geometry::Interval { length: 1.0 });
        assert_eq!(c.sample_stride, 1);
        assert_eq!(c.u0, InitSpec::Mode { index: 1, amplitude: 1.0 });
        assert_eq!(c.resolvent_tol, DEFAULT_TOL);
        assert!(!c.decay_check);
        assert_eq!(parse_config(&c.render()).unwrap(), c);
    }

    #[test]
    fn zero_modes_is_a_range_violation_at_its_line() {
        let text = MINIMAL.replace("modes = 4", "modes = 0");
        let errs = parse_config(&text).unwrap_err();
        assert_eq!(errs.0.len(), 1);
        assert_eq!(errs.0[0].kind, RangeViolation);
        assert_eq!(errs.0[0].line, Some(3));
    }

    #[test]
    fn yosida_without_alpha_is_missing_key() {
        let text = MINIMAL.replace("direct_rk4", "yosida_rk4");
        let errs = parse_config(&text).unwrap_err();
        assert_eq!(errs.kinds(), vec![MissingKey]);
    }

    #[test]
    fn all_errors_are_reported() {
        let text = "\
model = kelvin_voigt
colour = blue
modes = many
integrator.method = direct_rk4
integrator.dt = -1
integrator.t_end = 1
init.u0 = zero
init.u0 = zero
this line has no equals sign
";
        let errs = parse_config(text).unwrap_err();
        let kinds = errs.kinds();
        for k in [UnknownKey, TypeMismatch, RangeViolation, DuplicateKey, Syntax, MissingKey] {
            assert!(kinds.contains(&k), "{k:?} missing from {errs}");
        }
        assert_eq!(errs.0.iter().find(|e| e.kind == UnknownKey).unwrap().line, Some(2));
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let text = format!("# header\n\n{}  # trailing\n", MINIMAL.trim_end());
        assert!(parse_config(&text).is_ok());
    }

    #[test]
    fn init_specs_round_trip() {
        for s in ["zero", "mode:3:-0.25", "modes:1:2.0,3:0.5", "parabola:0.92", "tent:1e-5"] {
            let parsed = InitSpec::parse(s).unwrap();
            assert_eq!(InitSpec::parse(&parsed.render()).unwrap(), parsed);
        }
        for bad in ["mode:0:1", "modes:", "parabola:x", "wave:1", "mode:1:inf"] {
            assert!(InitSpec::parse(bad).is_err(), "{bad}");
        }
    }
}
