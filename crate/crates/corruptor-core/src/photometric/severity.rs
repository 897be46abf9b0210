//! Per-kind, per-level corruption parameters.
//!
//! The table ships as a plain-text fixture (one line per kind and level,
//! `kind level param=value ...`) embedded at build time. A file in the same
//! format can override it at runtime; Fourier severities are compiled into
//! [`crate::fourier`] and a table may only restate them verbatim.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::fourier::{AMPLITUDE_BETA, HIGH_PASS_D_FRACTION, PHASE_ALPHA};
use crate::photometric::{CorruptionKind, Severity};

const BUILTIN: &str = include_str!("../../fixtures/severity_table.txt");

type Params = Vec<(String, f64)>;

/// Corruption parameters for every kind and severity level.
#[derive(Debug, Clone, PartialEq)]
pub struct SeverityTable {
    entries: BTreeMap<CorruptionKind, [Params; 5]>,
}

impl SeverityTable {
    /// The table embedded in the binary.
    pub fn builtin() -> &'static SeverityTable {
        static TABLE: OnceLock<SeverityTable> = OnceLock::new();
        TABLE.get_or_init(|| {
            SeverityTable::parse(BUILTIN).expect("embedded severity table is valid")
        })
    }

    /// Parses the fixture format. Blank lines and `#` comments are skipped.
    /// Every non-Fourier kind must end up with exactly 5 levels.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries: BTreeMap<CorruptionKind, [Params; 5]> = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line.split_whitespace();
            let bad = |msg: String| Error::Config(format!("severity table line {}: {msg}", lineno + 1));
            let kind: CorruptionKind = fields
                .next()
                .ok_or_else(|| bad("missing kind".into()))?
                .parse()
                .map_err(|e: Error| bad(e.to_string()))?;
            let level: Severity = fields
                .next()
                .ok_or_else(|| bad("missing level".into()))?
                .parse()
                .map_err(|e: Error| bad(e.to_string()))?;
            let mut params = Params::new();
            for pair in fields {
                let (name, value) = pair
                    .split_once('=')
                    .ok_or_else(|| bad(format!("`{pair}` is not param=value")))?;
                let value: f64 = value
                    .parse()
                    .map_err(|_| bad(format!("`{value}` is not a number")))?;
                if !value.is_finite() {
                    return Err(bad(format!("`{value}` is not finite")));
                }
                params.push((name.to_string(), value));
            }
            if params.is_empty() {
                return Err(bad("no parameters".into()));
            }
            let slot = &mut entries.entry(kind).or_default()[level.index()];
            if !slot.is_empty() {
                return Err(bad(format!("duplicate entry for {kind} level {level}")));
            }
            *slot = params;
        }
        for kind in CorruptionKind::ALL {
            let levels = entries.get(&kind);
            if kind.is_fourier() {
                if let Some(levels) = levels {
                    validate_fourier(kind, levels)?;
                }
                continue;
            }
            let levels = levels.ok_or_else(|| {
                Error::Config(format!("severity table is missing kind {kind}"))
            })?;
            if let Some(i) = levels.iter().position(|p| p.is_empty()) {
                return Err(Error::Config(format!(
                    "severity table is missing {kind} level {}",
                    i + 1
                )));
            }
        }
        Ok(SeverityTable { entries })
    }

    /// Reads and parses a table file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::read(path, e))?;
        SeverityTable::parse(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Renders the table in the fixture format. Values use the shortest
    /// decimal form that parses back to the identical f64.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (kind, levels) in &self.entries {
            for (i, params) in levels.iter().enumerate() {
                if params.is_empty() {
                    continue;
                }
                write!(out, "{kind} {}", i + 1).unwrap();
                for (name, value) in params {
                    write!(out, " {name}={value}").unwrap();
                }
                out.push('\n');
            }
        }
        out
    }

    /// All parameters for one kind and level.
    pub fn params(&self, kind: CorruptionKind, level: Severity) -> Result<&[(String, f64)]> {
        let levels = self
            .entries
            .get(&kind)
            .ok_or_else(|| Error::Domain(format!("no severity entries for {kind}")))?;
        let params = &levels[level.index()];
        if params.is_empty() {
            return Err(Error::Domain(format!("no severity entry for {kind} level {level}")));
        }
        Ok(params)
    }

    /// One named parameter for a kind and level.
    pub fn param(&self, kind: CorruptionKind, level: Severity, name: &str) -> Result<f64> {
        self.params(kind, level)?
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| *v)
            .ok_or_else(|| {
                Error::Domain(format!("{kind} level {level} has no parameter `{name}`"))
            })
    }
}

fn validate_fourier(kind: CorruptionKind, levels: &[Params; 5]) -> Result<()> {
    let (name, expected) = match kind {
        CorruptionKind::PhaseScaling => ("alpha", &PHASE_ALPHA),
        CorruptionKind::ConstantAmplitude => ("beta", &AMPLITUDE_BETA),
        CorruptionKind::HighPass => ("d_fraction", &HIGH_PASS_D_FRACTION),
        _ => unreachable!(),
    };
    for (i, params) in levels.iter().enumerate() {
        if params.is_empty() {
            continue;
        }
        let matches = params.len() == 1 && params[0].0 == name && params[0].1 == expected[i];
        if !matches {
            return Err(Error::Config(format!(
                "{kind} severities are fixed; level {} must read {name}={}",
                i + 1,
                expected[i]
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_parses_and_round_trips() {
        let table = SeverityTable::builtin();
        let rendered = table.render();
        let reparsed = SeverityTable::parse(&rendered).unwrap();
        assert_eq!(*table, reparsed);
        assert_eq!(rendered, table.render());
    }

    #[test]
    fn builtin_covers_every_kind_and_level() {
        let table = SeverityTable::builtin();
        for kind in CorruptionKind::ALL {
            for level in Severity::ALL {
                assert!(
                    table.params(kind, level).is_ok(),
                    "missing {kind} level {level}"
                );
            }
        }
    }

    #[test]
    fn noise_sigma_levels_are_increasing() {
        let table = SeverityTable::builtin();
        let mut last = 0.0;
        for level in Severity::ALL {
            let sigma = table
                .param(CorruptionKind::GaussianNoise, level, "sigma")
                .unwrap();
            assert!(sigma > last);
            last = sigma;
        }
    }

    #[test]
    fn unknown_kind_rejected() {
        let err = SeverityTable::parse("vignette 1 amount=0.5").unwrap_err();
        assert!(err.to_string().contains("vignette"));
    }

    #[test]
    fn missing_level_rejected() {
        let table = SeverityTable::builtin();
        let mut text = table.render();
        let first = text.lines().next().unwrap().to_string();
        text = text.replacen(&format!("{first}\n"), "", 1);
        let err = SeverityTable::parse(&text).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn duplicate_entry_rejected() {
        let table = SeverityTable::builtin();
        let mut text = table.render();
        let first = text.lines().next().unwrap().to_string();
        text.push_str(&first);
        text.push('\n');
        assert!(SeverityTable::parse(&text).is_err());
    }

    #[test]
    fn fourier_overrides_must_match_compiled_constants() {
        let table = SeverityTable::builtin();
        let mut text = table.render();
        text = text.replace("phase_scaling 3 alpha=0.7", "phase_scaling 3 alpha=0.2");
        let err = SeverityTable::parse(&text).unwrap_err();
        assert!(err.to_string().contains("fixed"));
    }
}
