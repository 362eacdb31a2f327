//! TOML experiment files.
//!
//! ```toml
//! n = 10
//! horizons = [2000, 4000, 6000, 8000, 10000]
//! replicates = 200
//! master_seed = 7
//! variant = { kind = "restricted", l = 3 }
//! instances = { source = "simplex" }
//!
//! [[policies]]
//! kind = "trcb"
//! c_shrink = 7e-5
//! v_min = 0.02
//!
//! [[policies]]
//! kind = "uniform"
//! ```
//!
//! `trcb` also takes `anchor_reference = false` to maximize over all `l`-subsets instead of
//! those containing the reference arm.

use std::collections::HashSet;
use std::ops::Range;
use std::path::Path;

use prebandit::{InstanceSource, PolicySpec, SShaped, SimulationConfig, Variant};
use serde::Deserialize;
use toml::Spanned;

use crate::error::CliError;

// Serde ignores extra keys next to the tag of a unit variant, so the file forms of
// `Variant` and `PolicySpec` use empty struct variants instead.

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum VariantEntry {
    Restricted { l: usize },
    Flexible {},
}

impl From<VariantEntry> for Variant {
    fn from(v: VariantEntry) -> Self {
        match v {
            VariantEntry::Restricted { l } => Variant::Restricted { l },
            VariantEntry::Flexible {} => Variant::Flexible,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PolicyEntry {
    Trcb {
        c_shrink: f64,
        v_min: f64,
        #[serde(default)]
        anchor_reference: Option<bool>,
    },
    Cbr {
        #[serde(default)]
        sigma: Option<SShaped>,
    },
    Uniform {},
    Oracle {},
}

impl From<PolicyEntry> for PolicySpec {
    fn from(p: PolicyEntry) -> Self {
        match p {
            PolicyEntry::Trcb {
                c_shrink,
                v_min,
                anchor_reference,
            } => PolicySpec::Trcb {
                c_shrink,
                v_min,
                anchor_reference: anchor_reference.unwrap_or(true),
            },
            PolicyEntry::Cbr { sigma } => PolicySpec::Cbr {
                sigma: sigma.unwrap_or(SShaped::Clamp),
            },
            PolicyEntry::Uniform {} => PolicySpec::Uniform,
            PolicyEntry::Oracle {} => PolicySpec::Oracle,
        }
    }
}

/// File form of [`SimulationConfig`]. Unknown keys are rejected.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub variant: Spanned<toml::Table>,
    pub n: Spanned<usize>,
    pub horizons: Spanned<Vec<u64>>,
    pub replicates: Spanned<usize>,
    pub instances: Spanned<InstanceSource>,
    pub policies: Spanned<Vec<Spanned<toml::Table>>>,
    pub master_seed: u64,
    #[serde(default)]
    pub retain_traces: bool,
}

fn line_of(text: &str, span: Range<usize>) -> usize {
    text[..span.start.min(text.len())].matches('\n').count() + 1
}

/// Narrows `span` to the key named in an "unknown field" message, when it can be found.
fn key_span(text: &str, span: Range<usize>, message: &str) -> Range<usize> {
    let key = message
        .strip_prefix("unknown field `")
        .and_then(|rest| rest.split('`').next());
    let Some(key) = key else { return span };
    // Array-of-tables entries are spanned by their header only; search up to the next header.
    let end = text[span.end..]
        .find("\n[")
        .map_or(text.len(), |i| span.end + i)
        .max(span.end);
    let body = &text[span.start..end];
    let found = body.match_indices(key).find(|&(i, _)| {
        let before = body[..i].chars().next_back();
        let after = body[i + key.len()..].trim_start();
        matches!(before, None | Some('\n' | ' ' | '{' | ',' | '\t')) && after.starts_with('=')
    });
    match found {
        Some((i, _)) => span.start + i..span.start + i + key.len(),
        None => span,
    }
}

/// Deserializes a kind-tagged table, locating errors inside it.
fn entry<T: serde::de::DeserializeOwned>(
    raw: &Spanned<toml::Table>,
    text: &str,
    at: &impl Fn(Range<usize>, String) -> CliError,
) -> Result<T, CliError> {
    raw.get_ref()
        .clone()
        .try_into()
        .map_err(|e: toml::de::Error| {
            let message = e.message().to_string();
            at(key_span(text, raw.span(), &message), message)
        })
}

/// Parses and validates an experiment document; errors name the offending line.
pub fn parse_config(text: &str, path: &Path) -> Result<SimulationConfig, CliError> {
    let at = |span: Range<usize>, message: String| CliError::Config {
        path: path.to_path_buf(),
        line: line_of(text, span),
        message,
    };
    let spec: ExperimentSpec = toml::from_str(text).map_err(|e| {
        let message = e.message().to_string();
        match e.span() {
            Some(span) => at(span, message),
            None => CliError::ConfigFile {
                path: path.to_path_buf(),
                message,
            },
        }
    })?;

    let n = *spec.n.get_ref();
    let variant = Variant::from(entry::<VariantEntry>(&spec.variant, text, &at)?);
    if n < 2 {
        return Err(at(spec.n.span(), format!("n must be at least 2, got {n}")));
    }
    variant
        .validate(n)
        .map_err(|e| at(spec.variant.span(), e.to_string()))?;
    let horizons = spec.horizons.get_ref();
    if horizons.is_empty() || horizons[0] == 0 || horizons.windows(2).any(|w| w[0] >= w[1]) {
        return Err(at(
            spec.horizons.span(),
            "horizons must be positive and strictly ascending".into(),
        ));
    }
    if *spec.replicates.get_ref() == 0 {
        return Err(at(
            spec.replicates.span(),
            "replicates must be at least 1".into(),
        ));
    }
    if let InstanceSource::Explicit { scores } = spec.instances.get_ref() {
        prebandit::ScoreVector::new(scores.clone())
            .map_err(|e| at(spec.instances.span(), e.to_string()))?;
        if scores.len() != n {
            return Err(at(
                spec.instances.span(),
                format!("{} explicit scores for n = {n}", scores.len()),
            ));
        }
    }
    let policies = spec.policies.get_ref();
    if policies.is_empty() {
        return Err(at(spec.policies.span(), "no policies configured".into()));
    }
    let mut labels = HashSet::new();
    let mut specs = Vec::with_capacity(policies.len());
    for p in policies {
        let spec = PolicySpec::from(entry::<PolicyEntry>(p, text, &at)?);
        spec.validate(n, variant)
            .map_err(|e| at(p.span(), e.to_string()))?;
        if !labels.insert(spec.label()) {
            return Err(at(
                p.span(),
                format!("policy {} listed twice", spec.label()),
            ));
        }
        specs.push(spec);
    }

    let config = SimulationConfig {
        variant,
        n,
        horizons: spec.horizons.into_inner(),
        replicates: spec.replicates.into_inner(),
        instances: spec.instances.into_inner(),
        policies: specs,
        master_seed: spec.master_seed,
        retain_traces: spec.retain_traces,
    };
    config.validate()?;
    Ok(config)
}

pub fn load_config(path: &Path) -> Result<SimulationConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
    parse_config(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = r#"
n = 10
horizons = [2000, 4000]
replicates = 3
master_seed = 1
variant = { kind = "restricted", l = 3 }
instances = { source = "simplex" }

[[policies]]
kind = "trcb"
c_shrink = 7e-5
v_min = 0.02

[[policies]]
kind = "uniform"
"#;

    fn parse(text: &str) -> Result<SimulationConfig, CliError> {
        parse_config(text, Path::new("exp.toml"))
    }

    fn error_line(text: &str) -> usize {
        match parse(text) {
            Err(CliError::Config { line, .. }) => line,
            other => panic!("expected a located error, got {other:?}"),
        }
    }

    #[test]
    fn parses_documented_example() {
        let c = parse(GOOD).unwrap();
        assert_eq!(c.n, 10);
        assert_eq!(c.variant, Variant::Restricted { l: 3 });
        assert_eq!(c.policies.len(), 2);
        assert_eq!(
            c.policies[0],
            PolicySpec::Trcb {
                c_shrink: 7e-5,
                v_min: 0.02,
                anchor_reference: true,
            }
        );
    }

    #[test]
    fn unknown_keys_are_rejected_with_line() {
        assert_eq!(
            error_line(&GOOD.replace("master_seed = 1", "master_seed = 1\nseeed = 2")),
            6
        );
        assert_eq!(
            error_line(&GOOD.replace("kind = \"uniform\"", "kind = \"uniform\"\nspeed = 3")),
            16
        );
        assert_eq!(error_line(&GOOD.replace("l = 3 }", "l = 3, k = 1 }")), 6);
    }

    #[test]
    fn semantic_errors_point_at_the_key() {
        assert_eq!(
            error_line(&GOOD.replace("replicates = 3", "replicates = 0")),
            4
        );
        assert_eq!(error_line(&GOOD.replace("[2000, 4000]", "[4000, 2000]")), 3);
        assert_eq!(error_line(&GOOD.replace("l = 3", "l = 11")), 6);
        assert_eq!(
            error_line(&GOOD.replace("c_shrink = 7e-5", "c_shrink = 0.7")),
            9
        );
        assert_eq!(
            error_line(&GOOD.replace(
                "kind = \"uniform\"",
                "kind = \"trcb\"\nc_shrink = 0.1\nv_min = 0.1"
            )),
            14
        );
    }

    #[test]
    fn missing_key_is_reported() {
        assert!(parse(&GOOD.replace("master_seed = 1\n", "")).is_err());
    }

    #[test]
    fn explicit_and_flexible() {
        let text = r#"
n = 3
horizons = [10]
replicates = 1
master_seed = 0
variant = { kind = "flexible" }
instances = { source = "explicit", scores = [1.0, 0.7, 0.7] }
policies = [{ kind = "cbr" }, { kind = "cbr", sigma = { kind = "arctan", gamma = 2.0 } }, { kind = "oracle" }]
"#;
        let c = parse(text).unwrap();
        assert_eq!(c.policies.len(), 3);
        assert_eq!(
            error_line(&text.replace("[1.0, 0.7, 0.7]", "[1.0, 0.7]")),
            7
        );
        assert_eq!(
            error_line(&text.replace("[1.0, 0.7, 0.7]", "[1.0, -0.7, 0.7]")),
            7
        );
        assert_eq!(
            error_line(&text.replace(
                "{ kind = \"oracle\" }",
                "{ kind = \"trcb\", c_shrink = 0.1, v_min = 0.1 }"
            )),
            8
        );
    }
}
