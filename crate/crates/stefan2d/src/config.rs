//! Run configuration files: a flat key-value format with one scenario
//! block, parsed with line-numbered diagnostics.
//!
//! ```text
//! scheme linear
//! t_end 1.0
//! level 2             # sets tau, n_fine, n_coarse, k_gamma defaults
//! out_dir runs/demo
//!
//! scenario two_circles
//! beta -1 0 1
//! radii 2 3
//! ```
//!
//! Explicit keys always override what `level` implies.

use crate::cluster::{ClusterMesh, ClusterTopology};
use crate::coupling::IntegrationMode;
use crate::evolution::{RunConfig, Scheme};
use crate::geometry::Vec2;
use crate::scenario::{self, level_params};
use crate::{Error, Result};
use std::path::PathBuf;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioName {
    TwoCircles,
    ThreeCircles,
    TwoDisks,
    DoubleBubble,
    DoubleBubbleTensions,
    DbPlusDisk,
    Custom,
}

impl ScenarioName {
    pub fn parse(s: &str) -> Option<ScenarioName> {
        match s {
            "two_circles" => Some(ScenarioName::TwoCircles),
            "three_circles" => Some(ScenarioName::ThreeCircles),
            "two_disks" => Some(ScenarioName::TwoDisks),
            "double_bubble" => Some(ScenarioName::DoubleBubble),
            "double_bubble_tensions" => Some(ScenarioName::DoubleBubbleTensions),
            "db_plus_disk" => Some(ScenarioName::DbPlusDisk),
            "custom" => Some(ScenarioName::Custom),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            ScenarioName::TwoCircles => "two_circles",
            ScenarioName::ThreeCircles => "three_circles",
            ScenarioName::TwoDisks => "two_disks",
            ScenarioName::DoubleBubble => "double_bubble",
            ScenarioName::DoubleBubbleTensions => "double_bubble_tensions",
            ScenarioName::DbPlusDisk => "db_plus_disk",
            ScenarioName::Custom => "custom",
        }
    }
}

/// A named scenario with optional parameter overrides. Unset fields take
/// the documented defaults of the named configuration.
#[derive(Debug, Clone)]
pub struct ScenarioSpec {
    pub name: ScenarioName,
    pub betas: Option<Vec<f64>>,
    pub tensions: Option<Vec<f64>>,
    pub radii: Option<Vec<f64>>,
    pub k_gamma: Option<usize>,
    pub lobe_area: Option<f64>,
    pub disk_radius: Option<f64>,
    pub cluster_file: Option<PathBuf>,
}

impl ScenarioSpec {
    pub fn new(name: ScenarioName) -> Self {
        ScenarioSpec {
            name,
            betas: None,
            tensions: None,
            radii: None,
            k_gamma: None,
            lobe_area: None,
            disk_radius: None,
            cluster_file: None,
        }
    }

    fn betas3(&self, default: [f64; 3]) -> Result<[f64; 3]> {
        match &self.betas {
            None => Ok(default),
            Some(v) if v.len() == 3 => Ok([v[0], v[1], v[2]]),
            Some(v) => Err(Error::DimensionMismatch(format!(
                "scenario needs 3 beta values, got {}",
                v.len()
            ))),
        }
    }

    fn tensions_n<const N: usize>(&self, default: [f64; N]) -> Result<[f64; N]> {
        match &self.tensions {
            None => Ok(default),
            Some(v) if v.len() == N => {
                let mut out = default;
                out.copy_from_slice(v);
                Ok(out)
            }
            Some(v) => Err(Error::DimensionMismatch(format!(
                "scenario needs {N} tensions, got {}",
                v.len()
            ))),
        }
    }

    /// Builds the initial cluster. `k_gamma` falls back to the given level
    /// default when unset.
    pub fn build(&self, k_default: usize) -> Result<(ClusterTopology, ClusterMesh)> {
        let k = self.k_gamma.unwrap_or(k_default);
        match self.name {
            ScenarioName::TwoCircles => {
                let radii = match &self.radii {
                    None => [2.0, 3.0],
                    Some(v) if v.len() == 2 => [v[0], v[1]],
                    Some(v) => {
                        return Err(Error::DimensionMismatch(format!(
                            "two_circles needs 2 radii, got {}",
                            v.len()
                        )))
                    }
                };
                scenario::two_circles(
                    self.betas3([-1.0, 0.0, 1.0])?,
                    self.tensions_n([1.0, 1.0])?,
                    radii,
                    k,
                )
            }
            ScenarioName::ThreeCircles => {
                let radii = match &self.radii {
                    None => [1.0, 2.0, 3.0],
                    Some(v) if v.len() == 3 => [v[0], v[1], v[2]],
                    Some(v) => {
                        return Err(Error::DimensionMismatch(format!(
                            "three_circles needs 3 radii, got {}",
                            v.len()
                        )))
                    }
                };
                scenario::three_circles(
                    self.betas3([-1.0, 1.0, 0.0])?,
                    self.tensions_n([1.0, 1.0, 1.0])?,
                    radii,
                    k.max(3 * 3),
                )
            }
            ScenarioName::TwoDisks => {
                let radii = match &self.radii {
                    None => [1.0, 0.5],
                    Some(v) if v.len() == 2 => [v[0], v[1]],
                    Some(v) => {
                        return Err(Error::DimensionMismatch(format!(
                            "two_disks needs 2 radii, got {}",
                            v.len()
                        )))
                    }
                };
                scenario::two_disks(
                    self.betas3([0.0, -1.0, 1.0])?,
                    self.tensions_n([1.0, 1.0])?,
                    radii,
                    [Vec2::new(-2.0, 0.0), Vec2::new(2.0, 0.0)],
                    k,
                )
            }
            ScenarioName::DoubleBubble | ScenarioName::DoubleBubbleTensions => {
                let default_tensions = if self.name == ScenarioName::DoubleBubbleTensions {
                    [1.75, 1.0, 1.0]
                } else {
                    [1.0, 1.0, 1.0]
                };
                let area = self.lobe_area.unwrap_or(3.139);
                // arcs and chord share one spacing; the chord carries
                // roughly 40% of an arc's vertex count
                let k_arc = (2 * k / 5).max(12);
                let k_chord = (k_arc * 2 / 5).max(6);
                scenario::standard_double_bubble(
                    area,
                    self.betas3([-1.0, 0.0, 1.0])?,
                    self.tensions_n(default_tensions)?,
                    k_arc,
                    k_chord,
                )
            }
            ScenarioName::DbPlusDisk => {
                let area = self.lobe_area.unwrap_or(3.139);
                let disk_radius = self.disk_radius.unwrap_or(0.625);
                let k_arc = (k / 3).max(12);
                let k_chord = (k_arc * 2 / 5).max(6);
                let k_disk = (k / 5).max(12);
                scenario::double_bubble_with_disk(
                    Vec2::new(-1.2, 0.0),
                    area,
                    Vec2::new(2.2, 0.0),
                    disk_radius,
                    self.betas3([0.25, 0.0, -0.25])?,
                    self.tensions_n([1.0, 1.0, 1.0, 1.0])?,
                    k_arc,
                    k_chord,
                    k_disk,
                )
            }
            ScenarioName::Custom => {
                let path = self.cluster_file.as_ref().ok_or_else(|| {
                    Error::DimensionMismatch(
                        "custom scenario requires 'cluster_file <path>'".into(),
                    )
                })?;
                crate::diagnostics::read_cluster(path)
            }
        }
    }
}

/// A fully parsed configuration file.
#[derive(Debug, Clone)]
pub struct ParsedConfig {
    pub run: RunConfig,
    pub scenario: ScenarioSpec,
    pub level: Option<u32>,
    pub out_dir: Option<PathBuf>,
}

impl ParsedConfig {
    /// The vertex budget the scenario should use.
    pub fn k_default(&self) -> usize {
        level_params(self.level.unwrap_or(1)).k_gamma
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn one_f64(tokens: &[&str], line: usize) -> Result<f64> {
    if tokens.len() != 1 {
        return Err(parse_err(line, "expected exactly one value"));
    }
    tokens[0]
        .parse()
        .map_err(|_| parse_err(line, format!("expected a number, got '{}'", tokens[0])))
}

fn one_usize(tokens: &[&str], line: usize) -> Result<usize> {
    if tokens.len() != 1 {
        return Err(parse_err(line, "expected exactly one value"));
    }
    tokens[0]
        .parse()
        .map_err(|_| parse_err(line, format!("expected an integer, got '{}'", tokens[0])))
}

fn many_f64(tokens: &[&str], line: usize) -> Result<Vec<f64>> {
    tokens
        .iter()
        .map(|t| {
            t.parse()
                .map_err(|_| parse_err(line, format!("expected a number, got '{t}'")))
        })
        .collect()
}

/// Parses a configuration file. Keys before the `scenario` line configure
/// the run; keys after it configure the scenario.
pub fn parse_config(text: &str) -> Result<ParsedConfig> {
    let mut scheme = Scheme::Linear;
    let mut tau: Option<f64> = None;
    let mut t_end = 1.0;
    let mut h = 4.0;
    let mut n_coarse: Option<u32> = None;
    let mut n_fine: Option<u32> = None;
    let mut mode = IntegrationMode::True;
    let mut fp_tol = 1e-10;
    let mut max_fp_iter = 50usize;
    let mut surgery: Option<f64> = Some(1e-3);
    let mut output_every = 1usize;
    let mut out_dir: Option<PathBuf> = None;
    let mut level: Option<u32> = None;
    let mut spec: Option<ScenarioSpec> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let mut it = line.split_whitespace();
        let key = it.next().unwrap();
        let rest: Vec<&str> = it.collect();
        match (key, &mut spec) {
            ("scenario", s) => {
                if rest.len() != 1 {
                    return Err(parse_err(line_no, "expected 'scenario <name>'"));
                }
                let name = ScenarioName::parse(rest[0]).ok_or_else(|| {
                    parse_err(line_no, format!("unknown scenario '{}'", rest[0]))
                })?;
                *s = Some(ScenarioSpec::new(name));
            }
            ("scheme", None) => {
                scheme = match rest.first().copied() {
                    Some("linear") => Scheme::Linear,
                    Some("conservative") => Scheme::Conservative,
                    other => {
                        return Err(parse_err(
                            line_no,
                            format!("scheme must be linear or conservative, got {other:?}"),
                        ))
                    }
                };
            }
            ("tau", None) => tau = Some(one_f64(&rest, line_no)?),
            ("t_end", None) => t_end = one_f64(&rest, line_no)?,
            ("h", None) => h = one_f64(&rest, line_no)?,
            ("n_coarse", None) => n_coarse = Some(one_usize(&rest, line_no)? as u32),
            ("n_fine", None) => n_fine = Some(one_usize(&rest, line_no)? as u32),
            ("mode", None) => {
                mode = match rest.first().copied() {
                    Some("true") => IntegrationMode::True,
                    Some("lumped") => IntegrationMode::Lumped,
                    other => {
                        return Err(parse_err(
                            line_no,
                            format!("mode must be true or lumped, got {other:?}"),
                        ))
                    }
                };
            }
            ("fp_tol", None) => fp_tol = one_f64(&rest, line_no)?,
            ("max_fp_iter", None) => max_fp_iter = one_usize(&rest, line_no)?,
            ("surgery_threshold", None) => {
                surgery = match rest.first().copied() {
                    Some("off") => None,
                    _ => Some(one_f64(&rest, line_no)?),
                };
            }
            ("output_every", None) => output_every = one_usize(&rest, line_no)?.max(1),
            ("out_dir", None) => {
                if rest.len() != 1 {
                    return Err(parse_err(line_no, "expected 'out_dir <path>'"));
                }
                out_dir = Some(PathBuf::from(rest[0]));
            }
            ("level", _) => level = Some(one_usize(&rest, line_no)? as u32),
            ("beta", Some(s)) => s.betas = Some(many_f64(&rest, line_no)?),
            ("sigma", Some(s)) => s.tensions = Some(many_f64(&rest, line_no)?),
            ("radii", Some(s)) => s.radii = Some(many_f64(&rest, line_no)?),
            ("k_gamma", Some(s)) => s.k_gamma = Some(one_usize(&rest, line_no)?),
            ("lobe_area", Some(s)) => s.lobe_area = Some(one_f64(&rest, line_no)?),
            ("disk_radius", Some(s)) => s.disk_radius = Some(one_f64(&rest, line_no)?),
            ("cluster_file", Some(s)) => {
                if rest.len() != 1 {
                    return Err(parse_err(line_no, "expected 'cluster_file <path>'"));
                }
                s.cluster_file = Some(PathBuf::from(rest[0]));
            }
            (key, None) => {
                return Err(parse_err(
                    line_no,
                    format!("unknown run key '{key}' (scenario keys must follow 'scenario')"),
                ))
            }
            (key, Some(_)) => {
                return Err(parse_err(line_no, format!("unknown scenario key '{key}'")))
            }
        }
    }

    let spec = spec.ok_or_else(|| parse_err(0, "missing 'scenario <name>' block"))?;
    let lp = level_params(level.unwrap_or(1));
    let run = RunConfig {
        scheme,
        tau: tau.unwrap_or(lp.tau),
        t_end,
        h,
        n_coarse: n_coarse.unwrap_or(lp.n_coarse),
        n_fine: n_fine.unwrap_or(lp.n_fine),
        mode,
        fp_tol,
        max_fp_iter,
        surgery_threshold: surgery,
        output_every,
    };
    run.validate()?;
    Ok(ParsedConfig { run, scenario: spec, level, out_dir })
}
