//! JSON input files, trace export and run manifests.
//!
//! Every file carries `"format": 1`. A surface file looks like
//!
//! ```json
//! {
//!   "format": 1,
//!   "background": "hyperbolic",
//!   "faces": [[0, 1, 2], [0, 1, 3], [0, 2, 3], [1, 2, 3]],
//!   "inversive": [{"edge": [1, 2], "value": 1.5}],
//!   "inversive_default": 0.5,
//!   "radii": [1.0, 1.0, 1.0, 1.0]
//! }
//! ```
//!
//! `inversive` is either one number for every edge or a list of per-edge
//! entries; edges not listed take `inversive_default`. Values in `(−1, 0)`
//! need `"allow_negative_inversive": true`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::complex::{canonical_edge, SurfaceComplex, VertexSubset};
use crate::error::Error;
use crate::flow::TraceSample;
use crate::packing::{Background, InversiveDistances, PackingMetric};

pub const FORMAT_VERSION: u32 = 1;

/// Input problems: unreadable or malformed files, or contents that do not
/// describe a valid surface.
#[derive(Debug, thiserror::Error)]
pub enum InputError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("{path}: {source}")]
    Invalid { path: String, source: Error },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeValue {
    pub edge: [usize; 2],
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InversiveSpec {
    Uniform(f64),
    PerEdge(Vec<EdgeValue>),
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceFile {
    pub format: u32,
    pub background: Background,
    pub faces: Vec<[usize; 3]>,
    pub inversive: InversiveSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inversive_default: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radii: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "is_false")]
    pub allow_negative_inversive: bool,
}

/// A validated surface file.
#[derive(Debug, Clone)]
pub struct Surface {
    pub file: SurfaceFile,
    pub complex: SurfaceComplex,
    pub background: Background,
    pub inversive: InversiveDistances,
    pub radii: Option<Vec<f64>>,
}

fn check_format(path: &str, format: u32) -> Result<(), InputError> {
    if format != FORMAT_VERSION {
        return Err(InputError::Parse {
            path: path.into(),
            message: format!("unsupported format {format} (expected {FORMAT_VERSION})"),
        });
    }
    Ok(())
}

fn parse_json<T: for<'de> Deserialize<'de>>(path: &str, text: &str) -> Result<T, InputError> {
    serde_json::from_str(text).map_err(|e| InputError::Parse {
        path: path.into(),
        message: e.to_string(),
    })
}

pub fn read_text(path: &Path) -> Result<String, InputError> {
    std::fs::read_to_string(path).map_err(|source| InputError::Read {
        path: path.to_path_buf(),
        source,
    })
}

impl SurfaceFile {
    pub fn parse(path: &str, text: &str) -> Result<Self, InputError> {
        let file: SurfaceFile = parse_json(path, text)?;
        check_format(path, file.format)?;
        Ok(file)
    }

    pub fn from_metric(complex: &SurfaceComplex, metric: &PackingMetric) -> Self {
        let inversive = InversiveSpec::PerEdge(
            complex
                .edges()
                .iter()
                .enumerate()
                .map(|(e, &(a, b))| EdgeValue {
                    edge: [a, b],
                    value: metric.inversive().get(e),
                })
                .collect(),
        );
        SurfaceFile {
            format: FORMAT_VERSION,
            background: metric.background(),
            faces: complex.faces().to_vec(),
            inversive,
            inversive_default: None,
            radii: Some(metric.radii().to_vec()),
            allow_negative_inversive: metric.inversive().is_permissive(),
        }
    }

    /// Same file with new radii.
    pub fn with_radii(&self, radii: Vec<f64>) -> Self {
        SurfaceFile {
            radii: Some(radii),
            ..self.clone()
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("surface file serializes");
        s.push('\n');
        s
    }

    pub fn resolve(self, path: &str) -> Result<Surface, InputError> {
        let invalid = |source| InputError::Invalid {
            path: path.into(),
            source,
        };
        let parse = |message: String| InputError::Parse {
            path: path.into(),
            message,
        };
        let complex = SurfaceComplex::build(&self.faces).map_err(invalid)?;
        let values = match &self.inversive {
            InversiveSpec::Uniform(v) => vec![*v; complex.edge_count()],
            InversiveSpec::PerEdge(list) => {
                let mut values: Vec<Option<f64>> = vec![None; complex.edge_count()];
                for entry in list {
                    let [a, b] = entry.edge;
                    let e = complex.edge_index(a, b).ok_or_else(|| {
                        parse(format!("inversive: edge [{a}, {b}] is not an edge of the complex"))
                    })?;
                    if values[e].is_some() {
                        let (a, b) = canonical_edge(a, b);
                        return Err(parse(format!("inversive: edge [{a}, {b}] given twice")));
                    }
                    values[e] = Some(entry.value);
                }
                let missing: Vec<usize> = (0..values.len()).filter(|&e| values[e].is_none()).collect();
                match self.inversive_default {
                    Some(d) => values.into_iter().map(|v| v.unwrap_or(d)).collect(),
                    None if missing.is_empty() => values.into_iter().map(|v| v.unwrap()).collect(),
                    None => {
                        let (a, b) = complex.edge(missing[0]);
                        return Err(parse(format!(
                            "inversive: {} edge(s) without a value, e.g. [{a}, {b}]; list them or set inversive_default",
                            missing.len()
                        )));
                    }
                }
            }
        };
        let inversive = if self.allow_negative_inversive {
            InversiveDistances::permissive(values)
        } else {
            InversiveDistances::new(values)
        }
        .map_err(invalid)?;
        if let Some(radii) = &self.radii {
            PackingMetric::new(&complex, self.background, inversive.clone(), radii.clone()).map_err(invalid)?;
        }
        Ok(Surface {
            background: self.background,
            radii: self.radii.clone(),
            file: self,
            complex,
            inversive,
        })
    }
}

impl Surface {
    pub fn load(path: &Path) -> Result<(Self, String), InputError> {
        let text = read_text(path)?;
        let name = path.display().to_string();
        let surface = SurfaceFile::parse(&name, &text)?.resolve(&name)?;
        Ok((surface, text))
    }

    /// The metric; fails naming the `radii` field when it is absent.
    pub fn metric(&self, path: &str) -> Result<PackingMetric, InputError> {
        let radii = self.radii.clone().ok_or_else(|| InputError::Parse {
            path: path.into(),
            message: "missing field `radii` (initial radii are required for this command)".into(),
        })?;
        PackingMetric::new(&self.complex, self.background, self.inversive.clone(), radii).map_err(|source| {
            InputError::Invalid {
                path: path.into(),
                source,
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetFile {
    pub format: u32,
    pub target: Vec<f64>,
}

impl TargetFile {
    pub fn load(path: &Path, vertex_count: usize) -> Result<Vec<f64>, InputError> {
        let name = path.display().to_string();
        let file: TargetFile = parse_json(&name, &read_text(path)?)?;
        check_format(&name, file.format)?;
        if file.target.len() != vertex_count {
            return Err(InputError::Parse {
                path: name,
                message: format!(
                    "target: expected {vertex_count} values, found {}",
                    file.target.len()
                ),
            });
        }
        Ok(file.target)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubsetsFile {
    pub format: u32,
    pub subsets: Vec<Vec<usize>>,
}

impl SubsetsFile {
    pub fn load(path: &Path, complex: &SurfaceComplex) -> Result<Vec<VertexSubset>, InputError> {
        let name = path.display().to_string();
        let file: SubsetsFile = parse_json(&name, &read_text(path)?)?;
        check_format(&name, file.format)?;
        file.subsets
            .into_iter()
            .map(|members| {
                VertexSubset::new(complex, members).map_err(|source| InputError::Invalid {
                    path: name.clone(),
                    source,
                })
            })
            .collect()
    }
}

/// `t,u_0..u_{N-1},K_0..K_{N-1},M,m,potential`.
pub fn trace_header(vertex_count: usize) -> String {
    let mut cols = vec!["t".to_string()];
    cols.extend((0..vertex_count).map(|i| format!("u_{i}")));
    cols.extend((0..vertex_count).map(|i| format!("K_{i}")));
    cols.extend(["M", "m", "potential"].map(String::from));
    cols.join(",")
}

/// CSV trace; numbers use the shortest round-trip representation and an
/// absent potential is an empty field.
pub fn trace_csv(vertex_count: usize, trace: &[TraceSample]) -> String {
    let mut out = trace_header(vertex_count);
    out.push('\n');
    for s in trace {
        write!(out, "{}", s.t).unwrap();
        for v in s.u.iter().chain(&s.curvature) {
            write!(out, ",{v}").unwrap();
        }
        write!(out, ",{},{},", s.max_curvature, s.min_curvature).unwrap();
        if let Some(p) = s.potential {
            write!(out, "{p}").unwrap();
        }
        out.push('\n');
    }
    out
}

#[derive(Serialize)]
struct TraceJson<'a> {
    format: u32,
    vertex_count: usize,
    samples: &'a [TraceSample],
}

pub fn trace_json(vertex_count: usize, trace: &[TraceSample]) -> String {
    let mut s = serde_json::to_string_pretty(&TraceJson {
        format: FORMAT_VERSION,
        vertex_count,
        samples: trace,
    })
    .expect("trace serializes");
    s.push('\n');
    s
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut s = String::with_capacity(64);
    for b in digest {
        write!(s, "{b:02x}").unwrap();
    }
    s
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ManifestOutputs {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace_json: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radii: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format: u32,
    pub command: String,
    pub tool_version: String,
    pub config: serde_json::Value,
    /// SHA-256 of the main input file, when one was read.
    pub input_digest: Option<String>,
    pub outputs: ManifestOutputs,
    pub status: String,
    pub exit_code: i32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    /// Estimated time at which a classical run left the admissible space.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega_exit_time: Option<f64>,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        Self {
            format: FORMAT_VERSION,
            command: command.into(),
            tool_version: crate::VERSION.into(),
            config: serde_json::Value::Null,
            input_digest: None,
            outputs: ManifestOutputs::default(),
            status: "error".into(),
            exit_code: 2,
            message: None,
            omega_exit_time: None,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }
}
