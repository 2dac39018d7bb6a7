//! Artifact writing: atomic files, metadata envelopes and ensemble summaries.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use falqon_core::Graph;
use serde::Serialize;
use serde_json::Value;

pub const TOOL: &str = "falqon-lab";
pub const SUMMARY_HEADER: &str = "layer,count,mean_r_A,std_r_A,mean_phi,std_phi";

/// Collects written paths so the command can report them.
pub struct OutDir {
    root: PathBuf,
    written: Vec<PathBuf>,
}

impl OutDir {
    pub fn create(root: &Path) -> std::io::Result<Self> {
        fs::create_dir_all(root)?;
        Ok(OutDir { root: root.to_path_buf(), written: Vec::new() })
    }

    /// Writes `name` via a temporary sibling and a rename, so readers never
    /// observe a partial file.
    pub fn write(&mut self, name: &str, contents: &str) -> std::io::Result<()> {
        let path = self.root.join(name);
        let tmp = self.root.join(format!(".{name}.tmp"));
        fs::write(&tmp, contents)?;
        fs::rename(&tmp, &path)?;
        self.written.push(path);
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> anyhow::Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        Ok(self.write(name, &text)?)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }
}

/// A named problem instance.
pub struct Named {
    pub name: String,
    pub source: String,
    pub graph: Graph,
}

#[derive(Serialize)]
pub struct InstanceMeta<'a> {
    pub name: &'a str,
    pub source: &'a str,
    pub n: usize,
    pub edges: usize,
    pub weighted: bool,
    pub graph_hash: String,
}

impl<'a> From<&'a Named> for InstanceMeta<'a> {
    fn from(i: &'a Named) -> Self {
        InstanceMeta {
            name: &i.name,
            source: &i.source,
            n: i.graph.n(),
            edges: i.graph.edges().len(),
            weighted: !i.graph.is_unweighted(),
            graph_hash: i.graph.content_hash(),
        }
    }
}

/// Envelope shared by every JSON artifact.
#[derive(Serialize)]
pub struct Artifact<'a, R: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub config: &'a Value,
    pub seeds: Vec<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub instance: Option<InstanceMeta<'a>>,
    pub result: R,
}

impl<'a, R: Serialize> Artifact<'a, R> {
    pub fn new(command: &'a str, config: &'a Value, seeds: Vec<u64>, instance: Option<&'a Named>, result: R) -> Self {
        Artifact {
            tool: TOOL,
            version: env!("CARGO_PKG_VERSION"),
            command,
            config,
            seeds,
            instance: instance.map(InstanceMeta::from),
            result,
        }
    }
}

/// Mean and population standard deviation, summed in input order.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Per-layer ensemble statistics of `(ratio, phi)` series. Layer `k` is
/// averaged over the series that reach it; labels start at `first_layer`.
pub fn layer_summary(series: &[(&[f64], &[f64])], first_layer: usize) -> String {
    let longest = series.iter().map(|s| s.0.len()).max().unwrap_or(0);
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for i in 0..longest {
        let r: Vec<f64> = series.iter().filter_map(|s| s.0.get(i).copied()).collect();
        let p: Vec<f64> = series.iter().filter_map(|s| s.1.get(i).copied()).collect();
        let (mr, sr) = mean_std(&r);
        let (mp, sp) = mean_std(&p);
        let _ = writeln!(out, "{},{},{mr},{sr},{mp},{sp}", i + first_layer, r.len());
    }
    out
}

/// Joins rows of displayable cells into CSV text.
pub fn csv(header: &str, rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = String::from(header);
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}
