use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, Context, Result};
use serde::{Deserialize, Serialize};
use yamabe_glue::config::{ConfigError, ModelConfig};
use yamabe_glue::field::RadialField;
use yamabe_glue::spectral::AngularGrid;

/// Environment variable naming the default configuration file.
pub const CONFIG_ENV: &str = "YGLUE_CONFIG";

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Timing {
    pub stage: String,
    pub seconds: f64,
}

/// Record of one invocation, written next to its artifacts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub arguments: Vec<String>,
    pub config: ModelConfig,
    pub config_source: Option<PathBuf>,
    pub seed: Option<u64>,
    pub version: String,
    /// Paths relative to the output directory.
    pub outputs: Vec<String>,
    pub timings: Vec<Timing>,
    pub total_seconds: f64,
}

/// Reads and validates a configuration, or returns the defaults.
pub fn load_config(path: Option<&Path>) -> Result<ModelConfig> {
    let Some(path) = path else {
        return Ok(ModelConfig::default());
    };
    let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let cfg: ModelConfig =
        serde_json::from_str(&text).map_err(|e| anyhow!("invalid config {}: {e}", path.display()))?;
    cfg.validate().map_err(|e| anyhow!("invalid config {}: {e}", path.display()))?;
    Ok(cfg)
}

/// Writes `bytes` to `path` through a temporary sibling and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path.file_name().ok_or_else(|| anyhow!("no file name in {}", path.display()))?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    let mut f = fs::File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?;
    f.write_all(bytes)?;
    f.sync_all()?;
    fs::rename(&tmp, path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn csv_bytes(header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.into_inner().map_err(|e| anyhow!("csv buffer: {e}"))
}

/// Rows `t, r, point, x, y, z, v_c..., u_c...` of a cylinder-form field `v`
/// and its flat-chart value `u = e^{(n-2)t/2} v`; `x, y, z` stay empty on a
/// radial grid.
pub fn field_csv(field: &RadialField, grid: &AngularGrid, n: u32, stride: usize) -> Result<Vec<u8>> {
    let m = (n as f64 - 2.0) / 2.0;
    let mut header: Vec<String> = ["t", "r", "point", "x", "y", "z"].iter().map(|s| s.to_string()).collect();
    header.extend((0..field.dim).map(|c| format!("v{c}")));
    header.extend((0..field.dim).map(|c| format!("u{c}")));
    let stride = stride.max(1);
    let rows = (0..field.nodes).filter(|i| i % stride == 0 || *i + 1 == field.nodes).flat_map(|i| {
        let t = field.t(i);
        let pre = (m * t).exp();
        (0..field.angles).map(move |a| {
            let mut row = vec![t.to_string(), (-t).exp().to_string(), a.to_string()];
            match grid.point(a) {
                Some(p) => row.extend(p.iter().map(|x| x.to_string())),
                None => row.extend(std::iter::repeat_n(String::new(), 3)),
            }
            row.extend((0..field.dim).map(|c| field.get(i, a, c).to_string()));
            row.extend((0..field.dim).map(|c| (pre * field.get(i, a, c)).to_string()));
            row
        })
    });
    csv_bytes(&header, rows)
}

/// One command invocation: resolved configuration, output directory and the
/// growing manifest.
pub struct Run {
    manifest: RunManifest,
    out: PathBuf,
    started: Instant,
}

impl Run {
    pub fn start(command: &str, config: Option<&Path>, out: &Path) -> Result<Self> {
        let cfg = load_config(config)?;
        fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
        Ok(Self {
            manifest: RunManifest {
                command: command.to_string(),
                arguments: std::env::args().skip(1).collect(),
                config: cfg,
                config_source: config.map(Path::to_path_buf),
                seed: None,
                version: env!("CARGO_PKG_VERSION").to_string(),
                outputs: Vec::new(),
                timings: Vec::new(),
                total_seconds: 0.0,
            },
            out: out.to_path_buf(),
            started: Instant::now(),
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.manifest.config
    }

    /// Applies command-line overrides; the snapshot keeps the result.
    pub fn override_config(&mut self, f: impl FnOnce(&mut ModelConfig)) -> Result<(), ConfigError> {
        f(&mut self.manifest.config);
        self.manifest.config.validate()
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.manifest.seed = Some(seed);
    }

    pub fn out_dir(&self) -> &Path {
        &self.out
    }

    pub fn timed<T>(&mut self, stage: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let value = f().with_context(|| format!("{stage} stage"))?;
        self.record_timing(stage, start.elapsed().as_secs_f64());
        Ok(value)
    }

    pub fn record_timing(&mut self, stage: &str, seconds: f64) {
        self.manifest.timings.push(Timing { stage: stage.to_string(), seconds });
    }

    /// Writes `bytes` under the output directory and lists the file.
    pub fn write(&mut self, relative: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.out.join(relative);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        write_atomic(&path, bytes)?;
        self.register(relative);
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, relative: &str, value: &T) -> Result<PathBuf> {
        self.write(relative, &json_bytes(value)?)
    }

    /// Lists a file written elsewhere, e.g. by a worker thread.
    pub fn register(&mut self, relative: &str) {
        self.manifest.outputs.push(relative.to_string());
    }

    pub fn finish(mut self) -> Result<()> {
        self.manifest.total_seconds = self.started.elapsed().as_secs_f64();
        let bytes = json_bytes(&self.manifest)?;
        write_atomic(&self.out.join(MANIFEST), &bytes)
    }
}

/// Runs `task` over `items` on up to `jobs` threads; results come back in
/// input order regardless of completion order.
pub fn parallel_map<I: Sync, T: Send>(items: &[I], jobs: usize, task: impl Fn(&I) -> T + Sync) -> Vec<T> {
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Mutex;
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<T>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..jobs.clamp(1, items.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let value = task(&items[i]);
                slots.lock().expect("worker panicked")[i] = Some(value);
            });
        }
    });
    slots.into_inner().expect("worker panicked").into_iter().map(|v| v.expect("every item ran")).collect()
}

/// File-name friendly rendering of a parameter value.
pub fn tag(x: f64) -> String {
    x.to_string().replace('-', "m")
}
