//! Decode benchmark over a packed dataset.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use super::{fetch_frames, DecodeError, DecodeStats, Strategy};
use crate::codec::{write_media, ByteCounter, GopConfig, MediaStore};
use crate::container::MediaSource;
use crate::fsl::{read_manifest, DatasetManifest};

pub const DEFAULT_REPS: usize = 3;

#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub strategies: Vec<Strategy>,
    pub gops: Vec<GopConfig>,
    pub reps: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            strategies: Strategy::ALL.to_vec(),
            gops: vec![GopConfig::fixed(30), GopConfig::variable(7)],
            reps: DEFAULT_REPS,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub gop: GopConfig,
    pub strategy: Strategy,
    /// Counts of the first repetition; every repetition must agree.
    pub stats: DecodeStats,
    pub elapsed_min: Duration,
    pub elapsed_median: Duration,
}

impl BenchRow {
    /// Throughput at the median elapsed time.
    pub fn img_per_s(&self) -> f64 {
        let s = self.elapsed_median.as_secs_f64();
        if s == 0.0 {
            0.0
        } else {
            self.stats.images as f64 / s
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchReport {
    pub samples: usize,
    pub reps: usize,
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    pub fn row(&self, gop: &GopConfig, strategy: Strategy) -> Option<&BenchRow> {
        self.rows
            .iter()
            .find(|r| &r.gop == gop && r.strategy == strategy)
    }

    /// One `key=value` record per row. Timing fields are prefixed with
    /// `timing.` so they can be dropped for deterministic comparisons.
    pub fn records(&self) -> String {
        let mut out = String::new();
        for r in &self.rows {
            out.push_str(&format!(
                "gop_mode={} strategy={} images={} frames_decoded={} bytes_read={} seeks={} kb_per_img={:.3} \
                 timing.img_per_s={:.1} timing.elapsed_min_ms={:.3} timing.elapsed_median_ms={:.3}\n",
                r.gop,
                r.strategy,
                r.stats.images,
                r.stats.frames_decoded,
                r.stats.bytes_read,
                r.stats.seeks,
                r.stats.kb_per_img(),
                r.img_per_s(),
                r.elapsed_min.as_secs_f64() * 1e3,
                r.elapsed_median.as_secs_f64() * 1e3,
            ));
        }
        out
    }
}

impl fmt::Display for BenchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<22} {:<15} {:>8} {:>14} {:>14} {:>10}",
            "gop_mode", "strategy", "images", "frames_decoded", "bytes_read", "kb_per_img"
        )?;
        for r in &self.rows {
            writeln!(
                f,
                "{:<22} {:<15} {:>8} {:>14} {:>14} {:>10.3}",
                r.gop.to_string(),
                r.strategy.name(),
                r.stats.images,
                r.stats.frames_decoded,
                r.stats.bytes_read,
                r.stats.kb_per_img()
            )?;
        }
        writeln!(f)?;
        writeln!(f, "[timing: wall clock, {} repetitions, not deterministic]", self.reps)?;
        writeln!(
            f,
            "{:<22} {:<15} {:>12} {:>14} {:>14}",
            "gop_mode", "strategy", "img_per_s", "min_ms", "median_ms"
        )?;
        for r in &self.rows {
            writeln!(
                f,
                "{:<22} {:<15} {:>12.1} {:>14.3} {:>14.3}",
                r.gop.to_string(),
                r.strategy.name(),
                r.img_per_s(),
                r.elapsed_min.as_secs_f64() * 1e3,
                r.elapsed_median.as_secs_f64() * 1e3
            )?;
        }
        Ok(())
    }
}

fn media_root(dataset_dir: &Path, manifest: &DatasetManifest) -> PathBuf {
    let root = Path::new(&manifest.header.media_root);
    if root.is_absolute() {
        root.to_path_buf()
    } else {
        dataset_dir.join(root)
    }
}

fn gop_slug(gop: &GopConfig) -> String {
    gop.to_string().replace(':', "_")
}

/// Re-encodes every store the dataset references under `gop`.
fn transcode(
    uris: &BTreeSet<String>,
    src_root: &Path,
    dst_root: &Path,
    gop: &GopConfig,
) -> Result<(), DecodeError> {
    for uri in uris {
        let mut src = MediaStore::open_path(src_root.join(uri))?;
        let fps = src.header().fps;
        let frames = src.decode_all(&mut ByteCounter::default())?;
        let dst = dst_root.join(uri);
        if let Some(parent) = dst.parent() {
            fs::create_dir_all(parent)?;
        }
        write_media(&dst, &frames, gop, fps)?;
    }
    Ok(())
}

/// One pass over every sample's plan. Each store is opened once per pass
/// and its header and offset table count toward the bytes read.
fn run_pass(
    manifest: &DatasetManifest,
    root: &Path,
    strategy: Strategy,
) -> Result<DecodeStats, DecodeError> {
    let started = Instant::now();
    let mut stores: HashMap<&str, MediaStore<BufReader<fs::File>>> = HashMap::new();
    let mut total = DecodeStats::default();
    for entry in &manifest.entries {
        for (source, plan) in &entry.plan {
            let MediaSource::External(uri) = source else {
                continue;
            };
            if !stores.contains_key(uri.as_str()) {
                let store = MediaStore::open_path(root.join(uri))?;
                total.bytes_read += store.header_bytes();
                stores.insert(uri, store);
            }
            let store = stores.get_mut(uri.as_str()).unwrap();
            let (_, stats) = fetch_frames(plan, store, strategy)?;
            total += stats;
        }
    }
    total.elapsed = started.elapsed();
    Ok(total)
}

/// Benchmarks every (GOP, strategy) pair over the dataset at
/// `dataset_dir`. Stores are transcoded per GOP variant into `work_dir`,
/// which should be an otherwise empty scratch directory.
pub fn bench_pipeline(
    dataset_dir: &Path,
    cfg: &BenchConfig,
    work_dir: &Path,
) -> Result<BenchReport, DecodeError> {
    let manifest = read_manifest(dataset_dir)?;
    let src_root = media_root(dataset_dir, &manifest);
    let mut uris = BTreeSet::new();
    for entry in &manifest.entries {
        for source in entry.plan.keys() {
            match source {
                MediaSource::External(uri) => {
                    uris.insert(uri.clone());
                }
                MediaSource::Embedded(_) => {
                    return Err(DecodeError::Unsupported(
                        "benchmarking embedded media; pack from a container with external media".into(),
                    ))
                }
            }
        }
    }
    let reps = cfg.reps.max(1);
    let mut rows = Vec::new();
    for gop in &cfg.gops {
        gop.validate()?;
        let root = work_dir.join(gop_slug(gop));
        transcode(&uris, &src_root, &root, gop)?;
        for &strategy in &cfg.strategies {
            let mut runs = Vec::with_capacity(reps);
            for _ in 0..reps {
                runs.push(run_pass(&manifest, &root, strategy)?);
            }
            let first = runs[0];
            for r in &runs[1..] {
                if (r.images, r.bytes_read, r.frames_decoded, r.seeks)
                    != (first.images, first.bytes_read, first.frames_decoded, first.seeks)
                {
                    return Err(DecodeError::InvalidPlan(format!(
                        "non-deterministic counts for {gop} {strategy}"
                    )));
                }
            }
            let mut times: Vec<Duration> = runs.iter().map(|r| r.elapsed).collect();
            times.sort();
            log::info!("bench {gop} {strategy}: {} images", first.images);
            rows.push(BenchRow {
                gop: *gop,
                strategy,
                stats: first,
                elapsed_min: times[0],
                elapsed_median: times[times.len() / 2],
            });
        }
    }
    Ok(BenchReport {
        samples: manifest.entries.len(),
        reps,
        rows,
    })
}
