//! Timing and table-traffic measurements for the interpolated and cached paths.

use std::cell::Cell;
use std::time::{Duration, Instant};

use lutsr_core::eas::{build_buffers, QueryBuffer};
use lutsr_core::engine::{run_pipeline, Counted, Lookup, LutPack, OpCounts, Stage, StageObserver};
use lutsr_core::tensor::ImagePlane;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Accumulates wall time per stage kind; a stage lasts until the next begins.
#[derive(Debug, Default)]
pub struct StageTimer {
    current: Option<(Stage, Instant)>,
    totals: Vec<(String, Duration)>,
}

fn stage_name(s: Stage) -> &'static str {
    match s {
        Stage::BufferBuild => "buffer_build",
        Stage::BitSplit => "bit_split",
        Stage::FeatureExtraction => "feature_extraction",
        Stage::ShiftBlock(_) => "shift_blocks",
        Stage::FinalPointwise => "final_pointwise",
        Stage::PixelShuffle => "pixel_shuffle",
        Stage::Ensemble => "ensemble",
        Stage::Done => "done",
    }
}

impl StageTimer {
    fn close(&mut self, now: Instant) {
        if let Some((stage, start)) = self.current.take() {
            let name = stage_name(stage);
            let d = now - start;
            match self.totals.iter_mut().find(|(n, _)| n == name) {
                Some((_, t)) => *t += d,
                None => self.totals.push((name.to_string(), d)),
            }
        }
    }

    pub fn totals(&self) -> &[(String, Duration)] {
        &self.totals
    }
}

impl StageObserver for StageTimer {
    fn enter(&mut self, stage: Stage) {
        let now = Instant::now();
        self.close(now);
        if stage != Stage::Done {
            self.current = Some((stage, now));
        }
    }
}

/// Which table source a run reads from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Path {
    Interpolated,
    Cached,
}

/// Table traffic of one inference.
pub fn count_ops(pack: &LutPack, img: &ImagePlane, path: Path) -> lutsr_core::Result<OpCounts> {
    let counts = Cell::new(OpCounts::default());
    match path {
        Path::Interpolated => {
            let wrapped = Counted::wrap_all(pack.tables(), &counts);
            run_pipeline(pack.descriptor(), &wrapped, img, &mut ())?;
        }
        Path::Cached => {
            let buffers: Vec<QueryBuffer> = build_buffers(pack);
            let wrapped = Counted::wrap_all(&buffers, &counts);
            run_pipeline(pack.descriptor(), &wrapped, img, &mut ())?;
        }
    }
    Ok(counts.get())
}

/// Expected query count: every table is read once per pixel of its layer, in
/// each of the four ensemble passes.
pub fn expected_queries(pack: &LutPack, img: &ImagePlane) -> u64 {
    4 * pack.descriptor().table_count() as u64 * (img.width() * img.height()) as u64
}

/// Run one path with stage timing.
pub fn timed_run(
    pack: &LutPack,
    img: &ImagePlane,
    path: Path,
    timer: &mut StageTimer,
) -> lutsr_core::Result<ImagePlane> {
    match path {
        Path::Interpolated => run_pipeline(pack.descriptor(), pack.tables(), img, timer),
        Path::Cached => {
            timer.enter(Stage::BufferBuild);
            let buffers = build_buffers(pack);
            run_pipeline(pack.descriptor(), &buffers, img, timer)
        }
    }
}

fn run_plain<L: Lookup>(pack: &LutPack, tables: &[L], img: &ImagePlane) -> lutsr_core::Result<ImagePlane> {
    run_pipeline(pack.descriptor(), tables, img, &mut ())
}

/// Best-of-`iters` wall time of one full inference on each path. The cached
/// time includes building the buffers.
pub fn best_times(pack: &LutPack, img: &ImagePlane, iters: usize) -> lutsr_core::Result<(Duration, Duration)> {
    let mut best = (Duration::MAX, Duration::MAX);
    for _ in 0..iters.max(1) {
        let t = Instant::now();
        std::hint::black_box(run_plain(pack, pack.tables(), img)?);
        best.0 = best.0.min(t.elapsed());

        let t = Instant::now();
        let buffers = build_buffers(pack);
        std::hint::black_box(run_plain(pack, &buffers, img)?);
        best.1 = best.1.min(t.elapsed());
    }
    Ok(best)
}

pub fn random_image(width: usize, height: usize, seed: u64) -> ImagePlane {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ImagePlane::from_fn(width, height, |_, _| rng.random())
}

#[derive(Debug, Serialize)]
pub struct PathReport {
    pub path: Path,
    pub best_ms: f64,
    pub stages_ms: Vec<(String, f64)>,
    pub queries: u64,
    pub reads: u64,
    pub arith: u64,
}

#[derive(Debug, Serialize)]
pub struct BenchReport {
    pub width: usize,
    pub height: usize,
    pub iterations: usize,
    pub tables: usize,
    pub subsampled_tables: usize,
    pub paths: Vec<PathReport>,
    pub speedup: f64,
}

pub fn bench(pack: &LutPack, img: &ImagePlane, iters: usize) -> lutsr_core::Result<BenchReport> {
    let (interp, cached) = best_times(pack, img, iters)?;
    let mut paths = Vec::new();
    for (path, best) in [(Path::Interpolated, interp), (Path::Cached, cached)] {
        let mut timer = StageTimer::default();
        timed_run(pack, img, path, &mut timer)?;
        let ops = count_ops(pack, img, path)?;
        paths.push(PathReport {
            path,
            best_ms: best.as_secs_f64() * 1e3,
            stages_ms: timer
                .totals()
                .iter()
                .map(|(n, d)| (n.clone(), d.as_secs_f64() * 1e3))
                .collect(),
            queries: ops.queries,
            reads: ops.reads,
            arith: ops.arith,
        });
    }
    Ok(BenchReport {
        width: img.width(),
        height: img.height(),
        iterations: iters.max(1),
        tables: pack.tables().len(),
        subsampled_tables: pack.tables().iter().filter(|t| t.stride() > 1).count(),
        speedup: interp.as_secs_f64() / cached.as_secs_f64(),
        paths,
    })
}
