//! One experiment: repeated splits, model fits, calibration and evaluation
//! for every configured method, then report files.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use cti::conformal::{
    calibrate_values, cqr_grids, harmonic_aggregate, harmonic_predict, partitions,
    split_conformal_grids, CtiCalibration, Interval, PredictionSet, Region,
};
use cti::data::{load_csv, standardize, DataSplit, Dataset};
use cti::evaluation::{
    coverage, length_histograms, mean_components, mean_size, write_histogram, write_report,
    LengthHistogram, MethodReport,
};
use cti::interval::IntervalPartition;
use cti::quantile::{QuantileGrid, QuantileModel};

use crate::config::{validate, BaselineModel, ExperimentConfig, Method, Problem, Source};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("invalid configuration:\n{}", format_problems(.0))]
    Invalid(Vec<Problem>),
    #[error("cannot load data: {0}")]
    Data(cti::Error),
    #[error("all {} repetitions failed; first error: {}", .0.len(), .0[0].1)]
    AllFailed(Vec<(usize, String)>),
    #[error("cannot write results: {0}")]
    Io(#[from] io::Error),
    #[error("cannot write results: {0}")]
    Report(cti::Error),
}

impl RunError {
    /// 1 for configuration problems, 2 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Invalid(_) => 1,
            _ => 2,
        }
    }
}

fn format_problems(p: &[Problem]) -> String {
    p.iter()
        .map(|p| format!("  {p}"))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Seeds consumed by one repetition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RepSeeds {
    pub rep: usize,
    pub split: u64,
    pub forest: Option<u64>,
    pub nn: Option<u64>,
}

/// SplitMix64 step, used to derive model seeds from a split seed.
fn derive_seed(base: u64, tag: u64) -> u64 {
    let mut z = base ^ tag.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl RepSeeds {
    fn new(cfg: &ExperimentConfig, rep: usize) -> Self {
        let split = cfg.seed.wrapping_add(rep as u64);
        Self {
            rep,
            split,
            forest: cfg.uses_forest().then(|| derive_seed(split, 1)),
            nn: cfg.uses_pinball().then(|| derive_seed(split, 2)),
        }
    }
}

/// Per-test-row outcome of one method.
#[derive(Debug, Clone, PartialEq)]
pub struct RowRecord {
    pub row: usize,
    pub y: f64,
    pub covered: bool,
    pub size: f64,
    pub n_components: usize,
    pub set: String,
}

#[derive(Debug, Clone)]
pub struct MethodOutcome {
    pub method: Method,
    pub rows: Vec<RowRecord>,
    pub coverage: f64,
    pub size: f64,
    pub n_components: Option<f64>,
    pub clamp_rate: Option<f64>,
    pub histogram: Option<LengthHistogram>,
}

#[derive(Debug, Clone)]
pub struct RepOutcome {
    pub seeds: RepSeeds,
    pub methods: Vec<MethodOutcome>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub dataset: String,
    pub reports: Vec<MethodReport>,
    pub reps: Vec<RepOutcome>,
    pub failures: Vec<(usize, String)>,
    pub files: Vec<PathBuf>,
}

impl RunOutput {
    pub fn report(&self, method: Method) -> Option<&MethodReport> {
        self.reports.iter().find(|r| r.method == method.name())
    }
}

pub fn load_dataset(cfg: &ExperimentConfig) -> Result<Dataset<f64>, RunError> {
    match &cfg.source {
        Some(Source::File(p)) => load_csv(p, &cfg.response).map_err(RunError::Data),
        Some(Source::Scenario(s)) => s.generate(cfg.n, cfg.seed).map_err(RunError::Data),
        None => Err(RunError::Invalid(validate(cfg))),
    }
}

/// Validates, runs every repetition and writes all output files.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutput, RunError> {
    let problems = validate(cfg);
    if !problems.is_empty() {
        return Err(RunError::Invalid(problems));
    }
    let ds = load_dataset(cfg)?;
    let mut out = evaluate(cfg, &ds)?;
    out.files = write_outputs(cfg, &out)?;
    Ok(out)
}

/// Runs every repetition without touching the filesystem.
pub fn evaluate(cfg: &ExperimentConfig, ds: &Dataset<f64>) -> Result<RunOutput, RunError> {
    let results: Vec<(usize, cti::Result<RepOutcome>)> = (0..cfg.reps)
        .into_par_iter()
        .map(|r| (r, run_rep(cfg, ds, RepSeeds::new(cfg, r))))
        .collect();
    let mut reps = Vec::new();
    let mut failures = Vec::new();
    for (r, res) in results {
        match res {
            Ok(o) => reps.push(o),
            Err(e) => {
                log::error!("repetition {r} failed: {e}");
                failures.push((r, e.to_string()));
            }
        }
    }
    if reps.is_empty() {
        return Err(RunError::AllFailed(failures));
    }
    let reports = cfg
        .methods
        .iter()
        .map(|&m| {
            let mut rep = MethodReport::new(m.name());
            for o in reps
                .iter()
                .flat_map(|r| r.methods.iter().filter(|o| o.method == m))
            {
                rep.coverage.push(o.coverage);
                rep.size.push(o.size);
                rep.n_components.extend(o.n_components);
                rep.clamp_rate.extend(o.clamp_rate);
            }
            rep
        })
        .collect();
    Ok(RunOutput {
        dataset: cfg.dataset_name(),
        reports,
        reps,
        failures,
        files: Vec::new(),
    })
}

struct Fitted {
    cal: Vec<QuantileGrid<f64>>,
    test: Vec<QuantileGrid<f64>>,
}

impl Fitted {
    fn new(
        model: &QuantileModel<f64>,
        cal: &Dataset<f64>,
        test: &Dataset<f64>,
    ) -> cti::Result<Self> {
        Ok(Self {
            cal: model.predict_grids(cal.x.view())?,
            test: model.predict_grids(test.x.view())?,
        })
    }
}

fn run_rep(cfg: &ExperimentConfig, ds: &Dataset<f64>, seeds: RepSeeds) -> cti::Result<RepOutcome> {
    let split = DataSplit::new(ds.len(), seeds.split)?;
    let (std_ds, _) = standardize(ds, &split)?;
    let train = std_ds.subset(&split.train);
    let cal = std_ds.subset(&split.cal);
    let test = std_ds.subset(&split.test);
    let levels = cfg.levels()?;

    let forest = match seeds.forest {
        Some(seed) => {
            let fc = cti::quantile::ForestConfig {
                seed,
                ..cfg.forest.clone()
            };
            let m = cti::quantile::fit_forest(&train, &levels, &fc)?;
            Some(Fitted::new(&m, &cal, &test)?)
        }
        None => None,
    };
    let nn = match seeds.nn {
        Some(seed) => {
            let nc = cti::quantile::PinballConfig {
                seed,
                ..cfg.nn.clone()
            };
            let m = cti::quantile::fit_pinball_joint(&train, &levels, &nc)?;
            Some(Fitted::new(&m, &cal, &test)?)
        }
        None => None,
    };
    let baseline = match cfg.model {
        BaselineModel::Forest => forest.as_ref(),
        BaselineModel::Pinball => nn.as_ref(),
    };

    let cal_y = cal.y.as_slice().expect("contiguous");
    let test_y = test.y.as_slice().expect("contiguous");
    let mut methods = Vec::with_capacity(cfg.methods.len());
    for &m in &cfg.methods {
        let outcome = match m {
            Method::CtiForest => cti_single(
                cfg,
                m,
                forest.as_ref().expect("forest fitted"),
                cal_y,
                test_y,
            )?,
            Method::CtiPinball => {
                cti_single(cfg, m, nn.as_ref().expect("network fitted"), cal_y, test_y)?
            }
            Method::CtiHarmonic => cti_harmonic(
                cfg,
                forest.as_ref().expect("forest fitted"),
                nn.as_ref().expect("network fitted"),
                cal_y,
                test_y,
            )?,
            Method::Split | Method::Cqr => {
                let f = baseline.expect("baseline model fitted");
                let res = if m == Method::Split {
                    split_conformal_grids(&levels, &f.cal, cal_y, &f.test, cfg.alpha)?
                } else {
                    cqr_grids(&levels, &f.cal, cal_y, &f.test, cfg.alpha)?
                };
                interval_outcome(m, &res.intervals, test_y)?
            }
        };
        methods.push(outcome);
    }
    let methods = methods
        .into_iter()
        .map(|mut o| {
            for r in &mut o.rows {
                r.row = split.test[r.row];
            }
            o
        })
        .collect();
    log::info!("repetition {} done", seeds.rep);
    Ok(RepOutcome { seeds, methods })
}

fn set_rows(sets: &[PredictionSet<f64>], y: &[f64]) -> Vec<RowRecord> {
    sets.iter()
        .zip(y)
        .enumerate()
        .map(|(i, (s, &y))| RowRecord {
            row: i,
            y,
            covered: s.contains(y),
            size: s.size(),
            n_components: s.n_components(),
            set: s.to_compact_string(),
        })
        .collect()
}

fn set_outcome(
    method: Method,
    sets: &[PredictionSet<f64>],
    y: &[f64],
    clamp_rate: f64,
    histogram: Option<LengthHistogram>,
) -> cti::Result<MethodOutcome> {
    Ok(MethodOutcome {
        method,
        rows: set_rows(sets, y),
        coverage: coverage(sets, y)?,
        size: mean_size(sets)?,
        n_components: Some(mean_components(sets)?),
        clamp_rate: Some(clamp_rate),
        histogram,
    })
}

/// Clamped responses lie outside the set, so a high calibration clamp rate
/// can cost coverage.
fn warn_on_clamping(method: Method, rate: f64, alpha: f64) {
    if rate > alpha / 5.0 {
        log::warn!(
            "{method}: {:.1}% of calibration responses fall outside the predicted quantile range; \
             coverage may fall short of the target, consider boundary=infinite or larger leaves",
            100.0 * rate
        );
    }
}

fn cti_single(
    cfg: &ExperimentConfig,
    method: Method,
    fitted: &Fitted,
    cal_y: &[f64],
    test_y: &[f64],
) -> cti::Result<MethodOutcome> {
    let cal = partitions(fitted.cal.clone());
    let test = partitions(fitted.test.clone());
    let c = CtiCalibration::fit(&cal, cal_y, cfg.alpha, cfg.boundary)?;
    warn_on_clamping(method, c.clamp_rate(), cfg.alpha);
    let sets: Vec<_> = test
        .iter()
        .map(|p| c.predict(p, cfg.fallback_shortest))
        .collect();
    let histogram = match length_histograms(&test, test_y, cfg.bins, cfg.boundary) {
        Ok(h) => Some(h),
        Err(e) => {
            log::warn!("{method}: no length histogram: {e}");
            None
        }
    };
    set_outcome(method, &sets, test_y, c.clamp_rate(), histogram)
}

fn cti_harmonic(
    cfg: &ExperimentConfig,
    a: &Fitted,
    b: &Fitted,
    cal_y: &[f64],
    test_y: &[f64],
) -> cti::Result<MethodOutcome> {
    let cal_a = partitions(a.cal.clone());
    let cal_b = partitions(b.cal.clone());
    let mut scores = Vec::with_capacity(cal_y.len());
    let mut clamped = 0usize;
    for ((pa, pb), &y) in cal_a.iter().zip(&cal_b).zip(cal_y) {
        let sa = pa.conformity_score(y, cfg.boundary)?;
        let sb = pb.conformity_score(y, cfg.boundary)?;
        if sa.boundary_clamped || sb.boundary_clamped {
            clamped += 1;
        }
        scores.push(harmonic_aggregate(sa.value, sb.value)?);
    }
    let th = calibrate_values(&scores, cfg.alpha)?;
    let sets: Vec<_> = a
        .test
        .iter()
        .zip(&b.test)
        .map(|(ga, gb)| {
            let pa = IntervalPartition::new(ga.clone());
            let pb = IntervalPartition::new(gb.clone());
            harmonic_predict(&pa, &pb, &th, cfg.boundary)
        })
        .collect();
    let rate = clamped as f64 / cal_y.len().max(1) as f64;
    warn_on_clamping(Method::CtiHarmonic, rate, cfg.alpha);
    set_outcome(Method::CtiHarmonic, &sets, test_y, rate, None)
}

fn interval_outcome(
    method: Method,
    intervals: &[Interval<f64>],
    y: &[f64],
) -> cti::Result<MethodOutcome> {
    let rows = intervals
        .iter()
        .zip(y)
        .enumerate()
        .map(|(i, (iv, &y))| RowRecord {
            row: i,
            y,
            covered: iv.contains(y),
            size: iv.size(),
            n_components: 1,
            set: format!("[{};{}]", iv.lo, iv.hi),
        })
        .collect();
    Ok(MethodOutcome {
        method,
        rows,
        coverage: coverage(intervals, y)?,
        size: mean_size(intervals)?,
        n_components: None,
        clamp_rate: None,
        histogram: None,
    })
}

pub const ROW_HEADER: [&str; 6] = ["row", "y", "covered", "size", "n_components", "set"];

fn create(path: &Path) -> io::Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn write_rows(path: &Path, rows: &[RowRecord]) -> Result<(), RunError> {
    let mut w = create(path)?;
    writeln!(w, "{}", ROW_HEADER.join(","))?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.row, r.y, r.covered as u8, r.size, r.n_components, r.set
        )?;
    }
    w.flush()?;
    Ok(())
}

fn write_manifest(path: &Path, cfg: &ExperimentConfig, out: &RunOutput) -> Result<(), RunError> {
    let mut w = create(path)?;
    writeln!(w, "# config")?;
    for (k, v) in cfg.to_pairs() {
        writeln!(w, "{k} = {v}")?;
    }
    writeln!(w, "# versions")?;
    writeln!(w, "cti = {}", cti::VERSION)?;
    writeln!(w, "cti-cli = {}", env!("CARGO_PKG_VERSION"))?;
    writeln!(w, "# seeds")?;
    if let Some(Source::Scenario(_)) = cfg.source {
        writeln!(w, "data_seed = {}", cfg.seed)?;
    }
    let opt = |s: Option<u64>| s.map_or("-".to_owned(), |s| s.to_string());
    for r in &out.reps {
        let s = r.seeds;
        writeln!(
            w,
            "rep{} = split:{} forest:{} nn:{}",
            s.rep,
            s.split,
            opt(s.forest),
            opt(s.nn)
        )?;
    }
    for (r, e) in &out.failures {
        writeln!(w, "failed_rep{r} = {e}")?;
    }
    w.flush()?;
    Ok(())
}

/// Writes every output file from one thread, in a fixed order.
fn write_outputs(cfg: &ExperimentConfig, out: &RunOutput) -> Result<Vec<PathBuf>, RunError> {
    fs::create_dir_all(&cfg.out)?;
    let name = &out.dataset;
    let mut files = Vec::new();
    for rep in &out.reps {
        let r = rep.seeds.rep;
        for o in &rep.methods {
            let path = cfg.out.join(format!("{name}_{}_rep{r}.csv", o.method));
            write_rows(&path, &o.rows)?;
            files.push(path);
            if let Some(h) = &o.histogram {
                let path = cfg.out.join(format!("{name}_{}_rep{r}_hist.csv", o.method));
                write_histogram(create(&path)?, h).map_err(RunError::Report)?;
                files.push(path);
            }
        }
    }
    let path = cfg.out.join(format!("{name}_summary.csv"));
    write_report(create(&path)?, name, &out.reports).map_err(RunError::Report)?;
    files.push(path);
    let path = cfg.out.join(format!("{name}_manifest.txt"));
    write_manifest(&path, cfg, out)?;
    files.push(path);
    Ok(files)
}
