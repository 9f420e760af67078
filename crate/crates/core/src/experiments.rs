//! Monte Carlo exceedance tables and diagnostic series.
//!
//! Each cell (sample size or grid step, gamma family) runs its replicates on
//! the stream `cell << 32 | replicate` of a ChaCha8 generator seeded with the
//! run seed, so a cell reproduces on its own.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{
    assumption_a3_series, assumption_a3_weighted_series, consistency_ratio, eigendecompose_limited, error_upper_bound,
    estimate_from_eigensystem, log_error_upper_bound, truncation_level, Route, Sample,
    TruncationRule,
};
use crate::grid::Grid;
use crate::mra::{WaveletBasis, WaveletConfig};
use crate::procgen::{simulate_with_rng, ModelConfig, ModelSpec, SineToWavelet};
use crate::spaces::{ext_htilde_weights, flat_sup_norm, GammaFamily};

/// Replicates may be skipped (tied eigenvalues) up to this fraction.
pub const MAX_SKIP_FRACTION: f64 = 0.1;

/// One family or a list of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Families {
    Many(Vec<GammaFamily>),
    One(GammaFamily),
}

impl Families {
    pub fn to_vec(&self) -> Vec<GammaFamily> {
        match self {
            Families::Many(v) => v.clone(),
            Families::One(f) => vec![f.clone()],
        }
    }
}

/// Spectrum plugged into the bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundSpectrum {
    /// Eigenvalues of the model's `C̄`.
    Theoretical,
    /// Empirical eigenvalues of the replicate.
    Empirical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub sample_sizes: Vec<usize>,
    pub replicates: usize,
    pub gamma_family: Families,
    pub discretization_steps: Vec<f64>,
    pub truncation_rule: TruncationRule,
    pub rng_seed: u64,
    pub output_path: String,
    pub model: ModelConfig,
    pub wavelet: WaveletConfig,
    pub bound_spectrum: BoundSpectrum,
    pub route: Route,
    /// Number of probes for the `L_k` series.
    pub a3_probes: usize,
    /// `k` values of the `L_k` series.
    pub a3_levels: Vec<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            sample_sizes: vec![1500, 2500, 5000],
            replicates: 50,
            gamma_family: Families::One(GammaFamily::Gamma1),
            discretization_steps: vec![1.0 / 27.0, 1.0 / 81.0, 1.0 / 243.0],
            truncation_rule: TruncationRule::LogN,
            rng_seed: 2019,
            output_path: "table.csv".into(),
            model: ModelConfig::default(),
            wavelet: WaveletConfig::default(),
            bound_spectrum: BoundSpectrum::Theoretical,
            route: Route::Dense,
            a3_probes: 200,
            a3_levels: (1..=10).collect(),
        }
    }
}

impl ExperimentConfig {
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.replicates < 1 {
            out.push("replicates must be at least 1".into());
        }
        if self.sample_sizes.is_empty() {
            out.push("sample_sizes is empty".into());
        }
        for n in &self.sample_sizes {
            if *n < 10 {
                out.push(format!("sample size {n} is below 10"));
            }
        }
        for h in &self.discretization_steps {
            if !(*h > 0.0 && *h < 0.5) {
                out.push(format!("discretization step {h} is outside (0, 0.5)"));
            }
        }
        if self.a3_levels.iter().any(|k| *k < 1) {
            out.push("a3_levels must be positive".into());
        }
        if let Err(e) = self.wavelet.validate() {
            out.push(e.to_string());
        }
        let families = self.gamma_family.to_vec();
        if families.is_empty() {
            out.push("gamma_family is empty".into());
        }
        for f in families {
            let m = ModelConfig {
                gamma_family: f,
                ..self.model.clone()
            };
            out.extend(m.violations());
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        match self.violations().into_iter().next() {
            Some(v) => Err(Error::Config(v)),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExceedanceRow {
    pub n: usize,
    pub delta_h: f64,
    pub gamma_family: String,
    pub exceed: usize,
    pub total: usize,
    pub pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub cell: u64,
    pub n: usize,
    pub delta_h: f64,
    pub gamma_family: String,
    pub k: usize,
    pub seed: u64,
    pub stream_base: u64,
    pub skipped: usize,
    pub mean_error: f64,
    pub mean_bound: f64,
    pub mean_log_bound: f64,
    pub mean_x0_norm: f64,
    /// Largest `error / M` among the replicates.
    pub max_error_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkipRecord {
    pub cell: u64,
    pub replicate: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExceedanceTable {
    pub rows: Vec<ExceedanceRow>,
    pub cells: Vec<CellSummary>,
    pub skipped: Vec<SkipRecord>,
    pub config: ExperimentConfig,
}

/// Outcome of one replicate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplicateOutcome {
    pub error: f64,
    pub bound: f64,
    pub log_bound: f64,
    pub x0_norm: f64,
}

impl ReplicateOutcome {
    pub fn exceeds(&self) -> bool {
        self.error > self.bound
    }
}

/// Everything a cell needs that does not change across replicates.
#[derive(Debug, Clone)]
pub struct CellModel {
    spec: ModelSpec,
    transfer: DMatrix<f64>,
    weights: DVector<f64>,
    theoretical: Vec<f64>,
    delta_h: f64,
    burn_in: usize,
}

impl CellModel {
    /// Model on a closed grid of `grid_size` points with the basis resampled
    /// to it.
    pub fn new(model: &ModelConfig, basis: &WaveletBasis, grid_size: usize) -> Result<Self> {
        let grid = Grid::closed(grid_size)?;
        let spec = ModelConfig {
            grid_size,
            ..model.clone()
        }
        .build()?;
        let basis = if basis.grid() == grid {
            basis.clone()
        } else {
            basis.resample(grid)?
        };
        let k = spec.b() + 1;
        let transfer = SineToWavelet::new(&basis, spec.truncation()).block(k);
        let weights = DVector::from_vec(ext_htilde_weights(&basis, spec.params().beta(), k));
        let theoretical = spec.state_covariance().eigenvalues();
        Ok(Self {
            spec,
            transfer,
            weights,
            theoretical,
            delta_h: grid.step(),
            burn_in: model.burn_in,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    /// Sine-to-wavelet map for the extended state.
    pub fn transfer(&self) -> &DMatrix<f64> {
        &self.transfer
    }

    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    pub fn theoretical_eigenvalues(&self) -> &[f64] {
        &self.theoretical
    }

    pub fn delta_h(&self) -> f64 {
        self.delta_h
    }

    /// The true autocorrelation operator on wavelet coordinates, through the
    /// pseudo-inverse of the transfer map.
    pub fn wavelet_operator(&self) -> Result<DMatrix<f64>> {
        let pinv = self
            .transfer
            .clone()
            .pseudo_inverse(1e-12)
            .map_err(|e| Error::Numeric(e.to_string()))?;
        Ok(&self.transfer * self.spec.action() * pinv)
    }

    /// Simulate, estimate and compare against the bound.
    pub fn replicate(
        &self,
        n: usize,
        k: usize,
        route: Route,
        spectrum: BoundSpectrum,
        rng: &mut ChaCha8Rng,
    ) -> Result<ReplicateOutcome> {
        let traj = simulate_with_rng(&self.spec, n, self.burn_in, rng)?;
        let sample = Sample::factored(
            traj.coefficients().clone(),
            self.transfer.clone(),
            self.weights.clone(),
        )?;
        let eig = eigendecompose_limited(&sample, route, Some(k))?;
        let op = estimate_from_eigensystem(&sample, &eig, k)?;
        let last = traj.coefficients().row(n - 1).transpose();
        let truth = &self.transfer * (self.spec.action() * &last);
        let pred = op.apply(&(&self.transfer * &last))?;
        let error = flat_sup_norm((truth - pred).as_slice());
        let x0 = &self.transfer * traj.initial_coefficients();
        let x0_norm = flat_sup_norm(x0.as_slice());
        let eigenvalues = match spectrum {
            BoundSpectrum::Theoretical => self.theoretical.as_slice(),
            BoundSpectrum::Empirical => eig.eigenvalues(),
        };
        let bound = error_upper_bound(x0_norm, eigenvalues, n, k)?;
        let log_bound = log_error_upper_bound(x0_norm, eigenvalues, n, k)?;
        Ok(ReplicateOutcome {
            error,
            bound,
            log_bound,
            x0_norm,
        })
    }

    pub fn burn_in(&self) -> usize {
        self.burn_in
    }
}

struct CellPlan {
    id: u64,
    n: usize,
    family: GammaFamily,
    model: CellModel,
}

/// Generator of replicate `rep` in cell `cell`.
pub fn replicate_rng(seed: u64, cell: u64, rep: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((cell << 32) | rep as u64);
    rng
}

fn run_cells(config: &ExperimentConfig, plans: Vec<CellPlan>) -> Result<ExceedanceTable> {
    let jobs: Vec<(usize, usize)> = (0..plans.len())
        .flat_map(|c| (0..config.replicates).map(move |r| (c, r)))
        .collect();
    let mut results = jobs
        .par_iter()
        .map(|&(c, r)| {
            let plan = &plans[c];
            let k = truncation_level(plan.n, config.truncation_rule);
            let mut rng = replicate_rng(config.rng_seed, plan.id, r);
            plan.model
                .replicate(plan.n, k, config.route, config.bound_spectrum, &mut rng)
        })
        .collect::<Vec<Result<ReplicateOutcome>>>()
        .into_iter();

    let mut rows = Vec::with_capacity(plans.len());
    let mut cells = Vec::with_capacity(plans.len());
    let mut skipped = Vec::new();
    for plan in &plans {
        let k = truncation_level(plan.n, config.truncation_rule);
        let mut outcomes = Vec::with_capacity(config.replicates);
        let mut skips = 0;
        for r in 0..config.replicates {
            let result = results.next().expect("one result per job");
            match result {
                Ok(o) => outcomes.push(o),
                Err(e @ (Error::DegenerateGap(_) | Error::Truncation(_))) => {
                    skips += 1;
                    skipped.push(SkipRecord {
                        cell: plan.id,
                        replicate: r,
                        reason: e.to_string(),
                    });
                }
                Err(e) => return Err(e),
            }
        }
        if skips as f64 > MAX_SKIP_FRACTION * config.replicates as f64 {
            return Err(Error::Experiment(format!(
                "cell {} (n = {}) skipped {skips} of {} replicates",
                plan.id, plan.n, config.replicates
            )));
        }
        let total = outcomes.len();
        let exceed = outcomes.iter().filter(|o| o.exceeds()).count();
        let mean = |f: fn(&ReplicateOutcome) -> f64| {
            if total == 0 {
                f64::NAN
            } else {
                outcomes.iter().map(f).sum::<f64>() / total as f64
            }
        };
        let label = plan.family.label();
        rows.push(ExceedanceRow {
            n: plan.n,
            delta_h: plan.model.delta_h(),
            gamma_family: label.clone(),
            exceed,
            total,
            pct: if total == 0 {
                0.0
            } else {
                100.0 * exceed as f64 / total as f64
            },
        });
        cells.push(CellSummary {
            cell: plan.id,
            n: plan.n,
            delta_h: plan.model.delta_h(),
            gamma_family: label,
            k,
            seed: config.rng_seed,
            stream_base: plan.id << 32,
            skipped: skips,
            mean_error: mean(|o| o.error),
            mean_bound: mean(|o| o.bound),
            mean_log_bound: mean(|o| o.log_bound),
            mean_x0_norm: mean(|o| o.x0_norm),
            max_error_ratio: outcomes
                .iter()
                .map(|o| o.error / o.x0_norm)
                .fold(f64::NAN, f64::max),
        });
    }
    Ok(ExceedanceTable {
        rows,
        cells,
        skipped,
        config: config.clone(),
    })
}

/// Exceedance percentages across sample sizes on the model grid.
pub fn run_consistency_experiment(config: &ExperimentConfig) -> Result<ExceedanceTable> {
    config.validate()?;
    let basis = WaveletBasis::build(config.wavelet)?;
    let mut plans = Vec::new();
    for (fi, family) in config.gamma_family.to_vec().into_iter().enumerate() {
        let model = ModelConfig {
            gamma_family: family.clone(),
            ..config.model.clone()
        };
        let cell_model = CellModel::new(&model, &basis, config.model.grid_size)?;
        for (ni, &n) in config.sample_sizes.iter().enumerate() {
            plans.push(CellPlan {
                id: (fi * config.sample_sizes.len() + ni) as u64,
                n,
                family: family.clone(),
                model: cell_model.clone(),
            });
        }
    }
    log::info!("consistency experiment: {} cells x {} replicates", plans.len(), config.replicates);
    run_cells(config, plans)
}

/// Grid points of a closed grid with step close to `delta_h`.
pub fn sweep_grid_size(delta_h: f64) -> usize {
    (1.0 / delta_h + 1e-9).floor() as usize + 1
}

/// Exceedance percentages across grid steps and sample sizes.
pub fn run_discretization_sweep(config: &ExperimentConfig) -> Result<ExceedanceTable> {
    config.validate()?;
    if config.discretization_steps.is_empty() {
        return Err(Error::Config("discretization_steps is empty".into()));
    }
    let basis = WaveletBasis::build(config.wavelet)?;
    let mut plans = Vec::new();
    let families = config.gamma_family.to_vec();
    let per_family = config.discretization_steps.len() * config.sample_sizes.len();
    for (fi, family) in families.into_iter().enumerate() {
        let model = ModelConfig {
            gamma_family: family.clone(),
            ..config.model.clone()
        };
        for (hi, &h) in config.discretization_steps.iter().enumerate() {
            let cell_model = CellModel::new(&model, &basis, sweep_grid_size(h))?;
            for (ni, &n) in config.sample_sizes.iter().enumerate() {
                plans.push(CellPlan {
                    id: (fi * per_family + hi * config.sample_sizes.len() + ni) as u64,
                    n,
                    family: family.clone(),
                    model: cell_model.clone(),
                });
            }
        }
    }
    log::info!("discretization sweep: {} cells x {} replicates", plans.len(), config.replicates);
    run_cells(config, plans)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct A3Point {
    pub k: usize,
    /// Sup-norm residual.
    pub l_k: f64,
    /// Weighted-norm residual on the same probes.
    pub l_k_htilde: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioPoint {
    pub n: usize,
    pub k_n: usize,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    pub a3: Vec<A3Point>,
    pub ratio: Vec<RatioPoint>,
}

/// `L_k` on one trajectory of the first configured size, and the
/// consistency ratio for every configured size, for the first family.
pub fn compute_diagnostics(config: &ExperimentConfig) -> Result<Diagnostics> {
    config.validate()?;
    let basis = WaveletBasis::build(config.wavelet)?;
    let family = config.gamma_family.to_vec().remove(0);
    let model = ModelConfig {
        gamma_family: family,
        ..config.model.clone()
    };
    let cell = CellModel::new(&model, &basis, config.model.grid_size)?;
    let n = config.sample_sizes[0];
    let mut rng = replicate_rng(config.rng_seed, u64::from(u32::MAX), 0);
    let traj = simulate_with_rng(cell.spec(), n, cell.burn_in(), &mut rng)?;
    let sample = Sample::factored(
        traj.coefficients().clone(),
        cell.transfer().clone(),
        cell.weights().clone(),
    )?;
    let kmax = config.a3_levels.iter().copied().max().unwrap_or(1);
    let eig = eigendecompose_limited(&sample, config.route, Some(kmax))?;
    let op = cell.wavelet_operator()?;
    let values = assumption_a3_series(&op, &eig, &config.a3_levels, config.a3_probes, config.rng_seed)?;
    let weighted =
        assumption_a3_weighted_series(&op, &eig, &config.a3_levels, config.a3_probes, config.rng_seed)?;
    let a3 = config
        .a3_levels
        .iter()
        .zip(values.into_iter().zip(weighted))
        .map(|(&k, (l_k, l_k_htilde))| A3Point { k, l_k, l_k_htilde })
        .collect();
    let ratio = config
        .sample_sizes
        .iter()
        .map(|&n| {
            let k_n = truncation_level(n, config.truncation_rule);
            consistency_ratio(cell.theoretical_eigenvalues(), n, k_n).map(|ratio| RatioPoint { n, k_n, ratio })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Diagnostics { a3, ratio })
}

/// Writes `<stem>_a3.csv` and `<stem>_ratio.csv` next to `out`.
pub fn emit_diagnostics(config: &ExperimentConfig, out: &Path) -> Result<Diagnostics> {
    let d = compute_diagnostics(config)?;
    let (a3_path, ratio_path) = diagnostic_paths(out);
    write_records(&a3_path, &d.a3)?;
    write_records(&ratio_path, &d.ratio)?;
    Ok(d)
}

pub fn diagnostic_paths(out: &Path) -> (std::path::PathBuf, std::path::PathBuf) {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "diagnostics".into());
    let dir = out.parent().unwrap_or_else(|| Path::new(""));
    (
        dir.join(format!("{stem}_a3.csv")),
        dir.join(format!("{stem}_ratio.csv")),
    )
}

pub fn write_records<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn csv_io(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            _ => unreachable!(),
        }
    } else {
        Error::Serde(e.to_string())
    }
}

/// CSV with header `n,delta_h,gamma_family,exceed,total,pct`.
pub fn write_table_csv(table: &ExceedanceTable, path: &Path) -> Result<()> {
    write_records(path, &table.rows)
}

impl ExceedanceTable {
    /// Row of the first matching cell.
    pub fn row(&self, n: usize, delta_h: Option<f64>) -> Option<&ExceedanceRow> {
        self.rows.iter().find(|r| {
            r.n == n && delta_h.is_none_or(|h| (r.delta_h - h).abs() < 1e-12)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ExperimentConfig {
        ExperimentConfig {
            sample_sizes: vec![60],
            replicates: 3,
            discretization_steps: vec![1.0 / 27.0],
            model: ModelConfig {
                m: 10,
                burn_in: 20,
                grid_size: 32,
                ..ModelConfig::default()
            },
            wavelet: WaveletConfig {
                order: 4,
                grid_levels: 9,
                primary_level: 2,
                last_level: 4,
            },
            a3_levels: vec![1, 2, 3],
            a3_probes: 20,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn default_config_is_valid() {
        assert!(ExperimentConfig::default().violations().is_empty());
        let mut c = ExperimentConfig::default();
        c.replicates = 0;
        c.sample_sizes = vec![5];
        c.discretization_steps = vec![0.5];
        assert_eq!(c.violations().len(), 3);
    }

    #[test]
    fn sweep_grid_sizes() {
        assert_eq!(sweep_grid_size(1.0 / 27.0), 28);
        assert_eq!(sweep_grid_size(1.0 / 81.0), 82);
        assert_eq!(sweep_grid_size(1.0 / 243.0), 244);
        assert_eq!(sweep_grid_size(0.0159), 63);
    }

    #[test]
    fn families_parse_one_or_many() {
        let one: Families = serde_json::from_str("\"gamma1\"").unwrap();
        assert_eq!(one.to_vec(), vec![GammaFamily::Gamma1]);
        let many: Families = serde_json::from_str("[\"gamma1\", \"gamma2\"]").unwrap();
        assert_eq!(many.to_vec().len(), 2);
    }

    #[test]
    fn percentages_are_exact_and_runs_repeat() {
        let c = tiny();
        let a = run_consistency_experiment(&c).unwrap();
        let b = run_consistency_experiment(&c).unwrap();
        assert_eq!(a, b);
        for r in &a.rows {
            assert_eq!(r.pct, 100.0 * r.exceed as f64 / r.total as f64);
            assert_eq!(r.total + a.cells[0].skipped, 3);
        }
    }

    #[test]
    fn single_replicate_is_all_or_nothing() {
        let mut c = tiny();
        c.replicates = 1;
        let t = run_consistency_experiment(&c).unwrap();
        assert!(t.rows[0].pct == 0.0 || t.rows[0].pct == 100.0);
    }

    #[test]
    fn cells_reproduce_in_isolation() {
        let mut c = tiny();
        c.sample_sizes = vec![40, 60];
        let both = run_consistency_experiment(&c).unwrap();
        // cell 1 alone: same seed and stream as in the full run
        let basis = WaveletBasis::build(c.wavelet).unwrap();
        let cell = CellModel::new(&c.model, &basis, c.model.grid_size).unwrap();
        let k = truncation_level(60, c.truncation_rule);
        let exceed = (0..c.replicates)
            .filter(|&r| {
                let mut rng = replicate_rng(c.rng_seed, 1, r);
                cell.replicate(60, k, c.route, c.bound_spectrum, &mut rng)
                    .unwrap()
                    .exceeds()
            })
            .count();
        assert_eq!(both.rows[1].exceed, exceed);
    }

    #[test]
    fn sweep_rows_follow_steps() {
        let mut c = tiny();
        c.discretization_steps = vec![1.0 / 27.0, 1.0 / 9.0];
        let t = run_discretization_sweep(&c).unwrap();
        assert_eq!(t.rows.len(), 2);
        assert!((t.rows[0].delta_h - 1.0 / 27.0).abs() < 1e-15);
        assert!((t.rows[1].delta_h - 1.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn diagnostics_series() {
        let c = tiny();
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("diag.csv");
        let d = emit_diagnostics(&c, &out).unwrap();
        assert_eq!(d.a3.len(), 3);
        assert!(d.ratio.iter().all(|r| r.ratio.is_finite()));
        let (a3, ratio) = diagnostic_paths(&out);
        let text = std::fs::read_to_string(a3).unwrap();
        assert_eq!(text.lines().count(), 1 + 3);
        assert!(text.starts_with("k,l_k"));
        assert!(std::fs::read_to_string(ratio).unwrap().starts_with("n,k_n,ratio"));
    }

    #[test]
    fn table_csv_header() {
        let c = tiny();
        let t = run_consistency_experiment(&c).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        write_table_csv(&t, &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("n,delta_h,gamma_family,exceed,total,pct\n"));
    }
}
