use std::collections::BTreeMap;

use super::config::{ExperimentConfig, Method, Point};
use super::training::{gaussian_samples, measurement_samples, CodebookTraining};
use crate::abs::abs_quantize;
use crate::baselines::{magnitude_allocation, support_set_decode, support_set_encode, GaussianCodebooks, SupportSetOutcome};
use crate::linalg::sq_distance;
use crate::par;
use crate::quantization::{decode, encode_nearest, lloyd_train, Codebook, RateAllocation};
use crate::reconstruction::{omp_reconstruct, Omp};
use crate::rng::{derive, Domain};
use crate::signal::{gen_sensing_matrix, gen_sparse_signal, measure, SensingMatrix, SparseSignal};
use crate::{Error, Result};

/// Outcome of one method on one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub method: Method,
    pub alpha: f64,
    pub r_x: f64,
    pub n: usize,
    pub trial_id: usize,
    pub squared_error: f64,
    pub signal_energy: f64,
    /// AbS sweeps (0 for the other methods).
    pub iterations: usize,
    /// Encoder-side reconstructions.
    pub recon_calls: u64,
}

impl TrialRecord {
    pub fn nmse(&self) -> f64 {
        self.squared_error / self.signal_energy
    }
}

/// The (x, Φ, y) triple every method of a trial consumes.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub x: SparseSignal,
    pub phi: SensingMatrix,
    pub y: Vec<f64>,
}

impl Instance {
    /// Draws the instance for (`n`, `trial_id`). The stream depends only on
    /// the master seed, N and the trial index, so every method and every
    /// rate at the same N sees the same triple.
    pub fn draw(master_seed: u64, m: usize, k: usize, n: usize, trial_id: usize) -> Result<Self> {
        let mut rng = derive(master_seed, Domain::Instance, &[n as u64, trial_id as u64]);
        let x = gen_sparse_signal(&mut rng, m, k)?;
        let phi = gen_sensing_matrix(&mut rng, n, m)?;
        let y = measure(&phi, &x)?;
        Ok(Self { x, phi, y })
    }
}

/// Codebooks and allocations for one operating point.
#[derive(Debug, Clone)]
pub struct PreparedPoint {
    pub point: Point,
    /// `None` when R_x < N, i.e. some entry would get zero bits.
    pub allocation: Option<RateAllocation>,
    /// One codebook per measurement entry (shared per width).
    pub codebooks: Vec<Codebook>,
}

impl PreparedPoint {
    pub fn base_bits(&self) -> u32 {
        self.allocation.as_ref().map_or(0, RateAllocation::base_bits)
    }
}

/// Everything trained before the trial loop.
#[derive(Debug, Clone)]
pub struct PreparedExperiment {
    pub config: ExperimentConfig,
    pub points: Vec<PreparedPoint>,
    pub gaussian_codebooks: GaussianCodebooks,
}

fn capped(widths: &[u32], max_bits: u32) -> Vec<u32> {
    widths.iter().map(|&b| b.min(max_bits)).collect()
}

/// Budget actually spent by support-set coding once value widths are capped
/// at `max_bits`. Widths differ by at most one bit, so clamping the budget
/// is the same as clamping every width.
fn support_budget(m: usize, k: usize, total_bits: u64, max_bits: u32) -> u64 {
    let positions = k as u64 * u64::from(m.trailing_zeros());
    total_bits.min(positions + k as u64 * u64::from(max_bits))
}

impl PreparedExperiment {
    /// Trains every codebook the sweep needs: one per distinct (N, width)
    /// for the measurements and one per width for support-set values.
    pub fn prepare(config: &ExperimentConfig) -> Result<Self> {
        let points = config.points()?;
        par::with_threads(config.threads, || Self::prepare_inner(config, points))?
    }

    fn prepare_inner(config: &ExperimentConfig, points: Vec<Point>) -> Result<Self> {
        let training = CodebookTraining {
            samples: config.training_samples,
            tol: config.lloyd_tol,
            max_iter: config.lloyd_max_iter,
        };
        let wants_measurement = config.methods.iter().any(|&m| m != Method::SupportSet);

        let mut allocations = Vec::with_capacity(points.len());
        let mut needed: BTreeMap<usize, Vec<u32>> = BTreeMap::new();
        for p in &points {
            let allocation = match RateAllocation::split(p.total_bits, p.n) {
                Ok(a) => Some(a),
                Err(Error::BudgetTooSmall { .. }) => None,
                Err(e) => return Err(e),
            };
            if let (Some(a), true) = (&allocation, wants_measurement) {
                needed
                    .entry(p.n)
                    .or_default()
                    .extend(capped(&a.widths(), config.max_bits));
            }
            allocations.push(allocation);
        }

        let jobs: Vec<(usize, u32)> = needed
            .into_iter()
            .flat_map(|(n, mut widths)| {
                widths.sort_unstable();
                widths.dedup();
                widths.into_iter().map(move |w| (n, w))
            })
            .collect();
        // one sample pool per N, shared by its widths
        let mut pools: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        for &(n, _) in &jobs {
            pools
                .entry(n)
                .or_insert_with(|| measurement_samples(config.master_seed, n, config.k, training.samples));
        }
        let trained: Vec<Result<Codebook>> = par::map_range(jobs.len(), |j| {
            let (n, bits) = jobs[j];
            lloyd_train(&pools[&n], 1usize << bits, training.tol, training.max_iter).map(|o| o.codebook)
        });
        let mut measurement_books: BTreeMap<(usize, u32), Codebook> = BTreeMap::new();
        for (job, book) in jobs.into_iter().zip(trained) {
            measurement_books.insert(job, book?);
        }

        let mut gaussian_codebooks = GaussianCodebooks::new();
        if config.methods.contains(&Method::SupportSet) {
            let mut widths = Vec::new();
            for p in &points {
                let budget = support_budget(config.m, config.k, p.total_bits, config.max_bits);
                if let Some(w) = magnitude_allocation(config.m, config.k, budget)? {
                    widths.extend(w);
                }
            }
            widths.sort_unstable();
            widths.dedup();
            if !widths.is_empty() {
                let samples = gaussian_samples(config.master_seed, training.samples);
                let books: Vec<Result<Codebook>> = par::map_range(widths.len(), |i| {
                    lloyd_train(&samples, 1usize << widths[i], training.tol, training.max_iter).map(|o| o.codebook)
                });
                for (w, book) in widths.into_iter().zip(books) {
                    gaussian_codebooks.insert(w, book?);
                }
            }
        }

        let prepared = points
            .into_iter()
            .zip(allocations)
            .map(|(point, allocation)| {
                let codebooks = match (&allocation, wants_measurement) {
                    (Some(a), true) => capped(a.per_entry(), config.max_bits)
                        .into_iter()
                        .map(|b| measurement_books[&(point.n, b)].clone())
                        .collect(),
                    _ => Vec::new(),
                };
                PreparedPoint {
                    point,
                    allocation,
                    codebooks,
                }
            })
            .collect();

        Ok(Self {
            config: config.clone(),
            points: prepared,
            gaussian_codebooks,
        })
    }

    /// Runs `method` on the instance of `trial_id` at point `point_index`.
    pub fn run_trial(&self, point_index: usize, method: Method, trial_id: usize) -> Result<TrialRecord> {
        let point = self
            .points
            .get(point_index)
            .ok_or_else(|| Error::InvalidInput(format!("no point {point_index}")))?;
        let cfg = &self.config;
        let instance = Instance::draw(cfg.master_seed, cfg.m, cfg.k, point.point.n, trial_id)?;
        self.run_on_instance(point, method, trial_id, &instance)
    }

    /// Runs `method` on an already drawn instance.
    pub fn run_on_instance(
        &self,
        point: &PreparedPoint,
        method: Method,
        trial_id: usize,
        instance: &Instance,
    ) -> Result<TrialRecord> {
        let cfg = &self.config;
        let Point { alpha, r_x, n, total_bits } = point.point;
        // OMP cannot select more columns than there are measurements
        let k_eff = cfg.k.min(n);
        let energy = instance.x.energy();
        let mut record = TrialRecord {
            method,
            alpha,
            r_x,
            n,
            trial_id,
            squared_error: energy,
            signal_energy: energy,
            iterations: 0,
            recon_calls: 0,
        };
        let x = instance.x.values();
        match method {
            Method::Abs => {
                if point.allocation.is_none() {
                    return Ok(record);
                }
                let mut rng = derive(cfg.master_seed, Domain::AbsInit, &[n as u64, total_bits, trial_id as u64]);
                let enc = abs_quantize(
                    &instance.y,
                    &instance.phi,
                    k_eff,
                    &point.codebooks,
                    &cfg.abs_config(),
                    &Omp,
                    &mut rng,
                )?;
                let x_hat = omp_reconstruct(&instance.phi, &enc.decoded, k_eff)?;
                record.squared_error = sq_distance(x, &x_hat);
                record.iterations = enc.diagnostics.iterations;
                record.recon_calls = enc.diagnostics.recon_calls;
            }
            Method::NearestNeighbor => {
                if point.allocation.is_none() {
                    return Ok(record);
                }
                let q = encode_nearest(&instance.y, &point.codebooks)?;
                let y_hat = decode(&q, &point.codebooks)?;
                let x_hat = omp_reconstruct(&instance.phi, &y_hat, k_eff)?;
                record.squared_error = sq_distance(x, &x_hat);
            }
            Method::SupportSet => {
                let x_tilde = omp_reconstruct(&instance.phi, &instance.y, k_eff)?;
                record.recon_calls = 1;
                let books = &self.gaussian_codebooks;
                let budget = support_budget(cfg.m, cfg.k, total_bits, cfg.max_bits);
                if let SupportSetOutcome::Coded(code) = support_set_encode(&x_tilde, cfg.k, budget, books)? {
                    let x_hat = support_set_decode(&code, cfg.m, books)?;
                    record.squared_error = sq_distance(x, &x_hat);
                }
            }
        }
        Ok(record)
    }
}

/// One row of the aggregate CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub method: Method,
    pub alpha: f64,
    pub r_x: f64,
    pub n: usize,
    pub r_y_base: u32,
    pub trials: usize,
    pub nmse: f64,
    pub nmse_db: f64,
    pub mean_iterations: f64,
    pub mean_recon_calls: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub aggregates: Vec<AggregateRow>,
    /// Ordered by (method, point, trial).
    pub trials: Vec<TrialRecord>,
}

impl ExperimentResult {
    pub fn nmse(&self, method: Method, alpha: f64, r_x: f64) -> Option<f64> {
        self.aggregates
            .iter()
            .find(|r| r.method == method && r.alpha == alpha && r.r_x == r_x)
            .map(|r| r.nmse)
    }
}

fn aggregate(method: Method, point: &PreparedPoint, records: &[TrialRecord]) -> AggregateRow {
    // summed in trial order, independent of which worker produced a record
    let error: f64 = records.iter().map(|r| r.squared_error).sum();
    let energy: f64 = records.iter().map(|r| r.signal_energy).sum();
    let count = records.len() as f64;
    let nmse = error / energy;
    AggregateRow {
        method,
        alpha: point.point.alpha,
        r_x: point.point.r_x,
        n: point.point.n,
        r_y_base: point.base_bits(),
        trials: records.len(),
        nmse,
        nmse_db: super::to_db(nmse),
        mean_iterations: records.iter().map(|r| r.iterations as f64).sum::<f64>() / count,
        mean_recon_calls: records.iter().map(|r| r.recon_calls as f64).sum::<f64>() / count,
    }
}

impl PreparedExperiment {
    /// Runs every (point, trial) instance concurrently, each against all
    /// configured methods, and aggregates NMSE per (method, point).
    pub fn run(&self) -> Result<ExperimentResult> {
        par::with_threads(self.config.threads, || self.run_inner())?
    }

    fn run_inner(&self) -> Result<ExperimentResult> {
        let cfg = &self.config;
        let trials = cfg.trials;
        let tasks = self.points.len() * trials;
        let per_task: Vec<Result<Vec<TrialRecord>>> = par::map_range(tasks, |t| {
            let (p, trial_id) = (t / trials, t % trials);
            let point = &self.points[p];
            let instance = Instance::draw(cfg.master_seed, cfg.m, cfg.k, point.point.n, trial_id)?;
            cfg.methods
                .iter()
                .map(|&method| self.run_on_instance(point, method, trial_id, &instance))
                .collect()
        });
        let per_task: Vec<Vec<TrialRecord>> = per_task.into_iter().collect::<Result<_>>()?;

        let mut records = Vec::with_capacity(tasks * cfg.methods.len());
        let mut aggregates = Vec::with_capacity(self.points.len() * cfg.methods.len());
        for (mi, &method) in cfg.methods.iter().enumerate() {
            for (p, point) in self.points.iter().enumerate() {
                let block: Vec<TrialRecord> = per_task[p * trials..(p + 1) * trials]
                    .iter()
                    .map(|rs| rs[mi].clone())
                    .collect();
                aggregates.push(aggregate(method, point, &block));
                records.extend(block);
            }
        }
        Ok(ExperimentResult {
            aggregates,
            trials: records,
        })
    }
}

/// Prepares codebooks and runs the whole sweep.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    PreparedExperiment::prepare(config)?.run()
}

/// Runs a single trial at (α = `alpha`, r_x = `config.r_x`), training only
/// that point's codebooks.
pub fn run_trial(config: &ExperimentConfig, alpha: f64, method: Method, trial_id: usize) -> Result<TrialRecord> {
    let single = ExperimentConfig {
        alphas: vec![alpha],
        rates: Vec::new(),
        methods: vec![method],
        ..config.clone()
    };
    PreparedExperiment::prepare(&single)?.run_trial(0, method, trial_id)
}
