//! Monte-Carlo benchmark: per repetition, regenerate or resplit the data,
//! fit every method on shared splits, and evaluate on a shared test set.

use std::cell::OnceCell;
use std::time::Instant;

use rayon::prelude::*;

use crate::baselines::{ald_fit, cqr_fit, plcp_fit, Method};
use crate::conformal::{
    finetune_stage, linf_score, pretrain_stage, rcp_fit, split_cp_fit, ConformalPredictor,
    FinetuneWeighting, FittedPredictor, PretrainedStage, QuantileModel,
};
use crate::data::{generate_synthetic, load_csv, split_622, Dataset, Standardizer};
use crate::error::{Error, Result};
use crate::experiment::checkpoint::{save_checkpoint, Checkpoint};
use crate::experiment::config::{DatasetSection, ExperimentConfig};
use crate::experiment::results::ResultRow;
use crate::metrics::{
    cluster_features, marginal_coverage, mean_log_volume, msce_from_assignments, oracle_msce,
    CoverageReport, SlabSearch,
};
use crate::nn::{train_regressor_mse, MlpParams};
use crate::numeric::{Matrix, RngStream};

/// Cluster counts behind the two clustered-MSCE columns.
pub const MSCE_CLUSTERS: [usize; 2] = [10, 50];

enum Source {
    Synthetic(crate::data::SyntheticSpec, usize),
    Loaded(Dataset),
}

impl Source {
    fn from_config(cfg: &ExperimentConfig) -> Result<Self> {
        match &cfg.dataset {
            DatasetSection::Synthetic { n, .. } => Ok(Source::Synthetic(
                cfg.dataset.synthetic_spec()?.expect("synthetic section"),
                *n,
            )),
            DatasetSection::Csv {
                path,
                features,
                labels,
                ..
            } => Ok(Source::Loaded(load_csv(path, features, labels)?)),
        }
    }
}

/// One repetition's splits. Features of `train`, `cal` and `test` are
/// standardized with statistics of the training rows.
pub struct Repetition {
    pub index: usize,
    pub rng: RngStream,
    pub train: Dataset,
    pub cal: Dataset,
    pub test: Dataset,
    /// Test features before standardization, for the synthetic oracle.
    pub test_raw_x: Matrix,
    pub standardizer: Standardizer,
}

impl Repetition {
    fn prepare(source: &Source, master_seed: u64, index: usize) -> Result<Self> {
        let rng = RngStream::new(master_seed, index as u64);
        let full = match source {
            Source::Synthetic(spec, n) => generate_synthetic(spec, *n, &mut rng.derive("data"))?,
            Source::Loaded(ds) => ds.clone(),
        };
        let split = split_622(full.len(), &mut rng.derive("split"))?;
        let mut train = full.select(&split.train);
        let mut cal = full.select(&split.cal);
        let mut test = full.select(&split.test);
        let standardizer = Standardizer::fit(&train.x)?;
        let test_raw_x = test.x.clone();
        for part in [&mut train, &mut cal, &mut test] {
            part.x = standardizer.transform(&part.x)?;
        }
        Ok(Repetition {
            index,
            rng,
            train,
            cal,
            test,
            test_raw_x,
            standardizer,
        })
    }
}

/// Lazily trained components shared by the methods of one repetition.
pub struct MethodFitter<'a> {
    cfg: &'a ExperimentConfig,
    rep: &'a Repetition,
    point: OnceCell<std::result::Result<(MlpParams, Vec<f64>), String>>,
    stage: OnceCell<std::result::Result<PretrainedStage, String>>,
}

fn shared<T: Clone>(
    cell: &OnceCell<std::result::Result<T, String>>,
    init: impl FnOnce() -> Result<T>,
) -> Result<T> {
    cell.get_or_init(|| init().map_err(|e| e.to_string()))
        .clone()
        .map_err(Error::InvalidArgument)
}

fn pick(values: &[f64], idx: &[usize]) -> Vec<f64> {
    idx.iter().map(|&i| values[i]).collect()
}

impl<'a> MethodFitter<'a> {
    pub fn new(cfg: &'a ExperimentConfig, rep: &'a Repetition) -> Self {
        MethodFitter {
            cfg,
            rep,
            point: OnceCell::new(),
            stage: OnceCell::new(),
        }
    }

    /// Point predictor and the calibration scores `‖y − μ̂(x)‖_∞`.
    fn point_and_scores(&self) -> Result<(MlpParams, Vec<f64>)> {
        shared(&self.point, || {
            let rep = self.rep;
            let point = train_regressor_mse(
                &rep.train.x,
                &rep.train.y,
                &self.cfg.training.regressor.train_config(),
                &mut rep.rng.derive("regressor"),
            )?;
            let mu = point.forward_batch(&rep.cal.x)?;
            let scores = (0..rep.cal.len())
                .map(|i| linf_score(mu.row(i), rep.cal.y.row(i)))
                .collect::<Result<Vec<_>>>()?;
            Ok((point, scores))
        })
    }

    fn pretrained(&self) -> Result<PretrainedStage> {
        shared(&self.stage, || {
            let (_, scores) = self.point_and_scores()?;
            let rng = &self.rep.rng;
            pretrain_stage(
                &self.rep.cal.x,
                &scores,
                &self.cfg.cpcp_config(false, false)?,
                &mut rng.derive("cal-split"),
                &mut rng.derive("three-head-pretrain"),
            )
        })
    }

    pub fn fit(&self, method: Method) -> Result<ConformalPredictor> {
        let cfg = self.cfg;
        let rep = self.rep;
        let tau = cfg.tau()?;
        let mut method_rng = rep.rng.derive(&method.name());
        let (fitted, calibration_size) = match method {
            Method::Split => {
                let (point, scores) = self.point_and_scores()?;
                let threshold = split_cp_fit(&scores, tau)?;
                (FittedPredictor::Split { point, threshold }, scores.len())
            }
            Method::Rcp | Method::Cpcp { .. } => {
                let (point, scores) = self.point_and_scores()?;
                let stage = self.pretrained()?;
                let (c, weighting) = match method {
                    Method::Cpcp { clip, mix } => {
                        (cfg.cpcp_config(clip, mix)?, FinetuneWeighting::Estimated)
                    }
                    _ => (cfg.cpcp_config(false, false)?, FinetuneWeighting::Uniform),
                };
                let fit = finetune_stage(
                    &stage,
                    &rep.cal.x,
                    &scores,
                    &c,
                    weighting,
                    &mut rep.rng.derive("finetune-shuffle"),
                )?;
                (
                    FittedPredictor::Rectified {
                        point,
                        quantile: QuantileModel::ThreeHead(fit.net),
                        shift: fit.shift,
                    },
                    fit.calibration_size,
                )
            }
            Method::RcpAld => {
                let (point, scores) = self.point_and_scores()?;
                let split = self.pretrained()?.split;
                let fit_idx: Vec<usize> = split
                    .pretrain
                    .iter()
                    .chain(&split.finetune)
                    .copied()
                    .collect();
                let model = ald_fit(
                    &rep.cal.x.select_rows(&fit_idx),
                    &pick(&scores, &fit_idx),
                    tau,
                    &cfg.training.quantile.train_config(),
                    &mut method_rng,
                )?;
                let q3 = model.quantiles(&rep.cal.x.select_rows(&split.conformal))?;
                let shift = rcp_fit(&pick(&scores, &split.conformal), &q3, tau)?;
                (
                    FittedPredictor::Rectified {
                        point,
                        quantile: QuantileModel::Ald(model),
                        shift,
                    },
                    split.conformal.len(),
                )
            }
            Method::Cqr | Method::CqrAld => {
                let model = cqr_fit(
                    &rep.train,
                    &rep.cal,
                    tau,
                    &cfg.training.quantile.train_config(),
                    method == Method::CqrAld,
                    &mut method_rng,
                )?;
                (FittedPredictor::Cqr(model), rep.cal.len())
            }
            Method::Plcp { groups } => {
                let (point, scores) = self.point_and_scores()?;
                let fit = plcp_fit(
                    &rep.cal.x,
                    &scores,
                    tau,
                    groups,
                    &cfg.training.partition.train_config(),
                    &mut method_rng,
                )?;
                (
                    FittedPredictor::Plcp {
                        point,
                        partition: fit.model,
                    },
                    fit.calibration_size,
                )
            }
        };
        Ok(ConformalPredictor {
            method: method.name(),
            tau,
            calibration_size,
            fitted,
        })
    }
}

/// Test-set structures shared by every method of a repetition.
pub struct Evaluator<'a> {
    rep: &'a Repetition,
    tau: f64,
    clusters: Vec<std::result::Result<Vec<usize>, String>>,
    slabs: std::result::Result<SlabSearch, String>,
}

impl<'a> Evaluator<'a> {
    pub fn new(cfg: &ExperimentConfig, rep: &'a Repetition) -> Self {
        let x = &rep.test.x;
        let clusters = MSCE_CLUSTERS
            .iter()
            .map(|&k| {
                cluster_features(x, k, &mut rep.rng.derive(&format!("kmeans-{k}")))
                    .map_err(|e| e.to_string())
            })
            .collect();
        let slabs = SlabSearch::new(x, cfg.metrics.wsc(), &rep.rng.derive("wsc"))
            .map_err(|e| e.to_string());
        Evaluator {
            rep,
            tau: cfg.conformal.tau,
            clusters,
            slabs,
        }
    }

    pub fn evaluate(&self, predictor: &ConformalPredictor) -> Result<CoverageReport> {
        let test = &self.rep.test;
        let boxes = predictor.boxes(&test.x)?;
        let covered: Vec<bool> = boxes
            .iter()
            .enumerate()
            .map(|(i, b)| b.contains(test.y.row(i)))
            .collect();
        let msce = |slot: usize| -> Result<f64> {
            let assign = self.clusters[slot]
                .as_ref()
                .map_err(|e| Error::InvalidArgument(e.clone()))?;
            msce_from_assignments(assign, &covered, self.tau, MSCE_CLUSTERS[slot])
        };
        let oracle = match &test.oracle {
            Some(o) => Some(oracle_msce(
                Some(o),
                &self.rep.test_raw_x,
                &boxes,
                self.tau,
            )?),
            None => None,
        };
        let wsc = self
            .slabs
            .as_ref()
            .map_err(|e| Error::InvalidArgument(e.clone()))?
            .evaluate(&covered)?
            .coverage;
        Ok(CoverageReport {
            marginal_coverage: marginal_coverage(&covered)?,
            msce_k10: msce(0)?,
            msce_k50: msce(1)?,
            oracle_msce: oracle,
            wsc,
            log_volume_per_dim: mean_log_volume(&boxes).0,
        })
    }
}

/// Options that do not affect the numbers produced.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Write a checkpoint per method of repetition 0 into this directory.
    pub save_models: Option<std::path::PathBuf>,
}

fn run_repetition(
    cfg: &ExperimentConfig,
    source: &Source,
    methods: &[Method],
    index: usize,
    options: &RunOptions,
) -> Vec<ResultRow> {
    let dataset = cfg.dataset.name();
    let rep = match Repetition::prepare(source, cfg.run.seed, index) {
        Ok(r) => r,
        Err(e) => {
            return methods
                .iter()
                .map(|m| ResultRow::failed(&dataset, &m.name(), index, &e.to_string()))
                .collect()
        }
    };
    let fitter = MethodFitter::new(cfg, &rep);
    let evaluator = Evaluator::new(cfg, &rep);
    methods
        .iter()
        .map(|&m| {
            let start = Instant::now();
            let outcome = fitter.fit(m).and_then(|p| {
                let report = evaluator.evaluate(&p)?;
                if let (Some(dir), 0) = (&options.save_models, index) {
                    save_checkpoint(
                        dir.join(format!("{}.ckpt", m.name())),
                        &Checkpoint {
                            standardizer: rep.standardizer.clone(),
                            predictor: p,
                        },
                    )?;
                }
                Ok(report)
            });
            let elapsed = cfg.run.timing.then(|| start.elapsed().as_secs_f64());
            let mut row = match outcome {
                Ok(report) => ResultRow::ok(&dataset, &m.name(), index, report),
                Err(e) => ResultRow::failed(&dataset, &m.name(), index, &e.to_string()),
            };
            row.wall_time_seconds = elapsed;
            row
        })
        .collect()
}

/// Runs every (repetition, method) cell. Repetitions execute in parallel;
/// rows come back sorted by (dataset, method, seed). A failing cell is
/// recorded in its row's status and never affects other cells.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    run_experiment_with(cfg, &RunOptions::default())
}

pub fn run_experiment_with(cfg: &ExperimentConfig, options: &RunOptions) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    let methods = cfg.parsed_methods()?;
    let source = Source::from_config(cfg)?;
    if let Some(dir) = &options.save_models {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut rows: Vec<ResultRow> = (0..cfg.run.repetitions)
        .into_par_iter()
        .flat_map_iter(|r| run_repetition(cfg, &source, &methods, r, options))
        .collect();
    rows.sort_by(|a, b| (&a.dataset, &a.method, a.seed).cmp(&(&b.dataset, &b.method, b.seed)));
    Ok(rows)
}

/// Convenience for single fits outside the benchmark loop: prepares
/// repetition `index` of `cfg` and fits `method` on it.
pub fn fit_single(
    cfg: &ExperimentConfig,
    method: Method,
    index: usize,
) -> Result<(Repetition, ConformalPredictor)> {
    let source = Source::from_config(cfg)?;
    let rep = Repetition::prepare(&source, cfg.run.seed, index)?;
    let predictor = MethodFitter::new(cfg, &rep).fit(method)?;
    Ok((rep, predictor))
}

/// Prepares repetition `index` without fitting anything.
pub fn prepare_repetition(cfg: &ExperimentConfig, index: usize) -> Result<Repetition> {
    Repetition::prepare(&Source::from_config(cfg)?, cfg.run.seed, index)
}
