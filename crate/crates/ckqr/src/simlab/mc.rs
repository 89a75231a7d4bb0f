//! The replication engine. Each replication draws its own counter-based
//! random stream, so reports are byte-identical across thread counts;
//! aggregation reduces in replication order.

use crate::bandwidth::{rule_of_thumb, BandwidthRule};
use crate::data::Dataset;
use crate::density::efficient_fit;
use crate::error::{Error, Result};
use crate::fmt::fmt_sig;
use crate::horowitz::{covariance_smr, fit_horowitz};
use crate::inference::{covariance, naive_covariance, normal_z};
use crate::kernels::Kernel;
use crate::qr_exact::{fit_exact, pairs_bootstrap_se, sd};
use crate::qr_smooth::{fit_smoothed, SmoothSpec};
use crate::rng::{derive_seed, stream, TAG_SAMPLE};
use crate::simlab::designs::DgpSpec;
use rayon::prelude::*;
use std::io::Write;
use std::sync::atomic::{AtomicUsize, Ordering};

/// The bandwidth grid used in the simulation study: 0.08 to 0.80 in steps of
/// 0.02, built from integers so every value is the canonical representation.
pub fn h_grid_default() -> Vec<f64> {
    (0..37).map(|j| (8 + 2 * j) as f64 / 100.0).collect()
}

/// Estimators the lab can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorKind {
    /// standard (exact) quantile regression; pairs-bootstrap standard errors
    Mr,
    /// indicator-smoothed regression with κ-sandwich standard errors
    Smr,
    /// convolution-smoothed regression with sandwich standard errors
    Ckmr,
    /// same point estimate as Ckmr, naive τ(1−τ)E[XX'] standard errors
    CkmrNaiveSe,
    /// two-stage sample-splitting efficient estimator (no standard errors)
    Efficient,
}

impl EstimatorKind {
    pub fn name(&self) -> &'static str {
        match self {
            EstimatorKind::Mr => "mr",
            EstimatorKind::Smr => "smr",
            EstimatorKind::Ckmr => "ckmr",
            EstimatorKind::CkmrNaiveSe => "ckmr-naive-se",
            EstimatorKind::Efficient => "efficient",
        }
    }

    pub fn from_name(name: &str) -> Result<EstimatorKind> {
        match name {
            "mr" => Ok(EstimatorKind::Mr),
            "smr" => Ok(EstimatorKind::Smr),
            "ckmr" => Ok(EstimatorKind::Ckmr),
            "ckmr-naive-se" => Ok(EstimatorKind::CkmrNaiveSe),
            "efficient" => Ok(EstimatorKind::Efficient),
            other => Err(Error::invalid(format!(
                "unknown estimator '{other}'; expected mr|smr|ckmr|ckmr-naive-se|efficient"
            ))),
        }
    }
}

/// One Monte Carlo experiment.
#[derive(Debug, Clone)]
pub struct McConfig {
    pub dgp: DgpSpec,
    pub kernel: Kernel,
    pub estimators: Vec<EstimatorKind>,
    /// fixed bandwidths to evaluate; may be empty
    pub h_grid: Vec<f64>,
    /// also evaluate every smoothed estimator at the rule-of-thumb bandwidth
    pub include_rot: bool,
    pub taus: Vec<f64>,
    pub reps: usize,
    pub seed: u64,
    /// pairs-bootstrap replicates behind MR standard errors; 0 disables MR
    /// standard errors and coverage
    pub mr_boot_reps: usize,
}

impl McConfig {
    /// Full default experiment: grid plus rule of thumb at the median.
    pub fn new(dgp: DgpSpec, estimators: Vec<EstimatorKind>, reps: usize, seed: u64) -> McConfig {
        McConfig {
            dgp,
            kernel: Kernel::gaussian(2).expect("order-2 kernel"),
            estimators,
            h_grid: h_grid_default(),
            include_rot: true,
            taus: vec![0.5],
            reps,
            seed,
            mr_boot_reps: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum HSlot {
    /// exact fit; no bandwidth
    Exact,
    Grid(f64),
    /// rule-of-thumb (or, for the efficient estimator, its stage-one rule)
    Rot,
}

#[derive(Debug, Clone)]
struct SlotDef {
    estimator: EstimatorKind,
    tau_idx: usize,
    h: HSlot,
}

#[derive(Debug, Clone, Copy)]
struct SlotVal {
    est: f64,
    se: f64,
    h: f64,
}

struct RepOutcome {
    /// per-τ exact-fit estimate of the metric coefficient (rmse baseline)
    mr_est: Vec<f64>,
    slots: Vec<Option<SlotVal>>,
    failed_any: bool,
}

/// One row of the aggregate report.
#[derive(Debug, Clone)]
pub struct McCell {
    pub estimator: &'static str,
    pub design: String,
    pub n: usize,
    pub tau: f64,
    pub h: f64,
    pub is_rot: bool,
    pub reps: usize,
    pub rmse_ratio: f64,
    pub mean_se: f64,
    pub sd_estimates: f64,
    pub coverage95: f64,
    pub coverage99: f64,
    pub fail_count: usize,
}

/// Aggregated Monte Carlo results. RMSE ratios, dispersions, standard
/// errors, and coverage rates are reported for the slope coefficient
/// (coefficient 1, or 0 for intercept-only designs).
#[derive(Debug, Clone)]
pub struct McReport {
    pub cells: Vec<McCell>,
    pub reps: usize,
    pub seed: u64,
    pub failed_reps: usize,
}

impl McReport {
    pub fn to_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(
            w,
            "estimator,design,n,tau,h,is_rot,reps,rmse_ratio,mean_se,sd_estimates,coverage95,coverage99,fail_count"
        )?;
        for c in &self.cells {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                c.estimator,
                c.design,
                c.n,
                fmt_sig(c.tau, 10),
                fmt_sig(c.h, 10),
                u8::from(c.is_rot),
                c.reps,
                fmt_sig(c.rmse_ratio, 10),
                fmt_sig(c.mean_se, 10),
                fmt_sig(c.sd_estimates, 10),
                fmt_sig(c.coverage95, 10),
                fmt_sig(c.coverage99, 10),
                c.fail_count
            )?;
        }
        Ok(())
    }

    pub fn cell(&self, estimator: &str, tau: f64, is_rot: bool) -> Option<&McCell> {
        self.cells
            .iter()
            .find(|c| c.estimator == estimator && c.tau == tau && c.is_rot == is_rot)
    }
}

fn build_slots(cfg: &McConfig) -> Vec<SlotDef> {
    let mut slots = Vec::new();
    for tau_idx in 0..cfg.taus.len() {
        for &estimator in &cfg.estimators {
            match estimator {
                EstimatorKind::Mr => slots.push(SlotDef {
                    estimator,
                    tau_idx,
                    h: HSlot::Exact,
                }),
                EstimatorKind::Efficient => slots.push(SlotDef {
                    estimator,
                    tau_idx,
                    h: HSlot::Rot,
                }),
                _ => {
                    for &h in &cfg.h_grid {
                        slots.push(SlotDef {
                            estimator,
                            tau_idx,
                            h: HSlot::Grid(h),
                        });
                    }
                    if cfg.include_rot {
                        slots.push(SlotDef {
                            estimator,
                            tau_idx,
                            h: HSlot::Rot,
                        });
                    }
                }
            }
        }
    }
    slots
}

/// Run the experiment. Replications run in parallel over counter-based
/// streams; a rerun with the same config is byte-identical regardless of
/// thread count. Fails once more than 1% of replications fail.
pub fn run_mc(cfg: &McConfig) -> Result<McReport> {
    validate(cfg)?;
    let slots = build_slots(cfg);
    let coef = cfg.dgp.design.d().min(2) - 1;
    let progress = AtomicUsize::new(0);
    let verbose = std::env::var("CKQR_LOG")
        .map(|v| !v.is_empty() && v != "0")
        .unwrap_or(false);
    let outcomes: Vec<RepOutcome> = (0..cfg.reps)
        .into_par_iter()
        .map(|rep| {
            let out = run_rep(cfg, &slots, coef, rep as u64);
            if verbose {
                let done = progress.fetch_add(1, Ordering::Relaxed) + 1;
                if done % (cfg.reps / 10).max(1) == 0 {
                    eprintln!("mc {}: {done}/{} replications", cfg.dgp.name, cfg.reps);
                }
            }
            out
        })
        .collect();

    let failed_reps = outcomes.iter().filter(|o| o.failed_any).count();
    if failed_reps * 100 > cfg.reps {
        return Err(Error::TooManyFailures {
            failed: failed_reps,
            reps: cfg.reps,
        });
    }

    let z95 = normal_z(0.95);
    let z99 = normal_z(0.99);
    let mut cells = Vec::with_capacity(slots.len());
    for (si, slot) in slots.iter().enumerate() {
        let tau = cfg.taus[slot.tau_idx];
        let truth = cfg.dgp.design.true_beta(tau)[coef];
        let mut ests = Vec::new();
        let mut hs = Vec::new();
        let mut ses = Vec::new();
        let mut hit95 = 0usize;
        let mut hit99 = 0usize;
        let mut fail_count = 0usize;
        for out in &outcomes {
            match out.slots[si] {
                Some(v) => {
                    ests.push(v.est);
                    hs.push(v.h);
                    if v.se.is_finite() {
                        ses.push(v.se);
                        if (v.est - truth).abs() <= z95 * v.se {
                            hit95 += 1;
                        }
                        if (v.est - truth).abs() <= z99 * v.se {
                            hit99 += 1;
                        }
                    }
                }
                None => fail_count += 1,
            }
        }
        let mr_baseline: Vec<f64> = outcomes
            .iter()
            .filter(|o| o.mr_est[slot.tau_idx].is_finite())
            .map(|o| o.mr_est[slot.tau_idx])
            .collect();
        let rmse_mr = rmse(&mr_baseline, truth);
        let rmse_est = rmse(&ests, truth);
        cells.push(McCell {
            estimator: slot.estimator.name(),
            design: cfg.dgp.name.clone(),
            n: cfg.dgp.n,
            tau,
            // fixed-grid cells report their exact bandwidth; rot cells the
            // average realized one
            h: match slot.h {
                HSlot::Grid(h) => h,
                HSlot::Rot => mean(&hs),
                HSlot::Exact => 0.0,
            },
            is_rot: slot.h == HSlot::Rot,
            reps: cfg.reps,
            rmse_ratio: rmse_est / rmse_mr,
            mean_se: mean(&ses),
            sd_estimates: sd(&ests),
            coverage95: if ses.is_empty() {
                f64::NAN
            } else {
                hit95 as f64 / ses.len() as f64
            },
            coverage99: if ses.is_empty() {
                f64::NAN
            } else {
                hit99 as f64 / ses.len() as f64
            },
            fail_count,
        });
    }
    Ok(McReport {
        cells,
        reps: cfg.reps,
        seed: cfg.seed,
        failed_reps,
    })
}

fn validate(cfg: &McConfig) -> Result<()> {
    if cfg.reps == 0 {
        return Err(Error::invalid("reps must be at least 1"));
    }
    if cfg.estimators.is_empty() {
        return Err(Error::invalid("no estimators requested"));
    }
    if cfg.taus.is_empty() || cfg.taus.iter().any(|t| !(0.01..=0.99).contains(t)) {
        return Err(Error::invalid(
            "taus must be a nonempty subset of [0.01, 0.99]",
        ));
    }
    if cfg.h_grid.iter().any(|&h| !(h > 0.0) || !h.is_finite()) {
        return Err(Error::invalid("bandwidth grid must be positive"));
    }
    let needs_h = cfg.estimators.iter().any(|e| {
        matches!(
            e,
            EstimatorKind::Smr | EstimatorKind::Ckmr | EstimatorKind::CkmrNaiveSe
        )
    });
    if needs_h && cfg.h_grid.is_empty() && !cfg.include_rot {
        return Err(Error::invalid(
            "smoothed estimators need a bandwidth grid or the rule of thumb",
        ));
    }
    Ok(())
}

fn run_rep(cfg: &McConfig, slots: &[SlotDef], coef: usize, rep: u64) -> RepOutcome {
    let mut failed_any = false;
    let mut slot_vals: Vec<Option<SlotVal>> = vec![None; slots.len()];
    let mut mr_est = vec![f64::NAN; cfg.taus.len()];

    let mut rng = stream(cfg.seed, TAG_SAMPLE, rep);
    let data = match cfg.dgp.sample(&mut rng) {
        Ok(d) => d,
        Err(_) => {
            return RepOutcome {
                mr_est,
                slots: slot_vals,
                failed_any: true,
            };
        }
    };

    for (tau_idx, &tau) in cfg.taus.iter().enumerate() {
        let mr_fit = match fit_exact(&data, tau) {
            Ok(f) => f,
            Err(_) => {
                failed_any = true;
                continue;
            }
        };
        mr_est[tau_idx] = mr_fit.beta[coef];
        let rot = rule_of_thumb(&data.residuals(&mr_fit.beta), data.n()).ok();

        for (si, slot) in slots.iter().enumerate() {
            if slot.tau_idx != tau_idx {
                continue;
            }
            let val = eval_slot(cfg, slot, &data, tau, coef, &mr_fit.beta, rot, rep, tau_idx);
            if val.is_none() {
                failed_any = true;
            }
            slot_vals[si] = val;
        }
    }
    RepOutcome {
        mr_est,
        slots: slot_vals,
        failed_any,
    }
}

#[allow(clippy::too_many_arguments)]
fn eval_slot(
    cfg: &McConfig,
    slot: &SlotDef,
    data: &Dataset,
    tau: f64,
    coef: usize,
    mr_beta: &[f64],
    rot: Option<f64>,
    rep: u64,
    tau_idx: usize,
) -> Option<SlotVal> {
    match slot.estimator {
        EstimatorKind::Mr => {
            let se = if cfg.mr_boot_reps > 0 {
                let seed = derive_seed(cfg.seed, rep, tau_idx as u64);
                pairs_bootstrap_se(data, tau, cfg.mr_boot_reps, seed).ok()?[coef]
            } else {
                f64::NAN
            };
            Some(SlotVal {
                est: mr_beta[coef],
                se,
                h: 0.0,
            })
        }
        EstimatorKind::Efficient => {
            let seed = derive_seed(cfg.seed, rep, 1_000_000 + tau_idx as u64);
            let fit = efficient_fit(
                data,
                tau,
                &cfg.kernel,
                &BandwidthRule::RuleOfThumb,
                None,
                seed,
            )
            .ok()?;
            Some(SlotVal {
                est: fit.beta[coef],
                se: f64::NAN,
                h: fit.h_stage1,
            })
        }
        EstimatorKind::Ckmr | EstimatorKind::CkmrNaiveSe => {
            let h = match slot.h {
                HSlot::Grid(h) => h,
                HSlot::Rot => rot?,
                HSlot::Exact => unreachable!("smoothed estimator with exact slot"),
            };
            let spec = SmoothSpec::new(cfg.kernel.clone(), h, tau).ok()?;
            let fit = fit_smoothed(data, &spec, Some(mr_beta)).ok()?;
            let cov = match slot.estimator {
                EstimatorKind::Ckmr => covariance(data, &spec, &fit).ok()?,
                _ => naive_covariance(data, &spec, &fit).ok()?,
            };
            Some(SlotVal {
                est: fit.beta[coef],
                se: cov.se[coef],
                h,
            })
        }
        EstimatorKind::Smr => {
            let h = match slot.h {
                HSlot::Grid(h) => h,
                HSlot::Rot => rot?,
                HSlot::Exact => unreachable!("smoothed estimator with exact slot"),
            };
            let spec = SmoothSpec::new(cfg.kernel.clone(), h, tau).ok()?;
            let fit = fit_horowitz(data, &spec, Some(mr_beta)).ok()?;
            let cov = covariance_smr(data, &spec, &fit).ok()?;
            Some(SlotVal {
                est: fit.beta[coef],
                se: cov.se[coef],
                h,
            })
        }
    }
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.iter().sum::<f64>() / v.len() as f64
}

fn rmse(v: &[f64], truth: f64) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    (v.iter().map(|x| (x - truth) * (x - truth)).sum::<f64>() / v.len() as f64).sqrt()
}
