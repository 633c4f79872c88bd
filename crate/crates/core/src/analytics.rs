//! Low-rank structure diagnostics and hyperparameter search.
//!
//! The mass centre of a tensor is the value-weighted mean of each 1-based
//! index, the geometric centre is `I_k / 2`, and `sigma` sums the per-mode
//! gaps between them. A uniform tensor has mass centre `(I_k + 1) / 2`, so
//! its per-mode distance is exactly 0.5; the two definitions are used as
//! written, without re-centering.
//!
//! The search ranks candidate shapes by the mean `sigma` of the tensorized
//! probe rows: shapes whose values spread evenly (small `sigma`) tend to
//! admit sound low-rank plans.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::emb::EmbeddingMatrix;
use crate::linalg::norm2;
use crate::report::fmt_sig9;
use crate::tensor::{tensorize, DenseTensor};
use crate::tt::{compression_ratio_ttd, param_count, reconstruct, tt_svd, TtConfig, TtError};

#[derive(Debug, Error)]
pub enum AnalyticsError {
    #[error("mass centre undefined: tensor entries sum to zero")]
    UndefinedCentre,
    #[error("shape mismatch: {left_rows}x{left_cols} vs {right_rows}x{right_cols}")]
    ShapeMismatch {
        left_rows: usize,
        left_cols: usize,
        right_rows: usize,
        right_cols: usize,
    },
    #[error("mode size {mode_size} is not an integer root of d = {d}")]
    NotARoot { d: usize, mode_size: usize },
    #[error("probe matrix is empty")]
    EmptyProbe,
    #[error("search budget must be at least 1")]
    ZeroBudget,
    #[error("no candidate tensor sizes for d = {d} with max order {max_order}")]
    NoCandidates { d: usize, max_order: usize },
    #[error("no evaluated plan meets the constraints ({} evaluated)", report.evaluated.len())]
    Infeasible { report: Box<SearchReport> },
    #[error(transparent)]
    Tt(#[from] TtError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// How entries weigh into the mass centre.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum MassWeighting {
    /// Signed values, as defined.
    #[default]
    Signed,
    /// Absolute values; useful for real embeddings whose signed mass can
    /// cancel to near zero.
    Absolute,
}

pub fn mass_centre(t: &DenseTensor, weighting: MassWeighting) -> Result<Vec<f64>, AnalyticsError> {
    let dims = t.dims();
    let mut index = vec![0usize; dims.len()];
    let mut moments = vec![0.0; dims.len()];
    let mut total = 0.0;
    for &v in t.data() {
        let w = match weighting {
            MassWeighting::Signed => v,
            MassWeighting::Absolute => v.abs(),
        };
        total += w;
        for (m, &i) in moments.iter_mut().zip(&index) {
            *m += (i + 1) as f64 * w;
        }
        // little-endian odometer
        for (i, &n) in index.iter_mut().zip(dims) {
            *i += 1;
            if *i < n {
                break;
            }
            *i = 0;
        }
    }
    if total == 0.0 {
        return Err(AnalyticsError::UndefinedCentre);
    }
    let centre: Vec<f64> = moments.iter().map(|m| m / total).collect();
    if centre.iter().any(|c| !c.is_finite()) {
        return Err(AnalyticsError::UndefinedCentre);
    }
    Ok(centre)
}

pub fn geometric_centre(dims: &[usize]) -> Vec<f64> {
    dims.iter().map(|&n| n as f64 / 2.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CentreReport {
    pub mass: Vec<f64>,
    pub geometric: Vec<f64>,
    pub dist_per_mode: Vec<f64>,
    pub sigma: f64,
}

pub fn centre_report(t: &DenseTensor, weighting: MassWeighting) -> Result<CentreReport, AnalyticsError> {
    let mass = mass_centre(t, weighting)?;
    let geometric = geometric_centre(t.dims());
    let dist_per_mode: Vec<f64> = mass.iter().zip(&geometric).map(|(c, o)| (c - o).abs()).collect();
    let sigma = dist_per_mode.iter().sum();
    Ok(CentreReport {
        mass,
        geometric,
        dist_per_mode,
        sigma,
    })
}

/// Mean `sigma` over rows folded to `dims`; rows with zero mass are skipped.
/// Returns infinity when no row has a defined centre.
pub fn mean_sigma(rows: &EmbeddingMatrix, dims: &[usize], weighting: MassWeighting) -> f64 {
    let sigmas: Vec<f64> = rows
        .iter_rows()
        .filter_map(|r| {
            let t = tensorize(r, dims).ok()?;
            centre_report(&t, weighting).ok().map(|c| c.sigma)
        })
        .collect();
    if sigmas.is_empty() {
        f64::INFINITY
    } else {
        sigmas.iter().sum::<f64>() / sigmas.len() as f64
    }
}

/// Ordered factorizations of `d` into 1..=`max_order` factors, each at least
/// `min_mode_size`. Sorted by order, then lexicographically.
pub fn enumerate_shapes(d: usize, max_order: usize, min_mode_size: usize) -> Vec<Vec<usize>> {
    fn extend(rest: usize, slots: usize, min: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if slots == 1 {
            if rest >= min {
                prefix.push(rest);
                out.push(prefix.clone());
                prefix.pop();
            }
            return;
        }
        for f in min..=rest {
            if rest.is_multiple_of(f) {
                prefix.push(f);
                extend(rest / f, slots - 1, min, prefix, out);
                prefix.pop();
            }
        }
    }
    let min = min_mode_size.max(1);
    let mut out = Vec::new();
    if d < 2 {
        return out;
    }
    for order in 1..=max_order {
        // size-1 modes would make every order admissible forever
        if min == 1 && order > 1 {
            break;
        }
        extend(d, order, min, &mut Vec::new(), &mut out);
    }
    out
}

/// Storage of a uniform plan: `r * I * log_I(d)`.
pub fn uniform_storage_h(d: usize, mode_size: usize, rank: usize) -> Result<f64, AnalyticsError> {
    let not_root = AnalyticsError::NotARoot { d, mode_size };
    if mode_size < 2 || d < mode_size {
        return Err(not_root);
    }
    let mut rest = d;
    let mut order = 0usize;
    while rest > 1 {
        if !rest.is_multiple_of(mode_size) {
            return Err(not_root);
        }
        rest /= mode_size;
        order += 1;
    }
    Ok((rank * mode_size * order) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorMap {
    pub rows: usize,
    pub cols: usize,
    /// Row-major `|orig - recon|`.
    pub grid: Vec<f64>,
    pub mae: f64,
    pub max_ae: f64,
    pub per_token_mae: Vec<f64>,
}

pub fn error_map(original: &EmbeddingMatrix, reconstructed: &EmbeddingMatrix) -> Result<ErrorMap, AnalyticsError> {
    if original.rows() != reconstructed.rows() || original.cols() != reconstructed.cols() {
        return Err(AnalyticsError::ShapeMismatch {
            left_rows: original.rows(),
            left_cols: original.cols(),
            right_rows: reconstructed.rows(),
            right_cols: reconstructed.cols(),
        });
    }
    let grid: Vec<f64> = original
        .data()
        .iter()
        .zip(reconstructed.data())
        .map(|(a, b)| (a - b).abs())
        .collect();
    let cols = original.cols();
    let per_token_mae = if cols == 0 {
        vec![0.0; original.rows()]
    } else {
        grid.chunks(cols).map(|c| c.iter().sum::<f64>() / cols as f64).collect()
    };
    let mae = if grid.is_empty() {
        0.0
    } else {
        grid.iter().sum::<f64>() / grid.len() as f64
    };
    let max_ae = grid.iter().copied().fold(0.0, f64::max);
    Ok(ErrorMap {
        rows: original.rows(),
        cols,
        grid,
        mae,
        max_ae,
        per_token_mae,
    })
}

impl ErrorMap {
    /// The AE grid as CSV, one token per line.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        if self.cols == 0 {
            return Ok(());
        }
        for row in self.grid.chunks(self.cols) {
            let cells: Vec<String> = row.iter().map(|&v| fmt_sig9(v)).collect();
            writeln!(w, "{}", cells.join(","))?;
        }
        Ok(())
    }
}

/// One line per row: `row,status,sigma,mass_1..N,geometric_1..N,dist_1..N`.
/// Rows whose centre is undefined get status `undefined` and empty cells.
pub fn write_centre_csv<W: Write>(
    mut w: W,
    order: usize,
    reports: &[Result<CentreReport, AnalyticsError>],
) -> std::io::Result<()> {
    let mut header = vec!["row".to_string(), "status".into(), "sigma".into()];
    for prefix in ["mass", "geometric", "dist"] {
        header.extend((1..=order).map(|k| format!("{prefix}_{k}")));
    }
    writeln!(w, "{}", header.join(","))?;
    for (i, report) in reports.iter().enumerate() {
        match report {
            Ok(r) => {
                let mut cells = vec![i.to_string(), "ok".into(), fmt_sig9(r.sigma)];
                for values in [&r.mass, &r.geometric, &r.dist_per_mode] {
                    cells.extend(values.iter().map(|&v| fmt_sig9(v)));
                }
                writeln!(w, "{}", cells.join(","))?;
            }
            Err(_) => {
                let blanks = vec![""; 1 + 3 * order];
                writeln!(w, "{i},undefined,{}", blanks.join(","))?;
            }
        }
    }
    Ok(())
}

/// A candidate tensor size with rank caps and its predicted cost.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShapeRankPlan {
    pub dims: Vec<usize>,
    /// `r0..rN`, already clamped to the feasibility bound.
    pub rank_caps: Vec<usize>,
    pub epsilon: f64,
    pub predicted_params: usize,
    pub predicted_eta_ttd: f64,
    pub sigma_score: f64,
}

impl ShapeRankPlan {
    pub fn config(&self) -> TtConfig {
        TtConfig {
            dims: self.dims.clone(),
            rank_caps: Some(self.rank_caps.clone()),
            epsilon: self.epsilon,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluatedPlan {
    pub plan: ShapeRankPlan,
    pub measured_params: usize,
    pub measured_eta_ttd: f64,
    pub rel_error: f64,
    pub mae: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchConstraints {
    pub min_eta_ttd: Option<f64>,
    pub max_rel_error: Option<f64>,
    pub max_mae: Option<f64>,
    pub max_order: usize,
    pub min_mode_size: usize,
    pub budget: usize,
    /// Uniform interior rank caps tried for every shape.
    pub rank_grid: Vec<usize>,
    pub epsilon: f64,
    pub weighting: MassWeighting,
    pub parallelism: usize,
}

impl Default for SearchConstraints {
    fn default() -> Self {
        Self {
            min_eta_ttd: None,
            max_rel_error: None,
            max_mae: None,
            max_order: 4,
            min_mode_size: 2,
            budget: 16,
            rank_grid: vec![1, 2, 4, 8, 16],
            epsilon: 0.0,
            weighting: MassWeighting::Signed,
            parallelism: 1,
        }
    }
}

impl SearchConstraints {
    fn passes(&self, eta: f64, rel_error: f64, mae: f64) -> bool {
        self.min_eta_ttd.is_none_or(|m| eta >= m)
            && self.max_rel_error.is_none_or(|m| rel_error <= m)
            && self.max_mae.is_none_or(|m| mae <= m)
    }

    /// Sum of normalized constraint violations; 0 for a passing plan.
    fn violation(&self, p: &EvaluatedPlan) -> f64 {
        let over = |got: f64, limit: f64| (got - limit).max(0.0) / limit.abs().max(1e-12);
        self.min_eta_ttd.map_or(0.0, |m| over(m, p.measured_eta_ttd))
            + self.max_rel_error.map_or(0.0, |m| over(p.rel_error, m))
            + self.max_mae.map_or(0.0, |m| over(p.mae, m))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchReport {
    /// Number of distinct candidate plans before the budget cut.
    pub candidates: usize,
    /// Evaluated plans in ranking order.
    pub evaluated: Vec<EvaluatedPlan>,
    /// Index into `evaluated` of the first passing plan, or the least
    /// violating one when nothing passes.
    pub best: usize,
}

impl SearchReport {
    pub fn best(&self) -> &EvaluatedPlan {
        &self.evaluated[self.best]
    }

    pub fn any_passed(&self) -> bool {
        self.evaluated.iter().any(|p| p.passed)
    }
}

/// Ranked candidate plans for `d`, before any evaluation.
pub fn candidate_plans(probe: &EmbeddingMatrix, c: &SearchConstraints) -> Vec<ShapeRankPlan> {
    let d = probe.cols();
    let shapes = enumerate_shapes(d, c.max_order, c.min_mode_size);
    let sigmas: Vec<f64> = shapes
        .par_iter()
        .map(|dims| mean_sigma(probe, dims, c.weighting))
        .collect();
    let mut plans = Vec::new();
    for (dims, &sigma_score) in shapes.iter().zip(&sigmas) {
        let mut seen: Vec<Vec<usize>> = Vec::new();
        for &r in &c.rank_grid {
            let Ok(cfg) = TtConfig::uniform(dims.clone(), r.max(1), c.epsilon) else {
                continue;
            };
            let caps = cfg.clamped_caps();
            if seen.contains(&caps) {
                continue;
            }
            let predicted_params = param_count(dims, &caps);
            plans.push(ShapeRankPlan {
                dims: dims.clone(),
                rank_caps: caps.clone(),
                epsilon: c.epsilon,
                predicted_params,
                predicted_eta_ttd: compression_ratio_ttd(d, predicted_params),
                sigma_score,
            });
            seen.push(caps);
        }
    }
    plans.sort_by(|a, b| {
        a.sigma_score
            .total_cmp(&b.sigma_score)
            .then(a.predicted_params.cmp(&b.predicted_params))
            .then_with(|| a.dims.cmp(&b.dims))
            .then_with(|| a.rank_caps.cmp(&b.rank_caps))
    });
    plans
}

fn evaluate(probe: &EmbeddingMatrix, plan: ShapeRankPlan, c: &SearchConstraints) -> Result<EvaluatedPlan, TtError> {
    let cfg = plan.config();
    let mut recon = Vec::with_capacity(probe.data().len());
    let mut stored = 0;
    for row in probe.iter_rows() {
        let mps = tt_svd(row, &cfg)?;
        stored += mps.param_count();
        recon.extend(reconstruct(&mps));
    }
    let diff: Vec<f64> = probe.data().iter().zip(&recon).map(|(a, b)| a - b).collect();
    let norm = norm2(probe.data());
    let rel_error = if norm == 0.0 { norm2(&diff) } else { norm2(&diff) / norm };
    let mae = diff.iter().map(|v| v.abs()).sum::<f64>() / diff.len().max(1) as f64;
    let measured_eta_ttd = compression_ratio_ttd(probe.data().len(), stored);
    Ok(EvaluatedPlan {
        passed: c.passes(measured_eta_ttd, rel_error, mae),
        plan,
        measured_params: stored / probe.rows(),
        measured_eta_ttd,
        rel_error,
        mae,
    })
}

/// Evaluates candidate plans in ranking order, up to the budget.
///
/// Succeeds when at least one evaluated plan meets the constraints; otherwise
/// returns `Infeasible` carrying every evaluated plan and the best one found.
pub fn search_hyperparams(probe: &EmbeddingMatrix, c: &SearchConstraints) -> Result<SearchReport, AnalyticsError> {
    if probe.rows() == 0 || probe.cols() == 0 {
        return Err(AnalyticsError::EmptyProbe);
    }
    if c.budget == 0 {
        return Err(AnalyticsError::ZeroBudget);
    }
    let plans = candidate_plans(probe, c);
    if plans.is_empty() {
        return Err(AnalyticsError::NoCandidates {
            d: probe.cols(),
            max_order: c.max_order,
        });
    }
    let candidates = plans.len();
    let chosen: Vec<ShapeRankPlan> = plans.into_iter().take(c.budget).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(c.parallelism.max(1))
        .build()
        .expect("thread pool");
    let evaluated = pool.install(|| {
        chosen
            .into_par_iter()
            .map(|p| evaluate(probe, p, c))
            .collect::<Result<Vec<_>, _>>()
    })?;
    let best = evaluated.iter().position(|p| p.passed).unwrap_or_else(|| {
        evaluated
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| c.violation(a).total_cmp(&c.violation(b)))
            .map_or(0, |(i, _)| i)
    });
    let report = SearchReport {
        candidates,
        evaluated,
        best,
    };
    if report.any_passed() {
        Ok(report)
    } else {
        Err(AnalyticsError::Infeasible {
            report: Box::new(report),
        })
    }
}
