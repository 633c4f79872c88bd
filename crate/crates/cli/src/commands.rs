use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use ttembed::analytics::{
    centre_report, error_map, search_hyperparams, write_centre_csv, AnalyticsError, EvaluatedPlan, MassWeighting,
    SearchConstraints, SearchReport,
};
use ttembed::emb::EmbeddingMatrix;
use ttembed::linalg::norm2;
use ttembed::metrics::{delta_log_perplexity, delta_log_perplexity_ratio_form, PplReport, ScoredSequence};
use ttembed::report::fmt_sig9;
use ttembed::synth::{self, FixtureKind};
use ttembed::tensor::DenseTensor;
use ttembed::tt::{compression_ratio_ttd, TtConfig};
use ttembed::vocab::{compress_vocabulary, AccountingExtras, CompressedVocabulary, LayerAccounting};

use crate::args::*;
use crate::error::CliError;
use crate::io::{read_logp, read_matrix, read_matrix_from, read_store, write_matrix, write_store};
use crate::json::emit;

pub fn threads(t: &Threads) -> Result<usize, CliError> {
    match t.threads {
        Some(0) => Err(CliError::Usage("--threads must be at least 1".into())),
        Some(n) => Ok(n),
        None => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

pub fn config(dec: &Decomposition) -> Result<TtConfig, CliError> {
    Ok(TtConfig::new(dec.dims.clone(), dec.ranks.clone(), dec.eps)?)
}

fn model_total(value: Option<f64>) -> Result<Option<u64>, CliError> {
    value
        .map(|v| {
            if v.is_finite() && v >= 1.0 {
                Ok(v.round() as u64)
            } else {
                Err(CliError::Usage(format!(
                    "--model-total must be a positive count, got {v}"
                )))
            }
        })
        .transpose()
}

fn weighting(w: Weighting) -> MassWeighting {
    match w {
        Weighting::Signed => MassWeighting::Signed,
        Weighting::Absolute => MassWeighting::Absolute,
    }
}

fn kind(k: Kind) -> FixtureKind {
    match k {
        Kind::Gaussian => FixtureKind::Gaussian,
        Kind::Separable => FixtureKind::Separable,
        Kind::Striped => FixtureKind::Striped,
    }
}

fn non_empty(m: &EmbeddingMatrix, path: &Path) -> Result<(), CliError> {
    if m.rows() == 0 || m.cols() == 0 {
        return Err(CliError::Usage(format!("{}: matrix is empty", path.display())));
    }
    Ok(())
}

fn check_width(dims: &[usize], cols: usize) -> Result<(), CliError> {
    let d: usize = dims.iter().product();
    if d != cols {
        return Err(CliError::Usage(format!(
            "--dims {dims:?} multiply to {d} but rows have {cols} values"
        )));
    }
    Ok(())
}

/// Size and ratio figures shared by the compress and info reports.
#[derive(Debug, Serialize)]
struct StoreSummary {
    tokens: usize,
    d: usize,
    dims: Vec<usize>,
    epsilon: f64,
    stored_params_per_token: f64,
    min_params_per_token: usize,
    max_params_per_token: usize,
    max_rank: usize,
    /// `d V / stored - 1` over all tokens.
    eta_ttd: f64,
    accounting: LayerAccounting,
}

fn summarize(store: &CompressedVocabulary, extras: &AccountingExtras) -> StoreSummary {
    let counts = store.token_param_counts();
    let total = store.compressed_params();
    let tokens = store.len();
    StoreSummary {
        tokens,
        d: store.d(),
        dims: store.dims().to_vec(),
        epsilon: store.epsilon(),
        stored_params_per_token: if tokens == 0 { 0.0 } else { total as f64 / tokens as f64 },
        min_params_per_token: counts.iter().copied().min().unwrap_or(0),
        max_params_per_token: counts.iter().copied().max().unwrap_or(0),
        max_rank: store
            .tokens()
            .iter()
            .flat_map(|t| t.ranks().iter().copied())
            .max()
            .unwrap_or(0),
        eta_ttd: if total == 0 {
            0.0
        } else {
            compression_ratio_ttd(tokens * store.d(), total as usize)
        },
        accounting: store.layer_accounting(extras),
    }
}

#[derive(Debug, Serialize)]
struct PplSummary {
    form: &'static str,
    n_tokens: usize,
    ppl: f64,
    ln_ppl: f64,
}

fn ppl_summary(seqs: &[ScoredSequence], per_token: bool) -> Result<PplSummary, CliError> {
    let all = ScoredSequence::concat(seqs)?;
    let r = if per_token {
        PplReport::per_token(&all)
    } else {
        PplReport::literal(&all)
    };
    Ok(PplSummary {
        form: if per_token { "per_token" } else { "product" },
        n_tokens: r.n_tokens,
        ppl: r.ppl,
        ln_ppl: r.ln_ppl,
    })
}

/// Compared in log space so an overflowing product-form perplexity still
/// gives the right answer.
fn within_ppl_max(ln_ppl: f64, ppl_max: f64) -> bool {
    ln_ppl <= ppl_max.ln()
}

#[derive(Debug, Serialize)]
struct Thresholds {
    min_eta: f64,
    ppl_max: f64,
}

#[derive(Debug, Serialize)]
struct CompressionReport {
    #[serde(flatten)]
    summary: StoreSummary,
    rank_caps: Option<Vec<usize>>,
    rel_error: f64,
    mae: f64,
    perplexity: Option<PplSummary>,
    thresholds: Thresholds,
    sound_compression: bool,
}

pub fn compress(a: &CompressArgs) -> Result<(), CliError> {
    let m = read_matrix(&a.matrix)?;
    non_empty(&m, &a.matrix.input)?;
    check_width(&a.decomposition.dims, m.cols())?;
    let cfg = config(&a.decomposition)?;
    let threads = threads(&a.threads)?;
    let extras = AccountingExtras {
        position_rows: a.position_rows,
        model_total_params: model_total(a.model_total)?,
    };
    let perplexity = match &a.logp {
        Some(path) => Some(ppl_summary(&read_logp(path)?, a.per_token)?),
        None => None,
    };

    let store = compress_vocabulary(&m, &cfg, threads)?;
    write_store(&a.output, &store)?;

    let recon = store.reconstruct_all(threads)?;
    let map = error_map(&m, &recon)?;
    let diff: Vec<f64> = m.data().iter().zip(recon.data()).map(|(x, y)| x - y).collect();
    let norm = norm2(m.data());
    let rel_error = if norm == 0.0 { norm2(&diff) } else { norm2(&diff) / norm };

    let summary = summarize(&store, &extras);
    let sound_compression =
        summary.eta_ttd >= a.min_eta && perplexity.as_ref().is_none_or(|p| within_ppl_max(p.ln_ppl, a.ppl_max));
    let report = CompressionReport {
        summary,
        rank_caps: cfg.rank_caps.clone(),
        rel_error,
        mae: map.mae,
        perplexity,
        thresholds: Thresholds {
            min_eta: a.min_eta,
            ppl_max: a.ppl_max,
        },
        sound_compression,
    };
    emit(&report, a.report.as_deref())
}

pub fn reconstruct(a: &ReconstructArgs) -> Result<(), CliError> {
    let store = read_store(&a.input)?;
    let m = store.reconstruct_all(threads(&a.threads)?)?;
    write_matrix(&a.output, a.format, &m)?;
    #[derive(Serialize)]
    struct Report {
        rows: usize,
        cols: usize,
    }
    emit(
        &Report {
            rows: m.rows(),
            cols: m.cols(),
        },
        None,
    )
}

pub fn info(a: &InfoArgs) -> Result<(), CliError> {
    let store = read_store(&a.input)?;
    let extras = AccountingExtras {
        position_rows: a.position_rows,
        model_total_params: model_total(a.model_total)?,
    };
    emit(&summarize(&store, &extras), None)
}

pub fn stats(a: &StatsArgs) -> Result<(), CliError> {
    let m = read_matrix(&a.matrix)?;
    check_width(&a.dims, m.cols())?;
    let w = weighting(a.weighting);
    let reports: Vec<_> = m
        .iter_rows()
        .map(|row| {
            let t = DenseTensor::new(a.dims.clone(), row.to_vec()).expect("width checked");
            centre_report(&t, w)
        })
        .collect();
    let mut buf = Vec::new();
    write_centre_csv(&mut buf, a.dims.len(), &reports).expect("writing to memory");
    fs::write(&a.output, buf).map_err(CliError::io(&a.output))?;

    let sigmas: Vec<f64> = reports
        .iter()
        .filter_map(|r| r.as_ref().ok())
        .map(|r| r.sigma)
        .collect();
    #[derive(Serialize)]
    struct Summary {
        rows: usize,
        dims: Vec<usize>,
        weighting: &'static str,
        defined_rows: usize,
        undefined_rows: usize,
        mean_sigma: Option<f64>,
        min_sigma: Option<f64>,
        max_sigma: Option<f64>,
    }
    let defined = sigmas.len();
    emit(
        &Summary {
            rows: m.rows(),
            dims: a.dims.clone(),
            weighting: match a.weighting {
                Weighting::Signed => "signed",
                Weighting::Absolute => "absolute",
            },
            defined_rows: defined,
            undefined_rows: m.rows() - defined,
            mean_sigma: (defined > 0).then(|| sigmas.iter().sum::<f64>() / defined as f64),
            min_sigma: sigmas.iter().copied().reduce(f64::min),
            max_sigma: sigmas.iter().copied().reduce(f64::max),
        },
        None,
    )
}

fn join<T: ToString>(values: &[T], sep: &str) -> String {
    values.iter().map(T::to_string).collect::<Vec<_>>().join(sep)
}

fn write_plan_csv(path: &Path, plans: &[EvaluatedPlan]) -> Result<(), CliError> {
    let mut buf = Vec::new();
    writeln!(
        buf,
        "rank,dims,rank_caps,sigma_score,predicted_params,predicted_eta_ttd,measured_params,measured_eta_ttd,rel_error,mae,passed"
    )
    .expect("writing to memory");
    for (i, p) in plans.iter().enumerate() {
        writeln!(
            buf,
            "{},{},{},{},{},{},{},{},{},{},{}",
            i + 1,
            join(&p.plan.dims, "x"),
            join(&p.plan.rank_caps, ":"),
            fmt_sig9(p.plan.sigma_score),
            p.plan.predicted_params,
            fmt_sig9(p.plan.predicted_eta_ttd),
            p.measured_params,
            fmt_sig9(p.measured_eta_ttd),
            fmt_sig9(p.rel_error),
            fmt_sig9(p.mae),
            p.passed
        )
        .expect("writing to memory");
    }
    fs::write(path, buf).map_err(CliError::io(path))
}

#[derive(Debug, Serialize)]
struct SearchSummary<'a> {
    d: usize,
    probe_rows: usize,
    candidates: usize,
    feasible: bool,
    best: &'a EvaluatedPlan,
    /// Evaluated plans, sorted by `sigma_score` ascending.
    plans: &'a [EvaluatedPlan],
}

pub fn search(a: &SearchArgs) -> Result<(), CliError> {
    let m = read_matrix(&a.matrix)?;
    non_empty(&m, &a.matrix.input)?;
    if a.probe_rows == 0 {
        return Err(CliError::Usage("--probe-rows must be at least 1".into()));
    }
    let probe = m.head(a.probe_rows);
    let c = SearchConstraints {
        min_eta_ttd: a.target_ratio,
        max_rel_error: a.max_rel_error,
        max_mae: a.max_mae,
        max_order: a.max_order,
        min_mode_size: a.min_mode_size,
        budget: a.budget,
        rank_grid: a.rank_grid.clone(),
        epsilon: a.eps,
        weighting: weighting(a.weighting),
        parallelism: threads(&a.threads)?,
    };
    let (report, feasible): (Box<SearchReport>, bool) = match search_hyperparams(&probe, &c) {
        Ok(r) => (Box::new(r), true),
        Err(AnalyticsError::Infeasible { report }) => (report, false),
        Err(e) => return Err(e.into()),
    };
    if let Some(path) = &a.output {
        write_plan_csv(path, &report.evaluated)?;
    }
    emit(
        &SearchSummary {
            d: probe.cols(),
            probe_rows: probe.rows(),
            candidates: report.candidates,
            feasible,
            best: report.best(),
            plans: &report.evaluated,
        },
        None,
    )?;
    if feasible {
        Ok(())
    } else {
        Err(CliError::Infeasible(report))
    }
}

pub fn diff(a: &DiffArgs) -> Result<(), CliError> {
    let left = read_matrix(&a.matrix)?;
    let right = read_matrix_from(&a.other, a.matrix.format, a.matrix.rows, a.matrix.dim)?;
    let map = error_map(&left, &right)?;
    if let Some(path) = &a.output {
        let mut buf = Vec::new();
        map.write_csv(&mut buf).expect("writing to memory");
        fs::write(path, buf).map_err(CliError::io(path))?;
    }
    let worst = map
        .per_token_mae
        .iter()
        .enumerate()
        .max_by(|(_, x), (_, y)| x.total_cmp(y))
        .map(|(i, &v)| (i, v));
    #[derive(Serialize)]
    struct Summary {
        rows: usize,
        cols: usize,
        mae: f64,
        max_ae: f64,
        worst_token: Option<usize>,
        worst_token_mae: Option<f64>,
    }
    emit(
        &Summary {
            rows: map.rows,
            cols: map.cols,
            mae: map.mae,
            max_ae: map.max_ae,
            worst_token: worst.map(|w| w.0),
            worst_token_mae: worst.map(|w| w.1),
        },
        None,
    )
}

pub fn ppl(a: &PplArgs) -> Result<(), CliError> {
    let seqs = read_logp(&a.input)?;
    let total = ppl_summary(&seqs, a.per_token)?;
    let per_sequence: Vec<PplReport> = seqs
        .iter()
        .map(|s| {
            if a.per_token {
                PplReport::per_token(s)
            } else {
                PplReport::literal(s)
            }
        })
        .collect();
    #[derive(Serialize)]
    struct Report {
        sequences: usize,
        #[serde(flatten)]
        total: PplSummary,
        ppl_max: f64,
        within_ppl_max: bool,
        per_sequence: Vec<PplReport>,
    }
    let within_ppl_max = within_ppl_max(total.ln_ppl, a.ppl_max);
    emit(
        &Report {
            sequences: seqs.len(),
            total,
            ppl_max: a.ppl_max,
            within_ppl_max,
            per_sequence,
        },
        None,
    )
}

pub fn ppl_delta(a: &PplDeltaArgs) -> Result<(), CliError> {
    let base = ScoredSequence::concat(&read_logp(&a.input)?)?;
    let cmpr = ScoredSequence::concat(&read_logp(&a.other)?)?;
    #[derive(Serialize)]
    struct Report {
        n_tokens: usize,
        base_ln_ppl: f64,
        cmpr_ln_ppl: f64,
        /// `ln PPL(cmpr) - ln PPL(base)`; positive means compression hurt.
        delta_ln_ppl: f64,
        delta_ln_ppl_ratio_form: f64,
    }
    let delta_ln_ppl = delta_log_perplexity(&base, &cmpr)?;
    emit(
        &Report {
            n_tokens: base.len(),
            base_ln_ppl: PplReport::literal(&base).ln_ppl,
            cmpr_ln_ppl: PplReport::literal(&cmpr).ln_ppl,
            delta_ln_ppl,
            delta_ln_ppl_ratio_form: delta_log_perplexity_ratio_form(&base, &cmpr)?,
        },
        None,
    )
}

pub fn add_token(a: &AddTokenArgs) -> Result<(), CliError> {
    let mut store = read_store(&a.input)?;
    let rows = read_matrix_from(&a.vector, a.format, a.rows, a.dim)?;
    non_empty(&rows, &a.vector)?;
    let cfg = match &a.ranks {
        Some(ranks) => Some(TtConfig::new(
            store.dims().to_vec(),
            Some(ranks.clone()),
            store.epsilon(),
        )?),
        None => None,
    };
    let mut added = Vec::with_capacity(rows.rows());
    for row in rows.iter_rows() {
        added.push(store.add_token(row, cfg.as_ref())?);
    }
    write_store(&a.output, &store)?;
    #[derive(Serialize)]
    struct Report {
        added: Vec<usize>,
        params: Vec<usize>,
        tokens: usize,
    }
    let counts = store.token_param_counts();
    emit(
        &Report {
            params: added.iter().map(|&i| counts[i]).collect(),
            added,
            tokens: store.len(),
        },
        None,
    )
}

pub fn generate(a: &GenerateArgs) -> Result<(), CliError> {
    if a.dims.is_empty() || a.dims.contains(&0) || a.rows == 0 {
        return Err(CliError::Usage(
            "--rows and every entry of --dims must be positive".into(),
        ));
    }
    let m = synth::generate(kind(a.kind), a.rows, &a.dims, a.seed);
    write_matrix(&a.output, a.format, &m)?;
    #[derive(Serialize)]
    struct Report {
        rows: usize,
        d: usize,
        dims: Vec<usize>,
        seed: u64,
    }
    emit(
        &Report {
            rows: m.rows(),
            d: m.cols(),
            dims: a.dims.clone(),
            seed: a.seed,
        },
        None,
    )
}

pub(crate) fn fixture(k: Kind, rows: usize, dims: &[usize], seed: u64) -> EmbeddingMatrix {
    synth::generate(kind(k), rows, dims, seed)
}

pub(crate) fn require_width(dims: &[usize], cols: usize) -> Result<(), CliError> {
    check_width(dims, cols)
}
