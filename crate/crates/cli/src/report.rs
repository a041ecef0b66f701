use std::fs;
use std::path::Path;

use midist_core::{
    apply_prior, fit_poly_ansatz, fit_two_moment, mc_estimate, parse_prior_matrix, parse_table,
    point_stats, summarize, survival, var_o2, BaseFamily, Family, FitResult, McEstimate,
    MomentSummary, PointStats, PriorSpec, RawMoments, TableFormat,
};
use serde::Serialize;

use crate::args::{Args, FitChoice, InputFormat, Prior, VarOrder};
use crate::Failure;

/// Base density of the `ansatz` fit; gamma keeps the support on `[0, ∞)`.
const ANSATZ_BASE: BaseFamily = BaseFamily::Gamma;

#[derive(Debug, Serialize)]
pub struct Report {
    pub tool: Tool,
    pub input: InputEcho,
    pub variance: VarianceChoice,
    pub point_stats: PointStats,
    pub moments: MomentSummary,
    pub fits: Vec<FitEntry>,
    pub quantiles: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mc: Option<McEstimate>,
    pub warnings: Vec<String>,
    pub seed: u64,
}

#[derive(Debug, Serialize)]
pub struct Tool {
    pub name: &'static str,
    pub version: &'static str,
}

#[derive(Debug, Serialize)]
pub struct InputEcho {
    pub path: String,
    pub format: TableFormat,
    pub table: Vec<Vec<f64>>,
    pub prior: PriorSpec,
    /// Posterior total `n` (data plus pseudo-counts).
    pub n: f64,
    pub data_total: f64,
    pub r: usize,
    pub s: usize,
}

#[derive(Debug, Serialize)]
pub struct VarianceChoice {
    pub requested: &'static str,
    pub order: u8,
    pub value: f64,
}

#[derive(Debug, Serialize)]
pub struct FitEntry {
    #[serde(flatten)]
    pub fit: FitResult,
    pub tails: Vec<FitTail>,
    /// Total-variation distance to the Monte Carlo histogram.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mc_histogram_distance: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct FitTail {
    pub threshold: f64,
    pub survival: f64,
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .map_err(|e| Failure::input(format!("cannot read {}: {e}", path.display())))
}

fn table_format(f: InputFormat) -> TableFormat {
    match f {
        InputFormat::Csv => TableFormat::Csv,
        InputFormat::Tsv => TableFormat::Tsv,
        InputFormat::Json => TableFormat::Json,
    }
}

fn prior_spec(args: &Args, format: TableFormat) -> Result<PriorSpec, Failure> {
    match (args.prior, &args.prior_matrix) {
        (Prior::Custom, Some(path)) => Ok(parse_prior_matrix(&read(path)?, format)?),
        (Prior::Custom, None) => Err(Failure::usage("--prior custom requires --prior-matrix")),
        (_, Some(_)) => Err(Failure::usage("--prior-matrix is only valid with --prior custom")),
        (Prior::Haldane, None) => Ok(PriorSpec::Haldane),
        (Prior::Perks, None) => Ok(PriorSpec::Perks),
        (Prior::Jeffreys, None) => Ok(PriorSpec::Jeffreys),
        (Prior::Uniform, None) => Ok(PriorSpec::Uniform),
    }
}

fn fit_families(choices: &[FitChoice]) -> Result<Vec<Family>, Failure> {
    if choices.contains(&FitChoice::None) {
        if choices.len() > 1 {
            return Err(Failure::usage("--fit none cannot be combined with other fits"));
        }
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for c in choices {
        let f = match c {
            FitChoice::Normal => Family::Normal,
            FitChoice::Gamma => Family::Gamma,
            FitChoice::Lognormal => Family::Lognormal,
            FitChoice::Ansatz => Family::PolyAnsatz,
            FitChoice::None => unreachable!(),
        };
        if !out.contains(&f) {
            out.push(f);
        }
    }
    Ok(out)
}

/// Runs the whole pipeline for parsed arguments.
pub fn build_report(args: &Args) -> Result<Report, Failure> {
    let format = table_format(args.input_format);
    let families = fit_families(&args.fit)?;
    if let Some(x) = args.quantiles.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
        return Err(Failure::input(format!("--quantile must be finite and >= 0, got {x}")));
    }
    let table = parse_table(&read(&args.input)?, format)?;
    let prior = prior_spec(args, format)?;
    let post = apply_prior(&table, &prior)?;
    let moments = summarize(&post);
    let mut warnings = Vec::new();
    if moments.diagnostics.validity_warning && !moments.diagnostics.var_o2_negative {
        warnings.push(format!(
            "rs/n = {:.3} >= 1: the 1/n expansions are unreliable",
            moments.diagnostics.rs_over_n
        ));
    }
    warnings.extend(moments.diagnostics.notes.iter().cloned());

    let variance = choose_variance(args.var_order, &post, &moments, &mut warnings)?;

    let mut fits = Vec::new();
    if post.is_degenerate_shape() {
        if !families.is_empty() {
            warnings.push("I is identically 0 for a single row or column; no density fitted".into());
        }
    } else {
        for family in families {
            let mut fit = match family {
                Family::PolyAnsatz => {
                    let c3 = moments.central3.ok_or_else(|| {
                        Failure::from(post.require_all_positive().expect_err("zero cells"))
                    })?;
                    let raw = RawMoments::from_central(
                        moments.mean_exact,
                        variance.value,
                        c3,
                        moments.central4,
                    );
                    fit_poly_ansatz(&raw, ANSATZ_BASE, Some(post.i_max()))?
                }
                _ => {
                    let mut f = fit_two_moment(moments.mean_exact, variance.value, family)?;
                    f.check_support(post.i_max());
                    f
                }
            };
            if fit.diagnostics.negative_density == Some(true) {
                warnings.push(format!("{family} fit: density is negative somewhere on [0, 1.05 I_max]"));
            }
            let tails = args
                .quantiles
                .iter()
                .map(|&x| FitTail {
                    threshold: x,
                    survival: survival(&fit, x),
                })
                .collect();
            fit.diagnostics.notes.sort();
            fits.push(FitEntry {
                fit,
                tails,
                mc_histogram_distance: None,
            });
        }
    }

    let mc = match args.mc {
        Some(n) => {
            let est = mc_estimate(&post, n, args.mc_seed, &args.quantiles)?;
            for entry in &mut fits {
                entry.mc_histogram_distance = Some(est.histogram_distance(&entry.fit));
            }
            Some(est)
        }
        None => None,
    };

    Ok(Report {
        tool: Tool {
            name: "midist",
            version: env!("CARGO_PKG_VERSION"),
        },
        input: InputEcho {
            path: args.input.display().to_string(),
            format,
            table: table.to_rows(),
            prior,
            n: post.total(),
            data_total: table.total(),
            r: post.rows(),
            s: post.cols(),
        },
        variance,
        point_stats: point_stats(&post),
        moments,
        fits,
        quantiles: args.quantiles.clone(),
        mc,
        warnings,
        seed: args.mc_seed,
    })
}

fn choose_variance(
    order: VarOrder,
    post: &midist_core::PosteriorCounts,
    moments: &MomentSummary,
    warnings: &mut Vec<String>,
) -> Result<VarianceChoice, Failure> {
    Ok(match order {
        VarOrder::One => VarianceChoice {
            requested: "1",
            order: 1,
            value: moments.var_o1,
        },
        VarOrder::Two => VarianceChoice {
            requested: "2",
            order: 2,
            value: var_o2(post)?,
        },
        VarOrder::Auto => match moments.var_o2 {
            Some(v) if v > 0.0 || post.is_degenerate_shape() => VarianceChoice {
                requested: "auto",
                order: 2,
                value: v,
            },
            Some(_) => {
                warnings.push("var_o2 is not positive; using var_o1".into());
                VarianceChoice {
                    requested: "auto",
                    order: 1,
                    value: moments.var_o1,
                }
            }
            None => {
                warnings.push("var_o2 needs strictly positive posterior counts; using var_o1".into());
                VarianceChoice {
                    requested: "auto",
                    order: 1,
                    value: moments.var_o1,
                }
            }
        },
    })
}
