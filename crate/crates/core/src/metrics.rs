//! Interpretability scores for a [`PolicyInterpretation`]: response variance
//! within decision paths, a mutual information gap and modularity computed
//! against decision-path indicator factors, decision-path accuracy of the
//! inverse classifiers, and the cross-neuron logic conflict rate.
//!
//! All mutual information is the plug-in estimate from empirical contingency
//! tables, in nats. Responses are discretized per neuron before any MI or
//! variance is computed.
//!
//! When the runner-up neuron `j` of a factor `P_k` has its own best factor
//! `P_l`, the information `z^j` carries about `P_k` only through `P_l` is not
//! credited to it: the runner-up term is `max(0, I[z^j; P_k] - I[P_k; P_l])`, a
//! lower bound on `I[z^j; P_k | P_l]`. Modularity discounts off-target factors
//! the same way against the neuron's best factor.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{DatasetView, Matrix, TrajectoryDataset};
use crate::error::{Error, Result};
use crate::interpret::{InterpretConfig, NeuronInterpreter, PolicyInterpretation};
use crate::logic::{self, LogicProgram};
use crate::tree::PathId;

/// MI at or below this is treated as zero when deciding whether a neuron
/// carries any information.
const MI_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Binning {
    #[default]
    EqualWidth,
    Quantile,
}

impl fmt::Display for Binning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Binning::EqualWidth => "equal_width",
            Binning::Quantile => "quantile",
        })
    }
}

impl FromStr for Binning {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "equal_width" | "equal-width" => Ok(Binning::EqualWidth),
            "quantile" => Ok(Binning::Quantile),
            other => Err(Error::Config(format!(
                "unknown binning `{other}` (expected equal_width or quantile)"
            ))),
        }
    }
}

/// Per-column bin edges fitted to observed responses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discretizer {
    pub n_bins: usize,
    pub strategy: Binning,
    /// Strictly increasing interior edges per column; a value `v` falls in bin
    /// `#{e : e <= v}`, so bins are `[e_{b-1}, e_b)` with open outer ends.
    pub edges: Vec<Vec<f64>>,
}

impl Discretizer {
    /// Fits edges to every column of `responses`. Equal-width bins span the
    /// observed `[min, max]`; a constant column is given the range
    /// `[v - 0.5, v + 0.5]`.
    pub fn fit(responses: &Matrix, n_bins: usize, strategy: Binning) -> Result<Self> {
        if n_bins == 0 {
            return Err(Error::Config("n_bins must be at least 1".into()));
        }
        if responses.nrows() == 0 {
            return Err(Error::Empty("no responses to discretize".into()));
        }
        let edges = (0..responses.ncols())
            .map(|c| {
                let column = responses.column(c);
                match strategy {
                    Binning::EqualWidth => equal_width_edges(&column, n_bins),
                    Binning::Quantile => quantile_edges(column, n_bins),
                }
            })
            .collect();
        Ok(Discretizer {
            n_bins,
            strategy,
            edges,
        })
    }

    pub fn n_columns(&self) -> usize {
        self.edges.len()
    }

    pub fn bin(&self, column: usize, value: f64) -> usize {
        self.edges[column].partition_point(|&e| e <= value)
    }

    pub fn bin_column(&self, column: usize, values: &[f64]) -> Vec<usize> {
        values.iter().map(|&v| self.bin(column, v)).collect()
    }
}

fn equal_width_edges(column: &[f64], n_bins: usize) -> Vec<f64> {
    let (mut lo, mut hi) = column
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if hi <= lo {
        lo -= 0.5;
        hi += 0.5;
    }
    let width = hi - lo;
    let mut edges: Vec<f64> = (1..n_bins)
        .map(|b| lo + width * (b as f64 / n_bins as f64))
        .collect();
    edges.dedup();
    edges
}

fn quantile_edges(mut column: Vec<f64>, n_bins: usize) -> Vec<f64> {
    column.sort_by(f64::total_cmp);
    let n = column.len();
    let mut edges: Vec<f64> = (1..n_bins)
        .map(|b| column[(b * n / n_bins).min(n - 1)])
        .filter(|&e| e > column[0])
        .collect();
    edges.dedup();
    edges
}

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::Dimension {
            expected: a,
            actual: b,
        });
    }
    if a == 0 {
        return Err(Error::Empty("mutual information of empty vectors".into()));
    }
    Ok(())
}

fn counts<T: Copy + Into<usize>>(a: &[T]) -> Vec<usize> {
    let mut out = Vec::new();
    for &v in a {
        let v: usize = v.into();
        if v >= out.len() {
            out.resize(v + 1, 0);
        }
        out[v] += 1;
    }
    out
}

/// Plug-in Shannon entropy in nats.
pub fn entropy<T: Copy + Into<usize>>(a: &[T]) -> f64 {
    let n = a.len() as f64;
    counts(a)
        .into_iter()
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Plug-in mutual information in nats from the joint contingency table.
pub fn mutual_information<A, B>(a: &[A], b: &[B]) -> Result<f64>
where
    A: Copy + Into<usize>,
    B: Copy + Into<usize>,
{
    check_lengths(a.len(), b.len())?;
    let (ca, cb) = (counts(a), counts(b));
    let width = cb.len();
    let mut joint = std::collections::BTreeMap::new();
    if ca.len().saturating_mul(width) <= 1 << 16 {
        let mut table = vec![0usize; ca.len() * width];
        for (&x, &y) in a.iter().zip(b) {
            table[x.into() * width + y.into()] += 1;
        }
        for (i, &c) in table.iter().enumerate().filter(|(_, &c)| c > 0) {
            joint.insert((i / width, i % width), c);
        }
    } else {
        for (&x, &y) in a.iter().zip(b) {
            *joint.entry((x.into(), y.into())).or_insert(0usize) += 1;
        }
    }
    let n = a.len() as f64;
    let mi: f64 = joint
        .into_iter()
        .map(|((x, y), c)| {
            let c = c as f64;
            c / n * (c * n / (ca[x] as f64 * cb[y] as f64)).ln()
        })
        .sum();
    Ok(mi.max(0.0))
}

/// One binary indicator per decision path of every interpreted neuron.
#[derive(Debug, Clone, PartialEq)]
pub struct Factor {
    /// Dataset column of the neuron whose surrogate produced the path.
    pub neuron: usize,
    pub path: PathId,
    pub occupancy: Vec<bool>,
}

impl Factor {
    pub fn entropy(&self) -> f64 {
        entropy(&self.occupancy)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactorSet {
    pub factors: Vec<Factor>,
}

impl FactorSet {
    /// Path occupancy of every row of `states` under each surrogate.
    pub fn build(pi: &PolicyInterpretation, states: &Matrix) -> Result<Self> {
        let mut factors = Vec::new();
        for n in &pi.interpreters {
            let paths = n.true_paths(states)?;
            for k in 0..n.n_paths() {
                factors.push(Factor {
                    neuron: n.column,
                    path: PathId(k),
                    occupancy: paths.iter().map(|p| p.0 == k).collect(),
                });
            }
        }
        Ok(FactorSet { factors })
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }
}

/// `max(0, I[z; P_k] - I[P_k; P_l])`.
pub fn calibrated_information(z_factor: f64, factor_factor: f64) -> f64 {
    (z_factor - factor_factor).max(0.0)
}

/// Index of the first maximum.
fn argmax(values: impl IntoIterator<Item = f64>) -> Option<usize> {
    values
        .into_iter()
        .enumerate()
        .fold(None::<(usize, f64)>, |best, (i, v)| match best {
            Some((_, b)) if b >= v => best,
            _ => Some((i, v)),
        })
        .map(|(i, _)| i)
}

/// Mutual information tables shared by the gap and modularity scores.
struct InformationTables<'a> {
    factors: &'a [Vec<bool>],
    /// `[neuron][factor]`
    z_factor: Vec<Vec<f64>>,
    /// `[factor][factor]`, filled on demand.
    factor_factor: Vec<Vec<Option<f64>>>,
}

impl<'a> InformationTables<'a> {
    fn new(z_bins: &[Vec<usize>], factors: &'a [Vec<bool>]) -> Result<Self> {
        for z in z_bins {
            for f in factors {
                check_lengths(z.len(), f.len())?;
            }
        }
        let z_factor = z_bins
            .par_iter()
            .map(|z| {
                factors
                    .iter()
                    .map(|f| mutual_information(z, f))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let k = factors.len();
        Ok(InformationTables {
            factors,
            z_factor,
            factor_factor: vec![vec![None; k]; k],
        })
    }

    fn between_factors(&mut self, a: usize, b: usize) -> f64 {
        if let Some(v) = self.factor_factor[a][b] {
            return v;
        }
        let v = mutual_information(&self.factors[a], &self.factors[b]).expect("lengths checked");
        self.factor_factor[a][b] = Some(v);
        self.factor_factor[b][a] = Some(v);
        v
    }

    fn best_factor(&self, neuron: usize) -> Option<usize> {
        argmax(self.z_factor[neuron].iter().copied())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorScore {
    pub entropy: f64,
    /// Position of the most informative neuron among the scored responses.
    pub top_neuron: Option<usize>,
    pub top_information: f64,
    pub runner_up: f64,
    /// `None` for factors with zero entropy.
    pub score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuronModularity {
    pub best_factor: Option<usize>,
    pub best_information: f64,
    /// `None` when the neuron carries no information about any factor.
    pub score: Option<f64>,
}

/// Calibrated mutual information gap from discretized responses and factor
/// indicators. Returns the mean score and the per-factor breakdown; factors
/// with zero entropy are skipped.
pub fn mig_from_parts(
    z_bins: &[Vec<usize>],
    factors: &[Vec<bool>],
) -> Result<(f64, Vec<FactorScore>)> {
    if factors.len() < 2 {
        return Err(Error::UndefinedMetric {
            metric: "mig",
            reason: format!("needs at least 2 factors, got {}", factors.len()),
        });
    }
    let mut t = InformationTables::new(z_bins, factors)?;
    let best: Vec<Option<usize>> = (0..z_bins.len()).map(|j| t.best_factor(j)).collect();
    let mut scores = Vec::with_capacity(factors.len());
    for (k, f) in factors.iter().enumerate() {
        let h = entropy(f);
        let top = argmax(t.z_factor.iter().map(|row| row[k]));
        let Some(top_neuron) = top.filter(|_| h > 0.0) else {
            if h <= 0.0 {
                log::warn!("factor {k} never changes value; skipped");
            }
            scores.push(FactorScore {
                entropy: h,
                top_neuron: top,
                top_information: top.map_or(0.0, |i| t.z_factor[i][k]),
                runner_up: 0.0,
                score: None,
            });
            continue;
        };
        let mut runner_up = 0.0f64;
        for (j, best_j) in best.iter().enumerate() {
            if j == top_neuron {
                continue;
            }
            let l = best_j.expect("at least one factor");
            let calibrated = calibrated_information(t.z_factor[j][k], t.between_factors(k, l));
            runner_up = runner_up.max(calibrated);
        }
        let top_information = t.z_factor[top_neuron][k];
        scores.push(FactorScore {
            entropy: h,
            top_neuron: Some(top_neuron),
            top_information,
            runner_up,
            score: Some((top_information - runner_up) / h),
        });
    }
    let defined: Vec<f64> = scores.iter().filter_map(|s| s.score).collect();
    if defined.is_empty() {
        return Err(Error::UndefinedMetric {
            metric: "mig",
            reason: "every factor has zero entropy".into(),
        });
    }
    Ok((defined.iter().sum::<f64>() / defined.len() as f64, scores))
}

/// Calibrated modularity from discretized responses and factor indicators.
/// Neurons with no information about any factor are skipped.
pub fn modularity_from_parts(
    z_bins: &[Vec<usize>],
    factors: &[Vec<bool>],
) -> Result<(f64, Vec<NeuronModularity>)> {
    let k_total = factors.len();
    if k_total < 2 {
        return Err(Error::UndefinedMetric {
            metric: "modularity",
            reason: format!("needs at least 2 factors, got {k_total}"),
        });
    }
    let mut t = InformationTables::new(z_bins, factors)?;
    let mut out = Vec::with_capacity(z_bins.len());
    for i in 0..z_bins.len() {
        let best = t.best_factor(i).expect("at least one factor");
        let m = t.z_factor[i][best];
        if m <= MI_FLOOR {
            out.push(NeuronModularity {
                best_factor: None,
                best_information: m,
                score: None,
            });
            continue;
        }
        let mut off_target = 0.0;
        for k in (0..k_total).filter(|&k| k != best) {
            let c = calibrated_information(t.z_factor[i][k], t.between_factors(k, best));
            off_target += c * c;
        }
        out.push(NeuronModularity {
            best_factor: Some(best),
            best_information: m,
            score: Some(1.0 - off_target / ((k_total - 1) as f64 * m * m)),
        });
    }
    let defined: Vec<f64> = out.iter().filter_map(|s| s.score).collect();
    if defined.is_empty() {
        return Err(Error::UndefinedMetric {
            metric: "modularity",
            reason: "no neuron carries information about any factor".into(),
        });
    }
    Ok((defined.iter().sum::<f64>() / defined.len() as f64, out))
}

/// Mean over paths of the population variance of `bin / n_bins` among rows
/// whose true path is that path. Paths without rows are ignored. Moments are
/// accumulated on integer bin indices, so a constant group has variance exactly 0.
pub fn path_variance(
    bins: &[usize],
    paths: &[PathId],
    n_paths: usize,
    n_bins: usize,
) -> Option<f64> {
    let mut groups = vec![(0u128, 0u128, 0u128); n_paths];
    for (&b, p) in bins.iter().zip(paths) {
        let b = b as u128;
        let g = &mut groups[p.0];
        g.0 += 1;
        g.1 += b;
        g.2 += b * b;
    }
    let scale = (n_bins * n_bins) as f64;
    let variances: Vec<f64> = groups
        .into_iter()
        .filter(|g| g.0 > 0)
        .map(|(n, s, s2)| (n * s2 - s * s) as f64 / (n * n) as f64 / scale)
        .collect();
    (!variances.is_empty()).then(|| variances.iter().sum::<f64>() / variances.len() as f64)
}

/// Mean fraction of the predicted program's predicates that hold at the true
/// state. Empty predicted programs count as fully satisfied. `None` when every
/// program of the neuron is empty.
pub fn neuron_path_accuracy(
    programs: &[LogicProgram],
    states: &Matrix,
    predicted: &[PathId],
) -> Option<f64> {
    if programs.iter().all(LogicProgram::is_empty) || predicted.is_empty() {
        return None;
    }
    let total: f64 = states
        .rows()
        .zip(predicted)
        .map(|(s, p)| programs[p.0].satisfied_fraction(s))
        .sum();
    Some(total / predicted.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuronMetrics {
    pub neuron: String,
    pub column: usize,
    pub n_paths: usize,
    pub variance: Option<f64>,
    pub path_accuracy: Option<f64>,
    pub modularity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorMetrics {
    pub neuron: String,
    pub path: PathId,
    pub entropy: f64,
    pub top_neuron: Option<String>,
    pub mig: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsConfig {
    pub interpret: InterpretConfig,
    pub n_bins: usize,
    pub binning: Binning,
    pub n_rows: usize,
    pub neurons: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub variance: f64,
    /// `None` when fewer than two non-degenerate factors exist.
    pub mig: Option<f64>,
    /// `None` when no neuron carries information about any factor.
    pub modularity: Option<f64>,
    pub path_accuracy: f64,
    pub logic_conflict: f64,
    pub per_neuron: Vec<NeuronMetrics>,
    pub per_factor: Vec<FactorMetrics>,
    pub config: MetricsConfig,
}

pub const CSV_COLUMNS: [&str; 5] = [
    "variance",
    "mig",
    "modularity",
    "path_accuracy",
    "logic_conflict",
];

fn csv_field(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn md_field(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.4}")).unwrap_or_else(|| "n/a".into())
}

impl MetricsReport {
    pub fn values(&self) -> [Option<f64>; 5] {
        [
            Some(self.variance),
            self.mig,
            self.modularity,
            Some(self.path_accuracy),
            Some(self.logic_conflict),
        ]
    }

    /// Comma-separated values in `CSV_COLUMNS` order; undefined metrics are empty.
    pub fn csv_row(&self) -> String {
        self.values().map(csv_field).join(",")
    }

    pub fn to_csv(&self) -> String {
        format!("{}\n{}\n", CSV_COLUMNS.join(","), self.csv_row())
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "| {} |", CSV_COLUMNS.join(" | "));
        let _ = writeln!(out, "|{}", "---|".repeat(CSV_COLUMNS.len()));
        let _ = writeln!(out, "| {} |", self.values().map(md_field).join(" | "));
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "| Neuron | Paths | Variance | Path accuracy | Modularity |"
        );
        let _ = writeln!(out, "|---|---|---|---|---|");
        for n in &self.per_neuron {
            let _ = writeln!(
                out,
                "| {} | {} | {} | {} | {} |",
                n.neuron,
                n.n_paths,
                md_field(n.variance),
                md_field(n.path_accuracy),
                md_field(n.modularity)
            );
        }
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "bins: {} ({}), rows: {}, surrogate: {} depth {} leaf {} ccp {}, classifier: {} depth {} leaf {} ccp {}",
            self.config.n_bins,
            self.config.binning,
            self.config.n_rows,
            self.config.interpret.surrogate.criterion,
            self.config.interpret.surrogate.max_depth,
            self.config.interpret.surrogate.min_leaf_fraction,
            self.config.interpret.surrogate.ccp_alpha,
            self.config.interpret.classifier.criterion,
            self.config.interpret.classifier.max_depth,
            self.config.interpret.classifier.min_leaf_fraction,
            self.config.interpret.classifier.ccp_alpha,
        );
        out
    }
}

/// Discretizes only the columns the interpretation covers, in interpreter order.
fn binned_responses(
    pi: &PolicyInterpretation,
    view: &DatasetView,
    disc: &Discretizer,
) -> Result<Vec<Vec<usize>>> {
    pi.interpreters
        .iter()
        .map(|n| {
            if n.column >= disc.n_columns() || n.column >= view.responses.ncols() {
                return Err(Error::Dimension {
                    expected: n.column + 1,
                    actual: disc.n_columns().min(view.responses.ncols()),
                });
            }
            Ok(disc.bin_column(n.column, &view.responses.column(n.column)))
        })
        .collect()
}

fn check_view(pi: &PolicyInterpretation, view: &DatasetView) -> Result<()> {
    if view.states.ncols() != pi.state_names.len() {
        return Err(Error::Dimension {
            expected: pi.state_names.len(),
            actual: view.states.ncols(),
        });
    }
    if pi.interpreters.is_empty() {
        return Err(Error::Empty("interpretation has no neurons".into()));
    }
    Ok(())
}

/// Mean per-neuron path variance over neurons with at least one populated path.
pub fn variance_metric(
    view: &DatasetView,
    pi: &PolicyInterpretation,
    disc: &Discretizer,
) -> Result<f64> {
    check_view(pi, view)?;
    let bins = binned_responses(pi, view, disc)?;
    let per = neuron_variances(view, pi, disc, &bins)?;
    Ok(mean(per.into_iter().flatten()).unwrap_or(0.0))
}

fn neuron_variances(
    view: &DatasetView,
    pi: &PolicyInterpretation,
    disc: &Discretizer,
    bins: &[Vec<usize>],
) -> Result<Vec<Option<f64>>> {
    pi.interpreters
        .iter()
        .zip(bins)
        .map(|(n, b)| {
            let paths = n.true_paths(&view.states)?;
            Ok(path_variance(b, &paths, n.n_paths(), disc.n_bins))
        })
        .collect()
}

fn factor_indicators(
    view: &DatasetView,
    pi: &PolicyInterpretation,
) -> Result<(FactorSet, Vec<Vec<bool>>)> {
    let set = FactorSet::build(pi, &view.states)?;
    let indicators = set.factors.iter().map(|f| f.occupancy.clone()).collect();
    Ok((set, indicators))
}

pub fn mig_metric(
    view: &DatasetView,
    pi: &PolicyInterpretation,
    disc: &Discretizer,
) -> Result<f64> {
    check_view(pi, view)?;
    let bins = binned_responses(pi, view, disc)?;
    let (_, indicators) = factor_indicators(view, pi)?;
    Ok(mig_from_parts(&bins, &indicators)?.0)
}

pub fn modularity_metric(
    view: &DatasetView,
    pi: &PolicyInterpretation,
    disc: &Discretizer,
) -> Result<f64> {
    check_view(pi, view)?;
    let bins = binned_responses(pi, view, disc)?;
    let (_, indicators) = factor_indicators(view, pi)?;
    Ok(modularity_from_parts(&bins, &indicators)?.0)
}

fn neuron_accuracies(view: &DatasetView, pi: &PolicyInterpretation) -> Vec<Option<f64>> {
    pi.interpreters
        .iter()
        .map(|n| {
            let predicted = n.predicted_paths(&view.responses.column(n.column));
            neuron_path_accuracy(&n.programs, &view.states, &predicted)
        })
        .collect()
}

/// Mean decision-path accuracy over neurons with at least one non-empty
/// program; 1 when every neuron is trivial.
pub fn path_accuracy(view: &DatasetView, pi: &PolicyInterpretation) -> Result<f64> {
    check_view(pi, view)?;
    Ok(mean(neuron_accuracies(view, pi).into_iter().flatten()).unwrap_or(1.0))
}

/// Mean over rows of the fraction of multiply-constrained state dimensions on
/// which the neurons' predicted programs cannot all hold.
pub fn conflict_metric(view: &DatasetView, pi: &PolicyInterpretation) -> Result<f64> {
    check_view(pi, view)?;
    let predicted: Vec<(&NeuronInterpreter, Vec<PathId>)> = pi
        .interpreters
        .iter()
        .map(|n| (n, n.predicted_paths(&view.responses.column(n.column))))
        .collect();
    let timesteps = (0..view.n_rows()).map(|t| {
        predicted
            .iter()
            .map(|(n, paths)| &n.programs[paths[t].0])
            .collect::<Vec<&LogicProgram>>()
    });
    logic::conflict_rate(timesteps)
}

fn mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values
        .into_iter()
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// All five metrics for `pi` evaluated on `ds`, with bins fitted on `ds`.
pub fn evaluate(
    ds: &TrajectoryDataset,
    pi: &PolicyInterpretation,
    binning: Binning,
) -> Result<MetricsReport> {
    let view = ds.flatten();
    let disc = Discretizer::fit(&view.responses, pi.config.n_bins, binning)?;
    evaluate_view(&view, pi, &disc)
}

pub fn evaluate_view(
    view: &DatasetView,
    pi: &PolicyInterpretation,
    disc: &Discretizer,
) -> Result<MetricsReport> {
    check_view(pi, view)?;
    let bins = binned_responses(pi, view, disc)?;
    let variances = neuron_variances(view, pi, disc, &bins)?;
    let accuracies = neuron_accuracies(view, pi);
    let (set, indicators) = factor_indicators(view, pi)?;

    let label = |position: usize| pi.interpreters[position].neuron.to_string();
    let (mig, factor_scores) = match mig_from_parts(&bins, &indicators) {
        Ok((v, s)) => (Some(v), Some(s)),
        Err(e @ Error::UndefinedMetric { .. }) => {
            log::warn!("{e}");
            (None, None)
        }
        Err(e) => return Err(e),
    };
    let (modularity, neuron_modularity) = match modularity_from_parts(&bins, &indicators) {
        Ok((v, s)) => (Some(v), Some(s)),
        Err(e @ Error::UndefinedMetric { .. }) => {
            log::warn!("{e}");
            (None, None)
        }
        Err(e) => return Err(e),
    };

    let per_neuron = pi
        .interpreters
        .iter()
        .enumerate()
        .map(|(i, n)| NeuronMetrics {
            neuron: n.neuron.to_string(),
            column: n.column,
            n_paths: n.n_paths(),
            variance: variances[i],
            path_accuracy: accuracies[i],
            modularity: neuron_modularity.as_ref().and_then(|m| m[i].score),
        })
        .collect();
    let source_label = |column: usize| {
        pi.interpreters
            .iter()
            .find(|n| n.column == column)
            .map(|n| n.neuron.to_string())
            .unwrap_or_else(|| column.to_string())
    };
    let per_factor = set
        .factors
        .iter()
        .enumerate()
        .map(|(k, f)| {
            let score = factor_scores.as_ref().map(|s| &s[k]);
            FactorMetrics {
                neuron: source_label(f.neuron),
                path: f.path,
                entropy: f.entropy(),
                top_neuron: score.and_then(|s| s.top_neuron).map(label),
                mig: score.and_then(|s| s.score),
            }
        })
        .collect();

    Ok(MetricsReport {
        variance: mean(variances.into_iter().flatten()).unwrap_or(0.0),
        mig,
        modularity,
        path_accuracy: mean(accuracies.into_iter().flatten()).unwrap_or(1.0),
        logic_conflict: conflict_metric(view, pi)?,
        per_neuron,
        per_factor,
        config: MetricsConfig {
            interpret: pi.config,
            n_bins: disc.n_bins,
            binning: disc.strategy,
            n_rows: view.n_rows(),
            neurons: pi
                .interpreters
                .iter()
                .map(|n| n.neuron.to_string())
                .collect(),
        },
    })
}

/// Surrogate pruning strengths and minimum leaf fractions to cross.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub ccp_alpha: Vec<f64>,
    pub min_leaf_fraction: Vec<f64>,
}

impl Default for SweepGrid {
    fn default() -> Self {
        SweepGrid {
            ccp_alpha: vec![0.001, 0.003, 0.01],
            min_leaf_fraction: vec![0.01, 0.1, 0.2],
        }
    }
}

impl SweepGrid {
    /// Grid cells, pruning strength varying slowest.
    pub fn cells(&self) -> Vec<(f64, f64)> {
        self.ccp_alpha
            .iter()
            .flat_map(|&c| self.min_leaf_fraction.iter().map(move |&l| (c, l)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub ccp_alpha: f64,
    pub min_leaf_fraction: f64,
    pub report: MetricsReport,
}

/// Runs the full pipeline once per grid cell, overriding the surrogate's
/// pruning strength and minimum leaf fraction in `base`.
pub fn hyperparameter_sweep(
    ds: &TrajectoryDataset,
    neurons: &[usize],
    base: &InterpretConfig,
    grid: &SweepGrid,
    binning: Binning,
) -> Result<Vec<SweepRow>> {
    let cells = grid.cells();
    if cells.is_empty() {
        return Err(Error::Config("sweep grid is empty".into()));
    }
    let view = ds.flatten();
    let disc = Discretizer::fit(&view.responses, base.n_bins, binning)?;
    cells
        .into_iter()
        .map(|(ccp_alpha, min_leaf_fraction)| {
            let mut cfg = *base;
            cfg.surrogate.ccp_alpha = ccp_alpha;
            cfg.surrogate.min_leaf_fraction = min_leaf_fraction;
            let pi = PolicyInterpretation::build_from_view(
                &view,
                ds.state_names(),
                ds.neuron_ids(),
                neurons,
                &cfg,
            )?;
            log::info!("sweep cell ccp_alpha={ccp_alpha} min_leaf_fraction={min_leaf_fraction}");
            Ok(SweepRow {
                ccp_alpha,
                min_leaf_fraction,
                report: evaluate_view(&view, &pi, &disc)?,
            })
        })
        .collect()
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = format!("ccp_alpha,min_leaf_fraction,{}\n", CSV_COLUMNS.join(","));
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{}",
            r.ccp_alpha,
            r.min_leaf_fraction,
            r.report.csv_row()
        );
    }
    out
}

/// One row per grid cell, one column per metric.
pub fn sweep_markdown(rows: &[SweepRow]) -> String {
    let mut out = format!(
        "| Cost complexity pruning | Min leaf fraction | Variance | MIG | Modularity | Path accuracy | Logic conflict |\n|{}\n",
        "---|".repeat(7)
    );
    for r in rows {
        let _ = writeln!(
            out,
            "| {} | {} | {} |",
            r.ccp_alpha,
            r.min_leaf_fraction,
            r.report.values().map(md_field).join(" | ")
        );
    }
    out
}
