//! Decision-profile combiner algebra.
//!
//! A decision profile stacks the per-class confidence vectors of all
//! (derivative, scale) base classifiers into an `m x c` matrix with
//! `m = ns * nd`. Row `i = s + k * ns` holds scale `s` of derivative `k`,
//! i.e. rows form contiguous per-derivative blocks with the scale index
//! varying fastest.
//!
//! Combiners reduce the profile to a single per-class support vector:
//! either in one stage (a fixed rule applied down each column), or in two
//! stages over one of two topologies:
//!
//! - `scales_then_derivatives`: stage 1 aggregates the scales inside each
//!   derivative block (nd groups of ns rows), stage 2 aggregates across
//!   derivatives.
//! - `derivatives_then_scales`: stage 1 aggregates the derivatives at each
//!   scale (ns groups of nd rows), stage 2 aggregates across scales.
//!
//! For min, prod, mean and max the two-stage combiner equals the one-stage
//! rule under both topologies; the median does not, and rule pairs like
//! mean/prod do not commute across topologies. Trainable decision templates
//! (per-class mean profiles, nearest-template classification) are also
//! provided.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fixed aggregation rules. `Vote` is legal only as a stage rule (hard
/// one-hot group decisions); the plain column rules are the other five.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CombineRule {
    Min,
    Prod,
    Median,
    Mean,
    Max,
    Vote,
}

impl CombineRule {
    /// Stable lowercase name, used in CSV headers and CLI parsing.
    pub fn name(self) -> &'static str {
        match self {
            CombineRule::Min => "min",
            CombineRule::Prod => "prod",
            CombineRule::Median => "median",
            CombineRule::Mean => "mean",
            CombineRule::Max => "max",
            CombineRule::Vote => "vote",
        }
    }
}

impl std::str::FromStr for CombineRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "min" => Ok(CombineRule::Min),
            "prod" => Ok(CombineRule::Prod),
            "median" => Ok(CombineRule::Median),
            "mean" => Ok(CombineRule::Mean),
            "max" => Ok(CombineRule::Max),
            "vote" => Ok(CombineRule::Vote),
            other => Err(Error::invalid(format!(
                "unknown combine rule {other:?}; expected min|prod|median|mean|max|vote"
            ))),
        }
    }
}

/// How the profile is reduced. The two `fuse_*` variants restructure the
/// features themselves (concatenating PCA-reduced subsets before a single
/// classifier); they are interpreted by the pipeline, not by
/// [`combine_two_stage`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    OneStage,
    ScalesThenDerivatives,
    DerivativesThenScales,
    FuseScalesThenCombine,
    FuseDerivativesThenCombine,
}

impl Topology {
    /// Stable snake_case name, used in CSV headers and CLI parsing.
    pub fn name(self) -> &'static str {
        match self {
            Topology::OneStage => "one_stage",
            Topology::ScalesThenDerivatives => "scales_then_derivatives",
            Topology::DerivativesThenScales => "derivatives_then_scales",
            Topology::FuseScalesThenCombine => "fuse_scales_then_combine",
            Topology::FuseDerivativesThenCombine => "fuse_derivatives_then_combine",
        }
    }
}

impl std::str::FromStr for Topology {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "one_stage" => Ok(Topology::OneStage),
            "scales_then_derivatives" => Ok(Topology::ScalesThenDerivatives),
            "derivatives_then_scales" => Ok(Topology::DerivativesThenScales),
            "fuse_scales_then_combine" => Ok(Topology::FuseScalesThenCombine),
            "fuse_derivatives_then_combine" => Ok(Topology::FuseDerivativesThenCombine),
            other => Err(Error::invalid(format!(
                "unknown topology {other:?}; expected one_stage|scales_then_derivatives|\
                 derivatives_then_scales|fuse_scales_then_combine|fuse_derivatives_then_combine"
            ))),
        }
    }
}

/// A complete combiner choice. `rule_stage2` is ignored by `one_stage`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CombinerSpec {
    pub topology: Topology,
    pub rule_stage1: CombineRule,
    pub rule_stage2: CombineRule,
}

/// An `m x c` matrix of normalized per-classifier class supports.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionProfile {
    supports: Array2<f64>,
    ns: usize,
    nd: usize,
}

impl DecisionProfile {
    /// Row index of scale `s` (0-based) of derivative `k`: `s + k * ns`.
    pub fn row_index(s: usize, k: usize, ns: usize) -> usize {
        s + k * ns
    }

    /// The support matrix (`ns * nd` rows, `c` columns).
    pub fn supports(&self) -> &Array2<f64> {
        &self.supports
    }

    /// Number of scales.
    pub fn num_scales(&self) -> usize {
        self.ns
    }

    /// Number of derivative channels.
    pub fn num_derivatives(&self) -> usize {
        self.nd
    }

    /// Number of rows `m = ns * nd`.
    pub fn num_rows(&self) -> usize {
        self.supports.nrows()
    }

    /// Number of classes `c`.
    pub fn num_classes(&self) -> usize {
        self.supports.ncols()
    }

    fn row(&self, i: usize) -> Vec<f64> {
        self.supports.row(i).to_vec()
    }

    /// Row indices of each stage-1 group under a two-stage topology.
    fn groups(&self, topology: Topology) -> Result<Vec<Vec<usize>>> {
        match topology {
            Topology::ScalesThenDerivatives => Ok((0..self.nd)
                .map(|k| (0..self.ns).map(|s| s + k * self.ns).collect())
                .collect()),
            Topology::DerivativesThenScales => Ok((0..self.ns)
                .map(|s| (0..self.nd).map(|k| s + k * self.ns).collect())
                .collect()),
            other => Err(Error::invalid(format!(
                "topology {} is not a two-stage grouping",
                other.name()
            ))),
        }
    }
}

/// Stacks `m = ns * nd` nonnegative confidence rows (layout: scale fastest,
/// derivative blocks contiguous) into a decision profile, renormalizing
/// every row to sum 1. An all-zero row becomes the uniform vector, keeping
/// the profile valid even when a base classifier degenerates.
pub fn build_decision_profile(
    confidence_rows: &[Vec<f64>],
    ns: usize,
    nd: usize,
) -> Result<DecisionProfile> {
    if ns == 0 || nd == 0 {
        return Err(Error::invalid("ns and nd must be at least 1"));
    }
    if confidence_rows.len() != ns * nd {
        return Err(Error::invalid(format!(
            "expected {} rows (ns={ns} * nd={nd}), got {}",
            ns * nd,
            confidence_rows.len()
        )));
    }
    let c = confidence_rows[0].len();
    if c == 0 {
        return Err(Error::invalid("confidence rows must be nonempty"));
    }
    let mut supports = Array2::zeros((ns * nd, c));
    for (i, row) in confidence_rows.iter().enumerate() {
        if row.len() != c {
            return Err(Error::DimensionMismatch(format!(
                "row {i} has {} classes, expected {c}",
                row.len()
            )));
        }
        if row.iter().any(|v| *v < 0.0 || !v.is_finite()) {
            return Err(Error::invalid(format!(
                "row {i} contains a negative or non-finite confidence"
            )));
        }
        let sum: f64 = row.iter().sum();
        for (j, v) in row.iter().enumerate() {
            supports[[i, j]] = if sum > 0.0 { v / sum } else { 1.0 / c as f64 };
        }
    }
    Ok(DecisionProfile { supports, ns, nd })
}

/// Applies a plain column rule to a nonempty set of supports.
fn apply_rule(rule: CombineRule, values: &[f64]) -> f64 {
    debug_assert!(!values.is_empty());
    match rule {
        CombineRule::Min => values.iter().copied().fold(f64::INFINITY, f64::min),
        CombineRule::Max => values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        CombineRule::Mean => values.iter().sum::<f64>() / values.len() as f64,
        CombineRule::Median => {
            let mut sorted = values.to_vec();
            sorted.sort_by(f64::total_cmp);
            let mid = sorted.len() / 2;
            if sorted.len() % 2 == 1 {
                sorted[mid]
            } else {
                (sorted[mid - 1] + sorted[mid]) / 2.0
            }
        }
        CombineRule::Prod => {
            // Log domain to dodge underflow; exact zeros short-circuit.
            if values.contains(&0.0) {
                0.0
            } else {
                values.iter().map(|v| v.ln()).sum::<f64>().exp()
            }
        }
        CombineRule::Vote => unreachable!("vote is rejected before rule application"),
    }
}

/// Reduces rows by plurality vote: each row votes for its argmax class and
/// the winning class (ties to the lowest index) is returned as a one-hot
/// support vector.
fn vote_one_hot(rows: &[Vec<f64>], c: usize) -> Vec<f64> {
    let mut counts = vec![0usize; c];
    for row in rows {
        counts[argmax_class(row).expect("vote rows are nonempty")] += 1;
    }
    let winner = counts
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
        .map(|(i, _)| i)
        .unwrap();
    let mut out = vec![0.0; c];
    out[winner] = 1.0;
    out
}

/// One-stage combiner: applies `rule` down every column of the profile.
/// `vote` is not a column rule; use [`majority_vote`] for hard voting.
pub fn combine_one_stage(dp: &DecisionProfile, rule: CombineRule) -> Result<Vec<f64>> {
    if rule == CombineRule::Vote {
        return Err(Error::invalid(
            "vote is not a one-stage column rule; use majority_vote",
        ));
    }
    let c = dp.num_classes();
    let mut mu = Vec::with_capacity(c);
    for j in 0..c {
        let column: Vec<f64> = (0..dp.num_rows()).map(|i| dp.supports[[i, j]]).collect();
        mu.push(apply_rule(rule, &column));
    }
    Ok(mu)
}

/// Plurality vote over the profile rows; every tie resolves to the lowest
/// class index.
pub fn majority_vote(dp: &DecisionProfile) -> usize {
    let rows: Vec<Vec<f64>> = (0..dp.num_rows()).map(|i| dp.row(i)).collect();
    argmax_class(&vote_one_hot(&rows, dp.num_classes())).unwrap()
}

/// Aggregates one stage over the given row groups.
fn aggregate_groups(
    rows: &[Vec<f64>],
    groups: &[Vec<usize>],
    rule: CombineRule,
    c: usize,
) -> Vec<Vec<f64>> {
    groups
        .iter()
        .map(|group| {
            let members: Vec<Vec<f64>> = group.iter().map(|&i| rows[i].clone()).collect();
            if rule == CombineRule::Vote {
                vote_one_hot(&members, c)
            } else {
                (0..c)
                    .map(|j| {
                        let column: Vec<f64> = members.iter().map(|r| r[j]).collect();
                        apply_rule(rule, &column)
                    })
                    .collect()
            }
        })
        .collect()
}

/// Two-stage combiner over one of the grouped topologies: stage 1 reduces
/// each group to a support vector with `rule_stage1`, stage 2 reduces those
/// with `rule_stage2`. `vote` at stage 1 emits one-hot group decisions; as
/// `rule_stage2` it returns the plurality one-hot vector.
pub fn combine_two_stage(dp: &DecisionProfile, spec: &CombinerSpec) -> Result<Vec<f64>> {
    let groups = dp.groups(spec.topology)?;
    let c = dp.num_classes();
    let rows: Vec<Vec<f64>> = (0..dp.num_rows()).map(|i| dp.row(i)).collect();
    let stage1 = aggregate_groups(&rows, &groups, spec.rule_stage1, c);
    if spec.rule_stage2 == CombineRule::Vote {
        return Ok(vote_one_hot(&stage1, c));
    }
    Ok((0..c)
        .map(|j| {
            let column: Vec<f64> = stage1.iter().map(|r| r[j]).collect();
            apply_rule(spec.rule_stage2, &column)
        })
        .collect())
}

/// Dispatches a combiner spec: one-stage rules (vote becomes a hard
/// majority decision encoded one-hot), or either two-stage topology. The
/// fusion topologies restructure features before classification and must be
/// handled by the pipeline.
pub fn combine(dp: &DecisionProfile, spec: &CombinerSpec) -> Result<Vec<f64>> {
    match spec.topology {
        Topology::OneStage => {
            if spec.rule_stage1 == CombineRule::Vote {
                let winner = majority_vote(dp);
                let mut mu = vec![0.0; dp.num_classes()];
                mu[winner] = 1.0;
                Ok(mu)
            } else {
                combine_one_stage(dp, spec.rule_stage1)
            }
        }
        Topology::ScalesThenDerivatives | Topology::DerivativesThenScales => {
            combine_two_stage(dp, spec)
        }
        other => Err(Error::invalid(format!(
            "topology {} restructures features and is resolved by the pipeline",
            other.name()
        ))),
    }
}

/// Per-class mean decision profiles.
#[derive(Debug, Clone)]
pub struct DecisionTemplates {
    templates: Vec<Array2<f64>>,
}

impl DecisionTemplates {
    /// Template of class `j`.
    pub fn template(&self, j: usize) -> &Array2<f64> {
        &self.templates[j]
    }

    /// Number of classes.
    pub fn num_classes(&self) -> usize {
        self.templates.len()
    }
}

/// Fits decision templates: the template of class `j` is the elementwise
/// mean of all training profiles labeled `j`. Labels must cover
/// `0..=max_label` with at least one profile each.
pub fn fit_decision_templates(
    profiles: &[DecisionProfile],
    labels: &[usize],
) -> Result<DecisionTemplates> {
    if profiles.is_empty() {
        return Err(Error::InsufficientData(
            "decision templates need at least one profile".into(),
        ));
    }
    if profiles.len() != labels.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} profiles but {} labels",
            profiles.len(),
            labels.len()
        )));
    }
    let shape = profiles[0].supports.dim();
    if profiles.iter().any(|p| p.supports.dim() != shape) {
        return Err(Error::DimensionMismatch(
            "training profiles must share one shape".into(),
        ));
    }
    let num_classes = labels.iter().max().unwrap() + 1;
    let mut sums = vec![Array2::<f64>::zeros(shape); num_classes];
    let mut counts = vec![0usize; num_classes];
    for (profile, &label) in profiles.iter().zip(labels) {
        sums[label] += &profile.supports;
        counts[label] += 1;
    }
    if let Some(empty) = counts.iter().position(|&c| c == 0) {
        return Err(Error::InsufficientData(format!(
            "class {empty} has no training profiles"
        )));
    }
    let templates = sums
        .into_iter()
        .zip(&counts)
        .map(|(sum, &count)| sum / count as f64)
        .collect();
    Ok(DecisionTemplates { templates })
}

/// Nearest-template classification: the class whose template has the
/// smallest squared Euclidean (Frobenius) distance to `dp`; ties resolve to
/// the lowest class index.
pub fn classify_decision_templates(
    dp: &DecisionProfile,
    templates: &DecisionTemplates,
) -> Result<usize> {
    let shape = dp.supports.dim();
    let mut best = None;
    for (j, template) in templates.templates.iter().enumerate() {
        if template.dim() != shape {
            return Err(Error::DimensionMismatch(format!(
                "profile is {shape:?} but template {j} is {:?}",
                template.dim()
            )));
        }
        let dist: f64 = dp
            .supports
            .iter()
            .zip(template.iter())
            .map(|(a, b)| (a - b).powi(2))
            .sum();
        match best {
            None => best = Some((j, dist)),
            Some((_, d)) if dist < d => best = Some((j, dist)),
            _ => {}
        }
    }
    Ok(best.expect("templates are never empty").0)
}

/// Index of the largest support; ties resolve to the lowest index.
pub fn argmax_class(mu: &[f64]) -> Result<usize> {
    if mu.is_empty() {
        return Err(Error::invalid("cannot take the argmax of an empty vector"));
    }
    let mut best = 0;
    for (i, v) in mu.iter().enumerate().skip(1) {
        if *v > mu[best] {
            best = i;
        }
    }
    Ok(best)
}
