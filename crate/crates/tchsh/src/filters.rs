//! Stochastic pre/post filter operations (SPPOs) and the activation search.
//!
//! A filter is a CP trace-nonincreasing map with a single Kraus operator K,
//! I - K^dagger K PSD. The matched pair used in the photonic setup attenuates
//! one basis component by a power loss D:
//!
//!   K_pre  = |0><0| + sqrt(1-D)|1><1|
//!   K_post = sqrt(1-D)|0><0| + |1><1|
//!
//! `activate` asks whether a channel that satisfies the temporal CHSH bound
//! can be pushed past it by such filters, and searches the requested filter
//! family by grid evaluation plus coordinate-descent refinement.

use serde_json::json;
use thiserror::Error;

use crate::cmatrix::{CmatrixError, ComplexMatrix, HERMITICITY_TOL};
use crate::quantum::{matrix_to_pairs, ChannelKind, KrausChannel, MeasurementScenario, QuantumError};
use crate::temporal::{
    chsh_evaluate, filtered_two_time_distribution, two_time_distribution, TemporalError,
    VIOLATION_MARGIN,
};

/// Loss parameters are searched up to this value; the D -> 1 boundary itself
/// is degenerate (zero success probability) and stays out of the grid.
pub const MAX_SEARCH_LOSS: f64 = 1.0 - 1e-6;

#[derive(Debug, Error)]
pub enum FilterError {
    #[error("parameter out of range: {0}")]
    OutOfRange(String),
    #[error("invalid filter: I - K^dagger K is not PSD (eigenvalue {eigenvalue:e})")]
    NotContractive { eigenvalue: f64 },
    #[error("no feasible point: every grid point left a degenerate conditional distribution")]
    NoFeasiblePoint,
    #[error(transparent)]
    Temporal(#[from] TemporalError),
    #[error(transparent)]
    Quantum(#[from] QuantumError),
    #[error(transparent)]
    Matrix(#[from] CmatrixError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterLabel {
    Pre,
    Post,
    Generic,
}

/// A single-Kraus trace-nonincreasing filter operation.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterSpec {
    kraus: ComplexMatrix,
    label: FilterLabel,
}

impl FilterSpec {
    /// Validated constructor: I - K^dagger K must be PSD within 1e-10.
    pub fn new(kraus: ComplexMatrix, label: FilterLabel) -> Result<Self, FilterError> {
        if kraus.rows() != 2 || kraus.cols() != 2 {
            return Err(FilterError::OutOfRange("filters are 2x2 Kraus operators".into()));
        }
        let gap = ComplexMatrix::identity(2).sub(&kraus.adjoint().matmul(&kraus)?)?;
        let eigs = gap
            .hermitian_eigenvalues()
            .map_err(|e| FilterError::OutOfRange(format!("K^dagger K not Hermitian: {e}")))?;
        if let Some(&min) = eigs.eigenvalues.last() {
            if min < -HERMITICITY_TOL {
                return Err(FilterError::NotContractive { eigenvalue: min });
            }
        }
        Ok(Self { kraus, label })
    }

    pub fn identity() -> Self {
        Self { kraus: ComplexMatrix::identity(2), label: FilterLabel::Generic }
    }

    pub fn kraus(&self) -> &ComplexMatrix {
        &self.kraus
    }

    pub fn label(&self) -> FilterLabel {
        self.label
    }

    /// Entry-wise transpose, as a filter. Moving a filter across the
    /// maximally entangled state transposes its Kraus operator.
    pub fn transposed(&self) -> Self {
        Self { kraus: self.kraus.transpose(), label: self.label }
    }
}

/// The matched loss-D pair: K_pre attenuates |1>, K_post attenuates |0>.
pub fn sppo_pair(d: f64) -> Result<(FilterSpec, FilterSpec), FilterError> {
    if !(0.0..=1.0).contains(&d) {
        return Err(FilterError::OutOfRange(format!("power loss D = {d} not in [0, 1]")));
    }
    let c = num_complex::Complex64::new;
    let s = (1.0 - d).sqrt();
    let pre = ComplexMatrix::from_diagonal(&[c(1.0, 0.0), c(s, 0.0)]);
    let post = ComplexMatrix::from_diagonal(&[c(s, 0.0), c(1.0, 0.0)]);
    Ok((
        FilterSpec { kraus: pre, label: FilterLabel::Pre },
        FilterSpec { kraus: post, label: FilterLabel::Post },
    ))
}

/// Complete a filter to a two-Kraus trace-preserving channel
/// {K, sqrt(I - K^dagger K)}: passing the filter is the successful branch,
/// the complement operator is the failure branch.
pub fn complete_to_channel(f: &FilterSpec) -> KrausChannel {
    let k1 = f.kraus.clone();
    let gap = ComplexMatrix::identity(2)
        .sub(&k1.adjoint().matmul(&k1).expect("2x2"))
        .expect("2x2");
    let k2 = gap.psd_sqrt().expect("FilterSpec guarantees I - K^dagger K is PSD");
    KrausChannel::new(vec![k1, k2], ChannelKind::TracePreserving)
        .expect("completion satisfies the trace-preserving identity")
}

/// A filter that attenuates one basis direction of a rotated frame:
/// K = R diag(1, sqrt(1-loss)) R^dagger with R = Rz(a) Ry(b) Rz(g).
///
/// The loss axis is R applied to z, so the third Euler angle is redundant
/// (it rotates about the axis itself); it is accepted for a uniform 3-angle
/// interface. Zero rotation gives the |1>-attenuating diagonal filter, and
/// b = pi flips the axis onto |0>. Up to a left unitary — irrelevant for
/// any CHSH maximum — this family covers every single-Kraus qubit filter
/// with a unit top singular value.
pub fn generic_filter(loss: f64, basis_rotation: [f64; 3]) -> Result<FilterSpec, FilterError> {
    if !(0.0..=1.0).contains(&loss) {
        return Err(FilterError::OutOfRange(format!("loss = {loss} not in [0, 1]")));
    }
    if basis_rotation.iter().any(|a| !a.is_finite()) {
        return Err(FilterError::OutOfRange("rotation angles must be finite".into()));
    }
    let c = num_complex::Complex64::new;
    let [alpha, beta, gamma] = basis_rotation;
    let rz = |t: f64| {
        ComplexMatrix::from_diagonal(&[
            (c(0.0, -t / 2.0)).exp(),
            (c(0.0, t / 2.0)).exp(),
        ])
    };
    let (cb, sb) = ((beta / 2.0).cos(), (beta / 2.0).sin());
    let ry = ComplexMatrix::from_vec(2, 2, vec![c(cb, 0.0), c(-sb, 0.0), c(sb, 0.0), c(cb, 0.0)])
        .unwrap();
    let r = rz(alpha).matmul(&ry).unwrap().matmul(&rz(gamma)).unwrap();
    let core = ComplexMatrix::from_diagonal(&[c(1.0, 0.0), c((1.0 - loss).sqrt(), 0.0)]);
    let kraus = r.matmul(&core).unwrap().matmul(&r.adjoint()).unwrap();
    Ok(FilterSpec { kraus, label: FilterLabel::Generic })
}

/// Success probabilities N(a|x) of the filtered chain, per heralded t0
/// outcome, plus a uniformity flag (max spread <= 1e-9).
pub fn success_probability(
    ch: &KrausChannel,
    pre: &FilterSpec,
    post: &FilterSpec,
    scen: &MeasurementScenario,
) -> Result<([[f64; 2]; 2], bool), FilterError> {
    let mut table = [[0.0; 2]; 2];
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for x in 0..2 {
        for a in 0..2 {
            let m = scen.t0_observables[x].projector(a);
            let filtered = pre.kraus.matmul(m)?.matmul(&pre.kraus.adjoint())?;
            let evolved = ch
                .apply_matrix(&filtered)
                .map_err(FilterError::Matrix)?;
            let out = post.kraus.matmul(&evolved)?.matmul(&post.kraus.adjoint())?;
            let n = out.trace()?.re;
            table[x][a] = n;
            lo = lo.min(n);
            hi = hi.max(n);
        }
    }
    Ok((table, hi - lo <= 1e-9))
}

// ---------------------------------------------------------------------------
// Activation search
// ---------------------------------------------------------------------------

/// Filter family explored by [`activate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchFamily {
    /// The matched pair `sppo_pair(D)`: one loss knob shared by pre and post,
    /// as realized with equal Brewster-window attenuation.
    EqualLoss,
    /// Independent pre and post losses (D_pre, D_post), diagonal filters.
    SppoGrid,
    /// Independent losses plus a basis rotation per filter.
    GenericGrid,
}

impl SearchFamily {
    pub fn name(&self) -> &'static str {
        match self {
            SearchFamily::EqualLoss => "sppo-matched",
            SearchFamily::SppoGrid => "sppo",
            SearchFamily::GenericGrid => "generic",
        }
    }
}

/// Outcome of a hidden-nonmacrorealism search.
#[derive(Debug, Clone)]
pub struct ActivationResult {
    pub best_pre: FilterSpec,
    pub best_post: FilterSpec,
    pub best_value: f64,
    pub unfiltered_value: f64,
    /// True only when the bare channel obeys the bound and some filter pair
    /// pushes past it: a violation that was hidden, not one already present.
    pub activated: bool,
    pub success_prob_min: f64,
}

impl ActivationResult {
    /// `{"unfiltered": b0, "best": b1, "activated": bool, "pre": ..., "post": ..., "min_success_prob": n}`
    /// with each filter encoded as its row-major [re, im] Kraus entries.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&json!({
            "unfiltered": self.unfiltered_value,
            "best": self.best_value,
            "activated": self.activated,
            "pre": matrix_to_pairs(self.best_pre.kraus()),
            "post": matrix_to_pairs(self.best_post.kraus()),
            "min_success_prob": self.success_prob_min,
        }))
        .expect("serializes")
    }
}

/// Evenly spaced grid over [lo, hi], inclusive.
fn linspace(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    if steps <= 1 {
        return vec![lo];
    }
    (0..steps)
        .map(|i| lo + (hi - lo) * i as f64 / (steps - 1) as f64)
        .collect()
}

/// Coordinate descent with step halving. `eval` returns None for infeasible
/// points (skipped); parameters are clamped to their bounds. Runs for at
/// most `iterations` sweeps, stopping once every step falls below `tol`.
fn refine(
    params: &mut [f64],
    bounds: &[(f64, f64)],
    mut steps: Vec<f64>,
    iterations: usize,
    tol: f64,
    eval: &dyn Fn(&[f64]) -> Option<f64>,
) -> f64 {
    let mut best = eval(params).unwrap_or(f64::NEG_INFINITY);
    for _ in 0..iterations {
        let mut improved = false;
        for i in 0..params.len() {
            for dir in [1.0, -1.0] {
                let mut trial = params.to_vec();
                trial[i] = (trial[i] + dir * steps[i]).clamp(bounds[i].0, bounds[i].1);
                if (trial[i] - params[i]).abs() < 1e-15 {
                    continue;
                }
                if let Some(v) = eval(&trial) {
                    if v > best {
                        best = v;
                        params[i] = trial[i];
                        improved = true;
                    }
                }
            }
        }
        if !improved {
            for s in steps.iter_mut() {
                *s *= 0.5;
            }
            if steps.iter().all(|s| *s < tol) {
                break;
            }
        }
    }
    best
}

struct Candidate {
    params: Vec<f64>,
    value: f64,
}

/// Grid stage shared by the search families: evaluate every grid point, keep
/// the best `keep` distinct ones as refinement starts.
fn grid_stage(
    grids: &[Vec<f64>],
    keep: usize,
    eval: &dyn Fn(&[f64]) -> Option<f64>,
    total_loss: &dyn Fn(&[f64]) -> f64,
) -> Vec<Candidate> {
    let mut top: Vec<Candidate> = Vec::new();
    let mut point = vec![0.0; grids.len()];
    let mut indices = vec![0usize; grids.len()];
    loop {
        for (k, &i) in indices.iter().enumerate() {
            point[k] = grids[k][i];
        }
        if let Some(value) = eval(&point) {
            let cand = Candidate { params: point.clone(), value };
            top.push(cand);
            top.sort_by(|a, b| {
                b.value
                    .partial_cmp(&a.value)
                    .unwrap()
                    .then_with(|| total_loss(&a.params).partial_cmp(&total_loss(&b.params)).unwrap())
            });
            top.truncate(keep);
        }
        // Odometer increment over the grid axes.
        let mut k = 0;
        loop {
            if k == grids.len() {
                return top;
            }
            indices[k] += 1;
            if indices[k] < grids[k].len() {
                break;
            }
            indices[k] = 0;
            k += 1;
        }
    }
}

const REFINE_ITERATIONS: usize = 40;
const REFINE_TOL: f64 = 1e-6;
const TOP_STARTS: usize = 5;

/// Loss grid shared by the search families: `resolution` points on
/// [0, MAX_SEARCH_LOSS].
pub(crate) fn search_loss_grid(resolution: usize) -> Vec<f64> {
    linspace(0.0, MAX_SEARCH_LOSS, resolution.max(2))
}

/// Grid stage plus multistart coordinate-descent refinement over an
/// arbitrary objective. `extra_starts` join the top grid points as
/// refinement seeds (used to embed the optimum of a nested search family,
/// which makes search power monotone across families). Returns the best
/// parameters (None when every grid point was infeasible) and the best value.
pub(crate) fn grid_refine_search(
    grids: &[Vec<f64>],
    bounds: &[(f64, f64)],
    resolution: usize,
    extra_starts: &[Vec<f64>],
    eval: &dyn Fn(&[f64]) -> Option<f64>,
    total_loss: &dyn Fn(&[f64]) -> f64,
) -> (Option<Vec<f64>>, f64) {
    let mut starts = grid_stage(grids, TOP_STARTS, eval, total_loss);
    for p in extra_starts {
        if let Some(value) = eval(p) {
            starts.push(Candidate { params: p.clone(), value });
        }
    }
    if starts.is_empty() {
        return (None, f64::NEG_INFINITY);
    }
    let loss_step = if resolution > 1 { MAX_SEARCH_LOSS / (resolution - 1) as f64 } else { 0.5 };
    // Loss axes (ending at MAX_SEARCH_LOSS) refine at the grid spacing,
    // angle axes at pi/4.
    let steps: Vec<f64> = grids
        .iter()
        .map(|g| {
            if (g.last().copied().unwrap_or(0.0) - MAX_SEARCH_LOSS).abs() < 1e-12 {
                loss_step
            } else {
                std::f64::consts::FRAC_PI_4
            }
        })
        .collect();
    let mut best_params = starts[0].params.clone();
    let mut best_value = starts[0].value;
    for cand in starts {
        let mut params = cand.params.clone();
        let value = refine(&mut params, bounds, steps.clone(), REFINE_ITERATIONS, REFINE_TOL, eval);
        let better = value > best_value + 1e-12
            || ((value - best_value).abs() <= 1e-12 && total_loss(&params) < total_loss(&best_params));
        if better {
            best_value = value;
            best_params = params;
        }
    }
    (Some(best_params), best_value)
}

const ANGLE_THETA_GRID: [f64; 5] = [
    0.0,
    std::f64::consts::FRAC_PI_4,
    std::f64::consts::FRAC_PI_2,
    3.0 * std::f64::consts::FRAC_PI_4,
    std::f64::consts::PI,
];
const ANGLE_PHI_GRID: [f64; 4] = [
    0.0,
    std::f64::consts::FRAC_PI_2,
    std::f64::consts::PI,
    3.0 * std::f64::consts::FRAC_PI_2,
];

fn filters_from_params(family: SearchFamily, p: &[f64]) -> Result<(FilterSpec, FilterSpec), FilterError> {
    match family {
        SearchFamily::EqualLoss => {
            let (pre, post) = sppo_pair(p[0])?;
            Ok((pre, post))
        }
        SearchFamily::SppoGrid => {
            let (pre, _) = sppo_pair(p[0])?;
            let (_, post) = sppo_pair(p[1])?;
            Ok((pre, post))
        }
        SearchFamily::GenericGrid => {
            let pre = generic_filter(p[0], [p[1], p[2], 0.0])?;
            let post = generic_filter(p[3], [p[4], p[5], 0.0])?;
            Ok((pre, post))
        }
    }
}

fn family_total_loss(family: SearchFamily, p: &[f64]) -> f64 {
    match family {
        SearchFamily::EqualLoss => 2.0 * p[0],
        SearchFamily::SppoGrid => p[0] + p[1],
        SearchFamily::GenericGrid => p[0] + p[3],
    }
}

/// Domain of a search family: per-axis grids and refinement bounds.
fn family_domain(family: SearchFamily, resolution: usize) -> (Vec<Vec<f64>>, Vec<(f64, f64)>) {
    let loss_grid = search_loss_grid(resolution);
    let loss_bound = (0.0, MAX_SEARCH_LOSS);
    let angle_bound = (-10.0, 10.0);
    match family {
        SearchFamily::EqualLoss => (vec![loss_grid], vec![loss_bound]),
        SearchFamily::SppoGrid => (vec![loss_grid.clone(), loss_grid], vec![loss_bound; 2]),
        SearchFamily::GenericGrid => (
            vec![
                loss_grid.clone(),
                ANGLE_PHI_GRID.to_vec(),
                ANGLE_THETA_GRID.to_vec(),
                loss_grid,
                ANGLE_PHI_GRID.to_vec(),
                ANGLE_THETA_GRID.to_vec(),
            ],
            vec![loss_bound, angle_bound, angle_bound, loss_bound, angle_bound, angle_bound],
        ),
    }
}

/// Embed the optimum of the next-narrower family as a refinement seed, so
/// that widening the family can never lose ground.
fn nested_start(
    ch: &KrausChannel,
    scen: &MeasurementScenario,
    family: SearchFamily,
    resolution: usize,
) -> Result<Vec<Vec<f64>>, FilterError> {
    let narrower = match family {
        SearchFamily::EqualLoss => return Ok(Vec::new()),
        SearchFamily::SppoGrid => SearchFamily::EqualLoss,
        SearchFamily::GenericGrid => SearchFamily::SppoGrid,
    };
    let (params, _) = search_best_filters(ch, scen, narrower, resolution)?;
    Ok(match params {
        Some(p) => match family {
            SearchFamily::SppoGrid => vec![vec![p[0], p[0]]],
            SearchFamily::GenericGrid => {
                vec![vec![p[0], 0.0, 0.0, p[1], 0.0, std::f64::consts::PI]]
            }
            SearchFamily::EqualLoss => unreachable!(),
        },
        None => Vec::new(),
    })
}

fn search_best_filters(
    ch: &KrausChannel,
    scen: &MeasurementScenario,
    family: SearchFamily,
    resolution: usize,
) -> Result<(Option<Vec<f64>>, f64), FilterError> {
    let (grids, bounds) = family_domain(family, resolution);
    let eval = |p: &[f64]| -> Option<f64> {
        let (pre, post) = filters_from_params(family, p).ok()?;
        match filtered_two_time_distribution(ch, &pre, &post, scen) {
            Ok(stats) => Some(chsh_evaluate(&stats).value),
            Err(_) => None,
        }
    };
    let loss = |p: &[f64]| family_total_loss(family, p);
    let extra = nested_start(ch, scen, family, resolution)?;
    Ok(grid_refine_search(&grids, &bounds, resolution, &extra, &eval, &loss))
}

/// Search for filter parameters that activate a hidden temporal CHSH
/// violation of `ch` on the given scenario.
///
/// Grid stage at `resolution` points per loss axis (plus a coarse rotation
/// grid for the generic family), then coordinate-descent refinement from the
/// best grid points (step halving, 40 sweeps, parameter tolerance 1e-6).
/// Wider families are additionally seeded with the refined optimum of the
/// narrower one, so search power is monotone: matched pair, independent
/// losses, losses plus rotations. Degenerate points are skipped; ties on the
/// best value prefer the smaller total loss, which is the operationally
/// cheaper witness.
pub fn activate(
    ch: &KrausChannel,
    scen: &MeasurementScenario,
    family: SearchFamily,
    resolution: usize,
) -> Result<ActivationResult, FilterError> {
    let unfiltered_value = chsh_evaluate(&two_time_distribution(ch, scen)?).value;

    let (best_params, _) = search_best_filters(ch, scen, family, resolution)?;
    let best_params = best_params.ok_or(FilterError::NoFeasiblePoint)?;
    let (best_pre, best_post) = filters_from_params(family, &best_params)?;
    // Re-evaluate the winner through the statistics pipeline so the reported
    // value is exactly what the returned filters reproduce.
    let best_value =
        chsh_evaluate(&filtered_two_time_distribution(ch, &best_pre, &best_post, scen)?).value;
    let (table, _) = success_probability(ch, &best_pre, &best_post, scen)?;
    let success_prob_min = table.iter().flatten().fold(f64::INFINITY, |m, &v| m.min(v));

    let not_already_violating = unfiltered_value <= 2.0 + VIOLATION_MARGIN;
    let activated = not_already_violating && best_value > 2.0 + VIOLATION_MARGIN;

    Ok(ActivationResult {
        best_pre,
        best_post,
        best_value,
        unfiltered_value,
        activated,
        success_prob_min,
    })
}
