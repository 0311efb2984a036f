//! States, channels, observables and Choi states for qubit dynamics.
//!
//! Conventions used throughout the crate:
//! - computational basis |0>, |1> encodes polarization as |0> = |H>, |1> = |V>;
//!   the Bloch z = +1 pole is |0>,
//! - Choi states are trace-1: rho_CJ = (1 (x) E)|Phi+><Phi+| with
//!   |Phi+> = (1/sqrt d) sum_i |ii>, the channel acting on the second factor,
//! - unnormalized density matrices are first class (post-measurement and
//!   filtered states); the `normalized` flag is explicit.
//!
//! Shipped constructors are qubit-only, but the internals stay d-generic.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cmatrix::{CmatrixError, ComplexMatrix, HERMITICITY_TOL, RECONSTRUCTION_TOL};

#[derive(Debug, Error)]
pub enum QuantumError {
    #[error("parameter out of range: {0}")]
    OutOfRange(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("Bloch vector is not unit length (|n| = {norm})")]
    NotUnitVector { norm: f64 },
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("invalid channel: {0}")]
    InvalidChannel(String),
    #[error("channel document parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    Matrix(#[from] CmatrixError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pauli {
    Identity,
    X,
    Y,
    Z,
}

/// The standard 2x2 Pauli matrix in the {|0>, |1>} basis.
pub fn pauli(which: Pauli) -> ComplexMatrix {
    let c = Complex64::new;
    let data = match which {
        Pauli::Identity => vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)],
        Pauli::X => vec![c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)],
        Pauli::Y => vec![c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)],
        Pauli::Z => vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)],
    };
    ComplexMatrix::from_vec(2, 2, data).unwrap()
}

/// n . sigma for a real 3-vector (not necessarily unit).
pub fn bloch_dot_sigma(n: [f64; 3]) -> ComplexMatrix {
    let x = pauli(Pauli::X).scale_re(n[0]);
    let y = pauli(Pauli::Y).scale_re(n[1]);
    let z = pauli(Pauli::Z).scale_re(n[2]);
    x.add(&y).unwrap().add(&z).unwrap()
}

/// |Phi+><Phi+| for local dimension d, as a (d^2 x d^2) matrix.
pub fn bell_phi_plus(d: usize) -> ComplexMatrix {
    let dim = d * d;
    ComplexMatrix::from_fn(dim, dim, |r, c| {
        let (i1, i2) = (r / d, r % d);
        let (j1, j2) = (c / d, c % d);
        if i1 == i2 && j1 == j2 {
            Complex64::new(1.0 / d as f64, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

// ---------------------------------------------------------------------------
// Density matrices
// ---------------------------------------------------------------------------

/// A positive semidefinite matrix; unit trace when `normalized`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
    normalized: bool,
}

impl DensityMatrix {
    /// Validated constructor: Hermitian within 1e-10, eigenvalues >= -1e-10,
    /// and trace 1 within 1e-9 when `normalized`.
    pub fn new(matrix: ComplexMatrix, normalized: bool) -> Result<Self, QuantumError> {
        let dev = matrix
            .hermiticity_deviation()
            .ok_or_else(|| QuantumError::InvalidState("state matrix must be square".into()))?;
        if dev > HERMITICITY_TOL {
            return Err(QuantumError::InvalidState(format!(
                "state is not Hermitian (deviation {dev:e})"
            )));
        }
        let eigs = matrix.hermitian_eigenvalues()?;
        if let Some(&min) = eigs.eigenvalues.last() {
            if min < -HERMITICITY_TOL {
                return Err(QuantumError::InvalidState(format!(
                    "state has negative eigenvalue {min:e}"
                )));
            }
        }
        if normalized {
            let tr = matrix.trace()?;
            if (tr.re - 1.0).abs() > RECONSTRUCTION_TOL || tr.im.abs() > RECONSTRUCTION_TOL {
                return Err(QuantumError::InvalidState(format!(
                    "normalized state must have unit trace, got {tr}"
                )));
            }
        }
        Ok(Self { matrix, normalized })
    }

    /// Internal constructor for matrices that are PSD by construction
    /// (Kraus conjugations of valid states).
    pub(crate) fn from_valid(matrix: ComplexMatrix, normalized: bool) -> Self {
        debug_assert!(matrix.is_hermitian(1e-8));
        Self { matrix, normalized }
    }

    /// Pure state |psi><psi| from a (not necessarily normalized) ket.
    pub fn pure(amplitudes: &[Complex64]) -> Result<Self, QuantumError> {
        let norm_sq: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if norm_sq <= 0.0 {
            return Err(QuantumError::InvalidState("zero ket".into()));
        }
        let d = amplitudes.len();
        let m = ComplexMatrix::from_fn(d, d, |i, j| {
            amplitudes[i] * amplitudes[j].conj() / norm_sq
        });
        Ok(Self { matrix: m, normalized: true })
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().expect("density matrix is square").re
    }

    /// Rescale to unit trace.
    pub fn normalize(&self) -> Result<Self, QuantumError> {
        let tr = self.trace();
        if tr <= 1e-300 {
            return Err(QuantumError::InvalidState("cannot normalize a zero-trace state".into()));
        }
        Ok(Self { matrix: self.matrix.scale_re(1.0 / tr), normalized: true })
    }

    pub fn purity(&self) -> f64 {
        self.matrix
            .matmul(&self.matrix)
            .expect("square")
            .trace()
            .expect("square")
            .re
    }
}

/// I_d / d.
pub fn maximally_mixed(d: usize) -> DensityMatrix {
    DensityMatrix::from_valid(ComplexMatrix::identity(d).scale_re(1.0 / d as f64), true)
}

// ---------------------------------------------------------------------------
// Observables and measurement scenarios
// ---------------------------------------------------------------------------

/// A +-1-valued observable with its eigenprojectors.
#[derive(Debug, Clone, PartialEq)]
pub struct DichotomicObservable {
    observable: ComplexMatrix,
    projector_plus: ComplexMatrix,
    projector_minus: ComplexMatrix,
}

impl DichotomicObservable {
    /// Validated constructor: projectors must be idempotent, sum to the
    /// identity, and reproduce the observable as P+ - P-, all within 1e-10.
    pub fn new(
        observable: ComplexMatrix,
        projector_plus: ComplexMatrix,
        projector_minus: ComplexMatrix,
    ) -> Result<Self, QuantumError> {
        let d = observable.rows();
        let id = ComplexMatrix::identity(d);
        let completeness = projector_plus.add(&projector_minus)?;
        if completeness.frobenius_distance(&id) > HERMITICITY_TOL {
            return Err(QuantumError::InvalidState("projectors do not sum to identity".into()));
        }
        let diff = projector_plus.sub(&projector_minus)?;
        if diff.frobenius_distance(&observable) > HERMITICITY_TOL {
            return Err(QuantumError::InvalidState("observable != P+ - P-".into()));
        }
        for p in [&projector_plus, &projector_minus] {
            let sq = p.matmul(p)?;
            if sq.frobenius_distance(p) > HERMITICITY_TOL {
                return Err(QuantumError::InvalidState("projector is not idempotent".into()));
            }
        }
        Ok(Self { observable, projector_plus, projector_minus })
    }

    pub fn observable(&self) -> &ComplexMatrix {
        &self.observable
    }

    /// Projector for outcome +1 (index 0) or -1 (index 1).
    pub fn projector(&self, outcome: usize) -> &ComplexMatrix {
        if outcome == 0 { &self.projector_plus } else { &self.projector_minus }
    }

    pub fn projector_plus(&self) -> &ComplexMatrix {
        &self.projector_plus
    }

    pub fn projector_minus(&self) -> &ComplexMatrix {
        &self.projector_minus
    }

    /// Entry-wise transpose of the observable and both projectors.
    ///
    /// This is what a measurement "moves to" across the maximally entangled
    /// state: (1 (x) X)|Phi+> = (X^T (x) 1)|Phi+>.
    pub fn transposed(&self) -> Self {
        Self {
            observable: self.observable.transpose(),
            projector_plus: self.projector_plus.transpose(),
            projector_minus: self.projector_minus.transpose(),
        }
    }

}

/// Observable n . sigma with projectors (I +- n . sigma)/2.
pub fn observable_from_bloch(n: [f64; 3]) -> Result<DichotomicObservable, QuantumError> {
    let norm = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(QuantumError::NotUnitVector { norm });
    }
    let obs = bloch_dot_sigma(n);
    let id = ComplexMatrix::identity(2);
    let plus = id.add(&obs).unwrap().scale_re(0.5);
    let minus = id.sub(&obs).unwrap().scale_re(0.5);
    Ok(DichotomicObservable { observable: obs, projector_plus: plus, projector_minus: minus })
}

/// Two dichotomic observables per time slot: settings x in {1,2} at t0 and
/// y in {1,2} at t1 (stored 0-indexed).
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementScenario {
    pub t0_observables: [DichotomicObservable; 2],
    pub t1_observables: [DichotomicObservable; 2],
}

impl MeasurementScenario {
    /// The working scenario of the photonic test: {sigma_x, sigma_y} at t0 and
    /// {(sigma_x + sigma_y)/sqrt 2, (sigma_x - sigma_y)/sqrt 2} at t1.
    pub fn canonical() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Self {
            t0_observables: [
                observable_from_bloch([1.0, 0.0, 0.0]).unwrap(),
                observable_from_bloch([0.0, 1.0, 0.0]).unwrap(),
            ],
            t1_observables: [
                observable_from_bloch([s, s, 0.0]).unwrap(),
                observable_from_bloch([s, -s, 0.0]).unwrap(),
            ],
        }
    }

    /// Scenario from Bloch directions, two per time slot.
    pub fn from_bloch(t0: [[f64; 3]; 2], t1: [[f64; 3]; 2]) -> Result<Self, QuantumError> {
        Ok(Self {
            t0_observables: [observable_from_bloch(t0[0])?, observable_from_bloch(t0[1])?],
            t1_observables: [observable_from_bloch(t1[0])?, observable_from_bloch(t1[1])?],
        })
    }
}

// ---------------------------------------------------------------------------
// Kraus channels
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChannelKind {
    /// sum K_i^dagger K_i = I
    TracePreserving,
    /// I - sum K_i^dagger K_i is PSD
    TraceNonincreasing,
}

/// A completely positive map as a list of Kraus operators.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausChannel {
    kraus_ops: Vec<ComplexMatrix>,
    kind: ChannelKind,
}

impl KrausChannel {
    /// Validated constructor. Checks the completeness sum against the claimed
    /// kind: equality with I within 1e-9 for trace-preserving maps, I - sum
    /// PSD within 1e-10 for trace-nonincreasing ones.
    pub fn new(kraus_ops: Vec<ComplexMatrix>, kind: ChannelKind) -> Result<Self, QuantumError> {
        if kraus_ops.is_empty() {
            return Err(QuantumError::InvalidChannel("empty Kraus list".into()));
        }
        let d_in = kraus_ops[0].cols();
        let d_out = kraus_ops[0].rows();
        for k in &kraus_ops {
            if k.cols() != d_in || k.rows() != d_out {
                return Err(QuantumError::InvalidChannel("Kraus operators have mixed shapes".into()));
            }
        }
        let mut sum = ComplexMatrix::zeros(d_in, d_in);
        for k in &kraus_ops {
            sum = sum.add(&k.adjoint().matmul(k)?)?;
        }
        let id = ComplexMatrix::identity(d_in);
        match kind {
            ChannelKind::TracePreserving => {
                let dist = sum.frobenius_distance(&id);
                if dist > RECONSTRUCTION_TOL {
                    return Err(QuantumError::InvalidChannel(format!(
                        "sum K^dagger K deviates from identity by {dist:e}"
                    )));
                }
            }
            ChannelKind::TraceNonincreasing => {
                let gap = id.sub(&sum)?;
                let eigs = gap.hermitian_eigenvalues().map_err(|e| {
                    QuantumError::InvalidChannel(format!("completeness gap not Hermitian: {e}"))
                })?;
                if let Some(&min) = eigs.eigenvalues.last() {
                    if min < -HERMITICITY_TOL {
                        return Err(QuantumError::InvalidChannel(format!(
                            "I - sum K^dagger K has negative eigenvalue {min:e}"
                        )));
                    }
                }
            }
        }
        Ok(Self { kraus_ops, kind })
    }

    pub fn kraus_ops(&self) -> &[ComplexMatrix] {
        &self.kraus_ops
    }

    pub fn kind(&self) -> ChannelKind {
        self.kind
    }

    pub fn is_trace_preserving(&self) -> bool {
        self.kind == ChannelKind::TracePreserving
    }

    pub fn input_dim(&self) -> usize {
        self.kraus_ops[0].cols()
    }

    pub fn output_dim(&self) -> usize {
        self.kraus_ops[0].rows()
    }

    /// sum_i K_i M K_i^dagger on a raw matrix.
    pub(crate) fn apply_matrix(&self, m: &ComplexMatrix) -> Result<ComplexMatrix, CmatrixError> {
        let mut out = ComplexMatrix::zeros(self.output_dim(), self.output_dim());
        for k in &self.kraus_ops {
            out = out.add(&k.matmul(m)?.matmul(&k.adjoint())?)?;
        }
        Ok(out)
    }

    /// Channel action sum_i K_i rho K_i^dagger. The output is unnormalized
    /// when the channel is trace-nonincreasing.
    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix, QuantumError> {
        if rho.dim() != self.input_dim() {
            return Err(QuantumError::DimensionMismatch(format!(
                "channel acts on dimension {}, state has {}",
                self.input_dim(),
                rho.dim()
            )));
        }
        let out = self.apply_matrix(rho.matrix())?;
        let normalized = rho.is_normalized() && self.is_trace_preserving();
        Ok(DensityMatrix::from_valid(out, normalized))
    }

    /// Composition `outer after inner` with Kraus list {K_o K_i}.
    pub fn compose(outer: &KrausChannel, inner: &KrausChannel) -> Result<KrausChannel, QuantumError> {
        if outer.input_dim() != inner.output_dim() {
            return Err(QuantumError::DimensionMismatch(format!(
                "cannot compose: outer input {} vs inner output {}",
                outer.input_dim(),
                inner.output_dim()
            )));
        }
        let mut ops = Vec::with_capacity(outer.kraus_ops.len() * inner.kraus_ops.len());
        for ko in &outer.kraus_ops {
            for ki in &inner.kraus_ops {
                ops.push(ko.matmul(ki)?);
            }
        }
        let kind = if outer.is_trace_preserving() && inner.is_trace_preserving() {
            ChannelKind::TracePreserving
        } else {
            ChannelKind::TraceNonincreasing
        };
        KrausChannel::new(ops, kind)
    }

    /// The identity channel on dimension d.
    pub fn identity(d: usize) -> KrausChannel {
        KrausChannel { kraus_ops: vec![ComplexMatrix::identity(d)], kind: ChannelKind::TracePreserving }
    }

    /// Choi state (1 (x) E)|Phi+><Phi+|, channel on the second factor.
    pub fn choi(&self) -> Result<ChoiState, QuantumError> {
        let d = self.input_dim();
        if self.output_dim() != d {
            return Err(QuantumError::DimensionMismatch(
                "Choi state needs a square (d_out = d_in) channel".into(),
            ));
        }
        let phi = bell_phi_plus(d);
        let id = ComplexMatrix::identity(d);
        let mut out = ComplexMatrix::zeros(d * d, d * d);
        for k in &self.kraus_ops {
            let lifted = id.kron(k);
            out = out.add(&lifted.matmul(&phi)?.matmul(&lifted.adjoint())?)?;
        }
        let normalized = self.is_trace_preserving();
        ChoiState::new(DensityMatrix::from_valid(out, normalized), d, self.is_trace_preserving())
    }
}

/// Amplitude damping with visibility v: E1 = |0><0| + sqrt(1-v)|1><1|,
/// E2 = sqrt(v)|0><1|.
pub fn amplitude_damping(v: f64) -> Result<KrausChannel, QuantumError> {
    if !(0.0..=1.0).contains(&v) {
        return Err(QuantumError::OutOfRange(format!("visibility v = {v} not in [0, 1]")));
    }
    let c = Complex64::new;
    let e1 = ComplexMatrix::from_diagonal(&[c(1.0, 0.0), c((1.0 - v).sqrt(), 0.0)]);
    let mut e2 = ComplexMatrix::zeros(2, 2);
    e2.set(0, 1, c(v.sqrt(), 0.0));
    KrausChannel::new(vec![e1, e2], ChannelKind::TracePreserving)
}

/// The Sagnac-interferometer realization of amplitude damping: a half-wave
/// plate at fast-axis angle theta converts the |V> component with probability
/// sin^2(2 theta), and the phase-compensating plate in the other arm fixes the
/// sign of the retained amplitude. The recombined map equals amplitude
/// damping with v = sin^2(2 theta).
pub fn hwp_interferometer_channel(theta: f64) -> Result<KrausChannel, QuantumError> {
    if !(0.0..=std::f64::consts::FRAC_PI_2).contains(&theta) {
        return Err(QuantumError::OutOfRange(format!(
            "waveplate angle theta = {theta} not in [0, pi/2]"
        )));
    }
    let c = Complex64::new;
    let keep = (2.0 * theta).cos().abs();
    let jump = (2.0 * theta).sin();
    let e1 = ComplexMatrix::from_diagonal(&[c(1.0, 0.0), c(keep, 0.0)]);
    let mut e2 = ComplexMatrix::zeros(2, 2);
    e2.set(0, 1, c(jump, 0.0));
    KrausChannel::new(vec![e1, e2], ChannelKind::TracePreserving)
}

// ---------------------------------------------------------------------------
// Choi states
// ---------------------------------------------------------------------------

/// The state (1 (x) E)|Phi+><Phi+| encoding a channel; d^2 x d^2.
#[derive(Debug, Clone, PartialEq)]
pub struct ChoiState {
    state: DensityMatrix,
    input_dim: usize,
}

impl ChoiState {
    fn new(state: DensityMatrix, input_dim: usize, trace_preserving: bool) -> Result<Self, QuantumError> {
        if state.dim() != input_dim * input_dim {
            return Err(QuantumError::DimensionMismatch(format!(
                "Choi state of a dimension-{input_dim} channel must be {0}x{0}",
                input_dim * input_dim
            )));
        }
        if trace_preserving {
            // Tracing out the output (second) factor must leave I/d.
            let reduced = state.matrix().partial_trace(1, (input_dim, input_dim))?;
            let target = ComplexMatrix::identity(input_dim).scale_re(1.0 / input_dim as f64);
            let dist = reduced.frobenius_distance(&target);
            if dist > RECONSTRUCTION_TOL {
                return Err(QuantumError::InvalidChannel(format!(
                    "Choi marginal deviates from I/d by {dist:e}"
                )));
            }
        }
        Ok(Self { state, input_dim })
    }

    pub fn state(&self) -> &DensityMatrix {
        &self.state
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    /// Channel action recovered from the Choi state:
    /// E(X) = d * Tr_in[(X^T (x) 1) rho_CJ].
    pub fn apply(&self, x: &ComplexMatrix) -> Result<ComplexMatrix, QuantumError> {
        let d = self.input_dim;
        if x.rows() != d || x.cols() != d {
            return Err(QuantumError::DimensionMismatch(format!(
                "operator must be {d}x{d} to contract with this Choi state"
            )));
        }
        let lifted = x.transpose().kron(&ComplexMatrix::identity(d));
        let prod = lifted.matmul(self.state.matrix())?;
        Ok(prod.partial_trace(0, (d, d))?.scale_re(d as f64))
    }
}

// ---------------------------------------------------------------------------
// Channel serialization
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct ChannelDoc {
    dim: usize,
    kind: String,
    kraus: Vec<Vec<[f64; 2]>>,
}

impl KrausChannel {
    /// Serialize to the interchange document
    /// `{"dim": d, "kind": "tp"|"tni", "kraus": [[[re,im],...],...]}`,
    /// row-major, one list per Kraus operator.
    pub fn to_json(&self) -> String {
        let doc = ChannelDoc {
            dim: self.input_dim(),
            kind: match self.kind {
                ChannelKind::TracePreserving => "tp".into(),
                ChannelKind::TraceNonincreasing => "tni".into(),
            },
            kraus: self
                .kraus_ops
                .iter()
                .map(|k| k.entries().iter().map(|c| [c.re, c.im]).collect())
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("channel document serializes")
    }

    /// Parse and validate a channel document.
    pub fn from_json(text: &str) -> Result<KrausChannel, QuantumError> {
        let doc: ChannelDoc = serde_json::from_str(text)?;
        let kind = match doc.kind.as_str() {
            "tp" => ChannelKind::TracePreserving,
            "tni" => ChannelKind::TraceNonincreasing,
            other => {
                return Err(QuantumError::InvalidChannel(format!(
                    "unknown channel kind {other:?} (expected \"tp\" or \"tni\")"
                )))
            }
        };
        if doc.dim == 0 {
            return Err(QuantumError::InvalidChannel("dim must be >= 1".into()));
        }
        let mut ops = Vec::with_capacity(doc.kraus.len());
        for entries in &doc.kraus {
            if entries.len() != doc.dim * doc.dim {
                return Err(QuantumError::InvalidChannel(format!(
                    "Kraus operator has {} entries, expected {}",
                    entries.len(),
                    doc.dim * doc.dim
                )));
            }
            let data = entries.iter().map(|&[re, im]| Complex64::new(re, im)).collect();
            ops.push(ComplexMatrix::from_vec(doc.dim, doc.dim, data)?);
        }
        KrausChannel::new(ops, kind)
    }
}

/// Flat row-major [re, im] encoding of one operator, as used inside the
/// channel document and for filter witnesses.
pub fn matrix_to_pairs(m: &ComplexMatrix) -> Vec<[f64; 2]> {
    m.entries().iter().map(|c| [c.re, c.im]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn pauli_matrices() {
        assert_eq!(pauli(Pauli::Z).get(0, 0), c(1.0, 0.0));
        assert_eq!(pauli(Pauli::Z).get(1, 1), c(-1.0, 0.0));
        assert_eq!(pauli(Pauli::X).get(0, 1), c(1.0, 0.0));
        assert_eq!(pauli(Pauli::X).get(1, 0), c(1.0, 0.0));
        assert_eq!(pauli(Pauli::Y).get(0, 1), c(0.0, -1.0));
        assert_eq!(pauli(Pauli::Y).get(1, 0), c(0.0, 1.0));
    }

    #[test]
    fn bloch_observables() {
        let x = observable_from_bloch([1.0, 0.0, 0.0]).unwrap();
        assert!(x.observable().frobenius_distance(&pauli(Pauli::X)) < 1e-15);
        // Projectors |+-><+-|.
        let plus = DensityMatrix::pure(&[c(1.0, 0.0), c(1.0, 0.0)]).unwrap();
        assert!(x.projector_plus().frobenius_distance(plus.matrix()) < 1e-15);

        let s = std::f64::consts::FRAC_1_SQRT_2;
        let diag = observable_from_bloch([s, s, 0.0]).unwrap();
        let expected = pauli(Pauli::X).add(&pauli(Pauli::Y)).unwrap().scale_re(s);
        assert!(diag.observable().frobenius_distance(&expected) < 1e-15);

        // Any unit Bloch vector yields eigenvalues {+1, -1}.
        let n = [0.36, -0.48, 0.8];
        let obs = observable_from_bloch(n).unwrap();
        let eigs = obs.observable().hermitian_eigenvalues().unwrap().eigenvalues;
        assert!((eigs[0] - 1.0).abs() < 1e-12 && (eigs[1] + 1.0).abs() < 1e-12);

        assert!(matches!(
            observable_from_bloch([1.0, 1.0, 0.0]),
            Err(QuantumError::NotUnitVector { .. })
        ));
    }

    #[test]
    fn observable_constructor_validates_projectors() {
        let z = pauli(Pauli::Z);
        let id = ComplexMatrix::identity(2);
        let p_plus = id.add(&z).unwrap().scale_re(0.5);
        let p_minus = id.sub(&z).unwrap().scale_re(0.5);
        assert!(DichotomicObservable::new(z.clone(), p_plus.clone(), p_minus.clone()).is_ok());
        // Swapped projectors no longer reproduce the observable.
        assert!(DichotomicObservable::new(z.clone(), p_minus.clone(), p_plus.clone()).is_err());
        // A non-idempotent "projector" is rejected.
        assert!(DichotomicObservable::new(z, p_plus.scale_re(0.9), p_minus).is_err());
    }

    #[test]
    fn amplitude_damping_edge_cases() {
        let idc = amplitude_damping(0.0).unwrap();
        let plus = DensityMatrix::pure(&[c(1.0, 0.0), c(1.0, 0.0)]).unwrap();
        assert!(idc.apply(&plus).unwrap().matrix().frobenius_distance(plus.matrix()) < 1e-15);

        let full = amplitude_damping(1.0).unwrap();
        let one = DensityMatrix::pure(&[c(0.0, 0.0), c(1.0, 0.0)]).unwrap();
        let zero = DensityMatrix::pure(&[c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
        assert!(full.apply(&one).unwrap().matrix().frobenius_distance(zero.matrix()) < 1e-15);

        assert!(amplitude_damping(-0.1).is_err());
        assert!(amplitude_damping(1.1).is_err());
    }

    #[test]
    fn amplitude_damping_on_plus_state() {
        // Hand-applied Kraus action at v = 0.5 on |+><+|.
        let ch = amplitude_damping(0.5).unwrap();
        let plus = DensityMatrix::pure(&[c(1.0, 0.0), c(1.0, 0.0)]).unwrap();
        let out = ch.apply(&plus).unwrap();
        let off = 0.5_f64.sqrt() / 2.0;
        let expected = ComplexMatrix::from_vec(
            2,
            2,
            vec![c(0.75, 0.0), c(off, 0.0), c(off, 0.0), c(0.25, 0.0)],
        )
        .unwrap();
        assert!(out.matrix().frobenius_distance(&expected) < 1e-14);
    }

    #[test]
    fn compose_damping_multiplies_decay() {
        // Two dampings compose to one with 1 - (1-v1)(1-v2).
        let v1 = 0.3;
        let v2 = 0.45;
        let composed = KrausChannel::compose(
            &amplitude_damping(v1).unwrap(),
            &amplitude_damping(v2).unwrap(),
        )
        .unwrap();
        assert!(composed.is_trace_preserving());
        let direct = amplitude_damping(1.0 - (1.0 - v1) * (1.0 - v2)).unwrap();
        for ket in [
            vec![c(1.0, 0.0), c(0.0, 0.0)],
            vec![c(0.0, 0.0), c(1.0, 0.0)],
            vec![c(1.0, 0.0), c(1.0, 0.0)],
            vec![c(1.0, 0.0), c(0.0, 1.0)],
        ] {
            let rho = DensityMatrix::pure(&ket).unwrap();
            let a = composed.apply(&rho).unwrap();
            let b = direct.apply(&rho).unwrap();
            assert!(a.matrix().frobenius_distance(b.matrix()) < 1e-12);
        }

        // Identity composed with anything acts identically.
        let ch = amplitude_damping(0.7).unwrap();
        let with_id = KrausChannel::compose(&KrausChannel::identity(2), &ch).unwrap();
        let probe = DensityMatrix::pure(&[c(0.6, 0.0), c(0.0, 0.8)]).unwrap();
        assert!(with_id
            .apply(&probe)
            .unwrap()
            .matrix()
            .frobenius_distance(ch.apply(&probe).unwrap().matrix())
            < 1e-12);
    }

    #[test]
    fn hwp_channel_matches_damping() {
        assert!(hwp_interferometer_channel(-0.1).is_err());
        assert!(hwp_interferometer_channel(2.0).is_err());

        // theta = 0 is the identity, theta = pi/4 the full decay.
        let probes: Vec<DensityMatrix> = vec![
            DensityMatrix::pure(&[c(1.0, 0.0), c(0.0, 0.0)]).unwrap(),
            DensityMatrix::pure(&[c(0.0, 0.0), c(1.0, 0.0)]).unwrap(),
            DensityMatrix::pure(&[c(1.0, 0.0), c(1.0, 0.0)]).unwrap(),
            DensityMatrix::pure(&[c(1.0, 0.0), c(0.0, 1.0)]).unwrap(),
        ];
        for theta in [0.0, std::f64::consts::FRAC_PI_8, std::f64::consts::FRAC_PI_4, 1.1] {
            let hwp = hwp_interferometer_channel(theta).unwrap();
            let v = (2.0 * theta).sin().powi(2);
            let ad = amplitude_damping(v).unwrap();
            for rho in &probes {
                let a = hwp.apply(rho).unwrap();
                let b = ad.apply(rho).unwrap();
                assert!(a.matrix().frobenius_distance(b.matrix()) < 1e-10);
            }
        }

        // Term-by-term damped mixture at alpha = beta = 1/sqrt 2, theta = pi/8:
        // populations (3/4, 1/4) and coherence cos(2 theta)/2.
        let theta = std::f64::consts::FRAC_PI_8;
        let hwp = hwp_interferometer_channel(theta).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let rho = DensityMatrix::pure(&[c(s, 0.0), c(s, 0.0)]).unwrap();
        let out = hwp.apply(&rho).unwrap();
        let coh = (2.0 * theta).cos() / 2.0;
        assert!((out.matrix().get(0, 0).re - 0.75).abs() < 1e-12);
        assert!((out.matrix().get(1, 1).re - 0.25).abs() < 1e-12);
        assert!((out.matrix().get(0, 1).re - coh).abs() < 1e-12);
    }

    #[test]
    fn choi_states() {
        let idc = KrausChannel::identity(2);
        let choi = idc.choi().unwrap();
        assert!(choi.state().matrix().frobenius_distance(&bell_phi_plus(2)) < 1e-14);

        // Full damping sends everything to |0><0| on the output side.
        let full = amplitude_damping(1.0).unwrap().choi().unwrap();
        let mut expected = ComplexMatrix::zeros(4, 4);
        expected.set(0, 0, c(0.5, 0.0));
        expected.set(2, 2, c(0.5, 0.0));
        assert!(full.state().matrix().frobenius_distance(&expected) < 1e-14);

        // <00|rho_CJ|11> = sqrt(1-v)/2.
        let v = 0.37;
        let choi = amplitude_damping(v).unwrap().choi().unwrap();
        let entry = choi.state().matrix().get(0, 3);
        assert!((entry.re - (1.0 - v).sqrt() / 2.0).abs() < 1e-14);
        assert!(entry.im.abs() < 1e-14);
    }

    #[test]
    fn choi_contraction_reproduces_channel() {
        let ch = amplitude_damping(0.42).unwrap();
        let choi = ch.choi().unwrap();
        let probe = ComplexMatrix::from_vec(
            2,
            2,
            vec![c(0.3, 0.0), c(0.2, 0.4), c(0.2, -0.4), c(0.7, 0.0)],
        )
        .unwrap();
        let via_choi = choi.apply(&probe).unwrap();
        let via_kraus = ch.apply_matrix(&probe).unwrap();
        assert!(via_choi.frobenius_distance(&via_kraus) < 1e-12);
    }

    #[test]
    fn maximally_mixed_state() {
        let rho = maximally_mixed(2);
        assert!((rho.trace() - 1.0).abs() < 1e-15);
        assert!((rho.matrix().get(0, 0).re - 0.5).abs() < 1e-15);
        assert!((rho.purity() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn channel_json_round_trip_and_validation() {
        let ch = amplitude_damping(0.6).unwrap();
        let text = ch.to_json();
        let parsed = KrausChannel::from_json(&text).unwrap();
        assert!(parsed.is_trace_preserving());
        for (a, b) in ch.kraus_ops().iter().zip(parsed.kraus_ops()) {
            assert!(a.frobenius_distance(b) < 1e-15);
        }

        assert!(KrausChannel::from_json("{not json").is_err());

        // Non-CPTP content must be rejected.
        let bad = r#"{"dim": 2, "kind": "tp", "kraus": [[[1.0,0.0],[0.0,0.0],[0.0,0.0],[0.5,0.0]]]}"#;
        assert!(matches!(KrausChannel::from_json(bad), Err(QuantumError::InvalidChannel(_))));

        // The same operator is a valid trace-nonincreasing map.
        let tni = r#"{"dim": 2, "kind": "tni", "kraus": [[[1.0,0.0],[0.0,0.0],[0.0,0.0],[0.5,0.0]]]}"#;
        let parsed = KrausChannel::from_json(tni).unwrap();
        assert_eq!(parsed.kind(), ChannelKind::TraceNonincreasing);

        // An expanding operator is not, even under the weaker kind.
        let expanding = r#"{"dim": 2, "kind": "tni", "kraus": [[[1.5,0.0],[0.0,0.0],[0.0,0.0],[1.0,0.0]]]}"#;
        assert!(matches!(KrausChannel::from_json(expanding), Err(QuantumError::InvalidChannel(_))));
    }

    #[test]
    fn channel_apply_rejects_wrong_dimension() {
        let ch = amplitude_damping(0.5).unwrap();
        let rho4 = maximally_mixed(4);
        assert!(matches!(ch.apply(&rho4), Err(QuantumError::DimensionMismatch(_))));
    }

    #[test]
    fn channel_apply_is_linear() {
        let ch = amplitude_damping(0.35).unwrap();
        let rho1 = DensityMatrix::pure(&[c(1.0, 0.0), c(1.0, 0.0)]).unwrap();
        let rho2 = DensityMatrix::pure(&[c(1.0, 0.0), c(0.0, -1.0)]).unwrap();
        let p = 0.3;
        let mix = DensityMatrix::from_valid(
            rho1.matrix().scale_re(p).add(&rho2.matrix().scale_re(1.0 - p)).unwrap(),
            true,
        );
        let lhs = ch.apply(&mix).unwrap();
        let rhs = ch
            .apply(&rho1)
            .unwrap()
            .matrix()
            .scale_re(p)
            .add(&ch.apply(&rho2).unwrap().matrix().scale_re(1.0 - p))
            .unwrap();
        assert!(lhs.matrix().frobenius_distance(&rhs) < 1e-13);
    }
}
