//! Sampling of the coupled 3x3 model and extraction of spacing ratios.
//!
//! The matrix couples a 2x2 Gaussian block (basis states 1 and 2) to a third,
//! localized basis state. Variances follow `Sigma = diag(1, 1, k / sqrt(2 - k^2))`
//! inside the weight `exp(-beta/2 tr Sigma^-2 H^2)`-style ensemble.
//!
//! Every draw `i` of a run uses ChaCha8 stream `i` of the run seed, so the
//! output does not depend on how draws are split across workers.

mod jacobi;

use alloc::string::String;
use alloc::vec::Vec;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Draws whose lower spacing is below this fraction of the spectral range are
/// rejected.
pub const DEGENERACY_THRESHOLD: f64 = 1e-12;
/// Entropies closer than this are treated as equal when picking the localized
/// eigenvector.
pub const ENTROPY_TIE: f64 = 1e-12;
/// Tolerance on `||v|| = 1` accepted by [`shannon_entropy`].
pub const UNIT_NORM_TOL: f64 = 1e-9;
/// Consecutive degenerate redraws within one substream before giving up.
const MAX_REDRAWS: u32 = 64;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EnsembleError {
    #[error("coupling k = {0} outside the sampler domain 0 <= k^2 < 2")]
    CouplingDomain(f64),
    #[error("vector norm {0} is not 1")]
    NotUnit(f64),
    #[error("degenerate eigenvalues: lower spacing {lower} vs range {range}")]
    Degenerate { lower: f64, range: f64 },
    #[error("requested an empty sample")]
    EmptyRequest,
    #[error("draw {index} stayed degenerate after {MAX_REDRAWS} redraws")]
    RedrawLimit { index: u64 },
}

/// Dyson symmetry class of the ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum SymmetryClass {
    /// Real symmetric matrices, `beta = 1`.
    Orthogonal,
    /// Complex Hermitian matrices, `beta = 2`.
    Unitary,
}

impl SymmetryClass {
    pub fn beta(self) -> u8 {
        match self {
            Self::Orthogonal => 1,
            Self::Unitary => 2,
        }
    }

    pub fn from_beta(beta: u8) -> Option<Self> {
        match beta {
            1 => Some(Self::Orthogonal),
            2 => Some(Self::Unitary),
            _ => None,
        }
    }
}

/// The coupling strength `k` between the localized state and the generic pair.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Coupling {
    k: f64,
}

impl Coupling {
    /// Accepts `0 <= k` with `k^2 < 2`, the full range of the sampler.
    pub fn new(k: f64) -> Result<Self, EnsembleError> {
        if !(k.is_finite() && k >= 0.0 && k * k < 2.0) {
            return Err(EnsembleError::CouplingDomain(k));
        }
        Ok(Self { k })
    }

    #[inline]
    pub fn k(self) -> f64 {
        self.k
    }

    /// `k^2 / (2 - k^2)`, the squared third entry of `Sigma`.
    #[inline]
    pub fn localized_variance_ratio(self) -> f64 {
        self.k * self.k / (2.0 - self.k * self.k)
    }

    /// Whether the analytic densities cover this coupling (`k <= 1`).
    #[inline]
    pub fn in_analytic_domain(self) -> bool {
        self.k <= 1.0
    }

    fn standard_deviations(self, class: SymmetryClass) -> Deviations {
        let k = self.k;
        let loc = libm::sqrt(self.localized_variance_ratio());
        match class {
            SymmetryClass::Orthogonal => Deviations {
                diag: 1.0,
                pair: core::f64::consts::FRAC_1_SQRT_2,
                coupling: k * core::f64::consts::FRAC_1_SQRT_2,
                localized: loc,
            },
            SymmetryClass::Unitary => Deviations {
                diag: core::f64::consts::FRAC_1_SQRT_2,
                pair: 0.5,
                coupling: 0.5 * k,
                localized: loc * core::f64::consts::FRAC_1_SQRT_2,
            },
        }
    }
}

/// Standard deviations of `H11 = H22`, each real component of `H12`, of
/// `H13 = H23`, and of `H33`.
struct Deviations {
    diag: f64,
    pair: f64,
    coupling: f64,
    localized: f64,
}

/// A sampled 3x3 self-adjoint matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum Matrix3 {
    Real([[f64; 3]; 3]),
    Complex([[Complex64; 3]; 3]),
}

impl Matrix3 {
    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        match self {
            Self::Real(a) => Complex64::new(a[i][j], 0.0),
            Self::Complex(a) => a[i][j],
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                s += self.entry(i, j).norm_sqr();
            }
        }
        libm::sqrt(s)
    }

    /// `H = H^dagger` with real diagonal, to absolute tolerance `tol`.
    pub fn is_self_adjoint(&self, tol: f64) -> bool {
        (0..3).all(|i| {
            self.entry(i, i).im.abs() <= tol
                && (0..3).all(|j| (self.entry(i, j) - self.entry(j, i).conj()).norm() <= tol)
        })
    }
}

/// Eigen-decomposition of a sampled matrix.
///
/// `values` are ascending. The middle value is what the derivation of the
/// densities calls `lambda_3`; `values[0]` and `values[2]` are its
/// `lambda_1` and `lambda_2`. `vectors[i]` is the unit eigenvector of
/// `values[i]`, with `entropy[i]` its information entropy.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenTriple {
    pub values: [f64; 3],
    pub vectors: [[Complex64; 3]; 3],
    pub entropy: [f64; 3],
    pub localized_index: usize,
}

impl EigenTriple {
    /// `|<e_j|v_i>|^2` for basis state `j` (0-based).
    pub fn overlap(&self, i: usize, j: usize) -> f64 {
        self.vectors[i][j].norm_sqr()
    }
}

/// Where a [`RatioSample`] came from.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum RatioSource {
    /// Drawn from the model at coupling `k`.
    Ensemble { k: f64 },
    /// Extracted from a level sequence.
    Spectrum {
        label: String,
        mode: crate::spectra::TripleSelectionMode,
        threshold: Option<f64>,
    },
    /// Read back from a ratios file.
    External { label: String },
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RatioMeta {
    pub class: Option<SymmetryClass>,
    pub source: RatioSource,
    pub seed: Option<u64>,
    pub n_requested: usize,
    pub n_discarded: usize,
}

/// Spacing ratios `r = s_upper / s_lower` with their provenance.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RatioSample {
    pub ratios: Vec<f64>,
    pub meta: RatioMeta,
}

impl RatioSample {
    pub fn len(&self) -> usize {
        self.ratios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ratios.is_empty()
    }
}

#[inline]
fn normal<R: Rng + ?Sized>(rng: &mut R, sd: f64) -> f64 {
    sd * rng.sample::<f64, _>(StandardNormal)
}

/// One matrix draw. The number of normals consumed does not depend on `k`.
pub fn sample_matrix<R: Rng + ?Sized>(
    class: SymmetryClass,
    coupling: Coupling,
    rng: &mut R,
) -> Matrix3 {
    let sd = coupling.standard_deviations(class);
    match class {
        SymmetryClass::Orthogonal => {
            let h11 = normal(rng, sd.diag);
            let h22 = normal(rng, sd.diag);
            let h33 = normal(rng, sd.localized);
            let h12 = normal(rng, sd.pair);
            let h13 = normal(rng, sd.coupling);
            let h23 = normal(rng, sd.coupling);
            Matrix3::Real([[h11, h12, h13], [h12, h22, h23], [h13, h23, h33]])
        }
        SymmetryClass::Unitary => {
            let h11 = normal(rng, sd.diag);
            let h22 = normal(rng, sd.diag);
            let h33 = normal(rng, sd.localized);
            let h12 = Complex64::new(normal(rng, sd.pair), normal(rng, sd.pair));
            let h13 = Complex64::new(normal(rng, sd.coupling), normal(rng, sd.coupling));
            let h23 = Complex64::new(normal(rng, sd.coupling), normal(rng, sd.coupling));
            let re = |x: f64| Complex64::new(x, 0.0);
            Matrix3::Complex([
                [re(h11), h12, h13],
                [h12.conj(), re(h22), h23],
                [h13.conj(), h23.conj(), re(h33)],
            ])
        }
    }
}

/// Amplitudes whose squared modulus enters the information entropy.
pub trait Amplitude {
    fn weight(&self) -> f64;
}

impl Amplitude for f64 {
    fn weight(&self) -> f64 {
        self * self
    }
}

impl Amplitude for Complex64 {
    fn weight(&self) -> f64 {
        self.norm_sqr()
    }
}

/// `S = -sum_j |a_j|^2 ln |a_j|^2`, with `0 ln 0 = 0`.
pub fn shannon_entropy<A: Amplitude>(v: &[A]) -> Result<f64, EnsembleError> {
    let norm2: f64 = v.iter().map(Amplitude::weight).sum();
    let norm = libm::sqrt(norm2);
    if !(libm::fabs(norm - 1.0) <= UNIT_NORM_TOL) {
        return Err(EnsembleError::NotUnit(norm));
    }
    Ok(entropy_unchecked(v.iter().map(Amplitude::weight), v.len()))
}

fn entropy_unchecked(weights: impl Iterator<Item = f64>, n: usize) -> f64 {
    let s: f64 = weights
        .filter(|&w| w > 0.0)
        .map(|w| -w * libm::log(w))
        .sum();
    s.clamp(0.0, libm::log(n as f64))
}

/// Ascending eigenvalues, eigenvectors, entropies and the localized index.
pub fn eigensystem(m: &Matrix3) -> EigenTriple {
    let (values, columns) = match m {
        Matrix3::Real(a) => {
            let (w, v) = jacobi::jacobi_real(*a);
            let mut c = [[Complex64::new(0.0, 0.0); 3]; 3];
            for (i, row) in v.iter().enumerate() {
                for (j, x) in row.iter().enumerate() {
                    c[i][j] = Complex64::new(*x, 0.0);
                }
            }
            (w, c)
        }
        Matrix3::Complex(a) => jacobi::jacobi_hermitian(*a),
    };
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));

    let mut triple = EigenTriple {
        values: [0.0; 3],
        vectors: [[Complex64::new(0.0, 0.0); 3]; 3],
        entropy: [0.0; 3],
        localized_index: 0,
    };
    for (slot, &col) in order.iter().enumerate() {
        triple.values[slot] = values[col];
        for row in 0..3 {
            triple.vectors[slot][row] = columns[row][col];
        }
        triple.entropy[slot] = entropy_unchecked(triple.vectors[slot].iter().map(|z| z.norm_sqr()), 3);
    }
    triple.localized_index = localized_index(&triple.entropy);
    triple
}

/// Index of the smallest entropy; near-ties go to the lower index.
pub fn localized_index(entropy: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in entropy.iter().enumerate().skip(1) {
        if s < entropy[best] - ENTROPY_TIE {
            best = i;
        }
    }
    best
}

/// `r = (e3 - e2) / (e2 - e1)` for ascending `(e1, e2, e3)`.
///
/// The localized member of the triple does not enter: all three placements
/// reduce to the upper over lower spacing.
pub fn ratio_of_values(values: [f64; 3]) -> Result<f64, EnsembleError> {
    let [e1, e2, e3] = values;
    let lower = e2 - e1;
    let range = e3 - e1;
    if !(lower > DEGENERACY_THRESHOLD * range) || !(range > 0.0) {
        return Err(EnsembleError::Degenerate { lower, range });
    }
    Ok((e3 - e2) / lower)
}

pub fn glr_ratio(t: &EigenTriple) -> Result<f64, EnsembleError> {
    ratio_of_values(t.values)
}

/// One accepted draw of a [`RatioStream`].
#[derive(Debug, Clone, PartialEq)]
pub struct Draw {
    pub ratio: f64,
    pub triple: EigenTriple,
    /// Degenerate matrices rejected before this one.
    pub discarded: u32,
}

/// Indexed access to the draws of a seeded run.
#[derive(Debug, Clone)]
pub struct RatioStream {
    class: SymmetryClass,
    coupling: Coupling,
    seed: u64,
    base: ChaCha8Rng,
}

impl RatioStream {
    pub fn new(class: SymmetryClass, coupling: Coupling, seed: u64) -> Self {
        Self {
            class,
            coupling,
            seed,
            base: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Generator for draw `index`: ChaCha8 stream `index` of the seed.
    pub fn substream(&self, index: u64) -> ChaCha8Rng {
        let mut rng = self.base.clone();
        rng.set_stream(index);
        rng
    }

    pub fn draw(&self, index: u64) -> Result<Draw, EnsembleError> {
        let mut rng = self.substream(index);
        for discarded in 0..MAX_REDRAWS {
            let triple = eigensystem(&sample_matrix(self.class, self.coupling, &mut rng));
            if let Ok(ratio) = glr_ratio(&triple) {
                return Ok(Draw {
                    ratio,
                    triple,
                    discarded,
                });
            }
        }
        Err(EnsembleError::RedrawLimit { index })
    }

    /// Ratios for draws `start..end`, with the discard count.
    pub fn ratios(&self, start: u64, end: u64) -> Result<(Vec<f64>, usize), EnsembleError> {
        let mut out = Vec::with_capacity((end - start) as usize);
        let mut discarded = 0usize;
        for i in start..end {
            let d = self.draw(i)?;
            discarded += d.discarded as usize;
            out.push(d.ratio);
        }
        Ok((out, discarded))
    }
}

/// `n` ratios from independent draws of the model.
pub fn sample_ratios(
    class: SymmetryClass,
    coupling: Coupling,
    n: usize,
    seed: u64,
) -> Result<RatioSample, EnsembleError> {
    if n == 0 {
        return Err(EnsembleError::EmptyRequest);
    }
    let stream = RatioStream::new(class, coupling, seed);
    let (ratios, n_discarded) = stream.ratios(0, n as u64)?;
    Ok(RatioSample {
        ratios,
        meta: RatioMeta {
            class: Some(class),
            source: RatioSource::Ensemble { k: coupling.k() },
            seed: Some(seed),
            n_requested: n,
            n_discarded,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn residual_ok(m: &Matrix3, t: &EigenTriple) {
        let norm = m.frobenius_norm();
        for i in 0..3 {
            let v = t.vectors[i];
            let nv: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            assert!((nv - 1.0).abs() < 1e-12);
            for row in 0..3 {
                let hv: Complex64 = (0..3).map(|c| m.entry(row, c) * v[c]).sum();
                assert!((hv - v[row] * t.values[i]).norm() <= 1e-10 * norm);
            }
            for j in 0..i {
                let dot: Complex64 = (0..3).map(|c| t.vectors[j][c].conj() * v[c]).sum();
                assert!(dot.norm() < 1e-12);
            }
            assert!(t.entropy[i] >= 0.0 && t.entropy[i] <= 3f64.ln());
        }
        assert!(t.values[0] <= t.values[1] && t.values[1] <= t.values[2]);
    }

    #[test]
    fn coupling_domain() {
        assert!(Coupling::new(0.0).is_ok());
        assert!(Coupling::new(1.4).is_ok());
        assert!(!Coupling::new(1.4).unwrap().in_analytic_domain());
        assert!(Coupling::new(2f64.sqrt()).is_err());
        assert!(Coupling::new(-0.1).is_err());
        assert!(Coupling::new(f64::NAN).is_err());
    }

    #[test]
    fn diagonal_matrix() {
        let m = Matrix3::Real([[3.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 2.0]]);
        let t = eigensystem(&m);
        assert_eq!(t.values, [1.0, 2.0, 3.0]);
        assert_eq!(t.overlap(0, 1), 1.0);
        assert_eq!(t.overlap(1, 2), 1.0);
        assert_eq!(t.overlap(2, 0), 1.0);
        assert_eq!(t.entropy, [0.0; 3]);
        assert_eq!(t.localized_index, 0);
    }

    #[test]
    fn k_zero_has_exact_zero_level() {
        for class in [SymmetryClass::Orthogonal, SymmetryClass::Unitary] {
            let stream = RatioStream::new(class, Coupling::new(0.0).unwrap(), 11);
            for i in 0..500 {
                let d = stream.draw(i).unwrap();
                let zero = d.triple.values.iter().position(|&e| e == 0.0).expect("zero level");
                assert_eq!(d.triple.overlap(zero, 2), 1.0);
                assert_eq!(d.triple.entropy[zero], 0.0);
                assert_eq!(d.triple.localized_index, zero);
            }
        }
    }

    #[test]
    fn reconstruction_and_residuals() {
        for class in [SymmetryClass::Orthogonal, SymmetryClass::Unitary] {
            for k in [0.05, 0.5, 1.0, 1.3] {
                let c = Coupling::new(k).unwrap();
                let mut rng = ChaCha8Rng::seed_from_u64(3);
                for _ in 0..200 {
                    let m = sample_matrix(class, c, &mut rng);
                    assert!(m.is_self_adjoint(0.0));
                    let t = eigensystem(&m);
                    residual_ok(&m, &t);
                    for i in 0..3 {
                        for j in 0..3 {
                            let rec: Complex64 = (0..3)
                                .map(|n| t.vectors[n][i] * t.vectors[n][j].conj() * t.values[n])
                                .sum();
                            assert!((rec - m.entry(i, j)).norm() < 1e-10);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn nearly_degenerate_input() {
        let e = 1e-9;
        let m = Matrix3::Real([[1.0, e, 0.0], [e, 1.0, e], [0.0, e, 1.0 + 1e-15]]);
        residual_ok(&m, &eigensystem(&m));
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(shannon_entropy(&[0.0, 0.0, 1.0]).unwrap(), 0.0);
        let s = 1.0 / 3f64.sqrt();
        assert_relative_eq!(shannon_entropy(&[s, s, s]).unwrap(), 3f64.ln(), max_relative = 1e-14);
        let h = core::f64::consts::FRAC_1_SQRT_2;
        assert_relative_eq!(shannon_entropy(&[h, h, 0.0]).unwrap(), 2f64.ln(), max_relative = 1e-14);
        let z = Complex64::new(0.0, 1.0);
        assert_eq!(shannon_entropy(&[z, Complex64::new(0.0, 0.0)]).unwrap(), 0.0);
        assert!(matches!(shannon_entropy(&[0.5, 0.5, 0.0]), Err(EnsembleError::NotUnit(_))));
    }

    #[test]
    fn ratio_examples() {
        assert_relative_eq!(ratio_of_values([-1.0, 0.2, 0.5]).unwrap(), 0.25, max_relative = 1e-15);
        assert_eq!(ratio_of_values([-1.0, 0.0, 2.0]).unwrap(), 2.0);
        assert_eq!(ratio_of_values([0.0, 1.0, 3.0]).unwrap(), 2.0);
        assert!(ratio_of_values([1.0, 1.0, 3.0]).is_err());
        assert!(ratio_of_values([0.0, 1e-13, 1.0]).is_err());
        assert_eq!(ratio_of_values([0.0, 1.0, 1.0]).unwrap(), 0.0);
    }

    #[test]
    fn tie_breaking() {
        assert_eq!(localized_index(&[0.5, 0.5 - 1e-13, 0.7]), 0);
        assert_eq!(localized_index(&[0.5, 0.4, 0.4]), 1);
        assert_eq!(localized_index(&[0.5, 0.6, 0.1]), 2);
    }

    #[test]
    fn sampling_is_deterministic_and_indexed() {
        let c = Coupling::new(0.4).unwrap();
        let a = sample_ratios(SymmetryClass::Unitary, c, 300, 99).unwrap();
        let b = sample_ratios(SymmetryClass::Unitary, c, 300, 99).unwrap();
        assert_eq!(a, b);
        let stream = RatioStream::new(SymmetryClass::Unitary, c, 99);
        let (tail, _) = stream.ratios(100, 300).unwrap();
        assert_eq!(&a.ratios[100..], &tail[..]);
        let other = sample_ratios(SymmetryClass::Unitary, c, 300, 100).unwrap();
        assert_ne!(a.ratios, other.ratios);
        assert!(sample_ratios(SymmetryClass::Unitary, c, 0, 1).is_err());
    }

    #[test]
    fn unit_coupling_is_standard_ensemble() {
        let c = Coupling::new(1.0).unwrap();
        let o = c.standard_deviations(SymmetryClass::Orthogonal);
        assert_eq!(o.localized, o.diag);
        assert_relative_eq!(o.coupling, o.pair);
        let u = c.standard_deviations(SymmetryClass::Unitary);
        assert_relative_eq!(u.localized, u.diag);
        assert_relative_eq!(u.coupling, u.pair);
    }
}
