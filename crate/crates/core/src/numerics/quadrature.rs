use alloc::vec::Vec;

use super::{NumericsError, QuadratureSpec};

// 15-point Kronrod abscissae (descending, last is the centre) with the
// embedded 7-point Gauss rule on the odd-indexed nodes.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const GL8_X: [f64; 4] = [
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL8_W: [f64; 4] = [
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

/// Result of a converged integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub abs_err: f64,
    pub evaluations: usize,
}

/// Location and width of the Gaussian factor that dominates an integrand on
/// an infinite domain. `scale` is the standard deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleHint {
    pub center: f64,
    pub scale: f64,
}

impl ScaleHint {
    pub fn new(center: f64, scale: f64) -> Self {
        Self { center, scale }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Raw {
    pub value: f64,
    pub abs_err: f64,
    pub evaluations: usize,
    pub converged: bool,
}

#[derive(Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

fn rescale_error(err: f64, res_abs: f64, res_asc: f64) -> f64 {
    let mut err = libm::fabs(err);
    if res_asc != 0.0 && err != 0.0 {
        let scale = libm::pow(200.0 * err / res_asc, 1.5);
        err = if scale < 1.0 { res_asc * scale } else { res_asc };
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        let min_err = 50.0 * f64::EPSILON * res_abs;
        if min_err > err {
            err = min_err;
        }
    }
    err
}

fn kronrod15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut res_k = fc * WGK[7];
    let mut res_g = fc * WG[3];
    let mut res_abs = libm::fabs(res_k);
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (libm::fabs(f1) + libm::fabs(f2));
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[7] * libm::fabs(fc - mean);
    for j in 0..7 {
        res_asc += WGK[j] * (libm::fabs(fv1[j] - mean) + libm::fabs(fv2[j] - mean));
    }
    let width = libm::fabs(half);
    let err = rescale_error((res_k - res_g) * half, res_abs * width, res_asc * width);
    (res_k * half, err)
}

/// Globally adaptive Gauss-Kronrod integration over consecutive pieces
/// `points[0]..points[1]..`, always bisecting the piece with the largest
/// error estimate. Never fails; convergence is reported in the result.
pub(crate) fn adaptive<F: FnMut(f64) -> f64>(
    mut f: F,
    points: &[f64],
    spec: &QuadratureSpec,
) -> Raw {
    let mut segs: Vec<Segment> = Vec::with_capacity(points.len() + 16);
    for w in points.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b > a {
            let (value, err) = kronrod15(&mut f, a, b);
            segs.push(Segment { a, b, value, err });
        }
    }
    let mut evaluations = 15 * segs.len();
    let cap = spec.max_subdivisions.max(segs.len());
    loop {
        let (mut value, mut err) = (0.0, 0.0);
        let mut worst = 0;
        for (i, s) in segs.iter().enumerate() {
            value += s.value;
            err += s.err;
            if s.err > segs[worst].err {
                worst = i;
            }
        }
        let tol = spec.abs_tol.max(spec.rel_tol * libm::fabs(value));
        if err <= tol || segs.is_empty() {
            return Raw { value, abs_err: err, evaluations, converged: true };
        }
        let s = segs[worst];
        let mid = 0.5 * (s.a + s.b);
        let too_narrow = !(mid > s.a && mid < s.b)
            || libm::fabs(s.b - s.a) <= 100.0 * f64::EPSILON * (libm::fabs(s.a) + libm::fabs(s.b));
        if segs.len() >= cap || too_narrow {
            return Raw { value, abs_err: err, evaluations, converged: false };
        }
        let (v1, e1) = kronrod15(&mut f, s.a, mid);
        let (v2, e2) = kronrod15(&mut f, mid, s.b);
        evaluations += 30;
        segs[worst] = Segment { a: s.a, b: mid, value: v1, err: e1 };
        segs.push(Segment { a: mid, b: s.b, value: v2, err: e2 });
    }
}

fn finish(raw: Raw) -> Result<Integral, NumericsError> {
    if raw.converged {
        Ok(Integral {
            value: raw.value,
            abs_err: raw.abs_err,
            evaluations: raw.evaluations,
        })
    } else {
        Err(NumericsError::NotConverged {
            estimate: raw.value,
            abs_err: raw.abs_err,
        })
    }
}

/// Adaptive integral of `f` over `[a, b]`.
pub fn integrate_1d<F: FnMut(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    spec: &QuadratureSpec,
) -> Result<Integral, NumericsError> {
    spec.validate()?;
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(NumericsError::InvalidInterval { a, b });
    }
    finish(adaptive(f, &[a, b], spec))
}

/// Adaptive integral over `[points[0], points[last]]`, with the interior
/// points used as initial subdivision boundaries (peaks, kinks).
pub fn integrate_breakpoints<F: FnMut(f64) -> f64>(
    f: F,
    points: &[f64],
    spec: &QuadratureSpec,
) -> Result<Integral, NumericsError> {
    spec.validate()?;
    if points.len() < 2 || points.iter().any(|p| !p.is_finite()) {
        return Err(NumericsError::InvalidInterval {
            a: points.first().copied().unwrap_or(f64::NAN),
            b: points.last().copied().unwrap_or(f64::NAN),
        });
    }
    if points.windows(2).any(|w| w[1] < w[0]) || !(points[0] < points[points.len() - 1]) {
        return Err(NumericsError::InvalidInterval {
            a: points[0],
            b: points[points.len() - 1],
        });
    }
    finish(adaptive(f, points, spec))
}

/// Integral over `[0, inf)`, truncated at `max(center, 0) + T * scale`.
pub fn integrate_semiinfinite<F: FnMut(f64) -> f64>(
    f: F,
    hint: ScaleHint,
    spec: &QuadratureSpec,
) -> Result<Integral, NumericsError> {
    spec.validate()?;
    if !(hint.scale > 0.0) || !hint.center.is_finite() {
        return Err(NumericsError::InvalidSpec("scale hint must be finite and positive"));
    }
    let top = hint.center.max(0.0) + spec.truncation_sigmas * hint.scale;
    if hint.center > 0.0 {
        finish(adaptive(f, &[0.0, hint.center, top], spec))
    } else {
        finish(adaptive(f, &[0.0, top], spec))
    }
}

/// Integral over the real line, truncated to `center +- T * scale`.
pub fn integrate_real_line<F: FnMut(f64) -> f64>(
    f: F,
    hint: ScaleHint,
    spec: &QuadratureSpec,
) -> Result<Integral, NumericsError> {
    spec.validate()?;
    if !(hint.scale > 0.0) || !hint.center.is_finite() {
        return Err(NumericsError::InvalidSpec("scale hint must be finite and positive"));
    }
    let half = spec.truncation_sigmas * hint.scale;
    finish(adaptive(
        f,
        &[hint.center - half, hint.center, hint.center + half],
        spec,
    ))
}

/// Fixed 8-point Gauss-Legendre rule on `[a, b]`.
pub fn gauss_legendre<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64) -> f64 {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut sum = 0.0;
    for i in 0..4 {
        let dx = h * GL8_X[i];
        sum += GL8_W[i] * (f(c - dx) + f(c + dx));
    }
    sum * h
}

/// Bookkeeping for nested quadrature: inner integrals that fail to converge
/// still contribute their best estimate, and their error bounds are kept so
/// the outer level can decide whether the combined result is trustworthy.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct NestedErrors {
    failures: usize,
    worst_abs_err: f64,
}

impl NestedErrors {
    #[inline]
    pub fn absorb(&mut self, raw: Raw) -> f64 {
        if !raw.converged {
            self.failures += 1;
            self.worst_abs_err = self.worst_abs_err.max(raw.abs_err);
        }
        raw.value
    }

    /// Combine with the outermost integral over a domain of length
    /// `outer_length`. Inner failures are tolerated while the error they can
    /// contribute stays inside the outer tolerance.
    pub fn conclude(
        self,
        outer: Raw,
        outer_length: f64,
        spec: &QuadratureSpec,
    ) -> Result<Integral, NumericsError> {
        let inner_bound = self.worst_abs_err * outer_length;
        let tol = spec.abs_tol.max(spec.rel_tol * libm::fabs(outer.value));
        let abs_err = outer.abs_err + inner_bound;
        if outer.converged && (self.failures == 0 || inner_bound <= tol) {
            Ok(Integral {
                value: outer.value,
                abs_err,
                evaluations: outer.evaluations,
            })
        } else {
            Err(NumericsError::NotConverged {
                estimate: outer.value,
                abs_err,
            })
        }
    }
}
