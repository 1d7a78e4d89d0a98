//! Error function and standard-normal helpers.
//!
//! `erf`/`erfc` follow Cody's rational Chebyshev approximations (SPECFUN),
//! accurate to better than 1e-15 relative in double precision, comfortably
//! inside the 1e-12 absolute contract the samplers and oracles rely on.

// Coefficient tables are transcribed verbatim from the reference papers.
#![allow(clippy::excessive_precision)]

/// Cody rational approximation, |x| <= 0.46875 branch threshold.
const ERF_THRESHOLD: f64 = 0.46875;

const ERF_A: [f64; 5] = [
    3.16112374387056560e0,
    1.13864154151050156e2,
    3.77485237685302021e2,
    3.20937758913846947e3,
    1.85777706184603153e-1,
];
const ERF_B: [f64; 4] = [
    2.36012909523441209e1,
    2.44024637934444173e2,
    1.28261652607737228e3,
    2.84423683343917062e3,
];
const ERFC_C: [f64; 9] = [
    5.64188496988670089e-1,
    8.88314979438837594e0,
    6.61191906371416295e1,
    2.98635138197400131e2,
    8.81952221241769090e2,
    1.71204761263407058e3,
    2.05107837782607147e3,
    1.23033935479799725e3,
    2.15311535474403846e-8,
];
const ERFC_D: [f64; 8] = [
    1.57449261107098347e1,
    1.17693950891312499e2,
    5.37181101862009858e2,
    1.62138957456669019e3,
    3.29079923573345963e3,
    4.36261909014324716e3,
    3.43936767414372164e3,
    1.23033935480374942e3,
];
const ERFC_P: [f64; 6] = [
    3.05326634961232344e-1,
    3.60344899949804439e-1,
    1.25781726111229246e-1,
    1.60837851487422766e-2,
    6.58749161529837803e-4,
    1.63153871373020978e-2,
];
const ERFC_Q: [f64; 5] = [
    2.56852019228982242e0,
    1.87295284992346047e0,
    5.27905102951428412e-1,
    6.05183413124413191e-2,
    2.33520497626869185e-3,
];

const ONE_OVER_SQRT_PI: f64 = 0.564189583547756286948;

/// erfc on x >= ERF_THRESHOLD.
fn erfc_positive(x: f64) -> f64 {
    let result = if x <= 4.0 {
        let mut xnum = ERFC_C[8] * x;
        let mut xden = x;
        for i in 0..7 {
            xnum = (xnum + ERFC_C[i]) * x;
            xden = (xden + ERFC_D[i]) * x;
        }
        (xnum + ERFC_C[7]) / (xden + ERFC_D[7])
    } else if x < 26.6 {
        let z = 1.0 / (x * x);
        let mut xnum = ERFC_P[5] * z;
        let mut xden = z;
        for i in 0..4 {
            xnum = (xnum + ERFC_P[i]) * z;
            xden = (xden + ERFC_Q[i]) * z;
        }
        let r = z * (xnum + ERFC_P[4]) / (xden + ERFC_Q[4]);
        (ONE_OVER_SQRT_PI - r) / x
    } else {
        return 0.0;
    };
    // exp(-x^2) split to preserve accuracy for large x.
    let ysq = (x * 16.0).trunc() / 16.0;
    let del = (x - ysq) * (x + ysq);
    (-ysq * ysq).exp() * (-del).exp() * result
}

pub fn erf(x: f64) -> f64 {
    let ax = x.abs();
    if ax <= ERF_THRESHOLD {
        let z = x * x;
        let mut xnum = ERF_A[4] * z;
        let mut xden = z;
        for i in 0..3 {
            xnum = (xnum + ERF_A[i]) * z;
            xden = (xden + ERF_B[i]) * z;
        }
        x * (xnum + ERF_A[3]) / (xden + ERF_B[3])
    } else {
        let e = 1.0 - erfc_positive(ax);
        if x < 0.0 {
            -e
        } else {
            e
        }
    }
}

pub fn erfc(x: f64) -> f64 {
    if x.abs() <= ERF_THRESHOLD {
        1.0 - erf(x)
    } else if x > 0.0 {
        erfc_positive(x)
    } else {
        2.0 - erfc_positive(-x)
    }
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Density of N(mu, sigma^2) at x.
pub fn gaussian_pdf(x: f64, mu: f64, sigma: f64) -> f64 {
    normal_pdf((x - mu) / sigma) / sigma
}

// Wichura's PPND16 rational approximations for the normal quantile.
const PPND_A: [f64; 8] = [
    3.3871328727963666080e0,
    1.3314166789178437745e2,
    1.9715909503065514427e3,
    1.3731693765509461125e4,
    4.5921953931549871457e4,
    6.7265770927008700853e4,
    3.3430575583588128105e4,
    2.5090809287301226727e3,
];
const PPND_B: [f64; 8] = [
    1.0,
    4.2313330701600911252e1,
    6.8718700749205790830e2,
    5.3941960214247511077e3,
    2.1213794301586595867e4,
    3.9307895800092710610e4,
    2.8729085735721942674e4,
    5.2264952788528545610e3,
];
const PPND_C: [f64; 8] = [
    1.42343711074968357734e0,
    4.63033784615654529590e0,
    5.76949722146069140550e0,
    3.64784832476320460504e0,
    1.27045825245236838258e0,
    2.41780725177450611770e-1,
    2.27238449892691845833e-2,
    7.74545014278341407640e-4,
];
const PPND_D: [f64; 8] = [
    1.0,
    2.05319162663775882187e0,
    1.67638483018380384940e0,
    6.89767334985100004550e-1,
    1.48103976427480074590e-1,
    1.51986665636164571966e-2,
    5.47593808499534494600e-4,
    1.05075007164441684324e-9,
];
const PPND_E: [f64; 8] = [
    6.65790464350110377720e0,
    5.46378491116411436990e0,
    1.78482653991729133580e0,
    2.96560571828504891230e-1,
    2.65321895265761230930e-2,
    1.24266094738807843860e-3,
    2.71155556874348757815e-5,
    2.01033439929228813265e-7,
];
const PPND_F: [f64; 8] = [
    1.0,
    5.99832206555887937690e-1,
    1.36929880922735805310e-1,
    1.48753612908506148525e-2,
    7.86869131145613259100e-4,
    1.84631831751005468180e-5,
    1.42151175831644588870e-7,
    2.04426310338993978564e-15,
];

fn poly8(c: &[f64; 8], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &ci| acc * x + ci)
}

/// Standard normal quantile (inverse CDF), PPND16 accuracy (~1e-16 rel).
/// Returns -inf/inf at p = 0/1, NaN outside [0, 1].
pub fn normal_quantile(p: f64) -> f64 {
    if !(0.0..=1.0).contains(&p) {
        return f64::NAN;
    }
    if p == 0.0 {
        return f64::NEG_INFINITY;
    }
    if p == 1.0 {
        return f64::INFINITY;
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q * poly8(&PPND_A, r) / poly8(&PPND_B, r);
    }
    let r = if q < 0.0 { p } else { 1.0 - p };
    let r = (-r.ln()).sqrt();
    let val = if r <= 5.0 {
        let r = r - 1.6;
        poly8(&PPND_C, r) / poly8(&PPND_D, r)
    } else {
        let r = r - 5.0;
        poly8(&PPND_E, r) / poly8(&PPND_F, r)
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}
