//! Exponential integral and the oscillatory power tails used to correct
//! truncated contour integrals.

use num_complex::Complex64;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// E1(z) = ∫_1^∞ e^{-zt}/t dt on the closed right half-plane, z ≠ 0.
pub fn exp_integral_e1(z: Complex64) -> Complex64 {
    debug_assert!(z.re >= -1e-12, "E1 implemented for Re z >= 0");
    if z.norm() <= 2.0 {
        // -γ - ln z - Σ (-z)^k / (k k!)
        let mut sum = Complex64::new(0.0, 0.0);
        let mut term = Complex64::new(1.0, 0.0);
        for k in 1..80 {
            term *= -z / k as f64;
            let add = term / k as f64;
            sum += add;
            if add.norm() < 1e-17 * sum.norm().max(1e-300) {
                break;
            }
        }
        return -EULER_GAMMA - z.ln() - sum;
    }
    // Continued fraction, modified Lentz.
    let tiny = 1e-300;
    let mut b = z + 1.0;
    let mut c = Complex64::new(1.0 / tiny, 0.0);
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..10_000 {
        let an = -((i * i) as f64);
        b += 2.0;
        d = 1.0 / (d * an + b);
        c = b + an / c;
        let del = c * d;
        h *= del;
        if (del - 1.0).norm() < 1e-16 {
            break;
        }
    }
    h * (-z).exp()
}

/// J_m = ∫_U^∞ e^{iLu} u^{-m} du for m = 2..=m_max; entry m-2 of the result.
pub fn oscillatory_tails(l: f64, u: f64, m_max: usize) -> Vec<Complex64> {
    assert!(u > 0.0 && m_max >= 2);
    let mut out = Vec::with_capacity(m_max - 1);
    if l == 0.0 {
        for m in 2..=m_max {
            out.push(Complex64::new(u.powi(1 - m as i32) / (m as f64 - 1.0), 0.0));
        }
        return out;
    }
    let phase = Complex64::new(0.0, l * u).exp();
    let il = Complex64::new(0.0, l);
    let mut j = exp_integral_e1(Complex64::new(0.0, -l * u));
    for m in 2..=m_max {
        let mf = m as f64 - 1.0;
        j = phase * u.powi(1 - m as i32) / mf + il / mf * j;
        out.push(j);
    }
    out
}
