//! Exponentially scaled modified Bessel functions of integer order.

use statrs::function::factorial::ln_factorial as ln_fact_u64;

pub fn ln_factorial(n: u64) -> f64 {
    ln_fact_u64(n)
}

/// `e^{-x} I_n(x)` for integer `n` and `x ≥ 0`, by the power series
/// `I_n(x) = Σ_k (x/2)^{2k+n} / (k! (k+n)!)` summed in log space outward
/// from its largest term. All terms are positive so there is no cancellation.
pub fn scaled_bessel_i(n: i64, x: f64) -> f64 {
    let n = n.unsigned_abs();
    if x == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    let lh = (x / 2.0).ln();
    let log_term = |k: u64| -> f64 {
        (2 * k + n) as f64 * lh - ln_factorial(k) - ln_factorial(k + n) - x
    };
    let nf = n as f64;
    let peak = ((-nf + (nf * nf + x * x).sqrt()) / 2.0).round().max(0.0) as u64;
    let top = log_term(peak);
    // relative to the peak term; stop once a term is below 1e-18 of it
    let cutoff = top - 41.5;
    let mut sum = 1.0;
    let mut k = peak + 1;
    loop {
        let lt = log_term(k);
        if lt < cutoff {
            break;
        }
        sum += (lt - top).exp();
        k += 1;
    }
    let mut k = peak;
    while k > 0 {
        k -= 1;
        let lt = log_term(k);
        if lt < cutoff {
            break;
        }
        sum += (lt - top).exp();
    }
    (top + sum.ln()).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        // I_0(2) = 2.2795853023360673, I_1(2) = 1.5906368546373291, I_5(1) = 2.714631559569719e-4
        let e2 = (-2.0f64).exp();
        assert!((scaled_bessel_i(0, 2.0) - 2.2795853023360673 * e2).abs() < 1e-15);
        assert!((scaled_bessel_i(1, 2.0) - 1.590_636_854_637_329 * e2).abs() < 1e-15);
        let e1 = (-1.0f64).exp();
        assert!((scaled_bessel_i(5, 1.0) / (2.714631559569719e-4 * e1) - 1.0).abs() < 1e-13);
        assert_eq!(scaled_bessel_i(-3, 1.5), scaled_bessel_i(3, 1.5));
        assert_eq!(scaled_bessel_i(0, 0.0), 1.0);
        assert_eq!(scaled_bessel_i(2, 0.0), 0.0);
    }

    #[test]
    fn generating_function_sums_to_one() {
        // Σ_n e^{-x} I_n(x) = 1
        for &x in &[0.1f64, 1.0, 7.5, 40.0, 300.0] {
            let r = (20.0 * (x + 1.0).sqrt() + 30.0) as i64;
            let s: f64 = (-r..=r).map(|n| scaled_bessel_i(n, x)).sum();
            assert!((s - 1.0).abs() < 1e-13, "x={x} sum={s}");
        }
    }

    #[test]
    fn recurrence_holds() {
        // I_{n-1}(x) - I_{n+1}(x) = (2n/x) I_n(x)
        for &x in &[0.5, 3.0, 20.0] {
            for n in 1..15 {
                let lhs = scaled_bessel_i(n - 1, x) - scaled_bessel_i(n + 1, x);
                let rhs = 2.0 * n as f64 / x * scaled_bessel_i(n, x);
                assert!((lhs - rhs).abs() <= 1e-13 * rhs.abs().max(1e-300) + 1e-300);
            }
        }
    }
}
