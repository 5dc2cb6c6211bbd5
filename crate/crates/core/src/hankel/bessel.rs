//! Integer-order Bessel functions of the first kind and their positive zeros.

/// `J_n(x)` for integer `n` (negative orders via `J_{-n} = (-1)^n J_n`).
pub fn bessel_j(n: i32, x: f64) -> f64 {
    match n {
        0 => libm::j0(x),
        1 => libm::j1(x),
        _ => libm::jn(n, x),
    }
}

/// `J_n'(x) = J_{n-1}(x) - (n/x) J_n(x)`, with `J_0' = -J_1`.
pub fn bessel_j_prime(n: i32, x: f64) -> f64 {
    if n == 0 {
        -libm::j1(x)
    } else if x == 0.0 {
        if n.abs() == 1 {
            0.5 * n.signum() as f64
        } else {
            0.0
        }
    } else {
        bessel_j(n - 1, x) - n as f64 / x * bessel_j(n, x)
    }
}

/// First `count` positive zeros of `J_order`, `order ≥ 0`.
///
/// Zeros of `J_p` lie above `p` and are spaced by more than 2, so a scan with
/// unit step brackets each one exactly once; brackets are polished by
/// safeguarded Newton.
pub fn bessel_zeros(order: u32, count: usize) -> Vec<f64> {
    let p = order as i32;
    let mut zeros = Vec::with_capacity(count);
    let mut a = (order as f64).max(1e-3);
    let mut fa = bessel_j(p, a);
    const STEP: f64 = 1.0;
    while zeros.len() < count {
        let b = a + STEP;
        let fb = bessel_j(p, b);
        if fa == 0.0 {
            zeros.push(a);
        } else if fa * fb < 0.0 {
            zeros.push(polish(p, a, b, fa));
        }
        a = b;
        fa = fb;
    }
    zeros
}

fn polish(p: i32, mut lo: f64, mut hi: f64, flo: f64) -> f64 {
    let mut x = 0.5 * (lo + hi);
    for _ in 0..100 {
        let fx = bessel_j(p, x);
        if fx == 0.0 {
            return x;
        }
        if (fx < 0.0) == (flo < 0.0) {
            lo = x;
        } else {
            hi = x;
        }
        let d = bessel_j_prime(p, x);
        let newton = x - fx / d;
        let next = if d != 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - x).abs() <= 4.0 * f64::EPSILON * x.abs() {
            return next;
        }
        x = next;
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    /// Bessel's integral, trapezoid on a periodic integrand (spectrally exact).
    fn j_integral(n: i32, x: f64) -> f64 {
        let m = 4096;
        let s: f64 = (0..m)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / m as f64;
                (n as f64 * t - x * t.sin()).cos()
            })
            .sum();
        s / m as f64
    }

    #[test]
    fn matches_integral_representation() {
        for n in [0, 1, 2, 3, 5, 8] {
            for &x in &[0.0, 0.3, 1.0, 2.5, 7.0, 19.3, 60.0, 250.0] {
                let a = bessel_j(n, x);
                let b = j_integral(n, x);
                assert!((a - b).abs() < 1e-13, "J_{n}({x}): {a} vs {b}");
            }
        }
    }

    #[test]
    fn first_zeros_match_tables() {
        let z0 = bessel_zeros(0, 3);
        assert!((z0[0] - 2.404825557695773).abs() < 1e-14);
        assert!((z0[1] - 5.520078110286311).abs() < 1e-13);
        assert!((z0[2] - 8.653727912911013).abs() < 1e-13);
        let z1 = bessel_zeros(1, 2);
        assert!((z1[0] - 3.831705970207512).abs() < 1e-13);
        let z2 = bessel_zeros(2, 1);
        assert!((z2[0] - 5.135622301840683).abs() < 1e-13);
    }

    #[test]
    fn zeros_interlace() {
        for p in 0..6u32 {
            let a = bessel_zeros(p, 300);
            let b = bessel_zeros(p + 1, 300);
            for k in 0..299 {
                assert!(a[k] < b[k] && b[k] < a[k + 1], "order {p}, k {k}");
                assert!(bessel_j(p as i32, a[k]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn derivative_by_differences() {
        for n in [0, 1, 4] {
            for &x in &[0.7, 3.3, 12.0] {
                let h = 1e-5;
                let fd = (bessel_j(n, x + h) - bessel_j(n, x - h)) / (2.0 * h);
                assert!((fd - bessel_j_prime(n, x)).abs() < 1e-9);
            }
        }
    }
}
