//! Cubic Hermite interpolation on sample cells, with slope limiting for
//! monotone data and inversion of monotone cells.

/// Evaluates the cubic Hermite interpolant on [x0, x1] with values y0, y1 and
/// derivatives d0, d1 at the endpoints.
pub fn hermite(x0: f64, x1: f64, y0: f64, y1: f64, d0: f64, d1: f64, x: f64) -> f64 {
    let h = x1 - x0;
    let t = (x - x0) / h;
    let t2 = t * t;
    let t3 = t2 * t;
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + t;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1
}

/// Fritsch-Carlson limiting: scales endpoint slopes so the Hermite cubic on a
/// monotone cell cannot overshoot. Returns the limited (d0, d1).
pub fn limit_monotone(y0: f64, y1: f64, d0: f64, d1: f64, h: f64) -> (f64, f64) {
    let secant = (y1 - y0) / h;
    if secant == 0.0 {
        return (0.0, 0.0);
    }
    let a = d0 / secant;
    let b = d1 / secant;
    if a < 0.0 || b < 0.0 {
        return (0.0, 0.0);
    }
    let r2 = a * a + b * b;
    if r2 > 9.0 {
        let scale = 3.0 / r2.sqrt();
        (scale * d0, scale * d1)
    } else {
        (d0, d1)
    }
}

/// Solves y(x) = target on a strictly increasing Hermite cell by safeguarded
/// Newton iteration. `target` must lie in [y0, y1].
pub fn invert_monotone_cell(
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    d0: f64,
    d1: f64,
    target: f64,
) -> f64 {
    debug_assert!(y1 > y0);
    let mut lo = x0;
    let mut hi = x1;
    // Initial guess from the secant.
    let mut x = x0 + (x1 - x0) * ((target - y0) / (y1 - y0)).clamp(0.0, 1.0);
    for _ in 0..60 {
        let y = hermite(x0, x1, y0, y1, d0, d1, x);
        let err = y - target;
        if err.abs() <= 1e-15 * (y0.abs() + y1.abs() + 1.0) {
            return x;
        }
        if err > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let dy = hermite_derivative(x0, x1, y0, y1, d0, d1, x);
        let step = if dy > 0.0 { err / dy } else { 0.0 };
        let mut next = x - step;
        if !(next > lo && next < hi) || step == 0.0 {
            next = 0.5 * (lo + hi);
        }
        if (hi - lo) < 1e-16 * (x1 - x0).abs() {
            return 0.5 * (lo + hi);
        }
        x = next;
    }
    x
}

pub fn hermite_derivative(x0: f64, x1: f64, y0: f64, y1: f64, d0: f64, d1: f64, x: f64) -> f64 {
    let h = x1 - x0;
    let t = (x - x0) / h;
    let t2 = t * t;
    let dh00 = (6.0 * t2 - 6.0 * t) / h;
    let dh10 = 3.0 * t2 - 4.0 * t + 1.0;
    let dh01 = (-6.0 * t2 + 6.0 * t) / h;
    let dh11 = 3.0 * t2 - 2.0 * t;
    dh00 * y0 + dh10 * d0 + dh01 * y1 + dh11 * d1
}
