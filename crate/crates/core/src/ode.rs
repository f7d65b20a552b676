//! Fixed-step classical Runge-Kutta integration.

/// One RK4 step of `y' = f(t, y)` for a fixed-size state.
pub fn rk4_step<const N: usize>(f: impl Fn(f64, &[f64; N]) -> [f64; N], t: f64, y: &[f64; N], dt: f64) -> [f64; N] {
    let shift = |base: &[f64; N], k: &[f64; N], c: f64| {
        let mut out = *base;
        for (o, ki) in out.iter_mut().zip(k) {
            *o += c * ki;
        }
        out
    };
    let k1 = f(t, y);
    let k2 = f(t + 0.5 * dt, &shift(y, &k1, 0.5 * dt));
    let k3 = f(t + 0.5 * dt, &shift(y, &k2, 0.5 * dt));
    let k4 = f(t + dt, &shift(y, &k3, dt));
    let mut out = *y;
    for i in 0..N {
        out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

/// Scalar RK4 step.
pub fn rk4_scalar(f: impl Fn(f64, f64) -> f64, t: f64, y: f64, dt: f64) -> f64 {
    rk4_step(|t, y: &[f64; 1]| [f(t, y[0])], t, &[y], dt)[0]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_is_fourth_order() {
        let err = |dt: f64| {
            let steps = (1.0 / dt).round() as usize;
            let mut y = 1.0;
            for k in 0..steps {
                y = rk4_scalar(|_, y| -y, k as f64 * dt, y, dt);
            }
            (y - (-1.0f64).exp()).abs()
        };
        let ratio = err(0.1) / err(0.05);
        assert!(ratio > 14.0 && ratio < 18.0, "ratio {ratio}");
    }

    #[test]
    fn rotation_preserves_radius_closely() {
        let mut y = [1.0, 0.0];
        let dt = 0.01;
        for k in 0..628 {
            y = rk4_step(|_, y: &[f64; 2]| [-y[1], y[0]], k as f64 * dt, &y, dt);
        }
        assert!((y[0].hypot(y[1]) - 1.0).abs() < 1e-9);
    }
}
