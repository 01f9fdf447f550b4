//! Smooth monotone cutoffs built from `exp(-1/t)`, with derivatives carried
//! by truncated Taylor arithmetic.

use serde::Serialize;

/// Truncated Taylor series `sum c[k] t^k`, orders 0 through 4.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet(pub [f64; 5]);

impl Jet {
    pub fn constant(c: f64) -> Self {
        Jet([c, 0.0, 0.0, 0.0, 0.0])
    }

    pub fn variable(x: f64) -> Self {
        Jet([x, 1.0, 0.0, 0.0, 0.0])
    }

    pub fn zero() -> Self {
        Jet([0.0; 5])
    }

    pub fn add(&self, o: &Jet) -> Jet {
        Jet(std::array::from_fn(|k| self.0[k] + o.0[k]))
    }

    pub fn sub(&self, o: &Jet) -> Jet {
        Jet(std::array::from_fn(|k| self.0[k] - o.0[k]))
    }

    pub fn scale(&self, s: f64) -> Jet {
        Jet(self.0.map(|c| c * s))
    }

    pub fn mul(&self, o: &Jet) -> Jet {
        Jet(std::array::from_fn(|k| (0..=k).map(|j| self.0[j] * o.0[k - j]).sum()))
    }

    pub fn recip(&self) -> Jet {
        let a = &self.0;
        let mut b = [0.0; 5];
        b[0] = 1.0 / a[0];
        for k in 1..5 {
            let s: f64 = (1..=k).map(|j| a[j] * b[k - j]).sum();
            b[k] = -s / a[0];
        }
        Jet(b)
    }

    pub fn div(&self, o: &Jet) -> Jet {
        self.mul(&o.recip())
    }

    pub fn exp(&self) -> Jet {
        let a = &self.0;
        let mut b = [0.0; 5];
        b[0] = a[0].exp();
        for k in 1..5 {
            let s: f64 = (1..=k).map(|j| j as f64 * a[j] * b[k - j]).sum();
            b[k] = s / k as f64;
        }
        Jet(b)
    }

    /// Derivatives `f, f', f'', f'''`.
    pub fn derivatives(&self) -> [f64; 4] {
        [self.0[0], self.0[1], 2.0 * self.0[2], 6.0 * self.0[3]]
    }
}

/// `exp(-1/t)` for `t > 0`, else 0. Below `t = 1/700` every Taylor
/// coefficient is under 1e-270 and is flushed to zero.
fn flat_exp(t: &Jet) -> Jet {
    if t.0[0] <= 1.0 / 700.0 {
        return Jet::zero();
    }
    t.recip().scale(-1.0).exp()
}

/// Smooth step equal to 1 for `u <= 0`, to 0 for `u >= 1`, decreasing between.
pub fn smooth_step(u: &Jet) -> Jet {
    let a = flat_exp(&Jet::constant(1.0).sub(u));
    let b = flat_exp(u);
    if b.0[0] == 0.0 {
        return Jet::constant(1.0);
    }
    if a.0[0] == 0.0 {
        return Jet::zero();
    }
    a.div(&a.add(&b))
}

/// Cutoff `chi` with `chi = 1` below `t0` and `chi = 0` above `t1`.
#[derive(Clone, Copy, Debug, Serialize, PartialEq)]
pub struct Cutoff {
    pub t0: f64,
    pub t1: f64,
}

impl Cutoff {
    pub fn new(t0: f64, t1: f64) -> crate::Result<Self> {
        if !(t0 < t1) || !t0.is_finite() || !t1.is_finite() {
            return Err(crate::Error::Invalid(format!("cutoff breakpoints {t0} >= {t1}")));
        }
        Ok(Self { t0, t1 })
    }

    pub fn jet(&self, t: f64) -> Jet {
        let w = self.t1 - self.t0;
        let u = Jet([(t - self.t0) / w, 1.0 / w, 0.0, 0.0, 0.0]);
        smooth_step(&u)
    }

    pub fn value(&self, t: f64) -> f64 {
        self.jet(t).0[0]
    }

    /// `chi, chi', chi'', chi'''` at `t`.
    pub fn derivatives(&self, t: f64) -> [f64; 4] {
        self.jet(t).derivatives()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp_jet_matches_series() {
        let j = Jet::variable(0.3).exp();
        let e = 0.3f64.exp();
        assert!((j.0[0] - e).abs() < 1e-15);
        assert!((j.0[3] - e / 6.0).abs() < 1e-15);
    }

    #[test]
    fn cutoff_derivatives_match_differences() {
        let c = Cutoff::new(0.2, 1.3).unwrap();
        let h = 1e-3;
        // fourth-order central stencil
        let diff = |f: &dyn Fn(f64) -> f64, t: f64| {
            (8.0 * (f(t + h) - f(t - h)) - (f(t + 2.0 * h) - f(t - 2.0 * h))) / (12.0 * h)
        };
        for t in [0.35, 0.7, 1.1] {
            let d = c.derivatives(t);
            assert!((d[1] - diff(&|s| c.value(s), t)).abs() < 1e-8);
            assert!((d[2] - diff(&|s| c.derivatives(s)[1], t)).abs() < 1e-7);
            assert!((d[3] - diff(&|s| c.derivatives(s)[2], t)).abs() < 1e-6);
        }
    }
}
