use crate::error::{Error, Result};

/// Acquisition timing of one dual-exposure sample, in seconds.
///
/// The short exposure is an instant at `t_s`; the long exposure integrates
/// over `[t_b, t_e]`, which starts after it. `delta_t` is the half-width of
/// the event window handed to the enhancement path.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExposureTiming {
    pub t_s: f64,
    pub t_b: f64,
    pub t_e: f64,
    pub delta_t: f64,
}

impl ExposureTiming {
    pub fn new(t_s: f64, t_b: f64, t_e: f64, delta_t: f64) -> Result<Self> {
        let t = Self { t_s, t_b, t_e, delta_t };
        match t.violations().into_iter().next() {
            None => Ok(t),
            Some(v) => Err(Error::param("timing", v)),
        }
    }

    /// Long-exposure duration `T = t_e - t_b`.
    pub fn exposure(&self) -> f64 {
        self.t_e - self.t_b
    }

    /// Exposure interval `T_i = t_b - t_s`.
    pub fn interval(&self) -> f64 {
        self.t_b - self.t_s
    }

    /// Event window of the deblurring path, `[t_s, t_e]`.
    pub fn deblur_window(&self) -> (f64, f64) {
        (self.t_s, self.t_e)
    }

    /// Event window of the enhancement path, `[t_s - dt, t_s + dt]`.
    pub fn enhance_window(&self) -> (f64, f64) {
        (self.t_s - self.delta_t, self.t_s + self.delta_t)
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let all = [self.t_s, self.t_b, self.t_e, self.delta_t];
        if all.iter().any(|v| !v.is_finite()) {
            out.push("timing not finite".to_string());
            return out;
        }
        if !(self.t_s < self.t_b && self.t_b < self.t_e) {
            out.push("timing order violated".to_string());
        }
        if !(self.delta_t > 0.0) {
            out.push("delta_t must be positive".to_string());
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_quantities() {
        let t = ExposureTiming::new(0.0, 0.1, 0.5, 0.05).unwrap();
        assert_eq!(t.interval(), 0.1);
        assert_eq!(t.exposure(), 0.5 - 0.1);
        assert_eq!(t.enhance_window(), (-0.05, 0.05));
        assert!(ExposureTiming::new(0.2, 0.1, 0.5, 0.05).is_err());
        assert!(ExposureTiming::new(0.0, 0.1, 0.5, 0.0).is_err());
    }
}
