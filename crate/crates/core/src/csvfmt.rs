//! Number formatting shared by the CSV writers.

use std::fmt;

/// Shortest round-trip form; scientific notation outside `[1e-4, 1e15)`.
#[derive(Debug, Clone, Copy)]
pub struct Num(pub f64);

impl fmt::Display for Num {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = self.0;
        let a = v.abs();
        if v == 0.0 || !v.is_finite() || (1e-4..1e15).contains(&a) {
            write!(f, "{v}")
        } else {
            write!(f, "{v:e}")
        }
    }
}

#[cfg(test)]
mod tests {
    use super::Num;

    #[test]
    fn round_trips() {
        for v in [0.0, 1.0, 100.0, 2.5e-89, -3.1e20, 6.103799e-6, f64::INFINITY] {
            let s = Num(v).to_string();
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
        }
        assert_eq!(Num(2.5e-89).to_string(), "2.5e-89");
        assert_eq!(Num(100.0).to_string(), "100");
    }
}
