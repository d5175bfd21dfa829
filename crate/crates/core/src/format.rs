//! Fixed numeric formatting shared by every text output.

/// Scientific notation with 17 significant digits and a `.` decimal
/// separator, e.g. `1.0000000000000000e0`.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrips_exactly() {
        for x in [0.1, -2.5e-300, 1.0 / 3.0, 12345.678, 0.0] {
            let s = fmt17(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
        assert_eq!(fmt17(1.0), "1.0000000000000000e0");
    }
}
