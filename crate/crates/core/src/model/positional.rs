use super::ModelError;

/// Sinusoidal position table, `len x dim` row-major:
/// `PE(pos, 2i) = sin(pos / 10000^(2i/dim))`, `PE(pos, 2i+1) = cos(...)`.
pub fn sinusoidal_pe(len: usize, dim: usize) -> Result<Vec<f64>, ModelError> {
    if dim < 2 || !dim.is_multiple_of(2) {
        return Err(ModelError::InvalidConfig(format!(
            "positional encoding needs an even dimension >= 2, got {dim}"
        )));
    }
    let mut table = vec![0.0; len * dim];
    for pos in 0..len {
        for i in 0..dim / 2 {
            let freq = 10000f64.powf(-((2 * i) as f64) / dim as f64);
            let angle = pos as f64 * freq;
            table[pos * dim + 2 * i] = angle.sin();
            table[pos * dim + 2 * i + 1] = angle.cos();
        }
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_entries() {
        let pe = sinusoidal_pe(4, 8).unwrap();
        assert_eq!(pe[0], 0.0);
        assert_eq!(pe[1], 1.0);
        assert!((pe[8] - 0.841471).abs() < 1e-6);
        // second frequency pair at position 1: 10000^(-2/8) = 0.1
        assert!((pe[8 + 2] - 0.1f64.sin()).abs() < 1e-12);
        assert!(pe.iter().all(|v| (-1.0..=1.0).contains(v)));
    }

    #[test]
    fn odd_dimension_rejected() {
        assert!(sinusoidal_pe(3, 7).is_err());
        assert!(sinusoidal_pe(3, 0).is_err());
    }
}
