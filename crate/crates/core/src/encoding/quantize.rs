/// A quantized scalar: the bin index and the value the model sees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quantized {
    pub bin: u32,
    pub value: f64,
}

/// Uniform mid-rise quantizer over `[-range, range]` with `levels` bins.
///
/// Inputs are clamped to the range first. An input of exactly zero is the
/// neutral code (missing landmark or landmark sitting on its anchor) and maps
/// to `0.0` regardless of whether zero is a bin center.
///
/// The output center is computed as `(bin + 0.5 - levels / 2) * width`, which
/// makes mirrored bins produce bit-exact negated values.
pub fn quantize(v: f64, levels: u32, range: f64) -> Quantized {
    debug_assert!(levels >= 2 && range > 0.0 && v.is_finite());
    let q = levels as f64;
    let clamped = v.clamp(-range, range);
    let bin = (((clamped + range) * q / (2.0 * range)).floor() as i64).clamp(0, levels as i64 - 1) as u32;
    if v == 0.0 {
        return Quantized { bin, value: 0.0 };
    }
    let width = 2.0 * range / q;
    let centered = bin as f64 + 0.5 - q / 2.0;
    Quantized {
        bin,
        value: centered * width,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bottom_bin() {
        let r = quantize(-1.0, 10, 1.0);
        assert_eq!(r.bin, 0);
        assert!((r.value + 0.9).abs() < 1e-12);
    }

    #[test]
    fn zero_is_neutral() {
        for levels in [2, 3, 10, 11] {
            let r = quantize(0.0, levels, 1.0);
            assert_eq!(r.value, 0.0);
            assert_eq!(r.value.to_bits(), 0.0f64.to_bits());
            assert_eq!(r.bin, levels / 2);
        }
        assert_eq!(quantize(-0.0, 10, 1.0).value.to_bits(), 0.0f64.to_bits());
    }

    #[test]
    fn clamps_above_range() {
        let r = quantize(2.5, 10, 1.0);
        assert_eq!(r.bin, 9);
        assert!((r.value - 0.9).abs() < 1e-12);
        assert_eq!(quantize(1.0, 10, 1.0).bin, 9);
        assert_eq!(quantize(-7.0, 10, 1.0).bin, 0);
    }

    #[test]
    fn mirrored_bins_are_exact_negations() {
        for levels in [2u32, 3, 10, 255] {
            for bin in 0..levels {
                let v = -1.0 + (bin as f64 + 0.3) * 2.0 / levels as f64;
                assert_eq!(quantize(-v, levels, 1.0).value, -quantize(v, levels, 1.0).value);
            }
        }
    }
}
