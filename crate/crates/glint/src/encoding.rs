//! NeRF-style positional encoding: the input vector followed by
//! `sin(2^k pi x), cos(2^k pi x)` per component for `k = 0..L`.

use crate::math::Real;

/// Encoded length for a 3-vector with `l` frequency bands: `3 + 2*3*l`.
pub fn encoded_len(l: usize) -> usize {
    3 + 6 * l
}

/// Encode a 3-vector; output length is [`encoded_len`].
pub fn positional_encoding<S: Real>(p: [S; 3], l: usize) -> Vec<S> {
    let mut out = Vec::with_capacity(encoded_len(l));
    out.extend_from_slice(&p);
    let pi = std::f64::consts::PI;
    for k in 0..l {
        let freq = (1u64 << k) as f64 * pi;
        for &c in &p {
            out.push((c * freq).sin());
        }
        for &c in &p {
            out.push((c * freq).cos());
        }
    }
    out
}

/// Accumulate `d_loss/d_p` given `d_loss/d_encoded`, for the plain path.
pub fn positional_encoding_backward(p: [f64; 3], l: usize, d_encoded: &[f64], d_p: &mut [f64; 3]) {
    debug_assert_eq!(d_encoded.len(), encoded_len(l));
    for i in 0..3 {
        d_p[i] += d_encoded[i];
    }
    let pi = std::f64::consts::PI;
    for k in 0..l {
        let freq = (1u64 << k) as f64 * pi;
        let base = 3 + 6 * k;
        for i in 0..3 {
            let arg = p[i] * freq;
            d_p[i] += d_encoded[base + i] * freq * arg.cos();
            d_p[i] -= d_encoded[base + 3 + i] * freq * arg.sin();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_input_encodes_to_zero_sines_unit_cosines() {
        let e = positional_encoding([0.0, 0.0, 0.0], 4);
        assert_eq!(e.len(), encoded_len(4));
        assert!(e[..3].iter().all(|&x| x == 0.0));
        for k in 0..4 {
            let base = 3 + 6 * k;
            assert!(e[base..base + 3].iter().all(|&x| x == 0.0), "sin terms");
            assert!(e[base + 3..base + 6].iter().all(|&x| x == 1.0), "cos terms");
        }
    }

    #[test]
    fn length_for_l6_is_39() {
        assert_eq!(encoded_len(6), 39);
        assert_eq!(positional_encoding([0.1, 0.2, 0.3], 6).len(), 39);
    }

    #[test]
    fn injective_on_grid() {
        // no collisions on a coarse grid over [-1, 1]^3
        let mut seen: Vec<(Vec<u64>, [f64; 3])> = Vec::new();
        let n = 7;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let p = [
                        -1.0 + 2.0 * i as f64 / (n - 1) as f64,
                        -1.0 + 2.0 * j as f64 / (n - 1) as f64,
                        -1.0 + 2.0 * k as f64 / (n - 1) as f64,
                    ];
                    let e = positional_encoding(p, 6);
                    let bits: Vec<u64> = e.iter().map(|x| x.to_bits()).collect();
                    for (other_bits, other_p) in &seen {
                        if *other_bits == bits {
                            let d = crate::math::distance(*other_p, p);
                            assert!(d < 1e-9, "collision between distinct points");
                        }
                    }
                    seen.push((bits, p));
                }
            }
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        let p = [0.31, -0.47, 0.83];
        let l = 5;
        // d(sum of encoded)/dp against central differences
        let mut d_p = [0.0; 3];
        let ones = vec![1.0; encoded_len(l)];
        positional_encoding_backward(p, l, &ones, &mut d_p);
        let h = 1e-6;
        for i in 0..3 {
            let mut pp = p;
            pp[i] += h;
            let mut pm = p;
            pm[i] -= h;
            let fp: f64 = positional_encoding(pp, l).iter().sum();
            let fm: f64 = positional_encoding(pm, l).iter().sum();
            let fd = (fp - fm) / (2.0 * h);
            assert!((d_p[i] - fd).abs() <= 1e-6 * fd.abs().max(1.0), "{} vs {}", d_p[i], fd);
        }
    }
}
