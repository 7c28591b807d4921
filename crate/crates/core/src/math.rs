//! Small numeric helpers shared by the inference stages.

/// Clamps a probability into `[eps, 1 - eps]` so it can safely enter a logarithm.
#[inline]
pub fn clamp(p: f64, eps: f64) -> f64 {
    debug_assert!(eps > 0.0 && eps < 0.5);
    p.clamp(eps, 1.0 - eps)
}

/// Logistic function, evaluated without overflow for any finite input.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Normalises `exp(scores)` together with `extra` additional outcomes of score 0.
///
/// Returns the probabilities of the scored outcomes and the probability of each of
/// the `extra` zero-score outcomes.
pub fn softmax_with_zeros(scores: &[f64], extra: usize) -> (Vec<f64>, f64) {
    let mut max = if extra > 0 { 0.0 } else { f64::NEG_INFINITY };
    for &s in scores {
        if s > max {
            max = s;
        }
    }
    if !max.is_finite() {
        // No outcomes at all.
        return (Vec::new(), 0.0);
    }
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let zero = (-max).exp();
    let total: f64 = exps.iter().sum::<f64>() + extra as f64 * zero;
    (exps.into_iter().map(|e| e / total).collect(), zero / total)
}

/// Stable 64-bit hash of a byte stream, mixed with a seed.
///
/// FNV-1a followed by a splitmix64 finaliser; unlike `DefaultHasher` the output is
/// fixed across toolchains, which keeps seeded partitions reproducible.
pub fn stable_hash(seed: u64, parts: &[&[u8]]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ seed.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    for part in parts {
        for &b in *part {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        // field separator
        h ^= 0xff;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut z = h.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clamp_examples() {
        assert_eq!(clamp(0.0, 1e-6), 1e-6);
        assert_eq!(clamp(1.0, 1e-6), 1.0 - 1e-6);
        assert_eq!(clamp(0.8, 1e-6), 0.8);
    }

    #[test]
    fn sigmoid_is_stable_at_extremes() {
        for &x in &[1e4, -1e4, 745.0, -745.0, 0.0, 3.5, -3.5] {
            let s = sigmoid(x);
            assert!(s.is_finite() && (0.0..=1.0).contains(&s));
            assert!((sigmoid(x) + sigmoid(-x) - 1.0).abs() < 1e-12);
        }
        assert_eq!(sigmoid(0.0), 0.5);
    }

    #[test]
    fn softmax_with_zeros_sums_to_one() {
        let (p, z) = softmax_with_zeros(&[10.8, 5.4], 9);
        let total: f64 = p.iter().sum::<f64>() + 9.0 * z;
        assert!((total - 1.0).abs() < 1e-12);
        let (p, z) = softmax_with_zeros(&[], 4);
        assert!(p.is_empty());
        assert!((z - 0.25).abs() < 1e-15);
        let (p, _) = softmax_with_zeros(&[2000.0, -2000.0], 0);
        assert!((p[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn stable_hash_depends_on_seed_and_fields() {
        let a = stable_hash(1, &[b"ab", b"c"]);
        assert_eq!(a, stable_hash(1, &[b"ab", b"c"]));
        assert_ne!(a, stable_hash(2, &[b"ab", b"c"]));
        assert_ne!(a, stable_hash(1, &[b"a", b"bc"]));
    }
}
