/// Deterministic generator used for every random decision in the crate.
///
/// The algorithm is splitmix64 (Steele, Lea & Flood): state advances by the
/// 64-bit golden-ratio constant and each output is the avalanche mix of the
/// new state. The integer stream is bit-reproducible across platforms.
///
/// Draw accounting, relied on by the frozen-noise backward passes:
/// - `next_u64` / `next_f64`: one state step each.
/// - `normal` / `abs_normal`: exactly two state steps (Box-Muller, cosine
///   branch only; the sine mate is discarded).
#[derive(Debug, Clone)]
pub struct Rng {
    state: u64,
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng { state: seed }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        mix64(self.state)
    }

    /// Uniform in [0, 1) with 53 random bits.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal via Box-Muller; consumes exactly two `next_u64`.
    pub fn normal(&mut self) -> f64 {
        // u1 in (0, 1] so the log is finite.
        let u1 = ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Half-normal |xi|; same draw count as `normal`.
    pub fn abs_normal(&mut self) -> f64 {
        self.normal().abs()
    }

    /// Uniform integer in [0, bound) by the multiply-shift reduction.
    /// Deterministic; the O(bound/2^64) bias is irrelevant at our sizes.
    pub fn below(&mut self, bound: u64) -> u64 {
        debug_assert!(bound > 0);
        ((self.next_u64() as u128 * bound as u128) >> 64) as u64
    }

    /// Fisher-Yates shuffle driven by `below`.
    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        for i in (1..xs.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            xs.swap(i, j);
        }
    }

    /// Independent stream derived from the current state and `id`.
    /// Pure function of (state, id): does not advance `self`.
    pub fn substream(&self, id: u64) -> Rng {
        Rng::new(mix64(
            self.state ^ mix64(id.wrapping_mul(GOLDEN) ^ 0xA076_1D64_78BD_642F),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_seeds_equal_streams() {
        let mut a = Rng::new(7);
        let mut b = Rng::new(7);
        for _ in 0..100_000 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn different_seeds_differ() {
        let mut a = Rng::new(1);
        let mut b = Rng::new(2);
        let xs: Vec<u64> = (0..16).map(|_| a.next_u64()).collect();
        let ys: Vec<u64> = (0..16).map(|_| b.next_u64()).collect();
        assert_ne!(xs, ys);
    }

    #[test]
    fn substream_is_pure_and_decorrelated() {
        let rng = Rng::new(99);
        let mut s0 = rng.substream(0);
        let mut s0b = rng.substream(0);
        let mut s1 = rng.substream(1);
        assert_eq!(s0.next_u64(), s0b.next_u64());
        assert_ne!(s0.next_u64(), s1.next_u64());
    }

    #[test]
    fn uniform_unit_interval() {
        let mut rng = Rng::new(3);
        for _ in 0..10_000 {
            let u = rng.next_f64();
            assert!((0.0..1.0).contains(&u));
        }
    }

    #[test]
    fn normal_consumes_two_draws() {
        let mut a = Rng::new(5);
        let mut b = Rng::new(5);
        let _ = a.normal();
        b.next_u64();
        b.next_u64();
        assert_eq!(a.next_u64(), b.next_u64());
    }

    #[test]
    fn normal_moments() {
        let mut rng = Rng::new(11);
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((var - 1.0).abs() < 0.02, "var {var}");
    }

    #[test]
    fn shuffle_deterministic_permutation() {
        let mut xs: Vec<u32> = (0..100).collect();
        let mut ys: Vec<u32> = (0..100).collect();
        Rng::new(8).shuffle(&mut xs);
        Rng::new(8).shuffle(&mut ys);
        assert_eq!(xs, ys);
        let mut sorted = xs.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..100).collect::<Vec<u32>>());
    }
}
