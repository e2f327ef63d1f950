//! Deterministic, platform-stable pseudo-randomness.
//!
//! Every stochastic step in the pipeline (bootstrap draws, feature
//! subsampling, stratified sampling, synthetic data generation) pulls from
//! [`SplitMix64`], seeded explicitly. The generator is the SplitMix64 mixer of
//! Steele, Lea & Flood: pure 64-bit integer arithmetic, identical output on
//! every platform and at every optimization level.
//!
//! Streams for independent sub-tasks (one per tree, one per stage) are derived
//! with [`derive()`](fn@derive), so adding a consumer never perturbs the draws seen by
//! existing ones.
//!
//! Reference output for seed 0:
//! `0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F`.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 generator.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform f64 in [0, 1) using the top 53 bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in [0, n) by 128-bit multiply-shift.
    pub fn next_below(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        ((self.next_u64() as u128 * n as u128) >> 64) as u64
    }

    /// Standard normal via Box-Muller. Consumes two draws per pair; the
    /// second value of each pair is discarded to keep call sites stateless.
    pub fn next_normal(&mut self) -> f64 {
        // u1 in (0,1] so ln is finite
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.next_below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }

    /// Draw `k` distinct indices from [0, n), in draw order.
    pub fn sample_indices(&mut self, n: usize, k: usize) -> Vec<usize> {
        debug_assert!(k <= n);
        let mut pool: Vec<usize> = (0..n).collect();
        let mut out = Vec::with_capacity(k);
        for i in 0..k {
            let j = i + self.next_below((n - i) as u64) as usize;
            pool.swap(i, j);
            out.push(pool[i]);
        }
        out
    }
}

/// Derive an independent sub-seed for stream `stream` of a task seeded with
/// `seed`. Two mixing rounds keep adjacent streams decorrelated.
pub fn derive(seed: u64, stream: u64) -> u64 {
    let base = SplitMix64::new(seed).next_u64();
    SplitMix64::new(base.wrapping_add(stream)).next_u64()
}
