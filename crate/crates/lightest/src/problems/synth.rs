//! Deterministic synthetic inputs. Images are reproducible bit-exactly: the
//! noise source is splitmix64 (seeded directly with the spec seed), gaussians
//! come from one Box-Muller transform per pixel, and pixels are filled in
//! row-major order.

use crate::problems::image::Image;

/// splitmix64; passes through the standard finalizer per draw.
#[derive(Clone, Debug)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1).
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Uniform in 0..n.
    pub fn below(&mut self, n: u64) -> u64 {
        // modulo bias is irrelevant at the ranges used here
        self.next_u64() % n.max(1)
    }

    /// Standard normal via Box-Muller; two uniform draws per sample.
    pub fn gaussian(&mut self) -> f64 {
        let u1 = 1.0 - self.next_f64(); // (0, 1]
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }
}

/// A noisy circle benchmark instance: a square image of side `2r + 1` with a
/// centered disc of the given radius, darker inside (64) than outside (192),
/// corrupted by per-pixel gaussian noise of deviation `sigma`.
#[derive(Clone, Debug)]
pub struct CircleSpec {
    pub r: usize,
    pub sigma: f64,
    pub circle_radius: f64,
    pub seed: u64,
}

impl CircleSpec {
    pub fn new(r: usize, sigma: f64, circle_radius: f64, seed: u64) -> Self {
        assert!(sigma >= 0.0);
        assert!(circle_radius < r as f64, "circle must fit inside the ball");
        CircleSpec {
            r,
            sigma,
            circle_radius,
            seed,
        }
    }

    /// Benchmark instance for a seed: radius varies deterministically in
    /// [0.4, 0.8) * r.
    pub fn for_seed(r: usize, sigma: f64, seed: u64) -> Self {
        let mut rng = SplitMix64::new(seed ^ 0xc1_5c_1e);
        let radius = r as f64 * (0.4 + 0.4 * rng.next_f64());
        CircleSpec::new(r, sigma, radius, seed)
    }

    pub fn center(&self) -> (i32, i32) {
        (self.r as i32, self.r as i32)
    }

    pub fn generate(&self) -> Image {
        let side = 2 * self.r + 1;
        let mut img = Image::new(side, side);
        let mut rng = SplitMix64::new(self.seed);
        let c = self.r as f64;
        for y in 0..side {
            for x in 0..side {
                let dx = x as f64 - c;
                let dy = y as f64 - c;
                let base: f64 = if (dx * dx + dy * dy).sqrt() <= self.circle_radius {
                    64.0
                } else {
                    192.0
                };
                let noisy = base + self.sigma * rng.gaussian();
                img.set(x, y, noisy.round().clamp(0.0, 255.0) as u8);
            }
        }
        img
    }
}
