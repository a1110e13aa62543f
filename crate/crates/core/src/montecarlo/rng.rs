//! Per-unit random streams and dyadic Brownian refinement.
//!
//! Every simulation unit (a path or an antithetic pair) owns independent
//! ChaCha streams keyed by `(seed, unit, channel)`, so results do not
//! depend on which worker runs which unit. Channel 0 carries auxiliary
//! draws (mortality, partial steps); channel `ℓ + 1` carries the normals
//! added at refinement level `ℓ`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Open01, StandardNormal};

const CHANNEL_BITS: u32 = 8;

pub(crate) fn stream(seed: u64, unit: u64, channel: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((unit << CHANNEL_BITS) | channel);
    rng
}

pub(crate) struct AuxStream(ChaCha8Rng);

impl AuxStream {
    pub(crate) fn new(seed: u64, unit: u64) -> Self {
        AuxStream(stream(seed, unit, 0))
    }

    pub(crate) fn uniform(&mut self) -> f64 {
        self.0.sample(Open01)
    }

    pub(crate) fn normal(&mut self) -> f64 {
        self.0.sample(StandardNormal)
    }
}

/// Standard normal increments on the grid `dt/2^level`, built from the
/// coarse-grid increments by Brownian bridging. Two sources with the same
/// `(seed, unit)` and different levels describe the same Brownian path.
pub(crate) struct Brownian {
    level: u32,
    channels: Vec<ChaCha8Rng>,
    buffer: Vec<f64>,
    next: usize,
}

impl Brownian {
    pub(crate) fn new(seed: u64, unit: u64, level: u32) -> Self {
        assert!(level < (1 << CHANNEL_BITS) - 1);
        let channels = (0..=level)
            .map(|l| stream(seed, unit, l as u64 + 1))
            .collect();
        Brownian {
            level,
            channels,
            buffer: Vec::with_capacity(1 << level),
            next: 0,
        }
    }

    /// The next standardized fine-step increment.
    pub(crate) fn next(&mut self) -> f64 {
        if self.level == 0 {
            return self.channels[0].sample(StandardNormal);
        }
        if self.next >= self.buffer.len() {
            self.refill();
        }
        let z = self.buffer[self.next];
        self.next += 1;
        z
    }

    fn refill(&mut self) {
        // Work with unit-variance coarse increments; a segment of relative
        // length 2^-l has variance 2^-l and is split by its bridge midpoint.
        self.buffer.clear();
        let z0: f64 = self.channels[0].sample(StandardNormal);
        self.buffer.push(z0);
        let mut len = 1.0f64;
        for l in 1..=self.level as usize {
            let half = 0.5 * len;
            let sd = (0.25 * len).sqrt();
            let mut split = Vec::with_capacity(self.buffer.len() * 2);
            for &w in &self.buffer {
                let z: f64 = self.channels[l].sample(StandardNormal);
                let first = 0.5 * w + sd * z;
                split.push(first);
                split.push(w - first);
            }
            self.buffer = split;
            len = half;
        }
        let scale = len.sqrt().recip();
        for w in &mut self.buffer {
            *w *= scale;
        }
        self.next = 0;
    }
}
