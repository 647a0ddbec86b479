use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::kernels::{KernelFamily, TransitionKernel};

use super::KillingDetection;

/// One simulated trajectory's stepping rule and random source.
pub(crate) struct Walker {
    drift: f64,
    reflect_at: Option<f64>,
    domain: Option<(f64, f64)>,
    bridge: bool,
    rng: ChaCha8Rng,
}

impl Walker {
    pub fn new(kernel: &TransitionKernel, killing: KillingDetection, seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let (drift, reflect_at, domain) = match kernel.family() {
            KernelFamily::Brownian => (0.0, None, None),
            KernelFamily::BrownianDrift { drift } => (drift, None, None),
            KernelFamily::ReflectedBrownian { lower } => (0.0, Some(lower), None),
            KernelFamily::KilledBrownian { lower, upper } => (0.0, None, Some((lower, upper))),
        };
        Walker {
            drift,
            reflect_at,
            domain,
            bridge: killing == KillingDetection::BridgeCorrected,
            rng,
        }
    }

    /// Advances `x` by one step of length `dt`; `None` once the path is
    /// killed during the step.
    #[inline]
    pub fn step(&mut self, x: f64, dt: f64, sqrt_dt: f64) -> Option<f64> {
        let z: f64 = self.rng.sample(StandardNormal);
        let mut y = x + self.drift * dt + sqrt_dt * z;
        if let Some(l) = self.reflect_at {
            y = l + (y - l).abs();
        }
        if let Some((l, u)) = self.domain {
            if y <= l || y >= u {
                return None;
            }
            if self.bridge {
                // Exit probability of the Brownian bridge from x to y over dt.
                let p = (-2.0 * (x - l) * (y - l) / dt).exp() + (-2.0 * (u - x) * (u - y) / dt).exp();
                if self.rng.gen::<f64>() < p {
                    return None;
                }
            }
        }
        Some(y)
    }
}
